//! Graph Laplacians, spanning-tree counts and the rectangle asymptotics.

use std::collections::{BTreeMap, VecDeque};

use astro_float::BigFloat;
use num_bigint::{BigInt, BigUint};
use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive};
use serde::Serialize;
use thiserror::Error;

use crate::hp::{to_f64, Hp};
use crate::kasteleyn::{build_kasteleyn, count_tilings_exact, KasteleynError};
use crate::linalg::bareiss_det_int;
use crate::region::{temperleyan_from_subgraph, GridSubgraph, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("graph is disconnected")]
    Disconnected,
    #[error("nome {0} is outside (0, 1)")]
    DomainError(f64),
    #[error("root {0} is not a vertex")]
    BadRoot(usize),
    #[error(transparent)]
    Kasteleyn(#[from] KasteleynError),
}

/// Undirected multigraph on vertices `0..n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    pub n: usize,
    pub adj: Vec<Vec<usize>>,
}

impl Graph {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        Graph { n, adj }
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (a, ns) in self.adj.iter().enumerate() {
            for &b in ns {
                if a < b {
                    out.push((a, b));
                }
            }
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut seen = vec![false; self.n];
        seen[0] = true;
        let mut queue = VecDeque::from([0]);
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &u in &self.adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    queue.push_back(u);
                }
            }
        }
        count == self.n
    }

    /// Grid subgraph as an indexed graph; vertex order is sorted point order.
    pub fn from_grid(h: &GridSubgraph) -> (Graph, Vec<Point>) {
        let pts = h.vertex_list();
        let idx: BTreeMap<Point, usize> = pts.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        let edges: Vec<(usize, usize)> = h.edges.iter().map(|(a, b)| (idx[a], idx[b])).collect();
        (Graph::new(pts.len(), &edges), pts)
    }
}

/// Laplacian `D - A` indexed by the sorted vertex list of `H`.
#[derive(Clone, Debug, PartialEq)]
pub struct LaplacianMatrix {
    pub index: Vec<Point>,
    pub entries: Vec<Vec<i64>>,
}

pub fn laplacian(h: &GridSubgraph) -> LaplacianMatrix {
    let (g, index) = Graph::from_grid(h);
    LaplacianMatrix { index, entries: graph_laplacian(&g) }
}

pub fn graph_laplacian(g: &Graph) -> Vec<Vec<i64>> {
    let mut l = vec![vec![0i64; g.n]; g.n];
    for (a, ns) in g.adj.iter().enumerate() {
        for &b in ns {
            if a != b {
                l[a][a] += 1;
                l[a][b] -= 1;
            }
        }
    }
    l
}

/// Matrix-tree count with row and column `root` deleted.
pub fn graph_tree_count(g: &Graph, root: usize) -> Result<BigUint, TreeError> {
    if root >= g.n {
        return Err(TreeError::BadRoot(root));
    }
    if !g.is_connected() {
        return Err(TreeError::Disconnected);
    }
    let l = graph_laplacian(g);
    let reduced: Vec<Vec<BigInt>> = (0..g.n)
        .filter(|&i| i != root)
        .map(|i| (0..g.n).filter(|&j| j != root).map(|j| BigInt::from(l[i][j])).collect())
        .collect();
    Ok(bareiss_det_int(reduced).abs().to_biguint().expect("nonnegative"))
}

/// Spanning trees of `H` by Kirchhoff's theorem, rooted at the base vertex.
pub fn spanning_tree_count(h: &GridSubgraph) -> Result<BigUint, TreeError> {
    let (g, pts) = Graph::from_grid(h);
    let root = pts.iter().position(|&p| p == h.base_vertex).ok_or(TreeError::BadRoot(usize::MAX))?;
    graph_tree_count(&g, root)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TemperleyCheck {
    pub trees: BigUint,
    pub tilings: BigUint,
    pub equal: bool,
}

pub fn verify_temperley(h: &GridSubgraph) -> Result<TemperleyCheck, TreeError> {
    let trees = spanning_tree_count(h)?;
    let p = temperleyan_from_subgraph(h);
    let tilings = count_tilings_exact(&build_kasteleyn(&p)?);
    let equal = trees == tilings;
    Ok(TemperleyCheck { trees, tilings, equal })
}

/// `m x n` grid graph dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RectangleSpec {
    pub m: u32,
    pub n: u32,
}

impl RectangleSpec {
    pub fn new(m: u32, n: u32) -> Self {
        assert!(m >= 1 && n >= 1, "rectangle dimensions must be positive");
        RectangleSpec { m, n }
    }

    pub fn tau(&self) -> Ratio<u32> {
        Ratio::new(self.n, self.m)
    }
}

/// `log(#trees)` of the `m x n` grid from the Laplacian spectrum.
///
/// The product of the nonzero eigenvalues `4 - 2cos(pi k/n) - 2cos(pi j/m)`
/// equals `mn` times the tree count, so `log(mn)` is subtracted.
pub fn rectangle_log_trees(spec: RectangleSpec, precision_bits: usize) -> BigFloat {
    let mut hp = Hp::new(precision_bits + 32);
    let (m, n) = (spec.m as i64, spec.n as i64);
    let pi = hp.pi();
    let cosines = |hp: &mut Hp, len: i64| -> Vec<BigFloat> {
        (0..len)
            .map(|k| {
                let a = hp.div(&hp.mul(&pi, &hp.int(k)), &hp.int(len));
                let c = hp.cos(&a);
                hp.sub(&hp.int(2), &hp.mul(&hp.int(2), &c))
            })
            .collect()
    };
    let cm = cosines(&mut hp, m);
    let cn = cosines(&mut hp, n);
    let mut prod = hp.int(1);
    for (j, a) in cm.iter().enumerate() {
        for (k, b) in cn.iter().enumerate() {
            if j == 0 && k == 0 {
                continue;
            }
            prod = hp.mul(&prod, &hp.add(a, b));
        }
    }
    let l = hp.ln(&prod);
    let mn = hp.int(m * n);
    let lmn = hp.ln(&mn);
    hp.sub(&l, &lmn)
}

/// Catalan's constant from the rapidly convergent series
/// `G = (pi/8) log(2 + sqrt 3) + (3/8) sum (n!)^2 / ((2n)! (2n+1)^2)`.
pub fn catalan_constant(precision_bits: usize) -> BigFloat {
    let mut hp = Hp::new(precision_bits + 32);
    let mut term = hp.int(1);
    let mut sum = hp.int(0);
    let eps = hp.f(2f64.powi(-(precision_bits as i32) - 8));
    let mut k: i64 = 0;
    loop {
        let d = hp.int((2 * k + 1) * (2 * k + 1));
        let t = hp.div(&term, &d);
        sum = hp.add(&sum, &t);
        if t.abs() < eps {
            break;
        }
        k += 1;
        term = hp.div(&hp.mul(&term, &hp.int(k * k)), &hp.int(2 * k * (2 * k - 1)));
    }
    let three = hp.int(3);
    let root3 = hp.sqrt(&three);
    let l = hp.ln(&hp.add(&hp.int(2), &root3));
    let pi = hp.pi();
    let a = hp.div(&hp.mul(&pi, &l), &hp.int(8));
    let b = hp.div(&hp.mul(&three, &sum), &hp.int(8));
    hp.add(&a, &b)
}

/// `eta(q) = q^(1/24) prod (1 - q^k)`, truncated once the tail is below `2^-bits`.
pub fn dedekind_eta(q: &BigFloat, precision_bits: usize) -> Result<BigFloat, TreeError> {
    let qf = to_f64(q);
    if !(qf > 0.0 && qf < 1.0) {
        return Err(TreeError::DomainError(qf));
    }
    // Tail bound |log prod_{k>K}(1-q^k)| <= 2 q^(K+1) / (1-q).
    let target = -(precision_bits as f64 + 4.0) * 2f64.ln();
    let terms = ((target + (1.0 - qf).ln() - 2f64.ln()) / qf.ln()).ceil().max(1.0) as usize;
    Ok(dedekind_eta_terms(q, precision_bits, terms))
}

/// Eta with an explicit number of product factors.
pub fn dedekind_eta_terms(q: &BigFloat, precision_bits: usize, terms: usize) -> BigFloat {
    let mut hp = Hp::new(precision_bits + 32);
    let one = hp.int(1);
    let mut prod = hp.int(1);
    let mut qk = hp.int(1);
    for _ in 0..terms {
        qk = hp.mul(&qk, q);
        prod = hp.mul(&prod, &hp.sub(&one, &qk));
    }
    let lq = hp.ln(q);
    let pref = hp.exp(&hp.div(&lq, &hp.int(24)));
    hp.mul(&pref, &prod)
}

/// Coefficient of `log 2` in the additive constant of the rectangle expansion.
/// Both the area/perimeter rewriting of the expansion and exact counts give `+5/4`.
pub const RECTFORM_LOG2_COEFF: f64 = 1.25;

/// The alternative coefficient `-1/4`. It misses exact counts by `(3/2) log 2`.
pub const RECTFORM_ALT_LOG2_COEFF: f64 = -0.25;

/// `4Gmn/pi + (m+n) log(sqrt2 - 1) - (1/2) log m + log eta(e^(-2 pi n/m)) + (5/4) log 2`.
pub fn rectform_expansion(spec: RectangleSpec, precision_bits: usize) -> BigFloat {
    rectform_with_constant(spec, precision_bits, RECTFORM_LOG2_COEFF)
}

pub fn rectform_with_constant(spec: RectangleSpec, precision_bits: usize, log2_coeff: f64) -> BigFloat {
    let g = catalan_constant(precision_bits);
    let mut hp = Hp::new(precision_bits + 32);
    let (m, n) = (spec.m as i64, spec.n as i64);
    let pi = hp.pi();
    let two = hp.int(2);
    let root2 = hp.sqrt(&two);
    let l = hp.ln(&hp.sub(&root2, &hp.int(1)));
    let t1 = hp.div(&hp.mul(&hp.mul(&hp.int(4), &g), &hp.int(m * n)), &pi);
    let t2 = hp.mul(&hp.int(m + n), &l);
    let lm = hp.ln(&hp.int(m));
    let t3 = hp.div(&lm, &two);
    let arg = hp.div(&hp.mul(&hp.mul(&two, &pi), &hp.int(n)), &hp.int(m));
    let q = hp.exp(&arg.neg());
    let eta = dedekind_eta(&q, precision_bits).expect("nome in (0,1)");
    let t4 = hp.ln(&eta);
    let ln2 = hp.ln(&two);
    let t5 = hp.mul(&hp.f(log2_coeff), &ln2);
    let s = hp.add(&hp.sub(&hp.add(&t1, &t2), &t3), &hp.add(&t4, &t5));
    s
}

/// The same expansion written through area and perimeter of the Temperleyan rectangle:
/// `(G/pi) A + (G/(2pi) + log(sqrt2-1)/4) Perim - (1/2) log m + log eta + C`,
/// `C = log(2^(5/4)/(1+sqrt2)) + 2G/pi`.
pub fn rectform_area_perimeter(spec: RectangleSpec) -> f64 {
    let g = to_f64(&catalan_constant(64));
    let pi = std::f64::consts::PI;
    let (m, n) = (spec.m as f64, spec.n as f64);
    let area = 4.0 * n * m - 2.0 * n - 2.0 * m;
    let perim = 4.0 * n + 4.0 * m - 4.0;
    let l = (2f64.sqrt() - 1.0).ln();
    let q = (-2.0 * pi * n / m).exp();
    let eta = to_f64(&dedekind_eta(&BigFloat::from_f64(q, 128), 64).expect("nome"));
    let c = (2f64.powf(1.25) / (1.0 + 2f64.sqrt())).ln() + 2.0 * g / pi;
    g / pi * area + (g / (2.0 * pi) + l / 4.0) * perim - 0.5 * m.ln() + eta.ln() + c
}

/// Constants of the tiling-count expansion: `c0 = G/pi`, `c1 = G/(2pi) + log(sqrt2-1)/4`.
pub fn entropy_constants() -> (f64, f64) {
    let g = to_f64(&catalan_constant(64));
    let pi = std::f64::consts::PI;
    (g / pi, g / (2.0 * pi) + (2f64.sqrt() - 1.0).ln() / 4.0)
}

pub fn biguint_to_f64(x: &BigUint) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}
