//! Coupling functions (inverse Kasteleyn matrices), local statistics,
//! Green's-function identities and height functions.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::kasteleyn::{band_matrix, build_kasteleyn, enumerate_tilings, unit_value, KasteleynError, KasteleynMatrix, Tiling};
use crate::linalg::{det_gauss_rat, gauss_rat_to_f64, invert_gauss_rat, invert_rational, rat, GaussRat};
use crate::region::{add, is_black, temperleyan_from_subgraph, CellClass, CellRegion, GridSubgraph, Point, DIRS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CouplingError {
    #[error("cells {0:?} and {1:?} are not an adjacent white/black pair")]
    NonAdjacentPair(Point, Point),
    #[error("expected a white and a black cell, got {0:?} and {1:?}")]
    ColorMismatch(Point, Point),
    #[error("graph is disconnected")]
    Disconnected,
    #[error("tiling is not a perfect matching of the region: {0}")]
    InconsistentTiling(String),
    #[error(transparent)]
    Kasteleyn(#[from] KasteleynError),
}

fn gauss_rat(re: i64, im: i64) -> GaussRat {
    Complex::new(rat(re), rat(im))
}

fn unit_rat(u: u8) -> GaussRat {
    let v = unit_value(u);
    gauss_rat(v.re, v.im)
}

/// Exact inverse of a Kasteleyn matrix. `inverse[b][w]` is `C(w, b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMatrix {
    pub kasteleyn: KasteleynMatrix,
    pub inverse: Vec<Vec<GaussRat>>,
}

impl CouplingMatrix {
    /// `C(w, b)`; zero if either cell is absent.
    pub fn get(&self, w: Point, b: Point) -> GaussRat {
        match (self.kasteleyn.white_index(w), self.kasteleyn.black_index(b)) {
            (Some(i), Some(j)) => self.inverse[j][i].clone(),
            _ => GaussRat::zero(),
        }
    }

    /// Entry of the full symmetric coupling matrix on all cells; same-colour entries vanish.
    pub fn full(&self, v1: Point, v2: Point) -> GaussRat {
        match (is_black(v1), is_black(v2)) {
            (false, true) => self.get(v1, v2),
            (true, false) => self.get(v2, v1),
            _ => GaussRat::zero(),
        }
    }

    /// Exact check of `K C = I`.
    pub fn is_exact_inverse(&self) -> bool {
        let n = self.kasteleyn.dim();
        (0..n).all(|i| {
            (0..n).all(|j| {
                let mut s = GaussRat::zero();
                for &(b, u) in self.kasteleyn.row(i) {
                    s = s + unit_rat(u) * &self.inverse[b][j];
                }
                if i == j {
                    s.is_one()
                } else {
                    s.is_zero()
                }
            })
        })
    }
}

pub fn coupling_matrix(k: &KasteleynMatrix) -> Result<CouplingMatrix, CouplingError> {
    let dense: Vec<Vec<GaussRat>> = k
        .to_gauss_dense()
        .iter()
        .map(|r| r.iter().map(|z| Complex::new(BigRational::from_integer(z.re.clone()), BigRational::from_integer(z.im.clone()))).collect())
        .collect();
    let inverse = invert_gauss_rat(&dense).ok_or(KasteleynError::SingularMatrix)?;
    Ok(CouplingMatrix { kasteleyn: k.clone(), inverse })
}

/// Probability of a set of dominos, `det[K(w_i,b_i) C(w_j,b_i)]`, exactly.
pub fn local_probability(c: &CouplingMatrix, dominos: &[(Point, Point)]) -> Result<BigRational, CouplingError> {
    let k = &c.kasteleyn;
    let mut seen = BTreeSet::new();
    for &(w, b) in dominos {
        if k.entry(w, b).is_none() || !seen.insert(w) || !seen.insert(b) {
            return Err(CouplingError::NonAdjacentPair(w, b));
        }
    }
    let m: Vec<Vec<GaussRat>> = dominos
        .iter()
        .map(|&(wi, bi)| {
            let kv = unit_rat(k.entry(wi, bi).expect("checked"));
            dominos.iter().map(|&(wj, _)| &kv * c.get(wj, bi)).collect()
        })
        .collect();
    let d = det_gauss_rat(&m);
    debug_assert!(d.im.is_zero(), "probability must be real");
    Ok(d.re)
}

/// Floating-point column of the coupling function at a white cell: `C(w, b)` for every black `b`,
/// by banded LU. Usable on regions far beyond exact arithmetic.
pub fn coupling_column_f64(k: &KasteleynMatrix, w: Point) -> Option<HashMap<Point, Complex64>> {
    let i = k.white_index(w)?;
    let mut rhs = vec![Complex64::new(0.0, 0.0); k.dim()];
    rhs[i] = Complex64::new(1.0, 0.0);
    let x = band_matrix(k).solve(&rhs)?;
    Some(k.blacks.iter().copied().zip(x).collect())
}

/// Exact Green's function of a rooted (Dirichlet) Laplacian.
///
/// For the primal graph `values[x][y] = G(x, y)` with `ΔG(x, ·) = δ_x − δ_b`
/// and `G(·, b) = 0`. For the dual, vertices are the bounded faces and the
/// outer face carries the value zero.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteGreens {
    pub index: Vec<Point>,
    pub values: Vec<Vec<BigRational>>,
    pub base: Option<Point>,
    position: HashMap<Point, usize>,
}

impl DiscreteGreens {
    fn from_matrix(index: Vec<Point>, lap: Vec<Vec<BigRational>>, base: Option<Point>) -> Self {
        let values = invert_rational(&lap).expect("rooted Laplacian is nonsingular");
        let position = index.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        DiscreteGreens { index, values, base, position }
    }

    /// `G(x, y)`; zero whenever either point is the root or outside the graph.
    pub fn get(&self, x: Point, y: Point) -> BigRational {
        match (self.position.get(&x), self.position.get(&y)) {
            (Some(&i), Some(&j)) => self.values[i][j].clone(),
            _ => BigRational::zero(),
        }
    }
}

/// Primal Green's function of `H` rooted at its base vertex.
pub fn discrete_greens(h: &GridSubgraph) -> Result<DiscreteGreens, CouplingError> {
    if !h.is_connected() {
        return Err(CouplingError::Disconnected);
    }
    let index: Vec<Point> = h.vertex_list().into_iter().filter(|&v| v != h.base_vertex).collect();
    let pos: HashMap<Point, usize> = index.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let mut lap = vec![vec![BigRational::zero(); index.len()]; index.len()];
    for (i, &v) in index.iter().enumerate() {
        lap[i][i] = rat(h.degree(v) as i64);
        for u in h.neighbors(v) {
            if let Some(&j) = pos.get(&u) {
                lap[i][j] = rat(-1);
            }
        }
    }
    Ok(DiscreteGreens::from_matrix(index, lap, Some(h.base_vertex)))
}

/// Dual Green's function on the bounded faces of `H`, zero on the outer face.
pub fn dual_greens(h: &GridSubgraph) -> DiscreteGreens {
    let index: Vec<Point> = h.faces().into_iter().collect();
    let pos: HashMap<Point, usize> = index.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let mut lap = vec![vec![BigRational::zero(); index.len()]; index.len()];
    for (i, &f) in index.iter().enumerate() {
        lap[i][i] = rat(4);
        for d in DIRS {
            if let Some(&j) = pos.get(&(f.0 + 2 * d.0, f.1 + 2 * d.1)) {
                lap[i][j] = rat(-1);
            }
        }
    }
    DiscreteGreens::from_matrix(index, lap, None)
}

/// Both Green's functions of `H`, computed once for repeated coupling evaluations.
#[derive(Clone, Debug)]
pub struct GreensPair {
    pub primal: DiscreteGreens,
    pub dual: DiscreteGreens,
}

impl GreensPair {
    pub fn new(h: &GridSubgraph) -> Result<Self, CouplingError> {
        Ok(GreensPair { primal: discrete_greens(h)?, dual: dual_greens(h) })
    }

    /// Coupling `C(v1, v2)` from differences of `G` (black cell in `B0`) or of the dual `Ĝ` (`B1`).
    ///
    /// With `K` weights `1, i, -1, -i` towards right, up, left, down:
    /// `W0/B0: G(v1+1) − G(v1−1)`, `W1/B0: −i(G(v1+i) − G(v1−i))`,
    /// `W1/B1: Ĝ(v1+1) − Ĝ(v1−1)`, `W0/B1: −i(Ĝ(v1+i) − Ĝ(v1−i))`.
    pub fn coupling(&self, v1: Point, v2: Point) -> Result<GaussRat, CouplingError> {
        let wc = CellClass::of(v1);
        let bc = CellClass::of(v2);
        if wc.is_black() || !bc.is_black() {
            return Err(CouplingError::ColorMismatch(v1, v2));
        }
        let g = if bc == CellClass::B0 { &self.primal } else { &self.dual };
        // Horizontal neighbours of a W0 cell are B0 cells, vertical ones B1; W1 the reverse.
        let horizontal = (wc == CellClass::W0) == (bc == CellClass::B0);
        Ok(if horizontal {
            let d = g.get(add(v1, (1, 0)), v2) - g.get(add(v1, (-1, 0)), v2);
            Complex::new(d, BigRational::zero())
        } else {
            let d = g.get(add(v1, (0, 1)), v2) - g.get(add(v1, (0, -1)), v2);
            Complex::new(BigRational::zero(), -d)
        })
    }
}

pub fn coupling_via_greens(h: &GridSubgraph, v1: Point, v2: Point) -> Result<GaussRat, CouplingError> {
    GreensPair::new(h)?.coupling(v1, v2)
}

/// Number of `(white, black)` pairs of `P(H)` where the Green's-function formula disagrees with `K^{-1}`.
pub fn greens_mismatches(h: &GridSubgraph) -> Result<usize, CouplingError> {
    let p = temperleyan_from_subgraph(h);
    let c = coupling_matrix(&build_kasteleyn(&p)?)?;
    let pair = GreensPair::new(h)?;
    let mut bad = 0;
    for &w in &c.kasteleyn.whites {
        for &b in &c.kasteleyn.blacks {
            if pair.coupling(w, b)? != c.get(w, b) {
                bad += 1;
            }
        }
    }
    Ok(bad)
}

/// Integer heights on the corners of a region. Corner `(i, j)` is the lower-left corner of cell `(i, j)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeightField {
    pub values: BTreeMap<Point, i64>,
    pub anchor: Point,
}

/// Lattice edges between corners of the region, as `(from, to, left cell, right cell)`.
fn corner_edges(region: &CellRegion) -> Vec<(Point, Point, Point, Point)> {
    let mut out = Vec::new();
    for &c in &region.corners() {
        // Rightward edge has cell (i, j) above on the left; upward edge has (i-1, j) on the left.
        let right = ((c.0 + 1, c.1), (c.0, c.1), (c.0, c.1 - 1));
        let up = ((c.0, c.1 + 1), (c.0 - 1, c.1), (c.0, c.1));
        for (to, left, rt) in [right, up] {
            if region.contains(left) || region.contains(rt) {
                out.push((c, to, left, rt));
            }
        }
    }
    out
}

/// Default anchor: the lowest, then leftmost, corner.
pub fn default_anchor(region: &CellRegion) -> Point {
    region.corners().into_iter().min_by_key(|&(x, y)| (y, x)).expect("nonempty region")
}

fn check_tiling(region: &CellRegion, tiling: &[(Point, Point)]) -> Result<HashMap<Point, Point>, CouplingError> {
    let mut partner = HashMap::new();
    for &(a, b) in tiling {
        let d = (b.0 - a.0, b.1 - a.1);
        if !region.contains(a) || !region.contains(b) || d.0.abs() + d.1.abs() != 1 {
            return Err(CouplingError::InconsistentTiling(format!("bad domino {a:?}-{b:?}")));
        }
        if partner.insert(a, b).is_some() || partner.insert(b, a).is_some() {
            return Err(CouplingError::InconsistentTiling(format!("cell covered twice near {a:?}")));
        }
    }
    if partner.len() != region.len() {
        return Err(CouplingError::InconsistentTiling("not every cell is covered".into()));
    }
    Ok(partner)
}

/// Heights from a tiling: along each edge `+1` with a black square on the left and `−1`
/// with a white one, times `−3` when the edge is crossed by a domino.
pub fn height_function(region: &CellRegion, tiling: &[(Point, Point)], anchor: Point) -> Result<HeightField, CouplingError> {
    let partner = check_tiling(region, tiling)?;
    let mut adj: HashMap<Point, Vec<(Point, i64)>> = HashMap::new();
    for (a, b, left, right) in corner_edges(region) {
        let base = if is_black(left) { 1 } else { -1 };
        let crossed = partner.get(&left) == Some(&right);
        let inc = if crossed { -3 * base } else { base };
        adj.entry(a).or_default().push((b, inc));
        adj.entry(b).or_default().push((a, -inc));
    }
    let mut values = BTreeMap::new();
    if !adj.contains_key(&anchor) {
        return Err(CouplingError::InconsistentTiling(format!("anchor {anchor:?} is not a corner")));
    }
    values.insert(anchor, 0i64);
    let mut queue = VecDeque::from([anchor]);
    while let Some(v) = queue.pop_front() {
        let hv = values[&v];
        for &(u, inc) in &adj[&v] {
            match values.get(&u) {
                Some(&hu) if hu != hv + inc => {
                    return Err(CouplingError::InconsistentTiling(format!("height mismatch at corner {u:?}")))
                }
                Some(_) => {}
                None => {
                    values.insert(u, hv + inc);
                    queue.push_back(u);
                }
            }
        }
    }
    Ok(HeightField { values, anchor })
}

/// Exact average heights on the corners, anchored at `default_anchor`.
pub type AverageHeight = BTreeMap<Point, BigRational>;

/// Average height by linearity: the expected increment across an edge is
/// `±(1 − 4p)` where `p` is the probability that the edge is crossed.
pub fn average_height(region: &CellRegion) -> Result<AverageHeight, CouplingError> {
    if region.is_empty() {
        return Ok(AverageHeight::new());
    }
    let c = coupling_matrix(&build_kasteleyn(region)?)?;
    let anchor = default_anchor(region);
    let mut adj: HashMap<Point, Vec<(Point, BigRational)>> = HashMap::new();
    for (a, b, left, right) in corner_edges(region) {
        let base = rat(if is_black(left) { 1 } else { -1 });
        let p = if region.contains(left) && region.contains(right) {
            let (w, bl) = if is_black(left) { (right, left) } else { (left, right) };
            local_probability(&c, &[(w, bl)])?
        } else {
            BigRational::zero()
        };
        let inc = &base * (BigRational::one() - rat(4) * p);
        adj.entry(a).or_default().push((b, inc.clone()));
        adj.entry(b).or_default().push((a, -inc));
    }
    let mut values = BTreeMap::new();
    values.insert(anchor, BigRational::zero());
    let mut queue = VecDeque::from([anchor]);
    while let Some(v) = queue.pop_front() {
        let hv = values[&v].clone();
        for (u, inc) in &adj[&v] {
            if !values.contains_key(u) {
                values.insert(*u, &hv + inc);
                queue.push_back(*u);
            }
        }
    }
    Ok(values)
}

/// Average height by enumerating every tiling.
pub fn average_height_enumerated(region: &CellRegion, cap: usize) -> Result<AverageHeight, CouplingError> {
    if region.is_empty() {
        return Ok(AverageHeight::new());
    }
    let tilings: Vec<Tiling> = enumerate_tilings(region, cap)?;
    let anchor = default_anchor(region);
    let mut sums: BTreeMap<Point, i64> = BTreeMap::new();
    for t in &tilings {
        for (p, h) in height_function(region, t, anchor)?.values {
            *sums.entry(p).or_default() += h;
        }
    }
    let n = rat(tilings.len() as i64);
    Ok(sums.into_iter().map(|(p, s)| (p, rat(s) / &n)).collect())
}

pub fn to_complex64(z: &GaussRat) -> Complex64 {
    gauss_rat_to_f64(z)
}

pub fn is_real(z: &GaussRat) -> bool {
    z.im.is_zero()
}

pub fn is_imaginary(z: &GaussRat) -> bool {
    z.re.is_zero()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::temperleyan_rectangle;

    fn three_minus_corner() -> (GridSubgraph, CellRegion) {
        let h = GridSubgraph::grid(2, 2);
        let p = temperleyan_from_subgraph(&h);
        (h, p.region)
    }

    #[test]
    fn trivial_inverse() {
        let k = build_kasteleyn(&CellRegion::new([(1, 0), (2, 0)])).unwrap();
        let c = coupling_matrix(&k).unwrap();
        assert_eq!(c.inverse, vec![vec![gauss_rat(1, 0)]]);
    }

    #[test]
    fn exact_inverse_and_symmetry() {
        let (_, r) = three_minus_corner();
        let c = coupling_matrix(&build_kasteleyn(&r).unwrap()).unwrap();
        assert!(c.is_exact_inverse());
        for &a in &r.cells {
            for &b in &r.cells {
                assert_eq!(c.full(a, b), c.full(b, a));
                if is_black(a) == is_black(b) {
                    assert!(c.full(a, b).is_zero());
                }
            }
        }
    }

    #[test]
    fn probabilities() {
        let sq = CellRegion::rectangle(2, 2);
        let c = coupling_matrix(&build_kasteleyn(&sq).unwrap()).unwrap();
        let half = BigRational::new(1.into(), 2.into());
        assert_eq!(local_probability(&c, &[((1, 0), (0, 0))]).unwrap(), half);
        assert_eq!(local_probability(&c, &[]).unwrap(), BigRational::one());
        assert!(local_probability(&c, &[((1, 0), (1, 1))]).is_ok());
        assert!(matches!(local_probability(&c, &[((1, 0), (0, 1))]), Err(CouplingError::NonAdjacentPair(..))));

        // Every white cell is covered exactly once.
        let (_, r) = three_minus_corner();
        let c = coupling_matrix(&build_kasteleyn(&r).unwrap()).unwrap();
        for &w in &c.kasteleyn.whites {
            let total: BigRational = DIRS
                .iter()
                .map(|&d| add(w, d))
                .filter(|b| r.contains(*b))
                .map(|b| local_probability(&c, &[(w, b)]).unwrap())
                .sum();
            assert!(total.is_one());
        }
        // A domino present in all four tilings of the 3x3-minus-corner.
        let tilings = enumerate_tilings(&r, 100).unwrap();
        let forced: Vec<_> = tilings[0].iter().filter(|d| tilings.iter().all(|t| t.contains(d))).collect();
        for d in forced {
            assert!(local_probability(&c, &[*d]).unwrap().is_one());
        }
    }

    #[test]
    fn greens_basics() {
        let path = GridSubgraph::new([(0, 0), (2, 0)], [((0, 0), (2, 0))], (0, 0)).unwrap();
        let g = discrete_greens(&path).unwrap();
        assert!(g.get((2, 0), (2, 0)).is_one());
        assert!(g.get((2, 0), (0, 0)).is_zero());

        let h = GridSubgraph::grid(2, 2);
        let g = discrete_greens(&h).unwrap();
        for &x in &h.vertices {
            for &y in &h.vertices {
                let lap: BigRational = rat(h.degree(y) as i64) * g.get(x, y) - h.neighbors(y).map(|z| g.get(x, z)).sum::<BigRational>();
                let delta = rat((x == y) as i64 - (y == h.base_vertex) as i64);
                // Row x = base gives the zero function, whose Laplacian is zero.
                let expect = if x == h.base_vertex { BigRational::zero() } else { delta };
                assert_eq!(lap, expect, "x={x:?} y={y:?}");
            }
        }
    }

    #[test]
    fn greens_identity_small() {
        for h in [GridSubgraph::grid(2, 2), GridSubgraph::grid(3, 2), GridSubgraph::grid(3, 3)] {
            assert_eq!(greens_mismatches(&h).unwrap(), 0);
        }
        let h = GridSubgraph::grid(3, 3);
        let pair = GreensPair::new(&h).unwrap();
        assert!(is_real(&pair.coupling((1, 0), (2, 0)).unwrap()));
        assert!(is_imaginary(&pair.coupling((1, 2), (1, 1)).unwrap()));
        assert!(pair.coupling((1, 0), (1, 1)).is_ok());
        assert!(matches!(pair.coupling((0, 0), (1, 1)), Err(CouplingError::ColorMismatch(..))));
    }

    #[test]
    fn heights_on_square() {
        let sq = CellRegion::rectangle(2, 2);
        let tilings = enumerate_tilings(&sq, 10).unwrap();
        let a = default_anchor(&sq);
        let h: Vec<HeightField> = tilings.iter().map(|t| height_function(&sq, t, a).unwrap()).collect();
        for (p, v) in &h[0].values {
            if *p != (1, 1) {
                assert_eq!(h[1].values[p], *v);
            }
        }
        assert_eq!((h[0].values[&(1, 1)] - h[1].values[&(1, 1)]).abs(), 4);
        let avg = average_height(&sq).unwrap();
        let mean = rat(h[0].values[&(1, 1)] + h[1].values[&(1, 1)]) / rat(2);
        assert_eq!(avg[&(1, 1)], mean);
        assert_eq!(avg, average_height_enumerated(&sq, 10).unwrap());
    }

    #[test]
    fn height_rejects_bad_tilings() {
        let sq = CellRegion::rectangle(2, 2);
        let a = default_anchor(&sq);
        assert!(height_function(&sq, &[((1, 0), (0, 0))], a).is_err());
        assert!(height_function(&sq, &[((1, 0), (0, 0)), ((0, 1), (0, 0))], a).is_err());
    }

    #[test]
    fn average_height_seven_minus_corner() {
        let p = temperleyan_rectangle(4, 4);
        assert_eq!(p.region.len(), 48);
        let lin = average_height(&p.region).unwrap();
        let en = average_height_enumerated(&p.region, 200_000).unwrap();
        assert_eq!(lin, en);
    }

    #[test]
    fn float_column_matches_exact() {
        let (_, r) = three_minus_corner();
        let c = coupling_matrix(&build_kasteleyn(&r).unwrap()).unwrap();
        for &w in &c.kasteleyn.whites {
            let col = coupling_column_f64(&c.kasteleyn, w).unwrap();
            for (&b, z) in &col {
                assert!((to_complex64(&c.get(w, b)) - z).norm() < 1e-12);
            }
        }
    }
}
