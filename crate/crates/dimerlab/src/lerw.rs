//! Uniform spanning trees, loop-erased random walks, the two-hole tree bijection
//! and the growth-exponent experiments.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::PI;

use num_traits::ToPrimitive;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::energy::least_squares;
use crate::kasteleyn::{build_kasteleyn, count_tilings_exact, kasteleyn_with_holes, log_count_tilings, HoleSpec, KasteleynError};
use crate::region::{temperleyan_from_subgraph, CellClass, GridSubgraph, Point, RegionError, TemperleyanPolyomino};
use crate::treelap::Graph;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LerwError {
    #[error("graph is disconnected")]
    Disconnected,
    #[error("vertex {0} is not in the graph")]
    VertexMissing(usize),
    #[error("cell {0:?} has the wrong colour or is not in the region")]
    HoleColorMismatch(Point),
    #[error("black cell {0:?} is not on the boundary")]
    BNotOnBoundary(Point),
    #[error("need at least {need} samples, got {got}")]
    InsufficientSamples { got: usize, need: usize },
    #[error("need at least 4 increasing sizes, got {0:?}")]
    BadSizes(Vec<usize>),
    #[error("more than {0} spanning trees")]
    EnumerationTooLarge(usize),
    #[error("regression design is singular")]
    DegenerateDesign,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Kasteleyn(#[from] KasteleynError),
    #[error(transparent)]
    Region(#[from] RegionError),
}

pub type Result<T> = std::result::Result<T, LerwError>;

/// Generator for walker `stream` under `seed`.
fn walker_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Spanning tree as a parent map towards `root`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct TreeSample {
    pub parent: Vec<Option<usize>>,
    pub root: usize,
    pub seed: Option<u64>,
}

impl TreeSample {
    /// Every non-root vertex has one parent joined to it by an edge, and following parents reaches the root.
    pub fn is_spanning_tree(&self, g: &Graph) -> bool {
        if self.parent.len() != g.n || self.root >= g.n || self.parent[self.root].is_some() {
            return false;
        }
        for v in 0..g.n {
            if v == self.root {
                continue;
            }
            match self.parent[v] {
                Some(p) if g.adj[v].contains(&p) => {}
                _ => return false,
            }
        }
        (0..g.n).all(|v| {
            let mut cur = v;
            for _ in 0..g.n {
                match self.parent[cur] {
                    Some(p) => cur = p,
                    None => break,
                }
            }
            cur == self.root
        })
    }

    /// Undirected edge set, each edge as `(min, max)`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> =
            self.parent.iter().enumerate().filter_map(|(v, p)| p.map(|p| (v.min(p), v.max(p)))).collect();
        e.sort_unstable();
        e
    }
}

/// Self-avoiding vertex sequence.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct LerwPath {
    pub vertices: Vec<usize>,
}

impl LerwPath {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn is_self_avoiding(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.vertices.iter().all(|v| seen.insert(*v))
    }

    pub fn is_walk_in(&self, g: &Graph) -> bool {
        self.vertices.windows(2).all(|p| p[0] < g.n && g.adj[p[0]].contains(&p[1]))
    }
}

/// Uniform spanning tree by Wilson's algorithm; walker `v` (started from vertex `v`)
/// draws from its own stream, so the result depends only on `seed`.
pub fn sample_ust(g: &Graph, root: usize, seed: u64) -> Result<TreeSample> {
    if root >= g.n {
        return Err(LerwError::VertexMissing(root));
    }
    if !g.is_connected() {
        return Err(LerwError::Disconnected);
    }
    let mut in_tree = vec![false; g.n];
    let mut next = vec![usize::MAX; g.n];
    let mut parent = vec![None; g.n];
    in_tree[root] = true;
    for start in 0..g.n {
        if in_tree[start] {
            continue;
        }
        let mut rng = walker_rng(seed, start as u64);
        let mut u = start;
        while !in_tree[u] {
            let ns = &g.adj[u];
            next[u] = ns[rng.gen_range(0..ns.len())];
            u = next[u];
        }
        let mut u = start;
        while !in_tree[u] {
            in_tree[u] = true;
            parent[u] = Some(next[u]);
            u = next[u];
        }
    }
    Ok(TreeSample { parent, root, seed: Some(seed) })
}

/// Chronological loop erasure: each time the walk returns to a vertex already on
/// the current path, the loop since its first visit is removed.
pub fn loop_erase(walk: &[usize]) -> LerwPath {
    let mut pos: HashMap<usize, usize> = HashMap::new();
    let mut out: Vec<usize> = Vec::new();
    for &v in walk {
        if let Some(&p) = pos.get(&v) {
            for u in out.drain(p + 1..) {
                pos.remove(&u);
            }
        } else {
            pos.insert(v, out.len());
            out.push(v);
        }
    }
    LerwPath { vertices: out }
}

/// Path from `v` to the root along parents.
pub fn branch(tree: &TreeSample, v: usize) -> Result<LerwPath> {
    if v >= tree.parent.len() {
        return Err(LerwError::VertexMissing(v));
    }
    let mut out = vec![v];
    let mut cur = v;
    while let Some(p) = tree.parent[cur] {
        out.push(p);
        cur = p;
    }
    Ok(LerwPath { vertices: out })
}

/// Loop-erased random walk from `source` stopped at `target`.
pub fn sample_lerw(g: &Graph, source: usize, target: usize, seed: u64) -> Result<LerwPath> {
    for v in [source, target] {
        if v >= g.n {
            return Err(LerwError::VertexMissing(v));
        }
    }
    if !g.is_connected() {
        return Err(LerwError::Disconnected);
    }
    let mut rng = walker_rng(seed, 0);
    let mut walk = vec![source];
    let mut u = source;
    while u != target {
        let ns = &g.adj[u];
        u = ns[rng.gen_range(0..ns.len())];
        walk.push(u);
    }
    Ok(loop_erase(&walk))
}

/// All spanning trees, as parent maps towards `root`; fails beyond `cap` trees.
pub fn enumerate_spanning_trees(g: &Graph, root: usize, cap: usize) -> Result<Vec<TreeSample>> {
    if root >= g.n {
        return Err(LerwError::VertexMissing(root));
    }
    if !g.is_connected() {
        return Err(LerwError::Disconnected);
    }
    fn find(d: &[usize], mut x: usize) -> usize {
        while d[x] != x {
            x = d[x];
        }
        x
    }
    fn rec(
        edges: &[(usize, usize)],
        i: usize,
        need: usize,
        dsu: &mut Vec<usize>,
        chosen: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
        cap: usize,
    ) -> bool {
        if chosen.len() == need {
            if out.len() == cap {
                return false;
            }
            out.push(chosen.clone());
            return true;
        }
        if edges.len() - i < need - chosen.len() {
            return true;
        }
        let (a, b) = edges[i];
        let (ra, rb) = (find(dsu, a), find(dsu, b));
        if ra != rb {
            dsu[ra] = rb;
            chosen.push(i);
            let ok = rec(edges, i + 1, need, dsu, chosen, out, cap);
            chosen.pop();
            dsu[ra] = ra;
            if !ok {
                return false;
            }
        }
        rec(edges, i + 1, need, dsu, chosen, out, cap)
    }
    let edges = g.edges();
    let mut dsu: Vec<usize> = (0..g.n).collect();
    let mut sets = Vec::new();
    if !rec(&edges, 0, g.n - 1, &mut dsu, &mut Vec::new(), &mut sets, cap) {
        return Err(LerwError::EnumerationTooLarge(cap));
    }
    Ok(sets
        .into_iter()
        .map(|set| {
            let mut adj = vec![Vec::new(); g.n];
            for i in set {
                let (a, b) = edges[i];
                adj[a].push(b);
                adj[b].push(a);
            }
            let mut parent = vec![None; g.n];
            let mut seen = vec![false; g.n];
            seen[root] = true;
            let mut queue = VecDeque::from([root]);
            while let Some(v) = queue.pop_front() {
                for &u in &adj[v] {
                    if !seen[u] {
                        seen[u] = true;
                        parent[u] = Some(v);
                        queue.push_back(u);
                    }
                }
            }
            TreeSample { parent, root, seed: None }
        })
        .collect())
}

/// Both sides of the two-hole tree bijection for one `(b, w)` pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TwoHoleCheck {
    pub b: Point,
    pub w: Point,
    pub tilings_q: u64,
    pub trees_through_w: u64,
    pub equal: bool,
}

/// Endpoints in `H` of the edge that white cell `w` sits on.
fn white_edge(w: Point) -> (Point, Point) {
    match CellClass::of(w) {
        CellClass::W0 => ((w.0 - 1, w.1), (w.0 + 1, w.1)),
        _ => ((w.0, w.1 - 1), (w.0, w.1 + 1)),
    }
}

const TREE_CAP: usize = 1 << 20;

/// Counts tilings of `P \ {b, w}` and spanning trees of `H` whose branch from `b`
/// to the base vertex traverses the edge of `w`.
pub fn two_hole_bijection_check(p: &TemperleyanPolyomino, b: Point, w: Point) -> Result<TwoHoleCheck> {
    Ok(two_hole_checks(p, &[(b, w)])?.remove(0))
}

fn validate_pair(p: &TemperleyanPolyomino, b: Point, w: Point) -> Result<()> {
    if p.cell_class(b) != Some(CellClass::B0) {
        return Err(LerwError::HoleColorMismatch(b));
    }
    if !matches!(p.cell_class(w), Some(CellClass::W0 | CellClass::W1)) {
        return Err(LerwError::HoleColorMismatch(w));
    }
    if !p.graph.is_boundary_vertex(b) {
        return Err(LerwError::BNotOnBoundary(b));
    }
    Ok(())
}

/// Batch form of [`two_hole_bijection_check`] sharing one tree enumeration.
pub fn two_hole_checks(p: &TemperleyanPolyomino, pairs: &[(Point, Point)]) -> Result<Vec<TwoHoleCheck>> {
    for &(b, w) in pairs {
        validate_pair(p, b, w)?;
    }
    let (g, pts) = Graph::from_grid(&p.graph);
    let index: HashMap<Point, usize> = pts.iter().enumerate().map(|(i, &q)| (q, i)).collect();
    let trees = enumerate_spanning_trees(&g, index[&p.base_square], TREE_CAP)?;
    pairs
        .iter()
        .map(|&(b, w)| {
            let spec = HoleSpec::with_straight_path(&p.region, b, w)?;
            let k = kasteleyn_with_holes(&p.region, &spec)?;
            let tilings_q = count_tilings_exact(&k).to_u64().expect("small region");
            let (e0, e1) = white_edge(w);
            let (i0, i1) = (index[&e0], index[&e1]);
            let trees_through_w = trees
                .iter()
                .filter(|t| {
                    branch(t, index[&b]).expect("vertex exists").vertices.windows(2).any(|s| {
                        (s[0], s[1]) == (i0, i1) || (s[0], s[1]) == (i1, i0)
                    })
                })
                .count() as u64;
            Ok(TwoHoleCheck { b, w, tilings_q, trees_through_w, equal: tilings_q == trees_through_w })
        })
        .collect()
}

/// Every pair of a boundary black vertex `b` and a white cell `w` of `p`.
pub fn boundary_pairs(p: &TemperleyanPolyomino) -> Vec<(Point, Point)> {
    let bs: Vec<Point> = p.blacks().into_iter().filter(|&b| validate_pair_b(p, b)).collect();
    let ws = p.whites();
    bs.iter().flat_map(|&b| ws.iter().map(move |&w| (b, w))).collect()
}

fn validate_pair_b(p: &TemperleyanPolyomino, b: Point) -> bool {
    p.cell_class(b) == Some(CellClass::B0) && p.graph.is_boundary_vertex(b)
}

const NONE: u32 = u32::MAX;

/// Box `[0, xmax] x [-ymax, ymax]` of `Z^2`; the walk starts at the origin on the
/// left side, reflects off it, and stops on the other three sides.
#[derive(Clone, Copy, Debug)]
struct HalfBox {
    xmax: i32,
    ymax: i32,
}

impl HalfBox {
    /// Square of the given side, source at the midpoint of its left side.
    fn square(side: i32) -> Self {
        HalfBox { xmax: side, ymax: side / 2 }
    }

    fn width(&self) -> usize {
        self.xmax as usize + 1
    }

    fn size(&self) -> usize {
        self.width() * (2 * self.ymax as usize + 1)
    }

    fn coords(&self, v: u32) -> (i32, i32) {
        let w = self.width() as u32;
        ((v % w) as i32, (v / w) as i32 - self.ymax)
    }

    /// Loop-erased walk from the source to the absorbing sides, erased on the fly.
    /// `pos` must be all `NONE` on entry and is restored before returning.
    fn branch(&self, rng: &mut ChaCha8Rng, pos: &mut [u32], path: &mut Vec<u32>) {
        let w = self.width() as i64;
        let (mut x, mut y) = (0i32, 0i32);
        let idx = |x: i32, y: i32| ((y + self.ymax) as i64 * w + x as i64) as u32;
        path.clear();
        let v = idx(0, 0);
        pos[v as usize] = 0;
        path.push(v);
        let (mut bits, mut left) = (0u64, 0u32);
        loop {
            if left == 0 {
                bits = rng.next_u64();
                left = 32;
            }
            let d = bits & 3;
            bits >>= 2;
            left -= 1;
            match d {
                0 => x += 1,
                1 if x == 0 => continue,
                1 => x -= 1,
                2 => y += 1,
                _ => y -= 1,
            }
            let v = idx(x, y);
            let p = pos[v as usize];
            if p != NONE {
                for &u in &path[p as usize + 1..] {
                    pos[u as usize] = NONE;
                }
                path.truncate(p as usize + 1);
            } else {
                pos[v as usize] = path.len() as u32;
                path.push(v);
            }
            if x == self.xmax || y.abs() == self.ymax {
                break;
            }
        }
        for &u in path.iter() {
            pos[u as usize] = NONE;
        }
    }
}

/// Runs `f` on the branch of each of `samples` walkers in parallel, collecting in walker order.
fn sample_branches<T: Send>(
    bx: HalfBox,
    samples: usize,
    seed: u64,
    stream_base: u64,
    f: impl Fn(&HalfBox, &[u32]) -> T + Sync,
) -> Vec<T> {
    (0..samples)
        .into_par_iter()
        .map_init(
            || (vec![NONE; bx.size()], Vec::new()),
            |(pos, path), k| {
                let mut rng = walker_rng(seed, stream_base + k as u64);
                bx.branch(&mut rng, pos, path);
                f(&bx, path)
            },
        )
        .collect()
}

/// Log-log fit of branch size against radius.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentFit {
    pub sizes: Vec<usize>,
    pub samples: usize,
    pub means: Vec<f64>,
    pub mean_errors: Vec<f64>,
    pub exponent: f64,
    pub intercept: f64,
    pub standard_error: f64,
    pub seed: u64,
    pub bootstrap_reps: usize,
}

pub const BOOTSTRAP_REPS: usize = 200;

/// For each `N`, the mean number of branch vertices within Euclidean distance `N` of the
/// source, on a square of side `4N` with the source at the midpoint of one side and the
/// branch running to the other three sides. The exponent is the log-log least-squares
/// slope; its standard error comes from resampling walkers within each size.
pub fn growth_exponent(sizes: &[usize], samples: usize, seed: u64) -> Result<ExponentFit> {
    if sizes.len() < 4 || sizes.windows(2).any(|s| s[0] >= s[1]) || sizes[0] == 0 {
        return Err(LerwError::BadSizes(sizes.to_vec()));
    }
    if samples < 2 {
        return Err(LerwError::InsufficientSamples { got: samples, need: 2 });
    }
    let counts: Vec<Vec<f64>> = sizes
        .iter()
        .enumerate()
        .map(|(si, &n)| {
            let r2 = (n * n) as i64;
            sample_branches(HalfBox::square(4 * n as i32), samples, seed, (si as u64) << 32, |bx, path| {
                path.iter()
                    .filter(|&&v| {
                        let (x, y) = bx.coords(v);
                        (x as i64).pow(2) + (y as i64).pow(2) <= r2
                    })
                    .count() as f64
            })
        })
        .collect();
    let fit = |cs: &[Vec<f64>]| {
        let pts: Vec<(f64, f64)> =
            sizes.iter().zip(cs).map(|(&n, c)| ((n as f64).ln(), (c.iter().sum::<f64>() / c.len() as f64).ln())).collect();
        least_squares(&pts)
    };
    let (exponent, intercept) = fit(&counts);
    let mut rng = walker_rng(seed, u64::MAX);
    let slopes: Vec<f64> = (0..BOOTSTRAP_REPS)
        .map(|_| {
            let re: Vec<Vec<f64>> =
                counts.iter().map(|c| (0..c.len()).map(|_| c[rng.gen_range(0..c.len())]).collect()).collect();
            fit(&re).0
        })
        .collect();
    let mean_slope = slopes.iter().sum::<f64>() / slopes.len() as f64;
    let se = (slopes.iter().map(|s| (s - mean_slope).powi(2)).sum::<f64>() / (slopes.len() - 1) as f64).sqrt();
    let (means, mean_errors) = counts.iter().map(|c| mean_and_error(c)).unzip();
    Ok(ExponentFit {
        sizes: sizes.to_vec(),
        samples,
        means,
        mean_errors,
        exponent,
        intercept,
        standard_error: se,
        seed,
        bootstrap_reps: BOOTSTRAP_REPS,
    })
}

fn mean_and_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Bin counts for [`angular_profile`]: geometric radial bins over `[8, N/4]` and equal
/// angular bins over `[-π/2, π/2]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProfileBins {
    pub radial: usize,
    pub angular: usize,
}

impl Default for ProfileBins {
    fn default() -> Self {
        ProfileBins { radial: 6, angular: 9 }
    }
}

/// Per-vertex hit frequency in one `(r, θ)` bin.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileBin {
    pub r_range: (f64, f64),
    pub theta_range: (f64, f64),
    pub vertices: usize,
    pub mean_radius: f64,
    pub frequency: f64,
    pub standard_error: f64,
}

/// Angular shape relative to the central bin, pooled over the radial range.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AngularPoint {
    pub theta: f64,
    pub frequency: f64,
    pub standard_error: f64,
    pub ratio: f64,
    pub ratio_error: f64,
    /// Ratio predicted by `r^{-3/4} cos(θ)^{1/4}` averaged over the bin's vertices.
    pub predicted: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AngularProfile {
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub bins: Vec<Vec<ProfileBin>>,
    pub radial_slope: f64,
    pub angular: Vec<AngularPoint>,
}

/// Hit frequencies of the branch from the midpoint of one side of a square of side `4N`,
/// binned in `(r, θ)` over `8 <= r <= N/4`. The radial slope is fitted in the central
/// angular bin.
pub fn angular_profile(n: usize, samples: usize, bins: ProfileBins, seed: u64) -> Result<AngularProfile> {
    if samples < 2 {
        return Err(LerwError::InsufficientSamples { got: samples, need: 2 });
    }
    let (r_lo, r_hi) = (8.0, n as f64 / 4.0);
    if bins.radial == 0 || bins.angular == 0 || bins.angular % 2 == 0 || r_hi <= r_lo {
        return Err(LerwError::InvalidParameter(format!("need N >= 64 and an odd angular bin count, got N={n}, {bins:?}")));
    }
    let (nr, na) = (bins.radial, bins.angular);
    let ratio = (r_hi / r_lo).powf(1.0 / nr as f64);
    let r_edges: Vec<f64> = (0..=nr).map(|i| r_lo * ratio.powi(i as i32)).collect();
    let width = PI / na as f64;
    let bin_of = |x: i32, y: i32| -> Option<usize> {
        let r = ((x * x + y * y) as f64).sqrt();
        if r < r_lo || r > r_hi {
            return None;
        }
        let ri = (((r / r_lo).ln() / ratio.ln()) as usize).min(nr - 1);
        // Assign by |θ| and mirror so that reflected vertices land in mirrored bins.
        let t = (y.abs() as f64).atan2(x as f64);
        let k = (((t + width / 2.0) / width) as usize).min(na / 2);
        let ai = if y >= 0 { na / 2 + k } else { na / 2 - k };
        Some(ri * na + ai)
    };
    let mut count = vec![0usize; nr * na];
    let mut rsum = vec![0.0; nr * na];
    let mut shape = vec![0.0; nr * na];
    let ri = r_hi.ceil() as i32;
    for x in 0..=ri {
        for y in -ri..=ri {
            if let Some(b) = bin_of(x, y) {
                let r = ((x * x + y * y) as f64).sqrt();
                count[b] += 1;
                rsum[b] += r;
                shape[b] += r.powf(-0.75) * (x as f64 / r).powf(0.25);
            }
        }
    }
    let bx = HalfBox::square(4 * n as i32);
    let per_sample: Vec<Vec<u16>> = sample_branches(bx, samples, seed, 1 << 48, |bx, path| {
        let mut hits = vec![0u16; nr * na];
        for &v in path {
            let (x, y) = bx.coords(v);
            if let Some(b) = bin_of(x, y) {
                hits[b] += 1;
            }
        }
        hits
    });
    let stats = |cells: &[usize]| -> (f64, f64) {
        let total: usize = cells.iter().map(|&b| count[b]).sum();
        let xs: Vec<f64> =
            per_sample.iter().map(|h| cells.iter().map(|&b| h[b] as f64).sum::<f64>() / total as f64).collect();
        mean_and_error(&xs)
    };
    let table: Vec<Vec<ProfileBin>> = (0..nr)
        .map(|i| {
            (0..na)
                .map(|j| {
                    let b = i * na + j;
                    let (frequency, standard_error) = if count[b] > 0 { stats(&[b]) } else { (0.0, 0.0) };
                    ProfileBin {
                        r_range: (r_edges[i], r_edges[i + 1]),
                        theta_range: (-PI / 2.0 + j as f64 * width, -PI / 2.0 + (j + 1) as f64 * width),
                        vertices: count[b],
                        mean_radius: if count[b] > 0 { rsum[b] / count[b] as f64 } else { 0.0 },
                        frequency,
                        standard_error,
                    }
                })
                .collect()
        })
        .collect();
    let mid = na / 2;
    let pts: Vec<(f64, f64)> = table
        .iter()
        .map(|row| &row[mid])
        .filter(|b| b.frequency > 0.0)
        .map(|b| (b.mean_radius.ln(), b.frequency.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(LerwError::InsufficientSamples { got: samples, need: samples + 1 });
    }
    let radial_slope = least_squares(&pts).0;
    let column = |j: usize| -> Vec<usize> { (0..nr).map(|i| i * na + j).collect() };
    let shape_of = |j: usize| {
        let c = column(j);
        c.iter().map(|&b| shape[b]).sum::<f64>() / c.iter().map(|&b| count[b]).sum::<usize>() as f64
    };
    let (f0, s0) = stats(&column(mid));
    let angular = (0..na)
        .map(|j| {
            let (f, s) = stats(&column(j));
            let ratio = f / f0;
            AngularPoint {
                theta: (j as f64 - mid as f64) * width,
                frequency: f,
                standard_error: s,
                ratio,
                ratio_error: ratio * ((s / f).powi(2) + (s0 / f0).powi(2)).sqrt(),
                predicted: shape_of(j) / shape_of(mid),
            }
        })
        .collect();
    Ok(AngularProfile { n, samples, seed, bins: table, radial_slope, angular })
}

/// One exact tiling ratio in the square setup.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioPoint {
    pub alpha: f64,
    pub beta: f64,
    pub eps: f64,
    /// Lattice positions actually used, in units of the side of `U`.
    pub alpha_eff: f64,
    pub beta_eff: f64,
    pub b: Point,
    pub w: Point,
    pub log_ratio: f64,
}

/// `log(1/ε)` slope of the log-ratio for one `(α, β)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpsSlope {
    pub alpha: f64,
    pub beta: f64,
    pub slope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioFit {
    pub box_size: f64,
    pub points: Vec<RatioPoint>,
    /// Coefficients of `1, log(1/ε), log α, log(α² + β²)`, if the design determines them.
    pub coefficients: Option<[f64; 4]>,
    pub eps_slopes: Vec<EpsSlope>,
}

/// Temperleyan approximation of `[0, K] x [-K/2, K/2]` at cell size `ε`, with the base
/// square at the middle of the right side. Returns the polyomino and the centre row.
pub fn ratio_square(box_size: f64, eps: f64) -> Result<(TemperleyanPolyomino, i32)> {
    if !(eps > 0.0 && box_size > 0.0) {
        return Err(LerwError::InvalidParameter(format!("box {box_size}, eps {eps}")));
    }
    let cells = (box_size / eps).round() as i32;
    let mut n = (cells + 1) / 2;
    if n % 2 == 0 {
        n += 1;
    }
    if n < 3 {
        return Err(LerwError::InvalidParameter(format!("box {box_size} at eps {eps} is too small")));
    }
    let c = n - 1;
    let h = GridSubgraph::induced((0..n).flat_map(|j| (0..n).map(move |i| (2 * i, 2 * j))), (2 * n - 2, c))?;
    Ok((temperleyan_from_subgraph(&h).with_scale(eps), c))
}

/// Exact `log(N(Q)/N(P))` with `b` on the left side at height `β` and `w` on the
/// centre row at distance `α`, measured from the left side of the square.
pub fn ratio_point(p: &TemperleyanPolyomino, center: i32, log_np: f64, alpha: f64, beta: f64) -> Result<RatioPoint> {
    let eps = p.scale.ok_or_else(|| LerwError::InvalidParameter("polyomino has no scale".into()))?;
    // Odd column whose distance from the left boundary line (at x = -1/2) is nearest α/ε.
    let x = 2 * ((alpha / eps - 1.5) / 2.0).round() as i32 + 1;
    if x < 1 {
        return Err(LerwError::InvalidParameter(format!("alpha {alpha} is below one cell at eps {eps}")));
    }
    let dy = 2 * (beta / (2.0 * eps)).round() as i32;
    let (b, w) = ((0, center + dy), (x, center));
    validate_pair(p, b, w)?;
    let spec = HoleSpec::with_straight_path(&p.region, b, w)?;
    let log_nq = log_count_tilings(&kasteleyn_with_holes(&p.region, &spec)?, 53)?.log_count;
    Ok(RatioPoint {
        alpha,
        beta,
        eps,
        alpha_eff: (x as f64 + 0.5) * eps,
        beta_eff: dy as f64 * eps,
        b,
        w,
        log_ratio: log_nq - log_np,
    })
}

/// Exact log tiling ratios over the grid of `(α, β, ε)` and their regression on
/// `log(1/ε)`, `log α` and `log(α² + β²)`.
pub fn ratio_experiment(alphas: &[f64], betas: &[f64], eps_list: &[f64], box_size: f64) -> Result<RatioFit> {
    let mut points = Vec::new();
    for &eps in eps_list {
        let (p, c) = ratio_square(box_size, eps)?;
        let log_np = log_count_tilings(&build_kasteleyn(&p.region)?, 53)?.log_count;
        let combos: Vec<(f64, f64)> = alphas.iter().flat_map(|&a| betas.iter().map(move |&b| (a, b))).collect();
        let pts: Vec<Result<RatioPoint>> = combos.par_iter().map(|&(a, b)| ratio_point(&p, c, log_np, a, b)).collect();
        for r in pts {
            points.push(r?);
        }
    }
    let rows: Vec<([f64; 4], f64)> = points
        .iter()
        .map(|q| {
            let r2 = q.alpha_eff.powi(2) + q.beta_eff.powi(2);
            ([1.0, (1.0 / q.eps).ln(), q.alpha_eff.ln(), r2.ln()], q.log_ratio)
        })
        .collect();
    let coefficients = least_squares_4(&rows);
    let mut eps_slopes = Vec::new();
    for &a in alphas {
        for &b in betas {
            let pts: Vec<(f64, f64)> = points
                .iter()
                .filter(|q| q.alpha == a && q.beta == b)
                .map(|q| ((1.0 / q.eps).ln(), q.log_ratio))
                .collect();
            if pts.len() >= 2 {
                eps_slopes.push(EpsSlope { alpha: a, beta: b, slope: least_squares(&pts).0 });
            }
        }
    }
    Ok(RatioFit { box_size, points, coefficients, eps_slopes })
}

/// Normal-equation solve; `None` when the design is rank deficient.
fn least_squares_4(rows: &[([f64; 4], f64)]) -> Option<[f64; 4]> {
    let mut a = [[0.0; 5]; 4];
    for (x, y) in rows {
        for i in 0..4 {
            for j in 0..4 {
                a[i][j] += x[i] * x[j];
            }
            a[i][4] += x[i] * y;
        }
    }
    let scale = (0..4).map(|i| a[i][i]).fold(0.0, f64::max);
    for k in 0..4 {
        let p = (k..4).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() <= 1e-10 * scale {
            return None;
        }
        a.swap(k, p);
        for i in 0..4 {
            if i != k {
                let f = a[i][k] / a[k][k];
                for j in k..5 {
                    a[i][j] -= f * a[k][j];
                }
            }
        }
    }
    Some([a[0][4] / a[0][0], a[1][4] / a[1][1], a[2][4] / a[2][2], a[3][4] / a[3][3]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::temperleyan_rectangle;

    fn cycle4() -> Graph {
        Graph::new(4, &[(0, 1), (1, 2), (2, 3), (3, 0)])
    }

    #[test]
    fn loop_erasure_examples() {
        assert_eq!(loop_erase(&[0, 1, 2, 3]).vertices, vec![0, 1, 2, 3]);
        assert_eq!(loop_erase(&[0, 1, 0, 2]).vertices, vec![0, 2]);
        assert_eq!(loop_erase(&[0, 1, 2, 0, 3]).vertices, vec![0, 3]);
        assert_eq!(loop_erase(&[0, 1, 2, 1, 3, 4, 3, 5]).vertices, vec![0, 1, 3, 5]);
    }

    #[test]
    fn path_graph_has_one_tree() {
        let g = Graph::new(4, &[(0, 1), (1, 2), (2, 3)]);
        for s in 0..5 {
            let t = sample_ust(&g, 0, s).unwrap();
            assert_eq!(t.parent, vec![None, Some(0), Some(1), Some(2)]);
        }
    }

    #[test]
    fn wilson_rejects_bad_input() {
        let g = Graph::new(4, &[(0, 1), (2, 3)]);
        assert_eq!(sample_ust(&g, 0, 1), Err(LerwError::Disconnected));
        assert_eq!(sample_ust(&cycle4(), 9, 1), Err(LerwError::VertexMissing(9)));
        let t = sample_ust(&cycle4(), 0, 3).unwrap();
        assert_eq!(branch(&t, 7), Err(LerwError::VertexMissing(7)));
        assert_eq!(branch(&t, 0).unwrap().vertices, vec![0]);
    }

    #[test]
    fn tree_enumeration_counts() {
        assert_eq!(enumerate_spanning_trees(&cycle4(), 0, 100).unwrap().len(), 4);
        let (g, _) = Graph::from_grid(&GridSubgraph::grid(3, 3));
        let trees = enumerate_spanning_trees(&g, 0, 1000).unwrap();
        assert_eq!(trees.len(), 192);
        assert!(trees.iter().all(|t| t.is_spanning_tree(&g)));
        assert_eq!(enumerate_spanning_trees(&g, 0, 100), Err(LerwError::EnumerationTooLarge(100)));
    }

    #[test]
    fn two_hole_hand_case() {
        // 3x3 minus corner, b the far corner, w the top edge: 2 tilings and 2 trees.
        let p = temperleyan_rectangle(2, 2);
        let c = two_hole_bijection_check(&p, (2, 2), (1, 2)).unwrap();
        assert_eq!((c.tilings_q, c.trees_through_w), (2, 2));
    }

    #[test]
    fn two_hole_errors() {
        let p = temperleyan_rectangle(3, 3);
        assert_eq!(two_hole_bijection_check(&p, (2, 2), (1, 0)), Err(LerwError::BNotOnBoundary((2, 2))));
        assert_eq!(two_hole_bijection_check(&p, (1, 1), (1, 0)), Err(LerwError::HoleColorMismatch((1, 1))));
        assert_eq!(two_hole_bijection_check(&p, (4, 4), (2, 2)), Err(LerwError::HoleColorMismatch((2, 2))));
    }

    #[test]
    fn half_box_branch_is_self_avoiding_and_ends_on_the_far_sides() {
        let bx = HalfBox::square(16);
        let mut pos = vec![NONE; bx.size()];
        let mut path = Vec::new();
        for k in 0..50 {
            bx.branch(&mut walker_rng(7, k), &mut pos, &mut path);
            let pts: Vec<(i32, i32)> = path.iter().map(|&v| bx.coords(v)).collect();
            assert_eq!(pts[0], (0, 0));
            let (x, y) = *pts.last().unwrap();
            assert!(x == 16 || y.abs() == 8);
            assert!(pts.windows(2).all(|s| (s[0].0 - s[1].0).abs() + (s[0].1 - s[1].1).abs() == 1));
            let lp = LerwPath { vertices: path.iter().map(|&v| v as usize).collect() };
            assert!(lp.is_self_avoiding());
            assert!(pos.iter().all(|&p| p == NONE));
        }
    }

    #[test]
    fn normal_equations_recover_exact_model() {
        let rows: Vec<([f64; 4], f64)> = (0..10)
            .map(|i| {
                let x = [1.0, i as f64, (i * i % 7) as f64, (i % 3) as f64];
                (x, 2.0 - 0.75 * x[1] + 0.25 * x[2] - 0.5 * x[3])
            })
            .collect();
        let c = least_squares_4(&rows).unwrap();
        for (a, b) in c.iter().zip([2.0, -0.75, 0.25, -0.5]) {
            assert!((a - b).abs() < 1e-9);
        }
        let flat: Vec<([f64; 4], f64)> = (0..6).map(|i| ([1.0, i as f64, 1.0, 2.0], 0.0)).collect();
        assert_eq!(least_squares_4(&flat), None);
    }
}
