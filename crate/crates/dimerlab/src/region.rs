//! Grid subgraphs, Temperleyan polyominoes and rectilinear polygons.
//!
//! Coordinates: the graph `H` lives on the even sublattice `2Z^2`, cells of
//! `P(H)` are unit squares centred at points of `Z^2`. A cell at `(x, y)` has
//! class `B0` (vertex of `H`) when both coordinates are even, `B1` (face) when
//! both are odd, `W0` (horizontal edge) for odd `x` and even `y`, and `W1`
//! (vertical edge) otherwise. Lattice corners are named by the cell whose
//! lower-left corner they are, so corner `(i, j)` is the point `(i - 1/2, j - 1/2)`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Point = (i32, i32);

pub const DIRS: [Point; 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegionError {
    #[error("graph is not simply connected")]
    NotSimplyConnected,
    #[error("base vertex {0:?} is not on the outer boundary")]
    BaseNotOnBoundary(Point),
    #[error("vertex {0:?} is not on the even sublattice")]
    OddVertex(Point),
    #[error("edge {0:?}-{1:?} does not join adjacent vertices of the graph")]
    BadEdge(Point, Point),
    #[error("graph is empty")]
    Empty,
    #[error("eps {0} is too large for this polygon")]
    EpsTooLarge(f64),
    #[error("point is not on the polygon boundary")]
    PointNotOnBoundary,
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("cell set is not a Temperleyan polyomino: {0}")]
    NotTemperleyan(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("json: {0}")]
    Json(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CellClass {
    B0,
    B1,
    W0,
    W1,
}

impl CellClass {
    pub fn of(c: Point) -> CellClass {
        match (c.0.rem_euclid(2), c.1.rem_euclid(2)) {
            (0, 0) => CellClass::B0,
            (1, 1) => CellClass::B1,
            (1, 0) => CellClass::W0,
            _ => CellClass::W1,
        }
    }

    pub fn is_black(self) -> bool {
        matches!(self, CellClass::B0 | CellClass::B1)
    }
}

pub fn is_black(c: Point) -> bool {
    (c.0 + c.1).rem_euclid(2) == 0
}

pub fn add(a: Point, b: Point) -> Point {
    (a.0 + b.0, a.1 + b.1)
}

/// Lowest-leftmost ordering key: bottom row first, then left to right.
pub fn low_left(p: Point) -> (i32, i32) {
    (p.1, p.0)
}

/// An arbitrary finite set of unit cells.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellRegion {
    pub cells: BTreeSet<Point>,
}

impl CellRegion {
    pub fn new(cells: impl IntoIterator<Item = Point>) -> Self {
        CellRegion { cells: cells.into_iter().collect() }
    }

    /// `w` by `h` block of cells with lower-left cell at the origin.
    pub fn rectangle(w: i32, h: i32) -> Self {
        Self::new((0..h).flat_map(|y| (0..w).map(move |x| (x, y))))
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, c: Point) -> bool {
        self.cells.contains(&c)
    }

    pub fn without(&self, removed: &[Point]) -> CellRegion {
        let mut cells = self.cells.clone();
        for r in removed {
            cells.remove(r);
        }
        CellRegion { cells }
    }

    pub fn with(&self, added: &[Point]) -> CellRegion {
        let mut cells = self.cells.clone();
        cells.extend(added.iter().copied());
        CellRegion { cells }
    }

    pub fn blacks(&self) -> Vec<Point> {
        self.ordered().into_iter().filter(|&c| is_black(c)).collect()
    }

    pub fn whites(&self) -> Vec<Point> {
        self.ordered().into_iter().filter(|&c| !is_black(c)).collect()
    }

    /// Cells in row-major order (bottom row first).
    pub fn ordered(&self) -> Vec<Point> {
        let mut v: Vec<Point> = self.cells.iter().copied().collect();
        v.sort_by_key(|&p| low_left(p));
        v
    }

    pub fn bbox(&self) -> Option<(Point, Point)> {
        let mut it = self.cells.iter();
        let first = *it.next()?;
        let (mut lo, mut hi) = (first, first);
        for &(x, y) in it {
            lo = (lo.0.min(x), lo.1.min(y));
            hi = (hi.0.max(x), hi.1.max(y));
        }
        Some((lo, hi))
    }

    pub fn area(&self) -> usize {
        self.cells.len()
    }

    pub fn perimeter(&self) -> usize {
        self.cells
            .iter()
            .map(|&c| DIRS.iter().filter(|&&d| !self.contains(add(c, d))).count())
            .sum()
    }

    pub fn is_connected(&self) -> bool {
        let Some(&start) = self.cells.iter().next() else {
            return true;
        };
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(c) = queue.pop_front() {
            for d in DIRS {
                let n = add(c, d);
                if self.contains(n) && seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        seen.len() == self.cells.len()
    }

    /// Cells of the complement that cannot reach infinity through empty cells.
    pub fn holes(&self) -> Vec<BTreeSet<Point>> {
        let Some((lo, hi)) = self.bbox() else {
            return Vec::new();
        };
        let inside = |p: Point| p.0 >= lo.0 - 1 && p.0 <= hi.0 + 1 && p.1 >= lo.1 - 1 && p.1 <= hi.1 + 1;
        let mut label: BTreeMap<Point, usize> = BTreeMap::new();
        let mut comps: Vec<BTreeSet<Point>> = Vec::new();
        for y in lo.1 - 1..=hi.1 + 1 {
            for x in lo.0 - 1..=hi.0 + 1 {
                let p = (x, y);
                if self.contains(p) || label.contains_key(&p) {
                    continue;
                }
                let id = comps.len();
                let mut comp = BTreeSet::from([p]);
                label.insert(p, id);
                let mut queue = VecDeque::from([p]);
                while let Some(c) = queue.pop_front() {
                    for d in DIRS {
                        let n = add(c, d);
                        if inside(n) && !self.contains(n) && !label.contains_key(&n) {
                            label.insert(n, id);
                            comp.insert(n);
                            queue.push_back(n);
                        }
                    }
                }
                comps.push(comp);
            }
        }
        // The first component found contains the bbox's lower-left margin cell, which is outside.
        comps.into_iter().skip(1).collect()
    }

    /// The complement component containing `p`, or `None` when `p` is outside
    /// every hole (i.e. in the unbounded component) or inside the region.
    pub fn hole_containing(&self, p: Point) -> Option<BTreeSet<Point>> {
        self.holes().into_iter().find(|h| h.contains(&p))
    }

    /// Number of region cells among the four cells meeting at corner `(i, j)`.
    fn corner_cells(&self, k: Point) -> [bool; 4] {
        [
            self.contains((k.0 - 1, k.1 - 1)),
            self.contains((k.0, k.1 - 1)),
            self.contains((k.0, k.1)),
            self.contains((k.0 - 1, k.1)),
        ]
    }

    /// All lattice corners touching at least one cell.
    pub fn corners(&self) -> BTreeSet<Point> {
        let mut out = BTreeSet::new();
        for &(x, y) in &self.cells {
            for k in [(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)] {
                out.insert(k);
            }
        }
        out
    }

    /// Counts of (convex, concave) boundary corners; a diagonal pinch counts as two convex corners.
    pub fn corner_counts(&self) -> (usize, usize) {
        let (mut convex, mut concave) = (0, 0);
        for k in self.corners() {
            let c = self.corner_cells(k);
            match c.iter().filter(|&&b| b).count() {
                1 => convex += 1,
                3 => concave += 1,
                2 if c[0] == c[2] => convex += 2,
                _ => {}
            }
        }
        (convex, concave)
    }

    /// Boundary corners visited counterclockwise along the outer boundary,
    /// starting from the lowest-leftmost corner. Requires a connected region without holes.
    pub fn boundary_cycle(&self) -> Vec<Point> {
        // Directed unit boundary edges with the region on the left.
        let mut out: BTreeMap<Point, Vec<Point>> = BTreeMap::new();
        for &(x, y) in &self.cells {
            let sides = [
                ((0, -1), (x, y), (x + 1, y)),
                ((1, 0), (x + 1, y), (x + 1, y + 1)),
                ((0, 1), (x + 1, y + 1), (x, y + 1)),
                ((-1, 0), (x, y + 1), (x, y)),
            ];
            for (d, a, b) in sides {
                if !self.contains(add((x, y), d)) {
                    out.entry(a).or_default().push(b);
                }
            }
        }
        let Some(&start) = out.keys().min_by_key(|&&p| low_left(p)) else {
            return Vec::new();
        };
        let mut path = vec![start];
        let mut cur = start;
        let mut dir: Point = (1, 0);
        let total: usize = out.values().map(Vec::len).sum();
        for _ in 0..total {
            let options = out.get_mut(&cur).expect("boundary is closed");
            // Prefer the right turn so pinch points are traversed as a single loop.
            let right = (dir.1, -dir.0);
            let pick = [right, dir, (-dir.1, dir.0)]
                .iter()
                .find_map(|&d| options.iter().position(|&b| b == add(cur, d)))
                .unwrap_or(0);
            if options.is_empty() {
                break;
            }
            let next = options.swap_remove(pick);
            dir = (next.0 - cur.0, next.1 - cur.1);
            cur = next;
            if cur == start {
                break;
            }
            path.push(cur);
        }
        // Keep only turning points.
        let n = path.len();
        (0..n)
            .filter(|&i| {
                let a = path[(i + n - 1) % n];
                let b = path[i];
                let c = path[(i + 1) % n];
                (b.0 - a.0, b.1 - a.1) != (c.0 - b.0, c.1 - b.1)
            })
            .map(|i| path[i])
            .collect()
    }

    /// Render as ASCII: `#` cell, `X` marked cell, `.` empty; top row first.
    pub fn to_ascii(&self, marked: Option<Point>) -> String {
        let mut all = self.clone();
        if let Some(m) = marked {
            all.cells.insert(m);
        }
        let Some((lo, hi)) = all.bbox() else {
            return String::new();
        };
        let lo = (lo.0.min(0), lo.1.min(0));
        let mut s = String::new();
        for y in (lo.1..=hi.1).rev() {
            for x in lo.0..=hi.0 {
                s.push(if Some((x, y)) == marked {
                    'X'
                } else if self.contains((x, y)) {
                    '#'
                } else {
                    '.'
                });
            }
            s.push('\n');
        }
        s
    }
}

/// Parsed ASCII region: cells plus an optional base square marked `X`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AsciiRegion {
    pub region: CellRegion,
    pub base: Option<Point>,
}

/// Parse the ASCII region format. The last non-blank line is row `y = 0` and
/// the first column is `x = 0`. Lines starting with `;` are comments.
pub fn parse_ascii(text: &str) -> Result<AsciiRegion, RegionError> {
    let rows: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with(';'))
        .collect();
    let mut cells = BTreeSet::new();
    let mut base = None;
    let h = rows.len() as i32;
    for (r, (line_no, line)) in rows.iter().enumerate() {
        let y = h - 1 - r as i32;
        for (x, ch) in line.chars().enumerate() {
            let p = (x as i32, y);
            match ch {
                '#' => {
                    cells.insert(p);
                }
                '.' | ' ' => {}
                'X' | 'x' => {
                    if base.replace(p).is_some() {
                        return Err(RegionError::Parse { line: *line_no, msg: "more than one base square".into() });
                    }
                }
                other => {
                    return Err(RegionError::Parse { line: *line_no, msg: format!("unexpected character {other:?}") });
                }
            }
        }
    }
    Ok(AsciiRegion { region: CellRegion { cells }, base })
}

/// A subgraph of `2Z^2`, the 1-skeleton of a simply connected union of squares.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridSubgraph {
    pub vertices: BTreeSet<Point>,
    pub edges: BTreeSet<(Point, Point)>,
    pub base_vertex: Point,
}

fn edge_key(a: Point, b: Point) -> (Point, Point) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl GridSubgraph {
    pub fn new(
        vertices: impl IntoIterator<Item = Point>,
        edges: impl IntoIterator<Item = (Point, Point)>,
        base_vertex: Point,
    ) -> Result<Self, RegionError> {
        let vertices: BTreeSet<Point> = vertices.into_iter().collect();
        if vertices.is_empty() {
            return Err(RegionError::Empty);
        }
        if let Some(&v) = vertices.iter().find(|v| v.0.rem_euclid(2) != 0 || v.1.rem_euclid(2) != 0) {
            return Err(RegionError::OddVertex(v));
        }
        let mut es = BTreeSet::new();
        for (a, b) in edges {
            let d = (a.0 - b.0).abs() + (a.1 - b.1).abs();
            if d != 2 || a.0 != b.0 && a.1 != b.1 || !vertices.contains(&a) || !vertices.contains(&b) {
                return Err(RegionError::BadEdge(a, b));
            }
            es.insert(edge_key(a, b));
        }
        let g = GridSubgraph { vertices, edges: es, base_vertex };
        if !g.is_connected() || g.vertices.len() as i64 - g.edges.len() as i64 + g.faces().len() as i64 != 1 {
            return Err(RegionError::NotSimplyConnected);
        }
        if !g.vertices.contains(&base_vertex) || !g.is_boundary_vertex(base_vertex) {
            return Err(RegionError::BaseNotOnBoundary(base_vertex));
        }
        Ok(g)
    }

    /// Induced subgraph on a set of even points.
    pub fn induced(vertices: impl IntoIterator<Item = Point>, base_vertex: Point) -> Result<Self, RegionError> {
        let vs: BTreeSet<Point> = vertices.into_iter().collect();
        let edges: Vec<(Point, Point)> = vs
            .iter()
            .flat_map(|&v| [(2, 0), (0, 2)].into_iter().map(move |d| (v, add(v, d))))
            .filter(|(_, b)| vs.contains(b))
            .collect();
        Self::new(vs.clone(), edges, base_vertex)
    }

    /// `m` by `n` grid graph (m vertices across, n up), based at the origin.
    pub fn grid(m: i32, n: i32) -> Self {
        Self::induced((0..n).flat_map(|j| (0..m).map(move |i| (2 * i, 2 * j))), (0, 0)).expect("grid graph is valid")
    }

    pub fn has_edge(&self, a: Point, b: Point) -> bool {
        self.edges.contains(&edge_key(a, b))
    }

    pub fn neighbors(&self, v: Point) -> impl Iterator<Item = Point> + '_ {
        DIRS.iter().map(move |d| (v.0 + 2 * d.0, v.1 + 2 * d.1)).filter(move |&u| self.has_edge(v, u))
    }

    pub fn degree(&self, v: Point) -> usize {
        self.neighbors(v).count()
    }

    /// Bounded faces, named by their centres (odd, odd).
    pub fn faces(&self) -> BTreeSet<Point> {
        let mut out = BTreeSet::new();
        for &(x, y) in &self.vertices {
            let (a, b, c, d) = ((x, y), (x + 2, y), (x + 2, y + 2), (x, y + 2));
            if self.has_edge(a, b) && self.has_edge(b, c) && self.has_edge(c, d) && self.has_edge(d, a) {
                out.insert((x + 1, y + 1));
            }
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        let start = *self.vertices.iter().next().expect("nonempty");
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for u in self.neighbors(v) {
                if seen.insert(u) {
                    queue.push_back(u);
                }
            }
        }
        seen.len() == self.vertices.len()
    }

    pub fn is_boundary_vertex(&self, v: Point) -> bool {
        let faces = self.faces();
        [(1, 1), (-1, 1), (1, -1), (-1, -1)].iter().any(|d| !faces.contains(&add(v, *d)))
    }

    /// Edge sides adjacent to the outer face (an edge with the outer face on both sides counts twice).
    pub fn boundary_edge_count(&self) -> usize {
        2 * self.edges.len() - 4 * self.faces().len()
    }

    /// Index of vertices in sorted order.
    pub fn vertex_list(&self) -> Vec<Point> {
        self.vertices.iter().copied().collect()
    }
}

/// `P(H)`: the superposition of `H` and its dual with the base square removed.
#[derive(Clone, Debug, PartialEq)]
pub struct TemperleyanPolyomino {
    pub region: CellRegion,
    pub base_square: Point,
    pub scale: Option<f64>,
    pub graph: GridSubgraph,
}

impl std::ops::Deref for TemperleyanPolyomino {
    type Target = CellRegion;
    fn deref(&self) -> &CellRegion {
        &self.region
    }
}

pub fn temperleyan_from_subgraph(h: &GridSubgraph) -> TemperleyanPolyomino {
    let mut cells: BTreeSet<Point> = h.vertices.clone();
    for &(a, b) in &h.edges {
        cells.insert(((a.0 + b.0) / 2, (a.1 + b.1) / 2));
    }
    cells.extend(h.faces());
    cells.remove(&h.base_vertex);
    TemperleyanPolyomino { region: CellRegion { cells }, base_square: h.base_vertex, scale: None, graph: h.clone() }
}

impl TemperleyanPolyomino {
    /// Recover `H` from a cell set and base square and check that `P(H)` reproduces the cells.
    pub fn from_region(region: &CellRegion, base: Point) -> Result<Self, RegionError> {
        if CellClass::of(base) != CellClass::B0 {
            return Err(RegionError::NotTemperleyan(format!("base {base:?} is not a B0 cell")));
        }
        if region.contains(base) {
            return Err(RegionError::NotTemperleyan("base square must not be a cell".into()));
        }
        let mut vertices: BTreeSet<Point> =
            region.cells.iter().copied().filter(|&c| CellClass::of(c) == CellClass::B0).collect();
        vertices.insert(base);
        let edges: Vec<(Point, Point)> = region
            .cells
            .iter()
            .filter_map(|&c| match CellClass::of(c) {
                CellClass::W0 => Some(((c.0 - 1, c.1), (c.0 + 1, c.1))),
                CellClass::W1 => Some(((c.0, c.1 - 1), (c.0, c.1 + 1))),
                _ => None,
            })
            .collect();
        let h = GridSubgraph::new(vertices, edges, base)?;
        let p = temperleyan_from_subgraph(&h);
        if p.region != *region {
            return Err(RegionError::NotTemperleyan("cells differ from the superposition of H and its dual".into()));
        }
        Ok(p)
    }

    pub fn with_scale(mut self, eps: f64) -> Self {
        self.scale = Some(eps);
        self
    }

    pub fn cell_class(&self, c: Point) -> Option<CellClass> {
        self.contains(c).then(|| CellClass::of(c))
    }

    /// The polyomino with its base square filled back in.
    pub fn filled(&self) -> CellRegion {
        self.region.with(&[self.base_square])
    }

    /// Side lengths of the filled polyomino's boundary together with the
    /// convexity of the corner at each end. Returns `(length, start_convex, end_convex)`.
    pub fn boundary_sides(&self) -> Vec<(i32, bool, bool)> {
        let filled = self.filled();
        let cyc = filled.boundary_cycle();
        let n = cyc.len();
        let convex = |i: usize| {
            let a = cyc[(i + n - 1) % n];
            let b = cyc[i];
            let c = cyc[(i + 1) % n];
            let cross = (b.0 - a.0) * (c.1 - b.1) - (b.1 - a.1) * (c.0 - b.0);
            cross > 0
        };
        (0..n)
            .map(|i| {
                let a = cyc[i];
                let b = cyc[(i + 1) % n];
                ((b.0 - a.0).abs() + (b.1 - a.1).abs(), convex(i), convex((i + 1) % n))
            })
            .collect()
    }

    /// Sides between a convex and a concave corner have even length, others odd.
    pub fn boundary_parity_holds(&self) -> bool {
        self.boundary_sides().iter().all(|&(len, a, b)| (len % 2 == 0) == (a != b))
    }

    /// Corner count of the filled polyomino.
    pub fn corner_count(&self) -> usize {
        let (cv, cc) = self.filled().corner_counts();
        cv + cc
    }
}

/// A rectilinear polygon with a marked base point on its boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectilinearPolygon {
    pub corners: Vec<(f64, f64)>,
    #[serde(rename = "base")]
    pub base_point: (f64, f64),
}

const GEOM_TOL: f64 = 1e-9;

impl RectilinearPolygon {
    /// Validates alternation, orients counterclockwise and checks the base point.
    pub fn new(corners: Vec<(f64, f64)>, base_point: (f64, f64)) -> Result<Self, RegionError> {
        let n = corners.len();
        if n < 4 || n % 2 != 0 {
            return Err(RegionError::InvalidPolygon(format!("{n} corners")));
        }
        for i in 0..n {
            let a = corners[i];
            let b = corners[(i + 1) % n];
            let c = corners[(i + 2) % n];
            let h1 = (a.1 - b.1).abs() < GEOM_TOL && (a.0 - b.0).abs() > GEOM_TOL;
            let v1 = (a.0 - b.0).abs() < GEOM_TOL && (a.1 - b.1).abs() > GEOM_TOL;
            let h2 = (b.1 - c.1).abs() < GEOM_TOL && (b.0 - c.0).abs() > GEOM_TOL;
            let v2 = (b.0 - c.0).abs() < GEOM_TOL && (b.1 - c.1).abs() > GEOM_TOL;
            if !((h1 && v2) || (v1 && h2)) {
                return Err(RegionError::InvalidPolygon(format!("sides at corner {} do not alternate", (i + 1) % n)));
            }
        }
        let mut corners = corners;
        if signed_area(&corners) < 0.0 {
            corners.reverse();
        }
        let p = RectilinearPolygon { corners, base_point };
        let turns: i32 = (0..n).map(|i| if p.is_convex(i) { 1 } else { -1 }).sum();
        if turns != 4 {
            return Err(RegionError::InvalidPolygon("boundary is not a simple closed curve".into()));
        }
        p.locate(base_point).ok_or(RegionError::PointNotOnBoundary)?;
        Ok(p)
    }

    pub fn rectangle(w: f64, h: f64) -> Self {
        Self::new(vec![(0.0, 0.0), (w, 0.0), (w, h), (0.0, h)], (0.0, 0.0)).expect("rectangle")
    }

    /// L-shape: `[0,1]^2` minus `[1/2,1]^2`, scaled, base at the origin.
    pub fn l_shape(s: f64) -> Self {
        let c = [(0.0, 0.0), (1.0, 0.0), (1.0, 0.5), (0.5, 0.5), (0.5, 1.0), (0.0, 1.0)];
        Self::new(c.iter().map(|&(x, y)| (x * s, y * s)).collect(), (0.0, 0.0)).expect("L-shape")
    }

    pub fn vertex_count(&self) -> usize {
        self.corners.len()
    }

    pub fn is_convex(&self, i: usize) -> bool {
        let n = self.corners.len();
        let a = self.corners[(i + n - 1) % n];
        let b = self.corners[i];
        let c = self.corners[(i + 1) % n];
        (b.0 - a.0) * (c.1 - b.1) - (b.1 - a.1) * (c.0 - b.0) > 0.0
    }

    pub fn side(&self, i: usize) -> ((f64, f64), (f64, f64)) {
        let n = self.corners.len();
        (self.corners[i], self.corners[(i + 1) % n])
    }

    pub fn min_side(&self) -> f64 {
        (0..self.corners.len())
            .map(|i| {
                let (a, b) = self.side(i);
                (a.0 - b.0).abs() + (a.1 - b.1).abs()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Side index and fractional position of a boundary point.
    pub fn locate(&self, x: (f64, f64)) -> Option<(usize, f64)> {
        let scale = self.corners.iter().map(|c| c.0.abs().max(c.1.abs())).fold(1.0, f64::max);
        let tol = GEOM_TOL * scale;
        (0..self.corners.len()).find_map(|i| {
            let (a, b) = self.side(i);
            let len = (a.0 - b.0).abs() + (a.1 - b.1).abs();
            let t = ((x.0 - a.0).abs() + (x.1 - a.1).abs()) / len;
            let on = if (a.1 - b.1).abs() < GEOM_TOL {
                (x.1 - a.1).abs() < tol && x.0 >= a.0.min(b.0) - tol && x.0 <= a.0.max(b.0) + tol
            } else {
                (x.0 - a.0).abs() < tol && x.1 >= a.1.min(b.1) - tol && x.1 <= a.1.max(b.1) + tol
            };
            (on && t < 1.0 - GEOM_TOL).then_some((i, t))
        })
    }

    /// Turning (radians) of the boundary tangent from the base point counterclockwise to `x`.
    pub fn turning_to(&self, x: (f64, f64)) -> Result<f64, RegionError> {
        let (si, t) = self.locate(x).ok_or(RegionError::PointNotOnBoundary)?;
        if t.abs() < GEOM_TOL {
            return Err(RegionError::PointNotOnBoundary);
        }
        let (bi, bt) = self.locate(self.base_point).expect("base on boundary");
        let n = self.corners.len();
        let mut turning = 0.0;
        let mut i = bi;
        if !(si == bi && t >= bt) {
            loop {
                i = (i + 1) % n;
                turning += if self.is_convex(i) { FRAC_PI_2 } else { -FRAC_PI_2 };
                if i == si {
                    break;
                }
            }
        }
        Ok(turning)
    }

    /// Closed point-in-polygon test.
    pub fn contains_point(&self, p: (f64, f64)) -> bool {
        if self.locate(p).is_some() || self.corners.iter().any(|c| (c.0 - p.0).abs() < GEOM_TOL && (c.1 - p.1).abs() < GEOM_TOL) {
            return true;
        }
        self.strictly_inside(p)
    }

    /// Open point-in-polygon test by ray crossing; points on the boundary return false.
    pub fn strictly_inside(&self, p: (f64, f64)) -> bool {
        if self.locate(p).is_some() {
            return false;
        }
        let n = self.corners.len();
        let mut inside = false;
        for i in 0..n {
            let (a, b) = self.side(i);
            if (a.0 - b.0).abs() < GEOM_TOL {
                // Vertical side: count crossings of the ray to +x.
                let (y0, y1) = (a.1.min(b.1), a.1.max(b.1));
                if a.0 > p.0 && p.1 >= y0 && p.1 < y1 {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.corners).abs()
    }

    pub fn perimeter(&self) -> f64 {
        (0..self.corners.len())
            .map(|i| {
                let (a, b) = self.side(i);
                (a.0 - b.0).abs() + (a.1 - b.1).abs()
            })
            .sum()
    }

    pub fn from_json(text: &str) -> Result<Self, RegionError> {
        let raw: RectilinearPolygon = serde_json::from_str(text).map_err(|e| RegionError::Json(e.to_string()))?;
        if raw.corners.iter().any(|c| !c.0.is_finite() || !c.1.is_finite()) {
            return Err(RegionError::InvalidPolygon("non-finite coordinate".into()));
        }
        Self::new(raw.corners, raw.base_point)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("polygon serializes")
    }
}

fn signed_area(c: &[(f64, f64)]) -> f64 {
    let n = c.len();
    (0..n).map(|i| c[i].0 * c[(i + 1) % n].1 - c[(i + 1) % n].0 * c[i].1).sum::<f64>() / 2.0
}

fn snap_even(t: f64) -> i32 {
    2 * (t / 2.0).round() as i32
}

/// Temperleyan polyomino in the `eps`-lattice approximating `u`.
///
/// Each side is snapped to the even lattice line whose polyomino boundary
/// (half a cell outside the vertices of `H`) lies nearest to it.
pub fn approximate_polygon(u: &RectilinearPolygon, eps: f64) -> Result<TemperleyanPolyomino, RegionError> {
    if !(eps > 0.0) || u.min_side() <= 4.0 * eps {
        return Err(RegionError::EpsTooLarge(eps));
    }
    let n = u.corners.len();
    // Snapped coordinate of side i (x for vertical sides, y for horizontal ones).
    let snapped: Vec<i32> = (0..n)
        .map(|i| {
            let (a, b) = u.side(i);
            if (a.0 - b.0).abs() < GEOM_TOL {
                let going_up = b.1 > a.1;
                let t = a.0 / eps;
                if going_up { snap_even(t - 0.5) } else { snap_even(t + 0.5) }
            } else {
                let going_right = b.0 > a.0;
                let t = a.1 / eps;
                if going_right { snap_even(t + 0.5) } else { snap_even(t - 0.5) }
            }
        })
        .collect();
    // Corner i sits between side i-1 and side i.
    let corners: Vec<Point> = (0..n)
        .map(|i| {
            let prev = (i + n - 1) % n;
            let (a, b) = u.side(i);
            if (a.0 - b.0).abs() < GEOM_TOL {
                (snapped[i], snapped[prev])
            } else {
                (snapped[prev], snapped[i])
            }
        })
        .collect();
    let snapped_poly = RectilinearPolygon::new(
        corners.iter().map(|&(x, y)| (x as f64, y as f64)).collect(),
        (corners[0].0 as f64, corners[0].1 as f64),
    )
    .map_err(|_| RegionError::EpsTooLarge(eps))?;
    if snapped_poly.corners.len() != n {
        return Err(RegionError::EpsTooLarge(eps));
    }
    let xs = corners.iter().map(|c| c.0);
    let ys = corners.iter().map(|c| c.1);
    let (x0, x1) = (xs.clone().min().unwrap(), xs.max().unwrap());
    let (y0, y1) = (ys.clone().min().unwrap(), ys.max().unwrap());
    let mut vertices = BTreeSet::new();
    for y in (y0..=y1).step_by(2) {
        for x in (x0..=x1).step_by(2) {
            if snapped_poly.contains_point((x as f64, y as f64)) {
                vertices.insert((x, y));
            }
        }
    }
    let edges: Vec<(Point, Point)> = vertices
        .iter()
        .flat_map(|&v| [(2, 0), (0, 2)].into_iter().map(move |d| (v, add(v, d))))
        .filter(|&(a, b)| vertices.contains(&b) && snapped_poly.contains_point(((a.0 + b.0) as f64 / 2.0, (a.1 + b.1) as f64 / 2.0)))
        .collect();
    // Base vertex: boundary vertex nearest to the scaled base point, lowest-leftmost on ties.
    let b0 = (u.base_point.0 / eps, u.base_point.1 / eps);
    let probe = GridSubgraph { vertices: vertices.clone(), edges: edges.iter().map(|&(a, b)| edge_key(a, b)).collect(), base_vertex: (x0, y0) };
    let base = vertices
        .iter()
        .copied()
        .filter(|&v| probe.is_boundary_vertex(v))
        .min_by(|&a, &b| {
            let da = (a.0 as f64 - b0.0).hypot(a.1 as f64 - b0.1);
            let db = (b.0 as f64 - b0.0).hypot(b.1 as f64 - b0.1);
            da.partial_cmp(&db).unwrap().then(low_left(a).cmp(&low_left(b)))
        })
        .ok_or(RegionError::EpsTooLarge(eps))?;
    let h = GridSubgraph::new(vertices, edges, base).map_err(|_| RegionError::EpsTooLarge(eps))?;
    let p = temperleyan_from_subgraph(&h).with_scale(eps);
    if p.corner_count() != n {
        return Err(RegionError::EpsTooLarge(eps));
    }
    Ok(p)
}

/// Temperleyan `(2m-1) x (2n-1)` rectangle minus its lower-left corner.
pub fn temperleyan_rectangle(m: i32, n: i32) -> TemperleyanPolyomino {
    temperleyan_from_subgraph(&GridSubgraph::grid(m, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_graph_gives_two_cells() {
        let h = GridSubgraph::new([(0, 0), (2, 0)], [((0, 0), (2, 0))], (0, 0)).unwrap();
        let p = temperleyan_from_subgraph(&h);
        assert_eq!(p.len(), 2);
        assert_eq!(p.blacks().len(), 1);
        assert_eq!(p.whites().len(), 1);
    }

    #[test]
    fn two_by_two_grid_is_square_minus_corner() {
        let h = GridSubgraph::grid(2, 2);
        let p = temperleyan_from_subgraph(&h);
        assert_eq!(p.len(), 8);
        assert_eq!(p.filled(), CellRegion::rectangle(3, 3));
        assert_eq!(p.base_square, (0, 0));
        let (n, b) = (h.vertices.len(), h.boundary_edge_count());
        assert_eq!(p.area(), 4 * n - b - 4);
        assert_eq!(p.perimeter(), 2 * b + 4);
    }

    #[test]
    fn grid_gives_odd_rectangle() {
        for (m, n) in [(3, 4), (5, 2), (4, 4)] {
            let p = temperleyan_rectangle(m, n);
            assert_eq!(p.filled(), CellRegion::rectangle(2 * m - 1, 2 * n - 1));
            assert!(p.boundary_parity_holds());
            assert_eq!(p.corner_count(), 4);
        }
    }

    #[test]
    fn cycle_with_missing_face_is_rejected() {
        let vs: Vec<Point> = (0..3).flat_map(|j| (0..3).map(move |i| (2 * i, 2 * j))).filter(|&v| v != (2, 2)).collect();
        // 8-cycle around a missing centre vertex: a hole.
        assert_eq!(GridSubgraph::induced(vs, (0, 0)), Err(RegionError::NotSimplyConnected));
    }

    #[test]
    fn interior_base_is_rejected() {
        let vs: Vec<Point> = (0..3).flat_map(|j| (0..3).map(move |i| (2 * i, 2 * j))).collect();
        assert_eq!(GridSubgraph::induced(vs, (2, 2)), Err(RegionError::BaseNotOnBoundary((2, 2))));
    }

    #[test]
    fn from_region_round_trips() {
        let p = temperleyan_rectangle(3, 2);
        let q = TemperleyanPolyomino::from_region(&p.region, p.base_square).unwrap();
        assert_eq!(p, q);
        let bad = p.region.without(&[(1, 1)]);
        assert!(TemperleyanPolyomino::from_region(&bad, p.base_square).is_err());
    }

    #[test]
    fn ascii_round_trip() {
        let p = temperleyan_rectangle(2, 2);
        let text = p.to_ascii(Some(p.base_square));
        assert_eq!(text, "###\n###\nX##\n");
        let parsed = parse_ascii(&text).unwrap();
        assert_eq!(parsed.region, p.region);
        assert_eq!(parsed.base, Some((0, 0)));
        assert!(parse_ascii("#?#").is_err());
    }

    #[test]
    fn unit_square_at_ninth() {
        let u = RectilinearPolygon::rectangle(1.0, 1.0);
        let p = approximate_polygon(&u, 1.0 / 9.0).unwrap();
        assert_eq!(p.filled(), CellRegion::rectangle(9, 9));
        assert_eq!(p.base_square, (0, 0));
        assert!(matches!(approximate_polygon(&u, 0.6), Err(RegionError::EpsTooLarge(_))));
    }

    #[test]
    fn l_shape_approximation() {
        let u = RectilinearPolygon::l_shape(1.0);
        let eps = 1.0 / 20.0;
        let p = approximate_polygon(&u, eps).unwrap();
        assert_eq!(p.corner_count(), 6);
        assert!(p.boundary_parity_holds());
        let cyc = p.filled().boundary_cycle();
        for &(x, y) in &u.corners {
            let best = cyc
                .iter()
                .map(|&(i, j)| ((i as f64 - 0.5) * eps - x).hypot((j as f64 - 0.5) * eps - y))
                .fold(f64::INFINITY, f64::min);
            assert!(best <= 2.0 * eps, "corner ({x},{y}) off by {best}");
        }
    }

    #[test]
    fn turning_examples() {
        let sq = RectilinearPolygon::rectangle(1.0, 1.0);
        assert!((sq.turning_to((1.0, 0.1)).unwrap() - FRAC_PI_2).abs() < 1e-12);
        assert!((sq.turning_to((0.0, 0.001)).unwrap() - 3.0 * FRAC_PI_2).abs() < 1e-12);
        assert!((sq.turning_to((0.5, 0.0)).unwrap()).abs() < 1e-12);
        let l = RectilinearPolygon::l_shape(1.0);
        // Past (1,0) convex, (1,1/2) convex, (1/2,1/2) concave.
        assert!((l.turning_to((0.5, 0.75)).unwrap() - FRAC_PI_2).abs() < 1e-12);
        assert_eq!(sq.turning_to((0.5, 0.5)), Err(RegionError::PointNotOnBoundary));
    }

    #[test]
    fn polygon_json() {
        let l = RectilinearPolygon::l_shape(2.0);
        let back = RectilinearPolygon::from_json(&l.to_json()).unwrap();
        assert_eq!(back, l);
        assert!(RectilinearPolygon::from_json("{\"corners\":[[0,0],[1,1],[0,1],[1,0]],\"base\":[0,0]}").is_err());
    }
}
