//! Discrete Green's function of the slit plane, truncated to a box.
//!
//! The slit is `{(x, 0) : x <= -1}`; the pole sits at its tip `0`. Both the direct
//! solve and the two-field construction `g_n(z) = f_n(z) - f_{n+1}(z - 1)` use
//! Dirichlet data on the slit and zero on the outer box.

use serde::Serialize;
use thiserror::Error;

use crate::linalg::conjugate_gradient;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SlitError {
    #[error("box half-width {0} is below 8")]
    BoxTooSmall(usize),
    #[error("n = {n} must satisfy 1 <= n < M/4 = {limit}")]
    BadN { n: usize, limit: usize },
}

/// Relative residual at which the conjugate-gradient solves stop.
pub const SOLVER_TOLERANCE: f64 = 1e-13;

/// Box `[-M, M]^2` around the slit tip.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SlitBox {
    pub half_width: usize,
}

impl SlitBox {
    pub fn new(half_width: usize) -> Result<Self, SlitError> {
        if half_width < 8 {
            return Err(SlitError::BoxTooSmall(half_width));
        }
        Ok(SlitBox { half_width })
    }
}

/// Values on the lattice rectangle `[x0, x1] x [-M, M]`, boundary included.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlitField {
    pub x_range: (i64, i64),
    pub half_height: i64,
    pub values: Vec<f64>,
    pub iterations: usize,
    /// Largest `|Δu - source|` over the free nodes.
    pub residual: f64,
}

impl SlitField {
    fn width(&self) -> i64 {
        self.x_range.1 - self.x_range.0 + 1
    }

    /// Value at `(x, y)`; zero outside the rectangle.
    pub fn get(&self, x: i64, y: i64) -> f64 {
        if x < self.x_range.0 || x > self.x_range.1 || y.abs() > self.half_height {
            return 0.0;
        }
        self.values[((y + self.half_height) * self.width() + x - self.x_range.0) as usize]
    }

    /// Discrete Laplacian `Σ neighbours - 4u` at an interior node.
    pub fn laplacian(&self, x: i64, y: i64) -> f64 {
        self.get(x + 1, y) + self.get(x - 1, y) + self.get(x, y + 1) + self.get(x, y - 1) - 4.0 * self.get(x, y)
    }
}

/// Dirichlet problem `Δu = source` on a lattice rectangle with the slit and outer ring fixed.
struct Problem {
    x0: i64,
    x1: i64,
    m: i64,
    fixed: Vec<Option<f64>>,
    source: Vec<f64>,
}

impl Problem {
    fn new(x0: i64, x1: i64, m: i64, slit_value: impl Fn(i64) -> f64) -> Self {
        let (w, h) = ((x1 - x0 + 1) as usize, (2 * m + 1) as usize);
        let mut fixed = vec![None; w * h];
        for j in 0..h {
            for i in 0..w {
                let (x, y) = (x0 + i as i64, j as i64 - m);
                if y == 0 && x <= -1 {
                    fixed[j * w + i] = Some(slit_value(x));
                } else if i == 0 || j == 0 || i == w - 1 || j == h - 1 {
                    fixed[j * w + i] = Some(0.0);
                }
            }
        }
        Problem { x0, x1, m, fixed, source: vec![0.0; w * h] }
    }

    fn width(&self) -> usize {
        (self.x1 - self.x0 + 1) as usize
    }

    fn index(&self, x: i64, y: i64) -> usize {
        ((y + self.m) as usize) * self.width() + (x - self.x0) as usize
    }

    fn solve(&self) -> SlitField {
        let w = self.width();
        let n = self.fixed.len();
        let free: Vec<bool> = self.fixed.iter().map(Option::is_none).collect();
        let nbrs = |k: usize| [k - 1, k + 1, k - w, k + w];
        // -Δ on free nodes with fixed neighbours moved to the right-hand side; identity on fixed nodes.
        let mut rhs = vec![0.0; n];
        for k in 0..n {
            if free[k] {
                rhs[k] = -self.source[k] + nbrs(k).iter().filter_map(|&j| self.fixed[j]).sum::<f64>();
            }
        }
        // The iterates vanish on fixed nodes (their residual starts and stays at zero),
        // so the stencil can read fixed neighbours without masking them.
        let mask: Vec<f64> = free.iter().map(|&f| if f { 1.0 } else { 0.0 }).collect();
        let h = n / w;
        let apply = |p: &[f64], out: &mut [f64]| {
            out.copy_from_slice(p);
            for j in 1..h - 1 {
                let row = j * w;
                for k in row + 1..row + w - 1 {
                    let s = 4.0 * p[k] - p[k - 1] - p[k + 1] - p[k - w] - p[k + w];
                    out[k] = mask[k] * s + (1.0 - mask[k]) * p[k];
                }
            }
        };
        let (mut u, iterations) = conjugate_gradient(apply, &rhs, None, SOLVER_TOLERANCE, 20 * n);
        for k in 0..n {
            if let Some(v) = self.fixed[k] {
                u[k] = v;
            }
        }
        let mut field = SlitField { x_range: (self.x0, self.x1), half_height: self.m, values: u, iterations, residual: 0.0 };
        let mut residual = 0.0f64;
        for k in (0..n).filter(|&k| free[k]) {
            let (x, y) = (self.x0 + (k % w) as i64, (k / w) as i64 - self.m);
            residual = residual.max((field.laplacian(x, y) - self.source[k]).abs());
        }
        field.residual = residual;
        field
    }
}

/// `G(0, ·)`: `ΔG = δ_0` off the slit, zero on the slit and on the box.
pub fn slit_greens(b: &SlitBox) -> SlitField {
    let m = b.half_width as i64;
    let mut p = Problem::new(-m, m, m, |_| 0.0);
    let k = p.index(0, 0);
    p.source[k] = 1.0;
    p.solve()
}

/// `f_n` on `[x0, x1] x [-M, M]`: zero on `[-n, -1]`, one further left on the slit, zero on the box.
fn f_field(n: i64, x0: i64, x1: i64, m: i64) -> SlitField {
    Problem::new(x0, x1, m, |x| if x >= -n { 0.0 } else { 1.0 }).solve()
}

/// The two auxiliary fields and the Green's function assembled from them.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FnConstruction {
    pub n: usize,
    /// `f_n` on the box.
    pub f_n: SlitField,
    /// `f_{n+1}` on the box shifted left by one, so that `f_{n+1}(z - 1)` is defined on the box.
    pub f_n1: SlitField,
    /// `f_{n+1}(0) + f_{n+1}(-1 + i) + f_{n+1}(-1 - i)`, minus the Laplacian of `g_n` at `0`.
    pub denominator: f64,
    /// `f_{n+1}(0) + f_{n+1}(i) + f_{n+1}(-i)`, the unshifted neighbours.
    pub unshifted_denominator: f64,
    pub assembled: SlitField,
    /// Largest difference from the direct solve over the box.
    pub max_difference: f64,
    /// Same, with the unshifted denominator.
    pub unshifted_max_difference: f64,
}

/// `G(0, z) = -(f_n(z) - f_{n+1}(z - 1)) / (f_{n+1}(0) + f_{n+1}(-1 + i) + f_{n+1}(-1 - i))`,
/// compared against [`slit_greens`] on the same box.
pub fn fn_construction(n: usize, b: &SlitBox) -> Result<FnConstruction, SlitError> {
    let m = b.half_width as i64;
    if n == 0 || 4 * n >= b.half_width {
        return Err(SlitError::BadN { n, limit: b.half_width / 4 });
    }
    let ni = n as i64;
    let f_n = f_field(ni, -m, m, m);
    let f_n1 = f_field(ni + 1, -m - 1, m - 1, m);
    let denominator = f_n1.get(0, 0) + f_n1.get(-1, 1) + f_n1.get(-1, -1);
    let unshifted_denominator = f_n1.get(0, 0) + f_n1.get(0, 1) + f_n1.get(0, -1);
    let direct = slit_greens(b);
    let g = |x: i64, y: i64| f_n.get(x, y) - f_n1.get(x - 1, y);
    let mut values = Vec::with_capacity(direct.values.len());
    let (mut diff, mut diff_unshifted) = (0.0f64, 0.0f64);
    for y in -m..=m {
        for x in -m..=m {
            let v = -g(x, y) / denominator;
            values.push(v);
            diff = diff.max((v - direct.get(x, y)).abs());
            diff_unshifted = diff_unshifted.max((-g(x, y) / unshifted_denominator - direct.get(x, y)).abs());
        }
    }
    let mut assembled = SlitField { x_range: (-m, m), half_height: m, values, iterations: 0, residual: 0.0 };
    let mut residual = 0.0f64;
    for y in -m + 1..m {
        for x in -m + 1..m {
            if !(y == 0 && x <= -1) {
                let src = if (x, y) == (0, 0) { 1.0 } else { 0.0 };
                residual = residual.max((assembled.laplacian(x, y) - src).abs());
            }
        }
    }
    assembled.residual = residual;
    Ok(FnConstruction {
        n,
        f_n,
        f_n1,
        denominator,
        unshifted_denominator,
        assembled,
        max_difference: diff,
        unshifted_max_difference: diff_unshifted,
    })
}

/// `|G(0, x)| √x` along the positive axis over `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Plateau {
    pub points: Vec<(i64, f64)>,
    pub min: f64,
    pub max: f64,
    /// `max / min - 1`.
    pub spread: f64,
    /// Largest relative deviation from the best constant, `(max - min) / (max + min)`.
    pub deviation: f64,
}

pub fn plateau(g: &SlitField, lo: i64, hi: i64) -> Plateau {
    let points: Vec<(i64, f64)> = (lo.max(1)..=hi).map(|x| (x, g.get(x, 0).abs() * (x as f64).sqrt())).collect();
    let min = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let max = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    Plateau { points, min, max, spread: max / min - 1.0, deviation: (max - min) / (max + min) }
}

/// `f_n(0) √n` for each `n` on one box.
pub fn kesten_trend(ns: &[usize], b: &SlitBox) -> Result<Vec<(usize, f64)>, SlitError> {
    let m = b.half_width as i64;
    ns.iter()
        .map(|&n| {
            if n == 0 || 4 * n >= b.half_width {
                return Err(SlitError::BadN { n, limit: b.half_width / 4 });
            }
            Ok((n, f_field(n as i64, -m, m, m).get(0, 0) * (n as f64).sqrt()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_box_is_rejected() {
        assert_eq!(SlitBox::new(7), Err(SlitError::BoxTooSmall(7)));
        let b = SlitBox::new(16).unwrap();
        assert_eq!(fn_construction(4, &b).unwrap_err(), SlitError::BadN { n: 4, limit: 4 });
    }

    #[test]
    fn direct_solve_has_unit_source_and_zero_slit() {
        let g = slit_greens(&SlitBox::new(16).unwrap());
        for x in -16..=-1 {
            assert_eq!(g.get(x, 0), 0.0);
        }
        assert!((g.laplacian(0, 0) - 1.0).abs() < 1e-12);
        assert!(g.residual < 1e-12);
        assert!(g.get(0, 0) < 0.0);
    }
}
