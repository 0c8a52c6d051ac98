//! Exact and floating dense/banded linear algebra kernels.

use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type GaussInt = Complex<BigInt>;
pub type GaussRat = Complex<BigRational>;

pub fn gauss_norm(z: &GaussInt) -> BigInt {
    &z.re * &z.re + &z.im * &z.im
}

/// Exact quotient of Gaussian integers; the caller guarantees divisibility.
pub fn gauss_div_exact(a: &GaussInt, b: &GaussInt) -> GaussInt {
    let n = gauss_norm(b);
    let num = a * b.conj();
    debug_assert!((&num.re % &n).is_zero() && (&num.im % &n).is_zero(), "inexact Gaussian division");
    Complex::new(num.re / &n, num.im / n)
}

/// Fraction-free (Bareiss) determinant over the Gaussian integers.
/// Pivots on the largest norm in the column, lowest row index on ties.
pub fn bareiss_det_gauss(mut a: Vec<Vec<GaussInt>>) -> GaussInt {
    let n = a.len();
    if n == 0 {
        return GaussInt::one();
    }
    let mut prev = GaussInt::one();
    let mut sign_flip = false;
    for k in 0..n {
        let mut best: Option<(usize, BigInt)> = None;
        for (i, row) in a.iter().enumerate().skip(k) {
            let nm = gauss_norm(&row[k]);
            if !nm.is_zero() && best.as_ref().map_or(true, |(_, b)| nm > *b) {
                best = Some((i, nm));
            }
        }
        let Some((p, _)) = best else {
            return GaussInt::zero();
        };
        if p != k {
            a.swap(p, k);
            sign_flip = !sign_flip;
        }
        let (top, bottom) = a.split_at_mut(k + 1);
        let pivot_row = &top[k];
        let pivot = pivot_row[k].clone();
        for row in bottom.iter_mut() {
            let factor = row[k].clone();
            for j in k + 1..n {
                let v = &pivot * &row[j] - &factor * &pivot_row[j];
                row[j] = if k == 0 { v } else { gauss_div_exact(&v, &prev) };
            }
            row[k] = GaussInt::zero();
        }
        prev = pivot;
    }
    let d = a[n - 1][n - 1].clone();
    if sign_flip {
        -d
    } else {
        d
    }
}

/// Fraction-free determinant over the integers.
pub fn bareiss_det_int(mut a: Vec<Vec<BigInt>>) -> BigInt {
    let n = a.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut prev = BigInt::one();
    let mut negate = false;
    for k in 0..n {
        let Some(p) = (k..n).filter(|&i| !a[i][k].is_zero()).max_by(|&i, &j| a[i][k].abs().cmp(&a[j][k].abs()).then(j.cmp(&i)))
        else {
            return BigInt::zero();
        };
        if p != k {
            a.swap(p, k);
            negate = !negate;
        }
        let (top, bottom) = a.split_at_mut(k + 1);
        let pivot_row = &top[k];
        let pivot = pivot_row[k].clone();
        for row in bottom.iter_mut() {
            let factor = row[k].clone();
            for j in k + 1..n {
                let v = &pivot * &row[j] - &factor * &pivot_row[j];
                row[j] = v / &prev;
            }
            row[k] = BigInt::zero();
        }
        prev = pivot;
    }
    let d = a[n - 1][n - 1].clone();
    if negate {
        -d
    } else {
        d
    }
}

pub fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn gauss_rat_from_int(z: &GaussInt) -> GaussRat {
    Complex::new(BigRational::from_integer(z.re.clone()), BigRational::from_integer(z.im.clone()))
}

fn gauss_rat_is_zero(z: &GaussRat) -> bool {
    z.re.is_zero() && z.im.is_zero()
}

fn gauss_rat_inv(z: &GaussRat) -> GaussRat {
    let n = &z.re * &z.re + &z.im * &z.im;
    Complex::new(&z.re / &n, -&z.im / n)
}

/// Exact inverse by Gauss-Jordan elimination over `Q(i)`. `None` if singular.
pub fn invert_gauss_rat(a: &[Vec<GaussRat>]) -> Option<Vec<Vec<GaussRat>>> {
    let n = a.len();
    let mut m: Vec<Vec<GaussRat>> = a.to_vec();
    let mut inv: Vec<Vec<GaussRat>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { GaussRat::one() } else { GaussRat::zero() }).collect())
        .collect();
    for k in 0..n {
        let p = (k..n).find(|&i| !gauss_rat_is_zero(&m[i][k]))?;
        m.swap(p, k);
        inv.swap(p, k);
        let piv = gauss_rat_inv(&m[k][k]);
        for j in 0..n {
            if !gauss_rat_is_zero(&m[k][j]) {
                m[k][j] = &m[k][j] * &piv;
            }
            if !gauss_rat_is_zero(&inv[k][j]) {
                inv[k][j] = &inv[k][j] * &piv;
            }
        }
        for i in 0..n {
            if i == k || gauss_rat_is_zero(&m[i][k]) {
                continue;
            }
            let f = m[i][k].clone();
            for j in 0..n {
                if !gauss_rat_is_zero(&m[k][j]) {
                    let t = &f * &m[k][j];
                    m[i][j] = &m[i][j] - t;
                }
                if !gauss_rat_is_zero(&inv[k][j]) {
                    let t = &f * &inv[k][j];
                    inv[i][j] = &inv[i][j] - t;
                }
            }
        }
    }
    Some(inv)
}

/// Exact inverse of a rational matrix (real case).
pub fn invert_rational(a: &[Vec<BigRational>]) -> Option<Vec<Vec<BigRational>>> {
    let n = a.len();
    let mut m: Vec<Vec<BigRational>> = a.to_vec();
    let mut inv: Vec<Vec<BigRational>> =
        (0..n).map(|i| (0..n).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }).collect()).collect();
    for k in 0..n {
        let p = (k..n).find(|&i| !m[i][k].is_zero())?;
        m.swap(p, k);
        inv.swap(p, k);
        let piv = m[k][k].recip();
        for j in 0..n {
            if !m[k][j].is_zero() {
                m[k][j] = &m[k][j] * &piv;
            }
            if !inv[k][j].is_zero() {
                inv[k][j] = &inv[k][j] * &piv;
            }
        }
        for i in 0..n {
            if i == k || m[i][k].is_zero() {
                continue;
            }
            let f = m[i][k].clone();
            for j in 0..n {
                if !m[k][j].is_zero() {
                    m[i][j] = &m[i][j] - &f * &m[k][j];
                }
                if !inv[k][j].is_zero() {
                    inv[i][j] = &inv[i][j] - &f * &inv[k][j];
                }
            }
        }
    }
    Some(inv)
}

/// Exact determinant over `Q(i)` by Gaussian elimination.
pub fn det_gauss_rat(a: &[Vec<GaussRat>]) -> GaussRat {
    let n = a.len();
    let mut m = a.to_vec();
    let mut det = GaussRat::one();
    for k in 0..n {
        let Some(p) = (k..n).find(|&i| !gauss_rat_is_zero(&m[i][k])) else {
            return GaussRat::zero();
        };
        if p != k {
            m.swap(p, k);
            det = -det;
        }
        det = &det * &m[k][k];
        let piv = gauss_rat_inv(&m[k][k]);
        for i in k + 1..n {
            if gauss_rat_is_zero(&m[i][k]) {
                continue;
            }
            let f = &m[i][k] * &piv;
            for j in k..n {
                let t = &f * &m[k][j];
                m[i][j] = &m[i][j] - t;
            }
        }
    }
    det
}

pub fn gauss_rat_to_f64(z: &GaussRat) -> Complex64 {
    Complex64::new(rational_to_f64(&z.re), rational_to_f64(&z.im))
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// Band storage of an `n x n` complex matrix with `kl` sub- and `ku` super-diagonals,
/// with room for `kl` extra super-diagonals of fill from row pivoting.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl BandMatrix {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix { n, kl, ku, width, data: vec![Complex64::new(0.0, 0.0); n * width] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry outside band");
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    /// In-place LU with partial pivoting; returns `(log|det|, phase of det)` or `None` if singular.
    pub fn log_det(mut self) -> Option<(f64, Complex64)> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut logabs = 0.0;
        let mut phase = Complex64::new(1.0, 0.0);
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].norm();
            for i in k + 1..=last {
                let v = self.data[self.idx(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return None;
            }
            let jmax = (k + ku + kl).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let (a, b) = (self.idx(k, j), self.idx(p, j));
                    self.data.swap(a, b);
                }
                phase = -phase;
            }
            let piv = self.data[self.idx(k, k)];
            logabs += piv.norm().ln();
            phase *= piv / piv.norm();
            let inv = piv.inv();
            for i in k + 1..=last {
                let ik = self.idx(i, k);
                let l = self.data[ik] * inv;
                if l == Complex64::new(0.0, 0.0) {
                    continue;
                }
                self.data[ik] = l;
                for j in k + 1..=jmax {
                    let kj = self.data[self.idx(k, j)];
                    let ij = self.idx(i, j);
                    self.data[ij] -= l * kj;
                }
            }
        }
        Some((logabs, phase))
    }

    /// Solve `A x = b` by banded LU with partial pivoting.
    pub fn solve(mut self, b: &[Complex64]) -> Option<Vec<Complex64>> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut x = b.to_vec();
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].norm();
            for i in k + 1..=last {
                let v = self.data[self.idx(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return None;
            }
            let jmax = (k + ku + kl).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let (a, c) = (self.idx(k, j), self.idx(p, j));
                    self.data.swap(a, c);
                }
                x.swap(k, p);
            }
            let inv = self.data[self.idx(k, k)].inv();
            for i in k + 1..=last {
                let ik = self.idx(i, k);
                let l = self.data[ik] * inv;
                self.data[ik] = l;
                for j in k + 1..=jmax {
                    let kj = self.data[self.idx(k, j)];
                    let ij = self.idx(i, j);
                    self.data[ij] -= l * kj;
                }
                let xk = x[k];
                x[i] -= l * xk;
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + ku + kl).min(n - 1);
            let mut s = x[k];
            for j in k + 1..=jmax {
                s -= self.data[self.idx(k, j)] * x[j];
            }
            x[k] = s / self.data[self.idx(k, k)];
        }
        Some(x)
    }
}

/// Conjugate gradients for a symmetric positive definite operator given as a closure.
/// Stops when `|r| <= tol * |b|`. Returns the solution and the iteration count.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x0: Option<Vec<f64>>,
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, usize) {
    let n = b.len();
    let mut x = x0.unwrap_or_else(|| vec![0.0; n]);
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let mut ap = vec![0.0; n];
    let mut it = 0;
    while it < max_iter && rr.sqrt() > tol * bnorm {
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
        it += 1;
    }
    (x, it)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gi(re: i64, im: i64) -> GaussInt {
        Complex::new(BigInt::from(re), BigInt::from(im))
    }

    #[test]
    fn bareiss_matches_cofactor_expansion() {
        let a = vec![
            vec![gi(1, 0), gi(0, 1), gi(2, -1)],
            vec![gi(0, -1), gi(3, 0), gi(1, 1)],
            vec![gi(2, 2), gi(-1, 0), gi(0, 0)],
        ];
        let cof = |a: &Vec<Vec<GaussInt>>| {
            &a[0][0] * (&a[1][1] * &a[2][2] - &a[1][2] * &a[2][1]) - &a[0][1] * (&a[1][0] * &a[2][2] - &a[1][2] * &a[2][0])
                + &a[0][2] * (&a[1][0] * &a[2][1] - &a[1][1] * &a[2][0])
        };
        assert_eq!(bareiss_det_gauss(a.clone()), cof(&a));
    }

    #[test]
    fn integer_bareiss() {
        let a: Vec<Vec<BigInt>> = [[2, -1, 0], [-1, 2, -1], [0, -1, 2]]
            .iter()
            .map(|r| r.iter().map(|&v| BigInt::from(v)).collect())
            .collect();
        assert_eq!(bareiss_det_int(a), BigInt::from(4));
    }

    #[test]
    fn band_log_det_matches_dense() {
        let n = 6;
        let mut b = BandMatrix::new(n, 1, 2);
        let mut dense = vec![vec![Complex64::new(0.0, 0.0); n]; n];
        for i in 0..n {
            for j in i.saturating_sub(1)..(i + 3).min(n) {
                let v = Complex64::new(((i * 7 + j * 3) % 5) as f64 - 2.0, ((i + 2 * j) % 3) as f64 - 1.0);
                b.set(i, j, v);
                dense[i][j] = v;
            }
        }
        let (ld, _) = b.clone().log_det().unwrap();
        let rhs: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let x = b.solve(&rhs).unwrap();
        for i in 0..n {
            let s: Complex64 = (0..n).map(|j| dense[i][j] * x[j]).sum();
            assert!((s - rhs[i]).norm() < 1e-10);
        }
        let exact: Vec<Vec<GaussRat>> = dense
            .iter()
            .map(|r| r.iter().map(|z| Complex::new(rat(z.re as i64), rat(z.im as i64))).collect())
            .collect();
        let d = gauss_rat_to_f64(&det_gauss_rat(&exact));
        assert!((d.norm().ln() - ld).abs() < 1e-12);
    }

    #[test]
    fn exact_inverse() {
        let a: Vec<Vec<GaussRat>> = vec![
            vec![Complex::new(rat(1), rat(0)), Complex::new(rat(0), rat(1))],
            vec![Complex::new(rat(0), rat(-1)), Complex::new(rat(2), rat(0))],
        ];
        let inv = invert_gauss_rat(&a).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let s: GaussRat = (0..2).map(|k| &a[i][k] * &inv[k][j]).fold(GaussRat::zero(), |x, y| x + y);
                assert_eq!(s, if i == j { GaussRat::one() } else { GaussRat::zero() });
            }
        }
    }

    #[test]
    fn cg_solves_tridiagonal() {
        let n = 50;
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                y[i] = 2.0 * x[i] - if i > 0 { x[i - 1] } else { 0.0 } - if i + 1 < n { x[i + 1] } else { 0.0 };
            }
        };
        let b = vec![1.0; n];
        let (x, _) = conjugate_gradient(apply, &b, None, 1e-12, 1000);
        let mut y = vec![0.0; n];
        apply(&x, &mut y);
        assert!(y.iter().zip(&b).all(|(a, b)| (a - b).abs() < 1e-9));
    }
}
