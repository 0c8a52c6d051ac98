//! Limiting coupling functions on model domains, their transport under
//! conformal maps, jets and Schwarzians, the `f_{p,q}` family, cut energies
//! and the two-hole coupling functions.

use std::f64::consts::PI;

use num_complex::Complex64 as C;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConformalError {
    #[error("pole at z = v = {0}")]
    PoleAt(C),
    #[error("point {0} lies on a branch cut")]
    BranchCutHit(C),
    #[error("point {0} is not in the domain")]
    NotInDomain(C),
    #[error("integration path passes through a singularity near {0}")]
    PathThroughSingularity(C),
    #[error("jet has b = 0; use the elbow family")]
    ZeroB,
    #[error("degenerate parameters: {0}")]
    DegenerateParameters(String),
    #[error("inverse map did not converge at {0}")]
    NoConvergence(C),
}

type Result<T> = std::result::Result<T, ConformalError>;

fn c(re: f64) -> C {
    C::new(re, 0.0)
}

/// The product `λ_{1,0} τ`, the only combination of the two that enters any formula.
pub const LAMBDA_TAU: f64 = (std::f64::consts::SQRT_2 - 1.0) * PI / std::f64::consts::SQRT_2;

/// `f(z) = z^2 + b z^3 + c z^4 + O(z^5)` with `b = i·b_im` and real `c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JetCoefficients {
    pub b_im: f64,
    pub c: f64,
}

impl JetCoefficients {
    pub fn new(b_im: f64, c: f64) -> Self {
        JetCoefficients { b_im, c }
    }

    pub fn b(&self) -> C {
        C::new(0.0, self.b_im)
    }

    /// Validate a complex jet: `Re b` and `Im c` must vanish to `tol` relative.
    pub fn from_complex(b: C, cc: C, tol: f64) -> Result<Self> {
        let scale = b.norm().max(cc.norm()).max(1.0);
        if b.re.abs() > tol * scale || cc.im.abs() > tol * scale {
            return Err(ConformalError::DegenerateParameters(format!("jet b={b}, c={cc} is not (imaginary, real)")));
        }
        Ok(JetCoefficients { b_im: b.im, c: cc.re })
    }
}

/// `S√f(0) = 3c − (9/4) b^2`.
pub fn schwarzian_sqrt(jet: JetCoefficients) -> f64 {
    3.0 * jet.c + 2.25 * jet.b_im * jet.b_im
}

/// Taylor coefficients `a_0..a_{n-1}` of an analytic `f` at 0 by the trapezoidal
/// rule on the circle of radius `r`.
pub fn taylor_coefficients(f: impl Fn(C) -> C, r: f64, n: usize) -> Vec<C> {
    let m = 128;
    let samples: Vec<C> = (0..m).map(|k| f(C::from_polar(r, 2.0 * PI * k as f64 / m as f64))).collect();
    (0..n)
        .map(|j| {
            let s: C = samples.iter().enumerate().map(|(k, &v)| v * C::from_polar(1.0, -2.0 * PI * (j * k) as f64 / m as f64)).sum();
            s / (m as f64 * r.powi(j as i32))
        })
        .collect()
}

/// Jet of a map normalized as `z^2 + ...`, read off numerically.
pub fn numeric_jet(f: impl Fn(C) -> C, r: f64) -> Result<JetCoefficients> {
    let a = taylor_coefficients(f, r, 5);
    if a[0].norm() > 1e-8 || a[1].norm() > 1e-8 || (a[2] - 1.0).norm() > 1e-8 {
        return Err(ConformalError::DegenerateParameters(format!("map is not z^2 + O(z^3): {:?}", &a[..3])));
    }
    JetCoefficients::from_complex(a[3], a[4], 1e-8)
}

/// Schwarzian of an analytic `g` at 0 from contour-integral derivatives.
pub fn schwarzian_numeric(g: impl Fn(C) -> C, r: f64) -> C {
    let a = taylor_coefficients(g, r, 4);
    let (d1, d2, d3) = (a[1], 2.0 * a[2], 6.0 * a[3]);
    d3 / d1 - 1.5 * (d2 / d1) * (d2 / d1)
}

/// `(p, q)` with `f_{p,q}` sharing the given 4-jet.
pub fn pq_from_jet(jet: JetCoefficients) -> Result<(C, C)> {
    if jet.b_im == 0.0 {
        return Err(ConformalError::ZeroB);
    }
    let b = jet.b();
    let b2 = b * b;
    let dp = 16.0 * jet.c - 27.0 * b2;
    let dq = 16.0 * jet.c + 9.0 * b2;
    if dp.norm() == 0.0 || dq.norm() == 0.0 {
        return Err(ConformalError::DegenerateParameters("a jet denominator vanishes".into()));
    }
    Ok((12.0 * b / dp, 12.0 * b / dq))
}

fn check_pq(p: C, q: C) -> Result<()> {
    let imag = |z: C| z.re.abs() <= 1e-12 * z.norm();
    if p.norm() == 0.0 || q.norm() == 0.0 || (p - q).norm() == 0.0 || !imag(p) || !imag(q) {
        return Err(ConformalError::DegenerateParameters(format!("p={p}, q={q} must be distinct nonzero imaginary numbers")));
    }
    Ok(())
}

/// `f_{p,q}(z) = 2 sqrt(q/p) ∫_0^z u sqrt((u-p)/(u-q)) du` through its antiderivative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FpqMap {
    pub p: C,
    pub q: C,
}

impl FpqMap {
    pub fn new(p: C, q: C) -> Result<Self> {
        check_pq(p, q)?;
        Ok(FpqMap { p, q })
    }

    fn kappa(&self) -> C {
        (-self.q).sqrt() / (-self.p).sqrt()
    }

    fn antiderivative(&self, z: C) -> C {
        let (p, q) = (self.p, self.q);
        let a = (z - p).sqrt();
        let b = (z - q).sqrt();
        a * b * (4.0 * z - 2.0 * p + 6.0 * q) - 2.0 * (p * p + 2.0 * p * q - 3.0 * q * q) * (a + b).ln()
    }

    pub fn eval(&self, z: C) -> C {
        self.kappa() / 4.0 * (self.antiderivative(z) - self.antiderivative(c(0.0)))
    }

    pub fn deriv(&self, z: C) -> C {
        2.0 * self.kappa() * z * (z - self.p).sqrt() / (z - self.q).sqrt()
    }

    pub fn second_deriv(&self, z: C) -> C {
        let a = (z - self.p).sqrt();
        let b = (z - self.q).sqrt();
        2.0 * self.kappa() * (a / b + z * (self.p - self.q) / (2.0 * a * b * b * b))
    }

    /// Closed-form 4-jet: `b = (1/q − 1/p)/3`, `c = (3/(4q^2) − 1/(2pq) − 1/(4p^2))/4`.
    pub fn jet(&self) -> JetCoefficients {
        let (p, q) = (self.p, self.q);
        let b = (1.0 / q - 1.0 / p) / 3.0;
        let cc = (3.0 / (4.0 * q * q) - 1.0 / (2.0 * p * q) - 1.0 / (4.0 * p * p)) / 4.0;
        JetCoefficients { b_im: b.im, c: cc.re }
    }

    /// Preimage of `w` in the right half-plane by damped Newton iteration from `sqrt(w)`.
    pub fn inverse(&self, w: C) -> Result<C> {
        newton_inverse(|z| self.eval(z), |z| self.deriv(z), w)
    }
}

fn newton_inverse(f: impl Fn(C) -> C, df: impl Fn(C) -> C, w: C) -> Result<C> {
    let mut z = w.sqrt();
    if z.norm() == 0.0 {
        return Ok(z);
    }
    for _ in 0..200 {
        let r = f(z) - w;
        if r.norm() <= 1e-14 * w.norm().max(1e-300) {
            return Ok(z);
        }
        let mut step = r / df(z);
        // Damp steps that leave the half-plane or increase the residual.
        let mut t = 1.0;
        for _ in 0..40 {
            let cand = z - step;
            if cand.re > 0.0 && (f(cand) - w).norm() < r.norm() {
                break;
            }
            t *= 0.5;
            step *= 0.5;
        }
        if t < 1e-12 {
            break;
        }
        z -= step;
    }
    let r = (f(z) - w).norm();
    if r <= 1e-10 * w.norm().max(1.0) {
        Ok(z)
    } else {
        Err(ConformalError::NoConvergence(w))
    }
}

/// Local map at the start of a cut on the interior of an edge:
/// `f_q(z) = sqrt(2q z^2 + q^2) − q`, from the right half-plane onto
/// `{Re w > −q}` slit along `[−q, 0]`.
pub fn elbow_edge(q: f64, z: C) -> C {
    (2.0 * q * z * z + q * q).sqrt() - q
}

/// Local map at the start of a cut from a concave corner:
/// `f_q(z) = 2 sqrt(−q) ((2/3)(z−q)^{3/2} + 2q (z−q)^{1/2}) + 8q^2/3`.
pub fn elbow_corner(q: C, z: C) -> C {
    let s = (z - q).sqrt();
    2.0 * (-q).sqrt() * (2.0 / 3.0 * s * s * s + 2.0 * q * s) + 8.0 * q * q / 3.0
}

fn elbow_corner_deriv(q: C, z: C) -> C {
    2.0 * (-q).sqrt() * z / (z - q).sqrt()
}

/// Model domains, each with base point at infinity except the unit disk (base point 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "domain", rename_all = "snake_case")]
pub enum ModelDomain {
    Plane,
    Rhp,
    SlitPlane,
    UnitDisk,
    Fpq { p: C, q: C },
    ElbowEdge { q: f64 },
    ElbowCorner { q: C },
}

impl ModelDomain {
    fn check_interior(&self, v: C) -> Result<()> {
        let ok = match *self {
            ModelDomain::Plane => true,
            ModelDomain::Rhp => v.re > 0.0,
            ModelDomain::SlitPlane => !(v.im == 0.0 && v.re <= 0.0),
            ModelDomain::UnitDisk => v.norm() < 1.0,
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(ConformalError::NotInDomain(v))
        }
    }

    /// Map `g` from the domain to the right half-plane (base point to infinity), with `g'` and `g''`.
    pub fn uniformizer(&self, w: C) -> Result<(C, C, C)> {
        Ok(match *self {
            ModelDomain::Plane => return Err(ConformalError::DegenerateParameters("the plane is not conformal to the half-plane".into())),
            ModelDomain::Rhp => (w, c(1.0), c(0.0)),
            ModelDomain::SlitPlane => {
                let s = w.sqrt();
                (s, 0.5 / s, -0.25 / (s * w))
            }
            ModelDomain::UnitDisk => {
                let d = 1.0 - w;
                ((1.0 + w) / d, 2.0 / (d * d), 4.0 / (d * d * d))
            }
            ModelDomain::Fpq { p, q } => {
                let m = FpqMap::new(p, q)?;
                let z = m.inverse(w)?;
                let (d1, d2) = (m.deriv(z), m.second_deriv(z));
                (z, 1.0 / d1, -d2 / (d1 * d1 * d1))
            }
            ModelDomain::ElbowEdge { q } => {
                let z = (w * (w + 2.0 * q) / (2.0 * q)).sqrt();
                let d1 = 2.0 * q * z / (2.0 * q * z * z + q * q).sqrt();
                let d2 = 2.0 * q * q * q / (2.0 * q * z * z + q * q).powf(1.5);
                (z, 1.0 / d1, -d2 / (d1 * d1 * d1))
            }
            ModelDomain::ElbowCorner { q } => {
                let z = newton_inverse(|z| elbow_corner(q, z), |z| elbow_corner_deriv(q, z), w)?;
                let s = (z - q).sqrt();
                let d1 = elbow_corner_deriv(q, z);
                let d2 = 2.0 * (-q).sqrt() * (1.0 / s - z / (2.0 * s * s * s));
                (z, 1.0 / d1, -d2 / (d1 * d1 * d1))
            }
        })
    }
}

/// `(F_+(v, z), F_-(v, z))` on a model domain.
pub fn coupling_limits(domain: &ModelDomain, v: C, z: C) -> Result<(C, C)> {
    if (z - v).norm() == 0.0 {
        return Err(ConformalError::PoleAt(z));
    }
    limits_unchecked(domain, v, z)
}

/// Both limits without the diagonal check; `F_+` is infinite at `z = v` while `F_-` stays finite.
fn limits_unchecked(domain: &ModelDomain, v: C, z: C) -> Result<(C, C)> {
    domain.check_interior(v)?;
    let vb = v.conj();
    Ok(match *domain {
        ModelDomain::Plane => (2.0 / (PI * (z - v)), c(0.0)),
        ModelDomain::Rhp => (2.0 / (PI * (z - v)), -2.0 / (PI * (z + vb))),
        ModelDomain::SlitPlane => {
            if z.im == 0.0 && z.re <= 0.0 {
                return Err(ConformalError::BranchCutHit(z));
            }
            let (sv, sz, svb) = (v.sqrt(), z.sqrt(), vb.sqrt());
            (1.0 / (PI * sv * (sz - sv)), -1.0 / (PI * svb * (sz + svb)))
        }
        ModelDomain::UnitDisk => {
            ((2.0 * (1.0 - z)) / (PI * (1.0 - v) * (z - v)), -(2.0 * (1.0 - z)) / (PI * (1.0 - vb) * (1.0 - z * vb)))
        }
        _ => transport_from_rhp(domain, v, z)?,
    })
}

pub fn f_plus(domain: &ModelDomain, v: C, z: C) -> Result<C> {
    Ok(coupling_limits(domain, v, z)?.0)
}

pub fn f_minus(domain: &ModelDomain, v: C, z: C) -> Result<C> {
    Ok(limits_unchecked(domain, v, z)?.1)
}

fn transport_from_rhp(domain: &ModelDomain, v: C, z: C) -> Result<(C, C)> {
    let (gv, dgv, _) = domain.uniformizer(v)?;
    let (gz, _, _) = domain.uniformizer(z)?;
    Ok((dgv * 2.0 / (PI * (gz - gv)), dgv.conj() * -2.0 / (PI * (gz + gv.conj()))))
}

/// `F^V_+(v,z) = f'(v) F^U_+(f(v), f(z))`, `F^V_-(v,z) = conj(f'(v)) F^U_-(f(v), f(z))`
/// for a conformal `f: V → U` with derivative `df`.
pub fn transport(
    f: impl Fn(C) -> C,
    df: impl Fn(C) -> C,
    forms_on_u: impl Fn(C, C) -> Result<(C, C)>,
    v: C,
    z: C,
) -> Result<(C, C)> {
    let d = df(v);
    let (fp, fm) = forms_on_u(f(v), f(z))?;
    Ok((d * fp, d.conj() * fm))
}

/// Diagonal limit `F_+^*(u) = lim_{z→u} F_+(u,z) − 2/(π(z−u))`.
pub fn f_plus_star(domain: &ModelDomain, u: C) -> Result<C> {
    Ok(match *domain {
        ModelDomain::Plane | ModelDomain::Rhp => c(0.0),
        ModelDomain::UnitDisk => -2.0 / (PI * (1.0 - u)),
        ModelDomain::SlitPlane => 1.0 / (2.0 * PI * u),
        _ => {
            let (_, d1, d2) = domain.uniformizer(u)?;
            -d2 / (PI * d1)
        }
    })
}

fn singular_points(domain: &ModelDomain) -> Vec<C> {
    match *domain {
        ModelDomain::UnitDisk => vec![c(1.0)],
        ModelDomain::SlitPlane => vec![c(0.0)],
        ModelDomain::Fpq { p, q } => vec![c(0.0), p, q],
        ModelDomain::ElbowEdge { q } => vec![c(0.0), c(-q)],
        ModelDomain::ElbowCorner { q } => vec![c(0.0), elbow_corner(q, q)],
        _ => vec![],
    }
}

fn segment_distance(a: C, b: C, p: C) -> f64 {
    let d = b - a;
    let t = if d.norm_sqr() == 0.0 { 0.0 } else { (((p - a) * d.conj()).re / d.norm_sqr()).clamp(0.0, 1.0) };
    (a + d * t - p).norm()
}

const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// `h(v) − h(path[0]) = 2 Im ∫ F_+^*(u) du` along a polyline.
pub fn limiting_height(domain: &ModelDomain, path: &[C]) -> Result<f64> {
    let sing = singular_points(domain);
    let mut total = c(0.0);
    for w in path.windows(2) {
        let (a, b) = (w[0], w[1]);
        for &s in &sing {
            if segment_distance(a, b, s) < 1e-9 {
                return Err(ConformalError::PathThroughSingularity(s));
            }
        }
        if *domain == ModelDomain::SlitPlane && crosses_negative_axis(a, b) {
            return Err(ConformalError::PathThroughSingularity(c(0.0)));
        }
        let pieces = 400;
        for k in 0..pieces {
            let (s0, s1) = (k as f64 / pieces as f64, (k + 1) as f64 / pieces as f64);
            let (mid, half) = ((s0 + s1) / 2.0, (s1 - s0) / 2.0);
            for &(x, wt) in &GL5 {
                let u = a + (b - a) * (mid + half * x);
                let val = f_plus_star(domain, u)?;
                if !val.re.is_finite() || !val.im.is_finite() {
                    return Err(ConformalError::PathThroughSingularity(u));
                }
                total += val * (b - a) * (half * wt);
            }
        }
    }
    Ok(2.0 * total.im)
}

fn crosses_negative_axis(a: C, b: C) -> bool {
    if (a.im > 0.0) == (b.im > 0.0) && a.im != 0.0 && b.im != 0.0 {
        return false;
    }
    if a.im == b.im {
        return a.im == 0.0 && (a.re <= 0.0 || b.re <= 0.0);
    }
    let t = a.im / (a.im - b.im);
    (a.re + t * (b.re - a.re)) <= 0.0
}

/// Schwarzian of `√f_{p,q}` at 0 in closed form: `(5p+7q)(p−q)/(16 p^2 q^2)`.
pub fn fpq_schwarzian(p: C, q: C) -> f64 {
    ((5.0 * p + 7.0 * q) * (p - q) / (16.0 * p * p * q * q)).re
}

/// `E_δ = (20/(3π)) log δ + (1/(3π)) log(9 |p|^11 / (4^8 |q|^19 |p−q|^8))`.
pub fn fpq_energy_delta(p: C, q: C, delta: f64) -> Result<f64> {
    check_pq(p, q)?;
    if !(delta > 0.0) {
        return Err(ConformalError::DegenerateParameters(format!("delta = {delta}")));
    }
    let l = 9f64.ln() + 11.0 * p.norm().ln() - 8.0 * 4f64.ln() - 19.0 * q.norm().ln() - 8.0 * (p - q).norm().ln();
    Ok(20.0 / (3.0 * PI) * delta.ln() + l / (3.0 * PI))
}

/// Energy change per unit cut length along the flow that extends the cut:
/// `f(p) − f(q)` fixed and `f(p)` moving by `−2` per unit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlowCheck {
    pub rate: f64,
    pub predicted_rate: f64,
    pub schwarzian: f64,
}

pub fn fpq_flow_rate(p: C, q: C) -> Result<FlowCheck> {
    check_pq(p, q)?;
    let (s, t) = (p.im, q.im);
    let h = 1e-6 * s.abs().max(t.abs());
    let vals = |s: f64, t: f64| -> Result<(f64, f64)> {
        let m = FpqMap::new(C::new(0.0, s), C::new(0.0, t))?;
        let (a, b) = (m.eval(m.p), m.eval(m.q));
        Ok((a.re, (a - b).re))
    };
    let energy = |s: f64, t: f64| fpq_energy_delta(C::new(0.0, s), C::new(0.0, t), 1.0);
    let (sp, sm, tp, tm) = (vals(s + h, t)?, vals(s - h, t)?, vals(s, t + h)?, vals(s, t - h)?);
    let (a, b) = ((sp.0 - sm.0) / (2.0 * h), (tp.0 - tm.0) / (2.0 * h));
    let (cc, d) = ((sp.1 - sm.1) / (2.0 * h), (tp.1 - tm.1) / (2.0 * h));
    let det = a * d - b * cc;
    if det.abs() < 1e-300 {
        return Err(ConformalError::DegenerateParameters("flow constraints are singular".into()));
    }
    let (ds, dt) = (-2.0 * d / det, 2.0 * cc / det);
    let es = (energy(s + h, t)? - energy(s - h, t)?) / (2.0 * h);
    let et = (energy(s, t + h)? - energy(s, t - h)?) / (2.0 * h);
    let predicted = ((5.0 * p + 7.0 * q) * (p - q) / (2.0 * PI * p * p * q * q)).re;
    Ok(FlowCheck { rate: es * ds + et * dt, predicted_rate: predicted, schwarzian: fpq_schwarzian(p, q) })
}

/// Where a cut starts or ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutKind {
    EdgeStart,
    CornerStart,
    EdgeEnd,
    CornerEnd,
}

impl CutKind {
    pub const ALL: [CutKind; 4] = [CutKind::EdgeStart, CutKind::CornerStart, CutKind::EdgeEnd, CutKind::CornerEnd];

    /// Coefficient `a` of `(a/π) log(1/δ)` in the local energy.
    pub fn coefficient(self) -> Ratio<i64> {
        match self {
            CutKind::EdgeStart => Ratio::from_integer(6),
            CutKind::CornerStart => Ratio::new(10, 3),
            CutKind::EdgeEnd => Ratio::from_integer(18),
            CutKind::CornerEnd => Ratio::new(46, 3),
        }
    }

    /// Constant `C` in the per-step log-probability `C/j`, i.e. `−a/48`.
    pub fn log_probability_constant(self) -> Ratio<i64> {
        -self.coefficient() / 48
    }

    /// Whether the additive constant of the local energy is known in closed form.
    pub fn constant_known(self) -> bool {
        self == CutKind::EdgeStart
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CutEnergy {
    pub value: f64,
    pub constant_known: bool,
}

/// Local energy due to one end of a cut after `j` steps (start kinds) or with `j`
/// steps remaining (end kinds): `(a/π)(log(1/δ) + log(εj)) + const`. For an edge
/// start the cut length is `q = 2εj` and the constant is `(2/π) log 2`; the other
/// constants are unknown and set to zero.
pub fn cut_boundary_energies(kind: CutKind, j: u32, eps: f64, delta: f64) -> CutEnergy {
    let a = *kind.coefficient().numer() as f64 / *kind.coefficient().denom() as f64 / PI;
    let j = j as f64;
    let value = match kind {
        CutKind::EdgeStart => a * (1.0 / delta).ln() + a * (2.0 * eps * j).ln() + 2.0 / PI * 2f64.ln(),
        _ => a * (1.0 / delta).ln() + a * (eps * j).ln(),
    };
    CutEnergy { value, constant_known: kind.constant_known() }
}

/// Energy change per step from the Schwarzian of the local map: `−(8ε/π) S√f(0)`.
pub fn schwarzian_step(eps: f64, s: f64) -> f64 {
    -8.0 * eps / PI * s
}

/// Schwarzian of the edge elbow map for a cut of length `2εj`: `3c` with `c = −1/(2q)`.
pub fn elbow_edge_schwarzian(eps: f64, j: u32) -> f64 {
    let q = 2.0 * eps * j as f64;
    schwarzian_sqrt(JetCoefficients::new(0.0, -1.0 / (2.0 * q)))
}

/// Corner elbow parameter with `f_q(q) = 8q^2/3 = −2εj`.
pub fn elbow_corner_q(eps: f64, j: u32) -> C {
    C::new(0.0, (0.75 * eps * j as f64).sqrt())
}

/// Schwarzian of the corner elbow map: jet `b = 1/(3q)`, `c = 3/(16q^2)`.
pub fn elbow_corner_schwarzian(eps: f64, j: u32) -> f64 {
    let q = elbow_corner_q(eps, j);
    let b = 1.0 / (3.0 * q);
    let cc = 3.0 / (16.0 * q * q);
    schwarzian_sqrt(JetCoefficients::new(b.im, cc.re))
}

/// Placement of the branch cut that starts at the white hole.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchCut {
    /// Cut from the hole to the boundary point facing it: `(−1, 0]` in the disk, `(0, 1]` in the half-plane.
    #[default]
    Interior,
    /// Cut from the hole to the opposite boundary point: `[0, 1)` in the disk, `[1, ∞)` in the half-plane.
    Exterior,
}

/// Two-hole configurations: a white hole with the coupling branched over it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "domain", rename_all = "snake_case")]
pub enum TwoHoleSpec {
    /// Unit disk with the hole at the origin and boundary zeros `b0`, `b1`.
    Disk {
        b0: C,
        b1: C,
        #[serde(default)]
        cut: BranchCut,
    },
    /// Right half-plane with the hole at 1 and boundary zeros `b5` and `b6` (`None` for infinity).
    Rhp {
        b5: C,
        b6: Option<C>,
        #[serde(default)]
        cut: BranchCut,
    },
}

impl TwoHoleSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            TwoHoleSpec::Disk { b0, b1, .. } => (b0.norm() - 1.0).abs() < 1e-12 && (b1.norm() - 1.0).abs() < 1e-12,
            TwoHoleSpec::Rhp { b5, b6, .. } => b5.re.abs() < 1e-12 && b6.is_none_or(|b| b.re.abs() < 1e-12),
        };
        if ok {
            Ok(())
        } else {
            Err(ConformalError::DegenerateParameters(format!("zeros of {self:?} are not on the boundary")))
        }
    }

    pub fn cut(&self) -> BranchCut {
        match *self {
            TwoHoleSpec::Disk { cut, .. } | TwoHoleSpec::Rhp { cut, .. } => cut,
        }
    }

    /// Whether `z` lies on the branch cut.
    pub fn on_cut(&self, z: C) -> bool {
        if z.im != 0.0 {
            return false;
        }
        match (*self, self.cut()) {
            (TwoHoleSpec::Disk { .. }, BranchCut::Interior) => z.re <= 0.0,
            (TwoHoleSpec::Disk { .. }, BranchCut::Exterior) => z.re >= 0.0,
            (TwoHoleSpec::Rhp { .. }, BranchCut::Interior) => z.re > 0.0 && z.re <= 1.0,
            (TwoHoleSpec::Rhp { .. }, BranchCut::Exterior) => z.re >= 1.0,
        }
    }
}

/// `sqrt(z)` in the disk, up to a global sign fixed by the cut.
fn disk_root(z: C, cut: BranchCut) -> C {
    match cut {
        BranchCut::Interior => z.sqrt(),
        BranchCut::Exterior => (-z).sqrt(),
    }
}

/// `sqrt(z^2 − 1)` on the half-plane, up to a global sign fixed by the cut.
fn rhp_root(z: C, cut: BranchCut) -> C {
    match cut {
        BranchCut::Interior => (z - 1.0).sqrt() * (z + 1.0).sqrt(),
        BranchCut::Exterior => (1.0 - z).sqrt() * (1.0 + z).sqrt(),
    }
}

/// `(F_+, F_-)` with a white hole. The disk `F_-` carries the sign that makes it the
/// transport of the half-plane form under `(z−1)/(z+1)` for either cut placement.
/// On the boundary `F_0` is real for an interior cut and imaginary for an exterior one.
pub fn two_hole_coupling(spec: &TwoHoleSpec, v: C, z: C) -> Result<(C, C)> {
    spec.validate()?;
    if (z - v).norm() == 0.0 {
        return Err(ConformalError::PoleAt(z));
    }
    if spec.on_cut(z) {
        return Err(ConformalError::BranchCutHit(z));
    }
    let vb = v.conj();
    match *spec {
        TwoHoleSpec::Disk { b0, b1, cut } => {
            if v.norm() >= 1.0 {
                return Err(ConformalError::NotInDomain(v));
            }
            let rz = disk_root(z, cut);
            let num = 2.0 * (z - b0) * (z - b1);
            let fp = num / (PI * (z - v) * (v - b0) * (v - b1)) * disk_root(v, cut) / rz;
            let fm = num / (PI * (1.0 - z * vb) * (vb * b0 - 1.0) * (vb * b1 - 1.0)) * disk_root(vb, cut) / rz;
            Ok((fp, fm))
        }
        TwoHoleSpec::Rhp { b5, b6, cut } => {
            if v.re <= 0.0 {
                return Err(ConformalError::NotInDomain(v));
            }
            let rz = rhp_root(z, cut);
            let (rv, rvb) = (rhp_root(v, cut), rhp_root(vb, cut));
            match b6 {
                Some(b6) => {
                    let num = 2.0 * (z - b5) * (z - b6);
                    let fp = num / (PI * (z - v) * (v - b5) * (v - b6)) * rv / rz;
                    let fm = num / (PI * (z + vb) * (vb + b5) * (vb + b6)) * rvb / rz;
                    Ok((fp, fm))
                }
                None => {
                    let fp = 2.0 * (z - b5) / (PI * (z - v) * (v - b5)) * rv / rz;
                    let fm = -2.0 * (z - b5) / (PI * (z + vb) * (vb + b5)) * rvb / rz;
                    Ok((fp, fm))
                }
            }
        }
    }
}

/// `F_0 = (F_+ + F_-)/2`, `F_1 = (F_+ − F_-)/2`.
pub fn f0_f1(fp: C, fm: C) -> (C, C) {
    ((fp + fm) / 2.0, (fp - fm) / 2.0)
}

/// `ε F_0(ε, 2ε)` on the half-plane with the white hole at `α` and a cut of length `t`
/// from the boundary along the real axis, translated so the tip is at 0. The cut from
/// the hole runs away from the slit, so the evaluation points avoid it.
pub fn cut_coupling(alpha: f64, beta: f64, t: f64, eps: f64) -> Result<C> {
    let map = |z: C| (z * (z + 2.0 * t)).sqrt() / (alpha * alpha - t * t).sqrt();
    let dmap = |z: C| (z + t) / ((z * (z + 2.0 * t)).sqrt() * (alpha * alpha - t * t).sqrt());
    // Boundary value of the map at the black hole, taken from inside the domain.
    let b5 = C::new(0.0, beta.signum() * (t * t + beta * beta).sqrt() / (alpha * alpha - t * t).sqrt());
    let spec = TwoHoleSpec::Rhp { b5, b6: None, cut: BranchCut::Exterior };
    let (fp, fm) = transport(map, dmap, |a, b| two_hole_coupling(&spec, a, b), c(eps), c(2.0 * eps))?;
    Ok(eps * f0_f1(fp, fm).0)
}

/// Leading expansion of [`cut_coupling`]: `√2/π + √2(5t^2 − α^2)ε/(4π t(α^2 − t^2))`.
pub fn cut_coupling_expansion(alpha: f64, t: f64, eps: f64) -> f64 {
    let r2 = std::f64::consts::SQRT_2;
    r2 / PI + r2 * (5.0 * t * t - alpha * alpha) * eps / (4.0 * PI * t * (alpha * alpha - t * t))
}

/// Predicted log-ratio `−(3/4) log(1/ε) + (1/4) log α − (1/2) log(α^2 + β^2)`, up to terms independent of `α, β`.
pub fn lerw_ratio_law(alpha: f64, beta: f64, eps: f64) -> f64 {
    -0.75 * (1.0 / eps).ln() + 0.25 * alpha.ln() - 0.5 * (alpha * alpha + beta * beta).ln()
}

/// Probability form `(ε/r)^{3/4} cos(θ)^{1/4}`.
pub fn lerw_probability_form(eps: f64, r: f64, theta: f64) -> f64 {
    (eps / r).powf(0.75) * theta.cos().max(0.0).powf(0.25)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: C, b: C, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1.0)
    }

    fn rand_rhp(rng: &mut ChaCha8Rng) -> C {
        C::new(rng.gen_range(0.1..3.0), rng.gen_range(-3.0..3.0))
    }

    #[test]
    fn closed_forms() {
        let pl = coupling_limits(&ModelDomain::Plane, c(0.0), c(1.0)).unwrap();
        assert!(close(pl.0, c(2.0 / PI), 1e-15) && pl.1 == c(0.0));
        assert!(close(f_minus(&ModelDomain::Rhp, c(1.0), c(1.0)).unwrap(), c(-1.0 / PI), 1e-15));
        assert!(matches!(f_plus(&ModelDomain::Rhp, c(1.0), c(1.0)), Err(ConformalError::PoleAt(_))));
        assert!(close(f_plus(&ModelDomain::SlitPlane, c(1.0), c(4.0)).unwrap(), c(1.0 / PI), 1e-15));
        assert!(matches!(f_plus(&ModelDomain::SlitPlane, c(1.0), c(-2.0)), Err(ConformalError::BranchCutHit(_))));
    }

    #[test]
    fn transport_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rhp = |a, b| coupling_limits(&ModelDomain::Rhp, a, b);
        for _ in 0..10 {
            let v = C::from_polar(rng.gen_range(0.0..0.9), rng.gen_range(-3.0..3.0));
            let z = C::from_polar(rng.gen_range(0.0..0.9), rng.gen_range(-3.0..3.0));
            let t = transport(|w| (1.0 + w) / (1.0 - w), |w| 2.0 / ((1.0 - w) * (1.0 - w)), rhp, v, z).unwrap();
            let d = coupling_limits(&ModelDomain::UnitDisk, v, z).unwrap();
            assert!(close(t.0, d.0, 1e-12) && close(t.1, d.1, 1e-12));
            let id = transport(|w| w, |_| c(1.0), |a, b| coupling_limits(&ModelDomain::UnitDisk, a, b), v, z).unwrap();
            assert_eq!(id, d);

            let (v, z) = (C::new(rng.gen_range(-3.0..3.0), rng.gen_range(0.1..3.0)), C::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..-0.1)));
            let t = transport(|w| w.sqrt(), |w| 0.5 / w.sqrt(), rhp, v, z).unwrap();
            let s = coupling_limits(&ModelDomain::SlitPlane, v, z).unwrap();
            assert!(close(t.0, s.0, 1e-12) && close(t.1, s.1, 1e-12));
        }
    }

    #[test]
    fn transport_through_fpq() {
        let m = FpqMap::new(C::new(0.0, 2.0), C::new(0.0, -0.7)).unwrap();
        let dom = ModelDomain::Fpq { p: m.p, q: m.q };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let (a, b) = (C::new(rng.gen_range(0.2..1.0), rng.gen_range(-0.5..0.5)), C::new(rng.gen_range(0.2..1.0), rng.gen_range(-0.5..0.5)));
            let direct = coupling_limits(&ModelDomain::Rhp, a, b).unwrap();
            let (v, z) = (m.eval(a), m.eval(b));
            let d = m.deriv(a);
            let on_u = coupling_limits(&dom, v, z).unwrap();
            assert!(close(on_u.0 * d, direct.0, 1e-9), "{on_u:?} {direct:?}");
            assert!(close(on_u.1 * d.conj(), direct.1, 1e-9));
        }
    }

    #[test]
    fn holomorphy_cauchy_riemann() {
        let (v, z) = (C::new(0.3, 0.2), C::new(-0.4, 0.1));
        let mut prev = f64::INFINITY;
        for h in [1e-2, 1e-3, 1e-4] {
            let f = |z: C| f_plus(&ModelDomain::UnitDisk, v, z).unwrap();
            let dx = (f(z + h) - f(z - h)) / (2.0 * h);
            let dy = (f(z + C::new(0.0, h)) - f(z - C::new(0.0, h))) / (2.0 * h);
            let r = (dx * C::new(0.0, 1.0) - dy).norm();
            assert!(r < prev);
            prev = r;
        }
        assert!(prev < 1e-6);
    }

    #[test]
    fn limiting_heights() {
        let path = [C::new(0.5, 0.0), C::new(0.5, 1.0), C::new(2.0, 1.0)];
        assert_eq!(limiting_height(&ModelDomain::Rhp, &path).unwrap(), 0.0);
        assert_eq!(limiting_height(&ModelDomain::Plane, &path).unwrap(), 0.0);

        let (v0, v) = (C::new(0.0, -0.5), C::new(0.2, 0.6));
        let a = limiting_height(&ModelDomain::UnitDisk, &[v0, v]).unwrap();
        let b = limiting_height(&ModelDomain::UnitDisk, &[v0, C::new(-0.6, 0.0), C::new(-0.3, 0.6), v]).unwrap();
        assert!((a - b).abs() < 1e-10);
        let exact = -4.0 / PI * ((1.0 - v0).ln() - (1.0 - v).ln()).im;
        assert!((a - exact).abs() < 1e-10);
        assert!(matches!(
            limiting_height(&ModelDomain::UnitDisk, &[C::new(0.5, 0.0), C::new(1.0, 0.0)]),
            Err(ConformalError::PathThroughSingularity(_))
        ));
    }

    #[test]
    fn schwarzian_examples() {
        assert_eq!(schwarzian_sqrt(JetCoefficients::new(0.0, 0.0)), 0.0);
        assert_eq!(schwarzian_sqrt(JetCoefficients::new(1.0, 1.0)), 5.25);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let j = JetCoefficients::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let g = |z: C| z * (1.0 + j.b() * z + j.c * z * z).sqrt();
            let s = schwarzian_numeric(g, 0.05);
            assert!((s - schwarzian_sqrt(j)).norm() < 1e-6, "{s} vs {}", schwarzian_sqrt(j));
        }
    }

    #[test]
    fn jets_and_pq() {
        let (p, q) = pq_from_jet(JetCoefficients::new(1.0, 1.0)).unwrap();
        assert!(close(p, C::new(0.0, 12.0 / 43.0), 1e-15) && close(q, C::new(0.0, 12.0 / 7.0), 1e-15));
        let m = FpqMap::new(C::new(0.0, 2.0), C::new(0.0, 1.0)).unwrap();
        let (p, q) = pq_from_jet(m.jet()).unwrap();
        assert!(close(p, m.p, 1e-12) && close(q, m.q, 1e-12));
        assert_eq!(pq_from_jet(JetCoefficients::new(0.0, 1.0)), Err(ConformalError::ZeroB));

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let (s, t) = (rng.gen_range(0.5..3.0), -rng.gen_range(0.3..2.0));
            let m = FpqMap::new(C::new(0.0, s), C::new(0.0, t)).unwrap();
            let nj = numeric_jet(|z| m.eval(z), 0.1 * s.abs().min(t.abs())).unwrap();
            assert!((nj.b_im - m.jet().b_im).abs() < 1e-8 && (nj.c - m.jet().c).abs() < 1e-8);
            let z = rand_rhp(&mut rng);
            let h = 1e-5;
            assert!(close((m.eval(z + h) - m.eval(z - h)) / (2.0 * h), m.deriv(z), 1e-7));
            assert!(close((m.deriv(z + h) - m.deriv(z - h)) / (2.0 * h), m.second_deriv(z), 1e-6));
            let w = m.eval(C::new(0.3, 0.1));
            assert!(close(m.inverse(w).unwrap(), C::new(0.3, 0.1), 1e-9));
        }
    }

    #[test]
    fn fpq_energy_flow() {
        let (p, q) = (C::new(0.0, 2.0), C::new(0.0, -0.5));
        let e1 = fpq_energy_delta(p, q, 0.1).unwrap();
        let e2 = fpq_energy_delta(p, q, 0.05).unwrap();
        assert!((e2 - e1 - 20.0 / (3.0 * PI) * 0.5f64.ln()).abs() < 1e-13);
        assert!(fpq_energy_delta(p, p, 0.1).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let (s, t) = (rng.gen_range(1.0..3.0), -rng.gen_range(0.2..0.9));
            let (p, q) = (C::new(0.0, s), C::new(0.0, t));
            let f = fpq_flow_rate(p, q).unwrap();
            assert!((f.rate - f.predicted_rate).abs() < 1e-4 * f.predicted_rate.abs());
            assert!((PI / 8.0 * f.rate - f.schwarzian).abs() < 1e-4 * f.schwarzian.abs());
            let jet_s = schwarzian_sqrt(FpqMap::new(p, q).unwrap().jet());
            assert!((jet_s - f.schwarzian).abs() < 1e-10 * f.schwarzian.abs().max(1.0));
        }
    }

    #[test]
    fn cut_energies() {
        let (eps, delta) = (1e-3, 1e-4);
        for kind in CutKind::ALL {
            let a = *kind.coefficient().numer() as f64 / *kind.coefficient().denom() as f64;
            for j in [100u32, 1000, 10000] {
                let d = cut_boundary_energies(kind, j + 1, eps, delta).value - cut_boundary_energies(kind, j, eps, delta).value;
                let expected = a / (PI * j as f64);
                assert!((d - expected).abs() < expected / j as f64);
            }
        }
        let consts: Vec<Ratio<i64>> = CutKind::ALL.iter().map(|k| k.log_probability_constant()).collect();
        assert_eq!(consts, vec![Ratio::new(-1, 8), Ratio::new(-5, 72), Ratio::new(-3, 8), Ratio::new(-23, 72)]);

        // Both start regimes from the Schwarzian of the explicit local maps.
        for j in [3u32, 10, 40] {
            let q = 2.0 * eps * j as f64;
            let nj = numeric_jet(|z| elbow_edge(q, z), 0.2 * (q / 2.0).sqrt()).unwrap();
            let step = schwarzian_step(eps, schwarzian_sqrt(nj));
            assert!((step - 6.0 / (PI * j as f64)).abs() < 1e-8 * step);
            assert!((schwarzian_step(eps, elbow_edge_schwarzian(eps, j)) - 6.0 / (PI * j as f64)).abs() < 1e-12);

            let qc = elbow_corner_q(eps, j);
            let nj = numeric_jet(|z| elbow_corner(qc, z), 0.2 * qc.norm()).unwrap();
            let step = schwarzian_step(eps, schwarzian_sqrt(nj));
            assert!((step - 10.0 / (3.0 * PI * j as f64)).abs() < 1e-8 * step);
            assert!((schwarzian_step(eps, elbow_corner_schwarzian(eps, j)) - 10.0 / (3.0 * PI * j as f64)).abs() < 1e-12);
            assert!((elbow_corner(qc, qc) - c(-2.0 * eps * j as f64)).norm() < 1e-14);
        }
    }

    /// Boundary component of `F_0` that vanishes for each cut placement.
    fn boundary_residual(cut: BranchCut, f0: C) -> f64 {
        match cut {
            BranchCut::Interior => f0.im.abs(),
            BranchCut::Exterior => f0.re.abs(),
        }
    }

    #[test]
    fn two_hole_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = 1e-7;
        for cut in [BranchCut::Interior, BranchCut::Exterior] {
            let (b0, b1) = (C::from_polar(1.0, 0.7), C::from_polar(1.0, 2.9));
            let disk = TwoHoleSpec::Disk { b0, b1, cut };
            let v = C::new(0.3, 0.2);
            let (fp, _) = two_hole_coupling(&disk, v, v + h).unwrap();
            assert!((fp * h - 2.0 / PI).norm() < 1e-6);
            for _ in 0..10 {
                let z = C::from_polar(1.0, rng.gen_range(-3.1..3.1));
                let (fp, fm) = two_hole_coupling(&disk, v, z).unwrap();
                assert!(boundary_residual(cut, f0_f1(fp, fm).0) < 1e-10, "{cut:?} {z}");
            }
            assert!(two_hole_coupling(&disk, v, b0).unwrap().0.norm() < 1e-15);
            assert!(two_hole_coupling(&disk, v, b1).unwrap().0.norm() < 1e-15);
            let on_cut = if cut == BranchCut::Interior { c(-0.5) } else { c(0.5) };
            assert!(matches!(two_hole_coupling(&disk, v, on_cut), Err(ConformalError::BranchCutHit(_))));

            let rhp = TwoHoleSpec::Rhp { b5: C::new(0.0, 0.7), b6: None, cut };
            let v = C::new(0.8, 0.3);
            for _ in 0..10 {
                let z = C::new(0.0, rng.gen_range(-4.0..4.0));
                let (fp, fm) = two_hole_coupling(&rhp, v, z).unwrap();
                assert!(boundary_residual(cut, f0_f1(fp, fm).0) < 1e-10, "{cut:?} {z}");
            }
            let (fp, _) = two_hole_coupling(&rhp, v, v + h).unwrap();
            assert!((fp * h - 2.0 / PI).norm() < 1e-6);
            let on_cut = if cut == BranchCut::Interior { c(0.5) } else { c(1.5) };
            assert!(matches!(two_hole_coupling(&rhp, v, on_cut), Err(ConformalError::BranchCutHit(_))));
        }
    }

    #[test]
    fn disk_and_half_plane_agree() {
        let (b5, b6) = (C::new(0.0, 0.5), C::new(0.0, -2.0));
        let m = |z: C| (z - 1.0) / (z + 1.0);
        let dm = |z: C| 2.0 / ((z + 1.0) * (z + 1.0));
        for cut in [BranchCut::Interior, BranchCut::Exterior] {
            let disk = TwoHoleSpec::Disk { b0: m(b5), b1: m(b6), cut };
            let rhp = TwoHoleSpec::Rhp { b5, b6: Some(b6), cut };
            for (v, z) in [(C::new(0.8, 0.3), C::new(2.0, 1.0)), (C::new(1.5, -0.4), C::new(0.3, 0.2)), (C::new(0.4, 1.2), C::new(3.0, -2.0))] {
                let t = transport(m, dm, |a, b| two_hole_coupling(&disk, a, b), v, z).unwrap();
                let r = two_hole_coupling(&rhp, v, z).unwrap();
                assert!(close(t.0, r.0, 1e-12) && close(t.1, r.1, 1e-12), "{cut:?}");
            }
        }
    }

    #[test]
    fn cut_coupling_matches_expansion() {
        let (alpha, beta) = (1.0, 0.6);
        for t in [0.2, 0.5, 0.8] {
            let (mut errs, mut ims) = (Vec::new(), Vec::new());
            for eps in [1e-3, 1e-4, 1e-5] {
                let v = cut_coupling(alpha, beta, t, eps).unwrap();
                errs.push((v.re - cut_coupling_expansion(alpha, t, eps)).abs());
                ims.push(v.im.abs());
            }
            // Real part: remainder O(ε^2). Imaginary part: a separate O(ε^{1/2}) term.
            assert!(errs[1] < errs[0] / 50.0 && errs[2] < errs[1] / 50.0, "{errs:?}");
            for k in 0..2 {
                assert!((ims[k] / ims[k + 1] - 10f64.sqrt()).abs() < 0.05, "{ims:?}");
            }
        }
    }

    #[test]
    fn ratio_law() {
        assert_eq!(lerw_probability_form(0.01, 1.0, 0.0), 0.01f64.powf(0.75));
        assert!(lerw_probability_form(0.01, 1.0, PI / 2.0 - 1e-12) < 1e-3);
        let r = lerw_probability_form(0.01, 2.0, 0.3) / lerw_probability_form(0.01, 1.0, 0.3);
        assert!((r - 2f64.powf(-0.75)).abs() < 1e-15);
        let d = lerw_ratio_law(1.0, 0.0, 0.01) - lerw_ratio_law(1.0, 0.0, 0.02);
        assert!((d + 0.75 * 2f64.ln()).abs() < 1e-14);
    }
}
