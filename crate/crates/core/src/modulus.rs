//! Moduli of concentric sphere families, ring capacity and the duality
//! identities, each with a closed form and an independent numeric path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extremal::{oracle_min_values, MeasureSpace, ORACLE_ACCEPT_RESIDUAL};
use crate::geometry::{check_dim, unit_sphere_area, Condenser, SphericalRing};
use crate::quadrature::{integrate_ring, integrate_sphere, QuadratureSpec};
use crate::verify::{Instance, Tolerance, Verdict, VerificationReport};

pub const DEFAULT_GRID: usize = 512;
const CELL_ORDER: usize = 6;
// GL6 on [-1, 1]
const GL6: [(f64, f64); 6] = [
    (-0.932_469_514_203_152_0, 0.171_324_492_379_170_3),
    (-0.661_209_386_466_264_5, 0.360_761_573_048_138_6),
    (-0.238_619_186_083_196_9, 0.467_913_934_572_691_0),
    (0.238_619_186_083_196_9, 0.467_913_934_572_691_0),
    (0.661_209_386_466_264_5, 0.360_761_573_048_138_6),
    (0.932_469_514_203_152_0, 0.171_324_492_379_170_3),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    RadialOracle,
    Quadrature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusResult {
    pub value: f64,
    pub method: Method,
    /// (r, rho(r)) samples of the extremal density or potential gradient.
    pub extremal_profile: Vec<[f64; 2]>,
}

/// The spheres S(x0, r), r in (r_inner, r_outer), with p-modulus exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereFamily {
    pub ring: SphericalRing,
    pub p: f64,
}

impl SphereFamily {
    pub fn new(ring: SphericalRing, p: Option<f64>) -> Result<Self> {
        let n = ring.dim() as f64;
        let p = p.unwrap_or(n);
        if !(p >= n - 1.0 && p.is_finite()) {
            return Err(Error::param("p", format!("exponent must lie in [n-1, inf), got {p}")));
        }
        Ok(Self { ring, p })
    }

    pub fn conformal(ring: SphericalRing) -> Self {
        Self { ring, p: ring.dim() as f64 }
    }
}

fn omega(n: usize) -> f64 {
    unit_sphere_area(n).expect("ring dimension is validated")
}

fn profile(ring: &SphericalRing, f: impl Fn(f64) -> f64) -> Vec<[f64; 2]> {
    let (a, b) = (ring.r_inner(), ring.r_outer());
    (0..=16).map(|i| a * (b / a).powf(i as f64 / 16.0)).map(|r| [r, f(r)]).collect()
}

/// Closed form of M_p over concentric spheres. For p = n this is
/// omega^{-1/(n-1)} log(r2/r1).
pub fn sphere_family_modulus(family: &SphereFamily) -> ModulusResult {
    let ring = &family.ring;
    let n = ring.dim();
    let nf = n as f64;
    let om = omega(n);
    let p = family.p;
    let (r1, r2) = (ring.r_inner(), ring.r_outer());
    let value = if (p - nf).abs() < 1e-15 {
        om.powf(-1.0 / (nf - 1.0)) * ring.log_ratio()
    } else {
        om.powf(1.0 - p / (nf - 1.0)) * (r2.powf(nf - p) - r1.powf(nf - p)) / (nf - p)
    };
    let b = om.powf(-1.0 / (nf - 1.0));
    ModulusResult { value, method: Method::ClosedForm, extremal_profile: profile(ring, |r| b / r) }
}

/// Extremal density of the sphere family, as a function of |x - x0|.
pub fn sphere_family_extremal(n: usize, r: f64) -> f64 {
    (omega(n) * r.powi(n as i32 - 1)).powf(-1.0 / (n as f64 - 1.0))
}

/// Integral of rho^p over the ring for the radial extremal, by volume
/// quadrature. Also checks admissibility on the two boundary spheres.
pub fn sphere_family_modulus_quadrature(family: &SphereFamily, spec: &QuadratureSpec) -> Result<ModulusResult> {
    let ring = &family.ring;
    let n = ring.dim();
    let c = ring.center();
    let p = family.p;
    let rho = |x: &crate::geometry::Point| sphere_family_extremal(n, x.distance(&c));
    for r in [ring.r_inner(), ring.r_outer()] {
        let adm = integrate_sphere(|x| rho(x).powi(n as i32 - 1), &c, r, spec)?;
        if (adm - 1.0).abs() > 1e-9 {
            return Err(Error::NonConvergence(format!("extremal density admissibility {adm} on S(x0, {r})")));
        }
    }
    let value = integrate_ring(|x| rho(x).powf(p), ring, spec)?;
    Ok(ModulusResult { value, method: Method::Quadrature, extremal_profile: profile(ring, |r| sphere_family_extremal(n, r)) })
}

/// Minimiser of coeff * integral of e^{gamma t} v(t)^q dt over piecewise
/// linear v on a uniform t-grid, subject to v_i >= bound at every node
/// except `free`.
struct LogGridProblem {
    t: Vec<f64>,
    coeff: f64,
    gamma: f64,
    q: f64,
    bound: f64,
    free: Option<usize>,
}

impl LogGridProblem {
    fn cells(&self) -> usize {
        self.t.len() - 1
    }

    fn for_each_node<F: FnMut(usize, f64, f64, f64)>(&self, mut f: F) {
        // f(cell, weight, left hat value, right hat value) at each cell quadrature node
        for j in 0..self.cells() {
            let (a, b) = (self.t[j], self.t[j + 1]);
            let half = 0.5 * (b - a);
            for &(x, w) in GL6.iter().take(CELL_ORDER) {
                let s = 0.5 * (x + 1.0);
                let tt = a + half * (x + 1.0);
                f(j, self.coeff * w * half * (self.gamma * tt).exp(), 1.0 - s, s);
            }
        }
    }

    fn value(&self, v: &[f64]) -> f64 {
        let mut total = 0.0;
        self.for_each_node(|j, w, l, r| total += w * (l * v[j] + r * v[j + 1]).powf(self.q));
        total
    }

    fn solve(&self, max_iter: usize) -> (f64, Vec<f64>, usize) {
        let m = self.t.len();
        let lower = |i: usize| if Some(i) == self.free { 0.0 } else { self.bound };
        let mut v = vec![1.5 * self.bound; m];
        let mut value = self.value(&v);
        let mut grad = vec![0.0; m];
        let mut hess = vec![0.0; m];
        let mut iters = 0;
        for it in 0..max_iter {
            iters = it + 1;
            grad.iter_mut().for_each(|g| *g = 0.0);
            hess.iter_mut().for_each(|h| *h = 0.0);
            let q = self.q;
            self.for_each_node(|j, w, l, r| {
                let u = l * v[j] + r * v[j + 1];
                let d1 = w * q * u.powf(q - 1.0);
                let d2 = w * q * (q - 1.0) * u.powf(q - 2.0);
                grad[j] += d1 * l;
                grad[j + 1] += d1 * r;
                hess[j] += d2 * l * l;
                hess[j + 1] += d2 * r * r;
            });
            // Projected diagonal Newton step with backtracking.
            let mut scale = 1.0;
            let mut accepted = false;
            let mut trial = v.clone();
            while scale > 1e-12 {
                for i in 0..m {
                    trial[i] = (v[i] - scale * grad[i] / hess[i]).max(lower(i));
                }
                let candidate = self.value(&trial);
                if candidate <= value {
                    accepted = true;
                    break;
                }
                scale *= 0.5;
            }
            if !accepted {
                break;
            }
            let change = trial.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v.copy_from_slice(&trial);
            value = self.value(&v);
            if change <= 1e-15 * self.bound {
                break;
            }
        }
        (value, v, iters)
    }
}

fn log_grid(ring: &SphericalRing, nodes: usize) -> Result<Vec<f64>> {
    if nodes < 2 {
        return Err(Error::param("grid", "at least two grid nodes are needed"));
    }
    let (a, b) = (ring.r_inner().ln(), ring.r_outer().ln());
    Ok((0..nodes).map(|i| a + (b - a) * i as f64 / (nodes - 1) as f64).collect())
}

/// Radial oracle for M_p of the sphere family: rho(r) = v(log r) / r with
/// v piecewise linear on a log grid, admissibility enforced on the grid
/// spheres. `skip` drops the constraint of one grid sphere.
pub fn sphere_family_modulus_oracle(family: &SphereFamily, nodes: usize, skip: Option<usize>) -> Result<ModulusResult> {
    let ring = &family.ring;
    let n = ring.dim();
    let nf = n as f64;
    let t = log_grid(ring, nodes)?;
    let problem = LogGridProblem {
        t,
        coeff: omega(n),
        gamma: nf - family.p,
        q: family.p,
        bound: omega(n).powf(-1.0 / (nf - 1.0)),
        free: skip,
    };
    let (value, v, _) = problem.solve(400);
    let extremal_profile = problem.t.iter().zip(&v).map(|(t, v)| [t.exp(), v / t.exp()]).collect();
    Ok(ModulusResult { value, method: Method::RadialOracle, extremal_profile })
}

/// Closed form of the n/(n-1)-modulus of the separating spheres.
pub fn separating_modulus(cond: &Condenser) -> ModulusResult {
    let ring = &cond.ring;
    let n = ring.dim();
    let om = omega(n);
    ModulusResult {
        value: om.powf(-1.0 / (n as f64 - 1.0)) * ring.log_ratio(),
        method: Method::ClosedForm,
        extremal_profile: profile(ring, |r| 1.0 / (om * r.powi(n as i32 - 1))),
    }
}

/// Radial oracle for the separating modulus: rho(r) = v(log r) / (omega r^{n-1}),
/// admissibility integral of rho over each grid sphere at least 1.
pub fn separating_modulus_oracle(cond: &Condenser, nodes: usize) -> Result<ModulusResult> {
    let ring = &cond.ring;
    let n = ring.dim();
    let nf = n as f64;
    let q = nf / (nf - 1.0);
    let om = omega(n);
    let problem = LogGridProblem {
        t: log_grid(ring, nodes)?,
        coeff: om.powf(1.0 - q),
        gamma: 0.0,
        q,
        bound: 1.0,
        free: None,
    };
    let (value, v, _) = problem.solve(400);
    let extremal_profile = problem.t.iter().zip(&v).map(|(t, v)| [t.exp(), v / (om * t.exp().powi(n as i32 - 1))]).collect();
    Ok(ModulusResult { value, method: Method::RadialOracle, extremal_profile })
}

/// Closed form omega (log(r2/r1))^{1-n}.
pub fn ring_capacity(cond: &Condenser) -> ModulusResult {
    let ring = &cond.ring;
    let n = ring.dim();
    let l = ring.log_ratio();
    let value = omega(n) * l.powi(1 - n as i32);
    // |grad u| for u = log(r2/r) / log(r2/r1)
    ModulusResult { value, method: Method::ClosedForm, extremal_profile: profile(ring, |r| 1.0 / (r * l)) }
}

/// Dirichlet oracle over radial profiles u, piecewise linear in r on a log
/// grid with u(r1) = 1, u(r2) = 0. The energy is sum c_j d_j^n over the drops
/// d_j with sum d_j = 1, minimised by the descent oracle.
pub fn ring_capacity_oracle(cond: &Condenser, nodes: usize) -> Result<ModulusResult> {
    let ring = &cond.ring;
    let n = ring.dim() as i32;
    let r: Vec<f64> = log_grid(ring, nodes)?.into_iter().map(f64::exp).collect();
    let om = omega(ring.dim());
    let c: Vec<f64> = r
        .windows(2)
        .map(|w| om * (w[1].powi(n) - w[0].powi(n)) / (n as f64 * (w[1] - w[0]).powi(n)))
        .collect();
    let cells = c.len();
    let space = MeasureSpace::uniform(cells, cells as f64)?;
    let out = oracle_min_values(&c, n as f64, &space, 200_000)?;
    if !(out.residual <= ORACLE_ACCEPT_RESIDUAL) {
        return Err(Error::NonConvergence(format!("capacity oracle residual {:e}", out.residual)));
    }
    let extremal_profile = r
        .windows(2)
        .zip(&out.density.values)
        .map(|(w, d)| [0.5 * (w[0] + w[1]), d / (w[1] - w[0])])
        .collect();
    Ok(ModulusResult { value: out.value, method: Method::RadialOracle, extremal_profile })
}

/// Modulus of the curves joining the boundary spheres, from the volume
/// integral of the admissible metric rho = 1 / (|x - x0| log(r2/r1)).
pub fn curve_family_modulus(cond: &Condenser, spec: &QuadratureSpec) -> Result<ModulusResult> {
    let ring = &cond.ring;
    let n = ring.dim() as i32;
    let l = ring.log_ratio();
    let c = ring.center();
    let value = integrate_ring(|x| (x.distance(&c) * l).powi(-n), ring, spec)?;
    Ok(ModulusResult { value, method: Method::Quadrature, extremal_profile: profile(ring, |r| 1.0 / (r * l)) })
}

pub const DUALITY_TOL_CLOSED: f64 = 1e-6;
pub const DUALITY_TOL_ORACLE: f64 = 1e-3;

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

fn ring_instance(cond: &Condenser) -> Instance {
    Instance {
        dimension: cond.dim(),
        ring: Some([cond.ring.r_inner(), cond.ring.r_outer()]),
        center: Some(cond.ring.center()),
        ..Instance::default()
    }
}

/// Compares a separating modulus value with cap^{-1/(n-1)}.
pub fn ziemer_compare(cond: &Condenser, separating: f64, capacity: f64, tol: f64) -> VerificationReport {
    let n = cond.dim() as f64;
    let rhs = capacity.powf(-1.0 / (n - 1.0));
    let gap = rel_gap(separating, rhs);
    VerificationReport {
        check: "ziemer_duality".into(),
        instance: ring_instance(cond),
        lhs: separating,
        rhs,
        slack: separating - rhs,
        slack_ratio: Some(separating / rhs),
        tolerance: Tolerance::Relative(tol),
        verdict: if gap <= tol { Verdict::Holds } else { Verdict::Violated },
        sub_reports: Vec::new(),
    }
}

/// Separating modulus against cap^{-1/(n-1)}: closed forms at 1e-6 and the
/// two oracles at 1e-3, reported as sub-reports.
pub fn ziemer_duality_check(cond: &Condenser, nodes: usize) -> Result<VerificationReport> {
    check_dim(cond.dim())?;
    let closed = ziemer_compare(cond, separating_modulus(cond).value, ring_capacity(cond).value, DUALITY_TOL_CLOSED);
    let sep = separating_modulus_oracle(cond, nodes)?.value;
    let cap = ring_capacity_oracle(cond, nodes)?.value;
    let mut oracle = ziemer_compare(cond, sep, cap, DUALITY_TOL_ORACLE);
    oracle.check = "ziemer_duality_oracle".into();
    let verdict = Verdict::all([closed.verdict, oracle.verdict]);
    Ok(VerificationReport {
        check: "ziemer_duality".into(),
        instance: ring_instance(cond),
        lhs: closed.lhs,
        rhs: closed.rhs,
        slack: closed.slack,
        slack_ratio: closed.slack_ratio,
        tolerance: Tolerance::Relative(DUALITY_TOL_CLOSED),
        verdict,
        sub_reports: vec![closed, oracle],
    })
}

/// Curve-family modulus (quadrature of the ring metric) against the capacity
/// closed form.
pub fn hesse_duality_check(cond: &Condenser, spec: &QuadratureSpec) -> Result<VerificationReport> {
    let lhs = curve_family_modulus(cond, spec)?.value;
    let rhs = ring_capacity(cond).value;
    Ok(VerificationReport {
        check: "hesse_duality".into(),
        instance: ring_instance(cond),
        lhs,
        rhs,
        slack: lhs - rhs,
        slack_ratio: Some(lhs / rhs),
        tolerance: Tolerance::Relative(DUALITY_TOL_CLOSED),
        verdict: if rel_gap(lhs, rhs) <= DUALITY_TOL_CLOSED { Verdict::Holds } else { Verdict::Violated },
        sub_reports: Vec::new(),
    })
}
