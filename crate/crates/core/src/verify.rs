//! Inequality checks on the mapping zoo and the empirical equicontinuity probe.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{unit_sphere_area, Condenser, Point, SphericalRing};
use crate::mappings::{random_point_in, unit_directions, MappingSpec, Region};
use crate::modulus::{ring_capacity, sphere_family_modulus, SphereFamily};
use crate::quadrature::QuadratureSpec;
use crate::weights::{ls_slope, lower_criterion_integral, ring_criterion_integral, WeightField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Violated,
    Inconclusive,
}

impl Verdict {
    /// Violated dominates inconclusive, which dominates holds.
    pub fn all<I: IntoIterator<Item = Verdict>>(verdicts: I) -> Verdict {
        verdicts.into_iter().fold(Verdict::Holds, |acc, v| match (acc, v) {
            (Verdict::Violated, _) | (_, Verdict::Violated) => Verdict::Violated,
            (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
            _ => Verdict::Holds,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tolerance {
    Additive(f64),
    Relative(f64),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapping: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ring: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Point>,
}

/// One checked inequality. `slack >= -tol` means the inequality holds in the
/// orientation of the check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationReport {
    pub check: String,
    pub instance: Instance,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub slack_ratio: Option<f64>,
    pub tolerance: Tolerance,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sub_reports: Vec<VerificationReport>,
}

/// Additive tolerance for closed-form comparisons, scaled up for values above 1.
pub const CLOSED_FORM_TOL: f64 = 1e-9;

fn closed_tol(lhs: f64, rhs: f64) -> f64 {
    CLOSED_FORM_TOL * lhs.abs().max(rhs.abs()).max(1.0)
}

fn image_ring(f: &MappingSpec, x0: &Point, r1: f64, r2: f64) -> Result<SphericalRing> {
    if f.center() != *x0 {
        return Err(Error::NotSpherePreserving(format!("{} is not centered at {x0}", f.label())));
    }
    SphericalRing::new(*x0, r1, r2)?;
    f.image_ring(x0, r1, r2)
}

/// Q = N(f, D) K_f with N validated by root counting on the ring.
pub fn lower_q_weight(f: &MappingSpec, ring: &SphericalRing, seed: u64) -> Result<WeightField> {
    let n = f.multiplicity(&Region::Ring(*ring), seed)?;
    WeightField::distortion(f, n)
}

/// M(f(Sigma)) >= integral of dr / ||Q||_{n-1}(r) over (eps, eps0).
pub fn check_lower_q(
    f: &MappingSpec,
    q: &WeightField,
    x0: &Point,
    eps: f64,
    eps0: f64,
    spec: &QuadratureSpec,
) -> Result<VerificationReport> {
    let image = image_ring(f, x0, eps, eps0)?;
    let lhs = sphere_family_modulus(&SphereFamily::conformal(image)).value;
    let rhs = lower_criterion_integral(q, x0, eps, eps0, spec)?;
    let tol = closed_tol(lhs, rhs);
    Ok(VerificationReport {
        check: "lower_q".into(),
        instance: Instance {
            dimension: f.dim(),
            mapping: Some(f.label()),
            weight: Some(weight_label(q)),
            ring: Some([eps, eps0]),
            center: Some(*x0),
        },
        lhs,
        rhs,
        slack: lhs - rhs,
        slack_ratio: Some(lhs / rhs),
        tolerance: Tolerance::Additive(tol),
        verdict: if lhs >= rhs - tol { Verdict::Holds } else { Verdict::Violated },
        sub_reports: Vec::new(),
    })
}

/// cap f(E) <= omega / I^{n-1} with I the ring criterion integral of Q*.
pub fn check_ring_q(
    f: &MappingSpec,
    qstar: &WeightField,
    x0: &Point,
    r1: f64,
    r2: f64,
    spec: &QuadratureSpec,
) -> Result<VerificationReport> {
    let n = f.dim();
    let image = image_ring(f, x0, r1, r2)?;
    let lhs = ring_capacity(&Condenser::new(image)).value;
    let i = ring_criterion_integral(qstar, x0, r1, r2, spec)?;
    let rhs = unit_sphere_area(n)? / i.powi(n as i32 - 1);
    let tol = closed_tol(lhs, rhs);
    Ok(VerificationReport {
        check: "ring_q".into(),
        instance: Instance {
            dimension: n,
            mapping: Some(f.label()),
            weight: Some(weight_label(qstar)),
            ring: Some([r1, r2]),
            center: Some(*x0),
        },
        lhs,
        rhs,
        slack: rhs - lhs,
        slack_ratio: Some(rhs / lhs),
        tolerance: Tolerance::Additive(tol),
        verdict: if lhs <= rhs + tol { Verdict::Holds } else { Verdict::Violated },
        sub_reports: Vec::new(),
    })
}

/// Lower Q on the ring, then ring Q* with Q* = Q^{n-1}.
pub fn check_main_lemma_chain(
    f: &MappingSpec,
    q: &WeightField,
    x0: &Point,
    radii: (f64, f64),
    spec: &QuadratureSpec,
) -> Result<VerificationReport> {
    let (r1, r2) = radii;
    let lower = check_lower_q(f, q, x0, r1, r2, spec)?;
    let qstar = q.powf(f.dim() as f64 - 1.0)?;
    let ring = check_ring_q(f, &qstar, x0, r1, r2, spec)?;
    Ok(VerificationReport {
        check: "main_lemma_chain".into(),
        instance: ring.instance.clone(),
        lhs: ring.lhs,
        rhs: ring.rhs,
        slack: ring.slack,
        slack_ratio: ring.slack_ratio,
        tolerance: ring.tolerance,
        verdict: Verdict::all([lower.verdict, ring.verdict]),
        sub_reports: vec![lower, ring],
    })
}

/// Ring check with Q* = (1 - delta) (N K_f)^{n-1}.
pub fn negative_control(
    f: &MappingSpec,
    x0: &Point,
    r1: f64,
    r2: f64,
    delta: f64,
    spec: &QuadratureSpec,
) -> Result<VerificationReport> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::param("delta", "must lie in [0, 1)"));
    }
    let ring = SphericalRing::new(*x0, r1, r2)?;
    let q = lower_q_weight(f, &ring, 0)?;
    let qstar = q.powf(f.dim() as f64 - 1.0)?.scaled(1.0 - delta)?;
    let mut report = check_ring_q(f, &qstar, x0, r1, r2, spec)?;
    report.check = "ring_q_negative_control".into();
    Ok(report)
}

/// Smallest under-scaling delta at which the negative control reports a violation.
pub fn violation_threshold(f: &MappingSpec, x0: &Point, r1: f64, r2: f64, spec: &QuadratureSpec) -> Result<f64> {
    let violated = |d: f64| -> Result<bool> { Ok(negative_control(f, x0, r1, r2, d, spec)?.verdict == Verdict::Violated) };
    let (mut lo, mut hi) = (0.0, 1.0 - 1e-12);
    if violated(lo)? {
        return Ok(0.0);
    }
    if !violated(hi)? {
        return Err(Error::NonConvergence("no violation for any delta below 1".into()));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if violated(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn weight_label(q: &WeightField) -> String {
    serde_json::to_string(q.kind()).unwrap_or_else(|_| "custom".into())
}

/// A parameterised family of zoo mappings with a common weight bound.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilySpec {
    pub label: String,
    pub members: Vec<MappingSpec>,
    pub weight_bound: Option<WeightField>,
}

impl FamilySpec {
    pub fn radial_stretch(n: usize, alpha_lo: f64, alpha_hi: f64, count: usize) -> Result<Self> {
        if !(alpha_lo > 0.0 && alpha_lo <= alpha_hi) || count == 0 {
            return Err(Error::param("alpha", "need 0 < alpha_lo <= alpha_hi and a positive count"));
        }
        let members = (0..count)
            .map(|i| {
                let t = if count == 1 { 0.0 } else { i as f64 / (count - 1) as f64 };
                MappingSpec::radial_stretch(n, alpha_lo + (alpha_hi - alpha_lo) * t)
            })
            .collect::<Result<Vec<_>>>()?;
        let kmax = members
            .iter()
            .map(|m| match m.kind() {
                crate::mappings::MappingKind::RadialStretch { alpha } => alpha.powi(n as i32 - 1).max(1.0 / alpha),
                _ => 1.0,
            })
            .fold(1.0, f64::max);
        Ok(Self {
            label: format!("radial_stretch alpha in [{alpha_lo}, {alpha_hi}]"),
            members,
            weight_bound: Some(WeightField::constant(n, kmax.powi(n as i32 - 1))?),
        })
    }

    pub fn singleton(f: MappingSpec) -> Self {
        Self { label: f.label(), members: vec![f], weight_bound: None }
    }

    /// Checks K_f^{n-1} <= Q at seeded points of `region` for every member.
    pub fn check_bound(&self, region: &Region, samples: usize, seed: u64) -> Result<bool> {
        let Some(q) = &self.weight_bound else { return Ok(true) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let x = random_point_in(region, &mut rng);
            for f in &self.members {
                let k = f.distortion_kf(&x)?;
                if k.powi(f.dim() as i32 - 1) > q.value(&x)? * (1.0 + 1e-12) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub family: String,
    pub deltas: Vec<f64>,
    /// Sampled modulus of continuity sup |f(x) - f(y)| over |x - y| <= delta.
    pub omegas: Vec<f64>,
    /// Slope of log omega against log delta.
    pub decay_exponent: f64,
    pub monotone: bool,
    pub bound_respected: bool,
    pub verdict: Verdict,
}

fn clamp_to_ball(x: Point, center: &Point, radius: f64) -> Point {
    let d = x - *center;
    let len = d.norm();
    if len <= radius {
        x
    } else {
        *center + d * (radius / len)
    }
}

/// Empirical modulus of continuity of a family on a closed ball.
///
/// Pairs are drawn from the center, the boundary sphere (radial and
/// tangential), and seeded random positions.
pub fn equicontinuity_probe(
    family: &FamilySpec,
    center: &Point,
    radius: f64,
    deltas: &[f64],
    seed: u64,
) -> Result<ProbeReport> {
    if family.members.is_empty() {
        return Err(Error::param("family", "family has no members"));
    }
    if deltas.len() < 2 || deltas.windows(2).any(|w| !(w[1] < w[0])) || !(deltas[deltas.len() - 1] > 0.0) {
        return Err(Error::param("deltas", "need at least two positive strictly decreasing values"));
    }
    if !(radius > 0.0) {
        return Err(Error::param("radius", "ball radius must be positive"));
    }
    let n = center.dim();
    let dirs = unit_directions(n, if n == 2 { 24 } else { 48 });
    let region = Region::Ball { center: *center, radius };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eval = |f: &MappingSpec, x: &Point| -> Result<Point> {
        if x.distance(&f.center()) == 0.0 {
            Ok(f.center())
        } else {
            f.apply(x)
        }
    };
    let mut omegas = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let step = delta.min(2.0 * radius);
        let mut pairs: Vec<(Point, Point)> = Vec::new();
        for d in &dirs {
            pairs.push((*center, *center + *d * step));
            let b = *center + *d * radius;
            pairs.push((b, *center + *d * (radius - step).max(0.0)));
            // Tangential chord of length step on the boundary sphere.
            let ortho = {
                let e = if d.get(0).abs() < 0.9 { 0 } else { 1 };
                let mut v = vec![0.0; n];
                v[e] = 1.0;
                let u = Point::new(&v)?;
                let t = u - *d * u.dot(d);
                t * (1.0 / t.norm())
            };
            let half = (0.5 * step / radius).min(1.0).asin();
            let y = *center + (*d * (2.0 * half).cos() + ortho * (2.0 * half).sin()) * radius;
            pairs.push((b, y));
        }
        for _ in 0..64 {
            let x = random_point_in(&region, &mut rng);
            let dir = dirs[rng.random_range(0..dirs.len())];
            let y = clamp_to_ball(x + dir * (step * rng.random_range(0.5..1.0)), center, radius);
            pairs.push((x, y));
        }
        let mut best: f64 = 0.0;
        for f in &family.members {
            for (x, y) in &pairs {
                if x.distance(y) <= delta * (1.0 + 1e-12) {
                    best = best.max(eval(f, x)?.distance(&eval(f, y)?));
                }
            }
        }
        omegas.push(best);
    }
    let monotone = omegas.windows(2).all(|w| w[1] <= w[0]);
    let lx: Vec<f64> = deltas.iter().map(|d| d.ln()).collect();
    let ly: Vec<f64> = omegas.iter().map(|o| o.max(f64::MIN_POSITIVE).ln()).collect();
    let decay_exponent = ls_slope(&lx, &ly);
    let bound_respected = family.check_bound(&region, 64, seed)?;
    let verdict = if monotone && decay_exponent > 0.0 && bound_respected { Verdict::Holds } else { Verdict::Inconclusive };
    Ok(ProbeReport {
        family: family.label.clone(),
        deltas: deltas.to_vec(),
        omegas,
        decay_exponent,
        monotone,
        bound_respected,
        verdict,
    })
}
