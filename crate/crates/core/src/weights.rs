//! Weight fields Q and the scalar functionals built from them.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_dim, unit_sphere_area, Point};
use crate::mappings::MappingSpec;
use crate::quadrature::{
    classify_improper, try_integrate_radial, try_integrate_sphere, DivergenceVerdict, Endpoint, QuadratureSpec,
};

/// A user supplied radial profile r -> Q(r).
#[derive(Clone)]
pub struct RadialProfile(pub Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("RadialProfile(..)")
    }
}

impl PartialEq for RadialProfile {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightKind {
    Constant { c: f64 },
    /// |x - x0|^a
    RadialPower { a: f64 },
    /// log(1 / |x - x0|)
    RadialLog,
    /// log(1 / |x - x0|)^beta
    RadialLogPower { beta: f64 },
    #[serde(skip)]
    CustomRadial(RadialProfile),
    Product { factors: Vec<WeightKind> },
    Power { base: Box<WeightKind>, exponent: f64 },
    /// N * K_f(x) for a zoo mapping.
    Distortion { mapping: MappingSpec, multiplicity: u32 },
}

impl WeightKind {
    fn validate(&self, n: usize) -> Result<()> {
        match self {
            WeightKind::Constant { c } => {
                if !(*c > 0.0) || c.is_nan() {
                    return Err(Error::param("c", format!("constant weight must be positive, got {c}")));
                }
            }
            WeightKind::RadialPower { a } | WeightKind::RadialLogPower { beta: a } => {
                if !a.is_finite() {
                    return Err(Error::param("exponent", "must be finite"));
                }
            }
            WeightKind::Product { factors } => {
                if factors.is_empty() {
                    return Err(Error::param("factors", "product needs at least one factor"));
                }
                for f in factors {
                    f.validate(n)?;
                }
            }
            WeightKind::Power { base, exponent } => {
                if !(*exponent > 0.0 && exponent.is_finite()) {
                    return Err(Error::param("exponent", "power of a weight must be positive"));
                }
                base.validate(n)?;
            }
            WeightKind::Distortion { mapping, multiplicity } => {
                if mapping.dim() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: mapping.dim() });
                }
                if *multiplicity == 0 {
                    return Err(Error::param("multiplicity", "must be at least 1"));
                }
            }
            WeightKind::RadialLog | WeightKind::CustomRadial(_) => {}
        }
        Ok(())
    }

    fn eval(&self, x: &Point, center: &Point) -> Result<f64> {
        let r = || x.distance(center);
        let v = match self {
            WeightKind::Constant { c } => *c,
            WeightKind::RadialPower { a } => r().powf(*a),
            WeightKind::RadialLog => (1.0 / r()).ln(),
            WeightKind::RadialLogPower { beta } => (1.0 / r()).ln().powf(*beta),
            WeightKind::CustomRadial(p) => (p.0)(r()),
            WeightKind::Product { factors } => {
                let mut acc = 1.0;
                for f in factors {
                    acc *= f.eval(x, center)?;
                }
                acc
            }
            WeightKind::Power { base, exponent } => base.eval(x, center)?.powf(*exponent),
            WeightKind::Distortion { mapping, multiplicity } => *multiplicity as f64 * mapping.distortion_kf(x)?,
        };
        if v.is_nan() || v <= 0.0 {
            return Err(Error::NonFinite { value: v, location: format!("weight at {x}") });
        }
        Ok(v)
    }

    fn radial_about(&self, center: &Point) -> bool {
        match self {
            WeightKind::Product { factors } => factors.iter().all(|f| f.radial_about(center)),
            WeightKind::Power { base, .. } => base.radial_about(center),
            WeightKind::Distortion { mapping, .. } => mapping.center() == *center,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightField {
    kind: WeightKind,
    center: Point,
}

impl WeightField {
    pub fn new(kind: WeightKind, center: Point) -> Result<Self> {
        kind.validate(center.dim())?;
        Ok(Self { kind, center })
    }

    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::new(WeightKind::Constant { c }, Point::origin(n)?)
    }

    pub fn radial_power(n: usize, a: f64) -> Result<Self> {
        Self::new(WeightKind::RadialPower { a }, Point::origin(n)?)
    }

    pub fn radial_log(n: usize) -> Result<Self> {
        Self::new(WeightKind::RadialLog, Point::origin(n)?)
    }

    pub fn radial_log_power(n: usize, beta: f64) -> Result<Self> {
        Self::new(WeightKind::RadialLogPower { beta }, Point::origin(n)?)
    }

    pub fn custom_radial<F>(n: usize, profile: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(WeightKind::CustomRadial(RadialProfile(Arc::new(profile))), Point::origin(n)?)
    }

    /// Q = N(f, D) K_f about the mapping's center.
    pub fn distortion(mapping: &MappingSpec, multiplicity: u32) -> Result<Self> {
        Self::new(WeightKind::Distortion { mapping: mapping.clone(), multiplicity }, mapping.center())
    }

    /// Pointwise power Q^p of this field.
    pub fn powf(&self, exponent: f64) -> Result<Self> {
        Self::new(WeightKind::Power { base: Box::new(self.kind.clone()), exponent }, self.center)
    }

    /// Pointwise product with a positive constant.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(
            WeightKind::Product { factors: vec![WeightKind::Constant { c }, self.kind.clone()] },
            self.center,
        )
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn value(&self, x: &Point) -> Result<f64> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.dim() });
        }
        self.kind.eval(x, &self.center)
    }

    /// Whether Q is constant on every sphere about `x0`.
    pub fn is_radial_about(&self, x0: &Point) -> bool {
        *x0 == self.center && self.kind.radial_about(&self.center)
    }

    fn radial_value(&self, r: f64) -> Result<f64> {
        let mut c = *self.center.raw();
        c[0] += r;
        self.kind.eval(&Point::from_array(c, self.dim()), &self.center)
    }

    fn check_sphere(&self, x0: &Point, r: f64) -> Result<()> {
        if x0.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x0.dim() });
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::param("radius", format!("sphere radius must be positive, got {r}")));
        }
        Ok(())
    }
}

/// q_{x0}(r): mean of Q over S(x0, r) with respect to H^{n-1}.
pub fn spherical_average(q: &WeightField, x0: &Point, r: f64, spec: &QuadratureSpec) -> Result<f64> {
    q.check_sphere(x0, r)?;
    if q.is_radial_about(x0) {
        return q.radial_value(r);
    }
    spherical_average_quadrature(q, x0, r, spec)
}

/// q_{x0}(r) by sphere quadrature, ignoring any radial structure.
pub fn spherical_average_quadrature(q: &WeightField, x0: &Point, r: f64, spec: &QuadratureSpec) -> Result<f64> {
    q.check_sphere(x0, r)?;
    let n = q.dim();
    let total = try_integrate_sphere(|x| q.value(x), x0, r, spec)?;
    Ok(total / (unit_sphere_area(n)? * r.powi(n as i32 - 1)))
}

/// ||Q||_{n-1}(r) = (integral of Q^{n-1} over S(x0, r))^{1/(n-1)}.
pub fn lq_norm(q: &WeightField, x0: &Point, r: f64, spec: &QuadratureSpec) -> Result<f64> {
    q.check_sphere(x0, r)?;
    let n = q.dim();
    if q.is_radial_about(x0) {
        let m = (n - 1) as f64;
        return Ok(q.radial_value(r)? * (unit_sphere_area(n)? * r.powi(n as i32 - 1)).powf(1.0 / m));
    }
    lq_norm_quadrature(q, x0, r, spec)
}

pub fn lq_norm_quadrature(q: &WeightField, x0: &Point, r: f64, spec: &QuadratureSpec) -> Result<f64> {
    q.check_sphere(x0, r)?;
    let m = (q.dim() - 1) as f64;
    let total = try_integrate_sphere(|x| Ok(q.value(x)?.powf(m)), x0, r, spec)?;
    Ok(total.powf(1.0 / m))
}

fn check_interval(a: f64, b: f64) -> Result<()> {
    if !(a >= 0.0 && a < b && b.is_finite()) {
        return Err(Error::InvalidRing { inner: a, outer: b });
    }
    Ok(())
}

fn improper_value(verdict: DivergenceVerdict, what: &str) -> Result<f64> {
    if let Some(v) = verdict.value() {
        return Ok(v);
    }
    if verdict.is_divergent() {
        Err(Error::Divergent(what.to_string()))
    } else {
        Err(Error::NonConvergence(format!("{what}: inconclusive at the endpoint 0")))
    }
}

fn radial_criterion<F>(integrand: F, a: f64, b: f64, spec: &QuadratureSpec, what: &str) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    check_interval(a, b)?;
    if a == 0.0 {
        let verdict = classify_improper(|t| integrand(t).unwrap_or(f64::NAN), Endpoint::Lower, (0.0, b), spec);
        return improper_value(verdict, what);
    }
    try_integrate_radial(integrand, a, b, spec)
}

/// Integral of dr / ||Q||_{n-1}(r) over (eps, eps0). `eps = 0` is decided by
/// the endpoint classifier.
pub fn lower_criterion_integral(q: &WeightField, x0: &Point, eps: f64, eps0: f64, spec: &QuadratureSpec) -> Result<f64> {
    radial_criterion(|r| Ok(1.0 / lq_norm(q, x0, r, spec)?), eps, eps0, spec, "lower criterion integral")
}

/// I(r1, r2) = integral of dr / (r q_{x0}(r)^{1/(n-1)}).
pub fn ring_criterion_integral(q: &WeightField, x0: &Point, r1: f64, r2: f64, spec: &QuadratureSpec) -> Result<f64> {
    let m = (q.dim() - 1) as f64;
    radial_criterion(
        |r| Ok(1.0 / (r * spherical_average(q, x0, r, spec)?.powf(1.0 / m))),
        r1,
        r2,
        spec,
        "ring criterion integral",
    )
}

/// Tabulated (r, q(r), ||Q||(r)) for external plotting.
pub fn profile_table(q: &WeightField, x0: &Point, radii: &[f64], spec: &QuadratureSpec) -> Result<Vec<[f64; 3]>> {
    radii
        .iter()
        .map(|&r| Ok([r, spherical_average(q, x0, r, spec)?, lq_norm(q, x0, r, spec)?]))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionVerdict {
    Holds,
    Fails,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FmoReport {
    pub verdict: CriterionVerdict,
    pub radii: Vec<f64>,
    pub ball_means: Vec<f64>,
    pub oscillations: Vec<f64>,
    /// Slope of ln(oscillation) against ln(1/eps) over the smaller half of the radii.
    pub trend_slope: f64,
    pub sup: f64,
}

/// Slopes at or below this count as bounded.
pub const FMO_FLAT_SLOPE: f64 = 0.02;
/// Slopes at or above this count as growth.
pub const FMO_GROWTH_SLOPE: f64 = 0.1;

fn ball_statistics(q: &WeightField, x0: &Point, eps: f64, spec: &QuadratureSpec) -> Result<(f64, f64)> {
    let n = q.dim() as i32;
    let nf = n as f64;
    let radial = q.is_radial_about(x0);
    // r = eps s, so both integrals live on s in (0, 1) with density n s^{n-1}.
    let mean = try_integrate_radial(
        |s| Ok(nf * s.powi(n - 1) * spherical_average(q, x0, eps * s, spec)?),
        0.0,
        1.0,
        spec,
    )?;
    let osc = try_integrate_radial(
        |s| {
            let r = eps * s;
            let dev = if radial {
                (q.radial_value(r)? - mean).abs()
            } else {
                let area = unit_sphere_area(q.dim())? * r.powi(n - 1);
                try_integrate_sphere(|x| Ok((q.value(x)? - mean).abs()), x0, r, spec)? / area
            };
            // Deviations at the rounding level of the mean are not resolved.
            let dev = if dev <= 8.0 * f64::EPSILON * mean.abs() { 0.0 } else { dev };
            Ok(nf * s.powi(n - 1) * dev)
        },
        0.0,
        1.0,
        spec,
    )?;
    Ok((mean, osc))
}

/// Least-squares slope of y against x.
pub(crate) fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Mean oscillation of Q over B(x0, eps) along a decreasing radius sequence.
pub fn fmo_estimate(q: &WeightField, x0: &Point, radii: &[f64], spec: &QuadratureSpec) -> Result<FmoReport> {
    if radii.len() < 6 {
        return Err(Error::param("radii", "at least 6 radii are needed"));
    }
    if radii.windows(2).any(|w| !(w[1] < w[0])) || !(radii[radii.len() - 1] > 0.0) {
        return Err(Error::param("radii", "radii must be positive and strictly decreasing"));
    }
    let mut ball_means = Vec::with_capacity(radii.len());
    let mut oscillations = Vec::with_capacity(radii.len());
    for &eps in radii {
        let (m, o) = ball_statistics(q, x0, eps, spec)?;
        ball_means.push(m);
        oscillations.push(o);
    }
    let sup = oscillations.iter().cloned().fold(0.0, f64::max);
    let scale = ball_means.iter().map(|m| m.abs()).fold(1.0, f64::max);
    let (verdict, trend_slope) = if sup <= 1e-9 * scale {
        (CriterionVerdict::Holds, 0.0)
    } else {
        let half = radii.len() / 2;
        let x: Vec<f64> = radii[half..].iter().map(|e| (1.0 / e).ln()).collect();
        let y: Vec<f64> = oscillations[half..].iter().map(|o| o.max(f64::MIN_POSITIVE).ln()).collect();
        let slope = ls_slope(&x, &y);
        let verdict = if slope <= FMO_FLAT_SLOPE {
            CriterionVerdict::Holds
        } else if slope >= FMO_GROWTH_SLOPE {
            CriterionVerdict::Fails
        } else {
            CriterionVerdict::Inconclusive
        };
        (verdict, slope)
    };
    Ok(FmoReport { verdict, radii: radii.to_vec(), ball_means, oscillations, trend_slope, sup })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogGrowthReport {
    pub verdict: CriterionVerdict,
    /// Supremum of q(r) / log(1/r)^{n-1} over the sampled radii.
    pub constant: Option<f64>,
    pub radii: Vec<f64>,
    pub ratios: Vec<f64>,
}

/// Relative increase of the tail ratio beyond which growth is declared.
pub const LOG_GROWTH_TAIL: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriteriaReport {
    pub local_integrability: DivergenceVerdict,
    pub fmo: FmoReport,
    pub log_growth: LogGrowthReport,
    /// Endpoint verdict for dt / (t q^{1/(n-1)}(t)) at 0; divergence means the condition holds.
    pub divergence: DivergenceVerdict,
    pub divergence_holds: bool,
    pub orlicz: Option<DivergenceVerdict>,
    /// Recorded, not verified.
    pub assumptions: Vec<String>,
}

/// Upper end of the window near x0 used by the criteria.
pub const CRITERIA_WINDOW: f64 = 0.5;

fn log_growth(q: &WeightField, x0: &Point, spec: &QuadratureSpec) -> LogGrowthReport {
    let m = (q.dim() - 1) as i32;
    let radii: Vec<f64> = (2..=24).map(|k| 2f64.powi(-k)).collect();
    let ratios: Vec<f64> = radii
        .iter()
        .map(|&r| {
            spherical_average(q, x0, r, spec)
                .map(|v| v / (1.0 / r).ln().powi(m))
                .unwrap_or(f64::NAN)
        })
        .collect();
    if ratios.iter().any(|v| !v.is_finite()) {
        return LogGrowthReport { verdict: CriterionVerdict::Inconclusive, constant: None, radii, ratios };
    }
    let last = ratios[ratios.len() - 1];
    let mid = ratios[ratios.len() / 2];
    let growing = last / mid - 1.0 > LOG_GROWTH_TAIL;
    let sup = ratios.iter().cloned().fold(0.0, f64::max);
    let (verdict, constant) = if growing {
        (CriterionVerdict::Fails, None)
    } else {
        (CriterionVerdict::Holds, Some(sup))
    };
    LogGrowthReport { verdict, constant, radii, ratios }
}

/// The three independent sufficient conditions for equicontinuity at x0,
/// together with the local integrability check and the assumptions taken.
pub fn equicontinuity_criteria(q: &WeightField, x0: &Point, n: usize, spec: &QuadratureSpec) -> Result<CriteriaReport> {
    check_dim(n)?;
    if q.dim() != n || x0.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: q.dim() });
    }
    let omega = unit_sphere_area(n)?;
    let m = (n - 1) as f64;
    let q_at = |r: f64| spherical_average(q, x0, r, spec).unwrap_or(f64::NAN);
    let local_integrability = classify_improper(
        |r| omega * r.powi(n as i32 - 1) * q_at(r),
        Endpoint::Lower,
        (0.0, CRITERIA_WINDOW),
        spec,
    );
    let radii: Vec<f64> = (1..=10).map(|k| 2f64.powi(-k)).collect();
    let fmo = match fmo_estimate(q, x0, &radii, spec) {
        Ok(r) => r,
        Err(_) => FmoReport {
            verdict: CriterionVerdict::Inconclusive,
            radii,
            ball_means: Vec::new(),
            oscillations: Vec::new(),
            trend_slope: f64::NAN,
            sup: f64::NAN,
        },
    };
    let log_growth = log_growth(q, x0, spec);
    let divergence =
        classify_improper(|t| 1.0 / (t * q_at(t).powf(1.0 / m)), Endpoint::Lower, (0.0, CRITERIA_WINDOW), spec);
    let divergence_holds = divergence.is_divergent();
    Ok(CriteriaReport {
        local_integrability,
        fmo,
        log_growth,
        divergence,
        divergence_holds,
        orlicz: None,
        assumptions: vec!["the omitted set E has positive capacity".to_string()],
    })
}

/// A nondecreasing positive function on (0, inf).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OrliczFunction {
    /// t^p
    Power { p: f64 },
    /// t^p log^q(e + t)
    LogPower { p: f64, q: f64 },
    #[serde(skip)]
    Custom(RadialProfile),
}

impl OrliczFunction {
    pub fn custom<F>(phi: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        OrliczFunction::Custom(RadialProfile(Arc::new(phi)))
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            OrliczFunction::Power { p } => t.powf(*p),
            OrliczFunction::LogPower { p, q } => t.powf(*p) * (std::f64::consts::E + t).ln().powf(*q),
            OrliczFunction::Custom(f) => (f.0)(t),
        }
    }

    /// Positivity and monotonicity, sampled on a log grid over [1e-6, 1e12].
    pub fn validate(&self) -> Result<()> {
        let mut prev = 0.0;
        for i in 0..=360 {
            let t = 10f64.powf(-6.0 + 18.0 * i as f64 / 360.0);
            let v = self.eval(t);
            if !(v > 0.0) {
                return Err(Error::param("phi", format!("must be positive, phi({t}) = {v}")));
            }
            if v < prev * (1.0 - 1e-12) {
                return Err(Error::param("phi", format!("must be nondecreasing, fails near t = {t}")));
            }
            prev = v;
        }
        Ok(())
    }
}

/// Endpoint verdict for the integral of (t / phi(t))^{1/(n-2)} over (1, inf).
/// Convergence means the calibration condition holds.
pub fn orlicz_condition(phi: &OrliczFunction, n: usize, spec: &QuadratureSpec) -> Result<DivergenceVerdict> {
    check_dim(n)?;
    if n == 2 {
        return Err(Error::NotApplicable("the calibration condition is vacuous in the plane".into()));
    }
    phi.validate()?;
    let e = 1.0 / (n as f64 - 2.0);
    Ok(classify_improper(|t| (t / phi.eval(t)).powf(e), Endpoint::Upper, (1.0, f64::INFINITY), spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mappings::MappingSpec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{E, PI};

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn spherical_average_examples() {
        let o = Point::origin(3).unwrap();
        let one = WeightField::constant(3, 1.0).unwrap();
        for r in [0.1, 1.0, 7.0] {
            assert_eq!(spherical_average(&one, &o, r, &spec()).unwrap(), 1.0);
        }
        let lin = WeightField::radial_power(3, 1.0).unwrap();
        assert_relative_eq!(spherical_average(&lin, &o, 0.3, &spec()).unwrap(), 0.3);
        let lg = WeightField::radial_log(3).unwrap();
        assert_relative_eq!(spherical_average(&lg, &o, 0.1, &spec()).unwrap(), 10f64.ln(), max_relative = 1e-15);
        assert_relative_eq!(10f64.ln(), 2.302585, max_relative = 1e-6);
    }

    #[test]
    fn lq_norm_examples() {
        let o3 = Point::origin(3).unwrap();
        let o2 = Point::origin(2).unwrap();
        let r = 0.7;
        let one3 = WeightField::constant(3, 1.0).unwrap();
        let exact = 2.0 * PI.sqrt() * r;
        assert_relative_eq!(lq_norm(&one3, &o3, r, &spec()).unwrap(), exact, max_relative = 1e-12);
        assert!((lq_norm_quadrature(&one3, &o3, r, &spec()).unwrap() - exact).abs() <= 1e-9 * exact);
        let one2 = WeightField::constant(2, 1.0).unwrap();
        assert_relative_eq!(lq_norm(&one2, &o2, r, &spec()).unwrap(), 2.0 * PI * r, max_relative = 1e-12);
        let alpha: f64 = 1.7;
        let c = WeightField::constant(3, alpha * alpha).unwrap();
        assert_relative_eq!(lq_norm(&c, &o3, r, &spec()).unwrap(), exact * alpha * alpha, max_relative = 1e-12);
    }

    #[test]
    fn radial_shortcuts_match_quadrature_off_center_and_on() {
        let s = spec();
        for n in [2, 3] {
            let o = Point::origin(n).unwrap();
            let fields = [
                WeightField::radial_power(n, -1.5).unwrap(),
                WeightField::radial_log_power(n, 2.0).unwrap(),
                WeightField::distortion(&MappingSpec::radial_stretch(n, 2.0).unwrap(), 1).unwrap(),
                WeightField::radial_power(n, 0.5).unwrap().powf(2.0).unwrap(),
            ];
            for q in &fields {
                for r in [0.01, 0.2, 0.6] {
                    let a = spherical_average(q, &o, r, &s).unwrap();
                    let b = spherical_average_quadrature(q, &o, r, &s).unwrap();
                    assert!((a - b).abs() <= s.rel_tol * a.abs() * 10.0, "{q:?} r={r}: {a} vs {b}");
                    let a = lq_norm(q, &o, r, &s).unwrap();
                    let b = lq_norm_quadrature(q, &o, r, &s).unwrap();
                    assert!((a - b).abs() <= s.rel_tol * a.abs() * 10.0, "{q:?} r={r}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn off_center_average_of_radial_power() {
        // Mean of |x|^2 over S(x0, r) is |x0|^2 + r^2.
        let q = WeightField::radial_power(3, 2.0).unwrap();
        let x0 = Point::new(&[0.3, -0.2, 0.5]).unwrap();
        let r = 0.4;
        let v = spherical_average(&q, &x0, r, &spec()).unwrap();
        assert_relative_eq!(v, x0.norm_sqr() + r * r, max_relative = 1e-9);
    }

    #[test]
    fn lower_criterion_examples() {
        let s = spec();
        let o3 = Point::origin(3).unwrap();
        let one3 = WeightField::constant(3, 1.0).unwrap();
        let v = lower_criterion_integral(&one3, &o3, 1.0, E, &s).unwrap();
        assert!((v - (4.0 * PI).powf(-0.5)).abs() <= 1e-9);
        assert_relative_eq!(v, 0.2820948, max_relative = 1e-6);
        let o2 = Point::origin(2).unwrap();
        let one2 = WeightField::constant(2, 1.0).unwrap();
        let v = lower_criterion_integral(&one2, &o2, 1.0, E * E, &s).unwrap();
        assert!((v - 1.0 / PI).abs() <= 1e-9);
        for n in [2, 3] {
            let o = Point::origin(n).unwrap();
            let one = WeightField::constant(n, 1.0).unwrap();
            let omega = unit_sphere_area(n).unwrap();
            for (eps, eps0) in [(0.01, 0.5), (1.0, 30.0)] {
                let v = lower_criterion_integral(&one, &o, eps, eps0, &s).unwrap();
                let exact = omega.powf(-1.0 / (n as f64 - 1.0)) * (eps0 / eps).ln();
                assert_relative_eq!(v, exact, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn lower_criterion_constant_scaling() {
        // Q = c^{n-1} scales the norm by c^{n-1}, hence the integral by c^{1-n}.
        let s = spec();
        let o = Point::origin(3).unwrap();
        let c: f64 = 1.5;
        let base = lower_criterion_integral(&WeightField::constant(3, 1.0).unwrap(), &o, 0.2, 0.9, &s).unwrap();
        let scaled = lower_criterion_integral(&WeightField::constant(3, c * c).unwrap(), &o, 0.2, 0.9, &s).unwrap();
        assert_relative_eq!(scaled, base / (c * c), max_relative = 1e-12);
    }

    #[test]
    fn ring_criterion_examples() {
        let s = spec();
        let o = Point::origin(3).unwrap();
        let (r1, r2) = (0.1, 0.9);
        let one = WeightField::constant(3, 1.0).unwrap();
        assert_relative_eq!(ring_criterion_integral(&one, &o, r1, r2, &s).unwrap(), (r2 / r1).ln(), max_relative = 1e-9);
        let alpha: f64 = 2.0;
        let c = WeightField::constant(3, alpha.powi(4)).unwrap();
        assert_relative_eq!(
            ring_criterion_integral(&c, &o, r1, r2, &s).unwrap(),
            (r2 / r1).ln() / (alpha * alpha),
            max_relative = 1e-9
        );
        let lg = WeightField::radial_log_power(3, 2.0).unwrap();
        let v = ring_criterion_integral(&lg, &o, (-8f64).exp(), (-1f64).exp(), &s).unwrap();
        assert_relative_eq!(v, 8f64.ln(), max_relative = 1e-9);
        assert_relative_eq!(v, 2.0794, max_relative = 1e-4);
    }

    #[test]
    fn criterion_integrals_from_zero() {
        let s = spec();
        let o = Point::origin(3).unwrap();
        assert!(matches!(
            ring_criterion_integral(&WeightField::constant(3, 1.0).unwrap(), &o, 0.0, 0.5, &s),
            Err(Error::Divergent(_))
        ));
        // q = r^{-4}: integrand r / r^... = r^{-1} r^{2} = r, integral 1/8 on (0, 1/2).
        let q = WeightField::radial_power(3, -4.0).unwrap();
        let v = ring_criterion_integral(&q, &o, 0.0, 0.5, &s).unwrap();
        assert_relative_eq!(v, 0.125, max_relative = 1e-6);
        assert!(lower_criterion_integral(&q, &o, 0.3, 0.2, &s).is_err());
    }

    #[test]
    fn fmo_examples() {
        let s = spec();
        let o = Point::origin(3).unwrap();
        let radii: Vec<f64> = (1..=10).map(|k| 2f64.powi(-k)).collect();
        let c = fmo_estimate(&WeightField::constant(3, 2.5).unwrap(), &o, &radii, &s).unwrap();
        assert_eq!(c.verdict, CriterionVerdict::Holds);
        assert!(c.oscillations.iter().all(|&v| v == 0.0));
        let lg = fmo_estimate(&WeightField::radial_log(3).unwrap(), &o, &radii, &s).unwrap();
        assert_eq!(lg.verdict, CriterionVerdict::Holds);
        // Exact value for n = 3: mean |log(1/s) - 1/3| with density 3 s^2.
        let exact = 2.0 / 3.0 * (-1.0f64).exp();
        for v in &lg.oscillations {
            assert_relative_eq!(*v, exact, max_relative = 1e-6);
        }
        let inv = fmo_estimate(&WeightField::radial_power(3, -1.0).unwrap(), &o, &radii, &s).unwrap();
        assert_eq!(inv.verdict, CriterionVerdict::Fails);
        assert!(fmo_estimate(&WeightField::constant(3, 1.0).unwrap(), &o, &radii[..5], &s).is_err());
    }

    #[test]
    fn fmo_log_growth_is_not_bounded() {
        let s = spec();
        let o = Point::origin(2).unwrap();
        let radii: Vec<f64> = (1..=10).map(|k| 2f64.powi(-k)).collect();
        let r = fmo_estimate(&WeightField::radial_log_power(2, 2.0).unwrap(), &o, &radii, &s).unwrap();
        assert_ne!(r.verdict, CriterionVerdict::Holds);
    }

    #[test]
    fn equicontinuity_examples() {
        let s = spec();
        let o = Point::origin(3).unwrap();
        let one = equicontinuity_criteria(&WeightField::constant(3, 1.0).unwrap(), &o, 3, &s).unwrap();
        assert!(one.divergence.is_divergent());
        assert!(one.local_integrability.is_convergent());
        let lg = equicontinuity_criteria(&WeightField::radial_log_power(3, 2.0).unwrap(), &o, 3, &s).unwrap();
        assert_eq!(lg.log_growth.verdict, CriterionVerdict::Holds);
        assert!(lg.log_growth.constant.unwrap() <= 1.0 + 1e-3);
        assert!(lg.divergence.is_divergent());
        let p = equicontinuity_criteria(&WeightField::radial_power(3, -2.0).unwrap(), &o, 3, &s).unwrap();
        assert_eq!(p.log_growth.verdict, CriterionVerdict::Fails);
        assert!(p.divergence.is_convergent());
        assert!(!p.divergence_holds);
        assert!(equicontinuity_criteria(&WeightField::constant(3, 1.0).unwrap(), &o, 2, &s).is_err());
    }

    #[test]
    fn orlicz_examples() {
        let s = spec();
        let cube = orlicz_condition(&OrliczFunction::Power { p: 3.0 }, 3, &s).unwrap();
        assert_relative_eq!(cube.value().unwrap(), 1.0, max_relative = 1e-6);
        assert!(orlicz_condition(&OrliczFunction::Power { p: 2.0 }, 3, &s).unwrap().is_divergent());
        assert!(orlicz_condition(&OrliczFunction::LogPower { p: 2.0, q: 2.0 }, 3, &s).unwrap().is_convergent());
        for (p, conv) in [(1.5, false), (2.0, false), (2.01, true), (2.5, true), (3.0, true)] {
            let v = orlicz_condition(&OrliczFunction::Power { p }, 3, &s).unwrap();
            assert_eq!(v.is_convergent(), conv, "p = {p}: {v:?}");
            if !conv {
                assert!(!v.is_convergent());
            }
        }
        assert!(matches!(orlicz_condition(&OrliczFunction::Power { p: 3.0 }, 2, &s), Err(Error::NotApplicable(_))));
        let decreasing = OrliczFunction::custom(|t| 1.0 / (1.0 + t));
        assert!(orlicz_condition(&decreasing, 3, &s).is_err());
    }

    #[test]
    fn weight_validation_and_serde() {
        assert!(WeightField::constant(3, 0.0).is_err());
        assert!(WeightField::constant(3, -1.0).is_err());
        let q = WeightField::radial_log(2).unwrap();
        assert!(q.value(&Point::new(&[2.0, 0.0]).unwrap()).is_err());
        let q = WeightField::distortion(&MappingSpec::winding(2).unwrap(), 2).unwrap();
        let json = serde_json::to_string(&q).unwrap();
        let back: WeightField = serde_json::from_str(&json).unwrap();
        assert_eq!(back, q);
        assert_relative_eq!(q.value(&Point::new(&[0.3, 0.4]).unwrap()).unwrap(), 4.0, max_relative = 1e-14);
        let k: WeightKind = serde_json::from_str(r#"{"kind":"radial_power","a":-2.0}"#).unwrap();
        assert_eq!(k, WeightKind::RadialPower { a: -2.0 });
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn criterion_integrals_are_antimonotone_in_q(a in -3.0f64..1.0, c in 1.0f64..4.0, r1 in 0.01f64..0.3, w in 0.1f64..0.6) {
            let s = spec();
            let o = Point::origin(3).unwrap();
            let q1 = WeightField::radial_power(3, a).unwrap();
            let q2 = q1.scaled(c).unwrap();
            let r2 = r1 + w;
            let l1 = lower_criterion_integral(&q1, &o, r1, r2, &s).unwrap();
            let l2 = lower_criterion_integral(&q2, &o, r1, r2, &s).unwrap();
            prop_assert!(l1 >= l2);
            let i1 = ring_criterion_integral(&q1, &o, r1, r2, &s).unwrap();
            let i2 = ring_criterion_integral(&q2, &o, r1, r2, &s).unwrap();
            prop_assert!(i1 >= i2);
        }
    }
}
