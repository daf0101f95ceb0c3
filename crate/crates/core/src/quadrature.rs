//! Deterministic quadrature: spheres, radial intervals, rings, and
//! classification of improper integrals.
//!
//! Every rule here is open (no node sits on an interval endpoint or a sphere
//! pole), so integrable point singularities are avoided rather than clamped.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, SphericalRing, MAX_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    pub angular_order: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_subdivisions: 1 << 14,
            angular_order: 64,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::param("tolerance", "rel_tol and abs_tol must be positive"));
        }
        if self.angular_order < 8 {
            return Err(Error::param("angular_order", "must be at least 8"));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::param("max_subdivisions", "must be positive"));
        }
        Ok(())
    }

    fn accept(&self, err: f64, value: f64) -> bool {
        err <= self.abs_tol.max(self.rel_tol * value.abs())
    }
}

// 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_979_106_630,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

fn finite(value: f64, at: impl FnOnce() -> String) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite {
            value,
            location: at(),
        })
    }
}

/// One GK21 panel: (kronrod estimate, |kronrod - gauss|).
fn gk21<F>(g: &mut F, a: f64, b: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut eval = |x: f64| g(x).and_then(|v| finite(v, || format!("r = {x}")));
    let fc = eval(mid)?;
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    for j in 0..10 {
        let dx = half * XGK[j];
        let pair = eval(mid - dx)? + eval(mid + dx)?;
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Ok((kronrod * half, ((kronrod - gauss) * half).abs()))
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err
            .total_cmp(&other.err)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Globally adaptive GK21 over a finite interval with a fallible integrand.
pub fn try_integrate_radial<F>(mut g: F, r1: f64, r2: f64, spec: &QuadratureSpec) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(r1.is_finite() && r2.is_finite()) {
        return Err(Error::param("interval", "radial bounds must be finite"));
    }
    if r1 >= r2 {
        return Err(Error::param("interval", format!("need r1 < r2, got ({r1}, {r2})")));
    }
    let (value, err) = gk21(&mut g, r1, r2)?;
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a: r1, b: r2, value, err });
    let mut total = value;
    let mut total_err = err;
    let mut splits = 0usize;
    let mut settled = Vec::new();

    while !spec.accept(total_err, total) {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        // Panels at the resolution limit cannot be split further.
        if mid <= worst.a || mid >= worst.b {
            settled.push(worst);
            if heap.is_empty() {
                break;
            }
            continue;
        }
        if splits >= spec.max_subdivisions {
            return Err(Error::NonConvergence(format!(
                "radial integral on ({r1}, {r2}) after {splits} subdivisions, error estimate {total_err:e}"
            )));
        }
        splits += 1;
        let (lv, le) = gk21(&mut g, worst.a, mid)?;
        let (rv, re) = gk21(&mut g, mid, worst.b)?;
        total += lv + rv - worst.value;
        total_err += le + re - worst.err;
        heap.push(Panel { a: worst.a, b: mid, value: lv, err: le });
        heap.push(Panel { a: mid, b: worst.b, value: rv, err: re });
    }

    // Reduce in a fixed left-to-right order.
    settled.extend(heap.into_vec());
    settled.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value: f64 = settled.iter().map(|p| p.value).sum();
    let err: f64 = settled.iter().map(|p| p.err).sum();
    if !spec.accept(err, value) && err > 1e3 * f64::EPSILON * value.abs().max(1.0) {
        return Err(Error::NonConvergence(format!(
            "radial integral on ({r1}, {r2}) stalled at error estimate {err:e}"
        )));
    }
    Ok(value)
}

/// Adaptive integral of `g` over (r1, r2).
pub fn integrate_radial<G>(g: G, r1: f64, r2: f64, spec: &QuadratureSpec) -> Result<f64>
where
    G: Fn(f64) -> f64,
{
    try_integrate_radial(|r| Ok(g(r)), r1, r2, spec)
}

fn sphere_rule<F>(f: &mut F, center: &Point, r: f64, order: usize) -> Result<f64>
where
    F: FnMut(&Point) -> Result<f64>,
{
    let c = center.raw();
    let dim = center.dim();
    let mut node = |coords: [f64; MAX_DIM]| -> Result<f64> {
        let x = Point::from_array(coords, dim);
        f(&x).and_then(|v| finite(v, || format!("x = {x}")))
    };
    match dim {
        2 => {
            let h = 2.0 * PI / order as f64;
            let mut sum = 0.0;
            for j in 0..order {
                let t = (j as f64 + 0.5) * h;
                sum += node([c[0] + r * t.cos(), c[1] + r * t.sin(), 0.0])?;
            }
            Ok(sum * h * r)
        }
        _ => {
            let gl = GaussLegendre::new(NonZeroUsize::new(order).expect("order is positive"));
            let m_phi = 2 * order;
            let h = 2.0 * PI / m_phi as f64;
            let mut total = 0.0;
            for &(z, w) in gl.as_node_weight_pairs() {
                let s = (1.0 - z * z).sqrt();
                let mut ring_sum = 0.0;
                for j in 0..m_phi {
                    let phi = (j as f64 + 0.5) * h;
                    ring_sum += node([
                        c[0] + r * s * phi.cos(),
                        c[1] + r * s * phi.sin(),
                        c[2] + r * z,
                    ])?;
                }
                total += w * ring_sum;
            }
            Ok(total * h * r * r)
        }
    }
}

/// Surface integral over S(center, r) with respect to H^{n-1}, fallible integrand.
///
/// n = 2 uses the offset periodic trapezoid rule; n = 3 uses Gauss-Legendre in
/// cos(theta) times the periodic rule in phi. The order doubles until two
/// successive rules agree.
pub fn try_integrate_sphere<F>(mut f: F, center: &Point, r: f64, spec: &QuadratureSpec) -> Result<f64>
where
    F: FnMut(&Point) -> Result<f64>,
{
    spec.validate()?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::param("radius", format!("sphere radius must be positive, got {r}")));
    }
    let max_order = match center.dim() {
        2 => spec.angular_order << 8,
        _ => spec.angular_order << 3,
    };
    let mut order = spec.angular_order;
    let mut coarse = sphere_rule(&mut f, center, r, order / 2)?;
    loop {
        let fine = sphere_rule(&mut f, center, r, order)?;
        if spec.accept((fine - coarse).abs(), fine) {
            return Ok(fine);
        }
        if order >= max_order {
            return Err(Error::NonConvergence(format!(
                "sphere integral on S({center}, {r}) at angular order {order}, difference {:e}",
                (fine - coarse).abs()
            )));
        }
        coarse = fine;
        order *= 2;
    }
}

pub fn integrate_sphere<F>(f: F, center: &Point, r: f64, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(&Point) -> f64,
{
    try_integrate_sphere(|x| Ok(f(x)), center, r, spec)
}

/// Volume integral over a ring as an iterated radius/sphere integral.
pub fn try_integrate_ring<F>(f: F, ring: &SphericalRing, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(&Point) -> Result<f64>,
{
    let center = ring.center();
    try_integrate_radial(
        |r| try_integrate_sphere(&f, &center, r, spec),
        ring.r_inner(),
        ring.r_outer(),
        spec,
    )
}

pub fn integrate_ring<F>(f: F, ring: &SphericalRing, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(&Point) -> f64,
{
    try_integrate_ring(|x| Ok(f(x)), ring, spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum DivergenceKind {
    Convergent { value: f64 },
    Divergent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceVerdict {
    pub kind: DivergenceKind,
    /// Local exponent p of g(t) ~ c t^p in the distance to the singular end
    /// (or in t itself at infinity).
    pub fitted_exponent: Option<f64>,
    /// Exponents on the successive logarithmic scales used for the decision.
    pub scale_exponents: Vec<f64>,
    /// Depth u of the deepest probe in the exponential substitution.
    pub probe_depth: Option<f64>,
}

impl DivergenceVerdict {
    pub fn is_convergent(&self) -> bool {
        matches!(self.kind, DivergenceKind::Convergent { .. })
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self.kind, DivergenceKind::Divergent)
    }

    pub fn value(&self) -> Option<f64> {
        match self.kind {
            DivergenceKind::Convergent { value } => Some(value),
            _ => None,
        }
    }
}

/// Half-width of the band around -1 inside which a scale exponent decides nothing.
pub const GUARD_BAND: f64 = 0.05;
const PROBE_DEPTHS: [f64; 8] = [640.0, 320.0, 160.0, 80.0, 60.0, 40.0, 32.0, 24.0];
const SCALE_LEVELS: usize = 3;

/// Maps the singular end onto u -> infinity: t = t(u), dt = jac(u) du.
struct EndpointMap {
    end: Endpoint,
    a: f64,
    b: f64,
}

impl EndpointMap {
    fn t(&self, u: f64) -> f64 {
        match (self.end, self.b.is_finite()) {
            (Endpoint::Lower, _) => self.a + (self.b - self.a) * (-u).exp(),
            (Endpoint::Upper, true) => self.b - (self.b - self.a) * (-u).exp(),
            (Endpoint::Upper, false) => self.a + u.exp_m1(),
        }
    }

    fn ln_jac(&self, u: f64) -> f64 {
        if self.b.is_finite() {
            (self.b - self.a).ln() - u
        } else {
            u
        }
    }

    /// ln of the distance to the singular end (ln t at infinity).
    fn ln_scale(&self, u: f64) -> f64 {
        self.ln_jac(u)
    }

    fn resolvable(&self, u: f64) -> bool {
        let t = self.t(u);
        if !t.is_finite() {
            return false;
        }
        match (self.end, self.b.is_finite()) {
            (Endpoint::Lower, _) => t != self.a && (t - self.a) > 8.0 * f64::EPSILON * self.a.abs(),
            (Endpoint::Upper, true) => t != self.b && (self.b - t) > 8.0 * f64::EPSILON * self.b.abs(),
            (Endpoint::Upper, false) => true,
        }
    }
}

fn ln_abs_integrand<G: Fn(f64) -> f64>(g: &G, map: &EndpointMap, u: f64) -> Option<f64> {
    if !map.resolvable(u) {
        return None;
    }
    let v = g(map.t(u));
    (v.is_finite() && v > 0.0).then(|| v.ln() + map.ln_jac(u))
}

/// Iterated logarithm ln^k(u), k = 0 is u itself.
fn iter_ln(u: f64, k: usize) -> f64 {
    (0..k).fold(u, |acc, _| acc.ln())
}

/// Decides convergence of the improper integral of a positive `g` over
/// `window` at its singular end.
///
/// The singular end is sent to u -> infinity by an exponential substitution.
/// The decision is made from the local power exponent of the transformed
/// integrand on a ladder of logarithmic scales: u, ln u, ln ln u. A power
/// t^p turns into an exponential in u, which separates sharply from the
/// critical exponent -1; logarithmic corrections such as 1/(t ln(1/t)) are
/// settled on the next rungs. Exponents within [`GUARD_BAND`] of -1 on every
/// rung give an inconclusive verdict.
pub fn classify_improper<G>(
    g: G,
    singular_end: Endpoint,
    window: (f64, f64),
    spec: &QuadratureSpec,
) -> DivergenceVerdict
where
    G: Fn(f64) -> f64,
{
    let (a, b) = window;
    let inconclusive = DivergenceVerdict {
        kind: DivergenceKind::Inconclusive,
        fitted_exponent: None,
        scale_exponents: Vec::new(),
        probe_depth: None,
    };
    if a.is_nan() || b.is_nan() || a >= b || !a.is_finite() {
        return inconclusive;
    }
    if singular_end == Endpoint::Lower && !b.is_finite() {
        return inconclusive;
    }
    let map = EndpointMap { end: singular_end, a, b };

    let probe = PROBE_DEPTHS.iter().find_map(|&depth| {
        let deep = ln_abs_integrand(&g, &map, depth)?;
        let mid = ln_abs_integrand(&g, &map, 0.5 * depth)?;
        let near = ln_abs_integrand(&g, &map, 0.75 * depth)?;
        Some((depth, mid, near, deep))
    });
    let Some((depth, ln_g_mid, ln_g_near, ln_g_deep)) = probe else {
        return inconclusive;
    };
    let (u0, u1) = (0.5 * depth, depth);

    let ln_t_part = |ln_big_g: f64, u: f64| ln_big_g - map.ln_jac(u);
    let fitted = (ln_t_part(ln_g_deep, u1) - ln_t_part(ln_g_mid, u0))
        / (map.ln_scale(u1) - map.ln_scale(u0));

    // Rung k: d(ln G + sum_{j<k} ln^{j+1} u) / d ln^{k+1} u, as a secant.
    let mut scale_exponents = Vec::with_capacity(SCALE_LEVELS);
    let mut numerator = ln_g_deep - ln_g_mid;
    let mut kind = DivergenceKind::Inconclusive;
    for k in 1..=SCALE_LEVELS {
        let denom = iter_ln(u1, k) - iter_ln(u0, k);
        if !(iter_ln(u0, k) > 0.0) || !(denom > 0.0) {
            break;
        }
        let exponent = numerator / denom;
        scale_exponents.push(exponent);
        if exponent < -1.0 - GUARD_BAND {
            kind = DivergenceKind::Convergent { value: f64::NAN };
            break;
        }
        if exponent > -1.0 + GUARD_BAND {
            kind = DivergenceKind::Divergent;
            break;
        }
        numerator += denom;
    }

    if let DivergenceKind::Convergent { .. } = kind {
        match convergent_value(&g, &map, depth, [ln_g_mid, ln_g_near, ln_g_deep], spec) {
            Some(value) => kind = DivergenceKind::Convergent { value },
            None => kind = DivergenceKind::Inconclusive,
        }
    }

    DivergenceVerdict {
        kind,
        fitted_exponent: fitted.is_finite().then_some(fitted),
        scale_exponents,
        probe_depth: Some(depth),
    }
}

/// Integral over the window once convergence is known: the transformed
/// integrand up to the probe depth plus a modelled tail beyond it.
fn convergent_value<G: Fn(f64) -> f64>(
    g: &G,
    map: &EndpointMap,
    depth: f64,
    ln_g: [f64; 3],
    spec: &QuadratureSpec,
) -> Option<f64> {
    let body = try_integrate_radial(
        |u| match ln_abs_integrand(g, map, u) {
            Some(l) => Ok(l.exp()),
            None if u > 0.5 * depth => Ok(g(map.t(u)).max(0.0) * map.ln_jac(u).exp()),
            None => Err(Error::NonFinite {
                value: g(map.t(u)),
                location: format!("t = {}", map.t(u)),
            }),
        },
        0.0,
        depth,
        spec,
    )
    .ok()?;

    // ln G(u) ~ c0 + c1 u + c2 ln u through the three probes.
    let us = [0.5 * depth, 0.75 * depth, depth];
    let rows: Vec<[f64; 3]> = us.iter().map(|&u| [1.0, u, u.ln()]).collect();
    let coeffs = solve3(&rows, &ln_g);
    let tail = match coeffs {
        // Exponential decay dominates over the probe range.
        Some([c0, c1, c2]) if c1 < 0.0 && c1 * depth < -1.0 => integrate_radial(
            |w| {
                // u = depth + w / (1 - w), w in (0, 1)
                let u = depth + w / (1.0 - w);
                (c0 + c1 * u + c2 * u.ln()).exp() / ((1.0 - w) * (1.0 - w))
            },
            0.0,
            1.0,
            spec,
        )
        .ok(),
        // Power-like: G ~ G(depth) (u / depth)^m with the local exponent m.
        _ => {
            let m = (ln_g[2] - ln_g[1]) / (us[2] / us[1]).ln();
            (m < -1.0).then(|| ln_g[2].exp() * depth / (-m - 1.0))
        }
    };
    let tail = tail.unwrap_or(0.0);
    let value = body + tail;
    value.is_finite().then_some(value)
}

fn solve3(rows: &[[f64; 3]], rhs: &[f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let m = [rows[0], rows[1], rows[2]];
    let d = det(m);
    if d.abs() < 1e-300 {
        return None;
    }
    let mut out = [0.0; 3];
    for (col, slot) in out.iter_mut().enumerate() {
        let mut mc = m;
        for (row, &r) in rhs.iter().enumerate() {
            mc[row][col] = r;
        }
        *slot = det(mc) / d;
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::E;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn kronrod_tables_integrate_polynomials_exactly() {
        // Gauss 10 is exact to degree 19, Kronrod 21 to degree 31.
        for deg in 0..=31 {
            let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
            let mut f = |x: f64| Ok(x.powi(deg));
            let (k, diff) = gk21(&mut f, -1.0, 1.0).unwrap();
            assert!((k - exact).abs() < 1e-14, "degree {deg}: {k} vs {exact}");
            if deg <= 19 {
                assert!(diff < 1e-14, "gauss part inexact at degree {deg}");
            }
        }
    }

    #[test]
    fn radial_examples() {
        assert_relative_eq!(integrate_radial(|r| 1.0 / r, 1.0, E, &spec()).unwrap(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(integrate_radial(|_| 1.0, 0.0, 1.0, &spec()).unwrap(), 1.0, max_relative = 1e-14);
        // Endpoint singularity, antiderivative 2 sqrt(r).
        let v = integrate_radial(|r| r.powf(-0.5), 0.0, 1.0, &spec()).unwrap();
        assert_relative_eq!(v, 2.0, max_relative = 1e-9);
    }

    #[test]
    fn radial_errors() {
        assert!(matches!(
            integrate_radial(|_| f64::NAN, 0.0, 1.0, &spec()),
            Err(Error::NonFinite { .. })
        ));
        assert!(integrate_radial(|r| r, 1.0, 0.5, &spec()).is_err());
        // Non-integrable endpoint blow-up never settles.
        let tight = QuadratureSpec { max_subdivisions: 64, ..spec() };
        assert!(matches!(
            integrate_radial(|r| 1.0 / r, 0.0, 1.0, &tight),
            Err(Error::NonConvergence(_))
        ));
    }

    #[test]
    fn halving_rel_tol_moves_value_within_prior_tolerance() {
        let g = |r: f64| r.powf(-0.5) + (3.0 * r).sin();
        let mut s = QuadratureSpec { rel_tol: 1e-4, ..spec() };
        let mut prev = integrate_radial(g, 0.0, 1.0, &s).unwrap();
        for _ in 0..8 {
            let prior = s.rel_tol;
            s.rel_tol *= 0.5;
            let next = integrate_radial(g, 0.0, 1.0, &s).unwrap();
            assert!((next - prev).abs() <= prior * prev.abs());
            prev = next;
        }
    }

    #[test]
    fn sphere_examples() {
        let o3 = Point::origin(3).unwrap();
        assert_relative_eq!(integrate_sphere(|_| 1.0, &o3, 2.0, &spec()).unwrap(), 16.0 * PI, max_relative = 1e-13);
        assert_relative_eq!(
            integrate_sphere(|x| x.norm().powi(2), &o3, 1.0, &spec()).unwrap(),
            4.0 * PI,
            max_relative = 1e-13
        );
        let x1sq = integrate_sphere(|x| x.get(0).powi(2), &o3, 1.0, &spec()).unwrap();
        assert_relative_eq!(x1sq, 4.0 * PI / 3.0, max_relative = 1e-12);
        let o2 = Point::origin(2).unwrap();
        assert_relative_eq!(integrate_sphere(|_| 1.0, &o2, 3.0, &spec()).unwrap(), 6.0 * PI, max_relative = 1e-13);
    }

    #[test]
    fn sphere_rule_symmetry_refinement_study() {
        // Coordinate squares share the total |x|^2 equally at every order.
        let o3 = Point::origin(3).unwrap();
        for order in [8, 16, 32] {
            let s = QuadratureSpec { angular_order: order, ..spec() };
            let parts: Vec<f64> = (0..3)
                .map(|i| integrate_sphere(|x| x.get(i).powi(2), &o3, 1.0, &s).unwrap())
                .collect();
            for p in &parts {
                assert_relative_eq!(*p, 4.0 * PI / 3.0, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn spherical_harmonics_up_to_degree_six() {
        // Monomials x^a y^b z^c with a + b + c <= 6 over S^2: closed form
        // 2 Gamma((a+1)/2) Gamma((b+1)/2) Gamma((c+1)/2) / Gamma((a+b+c+3)/2) for even a, b, c.
        fn gamma_half(k: u32) -> f64 {
            // Gamma(k / 2)
            if k.is_multiple_of(2) {
                (1..k / 2).map(|j| j as f64).product()
            } else {
                let mut g = PI.sqrt();
                let mut x = 0.5;
                while x < k as f64 / 2.0 - 0.25 {
                    g *= x;
                    x += 1.0;
                }
                g
            }
        }
        let o3 = Point::origin(3).unwrap();
        let s = QuadratureSpec { angular_order: 8, ..spec() };
        for a in 0..=6u32 {
            for b in 0..=(6 - a) {
                for c in 0..=(6 - a - b) {
                    let num = integrate_sphere(
                        |x| x.get(0).powi(a as i32) * x.get(1).powi(b as i32) * x.get(2).powi(c as i32),
                        &o3,
                        1.0,
                        &s,
                    )
                    .unwrap();
                    let exact = if a % 2 == 0 && b % 2 == 0 && c % 2 == 0 {
                        2.0 * gamma_half(a + 1) * gamma_half(b + 1) * gamma_half(c + 1) / gamma_half(a + b + c + 3)
                    } else {
                        0.0
                    };
                    assert!((num - exact).abs() < 1e-13, "x^{a} y^{b} z^{c}: {num} vs {exact}");
                }
            }
        }
        let o2 = Point::origin(2).unwrap();
        for k in 1..=6 {
            let v = integrate_sphere(|x| (k as f64 * x.get(1).atan2(x.get(0))).cos(), &o2, 1.0, &s).unwrap();
            assert!(v.abs() < 1e-13);
        }
    }

    #[test]
    fn sphere_integral_detects_non_finite_nodes() {
        let o2 = Point::origin(2).unwrap();
        let err = integrate_sphere(|_| f64::INFINITY, &o2, 1.0, &spec()).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
        assert!(integrate_sphere(|_| 1.0, &o2, 0.0, &spec()).is_err());
    }

    #[test]
    fn ring_examples() {
        let ring = SphericalRing::centered(3, 1.0, 2.0).unwrap();
        let vol = integrate_ring(|_| 1.0, &ring, &spec()).unwrap();
        assert_relative_eq!(vol, 28.0 * PI / 3.0, max_relative = 1e-12);
        assert_relative_eq!(vol, crate::geometry::ring_volume(&ring), max_relative = 1e-9);
        assert_relative_eq!(integrate_ring(|x| 1.0 / x.norm(), &ring, &spec()).unwrap(), 6.0 * PI, max_relative = 1e-12);
        assert_relative_eq!(
            integrate_ring(|x| x.norm().powi(-3), &ring, &spec()).unwrap(),
            4.0 * PI * 2f64.ln(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn classify_examples() {
        let s = spec();
        assert!(classify_improper(|t| 1.0 / t, Endpoint::Lower, (0.0, 1.0), &s).is_divergent());
        let v = classify_improper(|t| t.powf(-0.5), Endpoint::Lower, (0.0, 1.0), &s);
        assert_relative_eq!(v.value().unwrap(), 2.0, max_relative = 1e-8);
        assert_relative_eq!(v.fitted_exponent.unwrap(), -0.5, max_relative = 1e-9);
        let v = classify_improper(|t| t.powi(-2), Endpoint::Upper, (1.0, f64::INFINITY), &s);
        assert_relative_eq!(v.value().unwrap(), 1.0, max_relative = 1e-8);
        assert_relative_eq!(v.fitted_exponent.unwrap(), -2.0, max_relative = 1e-6);
    }

    #[test]
    fn classify_logarithmic_borderline_cases() {
        let s = spec();
        // Divergent like ln ln(1/t).
        let v = classify_improper(|t| 1.0 / (t * (1.0 / t).ln()), Endpoint::Lower, (0.0, 0.5), &s);
        assert!(v.is_divergent(), "{v:?}");
        // Convergent, antiderivative 1 / ln(1/t).
        let v = classify_improper(|t| 1.0 / (t * (1.0 / t).ln().powi(2)), Endpoint::Lower, (0.0, 0.5), &s);
        assert_relative_eq!(v.value().unwrap(), 1.0 / 2f64.ln(), max_relative = 1e-5);
        // Barely convergent power at infinity, p = -1.01.
        let v = classify_improper(|t| t.powf(-1.01), Endpoint::Upper, (1.0, f64::INFINITY), &s);
        assert!(v.is_convergent(), "{v:?}");
        assert_relative_eq!(v.value().unwrap(), 100.0, max_relative = 1e-3);
        let v = classify_improper(|t| t.powf(-0.99), Endpoint::Upper, (1.0, f64::INFINITY), &s);
        assert!(v.is_divergent());
    }

    #[test]
    fn classify_singular_upper_finite_end() {
        let v = classify_improper(|t| (1.0 - t).powf(-0.5), Endpoint::Upper, (0.0, 1.0), &spec());
        assert_relative_eq!(v.value().unwrap(), 2.0, max_relative = 1e-8);
        let v = classify_improper(|t| 1.0 / (1.0 - t), Endpoint::Upper, (0.0, 1.0), &spec());
        assert!(v.is_divergent());
    }

    #[test]
    fn classify_degenerate_inputs_are_inconclusive() {
        let s = spec();
        assert_eq!(classify_improper(|t| t, Endpoint::Lower, (1.0, 0.0), &s).kind, DivergenceKind::Inconclusive);
        assert_eq!(classify_improper(|_| f64::NAN, Endpoint::Lower, (0.0, 1.0), &s).kind, DivergenceKind::Inconclusive);
        assert_eq!(
            classify_improper(|t| t, Endpoint::Lower, (0.0, f64::INFINITY), &s).kind,
            DivergenceKind::Inconclusive
        );
    }
}
