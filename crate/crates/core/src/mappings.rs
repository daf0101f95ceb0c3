//! Closed-form test mappings with exact Jacobians and distortion.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_dim, Point, Sphere, SphericalRing};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MappingKind {
    Identity,
    /// x -> A x
    Linear { matrix: Matrix },
    /// x -> c + (x - c) |x - c|^(alpha - 1)
    RadialStretch { alpha: f64 },
    /// r e^{i theta} -> r e^{i k theta} about the center
    #[serde(rename = "winding_2d")]
    Winding2d { k: u32 },
    /// z -> z + mu conj(z) about the center
    #[serde(rename = "beltrami_const_2d")]
    BeltramiConst2d { mu: [f64; 2] },
    /// x -> c + (x - c) / |x - c|^2
    Inversion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingSpec {
    kind: MappingKind,
    center: Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionSample {
    pub point: Point,
    pub op_norm: f64,
    pub jacobian_det: f64,
    /// K_f in [1, inf]; `None` encodes inf in serialised form.
    pub kf: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dilatation {
    pub mu: Complex64,
    /// (1 + |mu|) / (1 - |mu|), infinite when |mu| >= 1.
    pub k_mu: f64,
}

/// Where a mapping is considered for multiplicity counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Ring(SphericalRing),
    /// Open ball; the mapping center is removed when the formula is singular there.
    Ball { center: Point, radius: f64 },
}

impl Region {
    fn center(&self) -> Point {
        match self {
            Region::Ring(r) => r.center(),
            Region::Ball { center, .. } => *center,
        }
    }

    fn radii(&self) -> (f64, f64) {
        match self {
            Region::Ring(r) => (r.r_inner(), r.r_outer()),
            Region::Ball { radius, .. } => (0.0, *radius),
        }
    }

    fn contains(&self, x: &Point) -> bool {
        let (lo, hi) = self.radii();
        let r = x.distance(&self.center());
        r > lo && r < hi
    }
}

impl MappingSpec {
    pub fn new(kind: MappingKind, center: Point) -> Result<Self> {
        let n = center.dim();
        match &kind {
            MappingKind::Linear { matrix } => {
                if matrix.dim() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: matrix.dim() });
                }
                if matrix.det() == 0.0 {
                    return Err(Error::param("matrix", "linear mapping must be nonsingular"));
                }
            }
            MappingKind::RadialStretch { alpha } => {
                if !(*alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::param("alpha", format!("stretch exponent must be positive, got {alpha}")));
                }
            }
            MappingKind::Winding2d { k } => {
                if n != 2 {
                    return Err(Error::DimensionMismatch { expected: 2, got: n });
                }
                if *k == 0 {
                    return Err(Error::param("k", "winding number must be at least 1"));
                }
            }
            MappingKind::BeltramiConst2d { mu } => {
                if n != 2 {
                    return Err(Error::DimensionMismatch { expected: 2, got: n });
                }
                if !(mu[0].hypot(mu[1]) < 1.0) {
                    return Err(Error::param("mu", "constant dilatation needs |mu| < 1"));
                }
            }
            MappingKind::Identity | MappingKind::Inversion => {}
        }
        Ok(Self { kind, center })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(MappingKind::Identity, Point::origin(n)?)
    }

    pub fn radial_stretch(n: usize, alpha: f64) -> Result<Self> {
        Self::new(MappingKind::RadialStretch { alpha }, Point::origin(n)?)
    }

    pub fn winding(k: u32) -> Result<Self> {
        Self::new(MappingKind::Winding2d { k }, Point::origin(2)?)
    }

    pub fn beltrami(mu: Complex64) -> Result<Self> {
        Self::new(MappingKind::BeltramiConst2d { mu: [mu.re, mu.im] }, Point::origin(2)?)
    }

    pub fn inversion(n: usize) -> Result<Self> {
        Self::new(MappingKind::Inversion, Point::origin(n)?)
    }

    pub fn linear(rows: &[Vec<f64>]) -> Result<Self> {
        let matrix = Matrix::from_rows(rows).ok_or_else(|| Error::param("matrix", "must be square, 2x2 or 3x3"))?;
        check_dim(matrix.dim())?;
        Self::new(MappingKind::Linear { matrix }, Point::origin(matrix.dim())?)
    }

    pub fn kind(&self) -> &MappingKind {
        &self.kind
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn label(&self) -> String {
        match &self.kind {
            MappingKind::Identity => "identity".into(),
            MappingKind::Linear { matrix } => format!("linear{matrix:?}"),
            MappingKind::RadialStretch { alpha } => format!("radial_stretch(alpha={alpha})"),
            MappingKind::Winding2d { k } => format!("winding_2d(k={k})"),
            MappingKind::BeltramiConst2d { mu } => format!("beltrami_const_2d(mu={}+{}i)", mu[0], mu[1]),
            MappingKind::Inversion => "inversion".into(),
        }
    }

    fn singular_at_center(&self) -> bool {
        matches!(
            self.kind,
            MappingKind::RadialStretch { .. } | MappingKind::Winding2d { .. } | MappingKind::Inversion
        )
    }

    fn check_point(&self, x: &Point) -> Result<Point> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.dim() });
        }
        let y = *x - self.center;
        if self.singular_at_center() && y.norm() == 0.0 {
            return Err(Error::SingularPoint(format!("{x}")));
        }
        Ok(y)
    }

    pub fn apply(&self, x: &Point) -> Result<Point> {
        let y = self.check_point(x)?;
        let c = self.center;
        Ok(match &self.kind {
            MappingKind::Identity => *x,
            MappingKind::Linear { matrix } => matrix.apply(x),
            MappingKind::RadialStretch { alpha } => c + y * y.norm().powf(alpha - 1.0),
            MappingKind::Winding2d { k } => {
                let r = y.norm();
                let theta = y.get(1).atan2(y.get(0)) * *k as f64;
                c + Point::new(&[r * theta.cos(), r * theta.sin()])?
            }
            MappingKind::BeltramiConst2d { mu } => {
                let z = Complex64::new(y.get(0), y.get(1));
                let w = z + Complex64::new(mu[0], mu[1]) * z.conj();
                c + Point::new(&[w.re, w.im])?
            }
            MappingKind::Inversion => c + y * (1.0 / y.norm_sqr()),
        })
    }

    /// Exact derivative matrix f'(x), rows indexed by output coordinate.
    pub fn jacobian_matrix(&self, x: &Point) -> Result<Matrix> {
        let y = self.check_point(x)?;
        let n = self.dim();
        Ok(match &self.kind {
            MappingKind::Identity => Matrix::identity(n),
            MappingKind::Linear { matrix } => *matrix,
            MappingKind::RadialStretch { alpha } => {
                let r = y.norm();
                let u = y * (1.0 / r);
                Matrix::identity(n)
                    .add(&Matrix::outer(&u, &u).scale(alpha - 1.0))
                    .scale(r.powf(alpha - 1.0))
            }
            MappingKind::Winding2d { k } => {
                let theta = y.get(1).atan2(y.get(0));
                let kt = *k as f64 * theta;
                let radial = Point::new(&[theta.cos(), theta.sin()])?;
                let tangential = Point::new(&[-theta.sin(), theta.cos()])?;
                let radial_img = Point::new(&[kt.cos(), kt.sin()])?;
                let tangential_img = Point::new(&[-kt.sin(), kt.cos()])?;
                Matrix::outer(&radial_img, &radial).add(&Matrix::outer(&tangential_img, &tangential).scale(*k as f64))
            }
            MappingKind::BeltramiConst2d { mu } => {
                Matrix::from_rows(&[vec![1.0 + mu[0], mu[1]], vec![mu[1], 1.0 - mu[0]]]).expect("2x2")
            }
            MappingKind::Inversion => {
                let r2 = y.norm_sqr();
                let u = y * (1.0 / r2.sqrt());
                Matrix::identity(n).add(&Matrix::outer(&u, &u).scale(-2.0)).scale(1.0 / r2)
            }
        })
    }

    pub fn jacobian_det(&self, x: &Point) -> Result<f64> {
        Ok(self.jacobian_matrix(x)?.det())
    }

    /// Largest singular value of f'(x).
    pub fn operator_norm(&self, x: &Point) -> Result<f64> {
        Ok(self.jacobian_matrix(x)?.operator_norm())
    }

    /// Outer distortion ||f'||^n / |J_f|, with K_f = 1 where f' = 0 and
    /// K_f = inf where J_f = 0 otherwise.
    pub fn distortion_kf(&self, x: &Point) -> Result<f64> {
        Ok(kf_of(&self.jacobian_matrix(x)?))
    }

    pub fn distortion_sample(&self, x: &Point) -> Result<DistortionSample> {
        let m = self.jacobian_matrix(x)?;
        let kf = kf_of(&m);
        Ok(DistortionSample {
            point: *x,
            op_norm: m.operator_norm(),
            jacobian_det: m.det(),
            kf: kf.is_finite().then_some(kf),
        })
    }

    /// Complex dilatation mu = f_zbar / f_z (0 where f_z = 0) and
    /// K_mu = (1 + |mu|) / (1 - |mu|).
    pub fn complex_dilatation(&self, z: &Point) -> Result<Dilatation> {
        if self.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: self.dim() });
        }
        let m = self.jacobian_matrix(z)?;
        let (a, b, c, d) = (m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1));
        let f_z = Complex64::new(0.5 * (a + d), 0.5 * (c - b));
        let f_zbar = Complex64::new(0.5 * (a - d), 0.5 * (c + b));
        // f_z vanishes (up to rounding) for anticonformal maps such as planar inversion.
        let mu = if f_z.norm() <= 1e-14 * f_zbar.norm() { Complex64::new(0.0, 0.0) } else { f_zbar / f_z };
        Ok(Dilatation { mu, k_mu: k_mu_of(mu.norm()) })
    }

    /// N(f, D) as known from the formula.
    pub fn declared_multiplicity(&self) -> u32 {
        match self.kind {
            MappingKind::Winding2d { k } => k,
            _ => 1,
        }
    }

    /// Declared multiplicity, confirmed by counting Newton preimages of
    /// seeded targets inside `region`.
    pub fn multiplicity(&self, region: &Region, seed: u64) -> Result<u32> {
        let declared = self.declared_multiplicity();
        let counted = count_multiplicity(self, region, seed, 12)?;
        if counted != declared {
            return Err(Error::MultiplicityMismatch { declared, counted });
        }
        Ok(declared)
    }

    /// Image of S(x0, r) for the sphere-preserving members of the zoo.
    pub fn image_sphere(&self, x0: &Point, r: f64) -> Result<Sphere> {
        if !(r > 0.0) {
            return Err(Error::param("radius", "sphere radius must be positive"));
        }
        let centered = x0.dim() == self.dim() && x0.distance(&self.center) <= 1e-14 * (1.0 + self.center.norm());
        let not_preserving = || Error::NotSpherePreserving(self.label());
        match &self.kind {
            MappingKind::Identity => Ok(Sphere { center: *x0, radius: r }),
            MappingKind::Linear { matrix } => {
                let gram = matrix.transpose().mul(matrix);
                let s2 = gram.trace() / self.dim() as f64;
                let conformal = gram.add(&Matrix::identity(self.dim()).scale(-s2)).max_abs() <= 1e-12 * s2;
                if !conformal {
                    return Err(not_preserving());
                }
                Ok(Sphere { center: matrix.apply(x0), radius: s2.sqrt() * r })
            }
            MappingKind::RadialStretch { alpha } if centered => Ok(Sphere { center: self.center, radius: r.powf(*alpha) }),
            MappingKind::Winding2d { .. } if centered => Ok(Sphere { center: self.center, radius: r }),
            MappingKind::Inversion if centered => Ok(Sphere { center: self.center, radius: 1.0 / r }),
            MappingKind::BeltramiConst2d { mu } if mu[0] == 0.0 && mu[1] == 0.0 => {
                Ok(Sphere { center: self.apply(x0)?, radius: r })
            }
            _ => Err(not_preserving()),
        }
    }

    /// Ring bounded by the images of S(x0, r1) and S(x0, r2).
    pub fn image_ring(&self, x0: &Point, r1: f64, r2: f64) -> Result<SphericalRing> {
        let a = self.image_sphere(x0, r1)?;
        let b = self.image_sphere(x0, r2)?;
        if a.center.distance(&b.center) > 1e-12 * (1.0 + a.center.norm()) {
            return Err(Error::NotSpherePreserving(self.label()));
        }
        SphericalRing::new(a.center, a.radius.min(b.radius), a.radius.max(b.radius))
    }
}

fn kf_of(m: &Matrix) -> f64 {
    if m.is_zero() {
        return 1.0;
    }
    let j = m.det().abs();
    if j == 0.0 {
        return f64::INFINITY;
    }
    m.operator_norm().powi(m.dim() as i32) / j
}

/// K_mu for a given |mu|.
pub fn k_mu_of(abs_mu: f64) -> f64 {
    if abs_mu >= 1.0 {
        f64::INFINITY
    } else {
        (1.0 + abs_mu) / (1.0 - abs_mu)
    }
}

/// Central-difference Jacobian with step h = 1e-6 max(1, |x|).
pub fn fd_jacobian(f: &MappingSpec, x: &Point) -> Result<Matrix> {
    let n = f.dim();
    let h = 1e-6 * x.norm().max(1.0);
    let mut out = Matrix::zeros(n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = h;
        let step = Point::new(&e)?;
        let plus = f.apply(&(*x + step))?;
        let minus = f.apply(&(*x - step))?;
        for i in 0..n {
            out.set(i, j, (plus.get(i) - minus.get(i)) / (2.0 * h));
        }
    }
    Ok(out)
}

/// Deterministic unit directions: equispaced circle or Fibonacci sphere.
pub(crate) fn unit_directions(n: usize, count: usize) -> Vec<Point> {
    (0..count)
        .map(|i| {
            let t = (i as f64 + 0.5) / count as f64;
            if n == 2 {
                let a = 2.0 * PI * t;
                Point::new(&[a.cos(), a.sin()]).expect("2d")
            } else {
                let z = 1.0 - 2.0 * t;
                let s = (1.0 - z * z).sqrt();
                let a = PI * (3.0 - 5f64.sqrt()) * i as f64;
                Point::new(&[s * a.cos(), s * a.sin(), z]).expect("3d")
            }
        })
        .collect()
}

pub(crate) fn random_point_in(region: &Region, rng: &mut ChaCha8Rng) -> Point {
    let n = region.center().dim();
    let (lo, hi) = region.radii();
    let lo = if lo > 0.0 { lo } else { 1e-3 * hi };
    let r = lo + (hi - lo) * rng.random_range(0.05..0.95);
    let dir = loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p = Point::new(&v).expect("dimension checked");
        let len = p.norm();
        if len > 0.1 && len <= 1.0 {
            break p * (1.0 / len);
        }
    };
    region.center() + dir * r
}

fn newton_preimage(f: &MappingSpec, target: &Point, seed: Point) -> Option<Point> {
    let mut x = seed;
    let scale = target.norm().max(1.0);
    for _ in 0..80 {
        let fx = f.apply(&x).ok()?;
        let residual = fx - *target;
        if residual.norm() <= 1e-12 * scale {
            return Some(x);
        }
        let step = f.jacobian_matrix(&x).ok()?.solve(&residual)?;
        // Damp long steps so iterates stay near the seed's basin.
        let len = step.norm();
        let limit = 0.5 * (x - f.center).norm().max(1e-3);
        let step = if len > limit { step * (limit / len) } else { step };
        x = x - step;
        if !x.coords().iter().all(|c| c.is_finite()) {
            return None;
        }
    }
    None
}

fn count_multiplicity(f: &MappingSpec, region: &Region, seed: u64, targets: usize) -> Result<u32> {
    let n = f.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = region.radii();
    let lo = if lo > 0.0 { lo } else { 1e-2 * hi };
    let radii: Vec<f64> = (0..6).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / 6.0).collect();
    let dirs = unit_directions(n, if n == 2 { 36 } else { 96 });
    let mut best = 0u32;
    for _ in 0..targets {
        let source = random_point_in(region, &mut rng);
        let target = f.apply(&source)?;
        let mut roots: Vec<Point> = Vec::new();
        for &r in &radii {
            for d in &dirs {
                let seed_pt = region.center() + *d * r;
                if let Some(root) = newton_preimage(f, &target, seed_pt) {
                    if region.contains(&root) && roots.iter().all(|q| q.distance(&root) > 1e-7 * hi) {
                        roots.push(root);
                    }
                }
            }
        }
        best = best.max(roots.len() as u32);
    }
    Ok(best)
}
