//! Points, spheres, rings and condensers in R^n for n = 2, 3.
//!
//! The dimension is carried at runtime by every [`Point`]. Rings are open in
//! the radial variable; the sphere constants come from closed forms.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest dimension a [`Point`] can hold.
pub const MAX_DIM: usize = 3;

pub fn check_dim(n: usize) -> Result<usize> {
    match n {
        2 | 3 => Ok(n),
        _ => Err(Error::UnsupportedDimension(n)),
    }
}

/// Surface measure of the unit sphere S^{n-1}.
pub fn unit_sphere_area(n: usize) -> Result<f64> {
    Ok(match check_dim(n)? {
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    })
}

/// Volume of the unit ball B^n.
pub fn unit_ball_volume(n: usize) -> Result<f64> {
    Ok(match check_dim(n)? {
        2 => PI,
        _ => 4.0 * PI / 3.0,
    })
}

#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point {
    coords: [f64; MAX_DIM],
    dim: usize,
}

impl Point {
    pub fn new(coords: &[f64]) -> Result<Self> {
        check_dim(coords.len())?;
        if let Some(c) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::param("point", format!("coordinate {c} is not finite")));
        }
        let mut buf = [0.0; MAX_DIM];
        buf[..coords.len()].copy_from_slice(coords);
        Ok(Self {
            coords: buf,
            dim: coords.len(),
        })
    }

    pub fn origin(n: usize) -> Result<Self> {
        check_dim(n)?;
        Ok(Self {
            coords: [0.0; MAX_DIM],
            dim: n,
        })
    }

    /// Point without validation; callers guarantee `dim` is supported.
    pub(crate) fn from_array(coords: [f64; MAX_DIM], dim: usize) -> Self {
        Self { coords, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    pub fn get(&self, i: usize) -> f64 {
        self.coords[i]
    }

    pub fn norm(&self) -> f64 {
        self.coords().iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coords().iter().map(|c| c * c).sum()
    }

    pub fn dot(&self, other: &Point) -> f64 {
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (*self - *other).norm()
    }

    pub(crate) fn raw(&self) -> &[f64; MAX_DIM] {
        &self.coords
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coords().iter().map(|c| format!("{c}")).collect();
        write!(f, "({})", parts.join(", "))
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(&v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.coords().to_vec()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        debug_assert_eq!(self.dim, rhs.dim);
        let mut c = self.coords;
        for (a, b) in c.iter_mut().zip(rhs.coords) {
            *a += b;
        }
        Point::from_array(c, self.dim)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        debug_assert_eq!(self.dim, rhs.dim);
        let mut c = self.coords;
        for (a, b) in c.iter_mut().zip(rhs.coords) {
            *a -= b;
        }
        Point::from_array(c, self.dim)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        let mut c = self.coords;
        c.iter_mut().for_each(|a| *a *= s);
        Point::from_array(c, self.dim)
    }
}

/// A sphere S(center, radius).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    pub center: Point,
    pub radius: f64,
}

impl Sphere {
    pub fn area(&self) -> f64 {
        let n = self.center.dim();
        unit_sphere_area(n).expect("point dimension is validated") * self.radius.powi(n as i32 - 1)
    }
}

/// The open ring A(x0, r1, r2) = {r1 < |x - x0| < r2}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalRing {
    center: Point,
    r_inner: f64,
    r_outer: f64,
}

impl SphericalRing {
    pub fn new(center: Point, r_inner: f64, r_outer: f64) -> Result<Self> {
        if !(r_inner > 0.0 && r_inner < r_outer && r_outer.is_finite()) {
            return Err(Error::InvalidRing {
                inner: r_inner,
                outer: r_outer,
            });
        }
        Ok(Self {
            center,
            r_inner,
            r_outer,
        })
    }

    /// Ring about the origin of R^n.
    pub fn centered(n: usize, r_inner: f64, r_outer: f64) -> Result<Self> {
        Self::new(Point::origin(n)?, r_inner, r_outer)
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn r_inner(&self) -> f64 {
        self.r_inner
    }

    pub fn r_outer(&self) -> f64 {
        self.r_outer
    }

    /// log(r_outer / r_inner), the only scale-invariant of a ring.
    pub fn log_ratio(&self) -> f64 {
        (self.r_outer / self.r_inner).ln()
    }

    pub fn contains(&self, x: &Point) -> bool {
        let r = x.distance(&self.center);
        r > self.r_inner && r < self.r_outer
    }
}

/// Volume Omega_n (r_outer^n - r_inner^n).
pub fn ring_volume(ring: &SphericalRing) -> f64 {
    let n = ring.dim();
    let omega = unit_ball_volume(n).expect("point dimension is validated");
    omega * (ring.r_outer.powi(n as i32) - ring.r_inner.powi(n as i32))
}

/// The condenser (B(x0, r_outer), closed B(x0, r_inner)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condenser {
    pub ring: SphericalRing,
}

impl Condenser {
    pub fn new(ring: SphericalRing) -> Self {
        Self { ring }
    }

    pub fn centered(n: usize, r_inner: f64, r_outer: f64) -> Result<Self> {
        Ok(Self::new(SphericalRing::centered(n, r_inner, r_outer)?))
    }

    pub fn dim(&self) -> usize {
        self.ring.dim()
    }
}
