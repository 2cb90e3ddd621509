//! Direct and reciprocal lattice geometry and the (κ1, κ2) parameterization
//! of the Brillouin torus.

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type Vec2 = [f64; 2];

/// Primitive vectors of Λ and Λ*, with a_i · b_j = 2π δ_ij.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub a1: Vec2,
    pub a2: Vec2,
    pub b1: Vec2,
    pub b2: Vec2,
    /// Area of the primitive cell, |a1 × a2|.
    pub v_puc: f64,
}

fn cross(u: Vec2, v: Vec2) -> f64 {
    u[0] * v[1] - u[1] * v[0]
}

fn norm(u: Vec2) -> f64 {
    u[0].hypot(u[1])
}

pub fn dot(u: Vec2, v: Vec2) -> f64 {
    u[0] * v[0] + u[1] * v[1]
}

/// b-vectors as 2π times the inverse transpose of [a1 a2].
pub fn reciprocal_from_direct(a1: Vec2, a2: Vec2) -> Result<(Vec2, Vec2)> {
    let det = cross(a1, a2);
    if det.abs() <= 1e-14 * norm(a1) * norm(a2) || !det.is_finite() {
        return Err(Error::DegenerateLattice { cross: det });
    }
    let s = 2.0 * PI / det;
    let b1 = [s * a2[1], -s * a2[0]];
    let b2 = [-s * a1[1], s * a1[0]];
    Ok((b1, b2))
}

impl Lattice {
    pub fn new(a1: Vec2, a2: Vec2) -> Result<Lattice> {
        let (b1, b2) = reciprocal_from_direct(a1, a2)?;
        Ok(Lattice {
            a1,
            a2,
            b1,
            b2,
            v_puc: cross(a1, a2).abs(),
        })
    }

    /// Square unit cell, a1 = (1,0), a2 = (0,1).
    pub fn unit() -> Lattice {
        Lattice::new([1.0, 0.0], [0.0, 1.0]).unwrap()
    }

    /// Lattice vector m1 a1 + m2 a2.
    pub fn r_vec(&self, m1: i64, m2: i64) -> Vec2 {
        let (m1, m2) = (m1 as f64, m2 as f64);
        [
            m1 * self.a1[0] + m2 * self.a2[0],
            m1 * self.a1[1] + m2 * self.a2[1],
        ]
    }

    /// Reciprocal vector l1 b1 + l2 b2.
    pub fn g_vec(&self, l1: i64, l2: i64) -> Vec2 {
        k_of_kappa(self, l1 as f64, l2 as f64)
    }

    pub fn min_a(&self) -> f64 {
        norm(self.a1).min(norm(self.a2))
    }

    /// Fractional lattice coordinates of a cartesian point: x = c1 a1 + c2 a2.
    pub fn fractional(&self, x: Vec2) -> Vec2 {
        [dot(x, self.b1) / (2.0 * PI), dot(x, self.b2) / (2.0 * PI)]
    }
}

pub fn k_of_kappa(lat: &Lattice, k1: f64, k2: f64) -> Vec2 {
    [
        k1 * lat.b1[0] + k2 * lat.b2[0],
        k1 * lat.b1[1] + k2 * lat.b2[1],
    ]
}

/// Maps (∂/∂κ1, ∂/∂κ2) samples to (∂/∂kx, ∂/∂ky).
pub fn kappa_derivs_to_cartesian<T>(lat: &Lattice, d1: &[T], d2: &[T]) -> Result<(Vec<T>, Vec<T>)>
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    if d1.len() != d2.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} vs {}",
            d1.len(),
            d2.len()
        )));
    }
    let c = 1.0 / (2.0 * PI);
    let (ax1, ax2) = (lat.a1[0] * c, lat.a2[0] * c);
    let (ay1, ay2) = (lat.a1[1] * c, lat.a2[1] * c);
    let dx = d1
        .iter()
        .zip(d2)
        .map(|(&p, &q)| p * ax1 + q * ax2)
        .collect();
    let dy = d1
        .iter()
        .zip(d2)
        .map(|(&p, &q)| p * ay1 + q * ay2)
        .collect();
    Ok((dx, dy))
}

/// Maps (∂/∂kx, ∂/∂ky) samples to (∂/∂κ1, ∂/∂κ2).
pub fn cartesian_derivs_to_kappa<T>(lat: &Lattice, dx: &[T], dy: &[T]) -> Result<(Vec<T>, Vec<T>)>
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    if dx.len() != dy.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} vs {}",
            dx.len(),
            dy.len()
        )));
    }
    let d1 = dx
        .iter()
        .zip(dy)
        .map(|(&p, &q)| p * lat.b1[0] + q * lat.b1[1])
        .collect();
    let d2 = dx
        .iter()
        .zip(dy)
        .map(|(&p, &q)| p * lat.b2[0] + q * lat.b2[1])
        .collect();
    Ok((d1, d2))
}

/// Equispaced n×n sampling of the torus, κ = j/n with j = -n/2..n/2-1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TorusGrid {
    pub n: usize,
}

impl TorusGrid {
    pub fn new(n: usize) -> Result<TorusGrid> {
        if n == 0 || !n.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "grid size {n} must be even and positive"
            )));
        }
        Ok(TorusGrid { n })
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// κ at storage index i (0-based), i.e. j = i - n/2.
    pub fn node(&self, i: usize) -> f64 {
        (i as f64 - (self.n / 2) as f64) / self.n as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }
}
