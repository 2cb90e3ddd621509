//! Periodic fields on the n×n torus grid: DFTs with symmetric frequency
//! indexing, spectral derivatives, quadrature, Poisson and Hodge solves.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::model::Axis;

/// Mean of g above which the torus Poisson problem is rejected.
pub const SOLVABILITY_TOL: f64 = 1e-8;

/// Samples f(κ1, κ2) at κ = (i - n/2)/n, stored row-major with i1 slow.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub n: usize,
    pub data: Vec<C64>,
}

/// Coefficients ĝ_{m1 m2} for m ∈ [-n/2, n/2), stored like [`GridField`].
#[derive(Debug, Clone, PartialEq)]
pub struct FourierField {
    pub n: usize,
    pub coeffs: Vec<C64>,
}

impl GridField {
    pub fn zeros(n: usize) -> GridField {
        GridField {
            n,
            data: vec![C64::new(0.0, 0.0); n * n],
        }
    }

    pub fn from_fn(n: usize, f: impl Fn(f64, f64) -> C64) -> GridField {
        let h = 1.0 / n as f64;
        let half = (n / 2) as f64;
        let mut data = Vec::with_capacity(n * n);
        for i1 in 0..n {
            for i2 in 0..n {
                data.push(f((i1 as f64 - half) * h, (i2 as f64 - half) * h));
            }
        }
        GridField { n, data }
    }

    pub fn from_real(n: usize, f: impl Fn(f64, f64) -> f64) -> GridField {
        GridField::from_fn(n, |a, b| C64::new(f(a, b), 0.0))
    }

    pub fn get(&self, i1: usize, i2: usize) -> C64 {
        self.data[i1 * self.n + i2]
    }

    pub fn re(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.re).collect()
    }

    /// Drops imaginary parts.
    pub fn real_part(&self) -> GridField {
        self.map(|z| C64::new(z.re, 0.0))
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> GridField {
        GridField {
            n: self.n,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn zip(&self, other: &GridField, f: impl Fn(C64, C64) -> C64) -> GridField {
        assert_eq!(self.n, other.n);
        GridField {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &GridField) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl FourierField {
    pub fn zeros(n: usize) -> FourierField {
        FourierField {
            n,
            coeffs: vec![C64::new(0.0, 0.0); n * n],
        }
    }

    /// Coefficient ĝ_{m1 m2}.
    pub fn get(&self, m1: i64, m2: i64) -> C64 {
        self.coeffs[self.index(m1, m2)]
    }

    pub fn index(&self, m1: i64, m2: i64) -> usize {
        let half = (self.n / 2) as i64;
        debug_assert!((-half..half).contains(&m1) && (-half..half).contains(&m2));
        ((m1 + half) as usize) * self.n + (m2 + half) as usize
    }

    /// Frequencies (m1, m2) at a storage index.
    pub fn freq(&self, idx: usize) -> (i64, i64) {
        let half = (self.n / 2) as i64;
        ((idx / self.n) as i64 - half, (idx % self.n) as i64 - half)
    }
}

fn plan(n: usize, dir: FftDirection) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft(n, dir)
}

fn sign(m: i64) -> f64 {
    if m.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// In-place 2D FFT of row-major n×n data (unnormalized).
fn fft2_in_place(data: &mut [C64], n: usize, dir: FftDirection) {
    let fft = plan(n, dir);
    let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for row in data.chunks_mut(n) {
        fft.process_with_scratch(row, &mut scratch);
    }
    let mut col = vec![C64::new(0.0, 0.0); n];
    for c in 0..n {
        for r in 0..n {
            col[r] = data[r * n + c];
        }
        fft.process_with_scratch(&mut col, &mut scratch);
        for r in 0..n {
            data[r * n + c] = col[r];
        }
    }
}

/// Standard-order FFT index of frequency m.
fn wrap(m: i64, n: usize) -> usize {
    m.rem_euclid(n as i64) as usize
}

pub fn dft2(f: &GridField) -> FourierField {
    let n = f.n;
    assert!(n.is_multiple_of(2), "grid size must be even");
    let mut buf = f.data.clone();
    fft2_in_place(&mut buf, n, FftDirection::Forward);
    let half = (n / 2) as i64;
    let scale = 1.0 / (n * n) as f64;
    let mut out = FourierField::zeros(n);
    for m1 in -half..half {
        for m2 in -half..half {
            let v = buf[wrap(m1, n) * n + wrap(m2, n)];
            let idx = out.index(m1, m2);
            out.coeffs[idx] = v * (scale * sign(m1 + m2));
        }
    }
    out
}

pub fn idft2(g: &FourierField) -> GridField {
    let n = g.n;
    let half = (n / 2) as i64;
    let mut buf = vec![C64::new(0.0, 0.0); n * n];
    for m1 in -half..half {
        for m2 in -half..half {
            buf[wrap(m1, n) * n + wrap(m2, n)] = g.get(m1, m2) * sign(m1 + m2);
        }
    }
    fft2_in_place(&mut buf, n, FftDirection::Inverse);
    GridField { n, data: buf }
}

/// 1D analogue of [`dft2`] for a periodic sequence sampled at κ = (i - n/2)/n.
pub fn dft1(f: &[C64]) -> Vec<C64> {
    let n = f.len();
    let mut buf = f.to_vec();
    plan(n, FftDirection::Forward).process(&mut buf);
    let half = (n / 2) as i64;
    (-half..half)
        .map(|m| buf[wrap(m, n)] * (sign(m) / n as f64))
        .collect()
}

pub fn idft1(g: &[C64]) -> Vec<C64> {
    let n = g.len();
    let half = (n / 2) as i64;
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for m in -half..half {
        buf[wrap(m, n)] = g[(m + half) as usize] * sign(m);
    }
    plan(n, FftDirection::Inverse).process(&mut buf);
    buf
}

/// d/dκ of a periodic 1D sequence.
pub fn spectral_derivative_1d(f: &[C64]) -> Vec<C64> {
    let half = (f.len() / 2) as i64;
    let mut g = dft1(f);
    for (k, c) in g.iter_mut().enumerate() {
        *c *= C64::new(0.0, 2.0 * PI * (k as i64 - half) as f64);
    }
    idft1(&g)
}

/// Multiplies coefficients by a frequency-dependent weight and transforms back.
pub fn apply_multiplier(g: &FourierField, w: impl Fn(i64, i64) -> C64) -> GridField {
    let mut out = g.clone();
    for (idx, c) in out.coeffs.iter_mut().enumerate() {
        let (m1, m2) = g.freq(idx);
        *c *= w(m1, m2);
    }
    idft2(&out)
}

pub fn spectral_derivative(f: &GridField, axis: Axis) -> GridField {
    spectral_derivative_of(&dft2(f), axis)
}

/// ∂/∂κ_axis from precomputed coefficients.
pub fn spectral_derivative_of(g: &FourierField, axis: Axis) -> GridField {
    apply_multiplier(g, |m1, m2| {
        let m = match axis {
            Axis::K1 => m1,
            Axis::K2 => m2,
        };
        C64::new(0.0, 2.0 * PI * m as f64)
    })
}

/// Cartesian gradient (∂/∂kx, ∂/∂ky) from precomputed coefficients.
pub fn cartesian_gradient_of(g: &FourierField, lat: &Lattice) -> (GridField, GridField) {
    let dx = apply_multiplier(g, |m1, m2| C64::new(0.0, lat.r_vec(m1, m2)[0]));
    let dy = apply_multiplier(g, |m1, m2| C64::new(0.0, lat.r_vec(m1, m2)[1]));
    (dx, dy)
}

pub fn cartesian_gradient(f: &GridField, lat: &Lattice) -> (GridField, GridField) {
    cartesian_gradient_of(&dft2(f), lat)
}

/// ∂fx/∂kx + ∂fy/∂ky.
pub fn divergence(fx: &GridField, fy: &GridField, lat: &Lattice) -> GridField {
    let (dxx, _) = cartesian_gradient(fx, lat);
    let (_, dyy) = cartesian_gradient(fy, lat);
    dxx.zip(&dyy, |a, b| a + b)
}

/// ∂fy/∂kx - ∂fx/∂ky.
pub fn curl(fx: &GridField, fy: &GridField, lat: &Lattice) -> GridField {
    let (_, dyx) = cartesian_gradient(fx, lat);
    let (dxy, _) = cartesian_gradient(fy, lat);
    dxy.zip(&dyx, |a, b| a - b)
}

/// Cartesian Laplacian computed spectrally.
pub fn laplacian(f: &GridField, lat: &Lattice) -> GridField {
    apply_multiplier(&dft2(f), |m1, m2| {
        let r = lat.r_vec(m1, m2);
        C64::new(-(r[0] * r[0] + r[1] * r[1]), 0.0)
    })
}

/// Mean over the torus, h² Σ f.
pub fn trapezoid_mean(f: &GridField) -> C64 {
    let s: C64 = f.data.iter().sum();
    s / (f.n * f.n) as f64
}

/// Solves Δψ = -g on the torus with zero-mean ψ.
pub fn poisson_solve_torus(g: &GridField, lat: &Lattice) -> Result<GridField> {
    poisson_solve_torus_tol(g, lat, SOLVABILITY_TOL)
}

pub fn poisson_solve_torus_tol(g: &GridField, lat: &Lattice, tol: f64) -> Result<GridField> {
    let mean = trapezoid_mean(g).norm();
    if mean > tol {
        return Err(Error::NotSolvable { mean, tol });
    }
    Ok(apply_multiplier(&dft2(g), |m1, m2| {
        if m1 == 0 && m2 == 0 {
            return C64::new(0.0, 0.0);
        }
        let r = lat.r_vec(m1, m2);
        C64::new(1.0 / (r[0] * r[0] + r[1] * r[1]), 0.0)
    }))
}

/// f = -∇ψ + (∂F/∂ky, -∂F/∂kx) + (hx, hy).
#[derive(Debug, Clone, PartialEq)]
pub struct HodgeParts {
    pub psi: GridField,
    pub f_pot: GridField,
    pub hx: f64,
    pub hy: f64,
}

pub fn hodge_decompose(fx: &GridField, fy: &GridField, lat: &Lattice) -> HodgeParts {
    let gx = dft2(fx);
    let gy = dft2(fy);
    let n = fx.n;
    let mut psi = FourierField::zeros(n);
    let mut pot = FourierField::zeros(n);
    for idx in 0..n * n {
        let (m1, m2) = gx.freq(idx);
        if m1 == 0 && m2 == 0 {
            continue;
        }
        let r = lat.r_vec(m1, m2);
        let r2 = r[0] * r[0] + r[1] * r[1];
        let (x, y) = (gx.coeffs[idx], gy.coeffs[idx]);
        psi.coeffs[idx] = C64::new(0.0, 1.0) * (x * r[0] + y * r[1]) / r2;
        pot.coeffs[idx] = C64::new(0.0, -1.0) * (x * r[1] - y * r[0]) / r2;
    }
    HodgeParts {
        psi: idft2(&psi),
        f_pot: idft2(&pot),
        hx: gx.get(0, 0).re,
        hy: gy.get(0, 0).re,
    }
}

impl HodgeParts {
    /// Rebuilds the cartesian field from its parts.
    pub fn recompose(&self, lat: &Lattice) -> (GridField, GridField) {
        let (px, py) = cartesian_gradient(&self.psi, lat);
        let (fx, fy) = cartesian_gradient(&self.f_pot, lat);
        let h = C64::new(self.hx, 0.0);
        let v = C64::new(self.hy, 0.0);
        let x = px.zip(&fy, |p, f| -p + f + h);
        let y = py.zip(&fx, |p, f| -p - f + v);
        (x, y)
    }
}
