//! Alternative construction from the gauge-invariant Berry curvature: a
//! curvature potential F, transport with the prescribed divergence-free
//! connection, and the harmonic phases (h1, h2).

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gauge_opt::{
    berry_connection_grid, divergence_potential, wannier_moments, MomentReport,
};
use crate::grid_spectral::{
    cartesian_gradient, dft1, poisson_solve_torus_tol, trapezoid_mean, GridField,
};
use crate::lattice::{Lattice, Vec2};
use crate::model::{Axis, TightBindingModel};
use crate::smalllin::{band_derivative_with, CVec, EigenPair, Spectrum};
use crate::transport::{
    band_pair, initial_vector, transport_line_with, SheetAssignment, TransportOptions,
};

/// Path-order deviations above this abort the construction.
pub const INTEGRABILITY_TOL: f64 = 1e-4;
/// Largest |C1| accepted as zero when solving for F.
pub const C1_ZERO_TOL: f64 = 1e-6;

/// Berry curvature Ω_xy on the grid.
#[derive(Debug, Clone)]
pub struct CurvatureField {
    pub omega: GridField,
    /// (1/2π)∫Ω12 dκ1 dκ2, i.e. (1/2π)∫Ω dk with the orientation of (b1, b2).
    pub c1_integral: f64,
}

/// (∂H/∂kx, ∂H/∂ky) from the κ-derivatives.
fn cartesian_dh(
    m: &TightBindingModel,
    k1: f64,
    k2: f64,
) -> (crate::model::CMat, crate::model::CMat) {
    let lat = &m.lat;
    let s = 1.0 / (2.0 * PI);
    let d1 = m.evaluate_dh(k1, k2, Axis::K1);
    let d2 = m.evaluate_dh(k1, k2, Axis::K2);
    let dx = &d1 * C64::new(lat.a1[0] * s, 0.0) + &d2 * C64::new(lat.a2[0] * s, 0.0);
    let dy = &d1 * C64::new(lat.a1[1] * s, 0.0) + &d2 * C64::new(lat.a2[1] * s, 0.0);
    (dx, dy)
}

/// Ω = i(∂x u)†(∂y u) - i(∂y u)†(∂x u) at one point for a given eigenpair.
pub fn curvature_at(m: &TightBindingModel, k1: f64, k2: f64, pair: &EigenPair) -> Result<f64> {
    let spec = Spectrum::new_unchecked(&m.evaluate_h(k1, k2));
    let (dx, dy) = cartesian_dh(m, k1, k2);
    let (_, ux) =
        band_derivative_with(&spec, &dx, pair, m.gap_tol).map_err(|e| e.at_node(k1, k2))?;
    let (_, uy) =
        band_derivative_with(&spec, &dy, pair, m.gap_tol).map_err(|e| e.at_node(k1, k2))?;
    Ok(-2.0 * ux.dotc(&uy).im)
}

pub fn berry_curvature_grid(m: &TightBindingModel, n: usize) -> Result<CurvatureField> {
    let h = 1.0 / n as f64;
    let data: Vec<C64> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (k1, k2) = (-0.5 + (k / n) as f64 * h, -0.5 + (k % n) as f64 * h);
            let pair = band_pair(m, k1, k2)?;
            Ok(C64::new(curvature_at(m, k1, k2, &pair)?, 0.0))
        })
        .collect::<Result<_>>()?;
    let omega = GridField { n, data };
    // Ω12 = (b1 × b2) Ω_xy, so the signed cell area keeps the sign of the winding
    let lat = &m.lat;
    let signed_area = lat.a1[0] * lat.a2[1] - lat.a1[1] * lat.a2[0];
    let c1_integral = trapezoid_mean(&omega).re * 2.0 * PI / signed_area;
    Ok(CurvatureField { omega, c1_integral })
}

/// F with ΔF = -Ω, so that (∂F/∂ky, -∂F/∂kx) has curl Ω.
pub fn curvature_potential_f(curv: &CurvatureField, lat: &Lattice) -> Result<GridField> {
    if curv.c1_integral.abs() > C1_ZERO_TOL || !curv.c1_integral.is_finite() {
        return Err(Error::NotSolvable {
            mean: trapezoid_mean(&curv.omega).norm(),
            tol: C1_ZERO_TOL * lat.v_puc / (2.0 * PI),
        });
    }
    Ok(poisson_solve_torus_tol(&curv.omega, lat, f64::INFINITY)?.real_part())
}

/// Divergence-free connection from F in κ components (A1, A2) = (b1·A, b2·A).
pub fn connection_from_potential(f: &GridField, lat: &Lattice) -> (GridField, GridField) {
    let (fx, fy) = cartesian_gradient(f, lat);
    // A = (∂F/∂ky, -∂F/∂kx)
    let a1 = fy.zip(&fx, |y, x| {
        C64::new(lat.b1[0] * y.re - lat.b1[1] * x.re, 0.0)
    });
    let a2 = fy.zip(&fx, |y, x| {
        C64::new(lat.b2[0] * y.re - lat.b2[1] * x.re, 0.0)
    });
    (a1, a2)
}

/// Real trigonometric interpolant of equispaced samples on [-1/2, 1/2).
#[derive(Debug, Clone)]
pub struct TrigInterpolant {
    coeffs: Vec<C64>,
}

impl TrigInterpolant {
    pub fn new(samples: &[f64]) -> TrigInterpolant {
        let z: Vec<C64> = samples.iter().map(|&x| C64::new(x, 0.0)).collect();
        TrigInterpolant { coeffs: dft1(&z) }
    }

    pub fn eval(&self, s: f64) -> f64 {
        let n = self.coeffs.len();
        let half = (n / 2) as i64;
        let w = C64::cis(2.0 * PI * s);
        let mut acc = self.coeffs[half as usize].re;
        let mut p = C64::new(1.0, 0.0);
        for m in 1..half {
            p *= w;
            acc += 2.0 * (self.coeffs[(half + m) as usize] * p).re;
        }
        // the Nyquist mode splits evenly between ±n/2, leaving a cosine
        acc + self.coeffs[0].re * (2.0 * PI * half as f64 * s).cos()
    }
}

/// Transported vectors on the closed (n+1)×(n+1) node set.
#[derive(Debug, Clone)]
pub struct PfaffianSheet {
    pub n: usize,
    /// lines[i1][i2], κ = (-1/2 + i1/n, -1/2 + i2/n), i1, i2 ∈ 0..=n.
    pub lines: Vec<Vec<EigenPair>>,
    /// Max node deviation of the transposed path order on the sampled rows.
    pub path_deviation: f64,
}

fn column(f: &GridField, i1: usize) -> Vec<f64> {
    let n = f.n;
    (0..n).map(|i2| f.data[(i1 % n) * n + i2].re).collect()
}

fn row(f: &GridField, i2: usize) -> Vec<f64> {
    let n = f.n;
    (0..n).map(|i1| f.data[i1 * n + (i2 % n)].re).collect()
}

/// Transport with du = -(H - E)⁺∂H u - i A_j u along γ0 and then every
/// vertical line, followed by a transposed-order spot check on a few rows.
pub fn pfaffian_transport(
    m: &TightBindingModel,
    a1: &GridField,
    a2: &GridField,
    n: usize,
    opts: &TransportOptions,
) -> Result<PfaffianSheet> {
    let h = 1.0 / n as f64;
    let start = initial_vector(m, opts)?;
    let edge_a = TrigInterpolant::new(&row(a1, 0));
    let edge = transport_line_with(
        m,
        &start,
        -0.5,
        Axis::K1,
        n,
        opts,
        Some(&|s| edge_a.eval(s)),
    )?;
    let lines: Vec<Vec<EigenPair>> = (0..=n)
        .into_par_iter()
        .map(|i1| {
            let a = TrigInterpolant::new(&column(a2, i1));
            transport_line_with(
                m,
                &edge[i1],
                -0.5 + i1 as f64 * h,
                Axis::K2,
                n,
                opts,
                Some(&|s| a.eval(s)),
            )
        })
        .collect::<Result<_>>()?;

    let first = TrigInterpolant::new(&column(a2, 0));
    let left = transport_line_with(m, &start, -0.5, Axis::K2, n, opts, Some(&|s| first.eval(s)))?;
    let rows: Vec<usize> = (0..4).map(|q| q * n / 4 + n / 8).collect();
    let deviations: Vec<f64> = rows
        .par_iter()
        .map(|&i2| {
            let a = TrigInterpolant::new(&row(a1, i2));
            let line = transport_line_with(
                m,
                &left[i2],
                -0.5 + i2 as f64 * h,
                Axis::K1,
                n,
                opts,
                Some(&|s| a.eval(s)),
            )?;
            Ok(line
                .iter()
                .enumerate()
                .map(|(i1, p)| (&p.vector - &lines[i1][i2].vector).norm())
                .fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    let path_deviation = deviations.into_iter().fold(0.0, f64::max);
    if path_deviation > INTEGRABILITY_TOL {
        return Err(Error::IntegrabilityViolation(path_deviation));
    }
    Ok(PfaffianSheet {
        n,
        lines,
        path_deviation,
    })
}

/// Harmonic phases with their spread over the slice coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicPhases {
    pub h1: f64,
    pub h2: f64,
    pub spread: f64,
}

/// Principal -i log of the mean boundary overlap in each direction.
pub fn harmonic_phases(raw: &PfaffianSheet) -> HarmonicPhases {
    let n = raw.n;
    let z1: Vec<C64> = (0..n)
        .map(|i2| raw.lines[0][i2].vector.dotc(&raw.lines[n][i2].vector))
        .collect();
    let z2: Vec<C64> = (0..n)
        .map(|i1| raw.lines[i1][0].vector.dotc(&raw.lines[i1][n].vector))
        .collect();
    let mean = |z: &[C64]| z.iter().sum::<C64>();
    let (s1, s2) = (mean(&z1), mean(&z2));
    let spread = z1
        .iter()
        .map(|z| (z / s1).arg().abs())
        .chain(z2.iter().map(|z| (z / s2).arg().abs()))
        .fold(0.0, f64::max);
    HarmonicPhases {
        h1: s1.arg(),
        h2: s2.arg(),
        spread,
    }
}

/// Outcome of the alternative construction.
#[derive(Debug, Clone)]
pub struct AltResult {
    pub sheet: SheetAssignment,
    pub moments: MomentReport,
    pub phases: HarmonicPhases,
    /// (h1 a1 + h2 a2)/2π, the center modulo a lattice vector.
    pub harmonic_center: Vec2,
    pub curvature: CurvatureField,
    pub path_deviation: f64,
    pub e_div: f64,
}

/// Gauge e^{-i h1 κ1 - i h2 κ2} applied to the transported sheet.
pub fn alt_assignment(
    m: &TightBindingModel,
    n: usize,
    opts: &TransportOptions,
) -> Result<AltResult> {
    let curvature = berry_curvature_grid(m, n).map_err(|e| e.in_stage("curvature"))?;
    let f =
        curvature_potential_f(&curvature, &m.lat).map_err(|e| e.in_stage("curvature potential"))?;
    let (a1, a2) = connection_from_potential(&f, &m.lat);
    let raw =
        pfaffian_transport(m, &a1, &a2, n, opts).map_err(|e| e.in_stage("pfaffian transport"))?;
    let phases = harmonic_phases(&raw);
    let h = 1.0 / n as f64;
    let mut energies = Vec::with_capacity(n * n);
    let mut vectors = Vec::with_capacity(n * n * m.dim);
    for i1 in 0..n {
        for i2 in 0..n {
            let (k1, k2) = (-0.5 + i1 as f64 * h, -0.5 + i2 as f64 * h);
            let p = &raw.lines[i1][i2];
            let g = C64::cis(-phases.h1 * k1 - phases.h2 * k2);
            energies.push(p.value);
            vectors.extend((&p.vector * g).iter());
        }
    }
    let sheet = SheetAssignment {
        n,
        dim: m.dim,
        energies,
        vectors,
        phi1: 0.0,
        phi2: vec![0.0; n],
        z: vec![C64::new(1.0, 0.0); n],
        chern: 0,
        chern_residual: curvature.c1_integral.abs(),
    };
    let moments = wannier_moments(&sheet, &m.lat);
    let e_div = divergence_potential(&berry_connection_grid(&sheet, &m.lat), &m.lat)?.max_abs();
    let lat = &m.lat;
    let harmonic_center = [
        (phases.h1 * lat.a1[0] + phases.h2 * lat.a2[0]) / (2.0 * PI),
        (phases.h1 * lat.a1[1] + phases.h2 * lat.a2[1]) / (2.0 * PI),
    ];
    Ok(AltResult {
        sheet,
        moments,
        phases,
        harmonic_center,
        curvature,
        path_deviation: raw.path_deviation,
        e_div,
    })
}

/// Distance between two centers after removing the nearest lattice vector.
pub fn center_distance_mod_lattice(lat: &Lattice, a: Vec2, b: Vec2) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1]];
    let f = lat.fractional(d);
    let (r1, r2) = (f[0].round() as i64, f[1].round() as i64);
    let r = lat.r_vec(r1, r2);
    (d[0] - r[0]).hypot(d[1] - r[1])
}

/// Unit vector with a given phase per node; used to probe gauge covariance.
pub fn rotate(v: &CVec, theta: f64) -> CVec {
    v * C64::cis(theta)
}
