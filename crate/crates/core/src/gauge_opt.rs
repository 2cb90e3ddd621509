//! Berry connection of a gauge-fixed sheet, the divergence-eliminating
//! gauge transformation, and the Wannier moments.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::Result;
use crate::grid_spectral::{
    dft2, divergence, poisson_solve_torus, spectral_derivative_of, trapezoid_mean, GridField,
};
use crate::lattice::{Lattice, Vec2};
use crate::model::{Axis, TightBindingModel};
use crate::smalllin::{band_derivative_with, Spectrum};
use crate::transport::SheetAssignment;

/// Spectral κ-derivatives of every vector component of a sheet.
#[derive(Debug, Clone)]
pub struct SheetDerivatives {
    pub d1: Vec<GridField>,
    pub d2: Vec<GridField>,
}

impl SheetDerivatives {
    pub fn of(sheet: &SheetAssignment) -> SheetDerivatives {
        let (d1, d2) = (0..sheet.dim)
            .into_par_iter()
            .map(|c| {
                let g = dft2(&sheet.component(c));
                (
                    spectral_derivative_of(&g, Axis::K1),
                    spectral_derivative_of(&g, Axis::K2),
                )
            })
            .unzip();
        SheetDerivatives { d1, d2 }
    }

    /// (∂/∂kx, ∂/∂ky) of component c.
    pub fn cartesian(&self, c: usize, lat: &Lattice) -> (GridField, GridField) {
        let s = 1.0 / (2.0 * std::f64::consts::PI);
        let (x1, x2) = (lat.a1[0] * s, lat.a2[0] * s);
        let (y1, y2) = (lat.a1[1] * s, lat.a2[1] * s);
        let dx = self.d1[c].zip(&self.d2[c], |p, q| p * x1 + q * x2);
        let dy = self.d1[c].zip(&self.d2[c], |p, q| p * y1 + q * y2);
        (dx, dy)
    }
}

/// Berry connection i ũ†∂ũ in κ components and cartesian components.
#[derive(Debug, Clone)]
pub struct ConnectionField {
    pub a1: GridField,
    pub a2: GridField,
    pub ax: GridField,
    pub ay: GridField,
    /// Largest imaginary part discarded when taking i ũ†∂ũ as real.
    pub imag_defect: f64,
}

/// i Σ_c conj(u_c) d_c at every node.
fn contract(sheet: &SheetAssignment, d: &[GridField]) -> GridField {
    let mut out = GridField::zeros(sheet.n);
    for (c, dc) in d.iter().enumerate() {
        for (k, (o, v)) in out.data.iter_mut().zip(&dc.data).enumerate() {
            *o += C64::new(0.0, 1.0) * sheet.vectors[k * sheet.dim + c].conj() * v;
        }
    }
    out
}

pub fn berry_connection_grid(sheet: &SheetAssignment, lat: &Lattice) -> ConnectionField {
    connection_from(sheet, &SheetDerivatives::of(sheet), lat)
}

pub fn connection_from(
    sheet: &SheetAssignment,
    ds: &SheetDerivatives,
    lat: &Lattice,
) -> ConnectionField {
    let a1 = contract(sheet, &ds.d1);
    let a2 = contract(sheet, &ds.d2);
    let imag_defect = a1
        .data
        .iter()
        .chain(&a2.data)
        .map(|z| z.im.abs())
        .fold(0.0, f64::max);
    let a1 = a1.real_part();
    let a2 = a2.real_part();
    let s = 1.0 / (2.0 * std::f64::consts::PI);
    let ax = a1.zip(&a2, |p, q| p * (lat.a1[0] * s) + q * (lat.a2[0] * s));
    let ay = a1.zip(&a2, |p, q| p * (lat.a1[1] * s) + q * (lat.a2[1] * s));
    ConnectionField {
        a1,
        a2,
        ax,
        ay,
        imag_defect,
    }
}

/// ψ with Δψ = -div A, so that A + ∇ψ is divergence free.
pub fn divergence_potential(conn: &ConnectionField, lat: &Lattice) -> Result<GridField> {
    let g = divergence(&conn.ax, &conn.ay, lat).real_part();
    Ok(poisson_solve_torus(&g, lat)?.real_part())
}

/// ũ ↦ e^{-iψ} ũ.
pub fn apply_divergence_free_gauge(sheet: &SheetAssignment, psi: &GridField) -> SheetAssignment {
    sheet.apply_phase(psi)
}

/// First and second moments of the Wannier function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentReport {
    pub center: Vec2,
    pub second: f64,
    pub variance: f64,
}

impl MomentReport {
    fn new(center: Vec2, second: f64) -> MomentReport {
        let variance = (second - center[0] * center[0] - center[1] * center[1]).max(0.0);
        MomentReport {
            center,
            second,
            variance,
        }
    }
}

pub fn wannier_moments(sheet: &SheetAssignment, lat: &Lattice) -> MomentReport {
    let ds = SheetDerivatives::of(sheet);
    moments_from(sheet, &ds, lat)
}

pub fn moments_from(sheet: &SheetAssignment, ds: &SheetDerivatives, lat: &Lattice) -> MomentReport {
    let conn = connection_from(sheet, ds, lat);
    let center = [trapezoid_mean(&conn.ax).re, trapezoid_mean(&conn.ay).re];
    let mut grad2 = 0.0;
    for c in 0..sheet.dim {
        let (dx, dy) = ds.cartesian(c, lat);
        grad2 += dx
            .data
            .iter()
            .chain(&dy.data)
            .map(|z| z.norm_sqr())
            .sum::<f64>();
    }
    MomentReport::new(center, grad2 / (sheet.n * sheet.n) as f64)
}

/// Second moment via mean(‖∂P/∂kx ũ‖² + ‖∂P/∂ky ũ‖² + ‖A‖²), with ∂P ũ
/// taken from the band derivative of H.
pub fn second_moment_projector_form(m: &TightBindingModel, sheet: &SheetAssignment) -> Result<f64> {
    let lat = &m.lat;
    let conn = berry_connection_grid(sheet, lat);
    let n = sheet.n;
    let s = 1.0 / (2.0 * std::f64::consts::PI);
    let terms: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (k1, k2) = (sheet.kappa(k / n), sheet.kappa(k % n));
            let h = m.evaluate_h(k1, k2);
            let d1 = m.evaluate_dh(k1, k2, Axis::K1);
            let d2 = m.evaluate_dh(k1, k2, Axis::K2);
            let dx = (&d1 * C64::new(lat.a1[0] * s, 0.0)) + (&d2 * C64::new(lat.a2[0] * s, 0.0));
            let dy = (&d1 * C64::new(lat.a1[1] * s, 0.0)) + (&d2 * C64::new(lat.a2[1] * s, 0.0));
            let spec = Spectrum::new_unchecked(&h);
            let pair = crate::smalllin::EigenPair {
                value: sheet.energies[k],
                vector: sheet.vector(k / n, k % n),
            };
            let (_, ux) = band_derivative_with(&spec, &dx, &pair, m.gap_tol)?;
            let (_, uy) = band_derivative_with(&spec, &dy, &pair, m.gap_tol)?;
            let a = conn.ax.data[k].re.powi(2) + conn.ay.data[k].re.powi(2);
            Ok(ux.norm_squared() + uy.norm_squared() + a)
        })
        .collect::<Result<_>>()?;
    Ok(terms.iter().sum::<f64>() / (n * n) as f64)
}

/// Stage 3 outcome.
#[derive(Debug, Clone)]
pub struct OptimalGauge {
    pub sheet: SheetAssignment,
    pub psi: GridField,
    pub before: MomentReport,
    pub after: MomentReport,
    /// max|ψ'| from a second divergence solve on the final sheet.
    pub e_div: f64,
    pub imag_defect: f64,
}

/// Single divergence-eliminating pass with before/after moments.
pub fn optimize_gauge(sheet: &SheetAssignment, lat: &Lattice) -> Result<OptimalGauge> {
    let ds = SheetDerivatives::of(sheet);
    let before = moments_from(sheet, &ds, lat);
    let conn = connection_from(sheet, &ds, lat);
    let psi = divergence_potential(&conn, lat)?;
    let out = apply_divergence_free_gauge(sheet, &psi);
    let ds2 = SheetDerivatives::of(&out);
    let after = moments_from(&out, &ds2, lat);
    let conn2 = connection_from(&out, &ds2, lat);
    let e_div = divergence_potential(&conn2, lat)?.max_abs();
    Ok(OptimalGauge {
        sheet: out,
        psi,
        before,
        after,
        e_div,
        imag_defect: conn.imag_defect.max(conn2.imag_defect),
    })
}
