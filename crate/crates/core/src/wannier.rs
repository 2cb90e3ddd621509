//! Bloch Fourier coefficients of a sheet, decay and realness diagnostics,
//! and real-space Wannier samples built from Gaussian orbitals.

use std::collections::BTreeMap;
use std::io::Write;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gauge_opt::MomentReport;
use crate::grid_spectral::{dft2, FourierField};
use crate::lattice::{Lattice, Vec2};
use crate::numfmt::g17;
use crate::transport::SheetAssignment;

/// Coefficient magnitudes below this are treated as round-off in decay fits.
pub const NOISE_FLOOR: f64 = 1e-13;

/// Per-component Fourier coefficients u_{i,R}, R = m1 a1 + m2 a2.
#[derive(Debug, Clone)]
pub struct BlochCoefficients {
    pub n: usize,
    pub dim: usize,
    pub fields: Vec<FourierField>,
}

impl BlochCoefficients {
    /// Coefficient vector at (m1, m2), each index in [-n/2, n/2).
    pub fn get(&self, m1: i64, m2: i64) -> Vec<C64> {
        self.fields.iter().map(|f| f.get(m1, m2)).collect()
    }

    /// max_i |u_{i,R}|.
    pub fn max_abs_at(&self, m1: i64, m2: i64) -> f64 {
        self.fields
            .iter()
            .map(|f| f.get(m1, m2).norm())
            .fold(0.0, f64::max)
    }

    /// Σ_{R,i} |u_{i,R}|².
    pub fn mass(&self) -> f64 {
        self.fields
            .iter()
            .flat_map(|f| f.coeffs.iter())
            .map(|z| z.norm_sqr())
            .sum()
    }

    /// All lattice indices covered by the coefficients.
    pub fn indices(&self) -> impl Iterator<Item = (i64, i64)> {
        let half = (self.n / 2) as i64;
        (-half..half).flat_map(move |m1| (-half..half).map(move |m2| (m1, m2)))
    }

    /// Rows (m1, m2, i, re, im) with a header line.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "m1,m2,i,re,im")?;
        for (m1, m2) in self.indices() {
            for (i, z) in self.get(m1, m2).iter().enumerate() {
                writeln!(w, "{m1},{m2},{i},{},{}", g17(z.re), g17(z.im))?;
            }
        }
        Ok(())
    }
}

pub fn bloch_fourier_coefficients(sheet: &SheetAssignment) -> BlochCoefficients {
    let fields = (0..sheet.dim)
        .into_par_iter()
        .map(|c| dft2(&sheet.component(c)))
        .collect();
    BlochCoefficients {
        n: sheet.n,
        dim: sheet.dim,
        fields,
    }
}

/// max over R and i of |Im u_{i,R}|.
pub fn realness_check(coeffs: &BlochCoefficients) -> f64 {
    coeffs
        .fields
        .iter()
        .flat_map(|f| f.coeffs.iter())
        .map(|z| z.im.abs())
        .fold(0.0, f64::max)
}

/// Least-squares slope of y against x.
fn slope(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    if points.len() < 2 {
        return f64::NAN;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Fits ln(max coefficient) against distance, using shells of unit width in
/// units of the shortest lattice vector and stopping at the noise floor.
pub fn decay_rate(coeffs: &BlochCoefficients, lat: &Lattice) -> f64 {
    let half = (coeffs.n / 2) as i64;
    let scale = lat.min_a();
    let mut shells: BTreeMap<i64, f64> = BTreeMap::new();
    // the Nyquist row and column have no partner frequency and are skipped
    for m1 in (1 - half)..half {
        for m2 in (1 - half)..half {
            let r = lat.r_vec(m1, m2);
            let d = (r[0].hypot(r[1]) / scale).round() as i64;
            let v = coeffs.max_abs_at(m1, m2);
            let e = shells.entry(d).or_insert(0.0);
            *e = e.max(v);
        }
    }
    let mut pts = Vec::new();
    for (d, v) in shells {
        if v <= NOISE_FLOOR {
            break;
        }
        pts.push((d as f64, v.ln()));
    }
    slope(&pts)
}

/// Decay slopes of ln(max coefficient) along m1 and along m2, each taking
/// the maximum over the other index and over ±m.
pub fn axis_decay_rates(coeffs: &BlochCoefficients, max_index: usize) -> (f64, f64) {
    let half = (coeffs.n / 2) as i64;
    let top = (max_index as i64).min(half - 1);
    let profile = |along_first: bool| -> Vec<(f64, f64)> {
        let mut pts = Vec::new();
        for m in 1..=top {
            let mut best: f64 = 0.0;
            for s in [m, -m] {
                for o in (1 - half)..half {
                    let v = if along_first {
                        coeffs.max_abs_at(s, o)
                    } else {
                        coeffs.max_abs_at(o, s)
                    };
                    best = best.max(v);
                }
            }
            if best <= NOISE_FLOOR {
                break;
            }
            pts.push((m as f64, best.ln()));
        }
        pts
    };
    (slope(&profile(true)), slope(&profile(false)))
}

/// Final output of the pipeline.
#[derive(Debug, Clone)]
pub struct WannierResult {
    pub coeffs: BlochCoefficients,
    pub center: Vec2,
    pub variance: f64,
    pub chern: i64,
    pub max_imag: f64,
    pub decay_rate: f64,
}

pub fn wannier_result(
    sheet: &SheetAssignment,
    moments: &MomentReport,
    lat: &Lattice,
) -> WannierResult {
    let coeffs = bloch_fourier_coefficients(sheet);
    let max_imag = realness_check(&coeffs);
    let decay_rate = decay_rate(&coeffs, lat);
    WannierResult {
        coeffs,
        center: moments.center,
        variance: moments.variance,
        chern: sheet.chern,
        max_imag,
        decay_rate,
    }
}

/// Isotropic Gaussian φ_i(r) = e^{-|r-τ_i|²/2σ_i²}/(σ_i√π), unit L² norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Orbitals {
    pub sigma: Vec<f64>,
    pub offsets: Vec<Vec2>,
}

impl Orbitals {
    /// σ = 0.3·min‖a_i‖ and all offsets at the origin.
    pub fn default_for(lat: &Lattice, dim: usize) -> Orbitals {
        Orbitals {
            sigma: vec![0.3 * lat.min_a(); dim],
            offsets: vec![[0.0, 0.0]; dim],
        }
    }

    pub fn eval(&self, i: usize, r: Vec2) -> f64 {
        let s = self.sigma[i];
        let dx = r[0] - self.offsets[i][0];
        let dy = r[1] - self.offsets[i][1];
        (-(dx * dx + dy * dy) / (2.0 * s * s)).exp() / (s * std::f64::consts::PI.sqrt())
    }

    /// ∫ φ_i(r + R) φ_j(r + R') dr for orbitals shifted by -R and -R'.
    pub fn overlap(&self, i: usize, r: Vec2, j: usize, rp: Vec2) -> f64 {
        let (si, sj) = (self.sigma[i], self.sigma[j]);
        let ci = [self.offsets[i][0] - r[0], self.offsets[i][1] - r[1]];
        let cj = [self.offsets[j][0] - rp[0], self.offsets[j][1] - rp[1]];
        let d2 = (ci[0] - cj[0]).powi(2) + (ci[1] - cj[1]).powi(2);
        let s2 = si * si + sj * sj;
        2.0 * si * sj / s2 * (-d2 / (2.0 * s2)).exp()
    }
}

/// Wannier function samples on a grid in fractional coordinates
/// c1, c2 ∈ [-W, W] with `resolution` points per lattice spacing.
#[derive(Debug, Clone)]
pub struct WannierSamples {
    pub points: Vec<Vec2>,
    pub values: Vec<C64>,
    /// Area per sample point.
    pub cell_area: f64,
}

impl WannierSamples {
    /// Trapezoid-free Riemann sum of |W|².
    pub fn l2_mass(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.cell_area
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// Rows (x, y, value) with the real part as value.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "x,y,value")?;
        for (p, v) in self.points.iter().zip(&self.values) {
            writeln!(w, "{},{},{}", g17(p[0]), g17(p[1]), g17(v.re))?;
        }
        Ok(())
    }
}

/// Lattice translations with |m1|, |m2| ≤ w.
fn window(w: i64) -> impl Iterator<Item = (i64, i64)> {
    (-w..=w).flat_map(move |a| (-w..=w).map(move |b| (a, b)))
}

/// W_0(r) = Σ_i Σ_R u_{i,R} φ_i(r + R) over the window |m1|, |m2| ≤ W.
pub fn wannier_samples(
    coeffs: &BlochCoefficients,
    lat: &Lattice,
    orbitals: &Orbitals,
    w: usize,
    resolution: usize,
) -> Result<WannierSamples> {
    let half = coeffs.n / 2;
    if w > half {
        return Err(Error::WindowTooLarge { w, half });
    }
    if resolution == 0 || orbitals.sigma.len() != coeffs.dim || orbitals.offsets.len() != coeffs.dim
    {
        return Err(Error::InvalidConfig("orbital count or resolution".into()));
    }
    let terms: Vec<(Vec2, usize, C64)> = window(w as i64)
        // the window may reach the Nyquist index when W = n/2; skip it there
        .filter(|&(a, b)| a < half as i64 && b < half as i64)
        .flat_map(|(a, b)| {
            let r = lat.r_vec(a, b);
            coeffs
                .get(a, b)
                .into_iter()
                .enumerate()
                .map(move |(i, z)| (r, i, z))
        })
        .filter(|t| t.2.norm() > 0.0)
        .collect();
    let cutoff = 8.0 * orbitals.sigma.iter().cloned().fold(0.0, f64::max);
    let steps = 2 * w * resolution + 1;
    let h = 1.0 / resolution as f64;
    let points: Vec<Vec2> = (0..steps)
        .flat_map(|p| (0..steps).map(move |q| (p, q)))
        .map(|(p, q)| {
            let c1 = -(w as f64) + p as f64 * h;
            let c2 = -(w as f64) + q as f64 * h;
            [
                c1 * lat.a1[0] + c2 * lat.a2[0],
                c1 * lat.a1[1] + c2 * lat.a2[1],
            ]
        })
        .collect();
    let values = points
        .par_iter()
        .map(|x| {
            let mut acc = C64::new(0.0, 0.0);
            for (r, i, z) in &terms {
                let y = [x[0] + r[0], x[1] + r[1]];
                let d = [
                    y[0] - orbitals.offsets[*i][0],
                    y[1] - orbitals.offsets[*i][1],
                ];
                if d[0].abs() > cutoff || d[1].abs() > cutoff {
                    continue;
                }
                acc += z * orbitals.eval(*i, y);
            }
            acc
        })
        .collect();
    Ok(WannierSamples {
        points,
        values,
        cell_area: lat.v_puc * h * h,
    })
}

/// ∫|W_0|² for the windowed superposition, from exact Gaussian overlaps.
pub fn windowed_mass(
    coeffs: &BlochCoefficients,
    lat: &Lattice,
    orbitals: &Orbitals,
    w: usize,
) -> f64 {
    let half = (coeffs.n / 2) as i64;
    let terms: Vec<(Vec2, usize, C64)> = window(w as i64)
        .filter(|&(a, b)| a < half && b < half)
        .flat_map(|(a, b)| {
            let r = lat.r_vec(a, b);
            coeffs
                .get(a, b)
                .into_iter()
                .enumerate()
                .map(move |(i, z)| (r, i, z))
        })
        .filter(|t| t.2.norm() > 1e-15)
        .collect();
    terms
        .par_iter()
        .map(|(r, i, z)| {
            terms
                .iter()
                .map(|(rp, j, zp)| (z.conj() * zp).re * orbitals.overlap(*i, *r, *j, *rp))
                .sum::<f64>()
        })
        .sum()
}
