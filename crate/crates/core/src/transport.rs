//! Parallel transport of the selected eigenvector over the torus: RK4 with
//! Richardson extrapolation, boundary phase corrections, sewing phase and
//! winding number, plus the second-order "twist" alignment scheme.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid_spectral::{spectral_derivative_1d, GridField};
use crate::model::{Axis, CMat, TightBindingModel};
use crate::smalllin::{CVec, EigenPair, Spectrum};

/// Winding residual above which rounding to an integer is refused.
pub const WINDING_TOL: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportOptions {
    /// Combine runs at h, h/2, h/4 into a sixth-order result.
    pub richardson: bool,
    /// Use u†Hu/u†u for E instead of integrating dE.
    pub rayleigh: bool,
    /// Extra global phase applied to the initial vector (0 keeps it real under TRS).
    pub v0_phase: f64,
}

impl Default for TransportOptions {
    fn default() -> Self {
        TransportOptions {
            richardson: true,
            rayleigh: true,
            v0_phase: 0.0,
        }
    }
}

/// How vectors are carried along each line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Parallel-transport ODE.
    Ode,
    /// Per-node eigensolve plus sequential phase alignment.
    Twist,
}

fn point(axis: Axis, fixed: f64, s: f64) -> (f64, f64) {
    match axis {
        Axis::K1 => (s, fixed),
        Axis::K2 => (fixed, s),
    }
}

fn normalize(u: &mut CVec) {
    let n = u.norm();
    if n > 0.0 {
        *u /= C64::new(n, 0.0);
    }
}

/// Reusable buffers for right-hand-side evaluations along one line.
struct Workspace {
    h: CMat,
    d1: CMat,
    d2: CMat,
}

impl Workspace {
    fn new(dim: usize) -> Self {
        Workspace {
            h: CMat::zeros(dim, dim),
            d1: CMat::zeros(dim, dim),
            d2: CMat::zeros(dim, dim),
        }
    }

    fn load(&mut self, m: &TightBindingModel, k1: f64, k2: f64, axis: Axis) -> &CMat {
        match axis {
            Axis::K1 => {
                m.evaluate_into(k1, k2, &mut self.h, Some(&mut self.d1), None);
                &self.d1
            }
            Axis::K2 => {
                m.evaluate_into(k1, k2, &mut self.h, None, Some(&mut self.d2));
                &self.d2
            }
        }
    }
}

/// Right-hand side of the transport system at one point.
///
/// Returns (dE, du) with du = -(H - E)⁺ ∂H u - i a u, where `a` is an
/// optional prescribed connection component.
#[allow(clippy::too_many_arguments)]
fn rhs(
    m: &TightBindingModel,
    ws: &mut Workspace,
    k1: f64,
    k2: f64,
    axis: Axis,
    e: f64,
    u: &CVec,
    a: f64,
    rayleigh: bool,
) -> Result<(f64, CVec)> {
    let dh = ws.load(m, k1, k2, axis).clone();
    let spec = Spectrum::new_unchecked(&ws.h);
    let norm2 = u.norm_squared();
    let e = if rayleigh {
        u.dotc(&(&ws.h * u)).re / norm2
    } else {
        e
    };
    let q = &dh * u;
    let de = u.dotc(&q).re / norm2;
    let mut du = -spec
        .pinv_apply(e, &q, m.gap_tol)
        .map_err(|err| err.at_node(k1, k2))?;
    if a != 0.0 {
        du.axpy(C64::new(0.0, -a), u, C64::new(1.0, 0.0));
    }
    Ok((de, du))
}

/// du/dκ along `axis` at a point, as used inside each RK4 stage.
pub fn transport_rhs(
    m: &TightBindingModel,
    k1: f64,
    k2: f64,
    axis: Axis,
    u: &CVec,
) -> Result<CVec> {
    let mut ws = Workspace::new(m.dim);
    rhs(m, &mut ws, k1, k2, axis, 0.0, u, 0.0, true).map(|(_, du)| du)
}

/// A prescribed connection component along a line, evaluated at the running coordinate.
pub type LineConnection<'a> = &'a (dyn Fn(f64) -> f64 + Sync);

/// Fixed-step RK4 from s = -1/2 to 1/2 with `steps` steps, recording every `stride`-th state.
#[allow(clippy::too_many_arguments)]
fn rk4_run(
    m: &TightBindingModel,
    start: &EigenPair,
    fixed: f64,
    axis: Axis,
    steps: usize,
    stride: usize,
    rayleigh: bool,
    conn: Option<LineConnection>,
) -> Result<Vec<(f64, CVec)>> {
    let mut ws = Workspace::new(m.dim);
    let h = 1.0 / steps as f64;
    let mut e = start.value;
    let mut u = start.vector.clone();
    let mut out = Vec::with_capacity(steps / stride + 1);
    out.push((e, u.clone()));
    let a_at = |s: f64| conn.map_or(0.0, |f| f(s));
    let one = C64::new(1.0, 0.0);
    for step in 0..steps {
        let s = -0.5 + step as f64 * h;
        let mut f = |s: f64, e: f64, u: &CVec| {
            let (k1, k2) = point(axis, fixed, s);
            rhs(m, &mut ws, k1, k2, axis, e, u, a_at(s), rayleigh)
        };
        let (de1, du1) = f(s, e, &u)?;
        let (de2, du2) = f(
            s + h / 2.0,
            e + h / 2.0 * de1,
            &(&u + &du1 * C64::new(h / 2.0, 0.0)),
        )?;
        let (de3, du3) = f(
            s + h / 2.0,
            e + h / 2.0 * de2,
            &(&u + &du2 * C64::new(h / 2.0, 0.0)),
        )?;
        let (de4, du4) = f(s + h, e + h * de3, &(&u + &du3 * C64::new(h, 0.0)))?;
        e += h / 6.0 * (de1 + 2.0 * de2 + 2.0 * de3 + de4);
        let w = C64::new(h / 6.0, 0.0);
        u.axpy(w, &du1, one);
        u.axpy(w * 2.0, &du2, one);
        u.axpy(w * 2.0, &du3, one);
        u.axpy(w, &du4, one);
        normalize(&mut u);
        if (step + 1) % stride == 0 {
            out.push((e, u.clone()));
        }
    }
    Ok(out)
}

/// Richardson combination of runs at h, h/2, h/4 sampled on common nodes.
pub fn richardson_triplet<T, S>(y_h: &T, y_h2: &T, y_h4: &T) -> T
where
    T: Clone + std::ops::Mul<S, Output = T> + std::ops::Sub<Output = T>,
    S: From<f64>,
{
    let w = |x: f64| S::from(x);
    let d1 = y_h2.clone() * w(16.0 / 15.0) - y_h.clone() * w(1.0 / 15.0);
    let d2 = y_h4.clone() * w(16.0 / 15.0) - y_h2.clone() * w(1.0 / 15.0);
    d2 * w(32.0 / 31.0) - d1 * w(1.0 / 31.0)
}

fn rayleigh_value(m: &TightBindingModel, k1: f64, k2: f64, u: &CVec) -> f64 {
    let h = m.evaluate_h(k1, k2);
    u.dotc(&(&h * u)).re / u.norm_squared()
}

/// Transports `start` along the line κ_axis ∈ [-1/2, 1/2] with the other
/// coordinate held at `fixed`; returns the n+1 nodes including both ends.
pub fn transport_line(
    m: &TightBindingModel,
    start: &EigenPair,
    fixed: f64,
    axis: Axis,
    n: usize,
    opts: &TransportOptions,
) -> Result<Vec<EigenPair>> {
    transport_line_with(m, start, fixed, axis, n, opts, None)
}

/// [`transport_line`] with an additional -i a(s) u term.
pub fn transport_line_with(
    m: &TightBindingModel,
    start: &EigenPair,
    fixed: f64,
    axis: Axis,
    n: usize,
    opts: &TransportOptions,
    conn: Option<LineConnection>,
) -> Result<Vec<EigenPair>> {
    let run = |r: usize| rk4_run(m, start, fixed, axis, n * r, r, opts.rayleigh, conn);
    let combined: Vec<(f64, CVec)> = if opts.richardson {
        let (a, b, c) = (run(1)?, run(2)?, run(4)?);
        a.iter()
            .zip(&b)
            .zip(&c)
            .map(|((x, y), z)| {
                let e = richardson_triplet::<f64, f64>(&x.0, &y.0, &z.0);
                let u = richardson_triplet::<CVec, C64>(&x.1, &y.1, &z.1);
                (e, u)
            })
            .collect()
    } else {
        run(1)?
    };
    let h = 1.0 / n as f64;
    Ok(combined
        .into_iter()
        .enumerate()
        .map(|(j, (e, mut u))| {
            normalize(&mut u);
            let (k1, k2) = point(axis, fixed, -0.5 + j as f64 * h);
            let value = if opts.rayleigh {
                rayleigh_value(m, k1, k2, &u)
            } else {
                e
            };
            EigenPair { value, vector: u }
        })
        .collect())
}

/// Rotates `v` so that `prev†v` is real and positive.
pub fn align_phase(prev: &CVec, v: &CVec) -> CVec {
    let z = prev.dotc(v);
    if z.norm() == 0.0 {
        return v.clone();
    }
    v * (z.conj() / z.norm())
}

/// Line of per-node eigenvectors, each phase-aligned with its predecessor.
pub fn twist_line(
    m: &TightBindingModel,
    start: &EigenPair,
    fixed: f64,
    axis: Axis,
    n: usize,
) -> Result<Vec<EigenPair>> {
    let h = 1.0 / n as f64;
    let mut out = Vec::with_capacity(n + 1);
    out.push(start.clone());
    for j in 1..=n {
        let (k1, k2) = point(axis, fixed, -0.5 + j as f64 * h);
        let pair = band_pair(m, k1, k2)?;
        let v = align_phase(&out[j - 1].vector, &pair.vector);
        out.push(EigenPair {
            value: pair.value,
            vector: v,
        });
    }
    Ok(out)
}

fn carry_line(
    m: &TightBindingModel,
    start: &EigenPair,
    fixed: f64,
    axis: Axis,
    n: usize,
    scheme: Scheme,
    opts: &TransportOptions,
) -> Result<Vec<EigenPair>> {
    match scheme {
        Scheme::Ode => transport_line(m, start, fixed, axis, n, opts),
        Scheme::Twist => twist_line(m, start, fixed, axis, n),
    }
}

/// Eigenpair of the selected band at a point, after checking its isolation.
pub fn band_pair(m: &TightBindingModel, k1: f64, k2: f64) -> Result<EigenPair> {
    let s = Spectrum::new_unchecked(&m.evaluate_h(k1, k2));
    let b = m.band;
    let mut gap = f64::INFINITY;
    if b > 0 {
        gap = gap.min(s.values[b] - s.values[b - 1]);
    }
    if b + 1 < s.values.len() {
        gap = gap.min(s.values[b + 1] - s.values[b]);
    }
    if gap < m.gap_tol {
        return Err(Error::NearDegenerate {
            gap,
            tol: m.gap_tol,
            at: Some((k1, k2)),
        });
    }
    Ok(s.pair(b))
}

/// Makes the largest-magnitude entry real and positive.
pub fn fix_largest_entry(v: &CVec) -> CVec {
    let (_, big) = v
        .iter()
        .enumerate()
        .fold((0, C64::new(0.0, 0.0)), |acc, (i, &z)| {
            if z.norm() > acc.1.norm() + 1e-12 {
                (i, z)
            } else {
                acc
            }
        });
    if big.norm() == 0.0 {
        return v.clone();
    }
    v * (big.conj() / big.norm())
}

/// Eigenpair at κ = (-1/2, -1/2): realified when the model has TRS, with
/// the largest entry made positive real, then rotated by `opts.v0_phase`.
pub fn initial_vector(m: &TightBindingModel, opts: &TransportOptions) -> Result<EigenPair> {
    let mut p = band_pair(m, -0.5, -0.5)?;
    if m.check_time_reversal() {
        let vtv: C64 = p.vector.iter().map(|z| z * z).sum();
        let alpha = vtv.arg() / 2.0;
        p.vector *= C64::cis(-alpha);
    }
    p.vector = fix_largest_entry(&p.vector);
    if opts.v0_phase != 0.0 {
        p.vector *= C64::cis(opts.v0_phase);
    }
    Ok(p)
}

/// Periodic assignment along γ0 (κ2 = -1/2), nodes j = -n/2..n/2-1.
#[derive(Debug, Clone)]
pub struct EdgeAssignment {
    pub energies: Vec<f64>,
    pub vectors: Vec<CVec>,
    pub phi1: f64,
    /// ‖ũ(-1/2) - ũ(1/2)‖ after the φ1 correction.
    pub closure: f64,
}

pub fn stage1_edge(
    m: &TightBindingModel,
    n: usize,
    scheme: Scheme,
    opts: &TransportOptions,
) -> Result<EdgeAssignment> {
    let start = initial_vector(m, opts)?;
    let line = carry_line(m, &start, -0.5, Axis::K1, n, scheme, opts)?;
    let phi1 = line[0].vector.dotc(&line[n].vector).arg();
    let h = 1.0 / n as f64;
    let gauge = |j: usize| C64::cis(-phi1 * j as f64 * h);
    let closure = (&line[0].vector * gauge(0) - &line[n].vector * gauge(n)).norm();
    let mut energies = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for (j, p) in line.into_iter().take(n).enumerate() {
        energies.push(p.value);
        vectors.push(p.vector * gauge(j));
    }
    Ok(EdgeAssignment {
        energies,
        vectors,
        phi1,
        closure,
    })
}

/// Vertical-line assignment before the φ2 correction.
#[derive(Debug, Clone)]
pub struct RawSheet {
    pub n: usize,
    pub dim: usize,
    pub energies: Vec<f64>,
    /// Flat storage, node (i1, i2) at offset (i1·n + i2)·dim.
    pub vectors: Vec<C64>,
    /// Sewing phases u(κ1,-1/2)†u(κ1,1/2).
    pub z: Vec<C64>,
    pub phi1: f64,
}

pub fn stage2_sheet(
    m: &TightBindingModel,
    edge: &EdgeAssignment,
    n: usize,
    scheme: Scheme,
    opts: &TransportOptions,
) -> Result<RawSheet> {
    let h = 1.0 / n as f64;
    let lines: Vec<Vec<EigenPair>> = (0..n)
        .into_par_iter()
        .map(|i1| {
            let start = EigenPair {
                value: edge.energies[i1],
                vector: edge.vectors[i1].clone(),
            };
            carry_line(m, &start, -0.5 + i1 as f64 * h, Axis::K2, n, scheme, opts)
        })
        .collect::<Result<_>>()?;
    let dim = m.dim;
    let mut energies = Vec::with_capacity(n * n);
    let mut vectors = Vec::with_capacity(n * n * dim);
    let mut z = Vec::with_capacity(n);
    for line in &lines {
        z.push(line[0].vector.dotc(&line[n].vector));
        for p in &line[..n] {
            energies.push(p.value);
            vectors.extend(p.vector.iter());
        }
    }
    Ok(RawSheet {
        n,
        dim,
        energies,
        vectors,
        z,
        phi1: edge.phi1,
    })
}

/// Chern number as the rounded winding of z, with the pre-rounding residual.
pub fn winding_chern(z: &[C64]) -> Result<(i64, f64)> {
    let c = winding_value(z);
    let c1 = c.round();
    let residual = (c - c1).abs();
    if residual > WINDING_TOL || !c.is_finite() {
        return Err(Error::AmbiguousWinding { residual });
    }
    Ok((c1 as i64, residual))
}

/// Re[(h/2πi) Σ z'/z] with z' from spectral differentiation.
pub fn winding_value(z: &[C64]) -> f64 {
    let n = z.len();
    let dz = spectral_derivative_1d(z);
    let s: C64 = dz.iter().zip(z).map(|(d, v)| d / v).sum();
    (s / C64::new(0.0, 2.0 * PI * n as f64)).re
}

/// Nearest-branch increments from the principal value at the first node.
fn unwrap_open(z: &[C64]) -> Vec<f64> {
    let mut phi = Vec::with_capacity(z.len());
    phi.push(z[0].arg());
    for j in 1..z.len() {
        let step = (z[j] / z[j - 1]).arg();
        phi.push(phi[j - 1] + step);
    }
    phi
}

/// Branch-continuous -i log z, periodic when the winding is zero.
pub fn unwrap_phase(z: &[C64]) -> Result<Vec<f64>> {
    let n = z.len();
    let phi = unwrap_open(z);
    let closing = (z[0] / z[n - 1]).arg();
    let total = phi[n - 1] + closing - phi[0];
    let w = (total / (2.0 * PI)).round() as i64;
    if w != 0 {
        return Err(Error::ObstructedBranch { c1: w });
    }
    Ok(phi)
}

/// Gauge-fixed eigenvector field on the n×n grid.
#[derive(Debug, Clone)]
pub struct SheetAssignment {
    pub n: usize,
    pub dim: usize,
    pub energies: Vec<f64>,
    /// Flat storage, node (i1, i2) at offset (i1·n + i2)·dim.
    pub vectors: Vec<C64>,
    pub phi1: f64,
    pub phi2: Vec<f64>,
    pub z: Vec<C64>,
    pub chern: i64,
    pub chern_residual: f64,
}

impl SheetAssignment {
    /// Builds a sheet from a node function; used for synthetic fields and tests.
    pub fn from_fn(n: usize, dim: usize, f: impl Fn(f64, f64) -> CVec) -> SheetAssignment {
        let h = 1.0 / n as f64;
        let mut vectors = Vec::with_capacity(n * n * dim);
        for i1 in 0..n {
            for i2 in 0..n {
                vectors.extend(f(-0.5 + i1 as f64 * h, -0.5 + i2 as f64 * h).iter());
            }
        }
        SheetAssignment {
            n,
            dim,
            energies: vec![0.0; n * n],
            vectors,
            phi1: 0.0,
            phi2: vec![0.0; n],
            z: vec![C64::new(1.0, 0.0); n],
            chern: 0,
            chern_residual: 0.0,
        }
    }

    pub fn vector(&self, i1: usize, i2: usize) -> CVec {
        let o = (i1 * self.n + i2) * self.dim;
        CVec::from_column_slice(&self.vectors[o..o + self.dim])
    }

    pub fn node_slice(&self, i1: usize, i2: usize) -> &[C64] {
        let o = (i1 * self.n + i2) * self.dim;
        &self.vectors[o..o + self.dim]
    }

    /// Component `c` of every node as a grid field.
    pub fn component(&self, c: usize) -> GridField {
        GridField {
            n: self.n,
            data: self
                .vectors
                .iter()
                .skip(c)
                .step_by(self.dim)
                .copied()
                .collect(),
        }
    }

    pub fn set_component(&mut self, c: usize, f: &GridField) {
        for (k, v) in f.data.iter().enumerate() {
            self.vectors[k * self.dim + c] = *v;
        }
    }

    /// Multiplies node vectors by e^{-iθ(node)}.
    pub fn apply_phase(&self, theta: &GridField) -> SheetAssignment {
        let mut out = self.clone();
        for (k, t) in theta.data.iter().enumerate() {
            let g = C64::cis(-t.re);
            for c in 0..self.dim {
                out.vectors[k * self.dim + c] *= g;
            }
        }
        out
    }

    pub fn kappa(&self, i: usize) -> f64 {
        -0.5 + i as f64 / self.n as f64
    }
}

/// ũ = e^{-iφ2(κ1)(κ2 + 1/2)} u on every vertical line.
pub fn stage2_gauge_apply(raw: &RawSheet, phi2: &[f64]) -> SheetAssignment {
    let (n, dim) = (raw.n, raw.dim);
    let h = 1.0 / n as f64;
    let mut vectors = raw.vectors.clone();
    for i1 in 0..n {
        for i2 in 0..n {
            let g = C64::cis(-phi2[i1] * i2 as f64 * h);
            let o = (i1 * n + i2) * dim;
            for v in &mut vectors[o..o + dim] {
                *v *= g;
            }
        }
    }
    SheetAssignment {
        n,
        dim,
        energies: raw.energies.clone(),
        vectors,
        phi1: raw.phi1,
        phi2: phi2.to_vec(),
        z: raw.z.clone(),
        chern: 0,
        chern_residual: 0.0,
    }
}

/// Stages 1 and 2. With nonzero Chern number the φ2 correction is skipped:
/// the sheet stays periodic in κ1 but not in κ2, and `phi2` holds the
/// continuous (non-periodic) branch for inspection.
pub fn build_sheet(
    m: &TightBindingModel,
    n: usize,
    scheme: Scheme,
    opts: &TransportOptions,
) -> Result<SheetAssignment> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!("grid size {n} must be even")));
    }
    let edge = stage1_edge(m, n, scheme, opts).map_err(|e| e.in_stage("stage 1"))?;
    let raw = stage2_sheet(m, &edge, n, scheme, opts).map_err(|e| e.in_stage("stage 2"))?;
    let (chern, residual) = winding_chern(&raw.z).map_err(|e| e.in_stage("winding"))?;
    let mut sheet = if chern == 0 {
        let phi2 = unwrap_phase(&raw.z).map_err(|e| e.in_stage("stage 2"))?;
        stage2_gauge_apply(&raw, &phi2)
    } else {
        let mut s = stage2_gauge_apply(&raw, &vec![0.0; n]);
        s.phi2 = unwrap_open(&raw.z);
        s
    };
    sheet.chern = chern;
    sheet.chern_residual = residual;
    Ok(sheet)
}

/// Stages 1 and 2 with the ODE transport.
pub fn parallel_transport_sheet(
    m: &TightBindingModel,
    n: usize,
    opts: &TransportOptions,
) -> Result<SheetAssignment> {
    build_sheet(m, n, Scheme::Ode, opts)
}

/// Stages 1 and 2 with the second-order alignment scheme.
pub fn twist_transport(m: &TightBindingModel, n: usize) -> Result<SheetAssignment> {
    build_sheet(m, n, Scheme::Twist, &TransportOptions::default())
}

fn projector_distance(u: &[C64], v: &[C64]) -> f64 {
    let mut s = 0.0;
    for i in 0..u.len() {
        for j in 0..u.len() {
            s += (u[i] * u[j].conj() - v[i] * v[j].conj()).norm_sqr();
        }
    }
    s.sqrt()
}

/// Max over nodes of ‖u u† - v v†‖_F between two sheets.
pub fn projector_deviation(a: &SheetAssignment, b: &SheetAssignment) -> f64 {
    (0..a.n * a.n)
        .map(|k| {
            let o = k * a.dim;
            projector_distance(&a.vectors[o..o + a.dim], &b.vectors[o..o + b.dim])
        })
        .fold(0.0, f64::max)
}

/// Max over nodes of the projector distance to a direct eigensolve.
pub fn eigvec_error(m: &TightBindingModel, sheet: &SheetAssignment) -> Result<f64> {
    let n = sheet.n;
    let errs: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (i1, i2) = (k / n, k % n);
            let p = band_pair(m, sheet.kappa(i1), sheet.kappa(i2))?;
            Ok(projector_distance(
                sheet.node_slice(i1, i2),
                p.vector.as_slice(),
            ))
        })
        .collect::<Result<_>>()?;
    Ok(errs.into_iter().fold(0.0, f64::max))
}

/// Max over nodes of ‖H u - E u‖ / ‖H‖.
pub fn eigen_residual(m: &TightBindingModel, sheet: &SheetAssignment) -> f64 {
    let n = sheet.n;
    (0..n * n)
        .map(|k| {
            let (i1, i2) = (k / n, k % n);
            let h = m.evaluate_h(sheet.kappa(i1), sheet.kappa(i2));
            let u = sheet.vector(i1, i2);
            let r = &h * &u - &u * C64::new(sheet.energies[k], 0.0);
            r.norm() / h.norm().max(1e-300)
        })
        .fold(0.0, f64::max)
}

/// Max over nodes of ‖u_a - u_b‖.
pub fn max_vector_difference(a: &SheetAssignment, b: &SheetAssignment) -> f64 {
    a.vectors
        .chunks(a.dim)
        .zip(b.vectors.chunks(b.dim))
        .map(|(x, y)| {
            x.iter()
                .zip(y)
                .map(|(p, q)| (p - q).norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin_model;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn rotating_model() -> TightBindingModel {
        // H(κ1) = cos(2πκ1) σz + sin(2πκ1) σx
        use crate::lattice::Lattice;
        use crate::model::HoppingTerm;
        let half = c(0.5, 0.0);
        let mut t = CMat::zeros(2, 2);
        t[(0, 0)] = half;
        t[(1, 1)] = -half;
        t[(0, 1)] = c(0.0, -0.5);
        t[(1, 0)] = c(0.0, -0.5);
        let t_minus = t.adjoint();
        TightBindingModel::new(
            Lattice::unit(),
            2,
            vec![
                HoppingTerm { m1: 1, m2: 0, t },
                HoppingTerm {
                    m1: -1,
                    m2: 0,
                    t: t_minus,
                },
            ],
            1,
            1e-8,
        )
        .unwrap()
    }

    #[test]
    fn constant_h_keeps_start() {
        let mut h = CMat::zeros(2, 2);
        h[(0, 0)] = c(1.0, 0.0);
        h[(1, 1)] = c(-1.0, 0.0);
        let m = TightBindingModel::constant(h, 1).unwrap();
        let start = band_pair(&m, -0.5, -0.5).unwrap();
        let line =
            transport_line(&m, &start, 0.0, Axis::K1, 8, &TransportOptions::default()).unwrap();
        for p in &line {
            assert!((&p.vector - &start.vector).norm() < 1e-15);
            assert!((p.value - 1.0).abs() < 1e-15);
        }
        let sheet = parallel_transport_sheet(&m, 8, &TransportOptions::default()).unwrap();
        assert!(sheet.z.iter().all(|z| (z - c(1.0, 0.0)).norm() < 1e-14));
        assert_eq!(sheet.chern, 0);
        let edge = stage1_edge(&m, 8, Scheme::Ode, &TransportOptions::default()).unwrap();
        assert!(edge.phi1.abs() < 1e-15);
        let twist = twist_transport(&m, 8).unwrap();
        assert!(max_vector_difference(&sheet, &twist) < 1e-15);
    }

    #[test]
    fn rotating_two_level_system() {
        // top eigenvector of cos θ σz + sin θ σx is (cos θ/2, sin θ/2), a real
        // curve with zero connection
        let m = rotating_model();
        let start = band_pair(&m, -0.5, 0.0).unwrap();
        let n = 40;
        let line =
            transport_line(&m, &start, 0.0, Axis::K1, n, &TransportOptions::default()).unwrap();
        for (j, p) in line.iter().enumerate() {
            let th = 2.0 * PI * (-0.5 + j as f64 / n as f64);
            let exact = CVec::from_vec(vec![c((th / 2.0).cos(), 0.0), c((th / 2.0).sin(), 0.0)]);
            let ov = exact.dotc(&p.vector);
            assert!((ov.norm() - 1.0).abs() < 1e-10);
            let aligned = align_phase(&exact, &p.vector);
            assert!((aligned - &exact).norm() < 1e-9);
            assert!((p.value - 1.0).abs() < 1e-12);
        }
        // zero connection: the phase relative to the real frame stays constant
        let frame = |j: usize| {
            let th = 2.0 * PI * (-0.5 + j as f64 / n as f64);
            CVec::from_vec(vec![c((th / 2.0).cos(), 0.0), c((th / 2.0).sin(), 0.0)])
        };
        let chi0 = frame(0).dotc(&line[0].vector);
        for (j, p) in line.iter().enumerate() {
            assert!((frame(j).dotc(&p.vector) - chi0).norm() < 1e-9);
        }
    }

    #[test]
    fn square3_line_residual() {
        let m = builtin_model("square3").unwrap();
        let start = initial_vector(&m, &TransportOptions::default()).unwrap();
        let line =
            transport_line(&m, &start, -0.5, Axis::K1, 50, &TransportOptions::default()).unwrap();
        for (j, p) in line.iter().enumerate() {
            let k1 = -0.5 + j as f64 / 50.0;
            let h = m.evaluate_h(k1, -0.5);
            let r = (&h * &p.vector - &p.vector * c(p.value, 0.0)).norm();
            assert!(r <= 1e-8, "{r}");
        }
    }

    #[test]
    fn richardson_cancels_h4_h5() {
        let exact = 2.5;
        let f = |h: f64| exact + 3.0 * h.powi(4) - 7.0 * h.powi(5);
        let h = 0.1;
        let y = richardson_triplet::<f64, f64>(&f(h), &f(h / 2.0), &f(h / 4.0));
        assert!((y - exact).abs() < 1e-15);
    }

    fn rk4_exp(n: usize) -> f64 {
        let h = 1.0 / n as f64;
        let mut y = 1.0;
        for _ in 0..n {
            let k1 = y;
            let k2 = y + h / 2.0 * k1;
            let k3 = y + h / 2.0 * k2;
            let k4 = y + h * k3;
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        y
    }

    #[test]
    fn richardson_sixth_order_scalar() {
        let e = 1f64.exp();
        let err = |n: usize| {
            (richardson_triplet::<f64, f64>(&rk4_exp(n), &rk4_exp(2 * n), &rk4_exp(4 * n)) - e)
                .abs()
        };
        let ratio = err(5) / err(10);
        assert!((55.0..=75.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn winding_examples() {
        let z = vec![c(1.0, 0.0); 16];
        assert_eq!(winding_chern(&z).unwrap(), (0, 0.0));
        let n = 32;
        let z: Vec<C64> = (0..n)
            .map(|j| C64::cis(2.0 * PI * j as f64 / n as f64))
            .collect();
        let (c1, r) = winding_chern(&z).unwrap();
        assert_eq!(c1, 1);
        assert!(r <= 1e-12);
        let z: Vec<C64> = (0..n)
            .map(|j| C64::cis(-4.0 * PI * j as f64 / n as f64))
            .collect();
        assert_eq!(winding_chern(&z).unwrap().0, -2);
    }

    #[test]
    fn unwrap_examples() {
        let z = vec![c(0.0, 1.0); 8];
        let phi = unwrap_phase(&z).unwrap();
        assert!(phi.iter().all(|p| (p - PI / 2.0).abs() < 1e-15));

        let n = 64;
        let alpha = 2.5;
        let exact: Vec<f64> = (0..n)
            .map(|j| alpha * (2.0 * PI * (-0.5 + j as f64 / n as f64)).sin())
            .collect();
        let z: Vec<C64> = exact.iter().map(|&p| C64::cis(p)).collect();
        let phi = unwrap_phase(&z).unwrap();
        for (a, b) in phi.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-10);
        }

        let z: Vec<C64> = (0..n)
            .map(|j| C64::cis(2.0 * PI * j as f64 / n as f64))
            .collect();
        assert_eq!(unwrap_phase(&z), Err(Error::ObstructedBranch { c1: 1 }));
    }

    #[test]
    fn initial_vector_is_real_under_trs() {
        for name in ["square3", "haldane-trivial"] {
            let m = builtin_model(name).unwrap();
            let v = initial_vector(&m, &TransportOptions::default()).unwrap();
            assert!(v.vector.iter().all(|z| z.im.abs() < 1e-14), "{name}");
            let big = v.vector.iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(v.vector.iter().any(|z| (z.re - big).abs() < 1e-14));
        }
    }

    #[test]
    fn haldane_edge_reflection() {
        let m = builtin_model("haldane-trivial").unwrap();
        let n = 32;
        let edge = stage1_edge(&m, n, Scheme::Ode, &TransportOptions::default()).unwrap();
        for j in 1..n {
            let a = edge.vectors[j].map(|z| z.conj());
            let b = &edge.vectors[n - j];
            assert!((a - b).norm() <= 1e-8);
        }
    }

    #[test]
    fn square3_edge_closure() {
        let m = builtin_model("square3").unwrap();
        let edge = stage1_edge(&m, 100, Scheme::Ode, &TransportOptions::default()).unwrap();
        assert!(edge.closure <= 1e-9, "{}", edge.closure);
        assert!(edge.vectors.iter().all(|v| (v.norm() - 1.0).abs() <= 1e-10));
    }

    #[test]
    fn tangency_at_random_states() {
        let m = builtin_model("square3").unwrap();
        for (k1, k2) in crate::model::probe_points(20) {
            let p = band_pair(&m, k1, k2).unwrap();
            for axis in [Axis::K1, Axis::K2] {
                let du = transport_rhs(&m, k1, k2, axis, &p.vector).unwrap();
                assert!(p.vector.dotc(&du).norm() <= 1e-8);
            }
        }
    }

    #[test]
    fn near_degenerate_reports_node() {
        // two-fold degenerate band: gap below tolerance everywhere
        let m = TightBindingModel::constant(CMat::identity(2, 2), 1).unwrap();
        let err = parallel_transport_sheet(&m, 4, &TransportOptions::default()).unwrap_err();
        assert!(matches!(
            err.root(),
            Error::NearDegenerate { at: Some(_), .. }
        ));
    }
}
