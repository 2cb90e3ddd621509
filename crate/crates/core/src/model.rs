//! Tight-binding Hamiltonians H(κ) = Σ_R T_R e^{2πi(m1κ1 + m2κ2)} and the
//! built-in example models.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Lattice;

pub type CMat = DMatrix<C64>;

pub const DEFAULT_GAP_TOL: f64 = 1e-8;

/// Names accepted by [`builtin_model`].
pub const BUILTIN_NAMES: [&str; 3] = ["square3", "haldane-trivial", "haldane-chern"];

/// Hopping block T_R for R = m1 a1 + m2 a2.
#[derive(Debug, Clone, PartialEq)]
pub struct HoppingTerm {
    pub m1: i64,
    pub m2: i64,
    pub t: CMat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TightBindingModel {
    pub lat: Lattice,
    pub dim: usize,
    pub terms: Vec<HoppingTerm>,
    /// Selected band, 0-based in ascending eigenvalue order.
    pub band: usize,
    pub gap_tol: f64,
}

/// Derivative direction in κ-space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    K1,
    K2,
}

impl Axis {
    pub fn other(self) -> Axis {
        match self {
            Axis::K1 => Axis::K2,
            Axis::K2 => Axis::K1,
        }
    }
}

impl TightBindingModel {
    /// Builds a model, merging repeated R and checking T_{-R} = T_R^†.
    pub fn new(
        lat: Lattice,
        dim: usize,
        terms: Vec<HoppingTerm>,
        band: usize,
        gap_tol: f64,
    ) -> Result<TightBindingModel> {
        if dim == 0 {
            return Err(Error::ParseError("dim must be positive".into()));
        }
        if band >= dim {
            return Err(Error::ParseError(format!(
                "band {band} out of range for dim {dim}"
            )));
        }
        if !(gap_tol >= 0.0) {
            return Err(Error::ParseError("gap_tol must be non-negative".into()));
        }
        let mut merged: BTreeMap<(i64, i64), CMat> = BTreeMap::new();
        for term in terms {
            if term.t.nrows() != dim || term.t.ncols() != dim {
                return Err(Error::ParseError(format!(
                    "term ({},{}) has shape {}x{}, expected {dim}x{dim}",
                    term.m1,
                    term.m2,
                    term.t.nrows(),
                    term.t.ncols()
                )));
            }
            *merged
                .entry((term.m1, term.m2))
                .or_insert_with(|| CMat::zeros(dim, dim)) += term.t;
        }
        for (&(m1, m2), t) in &merged {
            let partner = merged.get(&(-m1, -m2));
            let scale = 1.0 + t.norm();
            let mismatch = match partner {
                Some(p) => (p - t.adjoint()).norm(),
                None => t.norm(),
            };
            if mismatch > 1e-12 * scale {
                return Err(Error::HermiticityViolation { m1, m2, mismatch });
            }
        }
        let terms = merged
            .into_iter()
            .map(|((m1, m2), t)| HoppingTerm { m1, m2, t })
            .collect();
        Ok(TightBindingModel {
            lat,
            dim,
            terms,
            band,
            gap_tol,
        })
    }

    /// Single on-site block, constant in κ.
    pub fn constant(h: CMat, band: usize) -> Result<TightBindingModel> {
        let dim = h.nrows();
        TightBindingModel::new(
            Lattice::unit(),
            dim,
            vec![HoppingTerm { m1: 0, m2: 0, t: h }],
            band,
            DEFAULT_GAP_TOL,
        )
    }

    pub fn evaluate_h(&self, k1: f64, k2: f64) -> CMat {
        let mut h = CMat::zeros(self.dim, self.dim);
        self.accumulate(k1, k2, &mut h, None, None);
        h
    }

    pub fn evaluate_dh(&self, k1: f64, k2: f64, axis: Axis) -> CMat {
        let mut h = CMat::zeros(self.dim, self.dim);
        let mut d = CMat::zeros(self.dim, self.dim);
        match axis {
            Axis::K1 => self.accumulate(k1, k2, &mut h, Some(&mut d), None),
            Axis::K2 => self.accumulate(k1, k2, &mut h, None, Some(&mut d)),
        }
        d
    }

    /// Fills H and, when requested, ∂H/∂κ1 and ∂H/∂κ2 into the given buffers.
    pub fn evaluate_into(
        &self,
        k1: f64,
        k2: f64,
        h: &mut CMat,
        d1: Option<&mut CMat>,
        d2: Option<&mut CMat>,
    ) {
        h.fill(C64::new(0.0, 0.0));
        let d1 = d1.map(|d| {
            d.fill(C64::new(0.0, 0.0));
            d
        });
        let d2 = d2.map(|d| {
            d.fill(C64::new(0.0, 0.0));
            d
        });
        self.accumulate(k1, k2, h, d1, d2);
    }

    fn accumulate(
        &self,
        k1: f64,
        k2: f64,
        h: &mut CMat,
        mut d1: Option<&mut CMat>,
        mut d2: Option<&mut CMat>,
    ) {
        for term in &self.terms {
            let phase = C64::cis(2.0 * PI * (term.m1 as f64 * k1 + term.m2 as f64 * k2));
            h.zip_apply(&term.t, |x, t| *x += t * phase);
            if let Some(d) = d1.as_deref_mut() {
                if term.m1 != 0 {
                    let w = phase * C64::new(0.0, 2.0 * PI * term.m1 as f64);
                    d.zip_apply(&term.t, |x, t| *x += t * w);
                }
            }
            if let Some(d) = d2.as_deref_mut() {
                if term.m2 != 0 {
                    let w = phase * C64::new(0.0, 2.0 * PI * term.m2 as f64);
                    d.zip_apply(&term.t, |x, t| *x += t * w);
                }
            }
        }
    }

    /// True iff conj(H(k)) = H(-k), probed at 100 quasi-random points.
    pub fn check_time_reversal(&self) -> bool {
        probe_points(100).into_iter().all(|(k1, k2)| {
            let lhs = self.evaluate_h(k1, k2).map(|z| z.conj());
            let rhs = self.evaluate_h(-k1, -k2);
            (lhs - rhs).norm() <= 1e-10
        })
    }

    /// True iff every hopping block is real to 1e-12.
    pub fn has_real_hoppings(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.t.iter().all(|z| z.im.abs() <= 1e-12))
    }

    pub fn to_json(&self) -> String {
        let doc = ModelFile {
            a1: self.lat.a1,
            a2: self.lat.a2,
            dim: self.dim,
            band: self.band,
            gap_tol: Some(self.gap_tol),
            terms: self
                .terms
                .iter()
                .map(|t| TermFile {
                    m1: t.m1,
                    m2: t.m2,
                    re: rows(&t.t, |z| z.re),
                    im: Some(rows(&t.t, |z| z.im)),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("model serialization")
    }
}

fn rows(t: &CMat, f: impl Fn(&C64) -> f64) -> Vec<Vec<f64>> {
    (0..t.nrows())
        .map(|i| (0..t.ncols()).map(|j| f(&t[(i, j)])).collect())
        .collect()
}

/// Additive recurrence points in (-1/2, 1/2)², used for deterministic probing.
pub(crate) fn probe_points(count: usize) -> Vec<(f64, f64)> {
    // plastic-number recurrence; well spread in 2D
    let g = 1.324_717_957_244_746;
    let (s1, s2) = (1.0 / g, 1.0 / (g * g));
    (1..=count)
        .map(|j| {
            let x = (0.5 + s1 * j as f64).fract() - 0.5;
            let y = (0.5 + s2 * j as f64).fract() - 0.5;
            (x, y)
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    a1: [f64; 2],
    a2: [f64; 2],
    dim: usize,
    band: usize,
    #[serde(default)]
    gap_tol: Option<f64>,
    terms: Vec<TermFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermFile {
    m1: i64,
    m2: i64,
    re: Vec<Vec<f64>>,
    #[serde(default)]
    im: Option<Vec<Vec<f64>>>,
}

fn matrix_from_rows(dim: usize, re: &[Vec<f64>], im: Option<&Vec<Vec<f64>>>) -> Result<CMat> {
    let check = |a: &[Vec<f64>], what: &str| -> Result<()> {
        if a.len() != dim || a.iter().any(|r| r.len() != dim) {
            return Err(Error::ParseError(format!("'{what}' must be {dim}x{dim}")));
        }
        Ok(())
    };
    check(re, "re")?;
    if let Some(im) = im {
        check(im, "im")?;
    }
    Ok(CMat::from_fn(dim, dim, |i, j| {
        C64::new(re[i][j], im.map_or(0.0, |m| m[i][j]))
    }))
}

/// Parses and validates a JSON model document.
pub fn parse_model_file(text: &str) -> Result<TightBindingModel> {
    let doc: ModelFile =
        serde_json::from_str(text).map_err(|e| Error::ParseError(e.to_string()))?;
    let lat = Lattice::new(doc.a1, doc.a2)?;
    let terms = doc
        .terms
        .iter()
        .map(|t| {
            Ok(HoppingTerm {
                m1: t.m1,
                m2: t.m2,
                t: matrix_from_rows(doc.dim, &t.re, t.im.as_ref())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    TightBindingModel::new(
        lat,
        doc.dim,
        terms,
        doc.band,
        doc.gap_tol.unwrap_or(DEFAULT_GAP_TOL),
    )
}

struct TermBuilder {
    dim: usize,
    blocks: BTreeMap<(i64, i64), CMat>,
}

impl TermBuilder {
    fn new(dim: usize) -> Self {
        TermBuilder {
            dim,
            blocks: BTreeMap::new(),
        }
    }

    fn add(&mut self, m1: i64, m2: i64, i: usize, j: usize, v: C64) {
        let dim = self.dim;
        self.blocks
            .entry((m1, m2))
            .or_insert_with(|| CMat::zeros(dim, dim))[(i, j)] += v;
    }

    /// Adds v e^{iR·k} at (i,j) and its conjugate partner at (j,i).
    fn add_pair(&mut self, m1: i64, m2: i64, i: usize, j: usize, v: C64) {
        self.add(m1, m2, i, j, v);
        self.add(-m1, -m2, j, i, v.conj());
    }

    fn finish(self) -> Vec<HoppingTerm> {
        self.blocks
            .into_iter()
            .map(|((m1, m2), t)| HoppingTerm { m1, m2, t })
            .collect()
    }
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Three-orbital p-d model on a square lattice rotated by 45°.
fn square3() -> TightBindingModel {
    let (tdd, tpd, tpp, eps_d, eps_p) = (0.1, 2.0, -0.25, 1.0, -2.0);
    let s = 1.0 / 2f64.sqrt();
    let lat = Lattice::new([s, -s], [s, s]).unwrap();
    let mut b = TermBuilder::new(3);
    // with a=1: cos((kx-ky)/√2) = cos 2πκ1, cos((kx+ky)/√2) = cos 2πκ2
    for (orb, eps, t) in [(0, eps_p, tpp), (1, eps_p, tpp), (2, eps_d, tdd)] {
        b.add(0, 0, orb, orb, re(eps));
        for (m1, m2) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            b.add(m1, m2, orb, orb, re(t));
        }
    }
    // H13 = -tpd (e^{2πi(κ1+κ2)} - 1)
    b.add_pair(1, 1, 0, 2, re(-tpd));
    b.add_pair(0, 0, 0, 2, re(tpd));
    // H23 = tpd (e^{2πiκ2} - e^{2πiκ1})
    b.add_pair(0, 1, 1, 2, re(tpd));
    b.add_pair(1, 0, 1, 2, re(-tpd));
    TightBindingModel::new(lat, 3, b.finish(), 2, DEFAULT_GAP_TOL).unwrap()
}

fn honeycomb() -> Lattice {
    let r3 = 3f64.sqrt();
    Lattice::new([r3 / 2.0, 0.5], [r3 / 2.0, -0.5]).unwrap()
}

fn haldane(t1: f64, v0: f64, t2: f64) -> TightBindingModel {
    let mut b = TermBuilder::new(2);
    b.add(0, 0, 0, 0, re(v0));
    b.add(0, 0, 1, 1, re(-v0));
    // H12 = t1 (1 + e^{-2πiκ1} + e^{-2πiκ2})
    for (m1, m2) in [(0, 0), (-1, 0), (0, -1)] {
        b.add_pair(m1, m2, 0, 1, re(t1));
    }
    if t2 != 0.0 {
        // t2 [sin 2πκ1 - sin 2πκ2 - sin 2π(κ1-κ2)] σz, sin θ = (e^{iθ} - e^{-iθ})/2i
        let c = C64::new(0.0, -t2 / 2.0);
        for (m1, m2, sign) in [(1, 0, 1.0), (0, 1, -1.0), (1, -1, -1.0)] {
            for (orb, s) in [(0, 1.0), (1, -1.0)] {
                b.add(m1, m2, orb, orb, c * (sign * s));
                b.add(-m1, -m2, orb, orb, -c * (sign * s));
            }
        }
    }
    TightBindingModel::new(honeycomb(), 2, b.finish(), 1, DEFAULT_GAP_TOL).unwrap()
}

/// Built-in example models; the top band is selected in each.
pub fn builtin_model(name: &str) -> Result<TightBindingModel> {
    match name {
        "square3" => Ok(square3()),
        "haldane-trivial" => Ok(haldane(1.0, 0.5, 0.0)),
        "haldane-chern" => Ok(haldane(1.0, 0.5, -0.45)),
        other => Err(Error::UnknownModel(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Element formulas written directly in (kx, ky).
    fn square3_closed_form(k1: f64, k2: f64) -> CMat {
        let lat = builtin_model("square3").unwrap().lat;
        let k = crate::lattice::k_of_kappa(&lat, k1, k2);
        let (kx, ky) = (k[0], k[1]);
        let s = 1.0 / 2f64.sqrt();
        let (tdd, tpd, tpp, ed, ep) = (0.1, 2.0, -0.25, 1.0, -2.0);
        let cc = ((kx - ky) * s).cos() + ((kx + ky) * s).cos();
        let mut h = CMat::zeros(3, 3);
        h[(0, 0)] = c(ep + 2.0 * tpp * cc, 0.0);
        h[(1, 1)] = h[(0, 0)];
        h[(2, 2)] = c(ed + 2.0 * tdd * cc, 0.0);
        let e = C64::cis(kx * s);
        h[(0, 2)] = -tpd * e * c(0.0, 2.0) * (kx * s).sin();
        h[(1, 2)] = tpd * e * c(0.0, 2.0) * (ky * s).sin();
        h[(2, 0)] = h[(0, 2)].conj();
        h[(2, 1)] = h[(1, 2)].conj();
        h
    }

    fn haldane_closed_form(k1: f64, k2: f64, t2: f64) -> CMat {
        let lat = honeycomb();
        let k = crate::lattice::k_of_kappa(&lat, k1, k2);
        let ka1 = k[0] * lat.a1[0] + k[1] * lat.a1[1];
        let ka2 = k[0] * lat.a2[0] + k[1] * lat.a2[1];
        let off = c(1.0, 0.0) + C64::cis(-ka1) + C64::cis(-ka2);
        let d = t2 * (ka1.sin() - ka2.sin() - (ka1 - ka2).sin());
        let mut h = CMat::zeros(2, 2);
        h[(0, 0)] = c(0.5 + d, 0.0);
        h[(1, 1)] = c(-0.5 - d, 0.0);
        h[(0, 1)] = off;
        h[(1, 0)] = off.conj();
        h
    }

    #[test]
    fn constant_identity_model() {
        let m = TightBindingModel::constant(CMat::identity(2, 2), 0).unwrap();
        let h = m.evaluate_h(0.3, -0.1);
        assert!((h - CMat::identity(2, 2)).norm() < 1e-15);
        assert!(m.evaluate_dh(0.3, -0.1, Axis::K1).norm() == 0.0);
        assert!(m.check_time_reversal());
    }

    #[test]
    fn haldane_trivial_at_gamma() {
        let m = builtin_model("haldane-trivial").unwrap();
        let h = m.evaluate_h(0.0, 0.0);
        assert!((h[(0, 1)] - c(3.0, 0.0)).norm() < 1e-14);
        assert!((h[(0, 0)] - c(0.5, 0.0)).norm() < 1e-14);
        assert!((h[(1, 1)] - c(-0.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn square3_matches_closed_form() {
        let m = builtin_model("square3").unwrap();
        for (k1, k2) in probe_points(200) {
            let d = (m.evaluate_h(k1, k2) - square3_closed_form(k1, k2)).norm();
            assert!(d < 1e-12, "{d} at {k1},{k2}");
        }
    }

    #[test]
    fn haldane_variants_match_closed_form() {
        let triv = builtin_model("haldane-trivial").unwrap();
        let chern = builtin_model("haldane-chern").unwrap();
        for (k1, k2) in probe_points(200) {
            assert!((triv.evaluate_h(k1, k2) - haldane_closed_form(k1, k2, 0.0)).norm() < 1e-12);
            assert!((chern.evaluate_h(k1, k2) - haldane_closed_form(k1, k2, -0.45)).norm() < 1e-12);
        }
    }

    /// Central difference at δ and δ/2 combined to cancel the δ² term.
    fn refined_difference(f: impl Fn(f64) -> CMat, d: f64) -> CMat {
        let cd = |d: f64| (f(d) - f(-d)) / c(2.0 * d, 0.0);
        (cd(d / 2.0) * c(4.0, 0.0) - cd(d)) / c(3.0, 0.0)
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let m = builtin_model("haldane-trivial").unwrap();
        let (k1, k2, d) = (0.2, 0.3, 1e-5);
        let fd = refined_difference(|t| m.evaluate_h(k1 + t, k2), d);
        assert!((m.evaluate_dh(k1, k2, Axis::K1) - fd).norm() < 1e-9);
        let fd = refined_difference(|t| m.evaluate_h(k1, k2 + t), d);
        assert!((m.evaluate_dh(k1, k2, Axis::K2) - fd).norm() < 1e-9);
    }

    #[test]
    fn evaluate_into_agrees() {
        let m = builtin_model("haldane-chern").unwrap();
        let mut h = CMat::zeros(2, 2);
        let mut d1 = CMat::zeros(2, 2);
        let mut d2 = CMat::zeros(2, 2);
        h[(0, 0)] = c(7.0, 0.0);
        m.evaluate_into(0.1, 0.4, &mut h, Some(&mut d1), Some(&mut d2));
        assert!((h - m.evaluate_h(0.1, 0.4)).norm() < 1e-15);
        assert!((d1 - m.evaluate_dh(0.1, 0.4, Axis::K1)).norm() < 1e-15);
        assert!((d2 - m.evaluate_dh(0.1, 0.4, Axis::K2)).norm() < 1e-15);
    }

    #[test]
    fn time_reversal_flags() {
        assert!(builtin_model("square3").unwrap().check_time_reversal());
        assert!(builtin_model("haldane-trivial")
            .unwrap()
            .check_time_reversal());
        assert!(!builtin_model("haldane-chern")
            .unwrap()
            .check_time_reversal());
        for name in BUILTIN_NAMES {
            let m = builtin_model(name).unwrap();
            assert_eq!(m.check_time_reversal(), m.has_real_hoppings(), "{name}");
        }
    }

    #[test]
    fn unknown_model() {
        assert_eq!(
            builtin_model("kagome"),
            Err(Error::UnknownModel("kagome".into()))
        );
    }

    #[test]
    fn parse_minimal_document() {
        let text = r#"{"a1":[1,0],"a2":[0,1],"dim":1,"band":0,"gap_tol":1e-8,
            "terms":[{"m1":0,"m2":0,"re":[[0]],"im":[[0]]}]}"#;
        let m = parse_model_file(text).unwrap();
        assert_eq!(m.dim, 1);
        assert_eq!(m.evaluate_h(0.2, 0.1)[(0, 0)], c(0.0, 0.0));
    }

    #[test]
    fn parse_round_trip() {
        for name in BUILTIN_NAMES {
            let m = builtin_model(name).unwrap();
            let back = parse_model_file(&m.to_json()).unwrap();
            for (k1, k2) in probe_points(20) {
                assert!((m.evaluate_h(k1, k2) - back.evaluate_h(k1, k2)).norm() < 1e-14);
            }
            assert_eq!(back.band, m.band);
        }
    }

    #[test]
    fn parse_rejects_unpaired_term() {
        let text = r#"{"a1":[1,0],"a2":[0,1],"dim":1,"band":0,
            "terms":[{"m1":1,"m2":0,"re":[[1]],"im":[[0]]}]}"#;
        assert!(matches!(
            parse_model_file(text),
            Err(Error::HermiticityViolation { m1: 1, m2: 0, .. })
        ));
        let text = r#"{"a1":[1,0],"a2":[0,1],"dim":1,"band":0,
            "terms":[{"m1":0,"m2":0,"re":[[1]],"im":[[0.5]]}]}"#;
        assert!(matches!(
            parse_model_file(text),
            Err(Error::HermiticityViolation { .. })
        ));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_model_file("{"), Err(Error::ParseError(_))));
        let bad_shape = r#"{"a1":[1,0],"a2":[0,1],"dim":2,"band":0,
            "terms":[{"m1":0,"m2":0,"re":[[1]]}]}"#;
        assert!(matches!(
            parse_model_file(bad_shape),
            Err(Error::ParseError(_))
        ));
        let degenerate = r#"{"a1":[1,0],"a2":[2,0],"dim":1,"band":0,
            "terms":[{"m1":0,"m2":0,"re":[[1]]}]}"#;
        assert!(matches!(
            parse_model_file(degenerate),
            Err(Error::DegenerateLattice { .. })
        ));
        let bad_band = r#"{"a1":[1,0],"a2":[0,1],"dim":1,"band":3,
            "terms":[{"m1":0,"m2":0,"re":[[1]]}]}"#;
        assert!(matches!(
            parse_model_file(bad_band),
            Err(Error::ParseError(_))
        ));
    }

    #[test]
    fn band_gap_on_grid() {
        for name in ["square3", "haldane-trivial", "haldane-chern"] {
            let m = builtin_model(name).unwrap();
            let n = 64;
            let mut min_gap = f64::INFINITY;
            for i in 0..n {
                for j in 0..n {
                    let k1 = i as f64 / n as f64 - 0.5;
                    let k2 = j as f64 / n as f64 - 0.5;
                    let ev = m.evaluate_h(k1, k2).symmetric_eigenvalues();
                    let mut ev: Vec<f64> = ev.iter().copied().collect();
                    ev.sort_by(f64::total_cmp);
                    min_gap = min_gap.min(ev[m.band] - ev[m.band - 1]);
                }
            }
            assert!(min_gap > m.gap_tol, "{name}: {min_gap}");
        }
    }

    proptest! {
        #[test]
        fn hermitian_and_periodic(k1 in -2.0f64..2.0, k2 in -2.0f64..2.0) {
            for name in BUILTIN_NAMES {
                let m = builtin_model(name).unwrap();
                let h = m.evaluate_h(k1, k2);
                prop_assert!((&h - h.adjoint()).norm() <= 1e-12);
                prop_assert!((m.evaluate_h(k1 + 1.0, k2) - &h).norm() <= 1e-12);
                prop_assert!((m.evaluate_h(k1, k2 - 1.0) - &h).norm() <= 1e-12);
                for axis in [Axis::K1, Axis::K2] {
                    let d = m.evaluate_dh(k1, k2, axis);
                    prop_assert!((&d - d.adjoint()).norm() <= 1e-12);
                }
            }
        }
    }
}
