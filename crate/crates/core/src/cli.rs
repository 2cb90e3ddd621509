//! Batch driver: model selection, pipeline execution, CSV/JSON emission and
//! method comparison.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::altpath::{alt_assignment, berry_curvature_grid};
use crate::error::{Error, Result};
use crate::gauge_opt::{berry_connection_grid, optimize_gauge, wannier_moments, MomentReport};
use crate::grid_spectral::hodge_decompose;
use crate::lattice::Vec2;
use crate::model::{builtin_model, parse_model_file, TightBindingModel};
use crate::numfmt::g17;
use crate::smalllin::Spectrum;
use crate::transport::{
    build_sheet, eigvec_error, max_vector_difference, projector_deviation, Scheme, SheetAssignment,
    TransportOptions,
};
use crate::wannier::{bloch_fourier_coefficients, wannier_result, wannier_samples, Orbitals};

/// Version of the JSON report layout.
pub const REPORT_SCHEMA: u32 = 1;
/// Exit status when a topological obstruction stops the pipeline.
pub const EXIT_OBSTRUCTION: i32 = 2;
pub const EXIT_ERROR: i32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ode,
    Twist,
    Alt,
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Method> {
        match s {
            "ode" => Ok(Method::Ode),
            "twist" => Ok(Method::Twist),
            "alt" => Ok(Method::Alt),
            _ => Err(Error::InvalidConfig(format!("unknown method '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Emit {
    Bands,
    Sheet,
    Connection,
    Hodge,
    Coeffs,
    Wannier,
    Report,
}

impl FromStr for Emit {
    type Err = Error;
    fn from_str(s: &str) -> Result<Emit> {
        Ok(match s {
            "bands" => Emit::Bands,
            "sheet" => Emit::Sheet,
            "connection" => Emit::Connection,
            "hodge" => Emit::Hodge,
            "coeffs" => Emit::Coeffs,
            "wannier" => Emit::Wannier,
            "report" => Emit::Report,
            _ => return Err(Error::InvalidConfig(format!("unknown emit target '{s}'"))),
        })
    }
}

/// Parses a comma-separated emit list.
pub fn parse_emit_list(s: &str) -> Result<BTreeSet<Emit>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(Emit::from_str)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Built-in name or path to a model file.
    pub model: String,
    /// Overrides the model's band index when set.
    pub band: Option<usize>,
    pub n: usize,
    pub method: Method,
    pub optimize: bool,
    pub richardson: bool,
    /// Output directory; nothing is written when `None`.
    pub outputs: Option<PathBuf>,
    pub emit: BTreeSet<Emit>,
    /// Gaussian width for the Wannier samples; defaults to 0.3·min‖a‖.
    pub orbital_sigma: Option<f64>,
}

impl RunConfig {
    pub fn new(model: &str, n: usize) -> RunConfig {
        RunConfig {
            model: model.to_string(),
            band: None,
            n,
            method: Method::Ode,
            optimize: true,
            richardson: true,
            outputs: None,
            emit: [Emit::Report].into_iter().collect(),
            orbital_sigma: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 8 || !self.n.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "grid size {} must be even and at least 8",
                self.n
            )));
        }
        if self.method == Method::Alt && !self.optimize {
            return Err(Error::InvalidConfig(
                "method alt always produces the optimal gauge".into(),
            ));
        }
        if let Some(s) = self.orbital_sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "orbital sigma {s} must be positive"
                )));
            }
        }
        Ok(())
    }

    pub fn transport_options(&self) -> TransportOptions {
        TransportOptions {
            richardson: self.richardson,
            ..TransportOptions::default()
        }
    }
}

/// Resolves a built-in name or reads a model file, then applies the band override.
pub fn load_model(name_or_path: &str, band: Option<usize>) -> Result<TightBindingModel> {
    let mut m = match builtin_model(name_or_path) {
        Ok(m) => m,
        Err(Error::UnknownModel(_)) if Path::new(name_or_path).exists() => {
            parse_model_file(&std::fs::read_to_string(name_or_path)?)?
        }
        Err(e) => return Err(e),
    };
    if let Some(b) = band {
        if b >= m.dim {
            return Err(Error::InvalidConfig(format!(
                "band {b} out of range for dim {}",
                m.dim
            )));
        }
        m.band = b;
    }
    Ok(m)
}

#[derive(Debug, Clone, Default, Serialize, PartialEq)]
pub struct Timings {
    pub transport: f64,
    pub gauge: f64,
    pub wannier: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunReport {
    pub schema_version: u32,
    pub model: String,
    pub band: usize,
    pub n: usize,
    pub method: Method,
    pub optimize: bool,
    pub richardson: bool,
    pub chern: i64,
    pub chern_residual: f64,
    /// True when C1 ≠ 0 stopped the pipeline after the winding step.
    pub obstructed: bool,
    pub phi1: Option<f64>,
    pub center: Option<Vec2>,
    pub center_pre: Option<Vec2>,
    pub variance_pre: Option<f64>,
    pub variance_post: Option<f64>,
    pub e_div: Option<f64>,
    pub e_evec: Option<f64>,
    pub harmonic: Option<Vec2>,
    pub max_imag: Option<f64>,
    pub decay_rate: Option<f64>,
    pub coefficient_mass: Option<f64>,
    pub timings: Timings,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Everything a run produced, kept for emission and inspection.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub model: TightBindingModel,
    /// Stage-2 sheet (pre-optimization); non-periodic when obstructed.
    pub sheet: SheetAssignment,
    /// Final sheet after Stage 3, when it ran.
    pub optimal: Option<SheetAssignment>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.obstructed {
            EXIT_OBSTRUCTION
        } else {
            0
        }
    }

    fn final_sheet(&self) -> &SheetAssignment {
        self.optimal.as_ref().unwrap_or(&self.sheet)
    }
}

fn empty_report(cfg: &RunConfig, m: &TightBindingModel) -> RunReport {
    RunReport {
        schema_version: REPORT_SCHEMA,
        model: cfg.model.clone(),
        band: m.band,
        n: cfg.n,
        method: cfg.method,
        optimize: cfg.optimize,
        richardson: cfg.richardson,
        chern: 0,
        chern_residual: 0.0,
        obstructed: false,
        phi1: None,
        center: None,
        center_pre: None,
        variance_pre: None,
        variance_post: None,
        e_div: None,
        e_evec: None,
        harmonic: None,
        max_imag: None,
        decay_rate: None,
        coefficient_mass: None,
        timings: Timings::default(),
    }
}

/// Runs the configured pipeline and writes the requested outputs.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let m = load_model(&cfg.model, cfg.band)?;
    let outcome = run_model(cfg, m)?;
    if let Some(dir) = &cfg.outputs {
        emit_outputs(cfg, &outcome, dir)?;
    }
    Ok(outcome)
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// Runs the pipeline on an already loaded model; `cfg.model` is used only as a label.
pub fn run_model(cfg: &RunConfig, m: TightBindingModel) -> Result<RunOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let opts = cfg.transport_options();
    let mut report = empty_report(cfg, &m);
    let lat = m.lat;

    if cfg.method == Method::Alt {
        let t = Instant::now();
        let curv = berry_curvature_grid(&m, cfg.n).map_err(|e| e.in_stage("curvature"))?;
        let c1 = curv.c1_integral.round();
        if c1 != 0.0 {
            // obstruction: fall back to the Stage-2 sheet for emission
            let sheet = build_sheet(&m, cfg.n, Scheme::Ode, &opts)?;
            report.chern = c1 as i64;
            report.chern_residual = (curv.c1_integral - c1).abs();
            report.obstructed = true;
            report.timings.transport = secs(t);
            report.timings.total = secs(start);
            return Ok(RunOutcome {
                report,
                model: m,
                sheet,
                optimal: None,
            });
        }
        let alt = alt_assignment(&m, cfg.n, &opts)?;
        report.timings.transport = secs(t);
        let t = Instant::now();
        let w = wannier_result(&alt.sheet, &alt.moments, &lat);
        report.chern_residual = alt.curvature.c1_integral.abs();
        report.center = Some(alt.moments.center);
        report.variance_post = Some(alt.moments.variance);
        report.e_div = Some(alt.e_div);
        report.harmonic = Some([alt.phases.h1, alt.phases.h2]);
        report.max_imag = Some(w.max_imag);
        report.decay_rate = Some(w.decay_rate);
        report.coefficient_mass = Some(w.coeffs.mass());
        report.timings.wannier = secs(t);
        report.timings.total = secs(start);
        let sheet = alt.sheet.clone();
        return Ok(RunOutcome {
            report,
            model: m,
            sheet,
            optimal: Some(alt.sheet),
        });
    }

    let scheme = match cfg.method {
        Method::Twist => Scheme::Twist,
        _ => Scheme::Ode,
    };
    let t = Instant::now();
    let sheet = build_sheet(&m, cfg.n, scheme, &opts)?;
    report.timings.transport = secs(t);
    report.chern = sheet.chern;
    report.chern_residual = sheet.chern_residual;
    report.phi1 = Some(sheet.phi1);
    if sheet.chern != 0 {
        report.obstructed = true;
        report.timings.total = secs(start);
        return Ok(RunOutcome {
            report,
            model: m,
            sheet,
            optimal: None,
        });
    }
    report.e_evec = Some(eigvec_error(&m, &sheet)?);

    let t = Instant::now();
    let (optimal, moments) = if cfg.optimize {
        let opt = optimize_gauge(&sheet, &lat).map_err(|e| e.in_stage("stage 3"))?;
        report.center_pre = Some(opt.before.center);
        report.variance_pre = Some(opt.before.variance);
        report.variance_post = Some(opt.after.variance);
        report.e_div = Some(opt.e_div);
        let after = opt.after;
        (Some(opt.sheet), after)
    } else {
        let mm: MomentReport = wannier_moments(&sheet, &lat);
        report.center_pre = Some(mm.center);
        report.variance_pre = Some(mm.variance);
        (None, mm)
    };
    report.center = Some(moments.center);
    report.timings.gauge = secs(t);

    let t = Instant::now();
    let w = wannier_result(optimal.as_ref().unwrap_or(&sheet), &moments, &lat);
    report.max_imag = Some(w.max_imag);
    report.decay_rate = Some(w.decay_rate);
    report.coefficient_mass = Some(w.coeffs.mass());
    report.timings.wannier = secs(t);
    report.timings.total = secs(start);
    Ok(RunOutcome {
        report,
        model: m,
        sheet,
        optimal,
    })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Writes one CSV per requested field and the JSON report.
pub fn emit_outputs(cfg: &RunConfig, out: &RunOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let m = &out.model;
    let n = cfg.n;
    let kappa = |i: usize| -0.5 + i as f64 / n as f64;
    // an obstructed run still emits bands and the non-periodic sheet
    let periodic_only =
        |e: &Emit| !out.report.obstructed || matches!(e, Emit::Bands | Emit::Sheet | Emit::Report);
    for e in cfg.emit.iter().filter(|e| periodic_only(e)) {
        match e {
            Emit::Report => {
                let mut f = create(dir, "report.json")?;
                writeln!(f, "{}", out.report.to_json())?;
            }
            Emit::Bands => {
                let mut f = create(dir, "bands.csv")?;
                let cols: Vec<String> = (0..m.dim).map(|b| format!("E{b}")).collect();
                writeln!(f, "i1,i2,kappa1,kappa2,{}", cols.join(","))?;
                for i1 in 0..n {
                    for i2 in 0..n {
                        let s = Spectrum::new_unchecked(&m.evaluate_h(kappa(i1), kappa(i2)));
                        let vals: Vec<String> = s.values.iter().map(|&v| g17(v)).collect();
                        writeln!(
                            f,
                            "{i1},{i2},{},{},{}",
                            g17(kappa(i1)),
                            g17(kappa(i2)),
                            vals.join(",")
                        )?;
                    }
                }
            }
            Emit::Sheet => {
                let mut f = create(dir, "sheet.csv")?;
                let s = out.final_sheet();
                writeln!(f, "i1,i2,i,re,im")?;
                for i1 in 0..n {
                    for i2 in 0..n {
                        for (i, z) in s.node_slice(i1, i2).iter().enumerate() {
                            writeln!(f, "{i1},{i2},{i},{},{}", g17(z.re), g17(z.im))?;
                        }
                    }
                }
            }
            Emit::Connection => {
                let c = berry_connection_grid(out.final_sheet(), &m.lat);
                let mut f = create(dir, "connection.csv")?;
                writeln!(f, "i1,i2,a1,a2,ax,ay")?;
                for k in 0..n * n {
                    writeln!(
                        f,
                        "{},{},{},{},{},{}",
                        k / n,
                        k % n,
                        g17(c.a1.data[k].re),
                        g17(c.a2.data[k].re),
                        g17(c.ax.data[k].re),
                        g17(c.ay.data[k].re)
                    )?;
                }
            }
            Emit::Hodge => {
                let c = berry_connection_grid(&out.sheet, &m.lat);
                let h = hodge_decompose(&c.ax, &c.ay, &m.lat);
                let mut f = create(dir, "hodge.csv")?;
                writeln!(f, "i1,i2,psi,f_pot")?;
                for k in 0..n * n {
                    writeln!(
                        f,
                        "{},{},{},{}",
                        k / n,
                        k % n,
                        g17(h.psi.data[k].re),
                        g17(h.f_pot.data[k].re)
                    )?;
                }
                let mut f = create(dir, "hodge_harmonic.csv")?;
                writeln!(f, "hx,hy")?;
                writeln!(f, "{},{}", g17(h.hx), g17(h.hy))?;
            }
            Emit::Coeffs => {
                let mut f = create(dir, "coeffs.csv")?;
                bloch_fourier_coefficients(out.final_sheet()).write_csv(&mut f)?;
            }
            Emit::Wannier => {
                let coeffs = bloch_fourier_coefficients(out.final_sheet());
                let mut orb = Orbitals::default_for(&m.lat, m.dim);
                if let Some(s) = cfg.orbital_sigma {
                    orb.sigma = vec![s; m.dim];
                }
                let samples = wannier_samples(&coeffs, &m.lat, &orb, (n / 2).min(8), 8)?;
                let mut f = create(dir, "wannier.csv")?;
                samples.write_csv(&mut f)?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ComparisonReport {
    pub schema_version: u32,
    pub model: String,
    pub n: usize,
    pub chern: i64,
    /// max node-wise ‖ũ_ode - ũ_twist‖ after Stage 2.
    pub e_para: f64,
    pub variance_ode: Option<f64>,
    pub variance_twist: Option<f64>,
    pub variance_alt: Option<f64>,
    /// Projector distance between the alternative and ODE optimal sheets.
    pub alt_projector_distance: Option<f64>,
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// ODE versus twist transport, plus the alternative construction when C1 = 0.
pub fn compare_methods(cfg: &RunConfig) -> Result<ComparisonReport> {
    cfg.validate()?;
    let m = load_model(&cfg.model, cfg.band)?;
    let opts = cfg.transport_options();
    let ode = build_sheet(&m, cfg.n, Scheme::Ode, &opts)?;
    let twist = build_sheet(&m, cfg.n, Scheme::Twist, &opts)?;
    let mut rep = ComparisonReport {
        schema_version: REPORT_SCHEMA,
        model: cfg.model.clone(),
        n: cfg.n,
        chern: ode.chern,
        e_para: max_vector_difference(&ode, &twist),
        variance_ode: None,
        variance_twist: None,
        variance_alt: None,
        alt_projector_distance: None,
    };
    if ode.chern != 0 {
        return Ok(rep);
    }
    let o = optimize_gauge(&ode, &m.lat)?;
    let t = optimize_gauge(&twist, &m.lat)?;
    let alt = alt_assignment(&m, cfg.n, &opts)?;
    rep.variance_ode = Some(o.after.variance);
    rep.variance_twist = Some(t.after.variance);
    rep.variance_alt = Some(alt.moments.variance);
    rep.alt_projector_distance = Some(projector_deviation(&alt.sheet, &o.sheet));
    Ok(rep)
}
