//! Acceptance checks: one PASS/FAIL line per criterion.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64 as C64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use wannier2d::altpath::{alt_assignment, berry_curvature_grid, center_distance_mod_lattice};
use wannier2d::cli::{run_model, RunConfig};
use wannier2d::gauge_opt::{berry_connection_grid, optimize_gauge, OptimalGauge};
use wannier2d::grid_spectral::{
    dft2, hodge_decompose, idft2, laplacian, poisson_solve_torus, spectral_derivative,
    trapezoid_mean, FourierField, GridField,
};
use wannier2d::lattice::Lattice;
use wannier2d::model::{builtin_model, Axis, TightBindingModel};
use wannier2d::smalllin::CVec;
use wannier2d::transport::{
    band_pair, build_sheet, eigvec_error, max_vector_difference, projector_deviation,
    transport_rhs, Scheme, SheetAssignment, TransportOptions,
};
use wannier2d::wannier::{axis_decay_rates, bloch_fourier_coefficients, realness_check};

type Check = std::result::Result<String, String>;

#[derive(Default)]
struct Cache {
    models: HashMap<&'static str, TightBindingModel>,
    sheets: HashMap<(&'static str, usize, bool), SheetAssignment>,
    optimal: HashMap<(&'static str, usize), OptimalGauge>,
}

impl Cache {
    fn model(&mut self, name: &'static str) -> TightBindingModel {
        self.models
            .entry(name)
            .or_insert_with(|| builtin_model(name).expect("built-in model"))
            .clone()
    }

    fn sheet(
        &mut self,
        name: &'static str,
        n: usize,
        twist: bool,
    ) -> Result<&SheetAssignment, String> {
        if !self.sheets.contains_key(&(name, n, twist)) {
            let m = self.model(name);
            let scheme = if twist { Scheme::Twist } else { Scheme::Ode };
            let s = build_sheet(&m, n, scheme, &TransportOptions::default())
                .map_err(|e| format!("{name} n={n}: {e}"))?;
            self.sheets.insert((name, n, twist), s);
        }
        Ok(&self.sheets[&(name, n, twist)])
    }

    fn optimal(&mut self, name: &'static str, n: usize) -> Result<&OptimalGauge, String> {
        if !self.optimal.contains_key(&(name, n)) {
            let lat = self.model(name).lat;
            let s = self.sheet(name, n, false)?;
            let o = optimize_gauge(s, &lat).map_err(|e| format!("{name} n={n}: {e}"))?;
            self.optimal.insert((name, n), o);
        }
        Ok(&self.optimal[&(name, n)])
    }
}

fn require(ok: bool, msg: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

fn chern_numbers(c: &mut Cache) -> Check {
    let mut parts = Vec::new();
    for (name, want) in [("square3", 0), ("haldane-trivial", 0), ("haldane-chern", 1)] {
        let m = c.model(name);
        let t = Instant::now();
        let out = run_model(&RunConfig::new(name, 100), m).map_err(|e| format!("{name}: {e}"))?;
        let secs = t.elapsed().as_secs_f64();
        let r = &out.report;
        require(
            r.chern == want,
            format!("{name}: chern {} != {want}", r.chern),
        )?;
        require(
            r.chern_residual <= 1e-10,
            format!("{name}: residual {:.2e}", r.chern_residual),
        )?;
        require(secs <= 60.0, format!("{name}: {secs:.1} s"))?;
        parts.push(format!(
            "{name} C1={} res={:.1e} {secs:.2}s",
            r.chern, r.chern_residual
        ));
    }
    Ok(parts.join("; "))
}

fn e_evec(c: &mut Cache, name: &'static str, n: usize) -> Result<f64, String> {
    let m = c.model(name);
    let s = c.sheet(name, n, false)?;
    eigvec_error(&m, s).map_err(|e| e.to_string())
}

fn eigenvector_accuracy(c: &mut Cache) -> Check {
    let sq = e_evec(c, "square3", 200)?;
    let ht = e_evec(c, "haldane-trivial", 200)?;
    require(sq <= 1e-9, format!("square3 E_evec {sq:.2e}"))?;
    require(ht <= 1e-10, format!("haldane-trivial E_evec {ht:.2e}"))?;
    Ok(format!("square3 {sq:.2e}, haldane-trivial {ht:.2e}"))
}

fn sixth_order(c: &mut Cache) -> Check {
    let a = e_evec(c, "haldane-trivial", 50)?;
    let b = e_evec(c, "haldane-trivial", 100)?;
    let ratio = a / b;
    require(ratio >= 40.0, format!("ratio {ratio:.1} ({a:.2e}/{b:.2e})"))?;
    Ok(format!(
        "E_evec(50)={a:.2e} E_evec(100)={b:.2e} ratio={ratio:.1}"
    ))
}

fn optimal_moments(c: &mut Cache) -> Check {
    let mut parts = Vec::new();
    for (name, cx, pre, post) in [
        ("square3", -0.217677, 0.317890, 0.313797),
        ("haldane-trivial", -0.184913, 0.270171, 0.233954),
    ] {
        let o = c.optimal(name, 400)?;
        let (b, a) = (&o.before, &o.after);
        for center in [b.center, a.center] {
            require(
                (center[0] - cx).abs() <= 1e-4,
                format!("{name}: center x {:.8}", center[0]),
            )?;
            require(
                center[1].abs() <= 1e-8,
                format!("{name}: center y {:.2e}", center[1]),
            )?;
        }
        require(
            (b.variance - pre).abs() <= 1e-4,
            format!("{name}: variance pre {:.8}", b.variance),
        )?;
        require(
            (a.variance - post).abs() <= 1e-4,
            format!("{name}: variance post {:.8}", a.variance),
        )?;
        parts.push(format!(
            "{name} x={:.6} var {:.6} -> {:.6}",
            a.center[0], b.variance, a.variance
        ));
    }
    Ok(parts.join("; "))
}

fn divergence_elimination(c: &mut Cache) -> Check {
    let mut parts = Vec::new();
    for name in ["square3", "haldane-trivial"] {
        let e = c.optimal(name, 200)?.e_div;
        require(e <= 1e-9, format!("{name}: E_div {e:.2e}"))?;
        parts.push(format!("{name} {e:.2e}"));
    }
    Ok(parts.join(", "))
}

fn realness(c: &mut Cache) -> Check {
    let mut parts = Vec::new();
    for name in ["square3", "haldane-trivial"] {
        let im = realness_check(&bloch_fourier_coefficients(&c.optimal(name, 100)?.sheet));
        require(im <= 1e-7, format!("{name}: max imag {im:.2e}"))?;

        let m = c.model(name);
        let complex_v0 = TransportOptions {
            v0_phase: 0.7,
            ..TransportOptions::default()
        };
        let s = build_sheet(&m, 100, Scheme::Ode, &complex_v0).map_err(|e| e.to_string())?;
        let o = optimize_gauge(&s, &m.lat).map_err(|e| e.to_string())?;
        let ctrl = realness_check(&bloch_fourier_coefficients(&o.sheet));
        require(ctrl > 1e-3, format!("{name}: control imag {ctrl:.2e}"))?;
        parts.push(format!("{name} {im:.1e} (control {ctrl:.2})"));
    }
    Ok(parts.join("; "))
}

fn twist_order(c: &mut Cache) -> Check {
    let reference = [2.59e-3, 6.48e-4, 1.62e-4, 4.05e-5];
    let mut errs = Vec::new();
    for (n, want) in [50, 100, 200, 400].into_iter().zip(reference) {
        let ode = c.sheet("square3", n, false)?.clone();
        let e = max_vector_difference(&ode, c.sheet("square3", n, true)?);
        require(
            e <= 3.0 * want && e >= want / 3.0,
            format!("n={n}: E_para {e:.3e} vs {want:.2e}"),
        )?;
        errs.push(e);
    }
    for w in errs.windows(2) {
        let r = w[0] / w[1];
        require((3.5..=4.5).contains(&r), format!("ratio {r:.3}"))?;
    }
    let shown: Vec<String> = errs.iter().map(|e| format!("{e:.3e}")).collect();
    Ok(format!("E_para {}", shown.join(", ")))
}

fn cross_method(c: &mut Cache) -> Check {
    let mut parts = Vec::new();
    for name in ["square3", "haldane-trivial"] {
        let m = c.model(name);
        let alt = alt_assignment(&m, 200, &TransportOptions::default())
            .map_err(|e| format!("{name}: {e}"))?;
        let o = c.optimal(name, 200)?;
        let d = projector_deviation(&alt.sheet, &o.sheet);
        let dv = (alt.moments.variance - o.after.variance).abs();
        let dc = center_distance_mod_lattice(&m.lat, alt.moments.center, o.after.center);
        require(d <= 1e-7, format!("{name}: projector distance {d:.2e}"))?;
        require(dv <= 1e-6, format!("{name}: variance delta {dv:.2e}"))?;
        require(dc <= 1e-6, format!("{name}: center delta {dc:.2e}"))?;
        parts.push(format!("{name} P={d:.1e} dvar={dv:.1e} dc={dc:.1e}"));
    }
    Ok(parts.join("; "))
}

fn random_field(n: usize, rng: &mut StdRng) -> GridField {
    let mut g = FourierField::zeros(n);
    for m1 in -3i64..=3 {
        for m2 in -3i64..=3 {
            let v = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let (i, j) = (g.index(m1, m2), g.index(-m1, -m2));
            g.coeffs[i] += v;
            g.coeffs[j] += v.conj();
        }
    }
    idft2(&g)
}

fn property_suites(c: &mut Cache) -> Check {
    let mut rng = StdRng::seed_from_u64(2024);
    let lat = Lattice::new([1.0, 0.0], [0.3, 1.2]).map_err(|e| e.to_string())?;
    let mut worst = HashMap::new();
    let mut note = |k: &'static str, v: f64| {
        let e = worst.entry(k).or_insert(0.0f64);
        *e = e.max(v);
    };

    for _ in 0..10 {
        let fx = random_field(32, &mut rng);
        let fy = random_field(32, &mut rng);
        let (rx, ry) = hodge_decompose(&fx, &fy, &lat).recompose(&lat);
        note("hodge", rx.max_abs_diff(&fx).max(ry.max_abs_diff(&fy)));

        let mean = trapezoid_mean(&fx);
        let g = fx.map(|z| z - mean);
        let psi = poisson_solve_torus(&g, &lat).map_err(|e| e.to_string())?;
        note(
            "poisson",
            laplacian(&psi, &lat).zip(&g, |a, b| a + b).max_abs(),
        );

        let f = GridField {
            n: 16,
            data: (0..256)
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
        };
        let fast = dft2(&f);
        let mut d = 0.0f64;
        for (idx, z) in fast.coeffs.iter().enumerate() {
            let (m1, m2) = fast.freq(idx);
            let mut s = C64::new(0.0, 0.0);
            // node j sits at κ = j/n with j in [-n/2, n/2)
            for j1 in -8i64..8 {
                for j2 in -8i64..8 {
                    let ph = -2.0 * PI * ((m1 * j1 + m2 * j2) as f64) / 16.0;
                    s += f.get((j1 + 8) as usize, (j2 + 8) as usize) * C64::cis(ph);
                }
            }
            d = d.max((z - s / 256.0).norm());
        }
        note("dft", d);
    }

    let m = c.model("square3");
    for _ in 0..50 {
        let (k1, k2) = (rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
        let p = band_pair(&m, k1, k2).map_err(|e| e.to_string())?;
        for axis in [Axis::K1, Axis::K2] {
            let du = transport_rhs(&m, k1, k2, axis, &p.vector).map_err(|e| e.to_string())?;
            note("tangency", p.vector.dotc(&du).norm());
        }
    }

    // gauge change u -> e^{-iθ}u shifts A_j by ∂θ/∂κj
    let n = 64;
    let s = SheetAssignment::from_fn(n, 2, |k1, k2| {
        let a = 0.4 + 0.3 * (2.0 * PI * k1).cos() * (2.0 * PI * k2).sin();
        let b = (2.0 * PI * (k1 - k2)).sin();
        CVec::from_vec(vec![C64::new(a.cos(), 0.0), C64::cis(b) * a.sin()])
    });
    let theta = GridField::from_real(n, |k1, k2| {
        (2.0 * PI * k1).sin() + 0.3 * (2.0 * PI * (k1 + k2)).cos()
    });
    let c0 = berry_connection_grid(&s, &lat);
    let c1 = berry_connection_grid(&s.apply_phase(&theta), &lat);
    for (a1, a0, ax) in [(&c1.a1, &c0.a1, Axis::K1), (&c1.a2, &c0.a2, Axis::K2)] {
        let g = spectral_derivative(&theta, ax).real_part();
        note("gauge", a1.zip(a0, |x, y| x - y).max_abs_diff(&g));
    }

    let ht = c.model("haldane-trivial");
    let curv = berry_curvature_grid(&ht, 32).map_err(|e| e.to_string())?;
    let n = 32;
    for i1 in 0..n {
        for i2 in 0..n {
            let w = curv.omega.get(i1, i2) + curv.omega.get((n - i1) % n, (n - i2) % n);
            note("omega_trs", w.norm());
        }
    }

    let mass = bloch_fourier_coefficients(&c.optimal("haldane-trivial", 100)?.sheet).mass();
    note("parseval", (mass - 1.0).abs());

    let limits = [
        ("hodge", 1e-11),
        ("poisson", 1e-10),
        ("dft", 1e-12),
        ("tangency", 1e-8),
        ("gauge", 1e-10),
        ("omega_trs", 1e-8),
        ("parseval", 1e-8),
    ];
    let mut parts = Vec::new();
    for (k, lim) in limits {
        let v = worst[k];
        require(v <= lim, format!("{k}: {v:.2e} > {lim:.0e}"))?;
        parts.push(format!("{k} {v:.1e}"));
    }
    Ok(parts.join(", "))
}

fn decay_asymmetry(c: &mut Cache) -> Check {
    let s = c.sheet("haldane-chern", 100, false)?;
    require(s.chern == 1, format!("chern {}", s.chern))?;
    let coeffs = bloch_fourier_coefficients(s);
    let (periodic, open) = axis_decay_rates(&coeffs, 25);
    let ratio = periodic / open;
    require(
        periodic < 0.0 && ratio >= 4.0,
        format!("slopes {periodic:.3} / {open:.3}"),
    )?;
    Ok(format!(
        "slopes {periodic:.3} vs {open:.3}, ratio {ratio:.1}"
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn(&mut Cache) -> Check); 10] = [
        ("chern numbers", chern_numbers),
        ("eigenvector accuracy", eigenvector_accuracy),
        ("sixth-order convergence", sixth_order),
        ("optimal moments", optimal_moments),
        ("divergence elimination", divergence_elimination),
        ("realness", realness),
        ("twist-scheme order", twist_order),
        ("cross-method agreement", cross_method),
        ("property suites", property_suites),
        ("obstructed decay asymmetry", decay_asymmetry),
    ];
    let mut cache = Cache::default();
    let mut failed = 0;
    for (i, (label, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let res = f(&mut cache);
        let secs = t.elapsed().as_secs_f64();
        match res {
            Ok(d) => println!("PASS {:>2} {label}: {d} [{secs:.1}s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {label}: {d} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
