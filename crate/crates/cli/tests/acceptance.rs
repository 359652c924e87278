//! Acceptance run: eight end-to-end checks, one PASS/FAIL line each.
//!
//! Built without the libtest harness so the report is printed on every run.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_2_PI, PI, TAU};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use ionqho::decoherence::{ensemble_stats, windowed_slope, NoiseConfig};
use ionqho::fit::{extract_populations, fit_poissonian, fit_squeezed, fit_thermal, required_duration, FitOptions};
use ionqho::fock::{make_coherent, make_fock, make_squeezed_vacuum, make_thermal, DensityMatrix, Populations};
use ionqho::forced::{numeric_propagate_at, propagate_label, CoherentLabel, ForceProfile};
use ionqho::signal::{rabi_ratio, sideband_trace, simulate_cat_interferometer, DriveParams};
use ionqho::tomography::{
    add_projection_noise, reconstruct_density, simulate_qtable, wigner_at, wigner_field, DisplacementGrid, RectGrid,
    DEFAULT_K_PADDING,
};
use ionqho::{rng, C64};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde_json::Value;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// 1 -------------------------------------------------------------------------

/// `|⟨n+1|e^{iηX}|n⟩|` for `X = a + a†`, from the eigendecomposition of the
/// truncated position operator.
fn sideband_elements_by_eigen(eta: f64, nmax: usize) -> Vec<f64> {
    let d = 80;
    let mut x = DMatrix::<f64>::zeros(d, d);
    for n in 0..d - 1 {
        let s = ((n + 1) as f64).sqrt();
        x[(n, n + 1)] = s;
        x[(n + 1, n)] = s;
    }
    let eig = x.symmetric_eigen();
    (0..=nmax)
        .map(|n| {
            (0..d)
                .map(|j| {
                    C64::from_polar(1.0, eta * eig.eigenvalues[j])
                        * (eig.eigenvectors[(n + 1, j)] * eig.eigenvectors[(n, j)])
                })
                .sum::<C64>()
                .norm()
        })
        .collect()
}

fn criterion_1() -> Verdict {
    let eta = 0.202;
    let el = sideband_elements_by_eigen(eta, 8);
    let err = (0..=8).map(|n| (rabi_ratio(n, eta) - el[n] / el[0]).abs()).fold(0.0, f64::max);
    verdict(err < 1e-10, format!("max |closed form - matrix exponential| = {err:.2e} over n = 0..8"))
}

// 2 -------------------------------------------------------------------------

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Synthetic noiseless trace of `pops`, decomposed back into populations.
fn decompose(pops: &[f64]) -> (Vec<f64>, bool) {
    let nmax = pops.len() - 1;
    let drive = DriveParams::new(1.0, 0.202, 1e-3, 0.7).unwrap();
    let duration = 2.0 * required_duration(&drive, nmax);
    let top = (0..=nmax).map(|n| drive.rabi_rate(n)).fold(0.0, f64::max);
    // eight samples per period of the fastest component
    let points = (duration * 2.0 * top * 8.0 / TAU).ceil() as usize;
    let times: Vec<f64> = (0..points).map(|i| duration * i as f64 / (points - 1) as f64).collect();
    let trace = sideband_trace(&times, pops, &drive).unwrap();
    let fit = extract_populations(&trace, &drive, nmax, &FitOptions::default()).unwrap();
    (fit.params.values().cloned().collect(), fit.converged)
}

fn criterion_2() -> Verdict {
    // states truncated to the decomposed range, so each trace lies in the model span
    let nmax = 12;
    let thermal = make_thermal(1.3, nmax + 1).unwrap().populations();
    let coherent = make_coherent(C64::new(3.1f64.sqrt(), 0.0), nmax + 1).populations();
    let squeezed = make_squeezed_vacuum(40.0, nmax + 1).unwrap().populations();
    let opts = FitOptions::default();

    let mut worst_p = 0.0f64;
    let mut all_converged = true;
    let mut recovered = vec![];
    for pops in [&thermal, &coherent, &squeezed] {
        let (got, ok) = decompose(pops);
        worst_p = worst_p.max(max_abs_diff(&got, pops));
        all_converged &= ok;
        recovered.push(got);
    }
    let fits = [
        (fit_thermal(&recovered[0], &opts).unwrap(), "nbar", 1.3),
        (fit_poissonian(&recovered[1], &opts).unwrap(), "nbar", 3.1),
        (fit_squeezed(&recovered[2], &opts).unwrap(), "beta", 40.0),
    ];
    let mut worst_rel = 0.0f64;
    let mut values = vec![];
    for (f, name, target) in &fits {
        let v = f.param(name).unwrap();
        worst_rel = worst_rel.max(rel(v, *target));
        all_converged &= f.converged;
        values.push(format!("{name}={v:.6}"));
    }
    verdict(
        worst_p < 1e-6 && worst_rel < 1e-4 && all_converged,
        format!(
            "max |dP_n| = {worst_p:.2e}, fits {} (max rel err {worst_rel:.2e}), nmax = {nmax}",
            values.join(", ")
        ),
    )
}

// 3 -------------------------------------------------------------------------

fn criterion_3() -> Verdict {
    let mut worst = 0.0f64;
    for a in [0.5, 1.0, 2.0, 2.5] {
        for arg in [0.0, 0.7] {
            let alpha = C64::from_polar(a, arg);
            for k in 0..64 {
                let phi = TAU * k as f64 / 64.0 - PI;
                let a2 = a * a;
                let expected = 0.5 * (1.0 - (-a2 * (1.0 - phi.cos())).exp() * (a2 * phi.sin()).cos());
                worst = worst.max((simulate_cat_interferometer(alpha, phi, 256) - expected).abs());
            }
        }
    }
    verdict(worst < 1e-8, format!("max |sequence - fringe| = {worst:.2e} over 4 amplitudes x 2 phases x 64 phi"))
}

// 4 -------------------------------------------------------------------------

fn tomo_error(truth: &DensityMatrix, shots: Option<(u64, u64)>) -> f64 {
    let grid = DisplacementGrid::new(1.0, 4).unwrap();
    let mut table = simulate_qtable(truth, &grid, 3 + DEFAULT_K_PADDING);
    if let Some((n, seed)) = shots {
        table = add_projection_noise(&table, n, seed).unwrap();
    }
    reconstruct_density(&table, &grid, 3).unwrap().rho.frobenius_distance(truth)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn criterion_4() -> Verdict {
    let fock1 = make_fock(1, 4).unwrap().to_density();
    // the coherent state is truncated to the reconstructable block n <= N - 1
    let coherent = make_coherent(C64::new(0.67, 0.0), 4).to_density();
    let mut pass = true;
    let mut parts = vec![];
    for (name, truth) in [("fock(1)", &fock1), ("coherent 0.67", &coherent)] {
        let clean = tomo_error(truth, None);
        let noisy = median((1..=20).map(|s| tomo_error(truth, Some((10_000, s)))).collect());
        pass &= clean < 1e-6 && noisy < 5e-2;
        parts.push(format!("{name}: noiseless {clean:.2e}, median of 20 seeds {noisy:.2e}"));
    }
    verdict(pass, parts.join("; "))
}

// 5 -------------------------------------------------------------------------

fn criterion_5() -> Verdict {
    let fock1 = make_fock(1, 8).unwrap().to_density();
    let grid = DisplacementGrid::new(1.0, 4).unwrap();
    let rho = reconstruct_density(&simulate_qtable(&fock1, &grid, 3 + DEFAULT_K_PADDING), &grid, 3).unwrap().rho;
    let w0 = wigner_at(&rho, C64::new(0.0, 0.0));
    let err0 = (w0.value + FRAC_2_PI).abs();

    let beta = C64::new(1.5, 0.0);
    let truth = make_coherent(beta, 64).to_density();
    let grid = DisplacementGrid::new(1.5, 24).unwrap();
    let rec = reconstruct_density(&simulate_qtable(&truth, &grid, 23 + DEFAULT_K_PADDING), &grid, 23).unwrap();
    let field = wigner_field(&rec.rho, &RectGrid::square(3.0, 41));
    let errw = field
        .points
        .iter()
        .zip(&field.values)
        .map(|(a, w)| (w - FRAC_2_PI * (-2.0 * (a - beta).norm_sqr()).exp()).abs())
        .fold(0.0, f64::max);
    verdict(
        err0 < 1e-8 && errw < 1e-6 && w0.converged && field.all_converged(),
        format!(
            "|W(0) + 2/pi| = {err0:.2e} for fock(1); coherent |beta| = 1.5 field max error {errw:.2e} on 41x41 over [-3, 3]^2 (N = 24, cond {:.1e})",
            rec.condition_number
        ),
    )
}

// 6 -------------------------------------------------------------------------

fn criterion_6() -> Verdict {
    let omega = 1.0;
    let t_end = 50.0 / omega;
    let dim = 60;
    let mut worst = 1.0f64;
    let mut peak = 0.0f64;
    for case in 0..10u64 {
        let mut r = rng::stream(2024, case);
        let pieces = 40 + (r.random::<f64>() * 40.0) as usize;
        let mut breakpoints: Vec<f64> = (0..pieces - 1).map(|_| r.random::<f64>() * t_end).collect();
        breakpoints.push(0.0);
        breakpoints.push(t_end);
        breakpoints.sort_by(f64::total_cmp);
        let strength = Normal::new(0.0, 0.15).unwrap();
        let values = (0..pieces).map(|_| strength.sample(&mut r)).collect();
        let force = ForceProfile::Table { breakpoints, values };
        let alpha0 = C64::from_polar(2.0 * r.random::<f64>().sqrt(), TAU * r.random::<f64>());
        let label0 = CoherentLabel::new(alpha0, TAU * r.random::<f64>() - PI);

        let exact = propagate_label(&label0, &force, t_end, omega).unwrap();
        let numeric = numeric_propagate_at(&label0.state(dim), &force, &[t_end], 0.01, omega).unwrap();
        // phase-sensitive: Re⟨analytic|numeric⟩ is 1 only if the global phases agree
        let f = exact.state(dim).inner(&numeric[0]).re;
        worst = worst.min(f);
        peak = peak.max(exact.alpha.norm());
    }
    verdict(
        worst > 1.0 - 1e-6,
        format!("min Re<analytic|numeric> = 1 - {:.2e} over 10 random tables (largest |alpha(T)| = {peak:.2})", 1.0 - worst),
    )
}

// 7 -------------------------------------------------------------------------

fn criterion_7() -> Verdict {
    let cfg = NoiseConfig {
        c: 0.005,
        dt: PI / 64.0,
        steps: 4096,
        trajectories: 10_000,
        seed: 1,
        delta_alpha: C64::new(2.0, 0.0),
        omega_x: 1.0,
        record_every: 64,
    };
    let s = ensemble_stats(&cfg).unwrap();
    let (theta_slope, _) = windowed_slope(&s, &s.mean_dtheta_sq, cfg.omega_x, 20.0, 200.0);
    let (amp_slope, _) = windowed_slope(&s, &s.mean_amp_diffusion, cfg.omega_x, 20.0, 200.0);
    let expect_theta = 0.5 * cfg.c * cfg.delta_alpha.norm_sqr();
    let e_theta = rel(theta_slope, expect_theta);
    let e_amp = rel(amp_slope, cfg.c);
    let mut worst_z = 0.0f64;
    let mut all_within = true;
    for ((t, m), se) in s.times.iter().zip(&s.mean_phase_factor).zip(&s.se_phase) {
        let expected = (-cfg.c * cfg.delta_alpha.norm_sqr() * t / 4.0).exp();
        let dev = (m.norm() - expected).abs();
        // at t = 0 every sample is exactly 1 and the standard error is 0
        let ok = if *se > 0.0 { dev <= 3.0 * se } else { dev < 1e-12 };
        all_within &= ok;
        if *se > 0.0 {
            worst_z = worst_z.max(dev / se);
        }
    }
    verdict(
        e_theta < 0.05 && e_amp < 0.05 && all_within,
        format!(
            "<dtheta^2> slope off by {:.2}%, amplitude slope off by {:.2}%, max |phase - analytic|/se = {worst_z:.2} over {} times",
            100.0 * e_theta,
            100.0 * e_amp,
            s.times.len()
        ),
    )
}

// 8 -------------------------------------------------------------------------

/// Runs the binary and returns every output file's bytes, after checking
/// the manifest digests against them.
fn run_cli(args: &[&str], out: &Path, extra: &[&str]) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_ionqho"))
        .args(args)
        .args(extra)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&status.stderr)));
    }
    let manifest: Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    let mut files = BTreeMap::new();
    for entry in manifest["outputs"].as_array().unwrap() {
        let name = entry["file"].as_str().unwrap();
        let bytes = std::fs::read(out.join(name)).unwrap();
        let digest = {
            use sha2::Digest;
            hex::encode(sha2::Sha256::digest(&bytes))
        };
        if digest != entry["sha256"].as_str().unwrap() {
            return Err(format!("manifest digest mismatch for {name}"));
        }
        files.insert(name.to_string(), bytes);
    }
    Ok(files)
}

fn criterion_8() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    std::fs::write(root.join("fig7.json"), r#"{"shots": 10000, "seed": 5}"#).unwrap();
    let fig7_config = root.join("fig7.json");
    let fig7_config = fig7_config.to_str().unwrap();
    let shots_trace = root.join("fit-input.csv");
    let shots_trace = shots_trace.to_str().unwrap().to_string();

    let pipelines: Vec<(&str, Vec<&str>)> = vec![
        ("signal", vec!["signal", "--preset", "fig5", "--shots", "1000", "--seed", "5"]),
        ("signal json", vec!["signal", "--preset", "fig2c", "--shots", "500", "--seed", "9", "--format", "json"]),
        (
            "tomo simulate",
            vec!["tomo", "simulate", "--kind", "coherent", "--alpha", "0.67", "--dim", "4", "--shots", "10000", "--seed", "5"],
        ),
        ("tomo fig7", vec!["tomo", "--preset", "fig7", "--config", fig7_config]),
        ("decohere", vec!["decohere", "--seed", "5", "--trajectories", "3000", "--steps", "1024"]),
        ("fit", vec!["fit", "--model", "cat", "--input", &shots_trace, "--weighted"]),
    ];

    let mut failures = vec![];
    for (i, (name, args)) in pipelines.iter().enumerate() {
        let mut runs = vec![];
        for (j, extra) in [&[][..], &[][..], &["--threads", "1"][..], &["--threads", "4"][..]].iter().enumerate() {
            let out = root.join(format!("p{i}-r{j}"));
            match run_cli(args, &out, extra) {
                Ok(files) => runs.push(files),
                Err(e) => failures.push(format!("{name}: {e}")),
            }
            if i == 0 && j == 0 {
                // the seeded shot trace feeds the fit pipeline
                std::fs::copy(out.join("signal_shots.csv"), &shots_trace).unwrap();
            }
        }
        if runs.windows(2).any(|w| w[0] != w[1]) {
            failures.push(format!("{name}: outputs differ between runs"));
        }
    }
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} seeded pipelines byte-identical over 2 runs and --threads 1 vs 4", pipelines.len())
        } else {
            failures.join("; ")
        },
    )
}

fn main() {
    let checks: [(&str, f64, fn() -> Verdict); 8] = [
        ("rabi-ratio agreement", 1.0, criterion_1),
        ("signal round-trip", 10.0, criterion_2),
        ("cat equivalence", 30.0, criterion_3),
        ("tomography round-trip", 60.0, criterion_4),
        ("wigner negativity", 60.0, criterion_5),
        ("forced-oscillator oracle", 60.0, criterion_6),
        ("decoherence convergence", 300.0, criterion_7),
        ("determinism", f64::INFINITY, criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        let secs = start.elapsed().as_secs_f64();
        let pass = v.pass && secs < *limit;
        if !pass {
            failed += 1;
        }
        let budget = if limit.is_finite() { format!(", limit {limit} s") } else { String::new() };
        println!(
            "criterion {} ({name}): {} | {} | {secs:.2} s{budget}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    if failed > 0 {
        eprintln!("{failed} of {} acceptance criteria failed", checks.len());
        std::process::exit(1);
    }
}
