use std::f64::consts::PI;

use clap::Args;
use ionqho::decoherence::{
    analytic_dtheta_sq, decoherence_time, ensemble_stats_with, energy_change_bound, sample_force_values,
    windowed_slope, EnsembleStats, Gaussianity, NoiseConfig,
};
use ionqho::C64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::Ctx;
use crate::error::CliResult;
use crate::output::Table;

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecohereArgs {
    /// Noise strength C (rad^2/s)
    #[arg(long)]
    pub c: Option<f64>,
    /// Time step, also the noise correlation cutoff (s)
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub trajectories: Option<usize>,
    /// Real part of alpha_1 - alpha_2
    #[arg(long, allow_hyphen_values = true)]
    pub delta_alpha: Option<f64>,
    /// Imaginary part of alpha_1 - alpha_2
    #[arg(long, allow_hyphen_values = true)]
    pub delta_alpha_im: Option<f64>,
    /// Trap frequency (rad/s)
    #[arg(long)]
    pub omega_x: Option<f64>,
    /// Record statistics every this many steps
    #[arg(long)]
    pub record_every: Option<usize>,
    /// Slope window, lower end in units of omega_x t
    #[arg(long)]
    pub window_lo: Option<f64>,
    /// Slope window, upper end in units of omega_x t
    #[arg(long)]
    pub window_hi: Option<f64>,
}

impl DecohereArgs {
    pub fn noise_config(&self, seed: u64) -> NoiseConfig {
        NoiseConfig {
            c: self.c.unwrap_or(0.005),
            dt: self.dt.unwrap_or(PI / 64.0),
            steps: self.steps.unwrap_or(4096),
            trajectories: self.trajectories.unwrap_or(10_000),
            seed,
            delta_alpha: C64::new(self.delta_alpha.unwrap_or(2.0), self.delta_alpha_im.unwrap_or(0.0)),
            omega_x: self.omega_x.unwrap_or(1.0),
            record_every: self.record_every.unwrap_or(64),
        }
    }
}

/// `e^{−C|Δα|²t/4}`
pub fn analytic_phase(c: f64, delta_alpha: C64, t: f64) -> f64 {
    (-0.25 * c * delta_alpha.norm_sqr() * t).exp()
}

fn stats_table(cfg: &NoiseConfig, s: &EnsembleStats) -> Table {
    let mut t = Table::new(&[
        "t",
        "mean_dtheta_sq",
        "se",
        "re_phase",
        "im_phase",
        "se_phase",
        "amp_diff",
        "se_amp",
        "analytic_dtheta_sq",
        "analytic_phase",
        "analytic_amp_diff",
    ]);
    for i in 0..s.times.len() {
        let time = s.times[i];
        t.push(vec![
            time,
            s.mean_dtheta_sq[i],
            s.se_dtheta_sq[i],
            s.mean_phase_factor[i].re,
            s.mean_phase_factor[i].im,
            s.se_phase[i],
            s.mean_amp_diffusion[i],
            s.se_amp[i],
            analytic_dtheta_sq(cfg.c, cfg.delta_alpha, cfg.omega_x, time),
            analytic_phase(cfg.c, cfg.delta_alpha, time),
            cfg.c * time,
        ]);
    }
    t
}

/// Largest `|(|⟨e^{iΔθ}⟩| − e^{−C|Δα|²t/4})| / se` over the records with a
/// nonzero standard error.
pub fn max_phase_z(cfg: &NoiseConfig, s: &EnsembleStats) -> f64 {
    s.times
        .iter()
        .zip(&s.mean_phase_factor)
        .zip(&s.se_phase)
        .filter(|(_, se)| **se > 0.0)
        .map(|((t, m), se)| (m.norm() - analytic_phase(cfg.c, cfg.delta_alpha, *t)).abs() / se)
        .fold(0.0, f64::max)
}

pub fn run(ctx: &Ctx, flags: &DecohereArgs) -> CliResult<()> {
    let (a, merged): (DecohereArgs, _) = ctx.resolve(json!({}), flags)?;
    let cfg = a.noise_config(ctx.seed("the decoherence ensemble")?);
    let (stats, finals) = ensemble_stats_with(&cfg, |i| sample_force_values(&cfg, i))?;

    let lo = a.window_lo.unwrap_or(20.0);
    let hi = a.window_hi.unwrap_or(200.0);
    let in_window = stats.times.iter().filter(|t| (lo..=hi).contains(&(*t * cfg.omega_x))).count();
    let slopes = (in_window >= 2).then(|| {
        let (s_theta, _) = windowed_slope(&stats, &stats.mean_dtheta_sq, cfg.omega_x, lo, hi);
        let (s_amp, _) = windowed_slope(&stats, &stats.mean_amp_diffusion, cfg.omega_x, lo, hi);
        (s_theta, s_amp)
    });
    if slopes.is_none() {
        eprintln!("warning: fewer than 2 records in the slope window [{lo}, {hi}] (omega_x t)");
    }
    let expected_theta = 0.5 * cfg.c * cfg.delta_alpha.norm_sqr();
    let g = Gaussianity::from_samples(&finals);
    let summary = json!({
        "window_omega_t": [lo, hi],
        "dtheta_sq_slope": slopes.map(|s| s.0),
        "dtheta_sq_slope_expected": expected_theta,
        "amp_diffusion_slope": slopes.map(|s| s.1),
        "amp_diffusion_slope_expected": cfg.c,
        "max_phase_z": max_phase_z(&cfg, &stats),
        "decoherence_time": decoherence_time(cfg.c, cfg.delta_alpha).ok(),
        "energy_change_bound": energy_change_bound(cfg.alpha1_0()),
        "phase_dominated": cfg.delta_alpha.norm() > 1.0,
        "final_dtheta_gaussianity": {
            "skewness": g.skewness,
            "excess_kurtosis": g.excess_kurtosis,
            "z_skewness": g.z_skewness,
            "z_kurtosis": g.z_kurtosis,
        },
    });
    let mut out = ctx.output()?;
    out.table("ensemble", &stats_table(&cfg, &stats))?;
    out.json("summary.json", &summary)?;
    if let Some((st, sa)) = slopes {
        println!("d<dtheta^2>/dt = {st:.6e} (expected {expected_theta:.6e})");
        println!("d<|dalpha|^2>/dt = {sa:.6e} (expected {:.6e})", cfg.c);
    }
    out.finish("decohere", &ctx.echo(merged))
}
