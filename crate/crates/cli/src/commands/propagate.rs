use std::path::PathBuf;

use clap::{Args, ValueEnum};
use ionqho::forced::{numeric_propagate_at, propagate_label, CoherentLabel, ForceProfile};
use ionqho::C64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{linspace, Ctx};
use crate::error::{usage, CliError, CliResult};
use crate::output::Table;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InlineForce {
    Constant,
    Sinusoid,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagateArgs {
    /// Real part of the initial amplitude
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Imaginary part of the initial amplitude
    #[arg(long, allow_hyphen_values = true)]
    pub alpha_im: Option<f64>,
    /// Initial global phase
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    /// Inline force shape
    #[arg(long, value_enum)]
    pub force: Option<InlineForce>,
    /// Force amplitude f0 = x0 F / hbar (rad/s)
    #[arg(long, allow_hyphen_values = true)]
    pub f0: Option<f64>,
    /// Drive frequency of a sinusoidal force (rad/s)
    #[arg(long)]
    pub omega_d: Option<f64>,
    /// Phase of a sinusoidal force
    #[arg(long, allow_hyphen_values = true)]
    pub force_phase: Option<f64>,
    /// Force profile JSON ({"kind": "constant" | "sinusoid" | "table", ...})
    #[arg(long)]
    pub force_file: Option<PathBuf>,
    /// Force profile given inline in the config file
    #[arg(skip)]
    pub profile: Option<ForceProfile>,
    /// Trap frequency (rad/s)
    #[arg(long)]
    pub omega_x: Option<f64>,
    /// Propagation time (s)
    #[arg(long)]
    pub duration: Option<f64>,
    /// Output samples, t = 0 included
    #[arg(long)]
    pub points: Option<usize>,
    /// Add the numerical integrator as an oracle
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub oracle: Option<bool>,
    /// Basis size of the oracle
    #[arg(long)]
    pub dim: Option<usize>,
    /// Maximum step of the oracle (s)
    #[arg(long)]
    pub dt: Option<f64>,
}

impl PropagateArgs {
    fn profile(&self) -> CliResult<ForceProfile> {
        let sources = [self.force.is_some(), self.force_file.is_some(), self.profile.is_some()];
        if sources.iter().filter(|s| **s).count() != 1 {
            return Err(usage("give exactly one of `force`, `force_file` or `profile`"));
        }
        let f0 = || self.f0.ok_or_else(|| usage("inline force requires `f0`"));
        let p = if let Some(kind) = self.force {
            match kind {
                InlineForce::Constant => ForceProfile::Constant { f0: f0()? },
                InlineForce::Sinusoid => ForceProfile::Sinusoid {
                    f0: f0()?,
                    omega_d: self.omega_d.ok_or_else(|| usage("sinusoid force requires `omega_d`"))?,
                    phase: self.force_phase.unwrap_or(0.0),
                },
            }
        } else if let Some(path) = &self.force_file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| usage(format!("{}: bad force profile: {e}", path.display())))?
        } else {
            self.profile.clone().expect("counted above")
        };
        p.validate()?;
        Ok(p)
    }
}

pub fn run(ctx: &Ctx, flags: &PropagateArgs) -> CliResult<()> {
    let (a, merged): (PropagateArgs, _) = ctx.resolve(json!({}), flags)?;
    let force = a.profile()?;
    let omega_x = a.omega_x.unwrap_or(1.0);
    let duration = a.duration.ok_or_else(|| usage("propagate requires `duration`"))?;
    let times = linspace(0.0, duration, a.points.unwrap_or(101))?;
    let label0 = CoherentLabel::new(C64::new(a.alpha.unwrap_or(0.0), a.alpha_im.unwrap_or(0.0)), a.theta.unwrap_or(0.0));
    let labels = times
        .iter()
        .map(|&t| propagate_label(&label0, &force, t, omega_x))
        .collect::<Result<Vec<_>, _>>()?;

    let oracle = a.oracle.unwrap_or(false);
    let mut table = if oracle {
        Table::new(&["t", "re_alpha", "im_alpha", "theta", "fidelity", "phase_error"])
    } else {
        Table::new(&["t", "re_alpha", "im_alpha", "theta"])
    };
    if oracle {
        let dim = a.dim.unwrap_or(40);
        let states = numeric_propagate_at(&label0.state(dim), &force, &times, a.dt.unwrap_or(0.01), omega_x)?;
        for ((t, l), psi) in times.iter().zip(&labels).zip(&states) {
            let ov = l.state(dim).inner(psi);
            table.push(vec![*t, l.alpha.re, l.alpha.im, l.theta, ov.re, ov.arg()]);
        }
        let worst = table.column("fidelity").expect("column exists").into_iter().fold(1.0, f64::min);
        println!("min fidelity = {worst:.12}");
    } else {
        for (t, l) in times.iter().zip(&labels) {
            table.push(vec![*t, l.alpha.re, l.alpha.im, l.theta]);
        }
    }
    let last = labels.last().expect("grid has >= 2 points");
    println!("alpha(T) = {:.10} {:+.10}i, theta(T) = {:.10}", last.alpha.re, last.alpha.im, last.theta);
    let mut out = ctx.output()?;
    out.table("trajectory", &table)?;
    out.finish("propagate", &ctx.echo(merged))
}
