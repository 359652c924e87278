use std::f64::consts::{PI, TAU};

use clap::{Args, ValueEnum};
use ionqho::signal::{cat_trace, simulate_cat_interferometer, sideband_trace, simulate_detection, SignalTrace};
use ionqho::C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{linspace, Ctx};
use crate::error::{usage, CliResult};
use crate::output::Table;
use crate::spec::{DriveSpec, StateKind, StateSpec};

/// Basis size for the full cat-sequence simulation.
const SEQUENCE_DIM: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// P_down(t) under a blue-sideband drive
    Sideband,
    /// Cat interferometer fringe P_down(phi)
    Cat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalPreset {
    Fig2a,
    Fig2c,
    Fig3a,
    Fig3b,
    Fig5,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalArgs {
    #[arg(long, value_enum)]
    pub preset: Option<SignalPreset>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[command(flatten)]
    #[serde(default)]
    pub state: StateSpec,
    #[command(flatten)]
    #[serde(default)]
    pub drive: DriveSpec,
    /// First abscissa: time (s) or phase (rad)
    #[arg(long, allow_hyphen_values = true)]
    pub start: Option<f64>,
    /// Last abscissa, included
    #[arg(long, allow_hyphen_values = true)]
    pub end: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    /// Fringe contrast c in [0, 1] (cat mode)
    #[arg(long)]
    pub contrast: Option<f64>,
    /// Simulate the pulse sequence instead of the closed form (cat mode)
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub sequence: Option<bool>,
    /// Also write a shot-sampled trace with this many shots per point
    #[arg(long)]
    pub shots: Option<u64>,
}

/// Illustrative drive values; the presets only need a plausible absolute Rabi rate.
fn preset_drive() -> Value {
    json!({ "omega_base": TAU * 50e3, "eta": 0.202, "gamma0": 1.1e4 })
}

pub fn preset(p: SignalPreset) -> Value {
    // long enough to separate the components up to n = 12 (about 205 us at the preset drive)
    let sideband = |state: Value, end: f64, points: usize| {
        json!({
            "preset": p,
            "mode": "sideband",
            "state": state,
            "drive": preset_drive(),
            "start": 0.0,
            "end": end,
            "points": points,
        })
    };
    match p {
        SignalPreset::Fig2a => sideband(json!({ "kind": "fock", "n": 0, "dim": 16 }), 50e-6, 201),
        SignalPreset::Fig2c => sideband(json!({ "kind": "thermal", "nbar": 1.3, "dim": 32 }), 300e-6, 1201),
        SignalPreset::Fig3a => sideband(json!({ "kind": "coherent", "alpha": 3.1f64.sqrt(), "dim": 32 }), 300e-6, 1201),
        SignalPreset::Fig3b => sideband(json!({ "kind": "squeezed", "beta": 40.0, "dim": 128 }), 300e-6, 1201),
        SignalPreset::Fig5 => json!({
            "preset": p,
            "mode": "cat",
            "state": { "alpha": 6.0 },
            "contrast": 1.0,
            "start": -PI,
            "end": PI,
            "points": 256,
        }),
    }
}

pub fn run(ctx: &Ctx, flags: &SignalArgs) -> CliResult<()> {
    let layer = match flags.preset.or_else(|| preset_from_config(&ctx.config)) {
        Some(p) => preset(p),
        None => json!({}),
    };
    let (args, merged): (SignalArgs, _) = ctx.resolve(layer, flags)?;
    let mode = args.mode.unwrap_or(Mode::Sideband);
    let points = args.points.unwrap_or(201);

    let (column, trace) = match mode {
        Mode::Sideband => {
            let end = args.end.ok_or_else(|| usage("sideband mode requires `end` (s)"))?;
            let times = linspace(args.start.unwrap_or(0.0), end, points)?;
            let drive = args.drive.build()?;
            if args.state.is_empty() {
                return Err(usage("sideband mode requires a state (`kind` or `state_file`)"));
            }
            let pops = args.state.build()?.populations();
            ("t", sideband_trace(&times, &pops, &drive)?)
        }
        Mode::Cat => ("phi", cat_signal(&args, points)?),
    };

    let mut out = ctx.output()?;
    out.table("signal", &trace_table(column, &trace))?;
    if let Some(shots) = args.shots {
        let seed = ctx.seed("shot sampling")?;
        let sampled = simulate_detection(&trace, shots, seed)?;
        out.table("signal_shots", &trace_table(column, &sampled))?;
    }
    out.finish("signal", &ctx.echo(merged))
}

fn preset_from_config(config: &Value) -> Option<SignalPreset> {
    config.get("preset").and_then(|v| serde_json::from_value(v.clone()).ok())
}

fn cat_signal(args: &SignalArgs, points: usize) -> CliResult<SignalTrace> {
    if args.state.kind.is_some_and(|k| k != StateKind::Cat) || args.state.state_file.is_some() {
        return Err(usage("cat mode takes only `alpha`, `alpha_im` and `dim` from the state"));
    }
    let alpha = C64::new(
        args.state.alpha.ok_or_else(|| usage("cat mode requires `alpha`"))?,
        args.state.alpha_im.unwrap_or(0.0),
    );
    let c = args.contrast.unwrap_or(1.0);
    if !(0.0..=1.0).contains(&c) {
        return Err(usage(format!("`contrast` must lie in [0, 1], got {c}")));
    }
    let phis = linspace(args.start.unwrap_or(-PI), args.end.unwrap_or(PI), points)?;
    if args.sequence.unwrap_or(false) {
        let dim = args.state.dim.unwrap_or(SEQUENCE_DIM);
        let values: Vec<f64> = phis
            .par_iter()
            .map(|&phi| 0.5 + c * (simulate_cat_interferometer(alpha, phi, dim) - 0.5))
            .collect();
        Ok(SignalTrace::new(phis, values)?)
    } else {
        Ok(cat_trace(&phis, alpha.norm(), c)?)
    }
}

pub fn trace_table(column: &str, trace: &SignalTrace) -> Table {
    match &trace.shots {
        Some(shots) => {
            let mut t = Table::new(&[column, "p_down", "shots"]);
            for ((x, v), n) in trace.abscissa.iter().zip(&trace.values).zip(shots) {
                t.push(vec![*x, *v, *n as f64]);
            }
            t
        }
        None => {
            let mut t = Table::new(&[column, "p_down"]);
            for (x, v) in trace.abscissa.iter().zip(&trace.values) {
                t.push(vec![*x, *v]);
            }
            t
        }
    }
}
