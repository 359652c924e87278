use std::path::{Path, PathBuf};

use clap::{Args, Subcommand, ValueEnum};
use ionqho::fock::{DensityMatrix, Populations};
use ionqho::tomography::{
    add_projection_noise, reconstruct_density, simulate_qtable, wigner_field, DisplacementGrid, QTable,
    Reconstruction, RectGrid, WignerField, DEFAULT_K_PADDING,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::Ctx;
use crate::error::{usage, CliError, CliResult};
use crate::output::{Output, Table};
use crate::spec::{load_state, StateSpec};

const DEFAULT_RADIUS: f64 = 1.0;
const DEFAULT_COUNT_N: usize = 4;
const DEFAULT_HALF: f64 = 3.0;
const DEFAULT_POINTS: usize = 41;

#[derive(Clone, Debug, Args)]
#[command(args_conflicts_with_subcommands = true)]
pub struct TomoCmd {
    /// Run the whole simulate, reconstruct and Wigner pipeline for a figure
    #[arg(long, value_enum)]
    pub preset: Option<TomoPreset>,
    #[command(subcommand)]
    pub action: Option<TomoAction>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TomoPreset {
    /// n = 1 number state
    Fig7,
    /// coherent state, |beta| = 1.5
    Fig8,
}

#[derive(Clone, Debug, Subcommand)]
pub enum TomoAction {
    /// Displaced populations Q_k(alpha_p) of a state on a circle of displacements
    Simulate(SimulateArgs),
    /// Density matrix from a Q table
    Reconstruct(ReconstructArgs),
    /// Wigner function of a density matrix on a square grid
    Wigner(WignerArgs),
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(default)]
    pub state: StateSpec,
    /// Displacement magnitude |alpha|
    #[arg(long)]
    pub radius: Option<f64>,
    /// N: the circle holds 2N displacements
    #[arg(long)]
    pub count_n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub phase_offset: Option<f64>,
    /// Highest k recorded (default N - 1 + 8)
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Projection noise: shots per displacement
    #[arg(long)]
    pub shots: Option<u64>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructArgs {
    /// Q table written by `tomo simulate`
    #[arg(long)]
    pub qtable: Option<PathBuf>,
    /// Grid JSON written by `tomo simulate`
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Highest number state reconstructed (default N - 1)
    #[arg(long)]
    pub nmax: Option<usize>,
    /// Ground-truth state JSON for the round-trip error
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerArgs {
    /// Density matrix JSON (or use an inline state)
    #[arg(long)]
    pub density: Option<PathBuf>,
    #[command(flatten)]
    #[serde(default)]
    pub state: StateSpec,
    /// The grid spans [-half, half] on both axes
    #[arg(long)]
    pub half: Option<f64>,
    /// Points per axis
    #[arg(long)]
    pub points: Option<usize>,
}

/// Config fields of a preset pipeline run.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineArgs {
    pub preset: Option<TomoPreset>,
    #[serde(default)]
    pub state: StateSpec,
    pub radius: Option<f64>,
    pub count_n: Option<usize>,
    pub kmax: Option<usize>,
    pub nmax: Option<usize>,
    pub shots: Option<u64>,
    pub half: Option<f64>,
    pub points: Option<usize>,
}

pub fn preset(p: TomoPreset) -> Value {
    match p {
        TomoPreset::Fig7 => json!({
            "preset": p,
            "state": { "kind": "fock", "n": 1, "dim": 8 },
            "radius": 1.0,
            "count_n": 4,
        }),
        TomoPreset::Fig8 => json!({
            "preset": p,
            "state": { "kind": "coherent", "alpha": 1.5, "dim": 64 },
            "radius": FIG8_RADIUS,
            "count_n": FIG8_COUNT_N,
        }),
    }
}

/// Reconstruction circle for the |beta| = 1.5 coherent state: N must cover
/// the Poisson tail (P(n >= 24) is about 5e-17).
pub const FIG8_COUNT_N: usize = 24;
pub const FIG8_RADIUS: f64 = 1.5;

pub fn run(ctx: &Ctx, cmd: &TomoCmd) -> CliResult<()> {
    match (&cmd.action, cmd.preset) {
        (Some(TomoAction::Simulate(a)), _) => simulate_cmd(ctx, a),
        (Some(TomoAction::Reconstruct(a)), _) => reconstruct_cmd(ctx, a),
        (Some(TomoAction::Wigner(a)), _) => wigner_cmd(ctx, a),
        (None, Some(p)) => pipeline_cmd(ctx, p),
        (None, None) => Err(usage("tomo needs a subcommand (simulate | reconstruct | wigner) or --preset")),
    }
}

fn simulate(
    ctx: &Ctx,
    state: &StateSpec,
    radius: Option<f64>,
    count_n: Option<usize>,
    phase_offset: Option<f64>,
    kmax: Option<usize>,
    shots: Option<u64>,
) -> CliResult<(DensityMatrix, DisplacementGrid, QTable)> {
    let count_n = count_n.unwrap_or(DEFAULT_COUNT_N);
    let grid = DisplacementGrid::with_offset(
        radius.unwrap_or(DEFAULT_RADIUS),
        count_n,
        phase_offset.unwrap_or(0.0),
    )?;
    let kmax = kmax.unwrap_or(count_n.saturating_sub(1) + DEFAULT_K_PADDING);
    let rho = state.build()?.density()?;
    let mut table = simulate_qtable(&rho, &grid, kmax);
    if let Some(shots) = shots {
        table = add_projection_noise(&table, shots, ctx.seed("projection noise")?)?;
    }
    Ok((rho, grid, table))
}

fn simulate_cmd(ctx: &Ctx, flags: &SimulateArgs) -> CliResult<()> {
    let (a, merged): (SimulateArgs, _) = ctx.resolve(json!({}), flags)?;
    let (rho, grid, table) = simulate(ctx, &a.state, a.radius, a.count_n, a.phase_offset, a.kmax, a.shots)?;
    let mut out = ctx.output()?;
    out.table("qtable", &qtable_to_table(&table, &grid))?;
    out.json("grid.json", &grid)?;
    out.json("truth.json", &rho)?;
    out.finish("tomo simulate", &ctx.echo(merged))
}

fn reconstruct_cmd(ctx: &Ctx, flags: &ReconstructArgs) -> CliResult<()> {
    let (a, merged): (ReconstructArgs, _) = ctx.resolve(json!({}), flags)?;
    let qpath = a.qtable.as_deref().ok_or_else(|| usage("reconstruct requires `qtable`"))?;
    let gpath = a.grid.as_deref().ok_or_else(|| usage("reconstruct requires `grid`"))?;
    let grid: DisplacementGrid = read_json(gpath)?;
    let table = table_to_qtable(&Table::read(qpath)?, qpath)?;
    let truth = a.truth.as_deref().map(|p| load_state(p)?.density()).transpose()?;
    let nmax = a.nmax.unwrap_or(grid.count_n - 1);
    let rec = reconstruct_density(&table, &grid, nmax)?;
    let mut out = ctx.output()?;
    write_reconstruction(&mut out, &rec, truth.as_ref())?;
    out.finish("tomo reconstruct", &ctx.echo(merged))
}

fn wigner_cmd(ctx: &Ctx, flags: &WignerArgs) -> CliResult<()> {
    let (a, merged): (WignerArgs, _) = ctx.resolve(json!({}), flags)?;
    let rho = match (&a.density, a.state.is_empty()) {
        (Some(p), true) => read_json::<DensityMatrix>(p)?,
        (None, false) => a.state.build()?.density()?,
        (Some(_), false) => return Err(usage("give either `density` or a state, not both")),
        (None, true) => return Err(usage("wigner requires `density` or a state")),
    };
    let mut out = ctx.output()?;
    write_wigner(&mut out, &rho, a.half, a.points)?;
    out.finish("tomo wigner", &ctx.echo(merged))
}

fn pipeline_cmd(ctx: &Ctx, p: TomoPreset) -> CliResult<()> {
    let flags = PipelineArgs { preset: Some(p), ..Default::default() };
    let (a, merged): (PipelineArgs, _) = ctx.resolve(preset(p), &flags)?;
    let (rho, grid, table) = simulate(ctx, &a.state, a.radius, a.count_n, None, a.kmax, a.shots)?;
    let nmax = a.nmax.unwrap_or(grid.count_n - 1);
    let rec = reconstruct_density(&table, &grid, nmax)?;
    let mut out = ctx.output()?;
    out.table("qtable", &qtable_to_table(&table, &grid))?;
    out.json("grid.json", &grid)?;
    out.json("truth.json", &rho)?;
    write_reconstruction(&mut out, &rec, Some(&rho))?;
    write_wigner(&mut out, &rec.rho, a.half, a.points)?;
    out.finish("tomo", &ctx.echo(merged))
}

fn write_reconstruction(out: &mut Output, rec: &Reconstruction, truth: Option<&DensityMatrix>) -> CliResult<()> {
    let rho = &rec.rho;
    out.json("density.json", rho)?;
    let mut t = Table::new(&["n", "m", "re", "im", "abs", "arg"]);
    for n in 0..rho.dim() {
        for m in 0..rho.dim() {
            let z = rho.get(n, m);
            t.push(vec![n as f64, m as f64, z.re, z.im, z.norm(), z.arg()]);
        }
    }
    out.table("rho", &t)?;
    let error = truth.map(|t| rho.frobenius_distance(t));
    let report = json!({
        "nmax": rho.dim() - 1,
        "condition_number": rec.condition_number,
        "residual_norm": rec.residual_norm,
        "min_eigenvalue": rho.min_eigenvalue(),
        "populations": rho.populations(),
        "frobenius_error": error,
    });
    out.json("reconstruction.json", &report)?;
    println!("condition number = {:.6e}", rec.condition_number);
    if let Some(e) = error {
        println!("frobenius error = {e:.6e}");
    }
    let diag: Vec<String> = rho.populations().iter().map(|p| format!("{p:.6}")).collect();
    println!("diagonal = [{}]", diag.join(", "));
    Ok(())
}

fn write_wigner(out: &mut Output, rho: &DensityMatrix, half: Option<f64>, points: Option<usize>) -> CliResult<()> {
    let half = half.unwrap_or(DEFAULT_HALF);
    let points = points.unwrap_or(DEFAULT_POINTS);
    if !(half > 0.0) || points == 0 {
        return Err(usage("wigner grid needs `half` > 0 and `points` >= 1"));
    }
    let field = wigner_field(rho, &RectGrid::square(half, points));
    out.table("wigner", &wigner_table(&field))?;
    let (imin, wmin) = field
        .values
        .iter()
        .cloned()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty grid");
    println!("min W = {wmin:.6e} at alpha = {}", field.points[imin]);
    if !field.all_converged() {
        eprintln!("warning: the parity sum did not meet its tail criterion at some grid points");
    }
    Ok(())
}

pub fn wigner_table(field: &WignerField) -> Table {
    let mut t = Table::new(&["re_alpha", "im_alpha", "w", "converged"]);
    for ((a, w), c) in field.points.iter().zip(&field.values).zip(&field.converged) {
        t.push(vec![a.re, a.im, *w, if *c { 1.0 } else { 0.0 }]);
    }
    t
}

pub fn qtable_to_table(q: &QTable, grid: &DisplacementGrid) -> Table {
    let mut t = Table::new(&["p", "k", "q"]);
    for (i, row) in q.rows().iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            t.push(vec![grid.label(i) as f64, k as f64, *v]);
        }
    }
    t
}

/// Rows grouped by `p` in file order, each with `k = 0, 1, ...`.
pub fn table_to_qtable(t: &Table, source: &Path) -> CliResult<QTable> {
    let p = t.require("p", source)?;
    let k = t.require("k", source)?;
    let q = t.require("q", source)?;
    let mut rows: Vec<Vec<f64>> = vec![];
    let mut last_p = None;
    for i in 0..q.len() {
        if last_p != Some(p[i]) {
            rows.push(vec![]);
            last_p = Some(p[i]);
        }
        let row = rows.last_mut().expect("pushed above");
        if k[i] != row.len() as f64 {
            return Err(usage(format!("{}: row {} has k = {}, expected {}", source.display(), i + 1, k[i], row.len())));
        }
        row.push(q[i]);
    }
    Ok(QTable::new(rows)?)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}
