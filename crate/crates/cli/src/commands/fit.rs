use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use ionqho::fit::{
    extract_populations, fit_cat, fit_damped_sinusoid, fit_poissonian, fit_squeezed, fit_thermal, FitOptions,
    FitResult, DEFAULT_MAX_ITERATIONS,
};
use ionqho::signal::SignalTrace;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::Ctx;
use crate::error::{usage, CliError, CliResult};
use crate::output::Table;
use crate::spec::DriveSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Damped cosine offset + A cos(2 Omega t) exp(-gamma t)
    Sinusoid,
    /// Number-state populations of a sideband trace
    Populations,
    /// Thermal distribution, parameter nbar
    Thermal,
    /// Poisson distribution of a coherent state, parameter nbar
    Poissonian,
    /// Squeezed-vacuum distribution, parameter beta
    Squeezed,
    /// Cat fringe, parameters alpha and c
    Cat,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub model: Option<Model>,
    /// Trace (t or phi, p_down[, shots]) or populations (n, p) table
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    #[serde(default)]
    pub drive: DriveSpec,
    /// Highest number state in the population decomposition
    #[arg(long)]
    pub nmax: Option<usize>,
    /// Weight residuals by the binomial variance of each point
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub weighted: Option<bool>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

enum Data {
    Trace { column: String, trace: SignalTrace },
    Populations(Vec<f64>),
}

fn read_data(path: &Path) -> CliResult<Data> {
    let table = Table::read(path)?;
    if table.column("n").is_some() && table.column("p").is_some() {
        let n = table.require("n", path)?;
        if n.iter().enumerate().any(|(i, &v)| v != i as f64) {
            return Err(usage(format!("{}: population rows must run n = 0, 1, 2, ...", path.display())));
        }
        return Ok(Data::Populations(table.require("p", path)?));
    }
    let column = ["t", "phi", "abscissa"]
        .into_iter()
        .find(|c| table.column(c).is_some())
        .ok_or_else(|| usage(format!("{}: expected a `t` or `phi` column, or `n` and `p`", path.display())))?;
    let x = table.require(column, path)?;
    let y = match table.column("p_down") {
        Some(y) => y,
        None => table.require("value", path)?,
    };
    let mut trace = SignalTrace::new(x, y)?;
    if let Some(shots) = table.column("shots") {
        if shots.iter().any(|s| !(*s >= 1.0 && s.fract() == 0.0)) {
            return Err(usage(format!("{}: shots must be positive integers", path.display())));
        }
        trace = trace.with_shots(shots.iter().map(|s| *s as u64).collect())?;
    }
    Ok(Data::Trace { column: column.to_string(), trace })
}

fn expect_time(model: Model, data: Data) -> CliResult<SignalTrace> {
    match data {
        Data::Trace { column, trace } if column != "phi" => Ok(trace),
        Data::Trace { .. } => Err(usage(format!("model `{model:?}` needs a time trace, got a phase trace"))),
        Data::Populations(_) => Err(usage(format!("model `{model:?}` needs a trace, got populations"))),
    }
}

pub fn run(ctx: &Ctx, flags: &FitArgs) -> CliResult<()> {
    let (a, merged): (FitArgs, _) = ctx.resolve(json!({}), flags)?;
    let model = a.model.ok_or_else(|| usage("fit requires `model`"))?;
    let input = a.input.as_deref().ok_or_else(|| usage("fit requires `input`"))?;
    let opts = FitOptions {
        weighted: a.weighted.unwrap_or(false),
        max_iterations: a.max_iterations.unwrap_or(DEFAULT_MAX_ITERATIONS),
    };
    let data = read_data(input)?;
    let mut out = ctx.output()?;

    let decompose = |trace: &SignalTrace| -> CliResult<FitResult> {
        let nmax = a.nmax.ok_or_else(|| usage("population decomposition requires `nmax`"))?;
        Ok(extract_populations(trace, &a.drive.build()?, nmax, &opts)?)
    };

    let result = match model {
        Model::Sinusoid => fit_damped_sinusoid(&expect_time(model, data)?, &opts)?,
        Model::Populations => decompose(&expect_time(model, data)?)?,
        Model::Cat => match data {
            Data::Trace { column, trace } if column != "t" => fit_cat(&trace, &opts)?,
            _ => return Err(usage("model `cat` needs a phase trace (column `phi`)")),
        },
        Model::Thermal | Model::Poissonian | Model::Squeezed => {
            let pops = match data {
                Data::Populations(p) => p,
                other => {
                    let stage = decompose(&expect_time(model, other)?)?;
                    out.json("populations_fit.json", &stage)?;
                    if !stage.converged {
                        eprintln!("warning: population decomposition did not converge");
                    }
                    stage.params.values().cloned().collect()
                }
            };
            match model {
                Model::Thermal => fit_thermal(&pops, &opts)?,
                Model::Poissonian => fit_poissonian(&pops, &opts)?,
                _ => fit_squeezed(&pops, &opts)?,
            }
        }
    };

    out.json("fit.json", &result)?;
    for (name, v) in &result.params {
        println!("{name} = {v:.10} +/- {:.3e}", result.std_errors[name]);
    }
    for d in &result.diagnostics {
        eprintln!("note: {d}");
    }
    out.finish("fit", &ctx.echo(merged))?;
    if !result.converged {
        return Err(CliError::Numerical(format!(
            "fit did not converge after {} iterations: {}",
            result.iterations,
            result.diagnostics.join("; ")
        )));
    }
    Ok(())
}
