use serde_json::json;

use super::Ctx;
use crate::error::CliResult;
use crate::output::Table;
use crate::spec::{Built, StateSpec};
use ionqho::fock::Populations;

pub fn run(ctx: &Ctx, flags: &StateSpec) -> CliResult<()> {
    let (spec, merged): (StateSpec, _) = ctx.resolve(json!({}), flags)?;
    let built = spec.build()?;
    let mut out = ctx.output()?;
    match &built {
        Built::Pure(psi) => out.json("state.json", psi)?,
        Built::Mixed(rho) => out.json("density.json", rho)?,
        Built::Cat(cat) => {
            let branch = |v: &[ionqho::C64]| {
                json!({
                    "dim": v.len(),
                    "re": v.iter().map(|z| z.re).collect::<Vec<_>>(),
                    "im": v.iter().map(|z| z.im).collect::<Vec<_>>(),
                })
            };
            out.json("state.json", &json!({ "down": branch(&cat.down), "up": branch(&cat.up) }))?;
        }
    }
    let pops = built.populations();
    let mut table = Table::new(&["n", "p"]);
    for (n, p) in pops.iter().enumerate() {
        table.push(vec![n as f64, *p]);
    }
    out.table("populations", &table)?;
    let mean_n = match &built {
        Built::Pure(s) => s.mean_n(),
        Built::Mixed(r) => r.mean_n(),
        Built::Cat(c) => c.mean_n(),
    };
    println!("mean_n = {mean_n}");
    out.finish("state", &ctx.echo(merged))
}
