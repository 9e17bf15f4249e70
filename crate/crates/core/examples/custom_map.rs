//! A system defined in a configuration document.

use ulam_stability::prelude::*;

const CONFIG: &str = r#"
[system]
name = "custom"
state = ["x", "y"]
noise = "w"
field = ["-x + y", "-(1 + w) * y - x^3"]

[noise]
alpha = 0.3
Q = 3

[domain]
lower = [-2.0, -2.0]
upper = [2.0, 2.0]

[grid]
counts = [41, 41]
samples = 40
sink_policy = "clamp"
"#;

fn main() -> Result<()> {
    let cfg = RunConfig::from_toml_str(CONFIG)?;
    let map = cfg.map()?;
    let partition = cfg.partition()?;
    let tm = TransferMatrix::build(&map, &partition, cfg.samples()?, cfg.grid.seed, cfg.sink_policy()?)?;
    let report = analyze(&tm, &cfg.x0(&partition)?, &cfg.analysis_options()?)?;
    println!(
        "certified: {}, rho(P1) ~ {:.6}, decay ~ {:.6}^n",
        report.is_certified(),
        report.rho_estimate,
        report.decay_fit.beta
    );
    Ok(())
}
