//! Run a scenario document and write its report the way the CLI does.

use phasecell::report::Format;
use phasecell::scenario::Scenario;

fn main() -> phasecell::error::Result<()> {
    let scenario = Scenario::from_json(
        r#"{
            "experiment": "regime",
            "physics": { "levels": 2, "n_range": [0, 0], "macro_range": [0, 0] },
            "regime": { "dx": 1e-8, "dv": 1e-8, "mass": 1e-6 }
        }"#,
    )?;
    let experiment = scenario.resolve_experiment(None)?;
    let report = scenario.run(experiment, None)?;
    for r in &report.rows {
        println!("{} [{}] measured {:.3e} predicted {:.3e} passed {}", r.quantity, r.equation, r.measured, r.predicted, r.passed());
    }
    let dir = std::env::temp_dir().join("phasecell-example");
    for path in report.write(&dir, Format::Json)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
