//! Run a small custom experiment from TOML and read back its summary.
//!
//! cargo run --release --example experiment -- [output dir]

use mimo_powernorm::experiment::{run_experiment, validate, ExperimentSpec, RunOptions};

const SPEC: &str = r#"
name = "small_sweep"
schemes = ["ZF", "RZF"]
normalizations = ["VN", "MN"]
engines = ["DE", "MC", "ClosedForm"]
trials = 100
seed = 3

[scenario]
N = 32
K = 4
L = 7
cell_radius = 1000.0
exclusion_radius = 100.0
beta = 3.7
rho_tr_dB = 6.0
rho_dl_dB = 10.0
bandwidth_Hz = 20e6
noise_dBm_per_Hz = -174.0
correlation = "uncorrelated"
seed = 3

[sweep]
antennas = [16, 32]
"#;

fn main() -> mimo_powernorm::Result<()> {
    let spec = ExperimentSpec::from_toml(SPEC)?;
    let diagnostics = validate(&spec);
    assert!(diagnostics.is_empty(), "{diagnostics:?}");
    let out = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("mimo-pn-small-sweep"));
    let summary = run_experiment(&spec, &out, RunOptions::default())?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    // RZF has no closed form, so those rows land in errors.csv.
    print!("{}", std::fs::read_to_string(out.join("errors.csv"))?);
    Ok(())
}
