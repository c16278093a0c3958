//! Drop UEs in the seven-cell reference layout and inspect the large-scale gains.
//!
//! cargo run --example scenario -- [N] [K] [seed]

use mimo_powernorm::scenario::{CorrelationKind, ScenarioConfig};

fn main() -> mimo_powernorm::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let mut cfg = ScenarioConfig::reference(
        args.first().copied().unwrap_or(64) as usize,
        args.get(1).copied().unwrap_or(8) as usize,
        CorrelationKind::SteeringVector,
    );
    cfg.seed = args.get(2).copied().unwrap_or(1);
    let scenario = cfg.build()?;
    let p = scenario.power();
    println!("N = {}, K = {}, L = {}", scenario.antennas(), scenario.users(), scenario.cells());
    println!("noise σ² = {:.3e} W, ρ_tr = {:.2}, ρ_dl = {:.2}", p.sigma2, p.rho_tr, p.rho_dl);

    let geometry = scenario.geometry().expect("dropped scenario");
    let g = scenario.gains();
    println!("\ncell 0: distance to own BS, own gain, strongest other-cell gain");
    for k in 0..scenario.users() {
        let strongest = (1..scenario.cells()).map(|l| g.get(l, 0, k)).fold(0.0, f64::max);
        println!(
            "  UE {k}: {:7.1} m  {:.3e}  {:.3e}",
            geometry.distance(0, 0, k),
            g.get(0, 0, k),
            strongest
        );
    }
    println!("\n{}", cfg.to_toml()?);
    Ok(())
}
