//! Deterministic equivalents against Monte Carlo, per UE, with correlated
//! antennas.
//!
//! cargo run --release --example deterministic_equivalent -- [N] [K] [trials]

use mimo_powernorm::channel::compute_statistics;
use mimo_powernorm::det_equiv::{de_sinr_many, DeOptions};
use mimo_powernorm::montecarlo::{estimate_sinr_many, McOptions};
use mimo_powernorm::precoder::{Normalization, PrecoderConfig, Scheme};
use mimo_powernorm::scenario::{CorrelationKind, ScenarioConfig};

fn main() -> mimo_powernorm::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let (n, k, trials) = (
        args.first().copied().unwrap_or(60),
        args.get(1).copied().unwrap_or(8),
        args.get(2).copied().unwrap_or(200),
    );
    let scenario = ScenarioConfig::reference(n, k, CorrelationKind::SteeringVector).build()?;
    let scenario = scenario.rescaled(1.0 / scenario.power().sigma2)?;
    let stats = compute_statistics(&scenario)?;
    let configs: Vec<_> = Scheme::ALL
        .iter()
        .flat_map(|&s| Normalization::ALL.map(|nm| PrecoderConfig::for_scenario(s, nm, &scenario)))
        .collect();

    let start = std::time::Instant::now();
    let de = de_sinr_many(&scenario, &stats, &configs, &DeOptions::default())?;
    let de_time = start.elapsed();
    let start = std::time::Instant::now();
    let mc = estimate_sinr_many(&scenario, &configs, &McOptions::new(trials, 1))?;
    println!("DE {:?}, MC ({trials} draws) {:?}\n", de_time, start.elapsed());

    for (d, m) in de.iter().zip(&mc) {
        let worst = d
            .ues
            .iter()
            .zip(&m.ues)
            .map(|(a, b)| (a.sinr() / b.sinr() - 1.0).abs())
            .fold(0.0, f64::max);
        println!(
            "{:7} center-cell sum rate DE {:.3} MC {:.3}   worst per-UE SINR gap {:.1}%",
            d.config.label(),
            d.sum_rate(0),
            mimo_powernorm::montecarlo::sum_rate(m, 0),
            100.0 * worst
        );
    }
    let zf = &de[2].solutions[0];
    println!("\nZF cell 0: fixed point in {} iterations, residual {:.1e}", zf.iterations, zf.residual);
    Ok(())
}
