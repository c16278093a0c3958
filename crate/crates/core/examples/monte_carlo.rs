//! Monte Carlo SINR breakdown of every UE in the center cell.
//!
//! cargo run --release --example monte_carlo -- [N] [K] [trials]

use mimo_powernorm::montecarlo::{estimate_sinr_many, sum_rate, McOptions};
use mimo_powernorm::precoder::{Normalization, PrecoderConfig, Scheme};
use mimo_powernorm::scenario::{CorrelationKind, ScenarioConfig};

fn main() -> mimo_powernorm::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let (n, k, trials) = (
        args.first().copied().unwrap_or(40),
        args.get(1).copied().unwrap_or(8),
        args.get(2).copied().unwrap_or(200),
    );
    let scenario = ScenarioConfig::reference(n, k, CorrelationKind::Uncorrelated).build()?;
    let scenario = scenario.rescaled(1.0 / scenario.power().sigma2)?;
    let configs: Vec<_> = Scheme::ALL
        .iter()
        .flat_map(|&s| Normalization::ALL.map(|nm| PrecoderConfig::for_scenario(s, nm, &scenario)))
        .collect();
    let estimates = estimate_sinr_many(&scenario, &configs, &McOptions::new(trials, 1))?;
    for e in &estimates {
        println!(
            "{}: center-cell sum rate {:.3} bit/s/Hz, E[tr GGᴴ] = {:.3}",
            e.config.label(),
            sum_rate(e, 0),
            e.cell_power[0]
        );
        println!("   UE   signal   variance  noncoh.   pilot     SINR ± se");
        for u in e.cell(0) {
            let b = &u.breakdown;
            println!(
                "   {:2} {:9.3} {:9.3} {:9.3} {:9.3} {:7.3} ± {:.3}",
                u.ue, b.signal, b.variance, b.noncoherent_interference, b.pilot_contamination, b.sinr(), u.stderr.sinr
            );
        }
    }
    Ok(())
}
