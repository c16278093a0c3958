//! Network-average PCINR of every scheme as the antennas per UE grow.
//!
//! cargo run --release --example pcinr_sweep -- [K]

use mimo_powernorm::channel::compute_statistics;
use mimo_powernorm::closed_form::{pcinr_value, PcinrRegion};
use mimo_powernorm::det_equiv::{de_sinr_many, DeOptions};
use mimo_powernorm::precoder::{Normalization, PrecoderConfig, Scheme};
use mimo_powernorm::scenario::{CorrelationKind, ScenarioConfig};

fn main() -> mimo_powernorm::Result<()> {
    let k: usize = std::env::args().nth(1).map_or(10, |a| a.parse().expect("integer K"));
    print!("N/K ");
    for s in Scheme::ALL {
        for n in Normalization::ALL {
            print!("{:>12}", format!("{s}-{n}"));
        }
    }
    println!();
    for ratio in [2, 5, 10, 20, 50] {
        let scenario = ScenarioConfig::reference(ratio * k, k, CorrelationKind::Uncorrelated).build()?;
        let scenario = scenario.rescaled(1.0 / scenario.power().sigma2)?;
        let stats = compute_statistics(&scenario)?;
        let configs: Vec<_> = Scheme::ALL
            .iter()
            .flat_map(|&s| Normalization::ALL.map(|nm| PrecoderConfig::for_scenario(s, nm, &scenario)))
            .collect();
        print!("{ratio:3} ");
        for r in de_sinr_many(&scenario, &stats, &configs, &DeOptions::default())? {
            let values: Vec<f64> = r.ues.iter().map(pcinr_value).collect::<Result<_, _>>()?;
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            print!("{:>9.3} ({})", mean, PcinrRegion::classify(mean).number());
        }
        println!();
    }
    Ok(())
}
