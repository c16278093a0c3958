//! Draw one channel realization, estimate it, and build every precoder.
//!
//! cargo run --example precoders

use mimo_powernorm::channel::{compute_statistics, draw_channels};
use mimo_powernorm::precoder::{build_directions, column_powers, normalize, Normalization, PrecodeResult, PrecoderConfig, Scheme};
use mimo_powernorm::scenario::{CorrelationKind, ScenarioConfig};

fn main() -> mimo_powernorm::Result<()> {
    let scenario = ScenarioConfig::reference(32, 4, CorrelationKind::Uncorrelated).build()?;
    let scenario = scenario.rescaled(1.0 / scenario.power().sigma2)?;
    let stats = compute_statistics(&scenario)?;
    let draw = draw_channels(&scenario, &stats, 7);
    let h_hat = &draw.h_hat[0];
    println!("estimated channel of cell 0: {} × {}", h_hat.nrows(), h_hat.ncols());

    for scheme in Scheme::ALL {
        for norm in Normalization::ALL {
            let cfg = PrecoderConfig::for_scenario(scheme, norm, &scenario);
            let f = build_directions(h_hat, &cfg.direction)?;
            // Single-draw normalization; the engines use expectations instead.
            let weights = normalize(&column_powers(&f), norm)?;
            let p = PrecodeResult::new(f, weights);
            let gains: Vec<String> = (0..scenario.users())
                .map(|k| format!("{:.3}", (draw.h(0, 0, k).adjoint() * p.g.column(k))[0].norm()))
                .collect();
            println!("{:7}  tr GGᴴ = {:.3}  |h_kᴴ g_k| = [{}]", cfg.label(), p.power(), gains.join(", "));
        }
    }
    Ok(())
}
