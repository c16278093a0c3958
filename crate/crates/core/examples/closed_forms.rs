//! Uncorrelated-fading closed forms, the single-cell VN/MN sum-rate gap and
//! PCINR classification.
//!
//! cargo run --example closed_forms

use mimo_powernorm::closed_form::{mrt_closed_form, pcinr, sum_rate_gap, zf_closed_form, UncorrelatedInputs};
use mimo_powernorm::precoder::{Normalization, Scheme};
use mimo_powernorm::scenario::{CorrelationKind, PowerConfig, ScenarioConfig};

fn main() -> mimo_powernorm::Result<()> {
    let scenario = ScenarioConfig::reference(80, 8, CorrelationKind::Uncorrelated).build()?;
    let inputs = UncorrelatedInputs::from_scenario(&scenario)?;
    println!("ū = 1 − K/N = {}", inputs.u_bar);
    for norm in Normalization::ALL {
        let zf = zf_closed_form(&inputs, norm)?;
        let mrt = mrt_closed_form(&inputs, norm);
        let show = |v: &[_]| -> String {
            v.iter()
                .map(|b: &mimo_powernorm::sinr::SinrBreakdown| format!("{:.2}", b.sinr()))
                .collect::<Vec<_>>()
                .join(" ")
        };
        println!("ZF-{norm}  center-cell SINR: {}", show(&zf[..8]));
        println!("MRT-{norm} center-cell SINR: {}", show(&mrt[..8]));
        let r = pcinr(&zf[0], Scheme::Zf, norm)?;
        println!("ZF-{norm}  UE 0 PCINR {:.3} (region {})", r.value, r.region.number());
    }

    // One cell, perfect training: VN beats MN unless every gain is equal.
    let power = PowerConfig::new(1e6, 10.0, 1.0)?;
    for d in [vec![1.0, 1.0, 1.0, 1.0], vec![1.0, 0.3, 0.1, 0.01]] {
        let gap = sum_rate_gap(&d, 16, &power, true)?;
        println!(
            "d = {d:?}: VN {:.3}, MN {:.3}, gap {:.3} bit/s/Hz",
            gap.vn_sum_rate, gap.mn_sum_rate, gap.delta
        );
    }
    Ok(())
}
