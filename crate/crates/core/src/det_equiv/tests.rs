use super::*;
use crate::channel::compute_statistics;
use crate::precoder::{Normalization, PrecoderConfig, Regularizer, RzfParams, Scheme};
use crate::scenario::{CorrelationModel, LargeScale, PowerConfig, Scenario};

fn scenario(cells: usize, users: usize, n: usize, model: CorrelationModel, f: impl FnMut(usize, usize, usize) -> f64) -> Scenario {
    let gains = LargeScale::from_fn(cells, users, f);
    Scenario::from_gains(n, gains, PowerConfig::new(4.0, 10.0, 1.0).unwrap(), model).unwrap()
}

fn varied(l: usize, j: usize, k: usize) -> f64 {
    if l == j {
        1.0 + 0.4 * k as f64
    } else {
        0.05 + 0.03 * ((l + 2 * j + 3 * k) % 4) as f64
    }
}

const STEER: CorrelationModel = CorrelationModel::SteeringVector { antenna_spacing: 0.3 };

#[test]
fn single_cell_mrt_vn_reduces_to_scalar_formula() {
    let (n, k) = (32, 4);
    let s = scenario(1, k, n, CorrelationModel::Uncorrelated, |_, _, k| 0.5 + k as f64);
    let de = de_sinr(&s, &PrecoderConfig::mrt(Normalization::Vector), &DeOptions::default()).unwrap();
    let p = s.power();
    for kk in 0..k {
        let d = 0.5 + kk as f64;
        let alpha = d + p.training_noise();
        let expected = (d * d / alpha) / (p.downlink_noise() / n as f64 + k as f64 / n as f64 * d);
        let got = de.ue(0, kk).sinr();
        assert!((got / expected - 1.0).abs() < 1e-12, "{got} vs {expected}");
    }
}

#[test]
fn noise_term_is_exact() {
    let s = scenario(2, 3, 16, STEER, varied);
    for scheme in Scheme::ALL {
        for norm in Normalization::ALL {
            let cfg = PrecoderConfig::for_scenario(scheme, norm, &s);
            let de = de_sinr(&s, &cfg, &DeOptions::default()).unwrap();
            for b in &de.normalized {
                assert_eq!(b.noise, s.power().downlink_noise() / 16.0);
                assert!(b.is_nonnegative());
            }
        }
    }
}

#[test]
fn rzf_approaches_zf_for_small_alpha() {
    let s = scenario(3, 4, 32, STEER, varied);
    for norm in Normalization::ALL {
        let zf = de_sinr(&s, &PrecoderConfig::zf(norm), &DeOptions::default()).unwrap();
        let rzf = de_sinr(
            &s,
            &PrecoderConfig::rzf(norm, RzfParams::new(1e-6, Regularizer::Zero).unwrap()),
            &DeOptions::default(),
        )
        .unwrap();
        for (a, b) in zf.ues.iter().zip(&rzf.ues) {
            assert!((b.sinr() / a.sinr() - 1.0).abs() < 0.005, "{} vs {}", b.sinr(), a.sinr());
        }
    }
}

#[test]
fn spectral_and_dense_backends_agree() {
    let s = scenario(2, 3, 12, STEER, varied);
    for scheme in Scheme::ALL {
        for norm in Normalization::ALL {
            let cfg = PrecoderConfig::for_scenario(scheme, norm, &s);
            let a = de_sinr(&s, &cfg, &DeOptions { backend: Backend::Spectral, ..Default::default() }).unwrap();
            let b = de_sinr(&s, &cfg, &DeOptions { backend: Backend::Dense, ..Default::default() }).unwrap();
            for (x, y) in a.ues.iter().zip(&b.ues) {
                assert!((x.sinr() / y.sinr() - 1.0).abs() < 1e-8, "{}: {} vs {}", cfg.label(), x.sinr(), y.sinr());
                assert!((x.pilot_contamination - y.pilot_contamination).abs() <= 1e-8 * y.pilot_contamination);
            }
        }
    }
}

#[test]
fn dense_leverage_matrix_uses_dense_backend() {
    let s = scenario(2, 2, 8, STEER, varied);
    let z = crate::linalg::scaled_identity(8, 0.3);
    let dense = PrecoderConfig::rzf(Normalization::Matrix, RzfParams::new(0.05, Regularizer::Dense(z)).unwrap());
    let scalar = PrecoderConfig::rzf(Normalization::Matrix, RzfParams::new(0.05, Regularizer::ScaledIdentity(0.3)).unwrap());
    let a = de_sinr(&s, &dense, &DeOptions::default()).unwrap();
    let b = de_sinr(&s, &scalar, &DeOptions::default()).unwrap();
    for (x, y) in a.ues.iter().zip(&b.ues) {
        assert!((x.sinr() / y.sinr() - 1.0).abs() < 1e-8);
    }
    let spectral = DeOptions { backend: Backend::Spectral, ..Default::default() };
    assert!(de_sinr(&s, &dense, &spectral).is_err());
}

#[test]
fn mrt_normalizations_coincide_for_equal_traces() {
    let s = scenario(2, 4, 16, STEER, |l, j, _| if l == j { 1.0 } else { 0.2 });
    let vn = de_sinr(&s, &PrecoderConfig::mrt(Normalization::Vector), &DeOptions::default()).unwrap();
    let mn = de_sinr(&s, &PrecoderConfig::mrt(Normalization::Matrix), &DeOptions::default()).unwrap();
    for (a, b) in vn.ues.iter().zip(&mn.ues) {
        assert!((a.sinr() / b.sinr() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn zf_normalizations_coincide_for_equal_limits() {
    let s = scenario(2, 4, 16, STEER, |l, j, _| if l == j { 1.0 } else { 0.2 });
    let vn = de_sinr(&s, &PrecoderConfig::zf(Normalization::Vector), &DeOptions::default()).unwrap();
    let mn = de_sinr(&s, &PrecoderConfig::zf(Normalization::Matrix), &DeOptions::default()).unwrap();
    let u = &vn.solutions[0].u;
    assert!(u.iter().all(|x| (x / u[0] - 1.0).abs() < 1e-12));
    for (a, b) in vn.ues.iter().zip(&mn.ues) {
        assert!((a.sinr() / b.sinr() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn common_scaling_rescales_phi_and_keeps_load_ratio() {
    let s = scenario(2, 3, 20, CorrelationModel::Uncorrelated, varied);
    let c = 7.5;
    let scaled = s.rescaled(c).unwrap();
    let (a, b) = (compute_statistics(&s).unwrap(), compute_statistics(&scaled).unwrap());
    for l in 0..2 {
        for k in 0..3 {
            assert!((b.phi_trace(l, l, k) / a.phi_trace(l, l, k) - c).abs() < 1e-12);
        }
    }
    let za = de_sinr(&s, &PrecoderConfig::zf(Normalization::Vector), &DeOptions::default()).unwrap();
    let zb = de_sinr(&scaled, &PrecoderConfig::zf(Normalization::Vector), &DeOptions::default()).unwrap();
    for l in 0..2 {
        for k in 0..3 {
            let ubar_a = za.solutions[l].u[k] / (a.phi_trace(l, l, k) / 20.0);
            let ubar_b = zb.solutions[l].u[k] / (b.phi_trace(l, l, k) / 20.0);
            assert!((ubar_a - 0.85).abs() < 1e-12 && (ubar_b - 0.85).abs() < 1e-12);
        }
    }
    for (x, y) in za.ues.iter().zip(&zb.ues) {
        assert!((x.sinr() / y.sinr() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn zf_accepts_one_spare_antenna() {
    let gains = LargeScale::from_fn(1, 4, |_, _, _| 1.0);
    let s = Scenario::from_gains(5, gains, PowerConfig::new(1.0, 1.0, 1.0).unwrap(), CorrelationModel::Uncorrelated).unwrap();
    assert!(de_sinr(&s, &PrecoderConfig::zf(Normalization::Vector), &DeOptions::default()).is_ok());
}

#[test]
fn csv_header_matches_monte_carlo() {
    let s = scenario(2, 2, 8, CorrelationModel::Uncorrelated, varied);
    let de = de_sinr(&s, &PrecoderConfig::zf(Normalization::Matrix), &DeOptions::default()).unwrap();
    let mut a = Vec::new();
    write_csv(&[de], &mut a).unwrap();
    let mc = crate::montecarlo::estimate_sinr(&s, &PrecoderConfig::zf(Normalization::Matrix), 4, 1).unwrap();
    let mut b = Vec::new();
    crate::montecarlo::write_csv(&[mc], &mut b).unwrap();
    let (a, b) = (String::from_utf8(a).unwrap(), String::from_utf8(b).unwrap());
    assert_eq!(a.lines().next(), b.lines().next());
    assert_eq!(a.lines().count(), 5);
    assert!(a.lines().nth(1).unwrap().starts_with("0,0,ZF,MN,DE,"));
}
