//! Transfer function, delay spread, path loss and ensemble properties.

use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use vlcsim::channel::{Cir, RayTap, TapKind};
use vlcsim::config::SimulationConfig;
use vlcsim::statistics::{
    acf, bandwidth_3db, ctf, dc_gain, fit_ci, rms_delay_spread, shadowing_stats, transfer_at, Ensemble,
    FrequencyGrid, SubChannel,
};

fn cir_of(taps: &[(f64, f64)]) -> Cir {
    let taps = taps
        .iter()
        .map(|&(power, delay)| RayTap {
            power,
            delay,
            kind: TapKind::LineOfSight,
        })
        .collect();
    Cir::new(0, 0, 0, 0.0, taps)
}

fn taps_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((1e-9..1e-5f64, 0.0..100e-9f64), 1..40)
}

proptest! {
    #[test]
    fn ctf_is_bounded_by_dc_gain(taps in taps_strategy()) {
        let cir = cir_of(&taps);
        let grid = FrequencyGrid::new(0.0, 200e6, 257).unwrap();
        let h = ctf(&cir, &grid).unwrap();
        let h0 = dc_gain(&cir);
        prop_assert!((h.values()[0].re - h0).abs() <= 1e-12 * h0);
        for v in h.values() {
            prop_assert!(v.norm() <= h0 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn ctf_recurrence_matches_direct_sum(taps in taps_strategy()) {
        let cir = cir_of(&taps);
        let grid = FrequencyGrid::new(0.0, 500e6, 1000).unwrap();
        let h = ctf(&cir, &grid).unwrap();
        let h0 = dc_gain(&cir);
        for (k, v) in h.values().iter().enumerate() {
            prop_assert!((v - transfer_at(&cir, grid.frequency(k))).norm() <= 1e-10 * h0);
        }
    }

    #[test]
    fn rms_matches_moments(taps in taps_strategy()) {
        let (mut p0, mut p1, mut p2) = (0.0, 0.0, 0.0);
        for &(p, d) in &taps {
            p0 += p;
            p1 += p * d;
            p2 += p * d * d;
        }
        let oracle = (p2 / p0 - (p1 / p0).powi(2)).max(0.0).sqrt();
        let got = rms_delay_spread(&cir_of(&taps)).unwrap();
        prop_assert!((got - oracle).abs() <= 1e-9 * 100e-9);
    }

    #[test]
    fn rms_is_shift_invariant(taps in taps_strategy(), shift in 0.0..50e-9f64) {
        let shifted: Vec<(f64, f64)> = taps.iter().map(|&(p, d)| (p, d + shift)).collect();
        let a = rms_delay_spread(&cir_of(&taps)).unwrap();
        let b = rms_delay_spread(&cir_of(&shifted)).unwrap();
        prop_assert!((a - b).abs() <= 1e-18);
    }

    #[test]
    fn two_equal_taps_halve_at_quarter_period(tau in 1e-9..50e-9f64) {
        // |H|² = 2 + 2cos(2πfτ) reaches half of 4 where cos = 0
        let cir = cir_of(&[(1.0, 0.0), (1.0, tau)]);
        let oracle = 1.0 / (4.0 * tau);
        let grid = FrequencyGrid::new(0.0, 2.0 * oracle, 301).unwrap();
        let f3 = bandwidth_3db(&ctf(&cir, &grid).unwrap()).unwrap().unwrap();
        prop_assert!((f3 - oracle).abs() <= 1e-8 * oracle);
    }

    #[test]
    fn noise_free_ci_fit_is_exact(pl0 in 20.0..80.0f64, gamma in 1.0..5.0f64) {
        let samples: Vec<(f64, f64)> = (10..=60)
            .map(|k| {
                let d = k as f64 / 10.0;
                (d, pl0 + 10.0 * gamma * d.log10())
            })
            .collect();
        let fit = fit_ci(&samples, 1.0).unwrap();
        prop_assert!((fit.exponent - gamma).abs() <= 1e-9);
        prop_assert!((fit.reference_loss - pl0).abs() <= 1e-9);
        prop_assert!(fit.residuals.iter().all(|r| r.abs() <= 1e-9));
    }
}

#[test]
fn bandwidth_absent_when_response_stays_high() {
    let cir = cir_of(&[(1.0, 0.0), (0.1, 5e-9)]);
    let grid = FrequencyGrid::new(0.0, 200e6, 512).unwrap();
    assert_eq!(bandwidth_3db(&ctf(&cir, &grid).unwrap()).unwrap(), None);
}

#[test]
fn ks_test_accepts_normal_residuals_at_nominal_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let trials = 400;
    let mut accepted = 0;
    for _ in 0..trials {
        let samples: Vec<(f64, f64)> = (10..=60)
            .map(|k| {
                let d = k as f64 / 10.0;
                let noise: f64 = rng.sample(StandardNormal);
                (d, 40.0 + 20.0 * d.log10() + 2.0 * noise)
            })
            .collect();
        let stats = shadowing_stats(&fit_ci(&samples, 1.0).unwrap()).unwrap();
        accepted += stats.is_normal_at_5pct() as usize;
    }
    // parameters are estimated from the data, so the test is conservative
    let rate = accepted as f64 / trials as f64;
    assert!(rate >= 0.93, "acceptance rate {rate}");
}

#[test]
fn ks_test_rejects_spiky_residuals() {
    // half the residuals exactly zero, half uniform on [-6, 6]
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut rejected = 0;
    for _ in 0..100 {
        let samples: Vec<(f64, f64)> = (0..400)
            .map(|k| {
                let d = 1.0 + k as f64 / 80.0;
                let r = if k % 2 == 0 { 0.0 } else { rng.random_range(-6.0..6.0) };
                (d, 40.0 + 20.0 * d.log10() + r)
            })
            .collect();
        let stats = shadowing_stats(&fit_ci(&samples, 1.0).unwrap()).unwrap();
        rejected += (!stats.is_normal_at_5pct()) as usize;
    }
    assert!(rejected >= 90, "rejected {rejected}/100");
}

#[test]
fn ensemble_results_ignore_thread_count() {
    let mut c = SimulationConfig::default();
    c.clusters.scatterers_per_cluster = 10;
    c.receiver.speed_m_s = 0.5;
    let ens = Ensemble::new(c.scene_params().unwrap(), 5, 24);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| acf(&ens, SubChannel::new(0, 0, 0), 0.0, 10e6, &[0.0, 0.1, 0.2], true).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
    assert!((one.normalized[0].re - 1.0).abs() < 1e-12);
    assert!(one.normalized[0].im.abs() < 1e-12);
}
