use relayflow_core::bounds::{ma_cut_outage_lower, ma_cut_outage_lower_at, ma_cut_outage_lower_mc, OutageTarget};
use relayflow_core::netmodel::{bits_to_nats, GainMatrix};
use relayflow_core::MeanGains;

#[test]
fn destination_cut_estimator_is_unbiased() {
    let seeds = 20;
    for n in [3usize, 4, 5] {
        let means = MeanGains::uniform(n).unwrap();
        for x in [0.1, 0.5, 1.0] {
            let want = ma_cut_outage_lower_at(n, x).unwrap();
            let trials = 50_000u64;
            let sd = (want * (1.0 - want) / trials as f64).sqrt();
            let mean_z = (0..seeds)
                .map(|s| (ma_cut_outage_lower_mc(&means, x, trials, 900 + s).unwrap().p_hat - want) / sd)
                .sum::<f64>()
                / seeds as f64;
            assert!(mean_z.abs() < 4.0 / (seeds as f64).sqrt(), "N={n} x={x}: mean z {mean_z}");
        }
    }
}

#[test]
fn analytic_bound_shape() {
    let mut last = 0.0;
    for i in 0..=200 {
        let x = 0.05 * i as f64;
        let p = ma_cut_outage_lower_at(4, x).unwrap();
        assert!((0.0..=1.0).contains(&p) && p >= last);
        last = p;
    }
    for n in 3..=8 {
        assert!(ma_cut_outage_lower_at(n, 1.0).unwrap() > ma_cut_outage_lower_at(n + 1, 1.0).unwrap());
    }
    let snr = 100.0;
    let fixed = ma_cut_outage_lower(4, OutageTarget::FixedRate(bits_to_nats(1.0)), snr).unwrap();
    assert!((fixed - ma_cut_outage_lower_at(4, 1.0 / snr).unwrap()).abs() < 1e-15);
    assert!(ma_cut_outage_lower(4, OutageTarget::FixedRate(1.0), 0.0).is_err());
}

#[test]
fn non_uniform_means_use_the_gain_sum() {
    let mut m = GainMatrix::uniform(4, 1.0);
    m.set(0, 3, 0.2);
    let est = ma_cut_outage_lower_mc(&MeanGains::new(m).unwrap(), 0.5, 20_000, 3).unwrap();
    let uniform = ma_cut_outage_lower_at(4, 0.5).unwrap();
    assert!(est.monte_carlo && est.p_hat > uniform);
}
