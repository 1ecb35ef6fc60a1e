//! Self-checks run by `relayflow verify`: small versions of the oracle and
//! property suites that finish in seconds.

pub mod oracles;

use rand::Rng;
use serde::Serialize;

use crate::bounds::{cutset_upper_rate, ma_cut_outage_lower_at};
use crate::error::Result;
use crate::fo_solver::{solve_fo, solve_fo_fullcuts, validate_fo_witness, FoProblem};
use crate::netmodel::{cap, db_to_linear, GainMatrix, MeanGains, NetworkInstance, RandomSource};
use crate::protocols::{direct, gls};
use crate::simkit::{run_experiment, Experiment};
use crate::three_node::solve_three_node;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, worst: f64, tol: f64) -> Check {
    Check {
        name,
        passed: worst <= tol,
        detail: format!("worst deviation {worst:.3e} (tolerance {tol:.0e})"),
    }
}

fn draw(n: usize, seed: u64, k: u64, snr: f64) -> Result<NetworkInstance> {
    let g = MeanGains::uniform(n)?.sample(&mut RandomSource::new(seed, k).rng());
    NetworkInstance::new(g, snr)
}

fn capacity_values() -> Check {
    let worst = [
        (cap(10.0) - 2.397_895_272_798_371).abs(),
        (db_to_linear(3.0) - 1.995_262_314_968_879_6).abs(),
        (cap(std::f64::consts::E - 1.0) - 1.0).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    check("capacity and dB conversion", worst, 1e-14)
}

fn incomplete_gamma() -> Result<Check> {
    let mut worst: f64 = 0.0;
    for n in [3usize, 4, 5] {
        for i in 1..=100 {
            let x = i as f64 * 0.1;
            let got = ma_cut_outage_lower_at(n, x)?;
            let want = oracles::incomplete_gamma_quadrature(n as u32 - 1, x);
            worst = worst.max(((got - want) / want).abs());
        }
    }
    Ok(check("incomplete gamma vs quadrature", worst, 1e-10))
}

fn three_node_vs_grid() -> Result<Check> {
    let mut worst: f64 = 0.0;
    for k in 0..4 {
        let net = draw(3, 11, k, 10.0)?;
        let (sd, sr, rd) = (net.gain(0, 2), net.gain(0, 1), net.gain(1, 2));
        let exact = solve_three_node(sd, sr, rd, 10.0)?.rate;
        let brute = oracles::three_node_grid(sd, sr, rd, 10.0, 200, 20_000);
        worst = worst.max((exact - brute).abs());
    }
    Ok(check("three-node optimum vs (t2, power split) grid", worst, 1e-8))
}

fn fo_matches_three_node() -> Result<Check> {
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let net = draw(3, 12, k, 10.0)?;
        let fo = solve_fo(&FoProblem::new(net.clone())?)?.rate;
        let tn = solve_three_node(net.gain(0, 2), net.gain(0, 1), net.gain(1, 2), 10.0)?.rate;
        worst = worst.max((fo - tn).abs());
    }
    Ok(check("FO on three nodes vs three-node optimum", worst, 1e-3))
}

fn cut_reduction() -> Result<Check> {
    let mut worst: f64 = 0.0;
    for k in 0..5 {
        let net = draw(4, 13, k, 10.0)?;
        let a = solve_fo(&FoProblem::new(net.clone())?)?.rate;
        let b = solve_fo_fullcuts(&net)?.rate;
        worst = worst.max((a - b).abs());
    }
    Ok(check("reduced vs full cut objective", worst, 1e-4))
}

fn dominance() -> Result<Check> {
    let mut worst = f64::NEG_INFINITY;
    let mut witness_ok = true;
    for k in 0..30 {
        let snr = db_to_linear(5.0 * (k % 5) as f64);
        let net = draw(4, 14, k, snr)?;
        let d = direct(&net).rate;
        let g = gls(&net)?.rate;
        let f = solve_fo(&FoProblem::new(net.clone())?)?;
        let b = cutset_upper_rate(&net)?;
        witness_ok &= validate_fo_witness(&net, &f.flows)?.is_valid();
        worst = worst.max(d - g).max(g - f.rate).max(f.rate - b);
    }
    let mut c = check("direct <= GLS <= FO <= cut-set bound", worst.max(0.0), 1e-5);
    c.passed &= witness_ok;
    c.detail.push_str(if witness_ok {
        ", witnesses valid"
    } else {
        ", invalid witness found"
    });
    Ok(c)
}

fn direct_outage() -> Result<Check> {
    let exp = Experiment::parse(
        r#"{"network": {"gains": "uniform", "n_nodes": 3}, "protocols": ["direct"],
            "rates_bits": [1.0], "snr_db": [0, 5, 10], "trials": 10000, "seed": 3}"#,
        std::path::Path::new("verify.json"),
    )?;
    let report = run_experiment(&exp)?;
    let mut inside = true;
    let mut detail = String::new();
    for p in &report.curves[0].points {
        let s = db_to_linear(p.snr_db);
        let want = -(-(1.0f64.exp2() - 1.0) / s).exp_m1();
        inside &= p.ci_lo <= want && want <= p.ci_hi;
        detail.push_str(&format!("{} dB: {:.4} vs {:.4}; ", p.snr_db, p.p_hat, want));
    }
    Ok(Check {
        name: "direct outage Monte Carlo vs closed form",
        passed: inside,
        detail,
    })
}

fn determinism() -> Result<Check> {
    let text = |w: usize| {
        format!(
            r#"{{"network": {{"gains": "uniform", "n_nodes": 4}}, "protocols": ["gls", "fo"],
                "rates_bits": [1.0], "snr_db": [0, 10, 20], "trials": 60, "seed": 5,
                "batch_size": 7, "workers": {w}}}"#
        )
    };
    let path = std::path::Path::new("verify.json");
    let a = run_experiment(&Experiment::parse(&text(1), path)?)?;
    let b = run_experiment(&Experiment::parse(&text(3), path)?)?;
    Ok(Check {
        name: "seed determinism across worker counts",
        passed: a.curves == b.curves,
        detail: format!("{} vs {} curves compared", a.curves.len(), b.curves.len()),
    })
}

fn sampler() -> Check {
    let mut rng = RandomSource::new(21, 0).rng();
    let means = GainMatrix::uniform(3, 1.0);
    let m = MeanGains::new(means).expect("positive means");
    let n = 20_000;
    let mut total = 0.0;
    for _ in 0..n {
        total += m.sample(&mut rng).get(0, 2);
    }
    let _: f64 = rng.random();
    let mean = total / n as f64;
    check("exponential gain sampler mean", (mean - 1.0).abs(), 0.03)
}

type NamedCheck = (&'static str, fn() -> Result<Check>);

/// Runs every quick check; an `Err` is reported as a failed check.
pub fn run_quick_checks() -> Vec<Check> {
    let fallible: Vec<NamedCheck> = vec![
        ("incomplete gamma vs quadrature", incomplete_gamma),
        ("three-node optimum vs (t2, power split) grid", three_node_vs_grid),
        ("FO on three nodes vs three-node optimum", fo_matches_three_node),
        ("reduced vs full cut objective", cut_reduction),
        ("direct <= GLS <= FO <= cut-set bound", dominance),
        ("direct outage Monte Carlo vs closed form", direct_outage),
        ("seed determinism across worker counts", determinism),
    ];
    let mut out = vec![capacity_values(), sampler()];
    for (name, f) in fallible {
        out.push(f().unwrap_or_else(|e| Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        }));
    }
    out
}
