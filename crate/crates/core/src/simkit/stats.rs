use crate::error::{Error, Result};

use super::OutageCurve;

/// Two-sided 95% standard normal quantile.
pub const WILSON_Z: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k as f64 == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Least-squares slope of `-log10 p` against `log10 S` over the points whose
/// SNR lies in `window_db` (inclusive) and whose estimate is positive.
pub fn estimate_dmt_slope(curve: &OutageCurve, window_db: (f64, f64)) -> Result<f64> {
    let pts: Vec<(f64, f64)> = curve
        .points
        .iter()
        .filter(|p| p.snr_db >= window_db.0 && p.snr_db <= window_db.1 && p.p_hat > 0.0)
        .map(|p| (p.snr_db / 10.0, -p.p_hat.log10()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Estimation(format!(
            "{} positive points in [{}, {}] dB, need at least 3",
            pts.len(),
            window_db.0,
            window_db.1
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

/// SNR (dB) at which the curve first drops below `p_target`, interpolating
/// `log10 p` linearly between grid points. `None` if it never does or starts
/// below.
pub fn snr_at_outage(curve: &OutageCurve, p_target: f64) -> Option<f64> {
    let pts = &curve.points;
    for w in pts.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.p_hat >= p_target && b.p_hat < p_target {
            if b.p_hat > 0.0 {
                let (la, lb, lt) = (a.p_hat.log10(), b.p_hat.log10(), p_target.log10());
                return Some(a.snr_db + (b.snr_db - a.snr_db) * (la - lt) / (la - lb));
            }
            let f = (a.p_hat - p_target) / (a.p_hat - b.p_hat);
            return Some(a.snr_db + (b.snr_db - a.snr_db) * f);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simkit::{CurveId, OutagePoint};
    use crate::ProtocolId;

    fn curve(ps: &[(f64, f64)]) -> OutageCurve {
        OutageCurve {
            curve: CurveId::Protocol(ProtocolId::Direct),
            points: ps
                .iter()
                .map(|&(snr_db, p_hat)| OutagePoint {
                    snr_db,
                    rate_bits: 1.0,
                    trials: 100,
                    outages: 0,
                    p_hat,
                    ci_lo: p_hat,
                    ci_hi: p_hat,
                })
                .collect(),
        }
    }

    #[test]
    fn wilson_known_values() {
        let (lo, hi) = wilson_interval(0, 100);
        assert_eq!(lo, 0.0);
        let z2 = WILSON_Z * WILSON_Z;
        assert!((hi - z2 / (100.0 + z2)).abs() < 1e-15, "{hi}");
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.403_831_4).abs() < 1e-6 && (hi - 0.596_168_6).abs() < 1e-6);
        assert_eq!(wilson_interval(0, 0), (0.0, 1.0));
    }

    #[test]
    fn slopes() {
        let c = curve(&[(10.0, 1e-1), (20.0, 1e-3), (30.0, 1e-5)]);
        assert!((estimate_dmt_slope(&c, (0.0, 40.0)).unwrap() - 2.0).abs() < 1e-12);
        let flat = curve(&[(10.0, 0.2), (20.0, 0.2), (30.0, 0.2)]);
        assert!(estimate_dmt_slope(&flat, (0.0, 40.0)).unwrap().abs() < 1e-12);
        assert!(estimate_dmt_slope(&c, (15.0, 40.0)).is_err());
    }

    #[test]
    fn crossing() {
        let c = curve(&[(0.0, 1e-1), (10.0, 1e-3), (20.0, 1e-5)]);
        assert!((snr_at_outage(&c, 1e-2).unwrap() - 5.0).abs() < 1e-12);
        assert!((snr_at_outage(&c, 1e-3).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(snr_at_outage(&c, 1e-6), None);
    }
}
