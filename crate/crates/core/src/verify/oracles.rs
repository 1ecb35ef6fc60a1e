//! Brute-force reference computations. Each one works from the problem
//! definition by exhaustive search or quadrature and shares no code with the
//! solvers it is used to check.

/// Two-receiver broadcast rates (per unit slot) when the fraction `a` of the
/// power carries the message of receiver `r`, the rest that of receiver `d`.
/// The stronger receiver removes the weaker one's signal first; the weaker
/// one treats the stronger one's signal as noise.
pub fn bc_pair(z_r: f64, z_d: f64, a: f64, snr: f64) -> (f64, f64) {
    let b = 1.0 - a;
    if z_r >= z_d {
        ((1.0 + z_r * a * snr).ln(), (1.0 + z_d * b * snr / (1.0 + z_d * a * snr)).ln())
    } else {
        ((1.0 + z_r * a * snr / (1.0 + z_r * b * snr)).ln(), (1.0 + z_d * b * snr).ln())
    }
}

/// Rates `(to relay, to destination)` of the source broadcast on a grid of
/// `points + 1` relay power fractions in `[0, 1]`.
pub fn bc_pair_grid(z_sd: f64, z_sr: f64, snr: f64, points: usize) -> Vec<(f64, f64)> {
    (0..=points)
        .map(|i| bc_pair(z_sr, z_sd, i as f64 / points as f64, snr))
        .collect()
}

/// Three-node rate of the schedule with relay slot length `t2`, given the
/// slot-1 broadcast rates `(to relay, to destination)`.
///
/// Slot 1 (length `1 - t2`) broadcasts `x1` to the destination and `x2` to the
/// relay; slot 2 carries `x3` from the source and `x4 = x2` from the relay to
/// the destination by multiple access. Returns the largest `x1 + x2 + x3`.
fn schedule_rate((to_r, to_d): (f64, f64), z_sd: f64, z_rd: f64, snr: f64, t2: f64) -> f64 {
    let t1 = 1.0 - t2;
    let c_sd = (1.0 + z_sd * snr).ln();
    let c_rd = (1.0 + z_rd * snr).ln();
    let c_sum = (1.0 + (z_sd + z_rd) * snr).ln();
    let x1 = t1 * to_d;
    let x2 = (t1 * to_r).min(t2 * c_rd);
    let x3 = (t2 * c_sd).min(t2 * c_sum - x2).max(0.0);
    x1 + x2 + x3
}

/// Best three-node rate at a fixed relay slot length `t2`, by exhaustive
/// search over the slot-1 power split. `grid` comes from [`bc_pair_grid`].
pub fn three_node_at_t2(grid: &[(f64, f64)], z_sd: f64, z_rd: f64, snr: f64, t2: f64) -> f64 {
    grid.iter()
        .map(|&pair| schedule_rate(pair, z_sd, z_rd, snr, t2))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Maximizes `f` near `x0` on `[lo, hi]` by repeated 21-point grids on a
/// window that follows the best point and shrinks threefold once that point
/// is interior.
fn zoom_max(f: impl Fn(f64) -> f64, x0: f64, width: f64, lo: f64, hi: f64) -> (f64, f64) {
    let (mut bx, mut best) = (x0, f(x0));
    let mut w = width;
    for _ in 0..400 {
        if w < 1e-13 {
            break;
        }
        let (a, b) = ((bx - w).max(lo), (bx + w).min(hi));
        let mut edge = false;
        for i in 0..=20 {
            let x = a + (b - a) * i as f64 / 20.0;
            let v = f(x);
            if v > best {
                (best, bx) = (v, x);
                edge = (i == 0 && a > lo) || (i == 20 && b < hi);
            }
        }
        if !edge {
            w /= 3.0;
        }
    }
    (bx, best)
}

/// Best three-node rate at a fixed `t2`: a 1001-point scan of the power split
/// followed by a zoom around the best split.
fn best_over_split(z_sd: f64, z_sr: f64, z_rd: f64, snr: f64, t2: f64) -> f64 {
    let f = |a: f64| schedule_rate(bc_pair(z_sr, z_sd, a, snr), z_sd, z_rd, snr, t2);
    let a0 = (0..=1000)
        .map(|j| j as f64 / 1000.0)
        .max_by(|x, y| f(*x).total_cmp(&f(*y)))
        .unwrap_or(0.0);
    zoom_max(f, a0, 2e-3, 0.0, 1.0).1
}

/// Brute force over `(t2, power split)`: a full grid with `t2_points + 1`
/// slot lengths in `[0, 1)` and `alpha_points + 1` power fractions, then a
/// zoom in `t2` around the best cell in which each slot length gets its own
/// search over the split. Every evaluated point is an achievable schedule, so
/// the result never exceeds the true optimum.
pub fn three_node_grid(z_sd: f64, z_sr: f64, z_rd: f64, snr: f64, t2_points: usize, alpha_points: usize) -> f64 {
    let grid = bc_pair_grid(z_sd, z_sr, snr, alpha_points);
    let (mut best, mut bt) = (f64::NEG_INFINITY, 0.0);
    for i in 0..t2_points {
        let t2 = i as f64 / t2_points as f64;
        let v = three_node_at_t2(&grid, z_sd, z_rd, snr, t2);
        if v > best {
            (best, bt) = (v, t2);
        }
    }
    let f = |t2: f64| best_over_split(z_sd, z_sr, z_rd, snr, t2);
    let (_, refined) = zoom_max(f, bt, 2.0 / t2_points as f64, 0.0, 1.0 - 1e-12);
    best.max(refined)
}

/// Minimum SNR for a three-receiver superposition broadcast, by searching
/// power splits on a simplex grid with `1 / steps` resolution. Receivers are
/// given as `(gain, rate)`; each sees the signals of stronger receivers as
/// noise and cancels the weaker ones.
pub fn bc3_min_snr_grid(recv: [(f64, f64); 3], steps: usize) -> f64 {
    let mut r = recv;
    r.sort_by(|a, b| a.0.total_cmp(&b.0));
    let gamma: Vec<f64> = r.iter().map(|&(_, rate)| rate.exp_m1()).collect();
    let mut best = f64::INFINITY;
    for i in 0..=steps {
        for j in 0..=steps - i {
            let f = [
                i as f64 / steps as f64,
                j as f64 / steps as f64,
                (steps - i - j) as f64 / steps as f64,
            ];
            let mut need: f64 = 0.0;
            for k in 0..3 {
                if gamma[k] == 0.0 {
                    continue;
                }
                let interference: f64 = f[k + 1..].iter().sum();
                let room = f[k] - gamma[k] * interference;
                need = need.max(if room > 0.0 { gamma[k] / (r[k].0 * room) } else { f64::INFINITY });
            }
            best = best.min(need);
        }
    }
    best
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Newton on `P_n`).
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// `int_0^x t^{a-1} e^{-t} dt / (a-1)!` for integer `a >= 1` by composite
/// Gauss-Legendre quadrature.
pub fn incomplete_gamma_quadrature(a: u32, x: f64) -> f64 {
    let nodes = gauss_legendre(20);
    let panels = 64;
    let h = x / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let (lo, hi) = (p as f64 * h, (p + 1) as f64 * h);
        let (mid, half) = ((lo + hi) / 2.0, (hi - lo) / 2.0);
        for &(u, w) in &nodes {
            let t = mid + half * u;
            sum += w * half * t.powi(a as i32 - 1) * (-t).exp();
        }
    }
    let fact: f64 = (1..a).map(f64::from).product();
    sum / fact
}
