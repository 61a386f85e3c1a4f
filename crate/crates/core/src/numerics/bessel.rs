//! Integer-order Bessel functions of the first kind, plus `Y_0` and `Y_1`.
//!
//! All orders `0..=n_max` are produced at once by Miller's backward
//! recurrence, normalised with `J_0 + 2 Σ J_{2k} = 1`. The backward sweep
//! follows the minimal solution, so tiny high-order values keep full
//! relative accuracy, which the Fourier–Bessel eigensolver relies on.

const RESCALE_ABOVE: f64 = 1e250;

/// Starting order of the backward recurrence for the given argument.
fn start_order(n_max: usize, x: f64) -> usize {
    let base = (n_max as f64).max(x);
    let m = base + 20.0 + (40.0 * base).sqrt();
    let m = m as usize;
    m + (m & 1)
}

/// Fills `out[n] = J_n(x)` for `n = 0..out.len()`.
///
/// `x` must be non-negative.
pub fn bessel_j_all(x: f64, out: &mut [f64]) {
    debug_assert!(x >= 0.0);
    if out.is_empty() {
        return;
    }
    if x == 0.0 {
        out.fill(0.0);
        out[0] = 1.0;
        return;
    }
    let n_max = out.len() - 1;
    let m = start_order(n_max, x);
    let two_over_x = 2.0 / x;
    let mut j_next = 0.0;
    let mut j_cur = 1e-300;
    let mut norm = 0.0;
    out.fill(0.0);
    for k in (0..=m).rev() {
        if k <= n_max {
            out[k] = j_cur;
        }
        if k % 2 == 0 {
            norm += if k == 0 { j_cur } else { 2.0 * j_cur };
        }
        if k == 0 {
            break;
        }
        let j_prev = (k as f64) * two_over_x * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        if j_cur.abs() > RESCALE_ABOVE {
            j_cur *= 1.0 / RESCALE_ABOVE;
            j_next *= 1.0 / RESCALE_ABOVE;
            norm *= 1.0 / RESCALE_ABOVE;
            for v in out.iter_mut().skip(k - 1) {
                *v *= 1.0 / RESCALE_ABOVE;
            }
        }
    }
    let inv = 1.0 / norm;
    for v in out.iter_mut() {
        *v *= inv;
    }
}

/// Values and derivatives `J_n(x)`, `J_n'(x)` for `n = 0..=n_max`.
pub fn bessel_j_with_derivative(n_max: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
    let mut j = vec![0.0; n_max + 2];
    bessel_j_all(x, &mut j);
    let mut dj = vec![0.0; n_max + 1];
    dj[0] = -j[1];
    for n in 1..=n_max {
        dj[n] = 0.5 * (j[n - 1] - j[n + 1]);
    }
    j.truncate(n_max + 1);
    (j, dj)
}

/// Single-order convenience wrapper.
pub fn bessel_j(n: usize, x: f64) -> f64 {
    let mut j = vec![0.0; n + 1];
    bessel_j_all(x.abs(), &mut j);
    if x < 0.0 && n % 2 == 1 {
        -j[n]
    } else {
        j[n]
    }
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `(Y_0(x), Y_1(x))` for `x > 0` from the Neumann series
/// `Y_0 = (2/π)(ln(x/2) + γ)J_0 − (4/π) Σ_k (−1)^k J_{2k}/k`
/// and its derivative, reusing one backward-recurrence sweep.
pub fn bessel_y01(x: f64) -> (f64, f64) {
    debug_assert!(x > 0.0);
    let n = 2 * ((x + 30.0 + 2.0 * x.sqrt()) as usize / 2) + 2;
    let mut j = vec![0.0; n + 2];
    bessel_j_all(x, &mut j);
    let log_term = (0.5 * x).ln() + EULER_GAMMA;
    let mut series = Vec::with_capacity(n / 2);
    let mut dseries = Vec::with_capacity(n / 2);
    for k in 1..=n / 2 {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let kf = k as f64;
        series.push(sign * j[2 * k] / kf);
        dseries.push(sign * 0.5 * (j[2 * k - 1] - j[2 * k + 1]) / kf);
    }
    let frac = std::f64::consts::FRAC_2_PI;
    let y0 = frac * log_term * j[0] - 2.0 * frac * crate::numerics::sum::neumaier_sum(series);
    let dy0 = frac * (j[0] / x - log_term * j[1]) - 2.0 * frac * crate::numerics::sum::neumaier_sum(dseries);
    (y0, -dy0)
}
