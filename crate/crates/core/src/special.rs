//! Bessel functions needed by the circ oracle and the Kaiser-Bessel window.

/// Bessel function of the first kind, order 1.
///
/// Power series for `|x| <= 8`, Miller's backward recurrence beyond.
pub fn bessel_j1(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax <= 8.0 { j1_series(ax) } else { j1_miller(ax) };
    if x < 0.0 { -v } else { v }
}

fn j1_series(x: f64) -> f64 {
    let h = 0.5 * x;
    let h2 = h * h;
    let mut term = h;
    let mut sum = h;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= -h2 / (k * (k + 1.0));
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) || k > 200.0 {
            break;
        }
    }
    sum
}

fn j1_miller(x: f64) -> f64 {
    let start = 2 * ((x as usize + 40) / 2);
    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-30; // J_k
    let mut norm = 0.0;
    let mut j1 = 0.0;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        // cur now holds J_{k-1}
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            norm += 2.0 * cur;
        }
        if k - 1 == 1 {
            j1 = cur;
        }
        if cur.abs() > 1e250 {
            next *= 1e-250;
            cur *= 1e-250;
            norm *= 1e-250;
            j1 *= 1e-250;
        }
    }
    norm += cur; // J_0
    j1 / norm
}

/// Modified Bessel function of the first kind, order 0 (positive-term series).
pub fn bessel_i0(x: f64) -> f64 {
    let h2 = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= h2 / (k * k);
        sum += term;
        if term < 1e-17 * sum || k > 500.0 {
            break;
        }
    }
    sum
}

/// `e^{-|x|} I₀(x)`, evaluated without overflow for large arguments.
pub fn bessel_i0_scaled(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 30.0 {
        return bessel_i0(ax) * (-ax).exp();
    }
    i0_scaled_asymptotic(ax)
}

fn i0_scaled_asymptotic(ax: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..12 {
        let kf = k as f64;
        term *= (2.0 * kf - 1.0).powi(2) / (8.0 * ax * kf);
        sum += term;
    }
    sum / (2.0 * std::f64::consts::PI * ax).sqrt()
}
