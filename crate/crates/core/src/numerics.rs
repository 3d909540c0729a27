//! Small numerical helpers shared across modules.

use libm::{erf, erfc};

/// Neumaier-compensated accumulator.
///
/// Alternating sums over Hermite-Gauss populations (for instance the parity
/// weighted sums of the ideal closed forms) lose digits with naive
/// summation once many modes are involved.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.carry += (self.sum - t) + value;
        } else {
            self.carry += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Compensated sum of an iterator.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// `erf(hi) - erf(lo)` evaluated through `erfc` in the tails, where the
/// direct difference cancels catastrophically.
pub fn erf_diff(lo: f64, hi: f64) -> f64 {
    if lo >= 0.0 {
        erfc(lo) - erfc(hi)
    } else if hi <= 0.0 {
        erfc(-hi) - erfc(-lo)
    } else {
        erf(hi) - erf(lo)
    }
}

/// `a^n / sqrt(n!)`, accumulated factor by factor.
pub fn scaled_power(a: f64, n: u32) -> f64 {
    let mut t = 1.0;
    for k in 1..=n {
        t *= a / f64::from(k).sqrt();
    }
    t
}

/// Bisection on a bracket `[lo, hi]` where `f(lo)` and `f(hi)` differ in
/// sign. Stops once the bracket is relatively narrower than `rel_tol`.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, rel_tol: f64, max_iter: usize) -> Option<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Some(lo);
    }
    if f_hi == 0.0 {
        return Some(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return None;
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Some(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() <= rel_tol * hi.abs().max(lo.abs()) {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Log-spaced grid with `n` points from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            let mut v: Vec<f64> = (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect();
            v[0] = lo;
            v[n - 1] = hi;
            v
        }
    }
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_lost_digits() {
        let values = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(values.iter().sum::<f64>(), 0.0);
        assert_eq!(compensated_sum(values), 2.0);
    }

    #[test]
    fn erf_diff_is_accurate_in_the_tail() {
        // erfc(6) - erfc(7) = 2.1519736712498913e-17 - 4.183825607779414e-23
        let v = erf_diff(6.0, 7.0);
        let expected = 2.1519736712498913e-17 - 4.183825607779414e-23;
        assert!((v - expected).abs() < 1e-30, "{v}");
        assert!((erf_diff(-7.0, -6.0) - expected).abs() < 1e-30);
        assert!((erf_diff(-1.0, 1.0) - 2.0 * erf(1.0)).abs() < 1e-15);
    }

    #[test]
    fn scaled_power_matches_factorial_form() {
        let a: f64 = 0.7;
        let direct = a.powi(5) / (120.0_f64).sqrt();
        assert!((scaled_power(a, 5) - direct).abs() < 1e-16);
        assert_eq!(scaled_power(0.0, 0), 1.0);
        assert_eq!(scaled_power(0.0, 3), 0.0);
    }

    #[test]
    fn bisect_finds_root() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14, 200).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert!(bisect(|x| x * x + 1.0, 0.0, 2.0, 1e-14, 200).is_none());
    }

    #[test]
    fn fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| -0.5 * v + 2.0).collect();
        let (s, c) = linear_fit(&x, &y);
        assert!((s + 0.5).abs() < 1e-14 && (c - 2.0).abs() < 1e-14);
    }
}
