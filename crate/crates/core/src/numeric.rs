//! Low-level numerics shared by the kernel and energy assembly: branch-safe
//! power quotients, log-weighted monomial primitives, compensated summation
//! and Euler-Maclaurin tails of power sums.

/// Half-width of the exponent window around 0 inside which log-branch
/// series are used instead of direct power quotients.
pub const BRANCH_WINDOW: f64 = 1e-6;

/// Definite integral of t^(p-1) over [w0, w1] with 0 <= w0, w1,
/// i.e. (w1^p - w0^p)/p with the log branch at p = 0.
///
/// The quotient is evaluated as w0^p * expm1(p*ln(w1/w0))/p, which is exact
/// in the limit p -> 0 and loses no digits when w0 and w1 are close.
/// When w0 == 0 the caller must guarantee p > 0 (otherwise the integral
/// diverges); the zero-coefficient convention is handled by callers.
pub fn pow_quot(w0: f64, w1: f64, p: f64) -> f64 {
    debug_assert!(w0 >= 0.0 && w1 >= 0.0, "pow_quot wants nonnegative limits");
    if w0 == w1 {
        return 0.0;
    }
    if w0 == 0.0 {
        debug_assert!(p > 0.0, "divergent power quotient (w0=0, p<=0)");
        return w1.powf(p) / p;
    }
    if w1 == 0.0 {
        debug_assert!(p > 0.0, "divergent power quotient (w1=0, p<=0)");
        return -w0.powf(p) / p;
    }
    // ln(w1/w0) via ln_1p keeps full accuracy for nearby limits.
    let lr = ((w1 - w0) / w0).ln_1p();
    if p == 0.0 {
        return lr;
    }
    let x = p * lr;
    if x.abs() < 1e-3 {
        // expm1(x)/p = lr * (1 + x/2 + x^2/6 + x^3/24 + ...)
        w0.powf(p) * lr * (1.0 + x / 2.0 + x * x / 6.0 + x * x * x / 24.0)
    } else {
        w0.powf(p) * x.exp_m1() / p
    }
}

/// Antiderivative of w^j * ln^m(w) evaluated at w (with F(0) = 0), for
/// integer j >= 0 and m >= 0:
///   F(w) = w^(j+1) * sum_{i=0..m} (-1)^i (m!/(m-i)!) ln^(m-i)(w) / (j+1)^(i+1).
pub fn pow_log_primitive(w: f64, j: u32, m: u32) -> f64 {
    debug_assert!(w >= 0.0);
    if w == 0.0 {
        return 0.0;
    }
    let a = (j + 1) as f64;
    let lw = w.ln();
    let mut coeff = 1.0; // m!/(m-i)!
    let mut acc = 0.0;
    let mut sign = 1.0;
    let mut apow = a;
    for i in 0..=m {
        acc += sign * coeff * lw.powi((m - i) as i32) / apow;
        sign = -sign;
        coeff *= (m - i) as f64;
        apow *= a;
    }
    w.powi((j + 1) as i32) * acc
}

/// Definite integral of w^j ln^m(w) over [w0, w1].
pub fn pow_log_integral(w0: f64, w1: f64, j: u32, m: u32) -> f64 {
    pow_log_primitive(w1, j, m) - pow_log_primitive(w0, j, m)
}

/// Compensated (Kahan) accumulator. Summation order is the caller's
/// responsibility; all module-level sums use a fixed deterministic order.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let y = value - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Tail of the power sum: sum_{k >= n} k^(-p) for p > 1, n >= 1, together
/// with a rigorous bound on the approximation error.
///
/// Euler-Maclaurin through the B_2 term:
///   sum = n^(1-p)/(p-1) + n^(-p)/2 + p n^(-p-1)/12 + R,
///   |R| <= p(p+1)(p+2) n^(-p-3)/240.
pub fn power_sum_tail(p: f64, n: u64) -> (f64, f64) {
    debug_assert!(p > 1.0 && n >= 1);
    let x = n as f64;
    let value = x.powf(1.0 - p) / (p - 1.0) + 0.5 * x.powf(-p) + p * x.powf(-p - 1.0) / 12.0;
    let err = p * (p + 1.0) * (p + 2.0) * x.powf(-p - 3.0) / 240.0;
    (value, err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pow_quot_matches_naive_away_from_branch() {
        let cases = [(0.3, 1.7, -0.8), (1.0, 2.0, 2.5), (0.5, 0.50001, 1.3)];
        for &(w0, w1, p) in &cases {
            let naive = (w1f(w1, p) - w1f(w0, p)) / p;
            assert_relative_eq!(pow_quot(w0, w1, p), naive, max_relative = 1e-12);
        }
        fn w1f(w: f64, p: f64) -> f64 {
            w.powf(p)
        }
    }

    #[test]
    fn pow_quot_log_branch() {
        assert_relative_eq!(pow_quot(0.5, 2.0, 0.0), (4.0f64).ln(), max_relative = 1e-15);
        // continuity across the branch
        let a = pow_quot(0.5, 2.0, 1e-9);
        let b = pow_quot(0.5, 2.0, -1e-9);
        assert_relative_eq!(a, b, max_relative = 1e-8);
        assert_relative_eq!(a, (4.0f64).ln(), max_relative = 1e-8);
    }

    #[test]
    fn pow_quot_zero_endpoint() {
        assert_relative_eq!(pow_quot(0.0, 2.0, 0.5), 2.0f64.sqrt() / 0.5, max_relative = 1e-15);
    }

    #[test]
    fn pow_log_integral_against_quadrature() {
        // crude Riemann check of int_{0.2}^{1.8} w ln^2 w dw
        let n = 2_000_000;
        let (w0, w1) = (0.2, 1.8);
        let h = (w1 - w0) / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let w: f64 = w0 + (i as f64 + 0.5) * h;
            acc += w * w.ln().powi(2) * h;
        }
        assert_relative_eq!(pow_log_integral(w0, w1, 1, 2), acc, max_relative = 1e-6);
    }

    #[test]
    fn power_sum_tail_against_direct() {
        let p = 1.6;
        let n = 50u64;
        let direct: f64 = (n..n + 4_000_000).map(|k| (k as f64).powf(-p)).sum();
        let remainder = (4_000_000f64 + n as f64).powf(1.0 - p) / (p - 1.0);
        let (value, err) = power_sum_tail(p, n);
        assert!((value - (direct + remainder)).abs() < 1e-8 + err);
    }

    #[test]
    fn kahan_beats_naive_on_adversarial_order() {
        let mut k = KahanSum::new();
        k.add(1.0);
        for _ in 0..10_000 {
            k.add(1e-16);
        }
        assert_relative_eq!(k.value(), 1.0 + 1e-12, max_relative = 1e-15);
    }
}
