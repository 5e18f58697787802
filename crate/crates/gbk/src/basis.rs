//! The Mihesan basis `W_{n,k}^a(x)` and the polynomials `P_k(n,a)`.
//!
//! `W_{n,k}^a(x) = exp(-ax/(1+x)) * P_k(n,a)/k! * x^k/(1+x)^{n+k}` with
//! `P_k(n,a) = sum_i C(k,i) (n)_i a^{k-i}`. Direct evaluation overflows for
//! moderate `n, k`, so weights are advanced by the ratio
//! `W_{k+1}/W_k = rho_k/(k+1) * x/(1+x)` where `rho_k = P_{k+1}/P_k`
//! satisfies `rho_k = (a+n+k) - a*k/rho_{k-1}`. The running weight is kept
//! in log space so that `W_0` is representable even when
//! `(1+x)^{-n}` underflows.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::{Error, Result};

/// The operator parameter pair `(n, a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatorParams {
    /// Series parameter, `n >= 1`.
    pub n: u32,
    /// Shape parameter, `a >= 0`; `a = 0` recovers the classical Baskakov
    /// basis.
    pub a: f64,
}

impl OperatorParams {
    pub fn new(n: u32, a: f64) -> Self {
        assert!(n >= 1, "n must be positive");
        assert!(a >= 0.0 && a.is_finite(), "a must be a finite non-negative real");
        OperatorParams { n, a }
    }
}

/// Truncation control for the infinite sum over `k`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TruncationPolicy {
    /// Certified bound on the dropped tail mass.
    pub tail_mass_tol: f64,
    /// Hard cap on the number of terms; `None` selects
    /// `max(1000, ceil(10 (n+1)(x+1)))`.
    pub max_terms: Option<usize>,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy { tail_mass_tol: 1e-14, max_terms: None }
    }
}

impl TruncationPolicy {
    pub fn resolved_max_terms(&self, n: u32, x: f64) -> usize {
        self.max_terms
            .unwrap_or_else(|| ((10.0 * (n as f64 + 1.0) * (x + 1.0)).ceil() as usize).max(1000))
    }
}

/// Truncated weight sequence at a point, with a certified tail bound.
#[derive(Debug, Clone, Serialize)]
pub struct WeightRow {
    pub x: f64,
    /// `W_{n,k}^a(x)` for `k = 0..values.len()`.
    pub values: Vec<f64>,
    /// Certified bound on the mass past the last stored index.
    pub tail_mass: f64,
}

impl WeightRow {
    /// Compensated sum of the stored weights.
    pub fn sum(&self) -> f64 {
        kahan_sum(self.values.iter().copied())
    }
}

pub(crate) fn kahan_sum(it: impl Iterator<Item = f64>) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for v in it {
        let y = v - c;
        let t = s + y;
        c = (t - s) - y;
        s = t;
    }
    s
}

/// Rising factorial `(n)_i = n (n+1) ... (n+i-1)`, `(n)_0 = 1`.
pub fn rising_factorial(n: &BigRational, i: u32) -> BigRational {
    let mut acc = BigRational::one();
    for j in 0..i {
        acc *= n + BigRational::from(BigInt::from(j));
    }
    acc
}

/// `P_k(n,a)` straight from the definition sum. Serves as the oracle for
/// [`pk_recurrence`].
pub fn pk_direct(k: u32, n: &BigRational, a: &BigRational) -> BigRational {
    let mut sum = BigRational::zero();
    let mut binom = BigInt::one();
    for i in 0..=k {
        if i > 0 {
            binom = binom * BigInt::from(k - i + 1) / BigInt::from(i);
        }
        let mut apow = BigRational::one();
        for _ in 0..(k - i) {
            apow *= a;
        }
        sum += BigRational::from(binom.clone()) * rising_factorial(n, i) * apow;
    }
    sum
}

/// `P_0..P_{k_max}` by the three-term recurrence
/// `P_{k+1} = (a+n+k) P_k - a k P_{k-1}`, which follows from the generating
/// function `e^{at} (1-t)^{-n}`. Validated exactly against [`pk_direct`] in
/// the test suite before being relied on anywhere.
pub fn pk_recurrence(k_max: u32, n: &BigRational, a: &BigRational) -> Vec<BigRational> {
    let mut out = Vec::with_capacity(k_max as usize + 1);
    out.push(BigRational::one());
    if k_max == 0 {
        return out;
    }
    out.push(a + n);
    for k in 1..k_max {
        let kq = BigRational::from(BigInt::from(k));
        let next = (a + n + &kq) * &out[k as usize] - a * &kq * &out[k as usize - 1];
        out.push(next);
    }
    out
}

/// Iterator state advancing `ln W_k` and the ratio `rho_k = P_{k+1}/P_k`.
struct WeightLadder {
    n: f64,
    a: f64,
    log_ratio_x: f64, // ln(x/(1+x))
    k: u32,
    ln_w: f64,
    rho: f64, // rho_{k-1} entering step k; rho_0 = a + n
}

impl WeightLadder {
    fn new(params: OperatorParams, x: f64) -> Self {
        let n = params.n as f64;
        let a = params.a;
        WeightLadder {
            n,
            a,
            // ln(x/(1+x)) = -ln(1 + 1/x); the subtraction form cancels badly
            // for large x and its error is amplified by k in the ladder.
            log_ratio_x: -(1.0 / x).ln_1p(),
            k: 0,
            ln_w: -a * x / (1.0 + x) - n * x.ln_1p(),
            rho: f64::NAN,
        }
    }

    fn current(&self) -> f64 {
        self.ln_w.exp()
    }

    /// Ratio `W_{k+1}/W_k` at the current index, then advance.
    fn step(&mut self) -> f64 {
        let k = self.k as f64;
        self.rho = if self.k == 0 {
            self.a + self.n
        } else {
            (self.a + self.n + k) - self.a * k / self.rho
        };
        let ratio = (self.rho / (k + 1.0)) * (self.log_ratio_x).exp();
        self.ln_w += (self.rho / (k + 1.0)).ln() + self.log_ratio_x;
        self.k += 1;
        ratio
    }
}

/// Single weight `W_{n,k}^a(x)`, by running the ratio ladder up to `k`.
pub fn weight(k: u32, params: OperatorParams, x: f64) -> f64 {
    assert!(x >= 0.0);
    if x == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let mut ladder = WeightLadder::new(params, x);
    for _ in 0..k {
        ladder.step();
    }
    ladder.current()
}

/// Weights `k = 0..K` where `K` is the first index past the mode at which
/// the geometric tail certificate drops below `tail_mass_tol`.
///
/// Past the mode the ratio `W_{k+1}/W_k` decreases toward `x/(1+x) < 1`, so
/// once it is below one and decreasing, `sum_{j>K} W_j <= W_K q/(1-q)` with
/// `q` the current ratio.
pub fn weight_row(params: OperatorParams, x: f64, policy: &TruncationPolicy) -> Result<WeightRow> {
    assert!(x >= 0.0, "x must be non-negative");
    if x == 0.0 {
        return Ok(WeightRow { x, values: vec![1.0], tail_mass: 0.0 });
    }
    let max_terms = policy.resolved_max_terms(params.n, x);
    let mut ladder = WeightLadder::new(params, x);
    let mut values = Vec::new();
    let mut prev_ratio = f64::INFINITY;
    let mut decreasing_run = 0u32;
    loop {
        values.push(ladder.current());
        let ratio = ladder.step();
        if ratio < 1.0 && ratio <= prev_ratio {
            decreasing_run += 1;
            let tail = values.last().unwrap() * ratio / (1.0 - ratio);
            if decreasing_run >= 3 && tail <= policy.tail_mass_tol {
                return Ok(WeightRow { x, values, tail_mass: tail });
            }
        } else {
            decreasing_run = 0;
        }
        prev_ratio = ratio;
        if values.len() >= max_terms {
            let tail = if ratio < 1.0 {
                values.last().unwrap() * ratio / (1.0 - ratio)
            } else {
                f64::INFINITY
            };
            return Err(Error::TruncationFailure { tail, terms: values.len() });
        }
    }
}

/// Residual of the weight derivative identity
/// `x(1+x)^2 W' = ((k - nx)(1+x) - ax) W`, with `W'` from
/// Richardson-extrapolated central differences. Used as a property test.
pub fn weight_log_derivative_check(k: u32, params: OperatorParams, x: f64) -> f64 {
    assert!(x > 0.0);
    let d = |h: f64| (weight(k, params, x + h) - weight(k, params, x - h)) / (2.0 * h);
    let h = 1e-5 * x.max(1.0);
    let dw = (4.0 * d(h / 2.0) - d(h)) / 3.0;
    let w = weight(k, params, x);
    let lhs = x * (1.0 + x).powi(2) * dw;
    let rhs = ((k as f64 - params.n as f64 * x) * (1.0 + x) - params.a * x) * w;
    (lhs - rhs).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratcore::rat;

    #[test]
    fn rising_factorial_values() {
        assert_eq!(rising_factorial(&rat(3, 1), 0), rat(1, 1));
        assert_eq!(rising_factorial(&rat(3, 1), 2), rat(12, 1));
        assert_eq!(rising_factorial(&rat(5, 1), 3), rat(210, 1));
    }

    #[test]
    fn pk_direct_small_cases() {
        let n = rat(4, 1);
        let a = rat(1, 1);
        assert_eq!(pk_direct(0, &n, &a), rat(1, 1));
        assert_eq!(pk_direct(1, &n, &a), rat(5, 1)); // a + n
        assert_eq!(pk_direct(2, &n, &a), rat(29, 1)); // 1 + 2*4 + 4*5
    }

    #[test]
    fn pk_recurrence_matches_direct() {
        // Random-ish rational (n, a) pairs, exact equality up to k = 200.
        let pairs = [
            (rat(4, 1), rat(1, 1)),
            (rat(7, 2), rat(3, 5)),
            (rat(100, 3), rat(0, 1)),
            (rat(13, 1), rat(11, 4)),
        ];
        for (n, a) in &pairs {
            let rec = pk_recurrence(200, n, a);
            for k in (0..=200).step_by(20) {
                assert_eq!(rec[k as usize], pk_direct(k, n, a), "k={k}");
            }
        }
    }

    #[test]
    fn pk_collapses_to_rising_factorial_at_a_zero() {
        let n = rat(6, 1);
        let a = rat(0, 1);
        let rec = pk_recurrence(10, &n, &a);
        for k in 0..=10u32 {
            assert_eq!(rec[k as usize], rising_factorial(&n, k));
        }
    }

    #[test]
    fn weight_closed_forms() {
        // k = 0: e^{-ax/(1+x)} / (1+x)^n
        let p = OperatorParams::new(1, 0.0);
        assert!((weight(0, p, 1.0) - 0.5).abs() < 1e-15);
        // a = 0 classical Baskakov weight: C(n+k-1,k) x^k / (1+x)^{n+k}
        let p = OperatorParams::new(2, 0.0);
        assert!((weight(3, p, 1.0) - 0.125).abs() < 1e-13);
        // x = 0 short-circuit
        let p = OperatorParams::new(5, 2.0);
        assert_eq!(weight(0, p, 0.0), 1.0);
        assert_eq!(weight(3, p, 0.0), 0.0);
    }

    #[test]
    fn classical_baskakov_reduction() {
        // a = 0 weight equals C(n+k-1,k) x^k (1+x)^{-n-k} to 1e-12 relative.
        for &(n, x) in &[(2u32, 0.7f64), (5, 1.3), (11, 4.0)] {
            let p = OperatorParams::new(n, 0.0);
            for k in 0..20u32 {
                let mut binom = 1.0f64;
                for i in 0..k {
                    binom *= (n + i) as f64 / (i + 1) as f64;
                }
                let exact = binom * x.powi(k as i32) / (1.0 + x).powi((n + k) as i32);
                let w = weight(k, p, x);
                assert!(
                    (w - exact).abs() <= 1e-12 * exact,
                    "n={n} k={k} x={x}: {w} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn partition_of_unity_grid() {
        let policy = TruncationPolicy::default();
        for &n in &[1u32, 4, 16, 64, 256] {
            for &a in &[0.0, 0.5, 1.0, 3.0] {
                for &x in &[0.0, 0.1, 1.0, 5.0, 20.0] {
                    let row = weight_row(OperatorParams::new(n, a), x, &policy).unwrap();
                    let total = row.sum() + row.tail_mass;
                    // 1e-12 is the acceptance threshold; the forward-ratio
                    // ladder accumulates ~k eps rounding over long rows.
                    assert!(
                        (total - 1.0).abs() <= 1e-12,
                        "n={n} a={a} x={x}: sum = {total:.17}"
                    );
                    assert!(row.values.iter().all(|&w| w >= 0.0));
                    assert!(row.tail_mass <= policy.tail_mass_tol);
                }
            }
        }
    }

    #[test]
    fn truncation_failure_signalled() {
        let policy = TruncationPolicy { tail_mass_tol: 1e-14, max_terms: Some(5) };
        let err = weight_row(OperatorParams::new(64, 1.0), 3.0, &policy).unwrap_err();
        assert!(matches!(err, Error::TruncationFailure { .. }));
    }

    #[test]
    fn weight_derivative_identity() {
        for &(n, a, k, x) in &[(5u32, 0.0, 2u32, 1.0), (5, 1.0, 0, 0.5), (4, 0.0, 4, 1.0)] {
            let p = OperatorParams::new(n, a);
            let w = weight(k, p, x);
            let res = weight_log_derivative_check(k, p, x);
            assert!(res <= 1e-8 * w.max(1e-300), "n={n} a={a} k={k} x={x}: residual {res:e}");
        }
    }
}
