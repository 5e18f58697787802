//! Rates for functions whose derivative has bounded variation.
//!
//! The pointwise estimate splits `|K_n^a(f;x) - f(x)|` into a centering
//! term weighted by the mean of the one-sided derivatives, a jump term
//! weighted by their difference, and four variation sums of the recentered
//! derivative over the shrinking intervals `[x - x/k, x]` and
//! `[x, x + x/k]`. Recentering shifts `f'` by a constant on each side of
//! `x`, so every variation reduces to the total variation of `f'` itself
//! with inward one-sided limits at the interval ends.
//!
//! The estimate is conditional on the second-moment domination
//! `u_{n,2}(x) <= lambda x(1+x)/(n+1)` (`lambda > 1`, `n` large); the
//! threshold is computed from the exact moment table and enforced, never
//! assumed.
//!
//! The displayed right-hand variation sum formally starts at `k = 0`,
//! where the interval endpoint `x + x/k` is undefined. Both readings are
//! implemented: drop the term, or read it as `[x, 2x]`; reports carry the
//! convention used.

use std::sync::Arc;

use num_rational::BigRational;
use num_traits::One;

use crate::analysis::{centering_defect, exact_a, exact_n};
use crate::basis::{OperatorParams, TruncationPolicy};
use crate::catalog::FunctionSpec;
use crate::moments::central_table;
use crate::operator::{kantorovich_eval, kernel_cdf};
use crate::{Error, Result};

/// Parameters of the conditional estimate.
#[derive(Debug, Clone, Copy)]
pub struct BVBoundParams {
    pub lambda: f64,
    pub x: f64,
}

impl BVBoundParams {
    pub fn new(lambda: f64, x: f64) -> Self {
        assert!(lambda > 1.0, "lambda must exceed 1");
        assert!(x > 0.0, "x must be positive");
        BVBoundParams { lambda, x }
    }
}

impl Default for BVBoundParams {
    fn default() -> Self {
        BVBoundParams { lambda: 2.0, x: 1.0 }
    }
}

/// Reading of the `k = 0` term in the right-hand variation sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum KZeroConvention {
    /// Drop the undefined term (mirrors the left-hand sum).
    Skip,
    /// Read `x + x/0` as `2x`, i.e. take the variation over `[x, 2x]`.
    DoubleInterval,
}

impl KZeroConvention {
    pub fn name(self) -> &'static str {
        match self {
            KZeroConvention::Skip => "skip",
            KZeroConvention::DoubleInterval => "double",
        }
    }
}

/// Side selector for one-sided limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Minus,
    Plus,
}

type SidedEval = Arc<dyn Fn(f64, Side) -> f64 + Send + Sync>;
type SplitFn = Arc<dyn Fn(f64, f64) -> Result<Vec<f64>> + Send + Sync>;

/// A scalar function known to be monotone between declared split points,
/// with one-sided evaluation at jumps. This is the object total variation
/// is computed on.
#[derive(Clone)]
pub struct VariationSignal {
    eval: SidedEval,
    splits: SplitFn,
}

impl VariationSignal {
    pub fn new(
        eval: impl Fn(f64, Side) -> f64 + Send + Sync + 'static,
        splits: impl Fn(f64, f64) -> Result<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        VariationSignal { eval: Arc::new(eval), splits: Arc::new(splits) }
    }

    pub fn eval(&self, t: f64, side: Side) -> f64 {
        (self.eval)(t, side)
    }

    /// Exact total variation on `[c, d]`: monotone-piece increments plus
    /// interior jumps, with inward limits at the endpoints.
    pub fn total_variation(&self, c: f64, d: f64) -> Result<f64> {
        assert!(c <= d);
        if c == d {
            return Ok(0.0);
        }
        let interior = (self.splits)(c, d)?;
        let mut pts = Vec::with_capacity(interior.len() + 2);
        pts.push(c);
        pts.extend(interior.iter().copied());
        pts.push(d);
        let mut tv = 0.0;
        for w in pts.windows(2) {
            tv += (self.eval(w[1], Side::Minus) - self.eval(w[0], Side::Plus)).abs();
        }
        for &s in &interior {
            tv += (self.eval(s, Side::Plus) - self.eval(s, Side::Minus)).abs();
        }
        Ok(tv)
    }

    /// Riemann-style refinement sum over `m` subintervals; a lower bound
    /// on the variation, used to cross-check `total_variation`.
    pub fn refinement_sum(&self, c: f64, d: f64, m: usize) -> f64 {
        let step = (d - c) / m as f64;
        (0..m)
            .map(|i| {
                let lo = c + i as f64 * step;
                let hi = lo + step;
                (self.eval(hi, Side::Minus) - self.eval(lo, Side::Plus)).abs()
            })
            .sum()
    }
}

/// One-sided value of `f'`. Breakpoints carry explicit data; smooth
/// functions evaluate the analytic derivative; piecewise-linear entries
/// (no analytic derivative) take the slope of the bracketing segment.
fn fprime_one_sided(f: &FunctionSpec, t: f64, _side: Side) -> f64 {
    if let Some(pos) = f.breakpoints.iter().position(|&b| b == t) {
        let os = f.one_sided[pos];
        return match _side {
            Side::Minus => os.df_minus,
            Side::Plus => os.df_plus,
        };
    }
    if let Some(v) = f.deriv(1, t) {
        return v;
    }
    // Piecewise linear between breakpoints: the slope is constant on the
    // segment containing t.
    if let Some(pos) = f.breakpoints.iter().position(|&b| b > t) {
        return f.one_sided[pos].df_minus;
    }
    let last = f.one_sided.last().expect("checked by deriv_signal");
    last.df_plus
}

/// The derivative of `f` as a variation signal.
pub fn deriv_signal(f: &FunctionSpec) -> Result<VariationSignal> {
    if !f.has_derivs(1) && f.breakpoints.is_empty() {
        return Err(Error::UnknownMonotonicity { c: f64::NAN, d: f64::NAN });
    }
    let fe = f.clone();
    let fs = f.clone();
    Ok(VariationSignal::new(
        move |t, side| fprime_one_sided(&fe, t, side),
        move |c, d| fs.deriv_monotone_splits(c, d),
    ))
}

/// The recentered signal of the pointwise estimate: `f` minus its
/// one-sided limits at `x`, vanishing at `x` itself.
#[derive(Clone)]
pub struct FxSignal {
    pub base: FunctionSpec,
    pub x: f64,
    pub fprime_plus: f64,
    pub fprime_minus: f64,
    f_plus: f64,
    f_minus: f64,
}

impl FxSignal {
    pub fn eval(&self, t: f64) -> f64 {
        if t < self.x {
            self.base.eval(t) - self.f_minus
        } else if t > self.x {
            self.base.eval(t) - self.f_plus
        } else {
            0.0
        }
    }
}

pub fn build_fx(f: &FunctionSpec, x: f64) -> Result<FxSignal> {
    if !f.has_derivs(1) && !f.breakpoints.iter().any(|&b| b == x) && f.breakpoints.is_empty() {
        return Err(Error::MissingOneSidedData { id: f.id.clone(), x });
    }
    let (fprime_minus, fprime_plus) = if f.has_derivs(1) || f.breakpoints.iter().any(|&b| b == x) {
        (f.deriv_minus(x)?, f.deriv_plus(x)?)
    } else {
        (
            fprime_one_sided(f, x, Side::Minus),
            fprime_one_sided(f, x, Side::Plus),
        )
    };
    Ok(FxSignal {
        base: f.clone(),
        x,
        fprime_plus,
        fprime_minus,
        f_plus: f.value_plus(x),
        f_minus: f.value_minus(x),
    })
}

/// Smallest `n` from which `u_{n,2}(x) <= lambda x(1+x)/(n+1)` holds,
/// decided in exact rational arithmetic (the scan stops once the
/// inequality holds for two consecutive `n`, matching its asymptotic
/// monotonicity).
pub fn remark_min_n(a: f64, x: f64, lambda: f64) -> u32 {
    let aq = exact_a(a);
    let xq = BigRational::from_float(x).expect("finite x");
    let lq = BigRational::from_float(lambda).expect("finite lambda");
    let rhs_core = &lq * &xq * (BigRational::one() + &xq);
    let mut first_ok: Option<u32> = None;
    for n in 1..=100_000u32 {
        let nq = exact_n(n);
        let u2 = central_table(2, &nq, &aq).entry(2).clone();
        let lhs = u2.eval_exact(&xq).expect("x >= 0") * (nq + BigRational::one());
        if lhs <= rhs_core {
            match first_ok {
                Some(m) if n == m + 1 => return m,
                _ => first_ok = Some(n),
            }
        } else {
            first_ok = None;
        }
    }
    panic!("second-moment domination not reached by n = 100000 at x = {x}");
}

/// Enforce the validity threshold; returns it on success.
pub fn check_remark(params: OperatorParams, bp: BVBoundParams) -> Result<u32> {
    let min_n = remark_min_n(params.a, bp.x, bp.lambda);
    if params.n < min_n {
        return Err(Error::RemarkNotYetValid { n: params.n as u64, min_n: min_n as u64 });
    }
    Ok(min_n)
}

/// Every displayed term of the pointwise estimate.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct BvBound {
    pub centering_term: f64,
    pub jump_term: f64,
    pub left_sum: f64,
    pub left_tail: f64,
    pub right_sum: f64,
    pub right_tail: f64,
    pub total: f64,
    pub min_n: u32,
}

pub fn bv_bound(
    f: &FunctionSpec,
    params: OperatorParams,
    bp: BVBoundParams,
    convention: KZeroConvention,
) -> Result<BvBound> {
    let min_n = check_remark(params, bp)?;
    let fx = build_fx(f, bp.x)?;
    let sig = deriv_signal(f)?;
    let x = bp.x;
    let n = params.n as f64;
    let np1 = n + 1.0;
    let sqrt_n = n.sqrt();
    let k_max = sqrt_n.floor() as u32;

    let centering_term =
        centering_defect(params, x) * (fx.fprime_plus + fx.fprime_minus).abs() / 2.0;
    let jump_term = (bp.lambda * x * (1.0 + x) / np1).sqrt()
        * (fx.fprime_plus - fx.fprime_minus).abs()
        / 2.0;

    let mut left = 0.0;
    for k in 1..=k_max {
        left += sig.total_variation(x - x / k as f64, x)?;
    }
    let left_sum = bp.lambda * (1.0 + x) / np1 * left;
    let left_tail = x / sqrt_n * sig.total_variation(x - x / sqrt_n, x)?;

    let mut right = 0.0;
    if convention == KZeroConvention::DoubleInterval {
        right += sig.total_variation(x, 2.0 * x)?;
    }
    for k in 1..=k_max {
        right += sig.total_variation(x, x + x / k as f64)?;
    }
    let right_sum = bp.lambda * (1.0 + x) / np1 * right;
    let right_tail = x / sqrt_n * sig.total_variation(x, x + x / sqrt_n)?;

    Ok(BvBound {
        centering_term,
        jump_term,
        left_sum,
        left_tail,
        right_sum,
        right_tail,
        total: centering_term + jump_term + left_sum + left_tail + right_sum + right_tail,
        min_n,
    })
}

/// Bound-vs-actual record for one `(f, n, x)`.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct BvRecord {
    pub n: u32,
    pub a: f64,
    pub x: f64,
    pub lambda: f64,
    pub min_n: u32,
    pub lhs: f64,
    pub bound: f64,
    pub slack: f64,
    pub convention: KZeroConvention,
}

impl BvRecord {
    pub fn violated(&self) -> bool {
        self.lhs > self.bound + 1e-12
    }
}

pub fn bv_check(
    f: &FunctionSpec,
    params: OperatorParams,
    bp: BVBoundParams,
    convention: KZeroConvention,
    policy: &TruncationPolicy,
) -> Result<BvRecord> {
    let bound = bv_bound(f, params, bp, convention)?;
    let lhs = (kantorovich_eval(f, params, bp.x, policy)? - f.eval(bp.x)).abs();
    Ok(BvRecord {
        n: params.n,
        a: params.a,
        x: bp.x,
        lambda: bp.lambda,
        min_n: bound.min_n,
        lhs,
        bound: bound.total,
        slack: bound.total - lhs,
        convention,
    })
}

/// The kernel-mass inequalities backing the estimate: for valid `(n, x)`,
/// `alpha_n^a(x, y) <= lambda x(1+x) / ((x-y)^2 (n+1))` below `x` and the
/// mirrored statement for the upper tail above `x`.
pub fn kernel_mass_records(
    params: OperatorParams,
    bp: BVBoundParams,
    below: &[f64],
    above: &[f64],
    policy: &TruncationPolicy,
) -> Result<Vec<crate::analysis::BoundRecord>> {
    check_remark(params, bp)?;
    let x = bp.x;
    let scale = bp.lambda * x * (1.0 + x) / (params.n as f64 + 1.0);
    let mut out = Vec::new();
    for &y in below {
        assert!((0.0..x).contains(&y));
        let actual = kernel_cdf(params, x, y, policy)?;
        out.push(crate::analysis::BoundRecord {
            n: params.n,
            a: params.a,
            x: y,
            actual,
            bound: scale / ((x - y) * (x - y)),
        });
    }
    for &z in above {
        assert!(z > x);
        let actual = 1.0 - kernel_cdf(params, x, z, policy)?;
        out.push(crate::analysis::BoundRecord {
            n: params.n,
            a: params.a,
            x: z,
            actual,
            bound: scale / ((z - x) * (z - x)),
        });
    }
    Ok(out)
}
