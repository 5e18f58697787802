//! Test-function catalog.
//!
//! Operator evaluation needs more than a point-evaluable `f`: the direct
//! estimates need derivatives and growth exponents, the bounded-variation
//! machinery needs one-sided derivative limits and monotonicity data for
//! `f'`. None of that can be inferred from samples, so catalog entries
//! declare it. Built-in entries cover the monomials `t^r` (r <= 6),
//! `e^{-t}`, `sin t`, `sqrt(t)`, `|t - c|`, a piecewise-linear multikink,
//! and `1/(1+t)`; user functions (piecewise linear) can be added from a
//! config file.

use std::sync::Arc;

use crate::{Error, Result};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One-sided values of `f` and `f'` at a breakpoint.
#[derive(Debug, Clone, Copy)]
pub struct OneSided {
    pub x: f64,
    pub f_minus: f64,
    pub f_plus: f64,
    pub df_minus: f64,
    pub df_plus: f64,
}

/// A catalog entry: `f` together with the analytic metadata the checks
/// consume.
#[derive(Clone)]
pub struct FunctionSpec {
    pub id: String,
    f: ScalarFn,
    /// `f'`, `f''`, `f'''` where they exist (away from breakpoints).
    derivs: Vec<ScalarFn>,
    /// Points where `f` or `f'` has a kink or jump, sorted.
    pub breakpoints: Vec<f64>,
    /// One-sided data at each breakpoint, aligned with `breakpoints`.
    pub one_sided: Vec<OneSided>,
    /// Growth exponent: `|f(t)| <= M (1 + t^gamma)`.
    pub growth_gamma: f64,
    /// Interior extrema of `f'` in a window, for total-variation splitting.
    /// `None` means `f'` is piecewise monotone between breakpoints already.
    deriv_extrema: Option<Arc<dyn Fn(f64, f64) -> Vec<f64> + Send + Sync>>,
    /// Whether `f` is bounded on `[0, inf)` (drives sup-norm checks).
    pub bounded: bool,
}

impl std::fmt::Debug for FunctionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FunctionSpec")
            .field("id", &self.id)
            .field("breakpoints", &self.breakpoints)
            .field("growth_gamma", &self.growth_gamma)
            .finish()
    }
}

impl FunctionSpec {
    pub fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    /// `r`-th derivative at a non-breakpoint, `r` in 1..=3.
    pub fn deriv(&self, r: usize, t: f64) -> Option<f64> {
        self.derivs.get(r - 1).map(|d| d(t))
    }

    pub fn has_derivs(&self, r: usize) -> bool {
        self.derivs.len() >= r
    }

    /// One-sided limit of `f'` approaching `t` from above.
    pub fn deriv_plus(&self, t: f64) -> Result<f64> {
        if let Some(os) = self.one_sided_at(t) {
            return Ok(os.df_plus);
        }
        self.deriv(1, t).ok_or_else(|| Error::MissingOneSidedData {
            id: self.id.clone(),
            x: t,
        })
    }

    /// One-sided limit of `f'` approaching `t` from below.
    pub fn deriv_minus(&self, t: f64) -> Result<f64> {
        if let Some(os) = self.one_sided_at(t) {
            return Ok(os.df_minus);
        }
        self.deriv(1, t).ok_or_else(|| Error::MissingOneSidedData {
            id: self.id.clone(),
            x: t,
        })
    }

    /// One-sided limits of `f` itself.
    pub fn value_plus(&self, t: f64) -> f64 {
        self.one_sided_at(t).map_or_else(|| self.eval(t), |os| os.f_plus)
    }

    pub fn value_minus(&self, t: f64) -> f64 {
        self.one_sided_at(t).map_or_else(|| self.eval(t), |os| os.f_minus)
    }

    fn one_sided_at(&self, t: f64) -> Option<&OneSided> {
        self.one_sided.iter().find(|os| os.x == t)
    }

    pub fn breakpoints_in(&self, c: f64, d: f64) -> Vec<f64> {
        self.breakpoints
            .iter()
            .copied()
            .filter(|&b| b > c && b < d)
            .collect()
    }

    /// Split points of `[c, d]` between which `f'` is monotone: the
    /// breakpoints plus any interior extrema of `f'`.
    pub fn deriv_monotone_splits(&self, c: f64, d: f64) -> Result<Vec<f64>> {
        if !self.has_derivs(1) && self.breakpoints.is_empty() {
            return Err(Error::UnknownMonotonicity { c, d });
        }
        let mut pts = self.breakpoints_in(c, d);
        if let Some(extrema) = &self.deriv_extrema {
            pts.extend(extrema(c, d));
        }
        pts.retain(|&p| p > c && p < d);
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        Ok(pts)
    }

    /// Sampled consistency check of the declared growth bound on
    /// `[0, 1000]`; returns the smallest admissible `M`.
    pub fn certify_growth(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..=2000 {
            let t = i as f64 * 0.5;
            m = m.max(self.eval(t).abs() / (1.0 + t.powf(self.growth_gamma)));
        }
        m
    }
}

fn smooth(
    id: &str,
    f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    derivs: Vec<ScalarFn>,
    growth_gamma: f64,
    bounded: bool,
) -> FunctionSpec {
    FunctionSpec {
        id: id.to_string(),
        f: Arc::new(f),
        derivs,
        breakpoints: vec![],
        one_sided: vec![],
        growth_gamma,
        deriv_extrema: None,
        bounded,
    }
}

/// `t^r` with exact derivatives.
pub fn monomial(r: u32) -> FunctionSpec {
    let mut derivs: Vec<ScalarFn> = Vec::new();
    for d in 1..=3u32 {
        if d > r {
            derivs.push(Arc::new(|_| 0.0));
        } else {
            let coef: f64 = ((r - d + 1)..=r).map(|i| i as f64).product();
            let p = (r - d) as i32;
            derivs.push(Arc::new(move |t: f64| coef * t.powi(p)));
        }
    }
    smooth(
        &format!("t{r}"),
        move |t| t.powi(r as i32),
        derivs,
        r as f64,
        r == 0,
    )
}

pub fn exp_neg() -> FunctionSpec {
    smooth(
        "exp_neg",
        |t| (-t).exp(),
        vec![
            Arc::new(|t: f64| -(-t).exp()),
            Arc::new(|t: f64| (-t).exp()),
            Arc::new(|t: f64| -(-t).exp()),
        ],
        0.0,
        true,
    )
}

pub fn sine() -> FunctionSpec {
    let mut s = smooth(
        "sin",
        f64::sin,
        vec![
            Arc::new(f64::cos),
            Arc::new(|t: f64| -t.sin()),
            Arc::new(|t: f64| -t.cos()),
        ],
        0.0,
        true,
    );
    // f' = cos changes monotonicity at multiples of pi.
    s.deriv_extrema = Some(Arc::new(|c: f64, d: f64| {
        let mut out = vec![];
        let mut k = (c / std::f64::consts::PI).ceil() as i64;
        loop {
            let p = k as f64 * std::f64::consts::PI;
            if p >= d {
                break;
            }
            if p > c {
                out.push(p);
            }
            k += 1;
        }
        out
    }));
    s
}

pub fn sqrt_t() -> FunctionSpec {
    smooth(
        "sqrt",
        f64::sqrt,
        vec![
            Arc::new(|t: f64| 0.5 / t.sqrt()),
            Arc::new(|t: f64| -0.25 / t.powf(1.5)),
            Arc::new(|t: f64| 0.375 / t.powf(2.5)),
        ],
        0.5,
        false,
    )
}

pub fn recip() -> FunctionSpec {
    smooth(
        "recip",
        |t| 1.0 / (1.0 + t),
        vec![
            Arc::new(|t: f64| -1.0 / (1.0 + t).powi(2)),
            Arc::new(|t: f64| 2.0 / (1.0 + t).powi(3)),
            Arc::new(|t: f64| -6.0 / (1.0 + t).powi(4)),
        ],
        0.0,
        true,
    )
}

/// `|t - c|`, the canonical derivative-jump example.
pub fn abs_shift(c: f64) -> FunctionSpec {
    FunctionSpec {
        id: format!("abs_{c}"),
        f: Arc::new(move |t| (t - c).abs()),
        derivs: vec![],
        breakpoints: vec![c],
        one_sided: vec![OneSided {
            x: c,
            f_minus: 0.0,
            f_plus: 0.0,
            df_minus: -1.0,
            df_plus: 1.0,
        }],
        growth_gamma: 1.0,
        deriv_extrema: None,
        bounded: false,
    }
}

/// Piecewise-linear function through `(t_i, y_i)` knots, extended linearly
/// past the ends with the boundary slopes.
pub fn piecewise_linear(id: &str, knots: &[(f64, f64)]) -> FunctionSpec {
    assert!(knots.len() >= 2, "need at least two knots");
    let pts: Vec<(f64, f64)> = knots.to_vec();
    let slopes: Vec<f64> = pts
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .collect();
    let one_sided: Vec<OneSided> = (1..pts.len() - 1)
        .map(|i| OneSided {
            x: pts[i].0,
            f_minus: pts[i].1,
            f_plus: pts[i].1,
            df_minus: slopes[i - 1],
            df_plus: slopes[i],
        })
        .collect();
    let breakpoints: Vec<f64> = one_sided.iter().map(|os| os.x).collect();
    let eval_pts = pts.clone();
    let eval_slopes = slopes.clone();
    FunctionSpec {
        id: id.to_string(),
        f: Arc::new(move |t: f64| {
            if t <= eval_pts[0].0 {
                return eval_pts[0].1 + eval_slopes[0] * (t - eval_pts[0].0);
            }
            for i in 0..eval_slopes.len() {
                if t <= eval_pts[i + 1].0 {
                    return eval_pts[i].1 + eval_slopes[i] * (t - eval_pts[i].0);
                }
            }
            let last = eval_pts.len() - 1;
            eval_pts[last].1 + eval_slopes[last - 1] * (t - eval_pts[last].0)
        }),
        derivs: vec![],
        breakpoints,
        one_sided,
        growth_gamma: 1.0,
        deriv_extrema: None,
        bounded: false,
    }
}

/// The built-in three-kink example used by the bounded-variation sweeps.
pub fn multikink() -> FunctionSpec {
    piecewise_linear(
        "multikink",
        &[(0.0, 0.0), (0.5, 1.0), (1.5, 0.5), (3.0, 2.0), (10.0, 2.0)],
    )
}

/// The full built-in catalog.
pub fn builtin_catalog() -> Vec<FunctionSpec> {
    let mut out: Vec<FunctionSpec> = (0..=6).map(monomial).collect();
    out.push(exp_neg());
    out.push(sine());
    out.push(sqrt_t());
    out.push(abs_shift(1.0));
    out.push(multikink());
    out.push(recip());
    out
}

/// Catalog lookup by id, with optional user extensions.
pub fn lookup<'a>(catalog: &'a [FunctionSpec], id: &str) -> Result<&'a FunctionSpec> {
    catalog
        .iter()
        .find(|f| f.id == id)
        .ok_or_else(|| Error::Config(format!("unknown function id `{id}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_derivatives() {
        let f = monomial(3);
        assert_eq!(f.eval(2.0), 8.0);
        assert_eq!(f.deriv(1, 2.0), Some(12.0));
        assert_eq!(f.deriv(2, 2.0), Some(12.0));
        assert_eq!(f.deriv(3, 2.0), Some(6.0));
        assert_eq!(monomial(1).deriv(2, 5.0), Some(0.0));
    }

    #[test]
    fn abs_one_sided_data() {
        let f = abs_shift(1.0);
        assert_eq!(f.deriv_plus(1.0).unwrap(), 1.0);
        assert_eq!(f.deriv_minus(1.0).unwrap(), -1.0);
        assert_eq!(f.value_plus(1.0), 0.0);
        // No derivative data away from the kink and none declared analytic.
        assert!(f.deriv_plus(2.0).is_err());
    }

    #[test]
    fn piecewise_linear_eval_and_slopes() {
        let f = multikink();
        assert_eq!(f.eval(0.25), 0.5);
        assert_eq!(f.eval(1.0), 0.75);
        assert_eq!(f.deriv_minus(0.5).unwrap(), 2.0);
        assert_eq!(f.deriv_plus(0.5).unwrap(), -0.5);
        // One-sided value limits agree with the value from both sides.
        for &b in &f.breakpoints {
            let eps = 1e-9;
            assert!((f.eval(b - eps) - f.value_minus(b)).abs() < 1e-7);
            assert!((f.eval(b + eps) - f.value_plus(b)).abs() < 1e-7);
        }
    }

    #[test]
    fn growth_bound_holds_on_grid() {
        for f in builtin_catalog() {
            let m = f.certify_growth();
            assert!(m.is_finite(), "{}: unbounded growth certificate", f.id);
        }
    }

    #[test]
    fn sine_deriv_splits() {
        let f = sine();
        let splits = f.deriv_monotone_splits(0.0, 7.0).unwrap();
        assert_eq!(splits.len(), 2); // pi and 2 pi
        assert!((splits[0] - std::f64::consts::PI).abs() < 1e-12);
    }
}
