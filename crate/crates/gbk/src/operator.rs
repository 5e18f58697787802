//! Numerical evaluation of `K_n^a(f;x)`, the sampling operator
//! `B*_{n,a}(f;x)`, the auxiliary operator, the integral kernel `J_n^a`
//! with its partial integral, and `x`-derivatives of `K_n^a`.

use crate::basis::{kahan_sum, weight, weight_row, OperatorParams, TruncationPolicy};
use crate::catalog::FunctionSpec;
use crate::{Error, Result};

/// Gauss-Legendre rule on `[-1, 1]`.
///
/// Nodes are Legendre roots found by Newton iteration from the Chebyshev
/// initial guess; weights `2 / ((1-x^2) P_n'(x)^2)`. Exact for polynomials
/// of degree `2 order - 1`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn gauss_legendre(order: usize) -> Self {
        assert!(order >= 1);
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            // Chebyshev guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_with_deriv(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_with_deriv(n, x);
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        // Newton's cosine guess enumerates roots in descending order.
        nodes.reverse();
        weights.reverse();
        QuadratureRule { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let s: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum();
        half * s
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule::gauss_legendre(16)
    }
}

fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// `int_{k/(n+1)}^{(k+1)/(n+1)} f(t) dt`, splitting at catalog breakpoints
/// so no Gauss node straddles a kink.
pub fn cell_integral(f: &FunctionSpec, k: u32, n: u32, rule: &QuadratureRule) -> f64 {
    let lo = k as f64 / (n as f64 + 1.0);
    let hi = (k + 1) as f64 / (n as f64 + 1.0);
    let mut cuts = f.breakpoints_in(lo, hi);
    cuts.insert(0, lo);
    cuts.push(hi);
    cuts.windows(2)
        .map(|w| rule.integrate(w[0], w[1], |t| f.eval(t)))
        .sum()
}

/// The Kantorovich operator `K_n^a(f; x)`:
/// `(n+1) sum_k W_{n,k}^a(x) int_cell f`.
pub fn kantorovich_eval(
    f: &FunctionSpec,
    params: OperatorParams,
    x: f64,
    policy: &TruncationPolicy,
) -> Result<f64> {
    let rule = QuadratureRule::default();
    kantorovich_eval_with_rule(f, params, x, policy, &rule)
}

pub fn kantorovich_eval_with_rule(
    f: &FunctionSpec,
    params: OperatorParams,
    x: f64,
    policy: &TruncationPolicy,
    rule: &QuadratureRule,
) -> Result<f64> {
    let row = weight_row(params, x, policy)?;
    let np1 = params.n as f64 + 1.0;
    let s = kahan_sum(
        row.values
            .iter()
            .enumerate()
            .map(|(k, &w)| w * cell_integral(f, k as u32, params.n, rule)),
    );
    Ok(np1 * s)
}

/// The sampling operator `B*_{n,a}(f; x) = sum_k W_{n,k}^a(x) f(k/(n+1))`.
pub fn baskakov_eval(
    f: &FunctionSpec,
    params: OperatorParams,
    x: f64,
    policy: &TruncationPolicy,
) -> Result<f64> {
    let row = weight_row(params, x, policy)?;
    let np1 = params.n as f64 + 1.0;
    Ok(kahan_sum(
        row.values
            .iter()
            .enumerate()
            .map(|(k, &w)| w * f.eval(k as f64 / np1)),
    ))
}

/// Centering node `s_n(x) = (nx + ax/(1+x) + 1/2)/(n+1)`, the first raw
/// Kantorovich moment.
pub fn centering_node(params: OperatorParams, x: f64) -> f64 {
    let n = params.n as f64;
    (n * x + params.a * x / (1.0 + x) + 0.5) / (n + 1.0)
}

/// Auxiliary operator `K_n^a(f;x) - f(s_n(x)) + f(x)`; annihilates `t - x`.
pub fn auxiliary_eval(
    f: &FunctionSpec,
    params: OperatorParams,
    x: f64,
    policy: &TruncationPolicy,
) -> Result<f64> {
    let k = kantorovich_eval(f, params, x, policy)?;
    Ok(k - f.eval(centering_node(params, x)) + f.eval(x))
}

/// Kernel density `J_n^a(x, t) = (n+1) W_{n, floor(t(n+1))}^a(x)`,
/// piecewise constant in `t`.
pub fn kernel_density(params: OperatorParams, x: f64, t: f64) -> f64 {
    assert!(t >= 0.0);
    let k = (t * (params.n as f64 + 1.0)).floor() as u32;
    (params.n as f64 + 1.0) * weight(k, params, x)
}

/// Partial kernel integral `alpha_n^a(x, y) = int_0^y J_n^a(x, t) dt`:
/// whole-cell weights plus the fractional boundary cell, exactly.
pub fn kernel_cdf(
    params: OperatorParams,
    x: f64,
    y: f64,
    policy: &TruncationPolicy,
) -> Result<f64> {
    assert!(y >= 0.0);
    let row = weight_row(params, x, policy)?;
    let pos = y * (params.n as f64 + 1.0);
    let full = pos.floor() as usize;
    let frac = pos - pos.floor();
    let mut s = kahan_sum(row.values.iter().take(full).copied());
    if frac > 0.0 {
        if let Some(&w) = row.values.get(full) {
            s += frac * w;
        }
    }
    if full >= row.values.len() {
        // Everything stored lies below y; the remainder is tail mass.
        s = kahan_sum(row.values.iter().copied());
    }
    Ok(s)
}

/// Result of Richardson-extrapolated numerical differentiation.
#[derive(Debug, Clone, Copy)]
pub struct DerivEstimate {
    pub value: f64,
    /// Difference of the last two extrapolation levels.
    pub error_estimate: f64,
}

/// `r`-th derivative (`r` in 1..=3) in `x` of `x -> K_n^a(f; x)` by central
/// differences with two Richardson step-halvings.
pub fn operator_derivative(
    f: &FunctionSpec,
    params: OperatorParams,
    x: f64,
    r: u32,
    policy: &TruncationPolicy,
) -> Result<DerivEstimate> {
    assert!((1..=3).contains(&r), "derivative order must be 1..=3");
    assert!(x > 0.0);
    let rule = QuadratureRule::default();
    let eval = |z: f64| kantorovich_eval_with_rule(f, params, z, policy, &rule);

    // Truncation/roundoff balance for an O(h^2) stencil of order r.
    let mut h0 = x.max(1.0) * f64::EPSILON.powf(1.0 / (r as f64 + 2.0));
    // Keep the widest stencil point inside the domain.
    let reach = if r == 3 { 2.0 } else { 1.0 };
    if x - reach * h0 < 0.0 {
        h0 = x / (reach + 0.5);
    }
    let min_h = 1e-6 * x.max(1.0);
    if h0 / 4.0 < min_h {
        return Err(Error::StepUnderflow { min_h });
    }

    let stencil = |h: f64| -> Result<f64> {
        Ok(match r {
            1 => (eval(x + h)? - eval(x - h)?) / (2.0 * h),
            2 => (eval(x + h)? - 2.0 * eval(x)? + eval(x - h)?) / (h * h),
            _ => {
                (eval(x + 2.0 * h)? - 2.0 * eval(x + h)? + 2.0 * eval(x - h)?
                    - eval(x - 2.0 * h)?)
                    / (2.0 * h * h * h)
            }
        })
    };

    let d0 = stencil(h0)?;
    let d1 = stencil(h0 / 2.0)?;
    let d2 = stencil(h0 / 4.0)?;
    let r1 = (4.0 * d1 - d0) / 3.0;
    let r2 = (4.0 * d2 - d1) / 3.0;
    let value = (16.0 * r2 - r1) / 15.0;
    Ok(DerivEstimate { value, error_estimate: (value - r2).abs() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn policy() -> TruncationPolicy {
        TruncationPolicy::default()
    }

    #[test]
    fn gauss_legendre_well_formed() {
        for order in [2usize, 8, 16] {
            let rule = QuadratureRule::gauss_legendre(order);
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            let total: f64 = rule.weights.iter().sum();
            assert!((total - 2.0).abs() < 1e-13, "order {order}: sum {total}");
            // Exact for degree 2*order - 1.
            let deg = 2 * order - 1;
            let val = rule.integrate(0.0, 1.0, |t| t.powi(deg as i32));
            let exact = 1.0 / (deg as f64 + 1.0);
            assert!((val - exact).abs() < 1e-14, "order {order}");
        }
    }

    #[test]
    fn cell_integral_polynomials() {
        let rule = QuadratureRule::default();
        let one = catalog::monomial(0);
        let t1 = catalog::monomial(1);
        let t2 = catalog::monomial(2);
        assert!((cell_integral(&one, 3, 7, &rule) - 1.0 / 8.0).abs() < 1e-15);
        assert!((cell_integral(&t1, 0, 0, &rule) - 0.5).abs() < 1e-15);
        // int_{1/2}^1 t^2 dt = 7/24
        assert!((cell_integral(&t2, 1, 1, &rule) - 7.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn cell_integral_splits_at_kinks() {
        // |t - 1| over a cell containing the kink: n = 1, k = 1 covers
        // [1/2, 1]; take n = 0, k = 0 covering [0, 1]... the kink at 1 is a
        // cell endpoint there, so use abs centered inside: c = 0.3, n = 0.
        let f = catalog::abs_shift(0.3);
        let rule = QuadratureRule::default();
        let got = cell_integral(&f, 0, 0, &rule);
        let exact = 0.5 * 0.3f64.powi(2) + 0.5 * 0.7f64.powi(2);
        assert!((got - exact).abs() < 1e-14, "{got} vs {exact}");
    }

    #[test]
    fn kantorovich_reproduces_constants() {
        let one = catalog::monomial(0);
        for &(n, a, x) in &[(4u32, 1.0, 1.0), (16, 0.0, 0.1), (64, 3.0, 5.0)] {
            let v = kantorovich_eval(&one, OperatorParams::new(n, a), x, &policy()).unwrap();
            assert!((v - 1.0).abs() < 1e-12, "n={n} a={a} x={x}: {v}");
        }
    }

    #[test]
    fn kantorovich_linear_closed_form() {
        let t1 = catalog::monomial(1);
        // T_{n,1} = (nx + ax/(1+x) + 1/2)/(n+1): n=4, a=1, x=1 -> 1.0
        let v = kantorovich_eval(&t1, OperatorParams::new(4, 1.0), 1.0, &policy()).unwrap();
        assert!((v - 1.0).abs() < 1e-12, "{v}");
        // a=0, n=9, x=2 -> (9*2 + 1/2)/10 = 1.85
        let v = kantorovich_eval(&t1, OperatorParams::new(9, 0.0), 2.0, &policy()).unwrap();
        assert!((v - 1.85).abs() < 1e-12, "{v}");
    }

    #[test]
    fn baskakov_closed_forms() {
        let one = catalog::monomial(0);
        let t1 = catalog::monomial(1);
        let v = baskakov_eval(&one, OperatorParams::new(7, 2.0), 3.0, &policy()).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        // upsilon_1 = (nx + ax/(1+x))/(n+1): n=4, a=1, x=1 -> 0.9
        let v = baskakov_eval(&t1, OperatorParams::new(4, 1.0), 1.0, &policy()).unwrap();
        assert!((v - 0.9).abs() < 1e-12, "{v}");
        // a=0, n=3, x=1 -> 3/4
        let v = baskakov_eval(&t1, OperatorParams::new(3, 0.0), 1.0, &policy()).unwrap();
        assert!((v - 0.75).abs() < 1e-12);
    }

    #[test]
    fn auxiliary_annihilates_recentered_identity() {
        // f(t) = t - x for fixed x: auxiliary operator gives 0.
        let x = 1.3;
        let f = catalog::piecewise_linear("shifted", &[(0.0, -x), (10.0, 10.0 - x)]);
        let v = auxiliary_eval(&f, OperatorParams::new(25, 1.5), x, &policy()).unwrap();
        assert!(v.abs() < 1e-10, "{v}");
        // f = 1 -> 1; f = t at n=4,a=1,x=1 -> K - s_n + x = 1 - 1 + 1 = 1.
        let one = catalog::monomial(0);
        assert!((auxiliary_eval(&one, OperatorParams::new(4, 1.0), 1.0, &policy()).unwrap() - 1.0).abs() < 1e-12);
        let t1 = catalog::monomial(1);
        assert!((auxiliary_eval(&t1, OperatorParams::new(4, 1.0), 1.0, &policy()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kernel_cdf_limits() {
        let p = OperatorParams::new(12, 1.0);
        let x = 0.8;
        assert_eq!(kernel_cdf(p, x, 0.0, &policy()).unwrap(), 0.0);
        let total = kernel_cdf(p, x, 1e6, &policy()).unwrap();
        assert!((total - 1.0).abs() < 1e-12, "{total}");
    }

    #[test]
    fn kernel_cdf_matches_cell_sums() {
        let p = OperatorParams::new(10, 0.5);
        let x = 1.2;
        let row = weight_row(p, x, &policy()).unwrap();
        // Whole cells: y = m/(n+1).
        let y = 4.0 / 11.0;
        let direct: f64 = row.values.iter().take(4).sum();
        let cdf = kernel_cdf(p, x, y, &policy()).unwrap();
        assert!((cdf - direct).abs() < 1e-15);
        // Half cell adds half the boundary weight.
        let y2 = 4.5 / 11.0;
        let cdf2 = kernel_cdf(p, x, y2, &policy()).unwrap();
        assert!((cdf2 - (direct + 0.5 * row.values[4])).abs() < 1e-15);
    }

    #[test]
    fn kernel_density_consistent_with_weights() {
        let p = OperatorParams::new(6, 1.0);
        let x = 0.9;
        // t inside cell 3
        let t = 3.2 / 7.0;
        let j = kernel_density(p, x, t);
        let row = weight_row(p, x, &policy()).unwrap();
        assert!((j - 7.0 * row.values[3]).abs() < 1e-13);
    }

    #[test]
    fn derivative_of_linear_moment() {
        // d/dx T_{n,1} = (n + a/(1+x)^2)/(n+1); a=0, n=9 -> 0.9
        let t1 = catalog::monomial(1);
        let est = operator_derivative(&t1, OperatorParams::new(9, 0.0), 1.0, 1, &policy()).unwrap();
        assert!((est.value - 0.9).abs() < 1e-8, "{}", est.value);
        // a=1, n=4, x=1: (4 + 1/4)/5 = 0.85
        let est = operator_derivative(&t1, OperatorParams::new(4, 1.0), 1.0, 1, &policy()).unwrap();
        assert!((est.value - 0.85).abs() < 1e-8, "{}", est.value);
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let one = catalog::monomial(0);
        let est = operator_derivative(&one, OperatorParams::new(32, 2.0), 0.7, 1, &policy()).unwrap();
        assert!(est.value.abs() < 1e-9, "{}", est.value);
    }

    #[test]
    fn derivative_of_quadratic_moment() {
        // d/dx T_{n,2} at a=0: (2n^2 x + n(2x+2))/(n+1)^2; n=100, x=1.
        let t2 = catalog::monomial(2);
        let n = 100.0f64;
        let expected = (2.0 * n * n + n * 4.0) / (n + 1.0).powi(2);
        let est = operator_derivative(&t2, OperatorParams::new(100, 0.0), 1.0, 1, &policy()).unwrap();
        assert!((est.value - expected).abs() < 1e-7, "{} vs {expected}", est.value);
    }

    #[test]
    fn linearity_and_positivity() {
        let p = OperatorParams::new(20, 1.0);
        let x = 2.0;
        let t1 = catalog::monomial(1);
        let t2 = catalog::monomial(2);
        let combo = catalog::piecewise_linear("combo2", &[(0.0, 3.0), (12.0, 27.0)]); // 3 + 2t
        let k1 = kantorovich_eval(&t1, p, x, &policy()).unwrap();
        let kc = kantorovich_eval(&combo, p, x, &policy()).unwrap();
        assert!((kc - (3.0 + 2.0 * k1)).abs() < 1e-11 * kc.abs().max(1.0));
        // f >= 0 => K f >= 0; t <= t^2 + 1/4 pointwise => monotone.
        let k2 = kantorovich_eval(&t2, p, x, &policy()).unwrap();
        assert!(k1 >= 0.0 && k2 >= 0.0);
        assert!(k1 <= k2 + 0.25 + 1e-12);
    }
}
