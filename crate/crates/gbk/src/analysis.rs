//! The convergence laboratory.
//!
//! Everything here compares a numerically evaluated quantity against a
//! theoretical bound or limit: sup errors over grids, moduli of smoothness,
//! the second-order direct estimate, Lipschitz-class bounds, weighted-norm
//! majorants, Cesaro-density (statistical) convergence, Voronovskaja
//! asymptotics, and log-log rate fits.
//!
//! Theorems that assert existence of a constant are checked in two passes:
//! the constant is fitted on a calibration grid, frozen, and then validated
//! on a disjoint grid. A reported "violation" therefore means "no single
//! finite constant explains the calibration data", not a failure to guess
//! the sharp constant.
//!
//! Weighted sup norms are truncated sups over `[0, x_max_trunc]` augmented
//! with a far sample standing in for the `x -> inf` asymptote, so doubling
//! the truncation point is a cheap self-check that moves the norm by well
//! under `1e-6`.

use num_rational::BigRational;
use rayon::prelude::*;

use crate::basis::{OperatorParams, TruncationPolicy};
use crate::catalog::FunctionSpec;
use crate::moments::{central_shift, central_table, gamma_fn, kantorovich_table};
use crate::operator::{kantorovich_eval, kantorovich_eval_with_rule, operator_derivative, QuadratureRule};
use crate::ratcore::RatFunc;
use crate::{Error, Result};

/// Exact rational image of an operator parameter. `a` is converted from its
/// (exact binary) float representation, so symbolic and numeric layers talk
/// about the same operator.
pub fn exact_n(n: u32) -> BigRational {
    BigRational::from_integer(n.into())
}

pub fn exact_a(a: f64) -> BigRational {
    BigRational::from_float(a).expect("finite a")
}

/// Evaluation grid.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Spacing {
    Uniform,
    Log,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl GridSpec {
    pub fn uniform(x_min: f64, x_max: f64, points: usize) -> Self {
        assert!(x_min >= 0.0 && x_max > x_min && points >= 2);
        GridSpec { x_min, x_max, points, spacing: Spacing::Uniform }
    }

    pub fn log(x_min: f64, x_max: f64, points: usize) -> Self {
        assert!(x_min > 0.0 && x_max > x_min && points >= 2);
        GridSpec { x_min, x_max, points, spacing: Spacing::Log }
    }

    pub fn points_vec(&self) -> Vec<f64> {
        let m = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                let t = i as f64 / m;
                match self.spacing {
                    Spacing::Uniform => self.x_min + t * (self.x_max - self.x_min),
                    Spacing::Log => self.x_min * (self.x_max / self.x_min).powf(t),
                }
            })
            .collect()
    }
}

/// One bound-vs-actual comparison.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct BoundRecord {
    pub n: u32,
    pub a: f64,
    pub x: f64,
    pub actual: f64,
    pub bound: f64,
}

impl BoundRecord {
    pub fn slack(&self) -> f64 {
        self.bound - self.actual
    }

    /// Small absolute grace so exact-equality cases (`f = t` in several
    /// theorems) don't flap on roundoff.
    pub fn violated(&self) -> bool {
        self.actual > self.bound + 1e-12
    }
}

/// `max over grid of |K_n^a(f; x) - f(x)|`.
pub fn sup_error(
    f: &FunctionSpec,
    params: OperatorParams,
    grid: &GridSpec,
    policy: &TruncationPolicy,
) -> Result<f64> {
    let rule = QuadratureRule::default();
    let errs: Result<Vec<f64>> = grid
        .points_vec()
        .par_iter()
        .map(|&x| {
            let v = kantorovich_eval_with_rule(f, params, x, policy, &rule)?;
            Ok((v - f.eval(x)).abs())
        })
        .collect();
    Ok(errs?.into_iter().fold(0.0, f64::max))
}

/// Grid-sup moduli of smoothness at step `delta`.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ModulusReport {
    pub delta: f64,
    /// First-order `omega(f, delta)`.
    pub omega: f64,
    /// Second-order `omega_2(f, delta)`.
    pub omega2: f64,
    /// Weighted `Omega(f, delta)` with the `1 + (x+h)^2` denominator.
    pub omega_weighted: f64,
}

const H_SAMPLES: usize = 24;

/// Moduli estimated as sups over the grid in `x` and `H_SAMPLES` steps
/// `h in (0, delta]`. `x_max` bounds the base point; the shifted points
/// `x + 2h` may exceed it, matching moduli taken on a slightly larger
/// interval.
pub fn modulus(f: &FunctionSpec, delta: f64, grid: &GridSpec) -> ModulusReport {
    assert!(delta > 0.0);
    let xs = grid.points_vec();
    let mut omega: f64 = 0.0;
    let mut omega2: f64 = 0.0;
    let mut omega_weighted: f64 = 0.0;
    for j in 1..=H_SAMPLES {
        let h = delta * j as f64 / H_SAMPLES as f64;
        for &x in &xs {
            let f0 = f.eval(x);
            let f1 = f.eval(x + h);
            let d1 = (f1 - f0).abs();
            omega = omega.max(d1);
            omega2 = omega2.max((f.eval(x + 2.0 * h) - 2.0 * f1 + f0).abs());
            omega_weighted = omega_weighted.max(d1 / (1.0 + (x + h) * (x + h)));
        }
    }
    ModulusReport { delta, omega, omega2, omega_weighted }
}

/// Domain used for modulus estimation in the bound checks: generous enough
/// that the sups have stabilized for the bounded catalog functions.
fn modulus_grid() -> GridSpec {
    GridSpec::uniform(0.0, 24.0, 481)
}

/// `u_{n,2}(x)`, the second central moment, evaluated from the exact table.
pub fn u2_at(params: OperatorParams, x: f64) -> f64 {
    let table = central_table(2, &exact_n(params.n), &exact_a(params.a));
    table.entry(2).eval_f64(x).expect("x >= 0")
}

/// `|(-x + ax/(1+x) + 1/2)| / (n+1)`, the centering defect.
pub fn centering_defect(params: OperatorParams, x: f64) -> f64 {
    let s = central_shift(&exact_a(params.a)).eval_f64(x).expect("x >= 0");
    s.abs() / (params.n as f64 + 1.0)
}

/// The two modulus terms of the second-order direct estimate, before the
/// fitted constant is applied: `omega_2(f, sqrt(gamma_n^a))` and
/// `omega(f, centering defect)`.
#[derive(Debug, Clone, Copy)]
pub struct DirectTerms {
    pub actual: f64,
    pub omega2_term: f64,
    pub omega_term: f64,
}

pub fn local_direct_terms(
    f: &FunctionSpec,
    params: OperatorParams,
    x: f64,
    policy: &TruncationPolicy,
) -> Result<DirectTerms> {
    let gamma = gamma_fn(&exact_n(params.n), &exact_a(params.a))
        .eval_f64(x)
        .expect("x >= 0");
    let grid = modulus_grid();
    let omega2_term = modulus(f, gamma.sqrt(), &grid).omega2;
    let shift = centering_defect(params, x);
    let omega_term = if shift > 0.0 { modulus(f, shift, &grid).omega } else { 0.0 };
    let actual = (kantorovich_eval(f, params, x, policy)? - f.eval(x)).abs();
    Ok(DirectTerms { actual, omega2_term, omega_term })
}

/// Smallest constant `C >= 1` making `actual <= C omega_2 + omega` hold on
/// the calibration points.
pub fn fit_direct_constant(
    f: &FunctionSpec,
    points: &[(OperatorParams, f64)],
    policy: &TruncationPolicy,
) -> Result<f64> {
    let mut c: f64 = 1.0;
    for &(params, x) in points {
        let t = local_direct_terms(f, params, x, policy)?;
        if t.omega2_term > 0.0 {
            c = c.max((t.actual - t.omega_term) / t.omega2_term);
        }
    }
    Ok(c)
}

/// Second-order direct estimate with a frozen constant.
pub fn check_local_direct(
    f: &FunctionSpec,
    params: OperatorParams,
    x: f64,
    c: f64,
    policy: &TruncationPolicy,
) -> Result<BoundRecord> {
    let t = local_direct_terms(f, params, x, policy)?;
    Ok(BoundRecord {
        n: params.n,
        a: params.a,
        x,
        actual: t.actual,
        bound: c * t.omega2_term + t.omega_term,
    })
}

/// Both Lipschitz-flavored pointwise bounds.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct LipschitzRecord {
    pub n: u32,
    pub a: f64,
    pub x: f64,
    pub actual: f64,
    /// `M (u_{n,2} / (a1 x^2 + a2 x))^{alpha/2}`.
    pub bound_class: f64,
    /// Maximal-function variant `omega~_tau(f, x) u_{n,2}^{tau/2}`.
    pub bound_maximal: f64,
}

impl LipschitzRecord {
    pub fn violated(&self) -> bool {
        self.actual > self.bound_class + 1e-12 || self.actual > self.bound_maximal + 1e-12
    }
}

/// Grid certificate for membership in the two-parameter Lipschitz class:
/// the sup of `|f(t) - f(x)| (t + a1 x^2 + a2 x)^{alpha/2} / |t-x|^alpha`.
pub fn certify_lipschitz(f: &FunctionSpec, alpha: f64, a1: f64, a2: f64) -> f64 {
    let pts = modulus_grid().points_vec();
    let mut m: f64 = 0.0;
    for &x in &pts {
        if x <= 0.0 {
            continue;
        }
        for &t in &pts {
            let gap = (t - x).abs();
            if gap < 1e-9 {
                continue;
            }
            let weight = (t + a1 * x * x + a2 * x).powf(alpha / 2.0);
            m = m.max((f.eval(t) - f.eval(x)).abs() * weight / gap.powf(alpha));
        }
    }
    m
}

/// Lipschitz-type maximal function `sup_{t != x} |f(t)-f(x)| / |t-x|^tau`.
pub fn lipschitz_maximal(f: &FunctionSpec, x: f64, tau: f64) -> f64 {
    let pts = modulus_grid().points_vec();
    let mut m: f64 = 0.0;
    for &t in &pts {
        let gap = (t - x).abs();
        if gap < 1e-9 {
            continue;
        }
        m = m.max((f.eval(t) - f.eval(x)).abs() / gap.powf(tau));
    }
    m
}

pub fn check_lipschitz(
    f: &FunctionSpec,
    params: OperatorParams,
    x: f64,
    alpha: f64,
    a1: f64,
    a2: f64,
    m: f64,
    policy: &TruncationPolicy,
) -> Result<LipschitzRecord> {
    assert!(x > 0.0 && a1 > 0.0 && a2 > 0.0 && alpha > 0.0 && alpha <= 1.0);
    let u2 = u2_at(params, x);
    let actual = (kantorovich_eval(f, params, x, policy)? - f.eval(x)).abs();
    let bound_class = m * (u2 / (a1 * x * x + a2 * x)).powf(alpha / 2.0);
    let bound_maximal = lipschitz_maximal(f, x, alpha) * u2.powf(alpha / 2.0);
    Ok(LipschitzRecord { n: params.n, a: params.a, x, actual, bound_class, bound_maximal })
}

/// Weighted-norm configuration: `rho(x) = 1 + x^rho_exponent`, sup
/// truncated at `x_max_trunc`.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct WeightedNormSpec {
    pub rho_exponent: f64,
    pub x_max_trunc: f64,
}

impl Default for WeightedNormSpec {
    fn default() -> Self {
        WeightedNormSpec { rho_exponent: 2.0, x_max_trunc: 50.0 }
    }
}

impl WeightedNormSpec {
    pub fn rho(&self, x: f64) -> f64 {
        1.0 + x.powf(self.rho_exponent)
    }
}

const NORM_GRID_POINTS: usize = 4001;
/// Far sample standing in for the `x -> inf` asymptote of `g / rho`.
const NORM_FAR_SAMPLE: f64 = 1e8;

/// Truncated weighted sup norm of an exact rational function, with the far
/// sample included so the asymptote cannot hide past the truncation point.
pub fn weighted_sup_rat(g: &RatFunc, spec: &WeightedNormSpec) -> f64 {
    let at = |x: f64| g.eval_f64(x).expect("x >= 0").abs() / spec.rho(x);
    let m = (NORM_GRID_POINTS - 1) as f64;
    let grid_max = (0..NORM_GRID_POINTS)
        .map(|i| at(spec.x_max_trunc * i as f64 / m))
        .fold(0.0, f64::max);
    grid_max.max(at(NORM_FAR_SAMPLE))
}

/// The weighted-norm majorants for the first two monomials, checked from
/// the exact moment tables.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct WeightedMajorants {
    pub n: u32,
    pub a: f64,
    pub norm_e1: f64,
    pub bound_e1: f64,
    pub norm_e2: f64,
    pub bound_e2: f64,
    /// Change of each norm when the truncation point doubles (self-check).
    pub doubling_delta: f64,
}

impl WeightedMajorants {
    pub fn violated(&self) -> bool {
        self.norm_e1 > self.bound_e1 + 1e-12 || self.norm_e2 > self.bound_e2 + 1e-12
    }
}

pub fn weighted_majorants(params: OperatorParams, spec: &WeightedNormSpec) -> WeightedMajorants {
    let table = kantorovich_table(2, &exact_n(params.n), &exact_a(params.a));
    let g1 = table.entry(1).sub(&RatFunc::x());
    let g2 = table.entry(2).sub(&RatFunc::x().mul(&RatFunc::x()));
    let norm_e1 = weighted_sup_rat(&g1, spec);
    let norm_e2 = weighted_sup_rat(&g2, spec);
    let doubled = WeightedNormSpec { x_max_trunc: 2.0 * spec.x_max_trunc, ..*spec };
    let doubling_delta = (weighted_sup_rat(&g1, &doubled) - norm_e1)
        .abs()
        .max((weighted_sup_rat(&g2, &doubled) - norm_e2).abs());
    let np1 = params.n as f64 + 1.0;
    let a = params.a;
    WeightedMajorants {
        n: params.n,
        a,
        norm_e1,
        bound_e1: (2.0 * a + 1.5) / np1,
        norm_e2,
        bound_e2: (2.0 * a + 3.0) / np1 + (a * a + 4.0 * a + 13.0 / 3.0) / (np1 * np1),
        doubling_delta,
    }
}

/// Finite-interval estimate: on `[0, b]`,
/// `|K f - f| <= 4 M_f (1 + b^2) u_{n,2}(x) + 2 omega_{b+1}(f, sqrt(u_{n,2}(x)))`
/// with the modulus taken over `[0, b+1]`.
pub fn check_finite_interval(
    f: &FunctionSpec,
    params: OperatorParams,
    b: f64,
    policy: &TruncationPolicy,
) -> Result<Vec<BoundRecord>> {
    assert!(b > 0.0);
    let m_f = {
        let spec = WeightedNormSpec::default();
        let pts = GridSpec::uniform(0.0, spec.x_max_trunc, 2001).points_vec();
        pts.iter().map(|&x| f.eval(x).abs() / spec.rho(x)).fold(0.0, f64::max)
    };
    let xs = GridSpec::uniform(b / 16.0, b, 16).points_vec();
    let omega_grid = GridSpec::uniform(0.0, b + 1.0, 401);
    xs.iter()
        .map(|&x| {
            let u2 = u2_at(params, x);
            let actual = (kantorovich_eval(f, params, x, policy)? - f.eval(x)).abs();
            let bound = 4.0 * m_f * (1.0 + b * b) * u2
                + 2.0 * modulus(f, u2.sqrt(), &omega_grid).omega;
            Ok(BoundRecord { n: params.n, a: params.a, x, actual, bound })
        })
        .collect()
}

/// Truncated weighted sup of `|K f - f| / (1 + x^2)^{5/2}`; the integrand
/// decays like `x^{-3}` for `f` of quadratic growth, so the far tail is
/// negligible (doubling self-check in the caller's hands via `spec`).
pub fn weighted_rate_lhs(
    f: &FunctionSpec,
    params: OperatorParams,
    spec: &WeightedNormSpec,
    policy: &TruncationPolicy,
) -> Result<f64> {
    let rule = QuadratureRule::default();
    let grid = GridSpec::log(1e-3, spec.x_max_trunc, 60);
    let mut xs = grid.points_vec();
    xs.push(0.0);
    let vals: Result<Vec<f64>> = xs
        .par_iter()
        .map(|&x| {
            let v = kantorovich_eval_with_rule(f, params, x, policy, &rule)?;
            Ok((v - f.eval(x)).abs() / (1.0 + x * x).powf(2.5))
        })
        .collect();
    Ok(vals?.into_iter().fold(0.0, f64::max))
}

/// Fit the weighted-rate constant `M_1` (largest ratio of left side to
/// `Omega(f, n^{-1/2})`) over calibration parameter pairs.
pub fn fit_weighted_rate_constant(
    f: &FunctionSpec,
    calibration: &[OperatorParams],
    spec: &WeightedNormSpec,
    policy: &TruncationPolicy,
) -> Result<f64> {
    let grid = modulus_grid();
    let mut m1: f64 = 1.0;
    for &params in calibration {
        let lhs = weighted_rate_lhs(f, params, spec, policy)?;
        let omega = modulus(f, (params.n as f64).powf(-0.5), &grid).omega_weighted;
        if omega > 0.0 {
            m1 = m1.max(lhs / omega);
        }
    }
    Ok(m1)
}

/// Weighted-rate estimate with a frozen `M_1` and `delta = n^{-1/2}`.
pub fn check_weighted_rate(
    f: &FunctionSpec,
    params: OperatorParams,
    spec: &WeightedNormSpec,
    m1: f64,
    policy: &TruncationPolicy,
) -> Result<BoundRecord> {
    let lhs = weighted_rate_lhs(f, params, spec, policy)?;
    let omega = modulus(f, (params.n as f64).powf(-0.5), &modulus_grid()).omega_weighted;
    Ok(BoundRecord { n: params.n, a: params.a, x: f64::NAN, actual: lhs, bound: m1 * omega })
}

/// Cesaro (C_1) density of `{k <= n : b_k >= epsilon}` for each prefix
/// length `n`; `b_k` is 1-indexed into `seq_bounds`.
pub fn stat_density(seq_bounds: &[f64], epsilon: f64) -> Vec<f64> {
    assert!(epsilon > 0.0);
    let mut hits = 0usize;
    seq_bounds
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            if b >= epsilon {
                hits += 1;
            }
            hits as f64 / (i + 1) as f64
        })
        .collect()
}

/// `‖K_k e1 - e1‖_rho` for `k = 1..=k_max`, the canonical statistical
/// input sequence, from the exact tables.
pub fn e1_norm_sequence(a: f64, k_max: u32, spec: &WeightedNormSpec) -> Vec<f64> {
    (1..=k_max)
        .into_par_iter()
        .map(|k| {
            let table = kantorovich_table(1, &exact_n(k), &exact_a(a));
            weighted_sup_rat(&table.entry(1).sub(&RatFunc::x()), spec)
        })
        .collect()
}

/// Past this index the `e1` majorant `(2a + 3/2)/(k+1)` sits below
/// `epsilon`, so the density numerator stops growing.
pub fn e1_majorant_threshold(a: f64, epsilon: f64) -> u32 {
    ((2.0 * a + 1.5) / epsilon - 1.0).floor() as u32
}

/// One term of the Voronovskaja sequence `L_n = n (d^r K f - f^(r))`.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct VoronovskajaRow {
    pub n: u32,
    pub l_n: f64,
    pub limit: f64,
    pub deviation: f64,
}

/// The limiting expression, assembled from catalog derivatives.
pub fn voronovskaja_limit(f: &FunctionSpec, a: f64, x: f64, r: u32) -> Result<f64> {
    if !f.has_derivs(r as usize + 2) {
        return Err(Error::Config(format!(
            "function `{}` lacks derivatives up to order {}",
            f.id,
            r + 2
        )));
    }
    let d1 = f.deriv(1, x).unwrap();
    let d2 = f.deriv(2, x).unwrap();
    Ok(match r {
        0 => (a * x / (1.0 + x) + 0.5 - x) * d1 + (x + x * x) * d2 / 2.0,
        1 => {
            let d3 = f.deriv(3, x).unwrap();
            (-1.0 + a / ((1.0 + x) * (1.0 + x))) * d1
                + (1.0 + a * x / (1.0 + x)) * d2
                + x * (1.0 + x) * d3 / 2.0
        }
        _ => return Err(Error::Config("voronovskaja order must be 0 or 1".into())),
    })
}

pub fn voronovskaja_check(
    f: &FunctionSpec,
    a: f64,
    x: f64,
    r: u32,
    n_sequence: &[u32],
    policy: &TruncationPolicy,
) -> Result<Vec<VoronovskajaRow>> {
    assert!(x > 0.0);
    let limit = voronovskaja_limit(f, a, x, r)?;
    n_sequence
        .iter()
        .map(|&n| {
            let params = OperatorParams::new(n, a);
            let value = match r {
                0 => kantorovich_eval(f, params, x, policy)? - f.eval(x),
                _ => operator_derivative(f, params, x, r, policy)?.value - f.deriv(r as usize, x).unwrap(),
            };
            let l_n = n as f64 * value;
            Ok(VoronovskajaRow { n, l_n, limit, deviation: (l_n - limit).abs() })
        })
        .collect()
}

/// Least-squares fit of `log e = log C - s log n`.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct RateFit {
    pub exponent: f64,
    pub constant: f64,
    /// Max log-space deviation of the data from the fitted line.
    pub residual: f64,
}

pub fn rate_fit(errors: &[(u64, f64)]) -> Result<RateFit> {
    assert!(errors.len() >= 3, "rate fit needs at least 3 points");
    for &(n, e) in errors {
        if e <= 0.0 || !e.is_finite() {
            return Err(Error::NonpositiveError { n, value: e });
        }
    }
    let pts: Vec<(f64, f64)> = errors
        .iter()
        .map(|&(n, e)| ((n as f64).ln(), e.ln()))
        .collect();
    let m = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    let intercept = (sy - slope * sx) / m;
    let residual = pts
        .iter()
        .map(|&(lx, ly)| (ly - (intercept + slope * lx)).abs())
        .fold(0.0, f64::max);
    Ok(RateFit { exponent: -slope, constant: intercept.exp(), residual })
}

/// The disjoint parameter grids used to fit and then validate theorem
/// constants.
pub fn calibration_params() -> Vec<OperatorParams> {
    let mut out = vec![];
    for &n in &[32u32, 128, 512] {
        for &a in &[0.5, 2.0] {
            out.push(OperatorParams::new(n, a));
        }
    }
    out
}

pub fn validation_params() -> Vec<OperatorParams> {
    let mut out = vec![];
    for &n in &[16u32, 64, 256, 1024] {
        for &a in &[0.0, 1.0, 3.0] {
            out.push(OperatorParams::new(n, a));
        }
    }
    out
}

pub fn calibration_points() -> Vec<(OperatorParams, f64)> {
    let mut out = vec![];
    for params in calibration_params() {
        for &x in &[0.25, 0.75, 1.5, 3.0, 7.0] {
            out.push((params, x));
        }
    }
    out
}

pub fn validation_points() -> Vec<(OperatorParams, f64)> {
    let mut out = vec![];
    for params in validation_params() {
        for &x in &[0.5, 1.0, 2.0, 5.0, 10.0] {
            out.push((params, x));
        }
    }
    out
}
