//! Exact arithmetic for rational functions of the form `p(x) / (1+x)^m`.
//!
//! The moment recurrences only ever divide by `(1+x)` and by scalars, so the
//! family is closed under the operations implemented here and normalization
//! reduces to a synthetic-division check at `x = -1`. Coefficients are
//! arbitrary-precision rationals; all operations are exact.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

/// Convenience constructor for small rationals.
pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Rational function `p(x) / (1+x)^m`, normalized so that the numerator has
/// no trailing zero coefficients and is not divisible by `(1+x)` unless
/// `m = 0`. Normalized form makes structural equality semantic equality.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatFunc {
    /// Numerator coefficients, ascending powers of `x`. Empty means zero.
    coeffs: Vec<BigRational>,
    /// Denominator exponent `m` in `(1+x)^m`.
    pole_order: usize,
}

impl RatFunc {
    pub fn new(coeffs: Vec<BigRational>, pole_order: usize) -> Self {
        let mut f = RatFunc { coeffs, pole_order };
        f.normalize();
        f
    }

    pub fn zero() -> Self {
        RatFunc { coeffs: vec![], pole_order: 0 }
    }

    pub fn one() -> Self {
        RatFunc::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        RatFunc::new(vec![c], 0)
    }

    /// The identity function `x`.
    pub fn x() -> Self {
        RatFunc::new(vec![BigRational::zero(), BigRational::one()], 0)
    }

    /// `1 + x`, handy when assembling recurrences.
    pub fn one_plus_x() -> Self {
        RatFunc::new(vec![BigRational::one(), BigRational::one()], 0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn pole_order(&self) -> usize {
        self.pole_order
    }

    /// Degree of the numerator; `None` for the zero function.
    pub fn degree(&self) -> Option<usize> {
        if self.coeffs.is_empty() { None } else { Some(self.coeffs.len() - 1) }
    }

    fn normalize(&mut self) {
        while let Some(last) = self.coeffs.last() {
            if last.is_zero() {
                self.coeffs.pop();
            } else {
                break;
            }
        }
        if self.coeffs.is_empty() {
            self.pole_order = 0;
            return;
        }
        // Cancel (1+x) factors: p divisible by (1+x) iff p(-1) = 0.
        while self.pole_order > 0 && self.eval_numer_at_minus_one().is_zero() {
            self.divide_numer_by_one_plus_x();
            self.pole_order -= 1;
        }
    }

    fn eval_numer_at_minus_one(&self) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.coeffs.iter().rev() {
            acc = c - acc;
        }
        acc
    }

    /// Synthetic division of the numerator by `(x + 1)`; caller must have
    /// checked `p(-1) = 0`.
    fn divide_numer_by_one_plus_x(&mut self) {
        let d = self.coeffs.len() - 1;
        let mut q = vec![BigRational::zero(); d];
        q[d - 1] = self.coeffs[d].clone();
        for k in (1..d).rev() {
            q[k - 1] = &self.coeffs[k] - &q[k];
        }
        self.coeffs = q;
    }

    pub fn add(&self, rhs: &RatFunc) -> RatFunc {
        let m = self.pole_order.max(rhs.pole_order);
        let p1 = raise(&self.coeffs, m - self.pole_order);
        let p2 = raise(&rhs.coeffs, m - rhs.pole_order);
        RatFunc::new(poly_add(&p1, &p2), m)
    }

    pub fn sub(&self, rhs: &RatFunc) -> RatFunc {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> RatFunc {
        RatFunc {
            coeffs: self.coeffs.iter().map(|c| -c.clone()).collect(),
            pole_order: self.pole_order,
        }
    }

    pub fn mul(&self, rhs: &RatFunc) -> RatFunc {
        RatFunc::new(
            poly_mul(&self.coeffs, &rhs.coeffs),
            self.pole_order + rhs.pole_order,
        )
    }

    pub fn scale(&self, c: &BigRational) -> RatFunc {
        RatFunc::new(
            self.coeffs.iter().map(|k| k * c).collect(),
            self.pole_order,
        )
    }

    /// Division by `(1+x)`: the family is closed under this, so it is just a
    /// pole-order bump followed by normalization.
    pub fn div_one_plus_x(&self) -> RatFunc {
        RatFunc::new(self.coeffs.clone(), self.pole_order + 1)
    }

    /// Exact derivative: `d/dx [p/(1+x)^m] = [p'(1+x) - m p] / (1+x)^{m+1}`.
    pub fn derive(&self) -> RatFunc {
        let dp = poly_derive(&self.coeffs);
        let term1 = poly_mul(&dp, &[BigRational::one(), BigRational::one()]);
        let m = BigRational::from(BigInt::from(self.pole_order));
        let term2: Vec<BigRational> = self.coeffs.iter().map(|c| c * &m).collect();
        RatFunc::new(poly_sub(&term1, &term2), self.pole_order + 1)
    }

    /// Exact evaluation at a rational point.
    pub fn eval_exact(&self, x: &BigRational) -> Result<BigRational> {
        let minus_one = -BigRational::one();
        if self.pole_order > 0 && *x == minus_one {
            return Err(Error::Pole);
        }
        let mut p = BigRational::zero();
        for c in self.coeffs.iter().rev() {
            p = p * x + c;
        }
        let base = BigRational::one() + x;
        let mut den = BigRational::one();
        for _ in 0..self.pole_order {
            den *= &base;
        }
        Ok(p / den)
    }

    /// Floating-point evaluation via Horner's rule.
    pub fn eval_f64(&self, x: f64) -> Result<f64> {
        if self.pole_order > 0 && x == -1.0 {
            return Err(Error::Pole);
        }
        let mut p = 0.0;
        for c in self.coeffs.iter().rev() {
            p = p * x + c.to_f64().unwrap_or(f64::NAN);
        }
        Ok(p / (1.0 + x).powi(self.pole_order as i32))
    }
}

impl fmt::Display for RatFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| match i {
                0 => format!("{c}"),
                1 => format!("({c})*x"),
                _ => format!("({c})*x^{i}"),
            })
            .collect();
        let numer = terms.join(" + ");
        match self.pole_order {
            0 => write!(f, "{numer}"),
            1 => write!(f, "({numer}) / (1+x)"),
            m => write!(f, "({numer}) / (1+x)^{m}"),
        }
    }
}

/// JSON form: numerator coefficients as `"p/q"` strings plus the pole order.
#[derive(Serialize, Deserialize)]
struct RatFuncRepr {
    num: Vec<String>,
    pole_order: usize,
}

impl Serialize for RatFunc {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RatFuncRepr {
            num: self.coeffs.iter().map(|c| format!("{c}")).collect(),
            pole_order: self.pole_order,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RatFunc {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = RatFuncRepr::deserialize(d)?;
        let coeffs = repr
            .num
            .iter()
            .map(|s| BigRational::from_str(s).map_err(serde::de::Error::custom))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(RatFunc::new(coeffs, repr.pole_order))
    }
}

fn raise(p: &[BigRational], k: usize) -> Vec<BigRational> {
    let mut out = p.to_vec();
    for _ in 0..k {
        out = poly_mul(&out, &[BigRational::one(), BigRational::one()]);
    }
    out
}

fn poly_add(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| {
            let x = a.get(i).cloned().unwrap_or_else(BigRational::zero);
            let y = b.get(i).cloned().unwrap_or_else(BigRational::zero);
            x + y
        })
        .collect()
}

fn poly_sub(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| {
            let x = a.get(i).cloned().unwrap_or_else(BigRational::zero);
            let y = b.get(i).cloned().unwrap_or_else(BigRational::zero);
            x - y
        })
        .collect()
}

fn poly_mul(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![BigRational::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_derive(p: &[BigRational]) -> Vec<BigRational> {
    p.iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| c * BigRational::from(BigInt::from(i)))
        .collect()
}

/// Result of the geometric ratio test on a sequence of values at a fixed
/// point: successive exponent estimates `log(|v_i| / |v_{i+1}|) / log(n_{i+1}/n_i)`.
#[derive(Debug, Clone, Serialize)]
pub struct OrderEstimate {
    /// Exponent from the last (largest-n) pair.
    pub exponent: f64,
    /// All pairwise exponent estimates.
    pub ratios: Vec<f64>,
}

/// Estimates `s` in `|f_n(x0)| ~ C n^{-s}` from values of a function family
/// on a geometric ladder of `n`. Requires at least three entries; a zero
/// value anywhere makes the order undefined.
pub fn leading_order(seq: &[(u64, RatFunc)], x0: &BigRational) -> Result<OrderEstimate> {
    assert!(seq.len() >= 3, "need at least 3 values of n");
    let mut vals = Vec::with_capacity(seq.len());
    for (n, f) in seq {
        let v = f.eval_exact(x0)?;
        if v.is_zero() {
            return Err(Error::OrderUndefined { n: *n });
        }
        vals.push((*n as f64, v.abs().to_f64().unwrap()));
    }
    let ratios: Vec<f64> = vals
        .windows(2)
        .map(|w| (w[0].1 / w[1].1).ln() / (w[1].0 / w[0].0).ln())
        .collect();
    Ok(OrderEstimate { exponent: *ratios.last().unwrap(), ratios })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rf(coeffs: &[(i64, i64)], m: usize) -> RatFunc {
        RatFunc::new(coeffs.iter().map(|&(p, q)| rat(p, q)).collect(), m)
    }

    #[test]
    fn add_polynomials() {
        // x + 1 -> coeffs [1, 1], m = 0 (no cancellation at m = 0)
        let s = RatFunc::x().add(&RatFunc::one());
        assert_eq!(s, rf(&[(1, 1), (1, 1)], 0));
    }

    #[test]
    fn normalization_cancels_exactly() {
        // (1+x)/(1+x) -> 1
        let f = rf(&[(1, 1), (1, 1)], 1);
        assert_eq!(f, RatFunc::one());
        // (x^2 + x)/(1+x) -> x
        let g = rf(&[(0, 1), (1, 1), (1, 1)], 1);
        assert_eq!(g, RatFunc::x());
        assert_eq!(g.eval_exact(&rat(3, 1)).unwrap(), rat(3, 1));
    }

    #[test]
    fn mul_squares_pole_order() {
        // (x/(1+x))^2 = x^2/(1+x)^2
        let f = rf(&[(0, 1), (1, 1)], 1);
        let sq = f.mul(&f);
        assert_eq!(sq, rf(&[(0, 1), (0, 1), (1, 1)], 2));
    }

    #[test]
    fn derive_basics() {
        assert_eq!(RatFunc::x().derive(), RatFunc::one());
        // d/dx 1/(1+x) = -1/(1+x)^2
        let f = rf(&[(1, 1)], 1);
        assert_eq!(f.derive(), rf(&[(-1, 1)], 2));
        // d/dx x/(1+x) = 1/(1+x)^2 (quotient rule by hand)
        let g = rf(&[(0, 1), (1, 1)], 1);
        assert_eq!(g.derive(), rf(&[(1, 1)], 2));
    }

    #[test]
    fn eval_pole_rejected() {
        let f = rf(&[(1, 1)], 1);
        assert!(matches!(f.eval_exact(&rat(-1, 1)), Err(Error::Pole)));
        assert!(matches!(f.eval_f64(-1.0), Err(Error::Pole)));
        assert_eq!(rf(&[(0, 1), (1, 1)], 1).eval_exact(&rat(1, 1)).unwrap(), rat(1, 2));
        assert_eq!(RatFunc::one().eval_exact(&rat(7, 1)).unwrap(), rat(1, 1));
    }

    #[test]
    fn derivative_matches_finite_differences() {
        // Richardson-extrapolated central difference, relative tolerance 1e-8.
        let f = rf(&[(2, 3), (-1, 2), (0, 1), (5, 7)], 2);
        let df = f.derive();
        for &x in &[0.0, 0.3, 1.0, 4.5] {
            let h = 1e-4 * (x.abs() + 1.0);
            let d = |h: f64| {
                (f.eval_f64(x + h).unwrap() - f.eval_f64(x - h).unwrap()) / (2.0 * h)
            };
            let rich = (4.0 * d(h / 2.0) - d(h)) / 3.0;
            let exact = df.eval_f64(x).unwrap();
            assert!(
                (rich - exact).abs() <= 1e-8 * exact.abs().max(1.0),
                "x = {x}: {rich} vs {exact}"
            );
        }
    }

    #[test]
    fn leading_order_synthetic() {
        // f_n = 1/n  ->  s = 1
        let seq: Vec<(u64, RatFunc)> = [64u64, 128, 256]
            .iter()
            .map(|&n| (n, RatFunc::constant(rat(1, n as i64))))
            .collect();
        let est = leading_order(&seq, &rat(1, 1)).unwrap();
        assert!((est.exponent - 1.0).abs() < 0.01);
    }

    #[test]
    fn leading_order_rejects_zero() {
        let seq = vec![
            (64u64, RatFunc::one()),
            (128, RatFunc::zero()),
            (256, RatFunc::one()),
        ];
        assert!(matches!(
            leading_order(&seq, &rat(1, 1)),
            Err(Error::OrderUndefined { n: 128 })
        ));
    }

    #[test]
    fn serde_round_trip() {
        let f = rf(&[(1, 2), (-3, 1)], 2);
        let json = serde_json::to_string(&f).unwrap();
        assert!(json.contains("pole_order"));
        let back: RatFunc = serde_json::from_str(&json).unwrap();
        assert_eq!(f, back);
    }

    fn arb_ratfunc() -> impl Strategy<Value = RatFunc> {
        (
            proptest::collection::vec((-20i64..=20, 1i64..=6), 0..5),
            0usize..3,
        )
            .prop_map(|(cs, m)| {
                RatFunc::new(cs.into_iter().map(|(p, q)| rat(p, q)).collect(), m)
            })
    }

    proptest! {
        #[test]
        fn add_commutative(a in arb_ratfunc(), b in arb_ratfunc()) {
            prop_assert_eq!(a.add(&b), b.add(&a));
        }

        #[test]
        fn mul_commutative(a in arb_ratfunc(), b in arb_ratfunc()) {
            prop_assert_eq!(a.mul(&b), b.mul(&a));
        }

        #[test]
        fn add_associative(a in arb_ratfunc(), b in arb_ratfunc(), c in arb_ratfunc()) {
            prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
        }

        #[test]
        fn mul_associative(a in arb_ratfunc(), b in arb_ratfunc(), c in arb_ratfunc()) {
            prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        }

        #[test]
        fn normalization_idempotent(a in arb_ratfunc()) {
            let renorm = RatFunc::new(a.coeffs().to_vec(), a.pole_order());
            prop_assert_eq!(a, renorm);
        }

        #[test]
        fn eval_homomorphism(a in arb_ratfunc(), b in arb_ratfunc(), num in 0i64..30, den in 1i64..7) {
            let x = rat(num, den);
            let lhs = a.mul(&b).eval_exact(&x).unwrap();
            let rhs = a.eval_exact(&x).unwrap() * b.eval_exact(&x).unwrap();
            prop_assert_eq!(lhs, rhs);
        }
    }
}
