//! Exact moment tables for the generalized Baskakov and Kantorovich
//! operators, computed per `(n, a)` via the differential recurrences.
//!
//! Five families are produced, all as exact rational functions of `x`:
//!
//! * `upsilon_r` — raw moments of the sampling operator, nodes `k/(n+1)`;
//! * `mu_r` — central moments of the sampling operator;
//! * `mu_star_r` — central moments with nodes `k/n`, via the binomial
//!   combination of the `mu` family;
//! * `kantorovich_r` (`T_{n,r}`) — raw moments of the Kantorovich
//!   modification, a binomial combination of `upsilon`;
//! * `central_r` (`u_{n,r}`) — central Kantorovich moments, a binomial
//!   combination of `mu`.
//!
//! The `mu` recurrence used here is
//! `mu_{r+1} = [x(1+x)^2 mu_r' + (ax - x(1+x)) mu_r + r x(1+x)^2 mu_{r-1}] / ((n+1)(1+x))`,
//! derived directly from the weight derivative identity. Its correctness is
//! pinned by exact equality with the displayed closed forms for `mu_1`,
//! `u_1`, `u_2` and `gamma_n^a`, and by direct-series cross-checks in the
//! operator tests.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use serde::Serialize;
use std::collections::HashMap;

use crate::ratcore::RatFunc;

/// Moment family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentFamily {
    Upsilon,
    Mu,
    MuStar,
    /// Raw Kantorovich moments `T_{n,r}`.
    Kantorovich,
    /// Central Kantorovich moments `u_{n,r}`.
    Central,
}

impl MomentFamily {
    pub const ALL: [MomentFamily; 5] = [
        MomentFamily::Upsilon,
        MomentFamily::Mu,
        MomentFamily::MuStar,
        MomentFamily::Kantorovich,
        MomentFamily::Central,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MomentFamily::Upsilon => "upsilon",
            MomentFamily::Mu => "mu",
            MomentFamily::MuStar => "mu_star",
            MomentFamily::Kantorovich => "T",
            MomentFamily::Central => "u",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "upsilon" => Some(MomentFamily::Upsilon),
            "mu" => Some(MomentFamily::Mu),
            "mu_star" | "mustar" => Some(MomentFamily::MuStar),
            "T" | "t" | "kantorovich" => Some(MomentFamily::Kantorovich),
            "u" | "central" => Some(MomentFamily::Central),
            _ => None,
        }
    }
}

/// Exact moment entries of one family for a fixed `(n, a)`, indexed by
/// order `r`.
#[derive(Debug, Clone, Serialize)]
pub struct MomentTable {
    pub n: BigRational,
    pub a: BigRational,
    pub family: MomentFamily,
    pub entries: Vec<RatFunc>,
}

impl MomentTable {
    pub fn entry(&self, r: usize) -> &RatFunc {
        &self.entries[r]
    }

    pub fn r_max(&self) -> usize {
        self.entries.len() - 1
    }
}

fn big(r: usize) -> BigRational {
    BigRational::from(BigInt::from(r))
}

fn binom(n: usize, k: usize) -> BigRational {
    let mut acc = BigRational::one();
    for i in 0..k {
        acc = acc * big(n - i) / big(i + 1);
    }
    acc
}

/// Raw moments `upsilon_0..upsilon_{r_max}` via the recurrence
/// `upsilon_{r+1} = [x(1+x)^2 upsilon_r' + (a + n(1+x)) x upsilon_r] / ((n+1)(1+x))`.
pub fn upsilon_table(r_max: usize, n: &BigRational, a: &BigRational) -> MomentTable {
    let x = RatFunc::x();
    let opx = RatFunc::one_plus_x();
    let x_opx2 = x.mul(&opx).mul(&opx);
    // (a + n(1+x)) x
    let drift = RatFunc::constant(a.clone())
        .add(&opx.scale(n))
        .mul(&x);
    let inv_np1 = BigRational::one() / (n + BigRational::one());

    let mut entries = vec![RatFunc::one()];
    for r in 0..r_max {
        let cur = &entries[r];
        let next = x_opx2
            .mul(&cur.derive())
            .add(&drift.mul(cur))
            .div_one_plus_x()
            .scale(&inv_np1);
        entries.push(next);
    }
    MomentTable { n: n.clone(), a: a.clone(), family: MomentFamily::Upsilon, entries }
}

/// Central moments `mu_0..mu_{r_max}` via the corrected recurrence (see the
/// module docs).
pub fn mu_table(r_max: usize, n: &BigRational, a: &BigRational) -> MomentTable {
    let x = RatFunc::x();
    let opx = RatFunc::one_plus_x();
    let x_opx2 = x.mul(&opx).mul(&opx);
    // (a - (1+x)) x
    let drift = RatFunc::constant(a.clone()).sub(&opx).mul(&x);
    let inv_np1 = BigRational::one() / (n + BigRational::one());

    let mut entries = vec![RatFunc::one()];
    for r in 0..r_max {
        let mut num = x_opx2
            .mul(&entries[r].derive())
            .add(&drift.mul(&entries[r]));
        if r >= 1 {
            num = num.add(&x_opx2.mul(&entries[r - 1]).scale(&big(r)));
        }
        entries.push(num.div_one_plus_x().scale(&inv_np1));
    }
    MomentTable { n: n.clone(), a: a.clone(), family: MomentFamily::Mu, entries }
}

/// Node-shifted central moments `mu*_r = sum_k W_{n,k}^a (k/n - x)^r`,
/// assembled from the `mu` family via
/// `mu*_r = n^{-r} sum_j C(r,j) x^{r-j} (n+1)^j mu_j`.
pub fn mu_star_table(r_max: usize, n: &BigRational, a: &BigRational) -> MomentTable {
    let mu = mu_table(r_max, n, a);
    let np1 = n + BigRational::one();
    let mut entries = Vec::with_capacity(r_max + 1);
    for r in 0..=r_max {
        let mut acc = RatFunc::zero();
        let mut np1_pow = BigRational::one();
        for j in 0..=r {
            let xpow = pow_x(r - j);
            let term = xpow.mul(&mu.entries[j]).scale(&(binom(r, j) * &np1_pow));
            acc = acc.add(&term);
            np1_pow *= &np1;
        }
        let mut n_pow = BigRational::one();
        for _ in 0..r {
            n_pow *= n;
        }
        entries.push(acc.scale(&(BigRational::one() / n_pow)));
    }
    MomentTable { n: n.clone(), a: a.clone(), family: MomentFamily::MuStar, entries }
}

/// Raw Kantorovich moments
/// `T_r = (r+1)^{-1} sum_{j<=r} C(r+1,j) (n+1)^{j-r} upsilon_j`.
pub fn kantorovich_table(r_max: usize, n: &BigRational, a: &BigRational) -> MomentTable {
    let ups = upsilon_table(r_max, n, a);
    let np1 = n + BigRational::one();
    let mut entries = Vec::with_capacity(r_max + 1);
    for r in 0..=r_max {
        let mut acc = RatFunc::zero();
        for j in 0..=r {
            let mut scale = binom(r + 1, j) / big(r + 1);
            for _ in 0..(r - j) {
                scale /= &np1;
            }
            acc = acc.add(&ups.entries[j].scale(&scale));
        }
        entries.push(acc);
    }
    MomentTable { n: n.clone(), a: a.clone(), family: MomentFamily::Kantorovich, entries }
}

/// Central Kantorovich moments
/// `u_r = (r+1)^{-1} sum_{nu=1}^{r+1} C(r+1,nu) (n+1)^{1-nu} mu_{r+1-nu}`.
pub fn central_table(r_max: usize, n: &BigRational, a: &BigRational) -> MomentTable {
    let mu = mu_table(r_max, n, a);
    let np1 = n + BigRational::one();
    let mut entries = Vec::with_capacity(r_max + 1);
    for r in 0..=r_max {
        let mut acc = RatFunc::zero();
        for nu in 1..=(r + 1) {
            let mut scale = binom(r + 1, nu) / big(r + 1);
            for _ in 0..(nu - 1) {
                scale /= &np1;
            }
            acc = acc.add(&mu.entries[r + 1 - nu].scale(&scale));
        }
        entries.push(acc);
    }
    MomentTable { n: n.clone(), a: a.clone(), family: MomentFamily::Central, entries }
}

/// `gamma_n^a = u_2 + (n+1)^{-2} (-x + ax/(1+x) + 1/2)^2`, the quantity
/// driving the second-order direct estimate.
pub fn gamma_fn(n: &BigRational, a: &BigRational) -> RatFunc {
    let u = central_table(2, n, a);
    let np1 = n + BigRational::one();
    let shift = central_shift(a);
    u.entries[2].add(&shift.mul(&shift).scale(&(BigRational::one() / (&np1 * &np1))))
}

/// `-x + ax/(1+x) + 1/2`, the numerator of `(n+1) u_1`.
pub fn central_shift(a: &BigRational) -> RatFunc {
    let x = RatFunc::x();
    let ax_over = RatFunc::new(vec![BigRational::from(BigInt::from(0)), a.clone()], 1);
    ax_over.sub(&x).add(&RatFunc::constant(crate::ratcore::rat(1, 2)))
}

fn pow_x(k: usize) -> RatFunc {
    let mut coeffs = vec![BigRational::from(BigInt::from(0)); k + 1];
    coeffs[k] = BigRational::one();
    RatFunc::new(coeffs, 0)
}

/// Per-`(n, a)` table cache. Analysis sweeps re-request the same tables for
/// every grid point; construction cost is superlinear in `r_max`, so tables
/// are grown monotonically and shared.
#[derive(Default)]
pub struct MomentCache {
    tables: HashMap<(BigRational, BigRational, MomentFamily), MomentTable>,
}

impl MomentCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(
        &mut self,
        family: MomentFamily,
        r_max: usize,
        n: &BigRational,
        a: &BigRational,
    ) -> &MomentTable {
        let key = (n.clone(), a.clone(), family);
        let needs_build = self
            .tables
            .get(&key)
            .map_or(true, |t| t.r_max() < r_max);
        if needs_build {
            let table = match family {
                MomentFamily::Upsilon => upsilon_table(r_max, n, a),
                MomentFamily::Mu => mu_table(r_max, n, a),
                MomentFamily::MuStar => mu_star_table(r_max, n, a),
                MomentFamily::Kantorovich => kantorovich_table(r_max, n, a),
                MomentFamily::Central => central_table(r_max, n, a),
            };
            self.tables.insert(key.clone(), table);
        }
        &self.tables[&key]
    }
}
