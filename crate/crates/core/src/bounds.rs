//! Closed-form bounds on the rho parameter of Hamming-cube LSH families and
//! the quantities of the Chernoff argument behind the `1/c` lower bound.

use serde::{Deserialize, Serialize};

use crate::error::{LshError, Result};
use crate::report::{fmt12, Table};

/// Upper bound on `Delta` for the non-trivialized branch of the lower bound.
pub const DELTA_LIMIT: f64 = 0.005;
/// `epsilon = EPSILON_PER_DELTA * Delta`.
pub const EPSILON_PER_DELTA: f64 = 0.005;

fn check_c(c: f64) -> Result<()> {
    if !(c >= 1.0 && c.is_finite()) {
        return Err(LshError::invalid("c", format!("need c >= 1, got {c}")));
    }
    Ok(())
}

/// Bit sampling's limiting rho, `1/c`.
pub fn im_upper(c: f64) -> f64 {
    1.0 / c
}

/// Exact rho of bit sampling at radius `r`: `ln(1/(1-r/d)) / ln(1/(1-cr/d))`.
pub fn im_rho(d: f64, r: f64, c: f64) -> Result<f64> {
    if !(c > 1.0) {
        return Err(LshError::invalid("c", format!("need c > 1, got {c}")));
    }
    if !(r > 0.0 && c * r < d) {
        return Err(LshError::DegenerateQ(format!(
            "need 0 < r and cr < d, got r={r}, cr={}, d={d}",
            c * r
        )));
    }
    Ok((-r / d).ln_1p() / (-c * r / d).ln_1p())
}

/// Reference upper bound for Euclidean space, `1/c^2`.
pub fn ai_reference(c: f64) -> f64 {
    1.0 / (c * c)
}

/// Reference upper bound for `l_s`, `0 < s < 2`: `max(1/c^s, 1/c)`.
pub fn diim_reference(c: f64, s: f64) -> f64 {
    c.powf(-s).max(1.0 / c)
}

/// Previous lower bound `(e^{1/c} - 1) / (e^{1/c} + 1)`, evaluated as `tanh(1/(2c))`.
pub fn mnp_lower(c: f64) -> f64 {
    (0.5 / c).tanh()
}

/// `lambda(d, q) = (ln(2/q) / d) ln(d / ln(2/q))`, defined for `d / ln(2/q) >= 2`.
pub fn lambda(d: f64, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(LshError::invalid("q", format!("need 0 < q < 1, got {q}")));
    }
    let l = (2.0 / q).ln();
    if !(d / l >= 2.0) {
        return Err(LshError::invalid(
            "d",
            format!("need d / ln(2/q) >= 2, got d={d}, ln(2/q)={l}"),
        ));
    }
    Ok(l / d * (d / l).ln())
}

/// The lower bound `1/c - K lambda^{1/3}` with its two terms kept apart.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MainLowerBound {
    pub baseline: f64,
    /// `K * lambda(d, q)^{1/3}`.
    pub correction: f64,
    /// `max(0, baseline - correction)`.
    pub value: f64,
}

pub fn main_lower_terms(c: f64, d: f64, q: f64, k: f64) -> Result<MainLowerBound> {
    check_c(c)?;
    if !(k > 0.0) {
        return Err(LshError::invalid(
            "K",
            format!("universal constant must be positive, got {k}"),
        ));
    }
    let baseline = 1.0 / c;
    let correction = k * lambda(d, q)?.cbrt();
    Ok(MainLowerBound {
        baseline,
        correction,
        value: (baseline - correction).max(0.0),
    })
}

pub fn main_lower(c: f64, d: f64, q: f64, k: f64) -> Result<f64> {
    Ok(main_lower_terms(c, d, q, k)?.value)
}

/// A bound stated for the Hamming cube, as a function of `c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HammingBound {
    ImUpper,
    MnpLower,
    MainLower { d: f64, q: f64, k: f64 },
}

impl HammingBound {
    pub fn eval(&self, c: f64) -> Result<f64> {
        match *self {
            HammingBound::ImUpper => Ok(im_upper(c)),
            HammingBound::MnpLower => Ok(mnp_lower(c)),
            HammingBound::MainLower { d, q, k } => main_lower(c, d, q, k),
        }
    }
}

/// The same bound for `l_s`: on `{0,1}^d`, `||x - y||_s = ||x - y||_1^{1/s}`,
/// so a distance ratio `c` in `l_s` is a ratio `c^s` in Hamming distance.
pub fn ls_transfer(bound: HammingBound, c: f64, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(LshError::invalid("s", format!("need s > 0, got {s}")));
    }
    bound.eval(c.powf(s))
}

/// Every intermediate quantity of the Chernoff argument for given `(c, d, q, Delta)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChernoffLedger {
    pub c: f64,
    pub d: f64,
    pub q: f64,
    pub delta: f64,
    /// `0.005 Delta`.
    pub epsilon: f64,
    /// `2 epsilon (1 + Delta/2)`.
    pub t: f64,
    /// `c (1 + Delta)`.
    pub c_prime: f64,
    /// Near radius as a fraction of `d`: `epsilon / c`.
    pub tau: f64,
    /// Flip probability at correlation `e^{-t/c'}`.
    pub eta1: f64,
    /// `(1 + delta1) eta1 = epsilon / c`.
    pub delta1: f64,
    /// `exp(-delta1^2 / (2 + delta1) * eta1 * d)`.
    pub e1_chernoff: f64,
    /// `exp(-Delta^3 d / (2000 c))`.
    pub e1_bound: f64,
    /// Flip probability at correlation `e^{-t}`.
    pub eta2: f64,
    /// `(1 - delta2) eta2 = epsilon`.
    pub delta2: f64,
    /// `exp(-delta2^2 / 2 * eta2 * d)`.
    pub e2_chernoff: f64,
    /// `exp(-Delta^3 d / 2000)`.
    pub e2_bound: f64,
    /// `Delta/c + 1.01 e1 / ln(1/q) + e2 / (q ln(1/q))`.
    pub e_total: f64,
    /// `e1_bound <= 0.01`.
    pub e1_assumption: bool,
    /// `e2_bound < q ln(1/q)`.
    pub e2_assumption: bool,
}

impl ChernoffLedger {
    /// `(epsilon/c) d`: distances above this count toward `e1`.
    pub fn near_threshold(&self) -> f64 {
        self.tau * self.d
    }

    /// `epsilon d`: distances below this count toward `e2`.
    pub fn far_threshold(&self) -> f64 {
        self.epsilon * self.d
    }

    /// The implied lower bound `1/c - e_total` on rho.
    pub fn rho_lower_bound(&self) -> f64 {
        1.0 / self.c - self.e_total
    }
}

pub fn chernoff_ledger(c: f64, d: f64, q: f64, delta: f64) -> Result<ChernoffLedger> {
    if !(c > 1.0 && c.is_finite()) {
        return Err(LshError::invalid("c", format!("need c > 1, got {c}")));
    }
    if !(d >= 1.0) {
        return Err(LshError::invalid("d", format!("need d >= 1, got {d}")));
    }
    if !(q > 0.0 && q <= (-1.0f64).exp()) {
        return Err(LshError::invalid(
            "q",
            format!("need 0 < q <= 1/e (power the family first to reduce q), got {q}"),
        ));
    }
    if !(delta > 0.0) {
        return Err(LshError::invalid("Delta", format!("need Delta > 0, got {delta}")));
    }
    if delta >= DELTA_LIMIT {
        return Err(LshError::invalid(
            "Delta",
            format!("Delta = {delta} >= {DELTA_LIMIT}: use the trivialized bound instead"),
        ));
    }
    let epsilon = EPSILON_PER_DELTA * delta;
    let t = 2.0 * epsilon * (1.0 + delta / 2.0);
    let c_prime = c * (1.0 + delta);
    let eta1 = -(-t / c_prime).exp_m1() / 2.0;
    let delta1 = epsilon / (c * eta1) - 1.0;
    let e1_chernoff = (-delta1 * delta1 / (2.0 + delta1) * eta1 * d).exp();
    let e1_bound = (-delta.powi(3) * d / (2000.0 * c)).exp();
    let eta2 = -(-t).exp_m1() / 2.0;
    let delta2 = 1.0 - epsilon / eta2;
    let e2_chernoff = (-delta2 * delta2 / 2.0 * eta2 * d).exp();
    let e2_bound = (-delta.powi(3) * d / 2000.0).exp();
    let ln_inv_q = -q.ln();
    let e_total = delta / c + 1.01 * e1_bound / ln_inv_q + e2_bound / (q * ln_inv_q);
    Ok(ChernoffLedger {
        c,
        d,
        q,
        delta,
        epsilon,
        t,
        c_prime,
        tau: epsilon / c,
        eta1,
        delta1,
        e1_chernoff,
        e1_bound,
        eta2,
        delta2,
        e2_chernoff,
        e2_bound,
        e_total,
        e1_assumption: e1_bound <= 0.01,
        e2_assumption: e2_bound < q * ln_inv_q,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaChoice {
    pub lambda: f64,
    /// `K1 c^{1/3} lambda^{1/3}`.
    pub delta: f64,
    /// `delta >= 0.005`: the bound is vacuous and the trivial branch applies.
    pub trivialized: bool,
}

pub fn delta_choice(c: f64, d: f64, q: f64, k1: f64) -> Result<DeltaChoice> {
    check_c(c)?;
    if !(k1 > 0.0) {
        return Err(LshError::invalid("K1", format!("constant must be positive, got {k1}")));
    }
    let lambda = lambda(d, q)?;
    let delta = k1 * c.cbrt() * lambda.cbrt();
    Ok(DeltaChoice {
        lambda,
        delta,
        trivialized: delta >= DELTA_LIMIT,
    })
}

/// Space and time exponents of the near-neighbor reduction when
/// `p = n^{-p_exp}` and `q = n^{-q_exp}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveExponents {
    /// `ceil(1 / q_exp)`, the number of concatenated hashes.
    pub k: u64,
    /// `p_exp / q_exp`.
    pub rho: f64,
    /// `1 + k p_exp`.
    pub space_exp: f64,
    /// `k p_exp`.
    pub time_exp: f64,
}

/// `ceil(x)`, treating values within `1e-9` of an integer as that integer so
/// that e.g. `1 / (1/3)` gives 3 and not 4.
pub(crate) fn ceil_tolerant(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

pub fn effective_exponents(p_exp: f64, q_exp: f64) -> Result<EffectiveExponents> {
    if !(p_exp > 0.0 && q_exp > p_exp) {
        return Err(LshError::invalid(
            "p_exp",
            format!("need 0 < p_exp < q_exp, got p_exp={p_exp}, q_exp={q_exp}"),
        ));
    }
    if q_exp > 1.0 {
        return Err(LshError::DegenerateQ(format!(
            "q below 1/n: reduction degenerates; use the family directly (k=1): \
             space exponent {}, time exponent {p_exp}, rho {}",
            1.0 + p_exp,
            p_exp / q_exp
        )));
    }
    let k = ceil_tolerant(1.0 / q_exp);
    Ok(EffectiveExponents {
        k: k as u64,
        rho: p_exp / q_exp,
        space_exp: 1.0 + k * p_exp,
        time_exp: k * p_exp,
    })
}

/// Exponents obtained without powering: space `1 + p_exp`, time `p_exp`.
pub fn direct_exponents(p_exp: f64, q_exp: f64) -> EffectiveExponents {
    EffectiveExponents {
        k: 1,
        rho: p_exp / q_exp,
        space_exp: 1.0 + p_exp,
        time_exp: p_exp,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub c: f64,
    pub im: f64,
    pub ai: f64,
    pub diim: f64,
    pub mnp: f64,
    pub main: f64,
    /// `K lambda^{1/3}`, reported next to `main`.
    pub correction: f64,
}

pub const BOUND_TABLE_HEADER: [&str; 6] = ["c", "im", "ai", "diim", "mnp", "main"];

/// One row per `c`: bit-sampling upper bound, the Euclidean and `l_s`
/// reference curves, the previous lower bound, and the `1/c - K lambda^{1/3}` bound.
pub fn bound_table(c_grid: &[f64], d: f64, q: f64, s: f64, k: f64) -> Result<Vec<BoundRow>> {
    if !(s > 0.0 && s < 2.0) {
        return Err(LshError::invalid(
            "s",
            format!("the l_s reference curve needs 0 < s < 2, got {s}"),
        ));
    }
    c_grid
        .iter()
        .map(|&c| {
            let main = main_lower_terms(c, d, q, k)?;
            Ok(BoundRow {
                c,
                im: im_upper(c),
                ai: ai_reference(c),
                diim: diim_reference(c, s),
                mnp: mnp_lower(c),
                main: main.value,
                correction: main.correction,
            })
        })
        .collect()
}

pub fn bound_rows_to_table(rows: &[BoundRow]) -> Table {
    let mut t = Table::new(BOUND_TABLE_HEADER);
    for r in rows {
        t.push(
            [r.c, r.im, r.ai, r.diim, r.mnp, r.main]
                .iter()
                .map(|v| fmt12(*v))
                .collect(),
        );
    }
    t
}
