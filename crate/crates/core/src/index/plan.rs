use super::IndexParams;
use crate::bounds::ceil_tolerant;
use crate::error::{LshError, Result};
use crate::hash::SensitivityProfile;
use crate::rng::DEFAULT_SEED;

/// Largest table count accepted by [`plan`] and [`IndexParams::new`].
pub const MAX_TABLES: usize = 1 << 20;

/// Parameters for `n` points: `k = ceil(ln n / ln(1/q))` and
/// `L = ceil(ln(1/delta) / p^k)`, seeded with [`DEFAULT_SEED`].
pub fn plan(n: usize, profile: &SensitivityProfile, delta: f64) -> Result<IndexParams> {
    if n == 0 {
        return Err(LshError::invalid("n", "need n >= 1"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(LshError::invalid("delta", format!("need 0 < delta < 1, got {delta}")));
    }
    let (p, q) = (profile.p, profile.q);
    if !(q < p && p < 1.0) {
        return Err(LshError::invalid("p", format!("need q < p < 1, got p={p}, q={q}")));
    }
    let nf = n as f64;
    let direct_tables = ((1.0 / delta).ln() / p).ceil();
    if q * nf < 1.0 - 1e-12 {
        return Err(LshError::DegenerateQ(format!(
            "q = {q} is below 1/n = {}: powering is unnecessary; use k = 1 and L = {direct_tables}",
            1.0 / nf
        )));
    }
    let k = if n == 1 {
        1.0
    } else {
        ceil_tolerant(nf.ln() / -q.ln()).max(1.0)
    };
    let p_k = p.powf(k);
    let tables = ceil_tolerant((1.0 / delta).ln() / p_k).max(1.0);
    if !(tables <= MAX_TABLES as f64) {
        return Err(LshError::TooLarge {
            operation: "index plan",
            dim: tables.min(usize::MAX as f64) as usize,
            limit: MAX_TABLES,
            hint: "p^k is too small: use a family with larger p or a larger delta",
        });
    }
    let rho = profile.rho.value();
    let mut params = IndexParams::new(profile.r, profile.cr, k as usize, tables as usize, delta, DEFAULT_SEED)?;
    params.predicted_p_k = Some(p_k);
    params.guaranteed_p_k = rho.map(|rho| (nf / q).powf(-rho));
    params.rho = rho;
    Ok(params)
}
