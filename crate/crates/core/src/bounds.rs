//! Lower bounds on the covering number `C(v, k, t)`.
//!
//! All ceilings are exact integer divisions.

use crate::combinatorics::binomial;
use crate::design::DesignParams;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundMethod {
    Schonheim,
    TrivialDensity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundResult {
    pub params: DesignParams,
    pub value: u64,
    pub method: BoundMethod,
}

/// One level of the Schönheim recursion: `ceil(v * inner / k)`, where `inner`
/// bounds `C(v-1, k-1, t-1)` from below.
pub fn schonheim_step(v: u64, k: u64, inner: u64) -> Result<u64> {
    let num = u128::from(v) * u128::from(inner);
    let value = num.div_ceil(u128::from(k));
    u64::try_from(value).map_err(|_| Error::Overflow(format!("ceil({v} * {inner} / {k})")))
}

/// Nested ceilings `ceil(v/k ceil((v-1)/(k-1) ... ceil((v-t+1)/(k-t+1))))`,
/// evaluated from the innermost level outward.
pub fn schonheim_bound(p: DesignParams) -> Result<BoundResult> {
    let (v, k, t) = (u64::from(p.v()), u64::from(p.k()), u64::from(p.t()));
    let value = (0..t).rev().try_fold(1u64, |inner, level| {
        schonheim_step(v - level, k - level, inner)
    })?;
    Ok(BoundResult {
        params: p,
        value,
        method: BoundMethod::Schonheim,
    })
}

/// `ceil(C(v,t) / C(k,t))`.
pub fn density_lower_bound(p: DesignParams) -> Result<u64> {
    let all = p.t_set_count()?;
    let per_block = binomial(p.k().into(), p.t().into())?;
    Ok(all.div_ceil(per_block))
}

pub fn density_bound(p: DesignParams) -> Result<BoundResult> {
    Ok(BoundResult {
        params: p,
        value: density_lower_bound(p)?,
        method: BoundMethod::TrivialDensity,
    })
}
