use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("integer overflow computing {0}")]
    Overflow(String),

    #[error("{what} needs {needed} but the budget is {budget}; {hint}")]
    BudgetExceeded {
        what: &'static str,
        needed: u128,
        budget: u128,
        hint: &'static str,
    },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("no prime p with p^{t} > {v} in [{lo}, {hi}]")]
    NoPrime { v: u64, t: u32, lo: u64, hi: u64 },

    #[error("v = {v} is too small for an induced (v,{k},{t}) covering; use greedy instead")]
    TooSmallForInduced { v: u32, k: u32, t: u32 },

    #[error("small-cover cache has no ({ell_prime},{k},{t}) covering")]
    CacheMiss { ell_prime: usize, k: u32, t: u32 },

    #[error("cached design {path:?} is invalid: {msg}")]
    BadCacheEntry { path: PathBuf, msg: String },

    #[error("tree simulation trial {trial} exceeded {max_nodes} nodes")]
    TreeExplosion { trial: u64, max_nodes: u64 },

    #[error(
        "alpha fit needs at least 3 points with density > 1 in [{v_lo}, {v_hi}], found {found}"
    )]
    InsufficientFitPoints { v_lo: u32, v_hi: u32, found: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
