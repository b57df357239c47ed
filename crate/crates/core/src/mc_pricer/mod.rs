//! Monte-Carlo engine for path-dependent payoffs.

mod paths;
mod payoff;

pub use paths::{build_mc_time_steps, generate_paths, PathSet, RngSpec, RNG_ALGORITHM};
pub use payoff::{asian_payoff, fixing_average, price_asian, price_european_mc, McPrice};
