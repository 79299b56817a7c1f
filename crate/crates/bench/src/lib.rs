//! Shared fixtures for the criterion benchmarks.

use cryptorates::derivatives::{BondOptionSpec, CapletSpec, OptionKind};
use cryptorates::kernels::SovereignGbmParams;
use cryptorates::stochastic::VolatilityCurve;

pub fn flat(sigma: f64) -> VolatilityCurve {
    VolatilityCurve::constant(sigma).expect("positive volatility")
}

/// Bessel(4) call with `t = 1`, `T = 2`.
pub fn bond_call(strike: f64) -> BondOptionSpec {
    BondOptionSpec::new(1.0, 2.0, strike, OptionKind::Call).expect("valid option")
}

pub fn caplet(cap_rate: f64) -> CapletSpec {
    CapletSpec::new(1.0, 2.0, cap_rate, 1.0).expect("valid caplet")
}

pub fn dollar() -> SovereignGbmParams {
    SovereignGbmParams::new(0.02, 0.3, 1.0).expect("valid dollar kernel")
}
