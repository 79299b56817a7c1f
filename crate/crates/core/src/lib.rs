//! Term structures with a vanishing short rate, built from reciprocal Bessel
//! pricing kernels `π_t = |ξ_t|^{2-n}`, with bond options, caplets,
//! multi-currency exchange rates and Monte Carlo oracles.

pub mod derivatives;
pub mod error;
pub mod fx;
pub mod kernels;
pub mod mc;
pub mod numerics;
pub mod quote;
pub mod stochastic;
pub mod term_structure;

pub use derivatives::{BondOptionSpec, CapletSpec, OptionKind, OptionMethod};
pub use error::{Error, Result};
pub use fx::{FxMethod, KernelLeg, MultiCurrencyMarket};
pub use kernels::{KernelModel, SovereignGbmParams};
pub use mc::{McEstimate, McOptions};
pub use quote::{Method, PriceQuote};
pub use stochastic::{FactorState, RngStream, VolatilityCurve};
