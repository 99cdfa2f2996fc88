//! Exact-arithmetic analysis of finite multi-agent markets with segmented
//! access to assets and information.
//!
//! Every quantity is a [`rational::Rational`]; there is no floating point
//! anywhere in the engine.

pub mod arbitrage;
pub mod fixtures;
pub mod gains;
pub mod hedging;
pub mod lp;
pub mod market;
pub mod random;
pub mod rational;

pub use arbitrage::AnalysisError;
pub use market::{ExchangeSpace, MarketError, MarketModel, RandomVector};
pub use rational::Rational;
