//! The two bundled example markets.

use crate::market::{parse_market, MarketModel};

pub const FIG1_JSON: &str = include_str!("../../../markets/fig1.json");
pub const FIG2_JSON: &str = include_str!("../../../markets/fig2.json");

/// Two agents, each trading one stock, sharing the filtration generated by
/// both price trees. Exchanges are zero-sum and known at time 1.
pub fn fig1() -> MarketModel {
    parse_market(FIG1_JSON).expect("bundled market 1")
}

/// Two agents with symmetric one-asset markets that are arbitrage-free on
/// each period but admit a collective arbitrage over both periods.
pub fn fig2() -> MarketModel {
    parse_market(FIG2_JSON).expect("bundled market 2")
}
