//! Trading gains of each agent and collectively self-financing strategies.
//!
//! Holdings are keyed by `(time, block, asset)` where the block belongs to
//! the agent's partition one period earlier, so a strategy that peeks at
//! information it does not have cannot be written down.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::market::{ExchangeSchedule, MarketModel, RandomVector};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GainsError {
    #[error("holding for agent {agent} at time {time}, block {block}, asset {asset} does not match the agent's information")]
    BlockKeyMismatch {
        agent: usize,
        time: usize,
        block: usize,
        asset: usize,
    },
    #[error("self-financing identity fails for agent {agent} at time {time} on block {block}")]
    CsfViolation {
        time: usize,
        block: usize,
        agent: usize,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// Position held over `(time - 1, time]` on `block` of `F^i_{time-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StrategyKey {
    pub time: usize,
    pub block: usize,
    pub asset: usize,
}

/// Spanning family of the terminal gains an agent can realize.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GainsBasis {
    pub agent: usize,
    pub keys: Vec<StrategyKey>,
    /// `generators[k](w) = 1_B(w) (X^j_t(w) - X^j_{t-1}(w))` for `keys[k]`.
    pub generators: Vec<Vec<Rational>>,
}

pub fn gains_basis(model: &MarketModel, agent: usize) -> GainsBasis {
    let spec = model.agent(agent);
    let k = model.atom_count();
    let mut keys = Vec::new();
    let mut generators = Vec::new();
    for t in 1..=model.horizon() {
        for (b, block) in spec.filtration.at(t - 1).blocks().iter().enumerate() {
            for &j in &spec.assets {
                let mut g = vec![Rational::zero(); k];
                for &a in block {
                    g[a] = model.price(j, t, a) - model.price(j, t - 1, a);
                }
                keys.push(StrategyKey {
                    time: t,
                    block: b,
                    asset: j,
                });
                generators.push(g);
            }
        }
    }
    GainsBasis {
        agent,
        keys,
        generators,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AgentStrategy {
    pub holdings: BTreeMap<StrategyKey, Rational>,
}

impl AgentStrategy {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets a holding; zero entries are not stored.
    pub fn set(&mut self, time: usize, block: usize, asset: usize, amount: Rational) {
        let key = StrategyKey { time, block, asset };
        if amount.is_zero() {
            self.holdings.remove(&key);
        } else {
            self.holdings.insert(key, amount);
        }
    }

    pub fn get(&self, time: usize, block: usize, asset: usize) -> Rational {
        self.holdings
            .get(&StrategyKey { time, block, asset })
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    /// The strategy whose gain is `sum_k coefficients[k] * generators[k]`.
    pub fn from_coefficients(basis: &GainsBasis, coefficients: &[Rational]) -> Self {
        let mut s = Self::new();
        for (key, c) in basis.keys.iter().zip(coefficients) {
            s.set(key.time, key.block, key.asset, c.clone());
        }
        s
    }

    pub fn is_zero(&self) -> bool {
        self.holdings.is_empty()
    }

    pub fn scaled(&self, factor: &Rational) -> Self {
        let mut s = Self::new();
        for (k, v) in &self.holdings {
            s.set(k.time, k.block, k.asset, v * factor);
        }
        s
    }

    fn check(&self, model: &MarketModel, agent: usize) -> Result<(), GainsError> {
        let spec = model.agent(agent);
        for key in self.holdings.keys() {
            let ok = (1..=model.horizon()).contains(&key.time)
                && key.block < spec.filtration.at(key.time - 1).len()
                && spec.assets.contains(&key.asset);
            if !ok {
                return Err(GainsError::BlockKeyMismatch {
                    agent,
                    time: key.time,
                    block: key.block,
                    asset: key.asset,
                });
            }
        }
        Ok(())
    }

    /// `H_t . X_s` at one atom.
    fn position_value(
        &self,
        model: &MarketModel,
        agent: usize,
        t: usize,
        s: usize,
        atom: usize,
    ) -> Rational {
        let spec = model.agent(agent);
        let b = spec.filtration.at(t - 1).block_of(atom);
        spec.assets
            .iter()
            .map(|&j| self.get(t, b, j) * model.price(j, s, atom))
            .sum()
    }
}

/// Cumulative gain `(H . X)_t` per atom.
pub fn gain_up_to(
    model: &MarketModel,
    agent: usize,
    h: &AgentStrategy,
    t: usize,
) -> Result<Vec<Rational>, GainsError> {
    h.check(model, agent)?;
    let spec = model.agent(agent);
    let mut out = vec![Rational::zero(); model.atom_count()];
    for key in h.holdings.keys() {
        if key.time > t {
            continue;
        }
        let amount = &h.holdings[key];
        for &a in &spec.filtration.at(key.time - 1).blocks()[key.block] {
            let inc = model.price(key.asset, key.time, a) - model.price(key.asset, key.time - 1, a);
            out[a] += amount * inc;
        }
    }
    Ok(out)
}

/// Terminal gain `(H . X)_T` per atom.
pub fn gain_of_strategy(
    model: &MarketModel,
    agent: usize,
    h: &AgentStrategy,
) -> Result<Vec<Rational>, GainsError> {
    gain_up_to(model, agent, h, model.horizon())
}

/// `Y_{1:T}`.
pub fn aggregate_exchanges(schedule: &ExchangeSchedule) -> RandomVector {
    schedule.cumulative(schedule.per_time().len())
}

/// Risky holdings per agent completed with riskless holdings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsfStrategy {
    pub risky: Vec<AgentStrategy>,
    /// `riskless[i][(t, block)]`, block of `F^i_{t-1}`.
    pub riskless: Vec<BTreeMap<(usize, usize), Rational>>,
    pub initial_wealth: Vec<Rational>,
}

impl CsfStrategy {
    fn riskless_at(&self, model: &MarketModel, agent: usize, t: usize, atom: usize) -> Rational {
        let b = model.agent(agent).filtration.at(t - 1).block_of(atom);
        self.riskless[agent]
            .get(&(t, b))
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    /// `Ĥ_t . X̂_s` at one atom.
    fn portfolio_value(
        &self,
        model: &MarketModel,
        agent: usize,
        t: usize,
        s: usize,
        atom: usize,
    ) -> Rational {
        self.riskless_at(model, agent, t, atom)
            + self.risky[agent].position_value(model, agent, t, s, atom)
    }
}

fn check_shapes(
    model: &MarketModel,
    v0: &[Rational],
    risky: &[AgentStrategy],
) -> Result<(), GainsError> {
    let n = model.agent_count();
    if v0.len() != n || risky.len() != n {
        return Err(GainsError::Shape(format!(
            "expected {n} initial wealths and strategies"
        )));
    }
    for (i, h) in risky.iter().enumerate() {
        h.check(model, i)?;
    }
    Ok(())
}

/// Completes risky holdings with the unique riskless holdings that make the
/// strategy collectively self-financing for `schedule`.
pub fn lift_to_csf(
    model: &MarketModel,
    v0: &[Rational],
    risky: &[AgentStrategy],
    schedule: &ExchangeSchedule,
) -> Result<CsfStrategy, GainsError> {
    check_shapes(model, v0, risky)?;
    let horizon = model.horizon();
    let mut csf = CsfStrategy {
        risky: risky.to_vec(),
        riskless: vec![BTreeMap::new(); model.agent_count()],
        initial_wealth: v0.to_vec(),
    };
    for i in 0..model.agent_count() {
        let filtration = &model.agent(i).filtration;
        for (b, block) in filtration.at(0).blocks().iter().enumerate() {
            let h = &v0[i] - risky[i].position_value(model, i, 1, 0, block[0]);
            csf.riskless[i].insert((1, b), h);
        }
        for t in 1..horizon {
            for (b, block) in filtration.at(t).blocks().iter().enumerate() {
                let a = block[0];
                let before =
                    csf.portfolio_value(model, i, t, t, a) + &schedule.at(t).component(i)[a];
                let h = before - risky[i].position_value(model, i, t + 1, t, a);
                csf.riskless[i].insert((t + 1, b), h);
            }
        }
    }
    Ok(csf)
}

/// `values[agent][t][atom]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueProcess {
    pub values: Vec<Vec<Vec<Rational>>>,
}

impl ValueProcess {
    pub fn at(&self, t: usize) -> RandomVector {
        RandomVector::new(self.values.iter().map(|v| v[t].clone()).collect())
    }

    pub fn terminal(&self) -> RandomVector {
        self.at(self.values.first().map_or(0, |v| v.len() - 1))
    }
}

/// `V_0 = Ĥ_1 . X̂_0` and `V_t = Ĥ_t . X̂_t + Y_t`, after checking the
/// self-financing identity at every intermediate time and block.
pub fn value_process(
    model: &MarketModel,
    csf: &CsfStrategy,
    schedule: &ExchangeSchedule,
) -> Result<ValueProcess, GainsError> {
    check_shapes(model, &csf.initial_wealth, &csf.risky)?;
    let k = model.atom_count();
    let horizon = model.horizon();
    let mut values = Vec::with_capacity(model.agent_count());
    for i in 0..model.agent_count() {
        let filtration = &model.agent(i).filtration;
        let mut per_time = Vec::with_capacity(horizon + 1);
        let v0: Vec<Rational> = (0..k)
            .map(|a| csf.portfolio_value(model, i, 1, 0, a))
            .collect();
        if let Some(a) = (0..k).find(|&a| v0[a] != csf.initial_wealth[i]) {
            return Err(GainsError::CsfViolation {
                time: 0,
                block: filtration.at(0).block_of(a),
                agent: i,
            });
        }
        per_time.push(v0);
        for t in 1..=horizon {
            let y = schedule.at(t).component(i);
            let vt: Vec<Rational> = (0..k)
                .map(|a| csf.portfolio_value(model, i, t, t, a) + &y[a])
                .collect();
            if t < horizon {
                for a in 0..k {
                    if csf.portfolio_value(model, i, t + 1, t, a) != vt[a] {
                        return Err(GainsError::CsfViolation {
                            time: t,
                            block: filtration.at(t).block_of(a),
                            agent: i,
                        });
                    }
                }
            }
            per_time.push(vt);
        }
        values.push(per_time);
    }
    Ok(ValueProcess { values })
}

/// `v_0 + (H . X)_t + Y_{1:t}` for every agent and time, computed directly.
pub fn decomposed_value(
    model: &MarketModel,
    v0: &[Rational],
    risky: &[AgentStrategy],
    schedule: &ExchangeSchedule,
) -> Result<ValueProcess, GainsError> {
    check_shapes(model, v0, risky)?;
    let mut values = Vec::with_capacity(model.agent_count());
    for i in 0..model.agent_count() {
        let mut per_time = Vec::with_capacity(model.horizon() + 1);
        for t in 0..=model.horizon() {
            let gain = gain_up_to(model, i, &risky[i], t)?;
            let cumulative = schedule.cumulative(t);
            per_time.push(
                gain.iter()
                    .zip(cumulative.component(i))
                    .map(|(g, y)| &v0[i] + g + y)
                    .collect(),
            );
        }
        values.push(per_time);
    }
    Ok(ValueProcess { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{fig1, fig2};
    use crate::rational::int;

    fn v(xs: &[i64]) -> Vec<Rational> {
        xs.iter().map(|&x| int(x)).collect()
    }

    #[test]
    fn basis_generators() {
        let b = gains_basis(&fig2(), 0);
        assert_eq!(
            b.keys[0],
            StrategyKey {
                time: 1,
                block: 0,
                asset: 0
            }
        );
        assert_eq!(b.generators[0], v(&[1, 1, -1, -1, 1, 1]));

        let b = gains_basis(&fig1(), 0);
        let k = b
            .keys
            .iter()
            .position(|k| {
                *k == StrategyKey {
                    time: 2,
                    block: 2,
                    asset: 0,
                }
            })
            .unwrap();
        assert_eq!(b.generators[k], v(&[0, 0, 0, 0, 6, -3]));
    }

    #[test]
    fn strategy_gains() {
        let m2 = fig2();
        assert_eq!(
            gain_of_strategy(&m2, 0, &AgentStrategy::new()).unwrap(),
            v(&[0; 6])
        );
        let mut h = AgentStrategy::new();
        h.set(1, 0, 0, int(1));
        assert_eq!(
            gain_of_strategy(&m2, 0, &h).unwrap(),
            v(&[1, 1, -1, -1, 1, 1])
        );

        let m1 = fig1();
        let mut h = AgentStrategy::new();
        h.set(1, 0, 1, int(1));
        for b in 0..3 {
            h.set(2, b, 1, int(1));
        }
        assert_eq!(
            gain_of_strategy(&m1, 1, &h).unwrap(),
            v(&[10, 2, 2, -6, -4, 2])
        );

        let mut bad = AgentStrategy::new();
        bad.set(1, 1, 0, int(1));
        assert!(matches!(
            gain_of_strategy(&m1, 0, &bad),
            Err(GainsError::BlockKeyMismatch { .. })
        ));
        let mut bad = AgentStrategy::new();
        bad.set(1, 0, 1, int(1));
        assert!(matches!(
            gain_of_strategy(&m1, 0, &bad),
            Err(GainsError::BlockKeyMismatch { .. })
        ));
    }

    fn fig1_schedule(m: &MarketModel) -> ExchangeSchedule {
        let y = RandomVector::new(vec![v(&[0, 0, 1, 1, -1, -1]), v(&[0, 0, -1, -1, 1, 1])]);
        ExchangeSchedule::new(m, vec![RandomVector::zeros(2, 6), y]).unwrap()
    }

    #[test]
    fn aggregation() {
        let m = fig2();
        assert!(aggregate_exchanges(&ExchangeSchedule::zero(&m)).is_zero());
        let s = fig1_schedule(&m);
        assert_eq!(aggregate_exchanges(&s), s.at(2).clone());
        let y = RandomVector::new(vec![v(&[1, 1, 2, 2, 0, 0]), v(&[-1, -1, -2, -2, 0, 0])]);
        let s = ExchangeSchedule::new(&m, vec![y.clone(), y.neg()]).unwrap();
        assert!(aggregate_exchanges(&s).is_zero());
    }

    #[test]
    fn trivial_lift_keeps_cash() {
        let m = fig2();
        let v0 = v(&[5, -2]);
        let risky = vec![AgentStrategy::new(), AgentStrategy::new()];
        let s = ExchangeSchedule::zero(&m);
        let csf = lift_to_csf(&m, &v0, &risky, &s).unwrap();
        assert!(csf.riskless[0].values().all(|h| h == &int(5)));
        assert!(csf.riskless[1].values().all(|h| h == &int(-2)));
        let vp = value_process(&m, &csf, &s).unwrap();
        assert_eq!(vp.terminal(), RandomVector::constant(&v0, 6));

        let zero = lift_to_csf(&m, &v(&[0, 0]), &risky, &s).unwrap();
        assert!(value_process(&m, &zero, &s)
            .unwrap()
            .values
            .iter()
            .flatten()
            .flatten()
            .all(Zero::is_zero));
    }

    #[test]
    fn fig1_collective_strategy_rolls_forward() {
        let m = fig2();
        let s = fig1_schedule(&m);
        let mut h1 = AgentStrategy::new();
        h1.set(1, 0, 0, int(1));
        let mut h2 = AgentStrategy::new();
        h2.set(1, 0, 1, int(1));
        let v0 = v(&[3, 7]);
        let csf = lift_to_csf(&m, &v0, &[h1.clone(), h2.clone()], &s).unwrap();
        let vp = value_process(&m, &csf, &s).unwrap();
        assert_eq!(
            vp.terminal().component(0),
            v(&[4, 4, 3, 3, 3, 3]).as_slice()
        );
        assert_eq!(
            vp.terminal().component(1),
            v(&[8, 8, 7, 7, 7, 7]).as_slice()
        );
        assert_eq!(vp, decomposed_value(&m, &v0, &[h1, h2], &s).unwrap());
    }

    #[test]
    fn tampered_riskless_holding_is_caught() {
        let m = fig2();
        let s = fig1_schedule(&m);
        let mut h1 = AgentStrategy::new();
        h1.set(1, 0, 0, int(1));
        let mut csf = lift_to_csf(&m, &v(&[0, 0]), &[h1, AgentStrategy::new()], &s).unwrap();
        *csf.riskless[0].get_mut(&(2, 1)).unwrap() += int(1);
        assert_eq!(
            value_process(&m, &csf, &s).unwrap_err(),
            GainsError::CsfViolation {
                time: 1,
                block: 1,
                agent: 0
            }
        );
    }
}
