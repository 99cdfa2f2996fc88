//! Seeded generator of small random markets, exchange spaces and claims.
//!
//! Instances stay desk-sized (at most 8 atoms, 3 agents, 2 periods, 2
//! exchange generators). Prices are usually martingales under a random
//! measure so that most instances are arbitrage-free, but some use
//! unrelated measures per asset or arbitrary prices.

use std::collections::BTreeMap;

use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::arbitrage::nca_interior_point;
use crate::gains::{gains_basis, AgentStrategy};
use crate::market::{
    zero_sum_generators_from_partition, AgentSpec, Asset, ExchangeSchedule, ExchangeSpace,
    Filtration, MarketModel, Partition, RandomVector,
};
use crate::rational::{int, ratio, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomParams {
    pub max_atoms: usize,
    pub max_agents: usize,
    pub max_horizon: usize,
    pub max_generators: usize,
}

impl Default for RandomParams {
    fn default() -> Self {
        Self {
            max_atoms: 8,
            max_agents: 3,
            max_horizon: 2,
            max_generators: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub seed: u64,
    pub model: MarketModel,
    /// Zero-sum exchange space with at most `max_generators` generators.
    pub space: ExchangeSpace,
    pub claim: RandomVector,
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn refine(rng: &mut ChaCha8Rng, part: &Partition) -> Partition {
    let k = part.atoms();
    let mut blocks = Vec::new();
    for block in part.blocks() {
        let pieces = rng.gen_range(1..=block.len().min(3));
        let mut atoms = block.clone();
        atoms.shuffle(rng);
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); pieces];
        for (n, a) in atoms.into_iter().enumerate() {
            let g = if n < pieces {
                n
            } else {
                rng.gen_range(0..pieces)
            };
            groups[g].push(a);
        }
        blocks.extend(groups);
    }
    Partition::new(blocks, k).expect("refinement")
}

fn random_measure(rng: &mut ChaCha8Rng, k: usize) -> Vec<Rational> {
    let w: Vec<i64> = (0..k).map(|_| rng.gen_range(1..=4)).collect();
    let total: i64 = w.iter().sum();
    w.into_iter().map(|x| ratio(x, total)).collect()
}

/// Price path that is a martingale for `chain` under `measure`.
fn martingale_prices(
    rng: &mut ChaCha8Rng,
    chain: &[Partition],
    measure: &[Rational],
) -> Vec<Vec<Rational>> {
    let k = measure.len();
    let start = int(rng.gen_range(1..=5));
    let mut prices = vec![vec![start; k]];
    for t in 1..chain.len() {
        let prev = prices[t - 1].clone();
        let mut next = vec![Rational::zero(); k];
        for parent in chain[t - 1].blocks() {
            let mut children: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for &a in parent {
                children.entry(chain[t].block_of(a)).or_default().push(a);
            }
            let mass: Rational = parent.iter().map(|&a| &measure[a]).sum();
            let moves: Vec<(Vec<usize>, Rational)> = children
                .into_values()
                .map(|c| (c, int(rng.gen_range(-3..=3))))
                .collect();
            let mean: Rational = moves
                .iter()
                .map(|(c, d)| c.iter().map(|&a| &measure[a]).sum::<Rational>() * d)
                .sum::<Rational>()
                / mass;
            for (c, d) in moves {
                for a in c {
                    next[a] = &prev[a] + &d - &mean;
                }
            }
        }
        prices.push(next);
    }
    prices
}

fn arbitrary_prices(rng: &mut ChaCha8Rng, chain: &[Partition]) -> Vec<Vec<Rational>> {
    chain
        .iter()
        .map(|part| {
            let values: Vec<Rational> =
                (0..part.len()).map(|_| int(rng.gen_range(0..=6))).collect();
            (0..part.atoms())
                .map(|a| values[part.block_of(a)].clone())
                .collect()
        })
        .collect()
}

pub fn random_market(rng: &mut ChaCha8Rng, params: &RandomParams) -> MarketModel {
    let k = rng.gen_range(2..=params.max_atoms.max(2));
    let n = rng.gen_range(1..=params.max_agents.max(1));
    let horizon = rng.gen_range(1..=params.max_horizon.max(1));
    let atoms: Vec<String> = (1..=k).map(|a| format!("w{a}")).collect();
    let probabilities = random_measure(rng, k);

    let mut chain = vec![Partition::trivial(k)];
    for _ in 0..horizon {
        let next = refine(rng, chain.last().expect("chain"));
        chain.push(next);
    }
    let filtrations: Vec<Filtration> = (0..n)
        .map(|_| {
            let lag = if horizon > 1 && rng.gen_bool(0.3) {
                1
            } else {
                0
            };
            Filtration::new(
                (0..=horizon)
                    .map(|t| chain[t.saturating_sub(lag)].clone())
                    .collect(),
            )
        })
        .collect();

    let shared = n > 1 && rng.gen_bool(0.5);
    let asset_count = n + usize::from(shared);
    let mut access: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    if shared {
        let mut holders: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
        if holders.is_empty() {
            holders.push(rng.gen_range(0..n));
        }
        for i in holders {
            access[i].push(n);
        }
    }

    // 0: one measure for every asset, 1: a measure per asset, 2: arbitrary
    let mode = match rng.gen_range(0..10) {
        0..=6 => 0,
        7..=8 => 1,
        _ => 2,
    };
    let common = random_measure(rng, k);
    let assets = (0..asset_count)
        .map(|j| {
            let holders: Vec<usize> = (0..n).filter(|i| access[*i].contains(&j)).collect();
            let asset_chain: Vec<Partition> = (0..=horizon)
                .map(|t| Partition::meet(holders.iter().map(|&i| filtrations[i].at(t)), k))
                .collect();
            let prices = match mode {
                0 => martingale_prices(rng, &asset_chain, &common),
                1 => {
                    let own = random_measure(rng, k);
                    martingale_prices(rng, &asset_chain, &own)
                }
                _ => arbitrary_prices(rng, &asset_chain),
            };
            Asset {
                name: format!("X{}", j + 1),
                prices,
            }
        })
        .collect();
    let agents = filtrations
        .into_iter()
        .zip(access)
        .enumerate()
        .map(|(i, (filtration, mut assets))| {
            assets.sort_unstable();
            AgentSpec {
                name: format!("agent{}", i + 1),
                assets,
                filtration,
            }
        })
        .collect();
    MarketModel::new(atoms, probabilities, horizon, assets, agents)
        .expect("generated market is valid")
}

/// Zero-sum exchanges measurable for every agent at the horizon.
pub fn random_zero_sum_space(
    rng: &mut ChaCha8Rng,
    model: &MarketModel,
    max_generators: usize,
) -> ExchangeSpace {
    let n = model.agent_count();
    if n < 2 || max_generators == 0 {
        return ExchangeSpace::deterministic(n);
    }
    if rng.gen_bool(0.25) {
        let t = rng.gen_range(0..model.horizon());
        let space = zero_sum_generators_from_partition(model, t).expect("time in range");
        if space.generators().len() <= max_generators {
            return space;
        }
    }
    let k = model.atom_count();
    let common = Partition::meet(
        model
            .agents()
            .iter()
            .map(|a| a.filtration.at(model.horizon())),
        k,
    );
    let count = rng.gen_range(0..=max_generators);
    let generators = (0..count)
        .map(|_| {
            let mut comps: Vec<Vec<Rational>> = Vec::with_capacity(n);
            for _ in 0..n - 1 {
                let values: Vec<Rational> = (0..common.len())
                    .map(|_| int(rng.gen_range(-2..=2)))
                    .collect();
                comps.push((0..k).map(|a| values[common.block_of(a)].clone()).collect());
            }
            let last = (0..k)
                .map(|a| -comps.iter().map(|c| &c[a]).sum::<Rational>())
                .collect();
            comps.push(last);
            RandomVector::new(comps)
        })
        .collect();
    ExchangeSpace::zero_sum(model, generators).expect("generated exchanges are valid")
}

/// Claim whose component `i` is measurable for agent `i` at the horizon.
pub fn random_claim(rng: &mut ChaCha8Rng, model: &MarketModel) -> RandomVector {
    let k = model.atom_count();
    RandomVector::new(
        model
            .agents()
            .iter()
            .map(|a| {
                let part = a.filtration.at(model.horizon());
                let values: Vec<Rational> = (0..part.len())
                    .map(|_| int(rng.gen_range(-3..=3)))
                    .collect();
                (0..k).map(|x| values[part.block_of(x)].clone()).collect()
            })
            .collect(),
    )
}

/// Random holdings on every predictable key of every agent.
pub fn random_strategies(rng: &mut ChaCha8Rng, model: &MarketModel) -> Vec<AgentStrategy> {
    (0..model.agent_count())
        .map(|i| {
            let basis = gains_basis(model, i);
            let coeffs: Vec<Rational> = basis
                .keys
                .iter()
                .map(|_| ratio(rng.gen_range(-5..=5), rng.gen_range(1..=2)))
                .collect();
            AgentStrategy::from_coefficients(&basis, &coeffs)
        })
        .collect()
}

/// Zero-sum exchange schedule with `Y_t` measurable for every agent at `t`.
pub fn random_schedule(rng: &mut ChaCha8Rng, model: &MarketModel) -> ExchangeSchedule {
    let (n, k) = (model.agent_count(), model.atom_count());
    let per_time = (1..=model.horizon())
        .map(|t| {
            let common = Partition::meet(model.agents().iter().map(|a| a.filtration.at(t)), k);
            let mut comps: Vec<Vec<Rational>> = (0..n.saturating_sub(1))
                .map(|_| {
                    let vals: Vec<Rational> = (0..common.len())
                        .map(|_| int(rng.gen_range(-3..=3)))
                        .collect();
                    (0..k).map(|a| vals[common.block_of(a)].clone()).collect()
                })
                .collect();
            let last = (0..k)
                .map(|a| -comps.iter().map(|c| &c[a]).sum::<Rational>())
                .collect();
            comps.push(last);
            RandomVector::new(comps)
        })
        .collect();
    ExchangeSchedule::new(model, per_time).expect("schedule is measurable")
}

pub fn random_instance(seed: u64, params: &RandomParams) -> RandomInstance {
    let mut rng = rng_from_seed(seed);
    let model = random_market(&mut rng, params);
    let space = random_zero_sum_space(&mut rng, &model, params.max_generators);
    let claim = random_claim(&mut rng, &model);
    RandomInstance {
        seed,
        model,
        space,
        claim,
    }
}

/// The first `count` instances, scanning seeds from `base`, whose exchange
/// space admits no collective arbitrage.
pub fn nca_suite(base: u64, count: usize, params: &RandomParams) -> Vec<RandomInstance> {
    let mut out = Vec::with_capacity(count);
    let mut seed = base;
    while out.len() < count {
        let inst = random_instance(seed, params);
        if nca_interior_point(&inst.model, &inst.space)
            .expect("measure LP")
            .is_some()
        {
            out.push(inst);
        }
        seed += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{parse_market, serialize_market};

    #[test]
    fn generation_is_deterministic_and_valid() {
        let p = RandomParams::default();
        for seed in 0..40 {
            let a = random_instance(seed, &p);
            let b = random_instance(seed, &p);
            assert_eq!(a.model, b.model);
            assert_eq!(a.claim, b.claim);
            assert!(
                a.model.atom_count() <= 8 && a.model.agent_count() <= 3 && a.model.horizon() <= 2
            );
            assert!(a.space.generators().len() <= 2 || a.space.is_zero_sum());
            assert!(a.space.is_zero_sum());
            assert_eq!(parse_market(&serialize_market(&a.model)).unwrap(), a.model);
        }
    }
}
