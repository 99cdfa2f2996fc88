mod common;

use colmkt_core::fixtures::{fig1, fig2};
use colmkt_core::gains::{
    decomposed_value, gain_of_strategy, gain_up_to, gains_basis, lift_to_csf, value_process,
    AgentStrategy, GainsError,
};
use colmkt_core::lp::{solve_linear_system, LinearSystem};
use colmkt_core::market::ExchangeSchedule;
use colmkt_core::random::{random_instance, RandomParams};
use colmkt_core::random::{random_schedule, random_strategies};
use colmkt_core::rational::int;
use colmkt_core::{MarketModel, RandomVector, Rational};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn model(seed: u64) -> MarketModel {
    random_instance(seed, &RandomParams::default()).model
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn gains_lie_in_the_basis_span(seed in any::<u64>(), rseed in any::<u64>()) {
        let m = model(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(rseed);
        let hs = random_strategies(&mut rng, &m);
        for (i, h) in hs.iter().enumerate() {
            let gain = gain_of_strategy(&m, i, h).unwrap();
            let basis = gains_basis(&m, i);
            let k = m.atom_count();
            let matrix: Vec<Vec<Rational>> =
                (0..k).map(|a| basis.generators.iter().map(|g| g[a].clone()).collect()).collect();
            let sol = solve_linear_system(&matrix, &gain, basis.generators.len()).unwrap();
            let feasible = matches!(sol, LinearSystem::Feasible { .. });
            prop_assert!(feasible);
        }
    }

    #[test]
    fn value_two_ways(seed in any::<u64>(), rseed in any::<u64>()) {
        let m = model(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(rseed);
        let v0: Vec<Rational> = (0..m.agent_count()).map(|_| int(rng.gen_range(-9..=9))).collect();
        let risky = random_strategies(&mut rng, &m);
        let schedule = random_schedule(&mut rng, &m);
        let csf = lift_to_csf(&m, &v0, &risky, &schedule).unwrap();
        let direct = value_process(&m, &csf, &schedule).unwrap();
        let split = decomposed_value(&m, &v0, &risky, &schedule).unwrap();
        prop_assert_eq!(direct, split);
    }

    #[test]
    fn holdings_act_only_on_their_block_and_after_their_time(seed in any::<u64>(), rseed in any::<u64>()) {
        let m = model(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(rseed);
        let i = rng.gen_range(0..m.agent_count());
        let basis = gains_basis(&m, i);
        let key = basis.keys[rng.gen_range(0..basis.keys.len())];
        let hs = random_strategies(&mut rng, &m);
        let mut bumped = hs[i].clone();
        bumped.set(key.time, key.block, key.asset, hs[i].get(key.time, key.block, key.asset) + int(1));
        let block = &m.agent(i).filtration.at(key.time - 1).blocks()[key.block];
        for t in 0..=m.horizon() {
            let a = gain_up_to(&m, i, &hs[i], t).unwrap();
            let b = gain_up_to(&m, i, &bumped, t).unwrap();
            for atom in 0..m.atom_count() {
                if t < key.time || !block.contains(&atom) {
                    prop_assert_eq!(&a[atom], &b[atom]);
                }
            }
        }
    }
}

#[test]
fn holdings_off_the_block_keys_are_rejected() {
    let m = fig2();
    let mut h = AgentStrategy::new();
    h.set(1, 1, 0, int(1));
    assert!(matches!(
        gain_of_strategy(&m, 0, &h),
        Err(GainsError::BlockKeyMismatch { .. })
    ));
    let mut h = AgentStrategy::new();
    h.set(2, 0, 1, int(1));
    assert!(matches!(
        gain_of_strategy(&m, 0, &h),
        Err(GainsError::BlockKeyMismatch { .. })
    ));
}

/// Every `v0 + k + Y_{1:T}` with small integer holdings and exchanges is a
/// terminal c.s.f. value, and every such value decomposes.
#[test]
fn terminal_values_exhaustive() {
    for m in [fig1(), fig2()] {
        let k = m.atom_count();
        let v0 = vec![int(2), int(-1)];
        let schedules: Vec<ExchangeSchedule> = [0i64, 1, -2]
            .iter()
            .map(|&c| {
                let y1 = RandomVector::new(vec![vec![int(c); k], vec![int(-c); k]]);
                let part = m.agent(0).filtration.at(2);
                let y2a: Vec<Rational> = (0..k).map(|a| int(part.block_of(a) as i64 % 2)).collect();
                let y2b = y2a.iter().map(|v| -v).collect();
                ExchangeSchedule::new(&m, vec![y1, RandomVector::new(vec![y2a, y2b])]).unwrap()
            })
            .collect();
        let keys0 = gains_basis(&m, 0).keys;
        let keys1 = gains_basis(&m, 1).keys;
        let combos = 3usize.pow(keys0.len() as u32);
        for code in 0..combos {
            let mut h0 = AgentStrategy::new();
            let mut c = code;
            for key in &keys0 {
                h0.set(key.time, key.block, key.asset, int((c % 3) as i64 - 1));
                c /= 3;
            }
            let mut h1 = AgentStrategy::new();
            let key = keys1[code % keys1.len()];
            h1.set(key.time, key.block, key.asset, int(1));
            let risky = vec![h0, h1];
            for schedule in &schedules {
                let csf = lift_to_csf(&m, &v0, &risky, schedule).unwrap();
                let terminal = value_process(&m, &csf, schedule).unwrap().terminal();
                let cum = schedule.cumulative(m.horizon());
                for i in 0..2 {
                    let gain = gain_of_strategy(&m, i, &risky[i]).unwrap();
                    for a in 0..k {
                        assert_eq!(
                            terminal.component(i)[a],
                            &v0[i] + &gain[a] + &cum.component(i)[a]
                        );
                    }
                }
            }
        }
    }
}
