//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints one PASS/FAIL line even when the suite succeeds.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use colmkt_core::arbitrage::{
    agent_mm_polytope, check_na_agent, check_na_global, check_nca, collective_mm_polytope,
    is_singleton, price_set,
};
use colmkt_core::fixtures::{fig1, fig2};
use colmkt_core::gains::{gain_of_strategy, lift_to_csf, value_process, CsfStrategy, ValueProcess};
use colmkt_core::hedging::{
    classical_dual_super_price, completeness, decomposition_check, dual_super_price, replicate,
    replication_system, sub_price, super_price, upper_attained_by_equivalent_measure,
    HedgeCertificate, Replication,
};
use colmkt_core::lp::{
    determinant, enumerate_vertices, rank, solve_linear_system, LinearSystem, Polytope,
};
use colmkt_core::market::zero_sum_generators_from_partition;
use colmkt_core::random::{nca_suite, random_instance, RandomInstance, RandomParams};
use colmkt_core::rational::{int, ratio};
use colmkt_core::{ExchangeSpace, MarketModel, RandomVector, Rational};
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;

use colmkt_core::random::{random_schedule, random_strategies};
use common::random_measurable;

type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn q(xs: &[(i64, i64)]) -> Vec<Rational> {
    xs.iter().map(|&(a, b)| ratio(a, b)).collect()
}

fn ints(rows: &[&[i64]]) -> Vec<Vec<Rational>> {
    rows.iter()
        .map(|r| r.iter().map(|&x| int(x)).collect())
        .collect()
}

/// `m + sum of gains + exchange - f`, recomputed from the strategies.
fn recomputed_slack(
    model: &MarketModel,
    cert: &HedgeCertificate,
    f: &RandomVector,
) -> Result<RandomVector, String> {
    let k = model.atom_count();
    let mut comps = Vec::new();
    for i in 0..model.agent_count() {
        let gain = gain_of_strategy(model, i, &cert.strategies[i]).map_err(|e| e.to_string())?;
        comps.push(
            (0..k)
                .map(|a| {
                    &cert.transfer[i] + &gain[a] + &cert.exchange.component(i)[a]
                        - &f.component(i)[a]
                })
                .collect(),
        );
    }
    Ok(RandomVector::new(comps))
}

fn fig1_y() -> (MarketModel, ExchangeSpace) {
    let m = fig1();
    let y = zero_sum_generators_from_partition(&m, 1).expect("time 1");
    (m, y)
}

fn criterion1() -> Check {
    let (m, y) = fig1_y();
    let verts =
        enumerate_vertices(&collective_mm_polytope(&m, &y), 24).map_err(|e| e.to_string())?;
    let mut expected = q(&[(1, 8), (1, 8), (1, 8), (1, 8), (1, 6), (1, 3)]);
    expected.extend(q(&[(1, 8), (1, 8), (1, 8), (1, 8), (1, 3), (1, 6)]));
    ensure!(
        verts == vec![expected.clone()],
        "closure vertices {verts:?}"
    );
    ensure!(
        expected.iter().all(Signed::is_positive),
        "point is not equivalent"
    );
    let r = check_nca(&m, &y).map_err(|e| e.to_string())?;
    ensure!(r.holds, "NCA fails");
    let mv = r.measure.ok_or("no measure")?;
    ensure!(mv.flatten() == expected, "measure {:?}", mv.per_agent);
    ensure!(
        is_singleton(&m, &y).map_err(|e| e.to_string())?,
        "not a singleton"
    );
    Ok(())
}

fn criterion2() -> Check {
    let m = fig1();
    let family1 = |p: Rational| {
        let half = ratio(1, 2);
        vec![
            &half * (&half - &p),
            &half * (&half - &p),
            &half * &p,
            &half * &p,
            ratio(1, 6),
            ratio(1, 3),
        ]
    };
    let family2 = |x: Rational| {
        let half = ratio(1, 2);
        let rest = ratio(3, 4) - &x;
        vec![
            ratio(1, 8),
            ratio(1, 8),
            &half * &rest,
            &half * &rest,
            ratio(2, 3) * &x,
            ratio(1, 3) * &x,
        ]
    };
    let mut want1 = vec![family1(int(0)), family1(ratio(1, 2))];
    let mut want2 = vec![family2(int(0)), family2(ratio(3, 4))];
    want1.sort();
    want2.sort();
    let got1 = enumerate_vertices(&agent_mm_polytope(&m, 0), 24).map_err(|e| e.to_string())?;
    let got2 = enumerate_vertices(&agent_mm_polytope(&m, 1), 24).map_err(|e| e.to_string())?;
    ensure!(got1 == want1, "agent 1 vertices {got1:?}");
    ensure!(got2 == want2, "agent 2 vertices {got2:?}");
    // interior points of the families are members
    for p in [ratio(1, 8), ratio(1, 4)] {
        ensure!(
            agent_mm_polytope(&m, 0).contains(&family1(p.clone())),
            "p = {p} not in closure"
        );
    }
    for x in [ratio(1, 4), ratio(1, 2)] {
        ensure!(
            agent_mm_polytope(&m, 1).contains(&family2(x.clone())),
            "q = {x} not in closure"
        );
    }

    let mut both = Polytope::nonnegative(6);
    for poly in [agent_mm_polytope(&m, 0), agent_mm_polytope(&m, 1)] {
        for (row, rhs) in poly.eq_rows.iter().zip(&poly.eq_rhs) {
            both.add_eq(row.clone(), rhs.clone());
        }
    }
    let common = enumerate_vertices(&both, 24).map_err(|e| e.to_string())?;
    ensure!(common.is_empty(), "closures intersect at {common:?}");
    let g = check_na_global(&m).map_err(|e| e.to_string())?;
    ensure!(!g.holds, "global NA holds");
    ensure!(g.max_t.is_zero(), "global max-t {}", g.max_t);
    Ok(())
}

fn criterion3() -> Check {
    let square = ints(&[
        &[1, 4, 0, 1, 0, 0],
        &[1, 4, 0, 0, 1, 0],
        &[1, 12, 0, 0, 0, 1],
        &[1, 0, 16, -1, 0, 0],
        &[1, 0, 8, 0, -1, 0],
        &[1, 0, 8, 0, 0, -1],
    ]);
    let det = determinant(&square).map_err(|e| e.to_string())?;
    ensure!(det == int(-128), "determinant {det}");
    let wide = ints(&[
        &[1, 0, 4, 0, 1, 0, 0],
        &[1, 0, 4, 0, 0, 1, 0],
        &[1, 0, 12, 0, 0, 0, 1],
        &[0, 1, 0, 16, -1, 0, 0],
        &[0, 1, 0, 8, 0, -1, 0],
        &[0, 1, 0, 8, 0, 0, -1],
    ]);
    ensure!(rank(&wide) == 6, "rank {}", rank(&wide));
    match solve_linear_system(&wide, &vec![Rational::zero(); 6], 7).map_err(|e| e.to_string())? {
        LinearSystem::Feasible { nullspace, .. } => {
            ensure!(nullspace.len() == 1, "nullity {}", nullspace.len())
        }
        LinearSystem::Infeasible { .. } => return Err("homogeneous system infeasible".into()),
    }

    let (m, y) = fig1_y();
    let (system, _) = replication_system(&m, &y);
    ensure!(
        rank(&system) == 12,
        "replication system rank {}",
        rank(&system)
    );
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 0..25 {
        let f = random_measurable(&mut rng, &m, 2, 20);
        match replicate(&m, &f, &y).map_err(|e| e.to_string())? {
            Replication::Replicable(cert) => {
                ensure!(cert.slack.is_zero(), "claim {n}: nonzero slack");
                let slack = recomputed_slack(&m, &cert, &f)?;
                ensure!(slack.is_zero(), "claim {n}: recomputed slack nonzero");
            }
            Replication::NotReplicable { .. } => return Err(format!("claim {n} not replicable")),
        }
    }
    Ok(())
}

fn criterion4() -> Check {
    let (m, y) = fig1_y();
    let r = completeness(&m, &y).map_err(|e| e.to_string())?;
    ensure!(
        r.complete && r.singleton && r.indicators_replicable && r.prices_coincide,
        "zero-sum exchanges: {r:?}"
    );
    let r = completeness(&m, &ExchangeSpace::deterministic(2)).map_err(|e| e.to_string())?;
    ensure!(
        !r.complete && !r.singleton && !r.indicators_replicable && !r.prices_coincide,
        "deterministic exchanges: {r:?}"
    );
    Ok(())
}

fn criterion5() -> Check {
    let m = fig2();
    let early = m.restrict_horizon(0, 1).map_err(|e| e.to_string())?;
    let r = check_nca(&early, &ExchangeSpace::deterministic(2)).map_err(|e| e.to_string())?;
    ensure!(r.holds, "NCA fails on (0,1)");

    let late = m.restrict_horizon(1, 2).map_err(|e| e.to_string())?;
    let r = check_nca(&late, &ExchangeSpace::deterministic(2)).map_err(|e| e.to_string())?;
    ensure!(r.holds, "NCA fails on (1,2)");
    let mv = r.measure.ok_or("no measure on (1,2)")?;
    for (i, qi) in mv.per_agent.iter().enumerate() {
        let part = late.agent(i).filtration.at(0);
        let last = late.agent(i).filtration.at(1);
        for block in part.blocks() {
            let mass: Rational = block.iter().map(|&a| &qi[a]).sum();
            for child in last.blocks().iter().filter(|c| block.contains(&c[0])) {
                let cm: Rational = child.iter().map(|&a| &qi[a]).sum();
                ensure!(
                    cm / &mass == ratio(1, 2),
                    "agent {i}: conditional mass is not 1/2"
                );
            }
        }
    }

    let y = zero_sum_generators_from_partition(&m, 1).map_err(|e| e.to_string())?;
    let r = check_nca(&m, &y).map_err(|e| e.to_string())?;
    ensure!(!r.holds, "NCA holds on (0,2)");
    ensure!(r.max_t.is_zero(), "max-t {}", r.max_t);
    let w = r.witness.ok_or("no witness")?;
    let scale = w.outcome.component(0)[0].clone();
    ensure!(scale.is_positive(), "outcome does not pay on w1");
    let shape = [1, 1, 0, 0, 0, 0];
    for i in 0..2 {
        for (a, s) in shape.iter().enumerate() {
            ensure!(
                w.outcome.component(i)[a] == &scale * int(*s),
                "outcome {:?}",
                w.outcome
            );
        }
    }
    // outcome is really gains plus an allowed exchange
    let mut total = w.exchange.clone();
    for i in 0..2 {
        let g = gain_of_strategy(&m, i, &w.strategies[i]).map_err(|e| e.to_string())?;
        let mut comps = total.components().to_vec();
        for (c, x) in comps[i].iter_mut().zip(g) {
            *c += x;
        }
        total = RandomVector::new(comps);
    }
    ensure!(total == w.outcome, "witness does not add up");
    ensure!(
        w.exchange.first_nonzero_sum_atom().is_none(),
        "witness exchange is not zero-sum"
    );
    Ok(())
}

fn criterion6(suite: &[RandomInstance]) -> Check {
    for inst in suite {
        let (m, y, f) = (&inst.model, &inst.space, &inst.claim);
        let (primal, cert) =
            super_price(m, f, y).map_err(|e| format!("seed {}: {e}", inst.seed))?;
        let (dual, mv) =
            dual_super_price(m, f, y).map_err(|e| format!("seed {}: {e}", inst.seed))?;
        ensure!(primal == dual, "seed {}: {primal} != {dual}", inst.seed);
        ensure!(
            recomputed_slack(m, &cert, f)?.is_nonnegative(),
            "seed {}: hedge does not dominate",
            inst.seed
        );
        let polar: Rational = mv.expectations(f).iter().sum();
        ensure!(
            polar == dual,
            "seed {}: dual point value {polar}",
            inst.seed
        );

        let n = m.agent_count();
        let report = decomposition_check(m, f).map_err(|e| format!("seed {}: {e}", inst.seed))?;
        let mut sum = Rational::zero();
        for i in 0..n {
            sum += classical_dual_super_price(m, i, f.component(i)).map_err(|e| e.to_string())?;
        }
        let (collective, _) =
            super_price(m, f, &ExchangeSpace::deterministic(n)).map_err(|e| e.to_string())?;
        ensure!(
            collective == sum,
            "seed {}: decomposition {collective} vs {sum}",
            inst.seed
        );
        ensure!(
            report.total == sum,
            "seed {}: report total {}",
            inst.seed,
            report.total
        );
    }
    Ok(())
}

fn criterion7(suite: &[RandomInstance]) -> Check {
    let mut gaps = 0;
    let mut inspected = 0;
    for inst in suite {
        let (m, y, f) = (&inst.model, &inst.space, &inst.claim);
        let (upper, _) = super_price(m, f, y).map_err(|e| e.to_string())?;
        let (lower, _) = sub_price(m, f, y).map_err(|e| e.to_string())?;
        let replicable = replicate(m, f, y)
            .map_err(|e| e.to_string())?
            .is_replicable();
        ensure!(
            replicable == (lower == upper),
            "seed {}: replicable {replicable}, prices {lower} {upper}",
            inst.seed
        );
        if replicable {
            continue;
        }
        gaps += 1;
        ensure!(
            lower < upper,
            "seed {}: lower {lower} >= upper {upper}",
            inst.seed
        );
        let attained =
            upper_attained_by_equivalent_measure(m, f, y, &upper).map_err(|e| e.to_string())?;
        ensure!(
            !attained,
            "seed {}: upper price attained by an equivalent measure",
            inst.seed
        );
        // vertex supports: every vertex on either endpoint has a zero weight
        let poly = collective_mm_polytope(m, y);
        if poly.dim <= 16 && inspected < 40 {
            let verts = match enumerate_vertices(&poly, 24) {
                Ok(v) => v,
                Err(_) => continue,
            };
            inspected += 1;
            let flat = f.flatten();
            let value =
                |v: &Vec<Rational>| -> Rational { v.iter().zip(&flat).map(|(a, b)| a * b).sum() };
            let values: Vec<Rational> = verts.iter().map(value).collect();
            ensure!(
                values.iter().max() == Some(&upper),
                "seed {}: vertex max differs",
                inst.seed
            );
            ensure!(
                values.iter().min() == Some(&lower),
                "seed {}: vertex min differs",
                inst.seed
            );
            for (v, val) in verts.iter().zip(&values) {
                if val == &upper || val == &lower {
                    ensure!(
                        v.iter().any(Zero::is_zero),
                        "seed {}: endpoint vertex has full support",
                        inst.seed
                    );
                }
            }
            let ps = price_set(m, f, y, 24).map_err(|e| e.to_string())?;
            ensure!(
                ps.sum_range == (lower.clone(), upper.clone()),
                "seed {}: price set range",
                inst.seed
            );
            ensure!(
                !ps.replicable,
                "seed {}: price set says replicable",
                inst.seed
            );
        }
    }
    ensure!(gaps > 0, "no non-replicable claims in the suite");
    ensure!(inspected > 0, "no vertex inspection ran");
    Ok(())
}

fn criterion8(suite: &[RandomInstance]) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for inst in suite {
        let (m, y, f) = (&inst.model, &inst.space, &inst.claim);
        let (n, k) = (m.agent_count(), m.atom_count());
        let price = |g: &RandomVector| super_price(m, g, y).map(|p| p.0).map_err(|e| e.to_string());
        let rho = price(f)?;
        ensure!(
            price(&RandomVector::zeros(n, k))?.is_zero(),
            "seed {}: rho(0) != 0",
            inst.seed
        );

        let c: Vec<Rational> = (0..n)
            .map(|_| ratio(rng.gen_range(-9..=9), rng.gen_range(1..=4)))
            .collect();
        let shifted = f.add(&RandomVector::constant(&c, k));
        let csum: Rational = c.iter().sum();
        ensure!(
            price(&shifted)? == &rho + &csum,
            "seed {}: cash additivity",
            inst.seed
        );

        let bump = random_measurable(&mut rng, m, m.horizon(), 4);
        let up = RandomVector::new(
            bump.components()
                .iter()
                .map(|v| v.iter().map(|x| x.abs()).collect())
                .collect(),
        );
        ensure!(
            price(&f.add(&up))? >= rho,
            "seed {}: monotonicity",
            inst.seed
        );

        for lambda in [int(0), ratio(1, 2), int(3)] {
            ensure!(
                price(&f.scale(&lambda))? == &lambda * &rho,
                "seed {}: homogeneity at {lambda}",
                inst.seed
            );
        }

        let (_, cert) = super_price(m, f, y).map_err(|e| e.to_string())?;
        let share = &rho / Rational::from_integer(n.into());
        ensure!(
            cert.transfer.iter().all(|x| x == &share),
            "seed {}: cash not rho/N",
            inst.seed
        );
        ensure!(
            recomputed_slack(m, &cert, f)?.is_nonnegative(),
            "seed {}: normal form does not hedge",
            inst.seed
        );
        let (lower, _) = sub_price(m, f, y).map_err(|e| e.to_string())?;
        ensure!(lower <= rho, "seed {}: rho- > rho+", inst.seed);
    }
    Ok(())
}

fn hand_value(
    m: &MarketModel,
    csf: &CsfStrategy,
    i: usize,
    hold: usize,
    t: usize,
    a: usize,
) -> Rational {
    let f = &m.agent(i).filtration;
    let b = f.at(hold - 1).block_of(a);
    let risky: Rational = m
        .agent(i)
        .assets
        .iter()
        .map(|&j| csf.risky[i].get(hold, b, j) * m.price(j, t, a))
        .sum();
    risky + csf.riskless[i].get(&(hold, b)).cloned().unwrap_or_default()
}

fn criterion9() -> Check {
    let params = RandomParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for seed in 0..50u64 {
        let m = random_instance(10_000 + seed, &params).model;
        let (n, k) = (m.agent_count(), m.atom_count());
        let v0: Vec<Rational> = (0..n)
            .map(|_| ratio(rng.gen_range(-10..=10), rng.gen_range(1..=3)))
            .collect();
        let risky = random_strategies(&mut rng, &m);
        let schedule = random_schedule(&mut rng, &m);
        let csf = lift_to_csf(&m, &v0, &risky, &schedule).map_err(|e| e.to_string())?;
        let values: ValueProcess = value_process(&m, &csf, &schedule).map_err(|e| e.to_string())?;

        let horizon = m.horizon();
        let mut total_exchange = RandomVector::zeros(n, k);
        for t in 1..=horizon {
            total_exchange = total_exchange.add(schedule.at(t));
        }
        for i in 0..n {
            let gain = gain_of_strategy(&m, i, &risky[i]).map_err(|e| e.to_string())?;
            for a in 0..k {
                let want = &v0[i] + &gain[a] + &total_exchange.component(i)[a];
                ensure!(
                    values.terminal().component(i)[a] == want,
                    "triple {seed}: terminal value agent {i}"
                );
                ensure!(
                    hand_value(&m, &csf, i, 1, 0, a) == v0[i],
                    "triple {seed}: initial wealth agent {i}"
                );
            }
            for t in 1..horizon {
                for a in 0..k {
                    let before = hand_value(&m, &csf, i, t, t, a) + &schedule.at(t).component(i)[a];
                    let after = hand_value(&m, &csf, i, t + 1, t, a);
                    ensure!(
                        before == after,
                        "triple {seed}: not self-financing at t = {t}"
                    );
                    ensure!(
                        values.at(t).component(i)[a] == before,
                        "triple {seed}: value at t = {t}"
                    );
                }
            }
        }
    }
    Ok(())
}

fn criterion10(count: u64) -> Check {
    let params = RandomParams::default();
    let mut na_seen = 0;
    let mut nca_seen = 0;
    for seed in 0..count {
        let inst = random_instance(20_000 + seed, &params);
        let m = &inst.model;
        let n = m.agent_count();
        ensure!(
            inst.space.is_zero_sum(),
            "seed {seed}: exchanges not zero-sum"
        );
        let na = check_na_global(m).map_err(|e| e.to_string())?.holds;
        let nca = check_nca(m, &inst.space).map_err(|e| e.to_string())?.holds;
        let det = check_nca(m, &ExchangeSpace::deterministic(n))
            .map_err(|e| e.to_string())?
            .holds;
        let mut all_agents = true;
        for i in 0..n {
            all_agents &= check_na_agent(m, i).map_err(|e| e.to_string())?.holds;
        }
        ensure!(!na || nca, "seed {seed}: NA without NCA(Y)");
        ensure!(!nca || all_agents, "seed {seed}: NCA(Y) without agent NA");
        ensure!(
            det == all_agents,
            "seed {seed}: deterministic NCA {det} vs agent NA {all_agents}"
        );
        na_seen += usize::from(na);
        nca_seen += usize::from(nca && !na);
    }
    ensure!(
        na_seen > 0 && nca_seen > 0,
        "suite lacks variety: {na_seen} NA, {nca_seen} NCA without NA"
    );
    Ok(())
}

fn run(name: &str, check: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into()))
    });
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(()) => {
            println!("PASS  {name} ({secs:.2}s)");
            true
        }
        Err(e) => {
            println!("FAIL  {name} ({secs:.2}s): {e}");
            false
        }
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let suite = nca_suite(0, 200, &RandomParams::default());
    println!(
        "random suite: 200 NCA instances in {:.2}s",
        start.elapsed().as_secs_f64()
    );
    let results = [
        run("1 fig1 unique collective measure", criterion1),
        run("2 fig1 agent polytopes and empty intersection", criterion2),
        run("3 fig1 replication matrix and replication", criterion3),
        run("4 fig1 completeness equivalences", criterion4),
        run("5 fig2 time consistency of NCA", criterion5),
        run("6 strong duality and decomposition", || criterion6(&suite)),
        run("7 replication iff price gap", || criterion7(&suite)),
        run("8 super-hedging price properties", || criterion8(&suite)),
        run("9 collectively self-financing round trip", criterion9),
        run("10 implication chain", || criterion10(200)),
    ];
    let passed = results.iter().filter(|&&ok| ok).count();
    println!(
        "acceptance: {passed}/{} passed in {:.2}s",
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
