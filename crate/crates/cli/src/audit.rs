//! Batch invariant checks over one market or a seeded random suite.

use colmkt_core::arbitrage::{check_na_agent, check_nca, implications_audit, AnalysisError};
use colmkt_core::gains::{decomposed_value, lift_to_csf, value_process};
use colmkt_core::hedging::{
    completeness, decomposition_check, dual_super_price, indicator_basis, price_gap, sub_price,
    super_price,
};
use colmkt_core::market::{serialize_market, ExchangeConfig};
use colmkt_core::random::{
    random_instance, random_schedule, random_strategies, rng_from_seed, RandomParams,
};
use colmkt_core::rational::{format_rational, int, ratio};
use colmkt_core::{ExchangeSpace, MarketModel, RandomVector, Rational};
use rand::Rng;
use serde_json::{json, Map, Value};

use crate::commands::{CliError, Report, Status};
use crate::render;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    Skip,
}

impl Outcome {
    fn label(self) -> &'static str {
        match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::Skip => "skip",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub outcome: Outcome,
    pub detail: String,
}

fn pass(name: &'static str, detail: impl Into<String>) -> Check {
    Check {
        name,
        outcome: Outcome::Pass,
        detail: detail.into(),
    }
}

fn fail(name: &'static str, detail: impl Into<String>) -> Check {
    Check {
        name,
        outcome: Outcome::Fail,
        detail: detail.into(),
    }
}

fn skip(name: &'static str, detail: impl Into<String>) -> Check {
    Check {
        name,
        outcome: Outcome::Skip,
        detail: detail.into(),
    }
}

fn run_check(name: &'static str, body: impl FnOnce() -> Result<String, String>) -> Check {
    match body() {
        Ok(detail) => pass(name, detail),
        Err(detail) => fail(name, detail),
    }
}

fn err(e: AnalysisError) -> String {
    e.to_string()
}

fn flags(xs: &[bool]) -> String {
    xs.iter()
        .map(|&b| if b { "1" } else { "0" })
        .collect::<Vec<_>>()
        .join("")
}

/// Runs every invariant on one market; `claims` are priced on top of the
/// indicator basis when `with_basis` is set.
pub fn audit_instance(
    model: &MarketModel,
    space: &ExchangeSpace,
    claims: &[RandomVector],
    with_basis: bool,
    seed: u64,
) -> Vec<Check> {
    let mut checks = Vec::new();
    let implications = implications_audit(model, space);
    let (nca, all_na) = match &implications {
        Ok(r) => {
            checks.push(pass(
                "implications",
                format!(
                    "NA={} NCA={} NA_i={}",
                    r.na_global,
                    r.nca,
                    flags(&r.na_agents)
                ),
            ));
            (r.nca, r.na_agents.iter().all(|&b| b))
        }
        Err(e) => {
            checks.push(fail("implications", e.to_string()));
            (false, false)
        }
    };
    if implications.is_err() {
        return checks;
    }

    checks.push(run_check("agent_reduction", || {
        let det = check_nca(model, &ExchangeSpace::deterministic(model.agent_count()))
            .map_err(err)?
            .holds;
        let each = (0..model.agent_count())
            .map(|i| check_na_agent(model, i).map(|r| r.holds))
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        if det == each.iter().all(|&b| b) {
            Ok(format!("deterministic NCA={det}"))
        } else {
            Err("deterministic NCA disagrees with agent-wise NA".into())
        }
    }));

    let mut pool: Vec<RandomVector> = claims.to_vec();
    if with_basis {
        match indicator_basis(model) {
            Ok(basis) => pool.extend(basis),
            Err(e) => checks.push(fail("claims", e.to_string())),
        }
    }
    pool.extend(space.generators().iter().cloned());

    if nca {
        checks.push(run_check("duality", || {
            for f in &pool {
                let (primal, _) = super_price(model, f, space).map_err(err)?;
                let (dual, _) = dual_super_price(model, f, space).map_err(err)?;
                if primal != dual {
                    return Err(format!(
                        "primal {} differs from dual {}",
                        format_rational(&primal),
                        format_rational(&dual)
                    ));
                }
            }
            Ok(format!("{} claims", pool.len()))
        }));
        checks.push(run_check("replication_iff", || {
            let mut replicable = 0;
            for f in &pool {
                if price_gap(model, f, space).map_err(err)?.replicable {
                    replicable += 1;
                }
            }
            Ok(format!("{replicable}/{} replicable", pool.len()))
        }));
        checks.push(run_check("completeness", || {
            let c = completeness(model, space).map_err(err)?;
            Ok(if c.complete { "complete" } else { "incomplete" }.into())
        }));
        checks.push(run_check("price_properties", || {
            price_properties(model, space, &pool)
        }));
    } else {
        for name in [
            "duality",
            "replication_iff",
            "completeness",
            "price_properties",
        ] {
            checks.push(skip(name, "collective arbitrage"));
        }
    }

    if all_na {
        checks.push(run_check("decomposition", || {
            for f in &pool {
                decomposition_check(model, f).map_err(err)?;
            }
            Ok(format!("{} claims", pool.len()))
        }));
    } else {
        checks.push(skip("decomposition", "some agent has an arbitrage"));
    }

    checks.push(run_check("self_financing", || csf_rounds(model, seed)));
    checks
}

fn price_properties(
    model: &MarketModel,
    space: &ExchangeSpace,
    pool: &[RandomVector],
) -> Result<String, String> {
    let (n, k) = (model.agent_count(), model.atom_count());
    let rho = |f: &RandomVector| super_price(model, f, space).map(|(v, _)| v).map_err(err);
    if rho(&RandomVector::zeros(n, k))? != int(0) {
        return Err("price of the zero claim is not zero".into());
    }
    let cash: Vec<Rational> = (0..n).map(|i| ratio(2 * i as i64 - 1, 2)).collect();
    let cash_total: Rational = cash.iter().sum();
    let shift = RandomVector::constant(&cash, k);
    for f in pool {
        let base = rho(f)?;
        if rho(&f.add(&shift))? != &base + &cash_total {
            return Err("cash additivity fails".into());
        }
        for lambda in [int(0), ratio(1, 2), int(3)] {
            if rho(&f.scale(&lambda))? != &lambda * &base {
                return Err(format!("homogeneity fails at {}", format_rational(&lambda)));
            }
        }
        let (lower, _) = sub_price(model, f, space).map_err(err)?;
        if lower > base {
            return Err("lower price exceeds upper price".into());
        }
    }
    Ok(format!("{} claims", pool.len()))
}

fn csf_rounds(model: &MarketModel, seed: u64) -> Result<String, String> {
    let mut rng = rng_from_seed(seed ^ 0x5eed_c5f0);
    let rounds = 5;
    for _ in 0..rounds {
        let risky = random_strategies(&mut rng, model);
        let schedule = random_schedule(&mut rng, model);
        let v0: Vec<Rational> = (0..model.agent_count())
            .map(|_| int(rng.gen_range(-3..=3)))
            .collect();
        let csf = lift_to_csf(model, &v0, &risky, &schedule).map_err(|e| e.to_string())?;
        let rolled = value_process(model, &csf, &schedule).map_err(|e| e.to_string())?;
        let direct = decomposed_value(model, &v0, &risky, &schedule).map_err(|e| e.to_string())?;
        if rolled != direct {
            return Err("rolled values differ from the gains decomposition".into());
        }
    }
    Ok(format!("{rounds} rounds"))
}

/// NCA on each unit step with exchanges fixed at its start, and on the whole
/// horizon with the configured exchanges.
fn time_consistency(model: &MarketModel) -> Value {
    let t = model.horizon();
    let mut intervals: Vec<(usize, usize)> = (0..t).map(|s| (s, s + 1)).collect();
    if t >= 2 {
        intervals.push((0, t));
    }
    let rows: Vec<Value> = intervals
        .into_iter()
        .map(|(s, e)| {
            let verdict = model
                .restrict_horizon(s, e)
                .map_err(AnalysisError::from)
                .and_then(|sub| {
                    let sub = if e - s == 1 {
                        sub.with_exchanges(ExchangeConfig::ZeroSumPartition { time: 0 })?
                    } else {
                        sub
                    };
                    let space = sub.exchange_space()?;
                    Ok(check_nca(&sub, &space)?.holds)
                });
            json!({
                "interval": format!("{s}:{e}"),
                "nca": match verdict {
                    Ok(b) => json!(b),
                    Err(_) => Value::Null,
                },
            })
        })
        .collect();
    Value::Array(rows)
}

fn checks_json(checks: &[Check]) -> Value {
    let mut map = Map::new();
    for c in checks {
        map.insert(
            c.name.into(),
            json!({"result": c.outcome.label(), "detail": c.detail}),
        );
    }
    Value::Object(map)
}

fn market_json(model: &MarketModel) -> Value {
    serde_json::from_str(&serialize_market(model)).unwrap_or(Value::Null)
}

pub fn audit_market(model: &MarketModel, space: &ExchangeSpace, seed: u64) -> Report {
    let checks = audit_instance(model, space, &[], true, seed);
    let failed = checks.iter().any(|c| c.outcome == Outcome::Fail);
    let mut body = Map::new();
    body.insert("checks".into(), checks_json(&checks));
    if model.horizon() >= 2 && model.initial_blocks().is_trivial() {
        body.insert("time_consistency".into(), time_consistency(model));
    }
    if failed {
        body.insert("failing_instance".into(), market_json(model));
    }
    Report {
        status: Status::from_bool(!failed),
        body: Value::Object(body),
    }
}

pub fn parse_random(text: &str) -> Result<usize, CliError> {
    text.strip_prefix("n=")
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| CliError::Input(format!("expected --random n=<count>, got \"{text}\"")))
}

pub fn audit_random(count: usize, seed: u64) -> Report {
    let params = RandomParams::default();
    let names = [
        "implications",
        "agent_reduction",
        "duality",
        "replication_iff",
        "completeness",
        "price_properties",
        "decomposition",
        "self_financing",
    ];
    let mut tally: Vec<[usize; 3]> = vec![[0; 3]; names.len()];
    let mut failing: Option<Value> = None;
    for i in 0..count {
        let inst = random_instance(seed.wrapping_add(i as u64), &params);
        let checks = audit_instance(
            &inst.model,
            &inst.space,
            std::slice::from_ref(&inst.claim),
            false,
            inst.seed,
        );
        for c in &checks {
            if let Some(j) = names.iter().position(|n| *n == c.name) {
                tally[j][c.outcome as usize] += 1;
            }
        }
        let bad: Vec<&Check> = checks
            .iter()
            .filter(|c| c.outcome == Outcome::Fail)
            .collect();
        if failing.is_none() && !bad.is_empty() {
            let model = inst
                .model
                .clone()
                .with_exchanges(ExchangeConfig::Generators(inst.space.generators().to_vec()))
                .unwrap_or_else(|_| inst.model.clone());
            failing = Some(json!({
                "seed": inst.seed,
                "checks": checks_json(&checks),
                "market": market_json(&model),
                "claim": render::random_vector(&inst.model, &inst.claim),
            }));
        }
    }
    let mut summary = Map::new();
    for (name, [p, f, s]) in names.iter().zip(&tally) {
        summary.insert((*name).into(), json!({"pass": p, "fail": f, "skip": s}));
    }
    let mut body = Map::new();
    body.insert("instances".into(), json!(count));
    body.insert("seed".into(), json!(seed));
    body.insert("checks".into(), Value::Object(summary));
    let failed = failing.is_some();
    if let Some(f) = failing {
        body.insert("failing_instance".into(), f);
    }
    Report {
        status: Status::from_bool(!failed),
        body: Value::Object(body),
    }
}
