//! JSON building blocks and the plain-text table view of a report.

use colmkt_core::arbitrage::{ArbitrageWitness, MeasureVector, NcaReport};
use colmkt_core::gains::AgentStrategy;
use colmkt_core::hedging::HedgeCertificate;
use colmkt_core::rational::format_rational;
use colmkt_core::{MarketModel, RandomVector, Rational};
use serde_json::{json, Map, Value};

pub fn rational(x: &Rational) -> Value {
    Value::String(format_rational(x))
}

pub fn rationals(xs: &[Rational]) -> Value {
    Value::Array(xs.iter().map(rational).collect())
}

/// Atom-keyed map in atom order.
pub fn atom_map(model: &MarketModel, values: &[Rational]) -> Value {
    let mut map = Map::new();
    for (a, v) in model.atoms().iter().zip(values) {
        map.insert(a.clone(), rational(v));
    }
    Value::Object(map)
}

/// Agent-keyed map of per-agent values.
pub fn per_agent(model: &MarketModel, values: impl IntoIterator<Item = Value>) -> Value {
    let mut map = Map::new();
    for (spec, v) in model.agents().iter().zip(values) {
        map.insert(spec.name.clone(), v);
    }
    Value::Object(map)
}

pub fn random_vector(model: &MarketModel, y: &RandomVector) -> Value {
    per_agent(model, y.components().iter().map(|c| atom_map(model, c)))
}

pub fn measure(model: &MarketModel, q: &MeasureVector) -> Value {
    per_agent(model, q.per_agent.iter().map(|c| atom_map(model, c)))
}

pub fn agent_cash(model: &MarketModel, xs: &[Rational]) -> Value {
    per_agent(model, xs.iter().map(rational))
}

pub fn strategy(model: &MarketModel, agent: usize, h: &AgentStrategy) -> Value {
    let filtration = &model.agent(agent).filtration;
    Value::Array(
        h.holdings
            .iter()
            .map(|(key, amount)| {
                let block: Vec<Value> = filtration.at(key.time - 1).blocks()[key.block]
                    .iter()
                    .map(|&a| Value::String(model.atoms()[a].clone()))
                    .collect();
                json!({
                    "time": key.time,
                    "block": block,
                    "asset": model.assets()[key.asset].name,
                    "amount": rational(amount),
                })
            })
            .collect(),
    )
}

pub fn strategies(model: &MarketModel, hs: &[AgentStrategy]) -> Value {
    per_agent(
        model,
        hs.iter().enumerate().map(|(i, h)| strategy(model, i, h)),
    )
}

pub fn witness(model: &MarketModel, w: &ArbitrageWitness) -> Value {
    json!({
        "outcome": random_vector(model, &w.outcome),
        "strategies": strategies(model, &w.strategies),
        "exchange": random_vector(model, &w.exchange),
        "exchange_coefficients": rationals(&w.exchange_coefficients),
        "cash_transfer": agent_cash(model, &w.transfer),
    })
}

/// Verdict with the measure (single-agent reports use `measure_agent`).
pub fn nca_report(model: &MarketModel, r: &NcaReport, measure_agent: Option<usize>) -> Value {
    let mut map = Map::new();
    map.insert("holds".into(), Value::Bool(r.holds));
    map.insert("max_t".into(), rational(&r.max_t));
    if let Some(q) = &r.measure {
        let value = match measure_agent {
            Some(i) => {
                let mut m = Map::new();
                m.insert(
                    model.agent(i).name.clone(),
                    atom_map(model, &q.per_agent[0]),
                );
                Value::Object(m)
            }
            None => measure(model, q),
        };
        map.insert("measure".into(), value);
    }
    if let Some(w) = &r.witness {
        map.insert("witness".into(), witness(model, w));
    }
    Value::Object(map)
}

pub fn certificate(model: &MarketModel, c: &HedgeCertificate) -> Value {
    json!({
        "cash": agent_cash(model, &c.transfer),
        "strategies": strategies(model, &c.strategies),
        "exchange": random_vector(model, &c.exchange),
        "exchange_coefficients": rationals(&c.exchange_coefficients),
        "slack": random_vector(model, &c.slack),
    })
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("-".into()),
        Value::Bool(b) => Some(if *b { "yes".into() } else { "no".into() }),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        Value::Array(xs) if xs.iter().all(|x| !x.is_object() && !x.is_array()) => Some(format!(
            "[{}]",
            xs.iter()
                .map(|x| scalar(x).unwrap_or_default())
                .collect::<Vec<_>>()
                .join(", ")
        )),
        // flat atom maps print on one line
        Value::Object(m) if !m.is_empty() && m.values().all(Value::is_string) => Some(
            m.iter()
                .map(|(k, v)| format!("{k}={}", v.as_str().unwrap_or_default()))
                .collect::<Vec<_>>()
                .join("  "),
        ),
        _ => None,
    }
}

fn table_into(v: &Value, indent: usize, out: &mut String) {
    let pad = " ".repeat(indent);
    match v {
        Value::Object(map) => {
            let width = map.keys().map(String::len).max().unwrap_or(0);
            for (k, x) in map {
                match scalar(x) {
                    Some(s) => out.push_str(&format!("{pad}{k:<width$}  {s}\n")),
                    None => {
                        out.push_str(&format!("{pad}{k}\n"));
                        table_into(x, indent + 2, out);
                    }
                }
            }
        }
        Value::Array(xs) => {
            for x in xs {
                match scalar(x) {
                    Some(s) => out.push_str(&format!("{pad}- {s}\n")),
                    None => {
                        out.push_str(&format!("{pad}-\n"));
                        table_into(x, indent + 2, out);
                    }
                }
            }
        }
        other => out.push_str(&format!("{pad}{}\n", scalar(other).unwrap_or_default())),
    }
}

pub fn table(v: &Value) -> String {
    let mut out = String::new();
    table_into(v, 0, &mut out);
    out
}
