use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use colmkt_core::arbitrage::{
    check_na_agent, check_na_global, check_nca, collective_mm_polytope, extended_market,
    is_singleton, nca_interior_point, price_set, AnalysisError, PriceSetShape,
};
use colmkt_core::gains::{
    decomposed_value, lift_to_csf, value_process, AgentStrategy, CsfStrategy, GainsError,
};
use colmkt_core::hedging::{
    completeness, dual_super_price, price_gap, replicate, sub_price, super_price, Replication,
};
use colmkt_core::lp::{affine_dimension, enumerate_vertices, LpError};
use colmkt_core::market::{
    parse_exchanges, parse_market, read_random_vector, serialize_market, ExchangeConfig,
    ExchangeSchedule, MarketError,
};
use colmkt_core::rational::parse_rational;
use colmkt_core::{ExchangeSpace, MarketModel, RandomVector, Rational};
use serde_json::{json, Map, Value};

use crate::render;

#[derive(Debug, Clone)]
pub struct Options {
    pub exchanges: Option<String>,
    pub horizon: Option<String>,
    pub random: Option<String>,
    pub seed: u64,
    pub max_vertex_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Holds,
    Violated,
}

impl Status {
    pub fn from_bool(holds: bool) -> Self {
        if holds {
            Status::Holds
        } else {
            Status::Violated
        }
    }
}

#[derive(Debug)]
pub struct Report {
    pub status: Status,
    pub body: Value,
}

impl Report {
    fn new(status: Status, body: Value) -> Self {
        Self { status, body }
    }
}

#[derive(Debug)]
pub enum CliError {
    /// Bad file, flag or model: exit code 1.
    Input(String),
    /// An internal check failed: exit code 2.
    Failed(String),
}

impl From<MarketError> for CliError {
    fn from(e: MarketError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<GainsError> for CliError {
    fn from(e: GainsError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<LpError> for CliError {
    fn from(e: LpError) -> Self {
        match e {
            LpError::DimensionLimitExceeded { .. } => {
                CliError::Input(format!("{e}; raise it with --max-vertex-dim"))
            }
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Market(m) => m.into(),
            AnalysisError::Gains(g) => g.into(),
            AnalysisError::Lp(l) => l.into(),
            other => CliError::Failed(other.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn parse_json(path: &Path) -> Result<Value> {
    serde_json::from_str(&read(path)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn exchange_mode(model: &MarketModel, mode: &str) -> Result<ExchangeConfig> {
    if mode == "deterministic" {
        return Ok(ExchangeConfig::Deterministic);
    }
    if let Some(rest) = mode.strip_prefix("zero_sum_partition") {
        let time = rest
            .strip_prefix(":t=")
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| {
                CliError::Input(format!(
                    "expected zero_sum_partition:t=<time>, got \"{mode}\""
                ))
            })?;
        return Ok(ExchangeConfig::ZeroSumPartition { time });
    }
    Ok(parse_exchanges(model, &read(Path::new(mode))?)?)
}

pub fn parse_horizon(text: &str) -> Result<(usize, usize)> {
    let bad = || CliError::Input(format!("expected --horizon s:t, got \"{text}\""));
    let (s, t) = text.split_once(':').ok_or_else(bad)?;
    Ok((
        s.trim().parse().map_err(|_| bad())?,
        t.trim().parse().map_err(|_| bad())?,
    ))
}

/// Market with the exchange and horizon options applied.
pub fn load(path: &Path, opts: &Options) -> Result<(MarketModel, ExchangeSpace)> {
    let mut model = parse_market(&read(path)?)?;
    if let Some(mode) = &opts.exchanges {
        let config = exchange_mode(&model, mode)?;
        model = model.with_exchanges(config)?;
    }
    if let Some(h) = &opts.horizon {
        let (s, t) = parse_horizon(h)?;
        model = model.restrict_horizon(s, t)?;
    }
    let space = model.exchange_space()?;
    Ok((model, space))
}

/// `{"claim": [{atom: value, ...}, ...]}`, one map per agent; missing atoms
/// are zero.
pub fn load_claim(path: &Path, model: &MarketModel) -> Result<RandomVector> {
    let value = parse_json(path)?;
    let maps: Vec<BTreeMap<String, String>> = serde_json::from_value(
        value
            .get("claim")
            .cloned()
            .ok_or_else(|| CliError::Input(format!("{}: missing \"claim\"", path.display())))?,
    )
    .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    if maps.len() != model.agent_count() {
        return Err(CliError::Input(format!(
            "claim has {} components, the market has {} agents",
            maps.len(),
            model.agent_count()
        )));
    }
    let f = read_random_vector(model.atoms(), &maps, "claim")?;
    model.check_random_vector(&f, "claim")?;
    Ok(f)
}

fn describe_exchanges(model: &MarketModel) -> Value {
    match model.exchanges() {
        None | Some(ExchangeConfig::Deterministic) => json!("deterministic"),
        Some(ExchangeConfig::ZeroSumPartition { time }) => {
            json!(format!("zero_sum_partition:t={time}"))
        }
        Some(ExchangeConfig::Generators(g)) => json!(format!("generators ({})", g.len())),
    }
}

pub fn validate(model: &MarketModel) -> Report {
    let body = json!({
        "valid": true,
        "atoms": model.atom_count(),
        "horizon": model.horizon(),
        "assets": model.assets().iter().map(|a| a.name.clone()).collect::<Vec<_>>(),
        "agents": model.agents().iter().map(|a| a.name.clone()).collect::<Vec<_>>(),
        "exchanges": describe_exchanges(model),
    });
    Report::new(Status::Holds, body)
}

fn resolve_agent(model: &MarketModel, which: &str) -> Result<usize> {
    if let Some(i) = model.agents().iter().position(|a| a.name == which) {
        return Ok(i);
    }
    match which.parse::<usize>() {
        Ok(i) if (1..=model.agent_count()).contains(&i) => Ok(i - 1),
        _ => Err(CliError::Input(format!("unknown agent \"{which}\""))),
    }
}

pub fn na(model: &MarketModel, agent: Option<&str>) -> Result<Report> {
    if let Some(which) = agent {
        let i = resolve_agent(model, which)?;
        let r = check_na_agent(model, i)?;
        let mut body = Map::new();
        body.insert("agent".into(), json!(model.agent(i).name));
        if let Value::Object(m) = render::nca_report(model, &r, Some(i)) {
            body.extend(m);
        }
        return Ok(Report::new(Status::from_bool(r.holds), Value::Object(body)));
    }
    let global = model.global_model();
    let g = check_na_global(model)?;
    let mut agents = Map::new();
    for i in 0..model.agent_count() {
        let r = check_na_agent(model, i)?;
        agents.insert(model.agent(i).name.clone(), json!(r.holds));
    }
    let body = json!({
        "global": render::nca_report(&global, &g, Some(0)),
        "agents": agents,
    });
    Ok(Report::new(Status::from_bool(g.holds), body))
}

pub fn nca(model: &MarketModel, space: &ExchangeSpace) -> Result<Report> {
    let r = check_nca(model, space)?;
    let mut body = match render::nca_report(model, &r, None) {
        Value::Object(m) => m,
        _ => Map::new(),
    };
    if r.holds {
        body.insert("singleton".into(), json!(is_singleton(model, space)?));
    }
    Ok(Report::new(Status::from_bool(r.holds), Value::Object(body)))
}

/// `Some(report)` with the witness when collective arbitrage exists.
fn require_nca(model: &MarketModel, space: &ExchangeSpace) -> Result<Option<Report>> {
    let r = check_nca(model, space)?;
    if r.holds {
        return Ok(None);
    }
    Ok(Some(Report::new(
        Status::Violated,
        json!({
            "error": "the market admits a collective arbitrage",
            "nca": render::nca_report(model, &r, None),
        }),
    )))
}

pub fn measures(model: &MarketModel, space: &ExchangeSpace) -> Result<Report> {
    if let Some(r) = require_nca(model, space)? {
        return Ok(r);
    }
    let q = nca_interior_point(model, space)?
        .ok_or_else(|| CliError::Failed("no interior point despite NCA".into()))?;
    let poly = collective_mm_polytope(model, space);
    let dim = affine_dimension(&poly, &q.flatten())?;
    let body = json!({
        "holds": true,
        "interior_point": render::measure(model, &q),
        "dimension": dim,
        "singleton": is_singleton(model, space)?,
    });
    Ok(Report::new(Status::Holds, body))
}

pub fn vertices(model: &MarketModel, space: &ExchangeSpace, limit: usize) -> Result<Report> {
    let poly = collective_mm_polytope(model, space);
    let verts = enumerate_vertices(&poly, limit)?;
    let (n, k) = (model.agent_count(), model.atom_count());
    let full = verts
        .iter()
        .filter(|v| v.iter().all(|x| x > &Rational::from_integer(0.into())))
        .count();
    let listed: Vec<Value> = verts
        .iter()
        .map(|v| {
            render::measure(
                model,
                &colmkt_core::arbitrage::MeasureVector::from_flat(v, n, k),
            )
        })
        .collect();
    let body = json!({
        "count": verts.len(),
        "full_support": full,
        "vertices": listed,
    });
    Ok(Report::new(Status::from_bool(!verts.is_empty()), body))
}

pub fn superhedge(model: &MarketModel, space: &ExchangeSpace, f: &RandomVector) -> Result<Report> {
    if let Some(r) = require_nca(model, space)? {
        return Ok(r);
    }
    let (value, cert) = super_price(model, f, space)?;
    let (dual, q) = dual_super_price(model, f, space)?;
    let body = json!({
        "value": render::rational(&value),
        "dual_value": render::rational(&dual),
        "dual_measure": render::measure(model, &q),
        "certificate": render::certificate(model, &cert),
    });
    Ok(Report::new(Status::Holds, body))
}

pub fn subhedge(model: &MarketModel, space: &ExchangeSpace, f: &RandomVector) -> Result<Report> {
    if let Some(r) = require_nca(model, space)? {
        return Ok(r);
    }
    let (value, cert) = sub_price(model, f, space)?;
    let (dual, q) = dual_super_price(model, &f.neg(), space)?;
    let body = json!({
        "value": render::rational(&value),
        "dual_value": render::rational(&-dual),
        "dual_measure": render::measure(model, &q),
        "certificate": render::certificate(model, &cert),
    });
    Ok(Report::new(Status::Holds, body))
}

pub fn gap(model: &MarketModel, space: &ExchangeSpace, f: &RandomVector) -> Result<Report> {
    if let Some(r) = require_nca(model, space)? {
        return Ok(r);
    }
    let g = price_gap(model, f, space)?;
    let body = json!({
        "lower": render::rational(&g.lower),
        "upper": render::rational(&g.upper),
        "replicable": g.replicable,
    });
    Ok(Report::new(Status::Holds, body))
}

pub fn replication(model: &MarketModel, space: &ExchangeSpace, f: &RandomVector) -> Result<Report> {
    Ok(match replicate(model, f, space)? {
        Replication::Replicable(cert) => Report::new(
            Status::Holds,
            json!({"replicable": true, "certificate": render::certificate(model, &cert)}),
        ),
        Replication::NotReplicable { certificate } => {
            let y = RandomVector::from_flat(&certificate, model.agent_count(), model.atom_count());
            Report::new(
                Status::Violated,
                json!({"replicable": false, "separating_vector": render::random_vector(model, &y)}),
            )
        }
    })
}

pub fn complete(model: &MarketModel, space: &ExchangeSpace) -> Result<Report> {
    if let Some(r) = require_nca(model, space)? {
        return Ok(r);
    }
    let c = completeness(model, space)?;
    let body = json!({
        "complete": c.complete,
        "singleton": c.singleton,
        "indicators_replicable": c.indicators_replicable,
        "prices_coincide": c.prices_coincide,
    });
    Ok(Report::new(Status::from_bool(c.complete), body))
}

pub fn priceset(
    model: &MarketModel,
    space: &ExchangeSpace,
    f: &RandomVector,
    limit: usize,
) -> Result<Report> {
    if let Some(r) = require_nca(model, space)? {
        return Ok(r);
    }
    let set = price_set(model, f, space, limit)?;
    let vertices = match &set.closure_vertices {
        Some(vs) => Value::Array(vs.iter().map(|p| render::agent_cash(model, p)).collect()),
        None => Value::Null,
    };
    let body = json!({
        "sum_range": [render::rational(&set.sum_range.0), render::rational(&set.sum_range.1)],
        "replicable": set.replicable,
        "shape": match set.shape {
            PriceSetShape::Point => "point",
            PriceSetShape::Unresolved => "unresolved",
        },
        "closure_vertices": vertices,
    });
    Ok(Report::new(Status::Holds, body))
}

pub fn extend(model: &MarketModel, space: &ExchangeSpace, f: &RandomVector) -> Result<Report> {
    if let Some(r) = require_nca(model, space)? {
        return Ok(r);
    }
    let q = nca_interior_point(model, space)?
        .ok_or_else(|| CliError::Failed("no interior point despite NCA".into()))?;
    let ext = extended_market(model, space, f, &q)?;
    let first = model.assets().len();
    let prices: Vec<Rational> = (0..model.agent_count())
        .map(|i| ext.price(first + i, 0, 0).clone())
        .collect();
    let market: Value = serde_json::from_str(&serialize_market(&ext))
        .map_err(|e| CliError::Failed(e.to_string()))?;
    let body = json!({
        "initial_prices": render::agent_cash(model, &prices),
        "measure": render::measure(model, &q),
        "market": market,
    });
    Ok(Report::new(Status::Holds, body))
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key)
        .ok_or_else(|| CliError::Input(format!("missing \"{key}\"")))
}

fn text_rational(v: &Value, what: &str) -> Result<Rational> {
    let s = v
        .as_str()
        .ok_or_else(|| CliError::Input(format!("{what}: expected a \"p/q\" string")))?;
    parse_rational(s).map_err(|e| CliError::Input(format!("{what}: {e}")))
}

fn atom_index(model: &MarketModel, v: &Value, what: &str) -> Result<usize> {
    v.as_str()
        .and_then(|a| model.atom_index(a))
        .ok_or_else(|| CliError::Input(format!("{what}: unknown atom {v}")))
}

fn usize_field(v: &Value, key: &str) -> Result<usize> {
    field(v, key)?
        .as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| CliError::Input(format!("\"{key}\" must be a non-negative integer")))
}

/// Initial wealth, risky holdings, exchange schedule and the full strategy
/// when riskless positions are given explicitly.
type CsfInput = (
    Vec<Rational>,
    Vec<AgentStrategy>,
    ExchangeSchedule,
    Option<CsfStrategy>,
);

/// Reads `{"v0", "holdings", "schedule", "riskless"?}`; see the README for
/// the layout.
fn csf_input(model: &MarketModel, v: &Value) -> Result<CsfInput> {
    let n = model.agent_count();
    let per_agent = |key: &str| -> Result<Vec<Value>> {
        let xs = field(v, key)?
            .as_array()
            .cloned()
            .ok_or_else(|| CliError::Input(format!("\"{key}\" must be a list")))?;
        if xs.len() != n {
            return Err(CliError::Input(format!(
                "\"{key}\" needs one entry per agent"
            )));
        }
        Ok(xs)
    };
    let v0 = per_agent("v0")?
        .iter()
        .map(|x| text_rational(x, "v0"))
        .collect::<Result<Vec<_>>>()?;
    let mut risky = vec![AgentStrategy::new(); n];
    for (i, entries) in per_agent("holdings")?.iter().enumerate() {
        for h in entries.as_array().cloned().unwrap_or_default() {
            let t = usize_field(&h, "time")?;
            if !(1..=model.horizon()).contains(&t) {
                return Err(CliError::Input(format!("holding time {t} out of range")));
            }
            let atom = atom_index(model, field(&h, "atom")?, "holding")?;
            let asset = usize_field(&h, "asset")?;
            if !(1..=model.assets().len()).contains(&asset) {
                return Err(CliError::Input(format!("unknown asset {asset}")));
            }
            let block = model.agent(i).filtration.at(t - 1).block_of(atom);
            risky[i].set(
                t,
                block,
                asset - 1,
                text_rational(field(&h, "amount")?, "amount")?,
            );
        }
    }
    let schedule = match v.get("schedule") {
        None => ExchangeSchedule::zero(model),
        Some(s) => {
            let steps = s
                .as_array()
                .ok_or_else(|| CliError::Input("\"schedule\" must be a list".into()))?;
            let per_time = steps
                .iter()
                .enumerate()
                .map(|(t, step)| {
                    let maps: Vec<BTreeMap<String, String>> = serde_json::from_value(step.clone())
                        .map_err(|e| CliError::Input(format!("schedule: {e}")))?;
                    if maps.len() != n {
                        return Err(CliError::Input(format!(
                            "schedule step {} needs one map per agent",
                            t + 1
                        )));
                    }
                    Ok(read_random_vector(model.atoms(), &maps, "schedule")?)
                })
                .collect::<Result<Vec<_>>>()?;
            ExchangeSchedule::new(model, per_time)?
        }
    };
    let given = match v.get("riskless") {
        None => None,
        Some(r) => {
            let xs = r
                .as_array()
                .filter(|xs| xs.len() == n)
                .ok_or_else(|| CliError::Input("\"riskless\" needs one list per agent".into()))?;
            let mut riskless = vec![BTreeMap::new(); n];
            for (i, entries) in xs.iter().enumerate() {
                for h in entries.as_array().cloned().unwrap_or_default() {
                    let t = usize_field(&h, "time")?;
                    if !(1..=model.horizon()).contains(&t) {
                        return Err(CliError::Input(format!("riskless time {t} out of range")));
                    }
                    let atom = atom_index(model, field(&h, "atom")?, "riskless")?;
                    let block = model.agent(i).filtration.at(t - 1).block_of(atom);
                    riskless[i].insert((t, block), text_rational(field(&h, "amount")?, "amount")?);
                }
            }
            Some(CsfStrategy {
                risky: risky.clone(),
                riskless,
                initial_wealth: v0.clone(),
            })
        }
    };
    Ok((v0, risky, schedule, given))
}

pub fn csf_roll(model: &MarketModel, path: &Path) -> Result<Report> {
    let input = parse_json(path)?;
    let (v0, risky, schedule, given) = csf_input(model, &input)?;
    let csf = match given {
        Some(c) => c,
        None => lift_to_csf(model, &v0, &risky, &schedule)?,
    };
    let values = match value_process(model, &csf, &schedule) {
        Ok(v) => v,
        Err(e @ GainsError::CsfViolation { .. }) => {
            return Ok(Report::new(
                Status::Violated,
                json!({"self_financing": false, "error": e.to_string()}),
            ))
        }
        Err(e) => return Err(e.into()),
    };
    let direct = decomposed_value(model, &v0, &risky, &schedule)?;
    if direct != values {
        return Err(CliError::Failed(
            "value process differs from initial wealth plus gains plus exchanges".into(),
        ));
    }
    let mut per_agent = Map::new();
    for (i, spec) in model.agents().iter().enumerate() {
        let mut times = Map::new();
        for t in 0..=model.horizon() {
            times.insert(
                format!("t{t}"),
                render::atom_map(model, &values.values[i][t]),
            );
        }
        let riskless: Vec<Value> = csf.riskless[i]
            .iter()
            .map(|((t, b), amount)| {
                let block: Vec<&String> = spec.filtration.at(t - 1).blocks()[*b]
                    .iter()
                    .map(|&a| &model.atoms()[a])
                    .collect();
                json!({"time": t, "block": block, "amount": render::rational(amount)})
            })
            .collect();
        per_agent.insert(
            spec.name.clone(),
            json!({"values": times, "riskless": riskless}),
        );
    }
    Ok(Report::new(
        Status::Holds,
        json!({"self_financing": true, "agents": per_agent}),
    ))
}
