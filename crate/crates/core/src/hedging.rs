//! Collective super- and sub-hedging prices, replication and completeness.
//!
//! The super-hedging LP is posed with a single scalar `a`: the group holds
//! `a` in cash each, trades, and exchanges; deterministic redistributions are
//! part of the exchange space, so the least total endowment is `N * a`.

use num_traits::{One, Signed, Zero};

use crate::arbitrage::{
    agent_mm_polytope, collective_mm_polytope, is_singleton, max_min_point, nca_interior_point,
    AnalysisError, MeasureVector, Result, SpanLayout,
};
use crate::gains::{gains_basis, AgentStrategy};
use crate::lp::{
    independent_subset, solve_linear_system, solve_lp, LinearProgram, LinearSystem, LpResult, Sense,
};
use crate::market::{indicator_claim, ExchangeSpace, MarketModel, RandomVector};
use crate::rational::{dot, Rational};

/// How a claim is dominated (or matched) by cash, trading and exchanges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HedgeCertificate {
    /// Initial cash per agent.
    pub transfer: Vec<Rational>,
    pub strategies: Vec<AgentStrategy>,
    pub exchange_coefficients: Vec<Rational>,
    /// Deterministic zero-sum part of the exchange.
    pub deterministic_transfer: Vec<Rational>,
    /// The realized exchange `Y`.
    pub exchange: RandomVector,
    /// `transfer + gains + exchange - f`.
    pub slack: RandomVector,
}

impl HedgeCertificate {
    fn negated(&self) -> Self {
        let neg = |v: &[Rational]| v.iter().map(|x| -x).collect::<Vec<_>>();
        Self {
            transfer: neg(&self.transfer),
            strategies: self
                .strategies
                .iter()
                .map(|s| s.scaled(&-Rational::one()))
                .collect(),
            exchange_coefficients: neg(&self.exchange_coefficients),
            deterministic_transfer: neg(&self.deterministic_transfer),
            exchange: self.exchange.neg(),
            slack: self.slack.neg(),
        }
    }
}

fn require_nca(model: &MarketModel, space: &ExchangeSpace) -> Result<()> {
    match nca_interior_point(model, space)? {
        Some(_) => Ok(()),
        None => Err(AnalysisError::NcaViolated),
    }
}

fn certificate(
    model: &MarketModel,
    layout: &SpanLayout,
    transfer: Vec<Rational>,
    coefficients: &[Rational],
    f: &RandomVector,
) -> HedgeCertificate {
    let d = layout.decode(coefficients);
    let total = RandomVector::constant(&transfer, model.atom_count())
        .add(&d.gains)
        .add(&d.exchange);
    HedgeCertificate {
        transfer,
        strategies: d.strategies,
        exchange_coefficients: d.exchange_coefficients,
        deterministic_transfer: d.transfer,
        exchange: d.exchange,
        slack: total.sub(f),
    }
}

/// Least total cash `sum m_i` such that `m + k + Y >= f` for some gains `k`
/// and exchange `Y`, with an attaining certificate where every agent holds
/// the same cash `rho / N`.
pub fn super_price(
    model: &MarketModel,
    f: &RandomVector,
    space: &ExchangeSpace,
) -> Result<(Rational, HedgeCertificate)> {
    model.check_random_vector(f, "claim")?;
    require_nca(model, space)?;
    let layout = SpanLayout::new(model, space, true);
    let columns = layout.columns();
    let keep = independent_subset(&columns);
    let mut lp = LinearProgram::new(1 + keep.len(), Sense::Minimize);
    let mut objective = vec![Rational::zero(); 1 + keep.len()];
    objective[0] = Rational::one();
    lp.set_objective(objective);
    let target = f.flatten();
    for (r, fr) in target.iter().enumerate() {
        let mut row = Vec::with_capacity(1 + keep.len());
        row.push(Rational::one());
        row.extend(keep.iter().map(|&c| columns[c][r].clone()));
        lp.add_ge(row, fr.clone());
    }
    let opt = match solve_lp(&lp)? {
        LpResult::Optimal(opt) => opt,
        LpResult::Unbounded(_) => return Err(AnalysisError::NcaViolated),
        LpResult::Infeasible(_) => {
            return Err(AnalysisError::InternalInconsistency(
                "super-hedging LP infeasible".into(),
            ))
        }
    };
    let a = opt.primal[0].clone();
    let mut coefficients = vec![Rational::zero(); columns.len()];
    for (&c, v) in keep.iter().zip(&opt.primal[1..]) {
        coefficients[c] = v.clone();
    }
    let n = model.agent_count();
    let cert = certificate(model, &layout, vec![a.clone(); n], &coefficients, f);
    if !cert.slack.is_nonnegative() {
        return Err(AnalysisError::InternalInconsistency(
            "super-hedge has negative slack".into(),
        ));
    }
    Ok((a * Rational::from_integer(n.into()), cert))
}

/// Same price with an unrestricted cash vector `m`; kept as a cross-check of
/// the equal-cash form.
pub fn super_price_general(
    model: &MarketModel,
    f: &RandomVector,
    space: &ExchangeSpace,
) -> Result<Rational> {
    model.check_random_vector(f, "claim")?;
    require_nca(model, space)?;
    let (n, k) = (model.agent_count(), model.atom_count());
    let layout = SpanLayout::new(model, space, false);
    let columns = layout.columns();
    let keep = independent_subset(&columns);
    let mut lp = LinearProgram::new(n + keep.len(), Sense::Minimize);
    let mut objective = vec![Rational::zero(); n + keep.len()];
    for o in objective.iter_mut().take(n) {
        *o = Rational::one();
    }
    lp.set_objective(objective);
    for (r, fr) in f.flatten().iter().enumerate() {
        let mut row = vec![Rational::zero(); n];
        row[r / k] = Rational::one();
        row.extend(keep.iter().map(|&c| columns[c][r].clone()));
        lp.add_ge(row, fr.clone());
    }
    match solve_lp(&lp)? {
        LpResult::Optimal(opt) => Ok(opt.value),
        LpResult::Unbounded(_) => Err(AnalysisError::NcaViolated),
        LpResult::Infeasible(_) => Err(AnalysisError::InternalInconsistency(
            "super-hedging LP infeasible".into(),
        )),
    }
}

/// `-super_price(-f)`, with the certificate negated so that its slack is
/// nonpositive.
pub fn sub_price(
    model: &MarketModel,
    f: &RandomVector,
    space: &ExchangeSpace,
) -> Result<(Rational, HedgeCertificate)> {
    let (value, cert) = super_price(model, &f.neg(), space)?;
    Ok((-value, cert.negated()))
}

/// `max sum_i E_{Q^i}[f^i]` over the closed collective measure polytope.
pub fn dual_super_price(
    model: &MarketModel,
    f: &RandomVector,
    space: &ExchangeSpace,
) -> Result<(Rational, MeasureVector)> {
    model.check_random_vector(f, "claim")?;
    require_nca(model, space)?;
    let poly = collective_mm_polytope(model, space);
    let lp = poly.to_lp(f.flatten(), Sense::Maximize, 0);
    match solve_lp(&lp)? {
        LpResult::Optimal(opt) => Ok((
            opt.value,
            MeasureVector::from_flat(&opt.primal, model.agent_count(), model.atom_count()),
        )),
        other => Err(AnalysisError::InternalInconsistency(format!(
            "dual pricing LP is {}",
            other.status()
        ))),
    }
}

fn require_na(model: &MarketModel, agent: usize) -> Result<()> {
    match max_min_point(&agent_mm_polytope(model, agent))? {
        Some((t, _)) if t.is_positive() => Ok(()),
        _ => Err(AnalysisError::NaViolated(agent)),
    }
}

/// Single-agent super-hedging price `min m` with `m + k >= g`, `k` a gain of
/// the agent.
pub fn classical_super_price(
    model: &MarketModel,
    agent: usize,
    g: &[Rational],
) -> Result<Rational> {
    require_na(model, agent)?;
    let basis = gains_basis(model, agent);
    let keep = independent_subset(&basis.generators);
    let mut lp = LinearProgram::new(1 + keep.len(), Sense::Minimize);
    let mut objective = vec![Rational::zero(); 1 + keep.len()];
    objective[0] = Rational::one();
    lp.set_objective(objective);
    for (a, ga) in g.iter().enumerate() {
        let mut row = vec![Rational::one()];
        row.extend(keep.iter().map(|&c| basis.generators[c][a].clone()));
        lp.add_ge(row, ga.clone());
    }
    match solve_lp(&lp)? {
        LpResult::Optimal(opt) => Ok(opt.value),
        LpResult::Unbounded(_) => Err(AnalysisError::NaViolated(agent)),
        LpResult::Infeasible(_) => Err(AnalysisError::InternalInconsistency(
            "classical LP infeasible".into(),
        )),
    }
}

/// `max E_Q[g]` over the agent's closed martingale polytope.
pub fn classical_dual_super_price(
    model: &MarketModel,
    agent: usize,
    g: &[Rational],
) -> Result<Rational> {
    require_na(model, agent)?;
    let lp = agent_mm_polytope(model, agent).to_lp(g.to_vec(), Sense::Maximize, 0);
    match solve_lp(&lp)? {
        LpResult::Optimal(opt) => Ok(opt.value),
        other => Err(AnalysisError::InternalInconsistency(format!(
            "classical dual LP is {}",
            other.status()
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecompositionReport {
    pub total: Rational,
    pub per_agent: Vec<Rational>,
    pub transfer: Vec<Rational>,
}

/// With only deterministic transfers the collective price splits into the
/// sum of the agents' own super-hedging prices.
pub fn decomposition_check(model: &MarketModel, f: &RandomVector) -> Result<DecompositionReport> {
    let n = model.agent_count();
    let per_agent = (0..n)
        .map(|i| classical_super_price(model, i, f.component(i)))
        .collect::<Result<Vec<_>>>()?;
    let (total, cert) = super_price(model, f, &ExchangeSpace::deterministic(n))?;
    let sum: Rational = per_agent.iter().sum();
    if sum != total {
        return Err(AnalysisError::DecompositionViolated(format!(
            "collective price {total} differs from the sum of agent prices {sum}"
        )));
    }
    let share = &total / Rational::from_integer(n.into());
    if cert.transfer.iter().any(|m| m != &share) {
        return Err(AnalysisError::DecompositionViolated(
            "certificate cash is not equal across agents".into(),
        ));
    }
    Ok(DecompositionReport {
        total,
        per_agent,
        transfer: cert.transfer,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Replication {
    Replicable(HedgeCertificate),
    /// `y` with `y . column = 0` for every spanning column and `y . f != 0`,
    /// indexed `(agent, atom)`.
    NotReplicable {
        certificate: Vec<Rational>,
    },
}

impl Replication {
    pub fn is_replicable(&self) -> bool {
        matches!(self, Replication::Replicable(_))
    }
}

/// Matrix of the system `m + k + Y = f`: rows `(agent, atom)`, columns the
/// per-agent cash, then gains and exchange generators.
pub fn replication_system(
    model: &MarketModel,
    space: &ExchangeSpace,
) -> (Vec<Vec<Rational>>, SpanLayout) {
    let (n, k) = (model.agent_count(), model.atom_count());
    let layout = SpanLayout::new(model, space, false);
    let columns = layout.columns();
    let rows = (0..n * k)
        .map(|r| {
            let mut row = vec![Rational::zero(); n];
            row[r / k] = Rational::one();
            row.extend(columns.iter().map(|c| c[r].clone()));
            row
        })
        .collect();
    (rows, layout)
}

/// Exact replication `f = m + k + Y`, or a certificate that none exists.
pub fn replicate(
    model: &MarketModel,
    f: &RandomVector,
    space: &ExchangeSpace,
) -> Result<Replication> {
    model.check_random_vector(f, "claim")?;
    let n = model.agent_count();
    let (matrix, layout) = replication_system(model, space);
    let cols = n + layout.len();
    match solve_linear_system(&matrix, &f.flatten(), cols)? {
        LinearSystem::Feasible { particular, .. } => {
            let cert = certificate(
                model,
                &layout,
                particular[..n].to_vec(),
                &particular[n..],
                f,
            );
            if !cert.slack.is_zero() {
                return Err(AnalysisError::InternalInconsistency(
                    "replication leaves slack".into(),
                ));
            }
            Ok(Replication::Replicable(cert))
        }
        LinearSystem::Infeasible { certificate } => Ok(Replication::NotReplicable { certificate }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriceGap {
    pub lower: Rational,
    pub upper: Rational,
    pub replicable: bool,
}

/// Sub- and super-hedging prices with the replication verdict, checking that
/// the claim is replicable exactly when the two prices meet and that a
/// non-replicable claim's upper price is attained by no equivalent measure.
pub fn price_gap(model: &MarketModel, f: &RandomVector, space: &ExchangeSpace) -> Result<PriceGap> {
    let (upper, _) = super_price(model, f, space)?;
    let (lower, _) = sub_price(model, f, space)?;
    let replicable = replicate(model, f, space)?.is_replicable();
    if replicable != (lower == upper) {
        return Err(AnalysisError::IffViolated(format!(
            "replicable = {replicable} but prices are {lower} and {upper}"
        )));
    }
    if !replicable {
        if lower > upper {
            return Err(AnalysisError::IffViolated(
                "lower price exceeds upper price".into(),
            ));
        }
        if upper_attained_by_equivalent_measure(model, f, space, &upper)? {
            return Err(AnalysisError::IffViolated(
                "upper price of a non-replicable claim is attained by an equivalent measure".into(),
            ));
        }
    }
    Ok(PriceGap {
        lower,
        upper,
        replicable,
    })
}

/// Whether some strictly positive point of the measure polytope prices the
/// claim at `upper`.
pub fn upper_attained_by_equivalent_measure(
    model: &MarketModel,
    f: &RandomVector,
    space: &ExchangeSpace,
    upper: &Rational,
) -> Result<bool> {
    let mut face = collective_mm_polytope(model, space);
    face.add_eq(f.flatten(), upper.clone());
    Ok(matches!(max_min_point(&face)?, Some((t, _)) if t.is_positive()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletenessReport {
    pub complete: bool,
    /// Exactly one collective measure.
    pub singleton: bool,
    /// Every single-agent indicator claim is replicable.
    pub indicators_replicable: bool,
    /// Sub- and super-hedging prices agree on a spanning family of claims.
    pub prices_coincide: bool,
}

/// Indicator claims `1_A e_j` over the terminal blocks of every agent.
pub fn indicator_basis(model: &MarketModel) -> Result<Vec<RandomVector>> {
    let mut out = Vec::new();
    for (j, spec) in model.agents().iter().enumerate() {
        for block in spec.filtration.at(model.horizon()).blocks() {
            out.push(indicator_claim(model, j, block)?);
        }
    }
    Ok(out)
}

/// Completeness decided three ways, which must agree.
pub fn completeness(model: &MarketModel, space: &ExchangeSpace) -> Result<CompletenessReport> {
    let singleton = is_singleton(model, space)?;
    let basis = indicator_basis(model)?;
    let mut indicators_replicable = true;
    for f in &basis {
        if !replicate(model, f, space)?.is_replicable() {
            indicators_replicable = false;
            break;
        }
    }
    let mut prices_coincide = true;
    for f in basis.iter().chain(space.generators()) {
        let (upper, _) = super_price(model, f, space)?;
        let (lower, _) = sub_price(model, f, space)?;
        if upper != lower {
            prices_coincide = false;
            break;
        }
    }
    if singleton != indicators_replicable {
        return Err(AnalysisError::EquivalenceViolated(
            "unique measure vs indicator replication".into(),
        ));
    }
    if indicators_replicable != prices_coincide {
        return Err(AnalysisError::EquivalenceViolated(
            "indicator replication vs price equality".into(),
        ));
    }
    Ok(CompletenessReport {
        complete: singleton,
        singleton,
        indicators_replicable,
        prices_coincide,
    })
}

/// `E` under each agent's measure, summed.
pub fn total_expectation(q: &MeasureVector, f: &RandomVector) -> Rational {
    q.per_agent
        .iter()
        .zip(f.components())
        .map(|(qi, fi)| dot(qi, fi))
        .sum()
}
