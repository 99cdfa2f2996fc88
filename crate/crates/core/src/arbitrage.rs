//! Arbitrage detection for single agents, the global market and the
//! collective of agents, and the martingale measure polytopes on the dual
//! side.
//!
//! Every verdict is computed twice: once through measures (a max-min LP over
//! the polytope) and once through strategies (an LP looking for a nonnegative
//! nonzero outcome). Disagreement is reported as an engine error.

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};

use crate::gains::{gains_basis, AgentStrategy, GainsBasis, GainsError};
use crate::hedging;
use crate::lp::{
    affine_dimension, enumerate_vertices, independent_subset, solve_lp, LinearProgram, LpError,
    LpResult, Polytope, Sense,
};
use crate::market::{Asset, ExchangeSpace, MarketError, MarketModel, RandomVector};
use crate::rational::{dot, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Gains(#[from] GainsError),
    #[error("no collective martingale measure exists: the market admits a collective arbitrage")]
    NcaViolated,
    #[error("agent {0} has an arbitrage opportunity")]
    NaViolated(usize),
    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),
    #[error("implication violated: {0}")]
    ImplicationViolated(String),
    #[error("measure is not a collective martingale measure: {0}")]
    MeasureNotCollectiveMartingale(String),
    #[error("decomposition violated: {0}")]
    DecompositionViolated(String),
    #[error("replication and price equality disagree: {0}")]
    IffViolated(String),
    #[error("completeness tests disagree: {0}")]
    EquivalenceViolated(String),
}

pub type Result<T, E = AnalysisError> = std::result::Result<T, E>;

/// One probability vector per agent.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct MeasureVector {
    pub per_agent: Vec<Vec<Rational>>,
}

impl MeasureVector {
    pub fn from_flat(flat: &[Rational], agents: usize, atoms: usize) -> Self {
        Self {
            per_agent: flat
                .chunks(atoms)
                .take(agents)
                .map(<[Rational]>::to_vec)
                .collect(),
        }
    }

    pub fn flatten(&self) -> Vec<Rational> {
        self.per_agent.iter().flatten().cloned().collect()
    }

    /// Every weight strictly positive.
    pub fn is_equivalent(&self) -> bool {
        self.per_agent.iter().flatten().all(Signed::is_positive)
    }

    /// `(E_{Q^i}[f^i])_i`.
    pub fn expectations(&self, f: &RandomVector) -> Vec<Rational> {
        self.per_agent
            .iter()
            .zip(f.components())
            .map(|(q, fi)| dot(q, fi))
            .collect()
    }

    /// `Q^i(. | B)` for each block `B` of the agents' common initial partition.
    pub fn conditional(&self, model: &MarketModel) -> Vec<Vec<(Vec<usize>, Vec<Rational>)>> {
        let blocks = model.initial_blocks();
        self.per_agent
            .iter()
            .map(|q| {
                blocks
                    .blocks()
                    .iter()
                    .map(|b| {
                        let mass: Rational = b.iter().map(|&a| &q[a]).sum();
                        let cond = b
                            .iter()
                            .map(|&a| {
                                if mass.is_zero() {
                                    Rational::zero()
                                } else {
                                    &q[a] / &mass
                                }
                            })
                            .collect();
                        (b.clone(), cond)
                    })
                    .collect()
            })
            .collect()
    }
}

/// Gains plus exchange that is nonnegative for everyone and positive
/// somewhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArbitrageWitness {
    pub strategies: Vec<AgentStrategy>,
    /// Coefficients on the exchange generators in use.
    pub exchange_coefficients: Vec<Rational>,
    /// Deterministic zero-sum transfer.
    pub transfer: Vec<Rational>,
    /// The realized exchange `Y`.
    pub exchange: RandomVector,
    pub outcome: RandomVector,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NcaReport {
    pub holds: bool,
    /// Optimal value of the max-min LP, zero when the polytope is empty.
    pub max_t: Rational,
    pub measure: Option<MeasureVector>,
    pub witness: Option<ArbitrageWitness>,
}

/// Column layout for "gains of every agent plus exchanges" as flat vectors
/// indexed `(agent, atom)`.
#[derive(Debug, Clone)]
pub struct SpanLayout {
    pub agents: usize,
    pub atoms: usize,
    pub bases: Vec<GainsBasis>,
    pub generators: Vec<RandomVector>,
    /// Include the deterministic zero-sum transfer columns `e_i - e_N`.
    pub transfers: bool,
}

/// A coefficient vector split back into its economic parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedSpan {
    pub strategies: Vec<AgentStrategy>,
    pub exchange_coefficients: Vec<Rational>,
    pub transfer: Vec<Rational>,
    pub gains: RandomVector,
    pub exchange: RandomVector,
}

impl SpanLayout {
    pub fn new(model: &MarketModel, space: &ExchangeSpace, transfers: bool) -> Self {
        Self {
            agents: model.agent_count(),
            atoms: model.atom_count(),
            bases: (0..model.agent_count())
                .map(|i| gains_basis(model, i))
                .collect(),
            generators: space.effective_generators(model),
            transfers,
        }
    }

    /// Only agent `agent`'s gains, no exchanges.
    pub fn single_agent(model: &MarketModel, agent: usize) -> Self {
        let mut bases: Vec<GainsBasis> = (0..model.agent_count())
            .map(|i| GainsBasis {
                agent: i,
                keys: Vec::new(),
                generators: Vec::new(),
            })
            .collect();
        bases[agent] = gains_basis(model, agent);
        Self {
            agents: model.agent_count(),
            atoms: model.atom_count(),
            bases,
            generators: Vec::new(),
            transfers: false,
        }
    }

    fn transfer_count(&self) -> usize {
        if self.transfers {
            self.agents.saturating_sub(1)
        } else {
            0
        }
    }

    pub fn len(&self) -> usize {
        self.bases.iter().map(|b| b.keys.len()).sum::<usize>()
            + self.generators.len()
            + self.transfer_count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn columns(&self) -> Vec<Vec<Rational>> {
        let (n, k) = (self.agents, self.atoms);
        let mut cols = Vec::with_capacity(self.len());
        for basis in &self.bases {
            for g in &basis.generators {
                let mut c = vec![Rational::zero(); n * k];
                c[basis.agent * k..(basis.agent + 1) * k].clone_from_slice(g);
                cols.push(c);
            }
        }
        for g in &self.generators {
            cols.push(g.flatten());
        }
        for i in 0..self.transfer_count() {
            let mut c = vec![Rational::zero(); n * k];
            for a in 0..k {
                c[i * k + a] = Rational::one();
                c[(n - 1) * k + a] = -Rational::one();
            }
            cols.push(c);
        }
        cols
    }

    pub fn decode(&self, coefficients: &[Rational]) -> DecodedSpan {
        let (n, k) = (self.agents, self.atoms);
        let mut offset = 0;
        let mut strategies = Vec::with_capacity(n);
        let mut gains = RandomVector::zeros(n, k);
        let mut gain_rows = Vec::with_capacity(n);
        for basis in &self.bases {
            let m = basis.keys.len();
            let c = &coefficients[offset..offset + m];
            strategies.push(AgentStrategy::from_coefficients(basis, c));
            let mut g = vec![Rational::zero(); k];
            for (coef, gen) in c.iter().zip(&basis.generators) {
                if coef.is_zero() {
                    continue;
                }
                for (ga, x) in g.iter_mut().zip(gen) {
                    *ga += coef * x;
                }
            }
            gain_rows.push(g);
            offset += m;
        }
        if !gain_rows.is_empty() {
            gains = RandomVector::new(gain_rows);
        }
        let exchange_coefficients = coefficients[offset..offset + self.generators.len()].to_vec();
        offset += self.generators.len();
        let mut transfer = vec![Rational::zero(); n];
        for (i, c) in coefficients[offset..offset + self.transfer_count()]
            .iter()
            .enumerate()
        {
            transfer[i] += c;
            transfer[n - 1] -= c;
        }
        let mut exchange = RandomVector::constant(&transfer, k);
        for (c, g) in exchange_coefficients.iter().zip(&self.generators) {
            if !c.is_zero() {
                exchange = exchange.add(&g.scale(c));
            }
        }
        DecodedSpan {
            strategies,
            exchange_coefficients,
            transfer,
            gains,
            exchange,
        }
    }
}

/// Maximizes `sum s` over `s = G c` with `0 <= s <= 1`. A positive optimum
/// means the span contains a nonnegative nonzero vector. Returns the optimum
/// and full-length coefficients.
pub(crate) fn max_positive_outcome(
    columns: &[Vec<Rational>],
    dim: usize,
) -> Result<(Rational, Vec<Rational>)> {
    let keep = independent_subset(columns);
    let mut coefficients = vec![Rational::zero(); columns.len()];
    if keep.is_empty() {
        return Ok((Rational::zero(), coefficients));
    }
    let mut lp = LinearProgram::new(keep.len(), Sense::Maximize);
    let mut objective = vec![Rational::zero(); keep.len()];
    for r in 0..dim {
        let row: Vec<Rational> = keep.iter().map(|&c| columns[c][r].clone()).collect();
        if row.iter().all(Zero::is_zero) {
            continue;
        }
        for (o, v) in objective.iter_mut().zip(&row) {
            *o += v;
        }
        lp.add_le(row.iter().map(|v| -v).collect(), Rational::zero());
        lp.add_le(row, Rational::one());
    }
    lp.set_objective(objective);
    match solve_lp(&lp)? {
        LpResult::Optimal(opt) => {
            for (&c, v) in keep.iter().zip(opt.primal) {
                coefficients[c] = v;
            }
            Ok((opt.value, coefficients))
        }
        other => Err(AnalysisError::InternalInconsistency(format!(
            "outcome LP is {}, expected optimal",
            other.status()
        ))),
    }
}

/// Maximizes `t` subject to `x` in the polytope and `x_j >= t` on every
/// nonnegative coordinate. `None` when the polytope is empty.
pub(crate) fn max_min_point(poly: &Polytope) -> Result<Option<(Rational, Vec<Rational>)>> {
    let n = poly.dim;
    let mut objective = vec![Rational::zero(); n + 1];
    objective[n] = Rational::one();
    let mut lp = poly.to_lp(objective, Sense::Maximize, 1);
    for j in (0..n).filter(|&j| poly.nonneg[j]) {
        let mut row = vec![Rational::zero(); n + 1];
        row[j] = -Rational::one();
        row[n] = Rational::one();
        lp.add_le(row, Rational::zero());
    }
    match solve_lp(&lp)? {
        LpResult::Optimal(opt) => {
            let mut x = opt.primal;
            let t = x.pop().expect("t variable");
            Ok(Some((t, x)))
        }
        LpResult::Infeasible(_) => Ok(None),
        LpResult::Unbounded(_) => Err(AnalysisError::InternalInconsistency(
            "max-min LP is unbounded".into(),
        )),
    }
}

fn probability_row(agent: usize, atoms: usize, dim: usize) -> Vec<Rational> {
    let mut row = vec![Rational::zero(); dim];
    for a in 0..atoms {
        row[agent * atoms + a] = Rational::one();
    }
    row
}

fn add_agent_constraints(poly: &mut Polytope, model: &MarketModel, agent: usize, slot: usize) {
    let k = model.atom_count();
    poly.add_eq(probability_row(slot, k, poly.dim), Rational::one());
    for g in gains_basis(model, agent).generators {
        if g.iter().all(Zero::is_zero) {
            continue;
        }
        let mut row = vec![Rational::zero(); poly.dim];
        row[slot * k..(slot + 1) * k].clone_from_slice(&g);
        poly.add_eq(row, Rational::zero());
    }
}

/// Closure of the martingale measures of one agent: `Q >= 0`, `sum Q = 1`
/// and a zero expected increment on every block for every traded asset.
pub fn agent_mm_polytope(model: &MarketModel, agent: usize) -> Polytope {
    let mut poly = Polytope::nonnegative(model.atom_count());
    add_agent_constraints(&mut poly, model, agent, 0);
    poly
}

/// Closure of the collective martingale measures over variables
/// `(Q^1, ..., Q^N)`: the product of the agent polytopes cut by
/// `sum_i E_{Q^i}[Y^i] = 0` for every exchange generator.
pub fn collective_mm_polytope(model: &MarketModel, space: &ExchangeSpace) -> Polytope {
    let n = model.agent_count();
    let mut poly = Polytope::nonnegative(n * model.atom_count());
    for i in 0..n {
        add_agent_constraints(&mut poly, model, i, i);
    }
    for g in space.effective_generators(model) {
        let row = g.flatten();
        if row.iter().any(|v| !v.is_zero()) {
            poly.add_eq(row, Rational::zero());
        }
    }
    poly
}

fn witness_from(layout: &SpanLayout, coefficients: &[Rational]) -> ArbitrageWitness {
    let d = layout.decode(coefficients);
    ArbitrageWitness {
        outcome: d.gains.add(&d.exchange),
        strategies: d.strategies,
        exchange_coefficients: d.exchange_coefficients,
        transfer: d.transfer,
        exchange: d.exchange,
    }
}

fn report(
    model: &MarketModel,
    poly: &Polytope,
    layout: &SpanLayout,
    agents_in_measure: usize,
    label: &str,
) -> Result<NcaReport> {
    let dual = max_min_point(poly)?;
    let dual_holds = matches!(&dual, Some((t, _)) if t.is_positive());
    let columns = layout.columns();
    let (value, coefficients) = max_positive_outcome(&columns, layout.agents * layout.atoms)?;
    let primal_holds = value.is_zero();
    if dual_holds != primal_holds {
        return Err(AnalysisError::InternalInconsistency(format!(
            "{label}: measure side says {dual_holds}, strategy side says {primal_holds}"
        )));
    }
    // an empty closure has the same optimum as the homogenized max-min LP
    let max_t = dual
        .as_ref()
        .map_or_else(Rational::zero, |(t, _)| t.clone());
    if dual_holds {
        let (_, point) = dual.expect("dual point");
        Ok(NcaReport {
            holds: true,
            max_t,
            measure: Some(MeasureVector::from_flat(
                &point,
                agents_in_measure,
                model.atom_count(),
            )),
            witness: None,
        })
    } else {
        let witness = witness_from(layout, &coefficients);
        debug_assert!(witness.outcome.is_nonnegative() && !witness.outcome.is_zero());
        Ok(NcaReport {
            holds: false,
            max_t,
            measure: None,
            witness: Some(witness),
        })
    }
}

/// No-arbitrage for one agent trading its own assets on its own information.
pub fn check_na_agent(model: &MarketModel, agent: usize) -> Result<NcaReport> {
    let poly = agent_mm_polytope(model, agent);
    let layout = SpanLayout::single_agent(model, agent);
    report(model, &poly, &layout, 1, &format!("agent {agent}"))
}

/// No-arbitrage for a single trader with every asset and the join of all
/// agents' information.
pub fn check_na_global(model: &MarketModel) -> Result<NcaReport> {
    check_na_agent(&model.global_model(), 0)
}

/// No collective arbitrage relative to the exchange space.
pub fn check_nca(model: &MarketModel, space: &ExchangeSpace) -> Result<NcaReport> {
    let poly = collective_mm_polytope(model, space);
    let layout = SpanLayout::new(model, space, true);
    report(model, &poly, &layout, model.agent_count(), "collective")
}

/// Measure-side verdict only, with the max-min point when it holds.
pub fn nca_interior_point(
    model: &MarketModel,
    space: &ExchangeSpace,
) -> Result<Option<MeasureVector>> {
    let poly = collective_mm_polytope(model, space);
    Ok(match max_min_point(&poly)? {
        Some((t, x)) if t.is_positive() => Some(MeasureVector::from_flat(
            &x,
            model.agent_count(),
            model.atom_count(),
        )),
        _ => None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImplicationsReport {
    pub na_global: bool,
    pub nca: bool,
    pub na_agents: Vec<bool>,
    pub zero_sum: bool,
    pub deterministic_only: bool,
}

/// Evaluates global NA, collective NA and each agent's NA and checks that
/// they are ordered as theory requires.
pub fn implications_audit(
    model: &MarketModel,
    space: &ExchangeSpace,
) -> Result<ImplicationsReport> {
    let na_global = check_na_global(model)?.holds;
    let nca = check_nca(model, space)?.holds;
    let na_agents = (0..model.agent_count())
        .map(|i| check_na_agent(model, i).map(|r| r.holds))
        .collect::<Result<Vec<_>>>()?;
    let all_agents = na_agents.iter().all(|&b| b);
    let zero_sum = space.is_zero_sum();
    let deterministic_only = space.is_deterministic_only();
    if nca && !all_agents {
        return Err(AnalysisError::ImplicationViolated(
            "collective no-arbitrage holds but some agent has an arbitrage".into(),
        ));
    }
    if zero_sum && na_global && !nca {
        return Err(AnalysisError::ImplicationViolated(
            "global no-arbitrage holds but a zero-sum exchange creates a collective arbitrage"
                .into(),
        ));
    }
    if deterministic_only && all_agents && !nca {
        return Err(AnalysisError::ImplicationViolated(
            "every agent is arbitrage-free but deterministic transfers create a collective arbitrage".into(),
        ));
    }
    Ok(ImplicationsReport {
        na_global,
        nca,
        na_agents,
        zero_sum,
        deterministic_only,
    })
}

/// True when exactly one collective martingale measure exists, each agent's
/// measure being read on that agent's terminal information.
pub fn is_singleton(model: &MarketModel, space: &ExchangeSpace) -> Result<bool> {
    let poly = collective_mm_polytope(model, space);
    let x = match max_min_point(&poly)? {
        Some((t, x)) if t.is_positive() => x,
        _ => return Err(AnalysisError::NcaViolated),
    };
    if affine_dimension(&poly, &x)? == 0 {
        return Ok(true);
    }
    // finer atoms may carry free mass; only block probabilities matter
    let k = model.atom_count();
    for (i, spec) in model.agents().iter().enumerate() {
        for block in spec.filtration.at(model.horizon()).blocks() {
            let mut c = vec![Rational::zero(); poly.dim];
            for &a in block {
                c[i * k + a] = Rational::one();
            }
            let value = |sense| -> Result<Rational> {
                match solve_lp(&poly.to_lp(c.clone(), sense, 0))? {
                    LpResult::Optimal(opt) => Ok(opt.value),
                    other => Err(AnalysisError::InternalInconsistency(format!(
                        "block probability LP is {}",
                        other.status()
                    ))),
                }
            };
            if value(Sense::Minimize)? != value(Sense::Maximize)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriceSetShape {
    /// The claim is replicable and its price is unique.
    Point,
    /// The claim is not replicable; the set is not guaranteed to be open
    /// or closed.
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriceSet {
    /// Extreme points of the closure, or `None` when vertex enumeration was
    /// skipped because of the dimension guard.
    pub closure_vertices: Option<Vec<Vec<Rational>>>,
    pub sum_range: (Rational, Rational),
    pub replicable: bool,
    pub shape: PriceSetShape,
}

/// Points of `points` that are not convex combinations of the others.
pub fn extreme_points(points: &[Vec<Rational>]) -> Result<Vec<Vec<Rational>>> {
    let unique: Vec<Vec<Rational>> = points
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut out = Vec::new();
    for (p, target) in unique.iter().enumerate() {
        let others: Vec<&Vec<Rational>> = unique
            .iter()
            .enumerate()
            .filter(|(q, _)| *q != p)
            .map(|(_, v)| v)
            .collect();
        if others.is_empty() {
            out.push(target.clone());
            continue;
        }
        let mut lp = LinearProgram::new(others.len(), Sense::Minimize);
        for j in 0..others.len() {
            lp.nonnegative(j);
        }
        lp.add_eq(vec![Rational::one(); others.len()], Rational::one());
        for (d, t) in target.iter().enumerate() {
            lp.add_eq(others.iter().map(|o| o[d].clone()).collect(), t.clone());
        }
        if matches!(solve_lp(&lp)?, LpResult::Infeasible(_)) {
            out.push(target.clone());
        }
    }
    Ok(out)
}

/// Arbitrage-free price vectors of the claim: the image of the collective
/// measures under `Q -> (E_{Q^i}[f^i])_i`.
pub fn price_set(
    model: &MarketModel,
    f: &RandomVector,
    space: &ExchangeSpace,
    vertex_limit: usize,
) -> Result<PriceSet> {
    if nca_interior_point(model, space)?.is_none() {
        return Err(AnalysisError::NcaViolated);
    }
    let (upper, _) = hedging::super_price(model, f, space)?;
    let (lower, _) = hedging::sub_price(model, f, space)?;
    let replicable = hedging::replicate(model, f, space)?.is_replicable();
    let poly = collective_mm_polytope(model, space);
    let closure_vertices = match enumerate_vertices(&poly, vertex_limit) {
        Ok(vertices) => {
            let (n, k) = (model.agent_count(), model.atom_count());
            let images: Vec<Vec<Rational>> = vertices
                .iter()
                .map(|v| MeasureVector::from_flat(v, n, k).expectations(f))
                .collect();
            let sums: Vec<Rational> = images.iter().map(|p| p.iter().sum()).collect();
            let lo = sums.iter().min().cloned();
            let hi = sums.iter().max().cloned();
            if lo.as_ref() != Some(&lower) || hi.as_ref() != Some(&upper) {
                return Err(AnalysisError::InternalInconsistency(
                    "vertex sums do not span the hedging price interval".into(),
                ));
            }
            Some(extreme_points(&images)?)
        }
        Err(LpError::DimensionLimitExceeded { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(PriceSet {
        closure_vertices,
        sum_range: (lower, upper),
        replicable,
        shape: if replicable {
            PriceSetShape::Point
        } else {
            PriceSetShape::Unresolved
        },
    })
}

/// Checks that `q` is an equivalent collective martingale measure.
pub fn check_collective_measure(
    model: &MarketModel,
    space: &ExchangeSpace,
    q: &MeasureVector,
) -> Result<()> {
    let (n, k) = (model.agent_count(), model.atom_count());
    let bad = |why: String| Err(AnalysisError::MeasureNotCollectiveMartingale(why));
    if q.per_agent.len() != n || q.per_agent.iter().any(|c| c.len() != k) {
        return bad("shape".into());
    }
    if !q.is_equivalent() {
        return bad("some weight is not strictly positive".into());
    }
    let poly = collective_mm_polytope(model, space);
    let flat = q.flatten();
    for (row, rhs) in poly.eq_rows.iter().zip(&poly.eq_rhs) {
        if &dot(row, &flat) != rhs {
            return bad("a normalization, martingale or exchange constraint fails".into());
        }
    }
    Ok(())
}

/// Adds one asset per agent, tradable only by that agent, whose price is the
/// conditional expectation of the agent's claim under its measure.
pub fn extended_market(
    model: &MarketModel,
    space: &ExchangeSpace,
    f: &RandomVector,
    q: &MeasureVector,
) -> Result<MarketModel> {
    check_collective_measure(model, space, q)?;
    model.check_random_vector(f, "claim")?;
    let k = model.atom_count();
    let mut extra = Vec::with_capacity(model.agent_count());
    let mut access = Vec::with_capacity(model.agent_count());
    for (i, spec) in model.agents().iter().enumerate() {
        let (qi, fi) = (&q.per_agent[i], f.component(i));
        let prices = (0..=model.horizon())
            .map(|t| {
                let mut row = vec![Rational::zero(); k];
                for block in spec.filtration.at(t).blocks() {
                    let mass: Rational = block.iter().map(|&a| &qi[a]).sum();
                    let value: Rational =
                        block.iter().map(|&a| &qi[a] * &fi[a]).sum::<Rational>() / mass;
                    for &a in block {
                        row[a] = value.clone();
                    }
                }
                row
            })
            .collect();
        extra.push(Asset {
            name: format!("claim{}", i + 1),
            prices,
        });
        access.push(vec![i]);
    }
    Ok(model.with_extra_assets(extra, &access)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{fig1, fig2};
    use crate::market::zero_sum_generators_from_partition;
    use crate::rational::{int, ratio};

    fn q(xs: &[(i64, i64)]) -> Vec<Rational> {
        xs.iter().map(|&(a, b)| ratio(a, b)).collect()
    }

    #[test]
    fn agent_measure_at_maxmin_point() {
        let r = check_na_agent(&fig1(), 0).unwrap();
        assert!(r.holds);
        assert_eq!(r.max_t, ratio(1, 8));
        assert_eq!(
            r.measure.unwrap().per_agent[0],
            q(&[(1, 8), (1, 8), (1, 8), (1, 8), (1, 6), (1, 3)])
        );
    }

    #[test]
    fn fig1_collective_singleton() {
        let m = fig1();
        let y = zero_sum_generators_from_partition(&m, 1).unwrap();
        let r = check_nca(&m, &y).unwrap();
        assert!(r.holds);
        let mv = r.measure.unwrap();
        assert_eq!(
            mv.per_agent[0],
            q(&[(1, 8), (1, 8), (1, 8), (1, 8), (1, 6), (1, 3)])
        );
        assert_eq!(
            mv.per_agent[1],
            q(&[(1, 8), (1, 8), (1, 8), (1, 8), (1, 3), (1, 6)])
        );
        assert!(is_singleton(&m, &y).unwrap());
        assert!(!is_singleton(&m, &ExchangeSpace::deterministic(2)).unwrap());
        assert!(!check_na_global(&m).unwrap().holds);
    }

    #[test]
    fn fig2_collective_arbitrage() {
        let m = fig2();
        let y = zero_sum_generators_from_partition(&m, 1).unwrap();
        let r = check_nca(&m, &y).unwrap();
        assert!(!r.holds);
        assert_eq!(r.max_t, int(0));
        let w = r.witness.unwrap();
        let target = [int(1), int(1), int(0), int(0), int(0), int(0)];
        assert_eq!(w.outcome.component(0), &target);
        assert_eq!(w.outcome.component(1), &target);

        let early = m.restrict_horizon(0, 1).unwrap();
        assert!(
            check_nca(&early, &ExchangeSpace::deterministic(2))
                .unwrap()
                .holds
        );
        let w = check_na_global(&early).unwrap().witness.unwrap();
        assert_eq!(w.outcome.component(0), &target);

        let late = m.restrict_horizon(1, 2).unwrap();
        let r = check_na_agent(&late, 1).unwrap();
        assert!(r.holds);
        let mv = r.measure.unwrap();
        for (_, cond) in &mv.conditional(&late)[0] {
            assert!(cond.iter().all(|c| c == &ratio(1, 2)));
        }
    }

    #[test]
    fn monotone_price_is_an_arbitrage() {
        let text = r#"{"omega":["u","d"],"P":{"u":"1/2","d":"1/2"},"T":1,
            "assets":[{"name":"S","prices":[{"u":"1","d":"1"},{"u":"2","d":"1"}]}],
            "agents":[{"name":"a","assets":[1],"filtration":[[["u","d"]],[["u"],["d"]]]}]}"#;
        let m = crate::market::parse_market(text).unwrap();
        let r = check_na_agent(&m, 0).unwrap();
        assert!(!r.holds);
        let w = r.witness.unwrap();
        assert!(w.strategies[0].get(1, 0, 0).is_positive());
        assert_eq!(check_na_global(&m).unwrap().holds, r.holds);
    }

    #[test]
    fn binomial_unique_measure() {
        let text = r#"{"omega":["u","d"],"P":{"u":"1/2","d":"1/2"},"T":1,
            "assets":[{"name":"S","prices":[{"u":"1","d":"1"},{"u":"2","d":"1/2"}]}],
            "agents":[{"name":"a","assets":[1],"filtration":[[["u","d"]],[["u"],["d"]]]}]}"#;
        let m = crate::market::parse_market(text).unwrap();
        let verts = enumerate_vertices(&agent_mm_polytope(&m, 0), 24).unwrap();
        assert_eq!(verts, vec![q(&[(1, 3), (2, 3)])]);
        assert!(is_singleton(&m, &ExchangeSpace::deterministic(1)).unwrap());
    }

    #[test]
    fn uniqueness_is_read_on_the_agent_information() {
        // atoms u1, u2 are indistinguishable, so their split is free
        let text = r#"{"omega":["u1","u2","d"],"P":{"u1":"1/3","u2":"1/3","d":"1/3"},"T":1,
            "assets":[{"name":"S","prices":[{"u1":"1","u2":"1","d":"1"},{"u1":"2","u2":"2","d":"1/2"}]}],
            "agents":[{"name":"a","assets":[1],"filtration":[[["u1","u2","d"]],[["u1","u2"],["d"]]]}]}"#;
        let m = crate::market::parse_market(text).unwrap();
        let y = ExchangeSpace::deterministic(1);
        let poly = agent_mm_polytope(&m, 0);
        let x = nca_interior_point(&m, &y).unwrap().unwrap().flatten();
        assert_eq!(affine_dimension(&poly, &x).unwrap(), 1);
        assert!(is_singleton(&m, &y).unwrap());
    }

    #[test]
    fn extension_by_indicator() {
        let m = fig1();
        let y = zero_sum_generators_from_partition(&m, 1).unwrap();
        let mv = check_nca(&m, &y).unwrap().measure.unwrap();
        let f = crate::market::indicator_claim(&m, 0, &[0, 1]).unwrap();
        let ext = extended_market(&m, &y, &f, &mv).unwrap();
        assert_eq!(ext.price(2, 0, 0), &ratio(1, 4));
        assert_eq!(ext.price(2, 2, 0), &int(1));
        assert!(check_nca(&ext, &y).unwrap().holds);
        let mut bad = mv.clone();
        bad.per_agent[0].swap(0, 4);
        assert!(matches!(
            extended_market(&m, &y, &f, &bad),
            Err(AnalysisError::MeasureNotCollectiveMartingale(_))
        ));
    }
}
