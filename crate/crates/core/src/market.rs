//! Finite multi-agent market model: sample space, per-agent filtrations,
//! adapted price processes and exchange spaces.
//!
//! Atoms are indexed `0..K` in the order of the file's `omega` list; agents
//! and assets are indexed from zero internally and from one in files.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::rational::{format_rational, parse_rational, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MarketError {
    #[error("malformed market file: {0}")]
    Json(String),
    #[error("invalid rational {value:?} in {context}")]
    InvalidRational { value: String, context: String },
    #[error("unknown atom {atom:?} in {context}")]
    UnknownAtom { atom: String, context: String },
    #[error("duplicate atom {0:?}")]
    DuplicateAtom(String),
    #[error("missing value for atom {atom:?} in {context}")]
    MissingValue { atom: String, context: String },
    #[error("filtration of agent {agent} at time {time} is not a partition of the sample space")]
    NotAPartition { agent: String, time: usize },
    #[error("filtration of agent {agent} must start from the trivial partition at time 0")]
    NontrivialInitialPartition { agent: String },
    #[error("filtration of agent {agent} does not refine from time {} to time {time}", time - 1)]
    NonRefiningFiltration { agent: String, time: usize },
    #[error("asset {asset} is not adapted for agent {agent}: not constant on block {block:?} at time {time}")]
    NonAdaptedAsset {
        agent: String,
        asset: String,
        time: usize,
        block: Vec<String>,
    },
    #[error("atom {0:?} has non-positive probability")]
    ZeroProbabilityAtom(String),
    #[error("probabilities sum to {0}, expected 1")]
    MassNotOne(String),
    #[error("agent {agent} references unknown asset index {index}")]
    UnknownAssetIndex { agent: String, index: usize },
    #[error("agent {0} has no tradable asset")]
    EmptyAssetAccess(String),
    #[error("asset {0} is not accessible to any agent")]
    UnusedAsset(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("event is not measurable for agent {agent} at time {time}")]
    EventNotMeasurable { agent: usize, time: usize },
    #[error(
        "component {agent} of {what} is not measurable w.r.t. the agent's time-{time} information"
    )]
    NotMeasurable {
        what: String,
        agent: usize,
        time: usize,
    },
    #[error("no common partition at time {time}: horizon is {horizon}")]
    NoCommonPartition { time: usize, horizon: usize },
    #[error("exchange generator {generator} is not zero-sum at atom {atom:?}")]
    NotZeroSum { generator: usize, atom: String },
    #[error("invalid horizon {start}:{end} for a model with T = {horizon}")]
    InvalidHorizon {
        start: usize,
        end: usize,
        horizon: usize,
    },
    #[error("unknown exchange mode {0:?}")]
    UnknownExchangeMode(String),
}

pub type Result<T, E = MarketError> = std::result::Result<T, E>;

/// Partition of the atom set into disjoint nonempty blocks.
///
/// Canonical form: atoms inside a block ascending, blocks ordered by their
/// smallest atom. Two partitions of the same set compare equal iff they are
/// the same partition.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
    owner: Vec<usize>,
}

impl Partition {
    /// Returns `None` unless `blocks` covers `0..atoms` exactly once.
    pub fn new(mut blocks: Vec<Vec<usize>>, atoms: usize) -> Option<Self> {
        let mut owner = vec![usize::MAX; atoms];
        for block in &mut blocks {
            if block.is_empty() {
                return None;
            }
            block.sort_unstable();
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        for (index, block) in blocks.iter().enumerate() {
            for &atom in block {
                if atom >= atoms || owner[atom] != usize::MAX {
                    return None;
                }
                owner[atom] = index;
            }
        }
        if owner.contains(&usize::MAX) {
            return None;
        }
        Some(Self { blocks, owner })
    }

    pub fn trivial(atoms: usize) -> Self {
        Self::new(vec![(0..atoms).collect()], atoms).expect("trivial partition")
    }

    pub fn discrete(atoms: usize) -> Self {
        Self::new((0..atoms).map(|a| vec![a]).collect(), atoms).expect("discrete partition")
    }

    fn from_labels(labels: &[usize]) -> Self {
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (atom, &label) in labels.iter().enumerate() {
            groups.entry(label).or_default().push(atom);
        }
        Self::new(groups.into_values().collect(), labels.len()).expect("labelled partition")
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn atoms(&self) -> usize {
        self.owner.len()
    }

    pub fn block_of(&self, atom: usize) -> usize {
        self.owner[atom]
    }

    pub fn is_trivial(&self) -> bool {
        self.blocks.len() == 1
    }

    /// True when every block of `self` lies inside a block of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        self.blocks.iter().all(|block| {
            let b = coarser.block_of(block[0]);
            block.iter().all(|&a| coarser.block_of(a) == b)
        })
    }

    /// True when `values` is constant on every block.
    pub fn is_measurable(&self, values: &[Rational]) -> bool {
        self.first_nonconstant_block(values).is_none()
    }

    pub fn first_nonconstant_block(&self, values: &[Rational]) -> Option<usize> {
        self.blocks
            .iter()
            .position(|block| block.iter().any(|&a| values[a] != values[block[0]]))
    }

    /// True when the event (a set of atoms) is a union of blocks.
    pub fn contains_event(&self, event: &BTreeSet<usize>) -> bool {
        self.blocks.iter().all(|block| {
            let inside = event.contains(&block[0]);
            block.iter().all(|a| event.contains(a) == inside)
        })
    }

    /// Finest partition coarser than all inputs: its blocks are measurable
    /// for every input partition.
    pub fn meet<'a>(parts: impl IntoIterator<Item = &'a Partition>, atoms: usize) -> Partition {
        let mut parent: Vec<usize> = (0..atoms).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for part in parts {
            for block in part.blocks() {
                for &a in &block[1..] {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, block[0]));
                    if ra != rb {
                        parent[ra.max(rb)] = ra.min(rb);
                    }
                }
            }
        }
        let labels: Vec<usize> = (0..atoms).map(|a| find(&mut parent, a)).collect();
        Partition::from_labels(&labels)
    }

    /// Coarsest common refinement: blocks are the nonempty intersections.
    pub fn join<'a>(parts: impl IntoIterator<Item = &'a Partition>, atoms: usize) -> Partition {
        let mut keys: Vec<Vec<usize>> = vec![Vec::new(); atoms];
        for part in parts {
            for (a, key) in keys.iter_mut().enumerate() {
                key.push(part.block_of(a));
            }
        }
        let mut ids: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        let labels: Vec<usize> = keys
            .into_iter()
            .map(|k| {
                let next = ids.len();
                *ids.entry(k).or_insert(next)
            })
            .collect();
        Partition::from_labels(&labels)
    }

    fn restrict(&self, keep: &[usize]) -> Partition {
        let index: BTreeMap<usize, usize> = keep.iter().enumerate().map(|(i, &a)| (a, i)).collect();
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                b.iter()
                    .filter_map(|a| index.get(a).copied())
                    .collect::<Vec<_>>()
            })
            .filter(|b: &Vec<usize>| !b.is_empty())
            .collect();
        Partition::new(blocks, keep.len()).expect("restricted partition")
    }
}

/// Information flow of one agent: partitions indexed by time `0..=T`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Filtration {
    partitions: Vec<Partition>,
}

impl Filtration {
    pub fn new(partitions: Vec<Partition>) -> Self {
        Self { partitions }
    }

    pub fn at(&self, t: usize) -> &Partition {
        &self.partitions[t]
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    /// First time at which the chain fails to refine, if any.
    pub fn first_nonrefining_time(&self) -> Option<usize> {
        (1..self.partitions.len()).find(|&t| !self.partitions[t].refines(&self.partitions[t - 1]))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentSpec {
    pub name: String,
    /// Zero-based asset indices, ascending.
    pub assets: Vec<usize>,
    pub filtration: Filtration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Asset {
    pub name: String,
    /// `prices[t][atom]` for `t = 0..=T`.
    pub prices: Vec<Vec<Rational>>,
}

/// A vector of `N` random variables, one per agent, over the atoms.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RandomVector {
    components: Vec<Vec<Rational>>,
}

impl RandomVector {
    pub fn new(components: Vec<Vec<Rational>>) -> Self {
        Self { components }
    }

    pub fn zeros(agents: usize, atoms: usize) -> Self {
        Self::new(vec![vec![Rational::zero(); atoms]; agents])
    }

    /// The same deterministic amount `values[i]` on every atom for agent `i`.
    pub fn constant(values: &[Rational], atoms: usize) -> Self {
        Self::new(values.iter().map(|v| vec![v.clone(); atoms]).collect())
    }

    pub fn components(&self) -> &[Vec<Rational>] {
        &self.components
    }

    pub fn component(&self, agent: usize) -> &[Rational] {
        &self.components[agent]
    }

    pub fn agents(&self) -> usize {
        self.components.len()
    }

    pub fn atoms(&self) -> usize {
        self.components.first().map_or(0, Vec::len)
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().flatten().all(Zero::is_zero)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.components.iter().flatten().all(|v| !v.is_negative())
    }

    /// Row-major flattening `(agent, atom)`.
    pub fn flatten(&self) -> Vec<Rational> {
        self.components.iter().flatten().cloned().collect()
    }

    pub fn from_flat(flat: &[Rational], agents: usize, atoms: usize) -> Self {
        assert_eq!(flat.len(), agents * atoms);
        Self::new(flat.chunks(atoms).map(<[Rational]>::to_vec).collect())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(&Rational, &Rational) -> Rational) -> Self {
        Self::new(
            self.components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| f(x, y)).collect())
                .collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: &Rational) -> Self {
        Self::new(
            self.components
                .iter()
                .map(|c| c.iter().map(|v| v * factor).collect())
                .collect(),
        )
    }

    pub fn neg(&self) -> Self {
        self.scale(&-Rational::one())
    }

    /// First atom where the components do not sum to zero.
    pub fn first_nonzero_sum_atom(&self) -> Option<usize> {
        (0..self.atoms()).find(|&a| {
            let total: Rational = self.components.iter().map(|c| &c[a]).sum();
            !total.is_zero()
        })
    }

    /// First agent whose component is not constant on the blocks of the
    /// agent's time-`t` partition.
    pub fn first_unmeasurable_agent(&self, model: &MarketModel, t: usize) -> Option<usize> {
        (0..self.agents()).find(|&i| {
            !model.agents[i]
                .filtration
                .at(t)
                .is_measurable(&self.components[i])
        })
    }
}

/// How the exchange space is specified in a market file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExchangeConfig {
    /// Only the deterministic zero-sum transfers.
    Deterministic,
    /// Explicit generators (not necessarily zero-sum).
    Generators(Vec<RandomVector>),
    /// Zero-sum exchanges measurable on the common time-`t` partition.
    ZeroSumPartition { time: usize },
}

/// Finitely generated exchange space. The deterministic zero-sum transfers
/// `{x in R^N : sum x = 0}` are always part of the span and are not stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExchangeSpace {
    agents: usize,
    generators: Vec<RandomVector>,
}

impl ExchangeSpace {
    pub fn deterministic(agents: usize) -> Self {
        Self {
            agents,
            generators: Vec::new(),
        }
    }

    /// Generators must be zero-sum atomwise and terminally measurable.
    pub fn zero_sum(model: &MarketModel, generators: Vec<RandomVector>) -> Result<Self> {
        for (g, y) in generators.iter().enumerate() {
            model.check_random_vector(y, "exchange generator")?;
            if let Some(atom) = y.first_nonzero_sum_atom() {
                return Err(MarketError::NotZeroSum {
                    generator: g,
                    atom: model.atoms[atom].clone(),
                });
            }
        }
        Ok(Self {
            agents: model.agent_count(),
            generators,
        })
    }

    /// Opt-out constructor: generators only need to be measurable.
    pub fn general(model: &MarketModel, generators: Vec<RandomVector>) -> Result<Self> {
        for y in &generators {
            model.check_random_vector(y, "exchange generator")?;
        }
        Ok(Self {
            agents: model.agent_count(),
            generators,
        })
    }

    pub fn from_config(model: &MarketModel, config: &ExchangeConfig) -> Result<Self> {
        match config {
            ExchangeConfig::Deterministic => Ok(Self::deterministic(model.agent_count())),
            ExchangeConfig::Generators(gens) => Self::general(model, gens.clone()),
            ExchangeConfig::ZeroSumPartition { time } => {
                zero_sum_generators_from_partition(model, *time)
            }
        }
    }

    /// `span(self, extra)`, keeping the stored generators first.
    pub fn with_generator(&self, extra: RandomVector) -> Self {
        let mut generators = self.generators.clone();
        generators.push(extra);
        Self {
            agents: self.agents,
            generators,
        }
    }

    pub fn generators(&self) -> &[RandomVector] {
        &self.generators
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn is_zero_sum(&self) -> bool {
        self.generators
            .iter()
            .all(|g| g.first_nonzero_sum_atom().is_none())
    }

    /// Generators an analysis of `model` should use. When the agents share a
    /// non-trivial initial partition every block is analyzed conditionally:
    /// each generator is split across the blocks and the deterministic
    /// transfers become block-wise constants.
    pub fn effective_generators(&self, model: &MarketModel) -> Vec<RandomVector> {
        let initial = model.initial_blocks();
        if initial.is_trivial() {
            return self.generators.clone();
        }
        let (n, k) = (model.agent_count(), model.atom_count());
        let mut out = Vec::new();
        for g in &self.generators {
            for block in initial.blocks() {
                let mut piece = RandomVector::zeros(n, k);
                for &a in block {
                    for i in 0..n {
                        piece.components[i][a] = g.components[i][a].clone();
                    }
                }
                if !piece.is_zero() {
                    out.push(piece);
                }
            }
        }
        for block in initial.blocks() {
            for i in 0..n.saturating_sub(1) {
                let mut piece = RandomVector::zeros(n, k);
                for &a in block {
                    piece.components[i][a] = Rational::one();
                    piece.components[n - 1][a] = -Rational::one();
                }
                out.push(piece);
            }
        }
        out
    }

    /// True when the span is exactly the deterministic zero-sum transfers.
    pub fn is_deterministic_only(&self) -> bool {
        self.generators.iter().all(|g| {
            g.first_nonzero_sum_atom().is_none()
                && g.components().iter().all(|c| c.iter().all(|v| v == &c[0]))
        })
    }

    /// Basis `e_i - e_N`, `i < N`, of the deterministic zero-sum transfers.
    pub fn deterministic_basis(&self) -> Vec<Vec<Rational>> {
        let n = self.agents;
        (0..n.saturating_sub(1))
            .map(|i| {
                let mut v = vec![Rational::zero(); n];
                v[i] = Rational::one();
                v[n - 1] = -Rational::one();
                v
            })
            .collect()
    }
}

/// Exchanges executed at times `1..=T`; entry `t - 1` is `Y_t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExchangeSchedule {
    per_time: Vec<RandomVector>,
}

impl ExchangeSchedule {
    /// Component `i` of `Y_t` must be constant on the agent's time-`t` blocks.
    pub fn new(model: &MarketModel, per_time: Vec<RandomVector>) -> Result<Self> {
        if per_time.len() != model.horizon() {
            return Err(MarketError::Shape(format!(
                "schedule has {} entries, expected {}",
                per_time.len(),
                model.horizon()
            )));
        }
        for (index, y) in per_time.iter().enumerate() {
            model.check_shape(y, "exchange schedule")?;
            if let Some(agent) = y.first_unmeasurable_agent(model, index + 1) {
                return Err(MarketError::NotMeasurable {
                    what: format!("scheduled exchange Y_{}", index + 1),
                    agent,
                    time: index + 1,
                });
            }
        }
        Ok(Self { per_time })
    }

    pub fn zero(model: &MarketModel) -> Self {
        Self {
            per_time: vec![
                RandomVector::zeros(model.agent_count(), model.atom_count());
                model.horizon()
            ],
        }
    }

    /// `Y_t` for `t` in `1..=T`.
    pub fn at(&self, t: usize) -> &RandomVector {
        &self.per_time[t - 1]
    }

    pub fn per_time(&self) -> &[RandomVector] {
        &self.per_time
    }

    /// Cumulative exchange `Y_{1:t}`.
    pub fn cumulative(&self, t: usize) -> RandomVector {
        let base = RandomVector::zeros(
            self.per_time.first().map_or(0, RandomVector::agents),
            self.per_time.first().map_or(0, RandomVector::atoms),
        );
        self.per_time[..t].iter().fold(base, |acc, y| acc.add(y))
    }
}

/// Validated finite market.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarketModel {
    atoms: Vec<String>,
    probabilities: Vec<Rational>,
    horizon: usize,
    assets: Vec<Asset>,
    agents: Vec<AgentSpec>,
    exchanges: Option<ExchangeConfig>,
}

impl MarketModel {
    /// Builds and validates a model whose initial information is trivial.
    pub fn new(
        atoms: Vec<String>,
        probabilities: Vec<Rational>,
        horizon: usize,
        assets: Vec<Asset>,
        agents: Vec<AgentSpec>,
    ) -> Result<Self> {
        let model = Self {
            atoms,
            probabilities,
            horizon,
            assets,
            agents,
            exchanges: None,
        };
        model.validate(true)?;
        Ok(model)
    }

    pub fn with_exchanges(mut self, exchanges: ExchangeConfig) -> Result<Self> {
        if let ExchangeConfig::Generators(gens) = &exchanges {
            for g in gens {
                self.check_random_vector(g, "exchange generator")?;
            }
        }
        if let ExchangeConfig::ZeroSumPartition { time } = exchanges {
            if time > self.horizon {
                return Err(MarketError::NoCommonPartition {
                    time,
                    horizon: self.horizon,
                });
            }
        }
        self.exchanges = Some(exchanges);
        Ok(self)
    }

    pub fn atoms(&self) -> &[String] {
        &self.atoms
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn atom_index(&self, label: &str) -> Option<usize> {
        self.atoms.iter().position(|a| a == label)
    }

    pub fn probabilities(&self) -> &[Rational] {
        &self.probabilities
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn assets(&self) -> &[Asset] {
        &self.assets
    }

    pub fn agents(&self) -> &[AgentSpec] {
        &self.agents
    }

    pub fn agent(&self, i: usize) -> &AgentSpec {
        &self.agents[i]
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    pub fn exchanges(&self) -> Option<&ExchangeConfig> {
        self.exchanges.as_ref()
    }

    /// `X^j_t(atom)`.
    pub fn price(&self, asset: usize, t: usize, atom: usize) -> &Rational {
        &self.assets[asset].prices[t][atom]
    }

    /// The exchange space declared in the file, or the deterministic
    /// transfers when none is declared.
    pub fn exchange_space(&self) -> Result<ExchangeSpace> {
        match &self.exchanges {
            Some(cfg) => ExchangeSpace::from_config(self, cfg),
            None => Ok(ExchangeSpace::deterministic(self.agent_count())),
        }
    }

    fn validate(&self, require_trivial_start: bool) -> Result<()> {
        let k = self.atoms.len();
        let mut seen = BTreeSet::new();
        for a in &self.atoms {
            if !seen.insert(a) {
                return Err(MarketError::DuplicateAtom(a.clone()));
            }
        }
        if self.probabilities.len() != k {
            return Err(MarketError::Shape("probability vector length".into()));
        }
        for (a, p) in self.probabilities.iter().enumerate() {
            if !p.is_positive() {
                return Err(MarketError::ZeroProbabilityAtom(self.atoms[a].clone()));
            }
        }
        let mass: Rational = self.probabilities.iter().sum();
        if !mass.is_one() {
            return Err(MarketError::MassNotOne(format_rational(&mass)));
        }
        if self.horizon == 0 {
            return Err(MarketError::Shape("horizon must be at least 1".into()));
        }
        for asset in &self.assets {
            if asset.prices.len() != self.horizon + 1 || asset.prices.iter().any(|p| p.len() != k) {
                return Err(MarketError::Shape(format!(
                    "asset {} must have {} price vectors of length {}",
                    asset.name,
                    self.horizon + 1,
                    k
                )));
            }
        }
        if self.agents.is_empty() {
            return Err(MarketError::Shape("at least one agent is required".into()));
        }
        let mut used = vec![false; self.assets.len()];
        for agent in &self.agents {
            let parts = agent.filtration.partitions();
            if parts.len() != self.horizon + 1 || parts.iter().any(|p| p.atoms() != k) {
                return Err(MarketError::Shape(format!(
                    "filtration of agent {} must list {} partitions",
                    agent.name,
                    self.horizon + 1
                )));
            }
            if require_trivial_start && !parts[0].is_trivial() {
                return Err(MarketError::NontrivialInitialPartition {
                    agent: agent.name.clone(),
                });
            }
            if let Some(time) = agent.filtration.first_nonrefining_time() {
                return Err(MarketError::NonRefiningFiltration {
                    agent: agent.name.clone(),
                    time,
                });
            }
            if agent.assets.is_empty() {
                return Err(MarketError::EmptyAssetAccess(agent.name.clone()));
            }
            for &j in &agent.assets {
                if j >= self.assets.len() {
                    return Err(MarketError::UnknownAssetIndex {
                        agent: agent.name.clone(),
                        index: j + 1,
                    });
                }
                used[j] = true;
                for t in 0..=self.horizon {
                    let part = agent.filtration.at(t);
                    if let Some(b) = part.first_nonconstant_block(&self.assets[j].prices[t]) {
                        return Err(MarketError::NonAdaptedAsset {
                            agent: agent.name.clone(),
                            asset: self.assets[j].name.clone(),
                            time: t,
                            block: part.blocks()[b]
                                .iter()
                                .map(|&a| self.atoms[a].clone())
                                .collect(),
                        });
                    }
                }
            }
        }
        if let Some(j) = used.iter().position(|u| !u) {
            return Err(MarketError::UnusedAsset(self.assets[j].name.clone()));
        }
        Ok(())
    }

    fn check_shape(&self, y: &RandomVector, what: &str) -> Result<()> {
        if y.agents() != self.agent_count()
            || y.components().iter().any(|c| c.len() != self.atom_count())
        {
            return Err(MarketError::Shape(format!(
                "{what} must have {} components of length {}",
                self.agent_count(),
                self.atom_count()
            )));
        }
        Ok(())
    }

    /// Shape plus terminal measurability of every component.
    pub fn check_random_vector(&self, y: &RandomVector, what: &str) -> Result<()> {
        self.check_shape(y, what)?;
        if let Some(agent) = y.first_unmeasurable_agent(self, self.horizon) {
            return Err(MarketError::NotMeasurable {
                what: what.to_string(),
                agent,
                time: self.horizon,
            });
        }
        Ok(())
    }

    /// Sub-market on times `start..=end`, re-indexed to `0..=end-start`.
    ///
    /// The initial partition of the result is each agent's time-`start`
    /// partition and may be non-trivial. A zero-sum partition exchange mode
    /// is re-based; explicit generators must be measurable at the new horizon.
    pub fn restrict_horizon(&self, start: usize, end: usize) -> Result<MarketModel> {
        if start >= end || end > self.horizon {
            return Err(MarketError::InvalidHorizon {
                start,
                end,
                horizon: self.horizon,
            });
        }
        let assets = self
            .assets
            .iter()
            .map(|a| Asset {
                name: a.name.clone(),
                prices: a.prices[start..=end].to_vec(),
            })
            .collect();
        let agents = self
            .agents
            .iter()
            .map(|a| AgentSpec {
                name: a.name.clone(),
                assets: a.assets.clone(),
                filtration: Filtration::new(a.filtration.partitions()[start..=end].to_vec()),
            })
            .collect();
        let mut model = MarketModel {
            atoms: self.atoms.clone(),
            probabilities: self.probabilities.clone(),
            horizon: end - start,
            assets,
            agents,
            exchanges: None,
        };
        model.validate(false)?;
        model.exchanges = match &self.exchanges {
            None => None,
            Some(ExchangeConfig::Deterministic) => Some(ExchangeConfig::Deterministic),
            Some(ExchangeConfig::ZeroSumPartition { time }) => {
                if *time < start || *time > end {
                    return Err(MarketError::NoCommonPartition {
                        time: *time,
                        horizon: self.horizon,
                    });
                }
                Some(ExchangeConfig::ZeroSumPartition { time: time - start })
            }
            Some(ExchangeConfig::Generators(gens)) => {
                for g in gens {
                    model.check_random_vector(g, "exchange generator")?;
                }
                Some(ExchangeConfig::Generators(gens.clone()))
            }
        };
        Ok(model)
    }

    /// Single synthetic agent trading every asset on the join (coarsest
    /// common refinement) of all agents' filtrations.
    pub fn global_model(&self) -> MarketModel {
        let k = self.atom_count();
        let partitions = (0..=self.horizon)
            .map(|t| Partition::join(self.agents.iter().map(|a| a.filtration.at(t)), k))
            .collect();
        MarketModel {
            atoms: self.atoms.clone(),
            probabilities: self.probabilities.clone(),
            horizon: self.horizon,
            assets: self.assets.clone(),
            agents: vec![AgentSpec {
                name: "global".into(),
                assets: (0..self.assets.len()).collect(),
                filtration: Filtration::new(partitions),
            }],
            exchanges: None,
        }
    }

    /// Same market with extra assets appended; `access[i]` lists the new
    /// asset positions (relative to the appended list) agent `i` may trade.
    pub(crate) fn with_extra_assets(
        &self,
        extra: Vec<Asset>,
        access: &[Vec<usize>],
    ) -> Result<MarketModel> {
        let base = self.assets.len();
        let mut assets = self.assets.clone();
        assets.extend(extra);
        let agents = self
            .agents
            .iter()
            .zip(access)
            .map(|(a, acc)| {
                let mut list = a.assets.clone();
                list.extend(acc.iter().map(|j| base + j));
                AgentSpec {
                    name: a.name.clone(),
                    assets: list,
                    filtration: a.filtration.clone(),
                }
            })
            .collect();
        let model = MarketModel {
            atoms: self.atoms.clone(),
            probabilities: self.probabilities.clone(),
            horizon: self.horizon,
            assets,
            agents,
            exchanges: self.exchanges.clone(),
        };
        model.validate(self.agents.iter().all(|a| a.filtration.at(0).is_trivial()))?;
        Ok(model)
    }

    /// Blocks of the partition at time 0 common to all agents.
    pub fn initial_blocks(&self) -> Partition {
        Partition::meet(
            self.agents.iter().map(|a| a.filtration.at(0)),
            self.atom_count(),
        )
    }

    /// Sub-market on one initial block with conditioned probabilities and
    /// generators restricted to the block's atoms.
    pub fn condition_on(&self, block: &[usize]) -> Result<MarketModel> {
        let keep: Vec<usize> = block.to_vec();
        let mass: Rational = keep.iter().map(|&a| &self.probabilities[a]).sum();
        let restrict = |v: &[Rational]| keep.iter().map(|&a| v[a].clone()).collect::<Vec<_>>();
        let model = MarketModel {
            atoms: keep.iter().map(|&a| self.atoms[a].clone()).collect(),
            probabilities: keep
                .iter()
                .map(|&a| &self.probabilities[a] / &mass)
                .collect(),
            horizon: self.horizon,
            assets: self
                .assets
                .iter()
                .map(|asset| Asset {
                    name: asset.name.clone(),
                    prices: asset.prices.iter().map(|p| restrict(p)).collect(),
                })
                .collect(),
            agents: self
                .agents
                .iter()
                .map(|a| AgentSpec {
                    name: a.name.clone(),
                    assets: a.assets.clone(),
                    filtration: Filtration::new(
                        a.filtration
                            .partitions()
                            .iter()
                            .map(|p| p.restrict(&keep))
                            .collect(),
                    ),
                })
                .collect(),
            exchanges: match &self.exchanges {
                Some(ExchangeConfig::Generators(gens)) => Some(ExchangeConfig::Generators(
                    gens.iter()
                        .map(|g| {
                            RandomVector::new(g.components().iter().map(|c| restrict(c)).collect())
                        })
                        .collect(),
                )),
                other => other.clone(),
            },
        };
        model.validate(false)?;
        Ok(model)
    }
}

/// Indicator `1_A e_agent` of an event measurable at the agent's horizon.
pub fn indicator_claim(model: &MarketModel, agent: usize, event: &[usize]) -> Result<RandomVector> {
    let t = model.horizon();
    let set: BTreeSet<usize> = event.iter().copied().collect();
    if set.iter().any(|&a| a >= model.atom_count())
        || !model.agent(agent).filtration.at(t).contains_event(&set)
    {
        return Err(MarketError::EventNotMeasurable { agent, time: t });
    }
    let mut y = RandomVector::zeros(model.agent_count(), model.atom_count());
    for &a in &set {
        y.components[agent][a] = Rational::one();
    }
    Ok(y)
}

/// Zero-sum exchanges `Y^i = sum_n y^i_n 1_{A_n}` with `sum_i y^i_n = 0`,
/// where `{A_n}` is the finest partition whose blocks every agent observes at
/// time `t`. One generator `1_{A_n}(e_i - e_N)` per block and `i < N`.
pub fn zero_sum_generators_from_partition(model: &MarketModel, t: usize) -> Result<ExchangeSpace> {
    if t > model.horizon() {
        return Err(MarketError::NoCommonPartition {
            time: t,
            horizon: model.horizon(),
        });
    }
    let n = model.agent_count();
    let k = model.atom_count();
    let common = Partition::meet(model.agents().iter().map(|a| a.filtration.at(t)), k);
    let mut generators = Vec::with_capacity(common.len() * n.saturating_sub(1));
    for block in common.blocks() {
        for i in 0..n.saturating_sub(1) {
            let mut y = RandomVector::zeros(n, k);
            for &a in block {
                y.components[i][a] = Rational::one();
                y.components[n - 1][a] = -Rational::one();
            }
            generators.push(y);
        }
    }
    ExchangeSpace::zero_sum(model, generators)
}

// ---------------------------------------------------------------------------
// File format

#[derive(Debug, Serialize, Deserialize)]
struct MarketFile {
    omega: Vec<String>,
    #[serde(rename = "P")]
    probabilities: BTreeMap<String, String>,
    #[serde(rename = "T")]
    horizon: usize,
    assets: Vec<AssetFile>,
    agents: Vec<AgentFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exchanges: Option<ExchangeFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AssetFile {
    name: String,
    prices: Vec<BTreeMap<String, String>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AgentFile {
    name: String,
    assets: Vec<usize>,
    filtration: Vec<Vec<Vec<String>>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ExchangeFile {
    mode: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    generators: Vec<Vec<BTreeMap<String, String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    time: Option<usize>,
}

/// Reads an atom-keyed map of rationals into a dense vector in atom order.
pub fn read_atom_map(
    atoms: &[String],
    map: &BTreeMap<String, String>,
    context: &str,
    default_zero: bool,
) -> Result<Vec<Rational>> {
    for key in map.keys() {
        if !atoms.contains(key) {
            return Err(MarketError::UnknownAtom {
                atom: key.clone(),
                context: context.to_string(),
            });
        }
    }
    atoms
        .iter()
        .map(|atom| match map.get(atom) {
            Some(text) => parse_rational(text).map_err(|_| MarketError::InvalidRational {
                value: text.clone(),
                context: context.to_string(),
            }),
            None if default_zero => Ok(Rational::zero()),
            None => Err(MarketError::MissingValue {
                atom: atom.clone(),
                context: context.to_string(),
            }),
        })
        .collect()
}

pub fn write_atom_map(atoms: &[String], values: &[Rational]) -> BTreeMap<String, String> {
    atoms
        .iter()
        .zip(values)
        .map(|(a, v)| (a.clone(), format_rational(v)))
        .collect()
}

/// Reads a per-agent list of atom maps; missing atoms default to zero.
pub fn read_random_vector(
    atoms: &[String],
    maps: &[BTreeMap<String, String>],
    context: &str,
) -> Result<RandomVector> {
    maps.iter()
        .enumerate()
        .map(|(i, m)| read_atom_map(atoms, m, &format!("{context}, agent {}", i + 1), true))
        .collect::<Result<Vec<_>>>()
        .map(RandomVector::new)
}

pub fn write_random_vector(atoms: &[String], y: &RandomVector) -> Vec<BTreeMap<String, String>> {
    y.components()
        .iter()
        .map(|c| write_atom_map(atoms, c))
        .collect()
}

/// Parses and validates a market file.
pub fn parse_market(text: &str) -> Result<MarketModel> {
    let file: MarketFile =
        serde_json::from_str(text).map_err(|e| MarketError::Json(e.to_string()))?;
    let atoms = file.omega;
    let k = atoms.len();
    let index = |label: &String, context: &str| {
        atoms
            .iter()
            .position(|a| a == label)
            .ok_or_else(|| MarketError::UnknownAtom {
                atom: label.clone(),
                context: context.to_string(),
            })
    };
    let probabilities = read_atom_map(&atoms, &file.probabilities, "P", false)?;
    let assets = file
        .assets
        .iter()
        .map(|a| {
            Ok(Asset {
                name: a.name.clone(),
                prices: a
                    .prices
                    .iter()
                    .enumerate()
                    .map(|(t, m)| {
                        read_atom_map(
                            &atoms,
                            m,
                            &format!("prices of {} at time {t}", a.name),
                            false,
                        )
                    })
                    .collect::<Result<_>>()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut agents = Vec::with_capacity(file.agents.len());
    for a in &file.agents {
        let mut partitions = Vec::with_capacity(a.filtration.len());
        for (t, blocks) in a.filtration.iter().enumerate() {
            let context = format!("filtration of {} at time {t}", a.name);
            let blocks = blocks
                .iter()
                .map(|b| {
                    b.iter()
                        .map(|l| index(l, &context))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            let part = Partition::new(blocks, k).ok_or_else(|| MarketError::NotAPartition {
                agent: a.name.clone(),
                time: t,
            })?;
            partitions.push(part);
        }
        let mut assets_idx = Vec::with_capacity(a.assets.len());
        for &j in &a.assets {
            if j == 0 || j > file.assets.len() {
                return Err(MarketError::UnknownAssetIndex {
                    agent: a.name.clone(),
                    index: j,
                });
            }
            assets_idx.push(j - 1);
        }
        assets_idx.sort_unstable();
        assets_idx.dedup();
        agents.push(AgentSpec {
            name: a.name.clone(),
            assets: assets_idx,
            filtration: Filtration::new(partitions),
        });
    }
    let model = MarketModel::new(atoms, probabilities, file.horizon, assets, agents)?;
    let Some(ex) = file.exchanges else {
        return Ok(model);
    };
    let config = exchange_config(&model, ex)?;
    model.with_exchanges(config)
}

fn exchange_config(model: &MarketModel, ex: ExchangeFile) -> Result<ExchangeConfig> {
    Ok(match ex.mode.as_str() {
        "generators" => ExchangeConfig::Generators(
            ex.generators
                .iter()
                .enumerate()
                .map(|(g, maps)| {
                    let y = read_random_vector(
                        model.atoms(),
                        maps,
                        &format!("exchange generator {}", g + 1),
                    )?;
                    model.check_random_vector(&y, "exchange generator")?;
                    Ok(y)
                })
                .collect::<Result<_>>()?,
        ),
        "zero_sum_partition" => ExchangeConfig::ZeroSumPartition {
            time: ex
                .time
                .ok_or_else(|| MarketError::Json("zero_sum_partition requires \"time\"".into()))?,
        },
        "deterministic" => ExchangeConfig::Deterministic,
        other => return Err(MarketError::UnknownExchangeMode(other.to_string())),
    })
}

/// Parses a standalone exchange declaration, the same object a market file
/// carries under `"exchanges"`.
pub fn parse_exchanges(model: &MarketModel, text: &str) -> Result<ExchangeConfig> {
    let ex: ExchangeFile =
        serde_json::from_str(text).map_err(|e| MarketError::Json(e.to_string()))?;
    exchange_config(model, ex)
}

/// Serializes a model in the market file format (pretty-printed JSON).
pub fn serialize_market(model: &MarketModel) -> String {
    let atoms = model.atoms();
    let file = MarketFile {
        omega: atoms.to_vec(),
        probabilities: write_atom_map(atoms, model.probabilities()),
        horizon: model.horizon(),
        assets: model
            .assets()
            .iter()
            .map(|a| AssetFile {
                name: a.name.clone(),
                prices: a.prices.iter().map(|p| write_atom_map(atoms, p)).collect(),
            })
            .collect(),
        agents: model
            .agents()
            .iter()
            .map(|a| AgentFile {
                name: a.name.clone(),
                assets: a.assets.iter().map(|j| j + 1).collect(),
                filtration: a
                    .filtration
                    .partitions()
                    .iter()
                    .map(|p| {
                        p.blocks()
                            .iter()
                            .map(|b| b.iter().map(|&x| atoms[x].clone()).collect())
                            .collect()
                    })
                    .collect(),
            })
            .collect(),
        exchanges: model.exchanges().map(|cfg| match cfg {
            ExchangeConfig::Deterministic => ExchangeFile {
                mode: "deterministic".into(),
                generators: Vec::new(),
                time: None,
            },
            ExchangeConfig::Generators(gens) => ExchangeFile {
                mode: "generators".into(),
                generators: gens.iter().map(|g| write_random_vector(atoms, g)).collect(),
                time: None,
            },
            ExchangeConfig::ZeroSumPartition { time } => ExchangeFile {
                mode: "zero_sum_partition".into(),
                generators: Vec::new(),
                time: Some(*time),
            },
        }),
    };
    serde_json::to_string_pretty(&file).expect("market serialization")
}
