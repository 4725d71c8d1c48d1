//! Planted random-graph models and exact moment oracles.
//!
//! Three families (hidden subclique, stochastic block model, Toeplitz seriation),
//! each with independent or permutation sampling of the latent assignment, and
//! the ε-alteration used to define the alternative hypothesis. Every moment is
//! computed exactly by a reduced enumeration of the latent state of the involved
//! nodes; when that state space exceeds the configured budget the oracle either
//! falls back to a seeded Monte-Carlo estimate or reports the cap.

mod engine;
mod value;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::str::FromStr;
use std::sync::Mutex;

use num_traits::{One, Signed, Zero};
use serde::{Serialize, Serializer};

use crate::error::{cap, invalid, LdError, Result};
use crate::graph_core::{components_of, nontrivial_components, LabeledGraph};
use crate::rational::{format_rational, q_frac, q_from_big, Q};

pub(crate) use engine::{Factor, Problem, Welford};
pub use value::{MomentReport, MomentValue};

/// Default maximum number of reduced latent states enumerated exactly.
pub const DEFAULT_STATE_BUDGET: u64 = 100_000_000;

/// Model family: where the signal matrix `Θ` is non-zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    /// Hidden subclique: `Θ_ij = λ 1{i ≤ k} 1{j ≤ k}`.
    Hs,
    /// Stochastic block model with `n/k` blocks of size `k`.
    Sbm,
    /// Toeplitz seriation: `Θ_ij = λ 1{|i - j| ≤ k/2}`.
    Ts,
}

/// Latent assignment law.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sampling {
    /// `z_i` i.i.d. uniform on `[n]`.
    Independent,
    /// `z` a uniform permutation of `[n]`.
    Permutation,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Hs => "hs",
            Family::Sbm => "sbm",
            Family::Ts => "ts",
        })
    }
}

impl FromStr for Family {
    type Err = LdError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hs" => Ok(Family::Hs),
            "sbm" => Ok(Family::Sbm),
            "ts" => Ok(Family::Ts),
            other => invalid(format!("unknown family '{other}' (expected hs, sbm or ts)")),
        }
    }
}

impl fmt::Display for Sampling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sampling::Independent => "independent",
            Sampling::Permutation => "permutation",
        })
    }
}

impl FromStr for Sampling {
    type Err = LdError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "independent" | "i" => Ok(Sampling::Independent),
            "permutation" | "p" => Ok(Sampling::Permutation),
            other => invalid(format!("unknown sampling '{other}' (expected independent or permutation)")),
        }
    }
}

fn ser_rational<S: Serializer>(q: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(q))
}

fn ser_display<T: fmt::Display, S: Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

/// A validated model: family, sampling scheme, and parameters `n, k, q, λ`.
/// Fields are declared in sorted order so that JSON output has sorted keys.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct ModelSpec {
    #[serde(serialize_with = "ser_display")]
    pub family: Family,
    pub k: u64,
    #[serde(serialize_with = "ser_rational")]
    pub lambda: Q,
    pub n: u64,
    #[serde(serialize_with = "ser_rational")]
    pub q: Q,
    #[serde(serialize_with = "ser_display")]
    pub sampling: Sampling,
}

impl ModelSpec {
    /// Validates and builds a model; the error message names the violated invariant.
    pub fn new(family: Family, sampling: Sampling, n: u64, k: u64, q: Q, lambda: Q) -> Result<Self> {
        if n == 0 || k == 0 {
            return invalid("n and k must be positive");
        }
        if k > n {
            return invalid(format!("k = {k} must not exceed n = {n}"));
        }
        if family == Family::Sbm && !n.is_multiple_of(k) {
            return invalid(format!("the block model needs k | n (k = {k}, n = {n})"));
        }
        if family == Family::Ts && !k.is_multiple_of(2) {
            return invalid(format!("Toeplitz seriation needs an even k (k = {k})"));
        }
        if !q.is_positive() || q > q_frac(1, 2) {
            return invalid(format!("q = {} must lie in (0, 1/2]", format_rational(&q)));
        }
        if lambda.is_negative() {
            return invalid(format!("lambda = {} must be non-negative", format_rational(&lambda)));
        }
        if &q + &lambda > Q::one() {
            return invalid(format!(
                "q + lambda = {} must not exceed 1",
                format_rational(&(&q + &lambda))
            ));
        }
        Ok(ModelSpec { family, sampling, n, k, q, lambda })
    }

    /// Short name such as `HS-I` or `SBM-P`.
    pub fn name(&self) -> String {
        let fam = match self.family {
            Family::Hs => "HS",
            Family::Sbm => "SBM",
            Family::Ts => "TS",
        };
        let s = match self.sampling {
            Sampling::Independent => "I",
            Sampling::Permutation => "P",
        };
        format!("{fam}-{s}")
    }

    /// `q̄ = q (1 - q)`, the null edge variance.
    pub fn q_bar(&self) -> Q {
        &self.q * (Q::one() - &self.q)
    }

    /// `p = q + λ`, the largest connection probability.
    pub fn p(&self) -> Q {
        &self.q + &self.lambda
    }

    /// `p̄ = p (1 - q)^2 + (1 - p) q^2 = q̄ + λ (1 - 2q)`.
    pub fn p_bar(&self) -> Q {
        let one = Q::one();
        let p = self.p();
        &p * (&one - &self.q) * (&one - &self.q) + (&one - &p) * &self.q * &self.q
    }

    /// Number of blocks `n / k` (block model).
    pub fn blocks(&self) -> u64 {
        self.n / self.k
    }

    /// Probability that `m = Σ sizes` given nodes fall into the blocks according to one
    /// fixed set partition with these part sizes (same block within a part, distinct
    /// blocks across parts). Summed over all set partitions this gives 1.
    pub fn block_partition_probability(&self, sizes: &[usize]) -> Result<Q> {
        if self.family != Family::Sbm {
            return invalid("partition probabilities are defined for the block model only");
        }
        let p = engine::Params::from_model(self, None, DEFAULT_STATE_BUDGET);
        Ok(engine::sbm_partition_probability(&p, sizes))
    }

    /// Signal matrix entry `Θ_ab` for distinct latent positions `a, b ∈ [n]`.
    pub fn theta(&self, a: u64, b: u64) -> Result<Q> {
        if a == b {
            return invalid("theta is defined for distinct positions only");
        }
        if a == 0 || b == 0 || a > self.n || b > self.n {
            return invalid(format!("positions must lie in [1, {}]", self.n));
        }
        let on = match self.family {
            Family::Hs => a <= self.k && b <= self.k,
            Family::Sbm => (a - 1) / self.k == (b - 1) / self.k,
            Family::Ts => a.abs_diff(b) <= self.k / 2,
        };
        Ok(if on { self.lambda.clone() } else { Q::zero() })
    }
}

/// The ε-alteration: under the alternative, a random part of the planted
/// structure (clique members, one block, one window) has each of its nodes
/// erased with probability `ε`, and erased nodes carry no signal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct AlterationSpec {
    #[serde(serialize_with = "ser_rational")]
    pub epsilon: Q,
}

impl AlterationSpec {
    pub fn new(epsilon: Q) -> Result<Self> {
        if !epsilon.is_positive() || epsilon >= Q::one() {
            return invalid(format!("epsilon = {} must lie in (0, 1)", format_rational(&epsilon)));
        }
        Ok(AlterationSpec { epsilon })
    }
}

/// Budget and Monte-Carlo fallback settings of a [`MomentOracle`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleConfig {
    /// Largest reduced state space enumerated exactly.
    pub state_budget: u64,
    /// Monte-Carlo samples used when the budget is exceeded; `None` disables the fallback.
    pub mc_samples: Option<u64>,
    /// Root seed of the Monte-Carlo fallback.
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { state_budget: DEFAULT_STATE_BUDGET, mc_samples: None, seed: 0 }
    }
}

type CacheKey = (bool, Sampling, Problem);

/// Moment oracle for one model (and optionally one alteration).
///
/// All public operations are pure functions of the model and their arguments;
/// an internal cache shares sub-results across calls and threads.
pub struct MomentOracle {
    model: ModelSpec,
    alteration: Option<AlterationSpec>,
    config: OracleConfig,
    cache: Mutex<HashMap<CacheKey, MomentValue>>,
}

impl MomentOracle {
    pub fn new(model: ModelSpec) -> Self {
        MomentOracle { model, alteration: None, config: OracleConfig::default(), cache: Mutex::new(HashMap::new()) }
    }

    /// Attaches an alteration (needed by [`MomentOracle::altered_centered_mean`]).
    pub fn with_alteration(mut self, alteration: Option<AlterationSpec>) -> Self {
        self.alteration = alteration;
        self.cache.lock().expect("cache lock").clear();
        self
    }

    pub fn with_config(mut self, config: OracleConfig) -> Self {
        self.config = config;
        self.cache.lock().expect("cache lock").clear();
        self
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn alteration(&self) -> Option<&AlterationSpec> {
        self.alteration.as_ref()
    }

    fn check_labels(&self, g: &LabeledGraph) -> Result<()> {
        if g.max_label() > self.model.n {
            return invalid(format!("labeled graph uses node {} > n = {}", g.max_label(), self.model.n));
        }
        Ok(())
    }

    /// `E[P_{G,π}]`, the mean of the edge monomial of a labeled graph.
    pub fn raw_moment(&self, g: &LabeledGraph) -> Result<MomentValue> {
        self.check_labels(g)?;
        let edges = signal_edges(&g.labeled_edges());
        self.expectation(&Problem::from_labeled(&edges), false, self.model.sampling)
    }

    /// `E[∏ Y_e]` over a labeled edge list; repeated pairs contribute higher powers.
    pub fn raw_edge_moment(&self, edges: &[(u64, u64)]) -> Result<MomentValue> {
        self.expectation(&Problem::from_labeled(&signal_edges(edges)), false, self.model.sampling)
    }

    /// `E[P_{G1,π1} P_{G2,π2}]`; shared labeled edges contribute their conditional second moment.
    pub fn raw_product_moment(&self, g1: &LabeledGraph, g2: &LabeledGraph) -> Result<MomentValue> {
        self.check_labels(g1)?;
        self.check_labels(g2)?;
        let mut edges = signal_edges(&g1.labeled_edges());
        edges.extend(signal_edges(&g2.labeled_edges()));
        self.expectation(&Problem::from_labeled(&edges), false, self.model.sampling)
    }

    /// `E[P̄_{G1,π1} P̄_{G2,π2}]` (or `E[P̄_{G1,π1}]` when `g2` is `None`), where each
    /// connected component's monomial is recentered by its mean.
    pub fn centered_product_moment(&self, g1: &LabeledGraph, g2: Option<&LabeledGraph>) -> Result<MomentValue> {
        self.check_labels(g1)?;
        let mut items = labeled_components(g1);
        if let Some(g2) = g2 {
            self.check_labels(g2)?;
            items.extend(labeled_components(g2));
        }
        self.centered_expectation(&items, None, false)
    }

    /// `E_{H1}[P̄_{G,π}]`: the centered monomial (centered under the null) averaged
    /// under the altered distribution. Without an attached alteration this is the null mean.
    pub fn altered_centered_mean(&self, g: &LabeledGraph) -> Result<MomentValue> {
        self.check_labels(g)?;
        self.centered_expectation(&labeled_components(g), None, self.alteration.is_some())
    }

    /// `E[x]` with `x = 1{Θ_{z1 z2} ≠ 0}`.
    pub fn x_mean(&self) -> Result<MomentValue> {
        if self.model.n < 2 {
            return invalid("x needs at least two nodes");
        }
        self.centered_expectation(&[], Some((1, 2)), false)
    }

    /// `E[x P̄^{(1,2)}_{G,π}]` for a rooted labeled graph (roots on nodes 1 and 2).
    pub fn x_weighted_centered_moment(&self, g: &LabeledGraph) -> Result<MomentValue> {
        if !g.template().is_rooted() {
            return invalid("x-weighted moments need a rooted template");
        }
        self.check_labels(g)?;
        self.centered_expectation(&labeled_components(g), Some((1, 2)), false)
    }

    /// Expectation of `[x] ∏_l (P_l - E[P_l])` where each item `l` is a connected
    /// labeled edge list, `x` (optional) is the indicator `1{Θ ≠ 0}` on the given
    /// node pair, and the outer expectation is under the altered law when `altered`.
    ///
    /// Labels are arbitrary identifiers (only equality matters: the models are
    /// exchangeable). Under independent sampling (and for the hidden-subclique
    /// alteration, which erases nodes independently) items sharing no node are
    /// independent, so the product splits over clusters of items that overlap.
    pub fn centered_expectation(
        &self,
        items: &[Vec<(u64, u64)>],
        indicator: Option<(u64, u64)>,
        altered: bool,
    ) -> Result<MomentValue> {
        let altered = altered && self.alteration.is_some();
        if altered && self.model.lambda.is_zero() {
            // The alteration only removes signal; at zero signal H1 equals the null.
            return self.centered_expectation(items, indicator, false);
        }
        let means = items
            .iter()
            .map(|it| self.expectation(&Problem::from_labeled(&signal_edges(it)), false, self.model.sampling))
            .collect::<Result<Vec<_>>>()?;
        let splits = self.model.sampling == Sampling::Independent && (!altered || self.model.family == Family::Hs);
        if !splits {
            let all: Vec<usize> = (0..items.len()).collect();
            return self.inclusion_exclusion(items, &means, &all, indicator, altered);
        }
        // Cluster items (and the indicator) that share nodes.
        let mut nodes: Vec<BTreeSet<u64>> =
            items.iter().map(|it| it.iter().flat_map(|&(a, b)| [a, b]).collect()).collect();
        if let Some((a, b)) = indicator {
            nodes.push([a, b].into());
        }
        let count = nodes.len();
        let mut overlap = Vec::new();
        for i in 0..count {
            for j in i + 1..count {
                if !nodes[i].is_disjoint(&nodes[j]) {
                    overlap.push((i, j));
                }
            }
        }
        let mut result = MomentValue::one();
        for cluster in components_of(count, &overlap) {
            let has_indicator = indicator.is_some() && cluster.contains(&items.len());
            let members: Vec<usize> = cluster.iter().copied().filter(|&i| i < items.len()).collect();
            if !altered && !has_indicator && members.len() == 1 {
                return Ok(MomentValue::zero());
            }
            let value = self.inclusion_exclusion(
                items,
                &means,
                &members,
                if has_indicator { indicator } else { None },
                altered,
            )?;
            result = result.mul(&value);
            if result.exact().is_some_and(|v| v.is_zero()) {
                return Ok(MomentValue::zero());
            }
        }
        Ok(result)
    }

    fn inclusion_exclusion(
        &self,
        items: &[Vec<(u64, u64)>],
        means: &[MomentValue],
        members: &[usize],
        indicator: Option<(u64, u64)>,
        altered: bool,
    ) -> Result<MomentValue> {
        let mut total = MomentValue::zero();
        for subset in 0u64..(1 << members.len()) {
            let mut coefficient = MomentValue::one();
            let mut edges = Vec::new();
            for (pos, &l) in members.iter().enumerate() {
                if subset >> pos & 1 == 1 {
                    coefficient = coefficient.mul(&means[l].neg());
                } else {
                    edges.extend(signal_edges(&items[l]));
                }
            }
            if coefficient.exact().is_some_and(|c| c.is_zero()) {
                continue;
            }
            if let Some((a, b)) = indicator {
                edges.push((a, b, Factor::INDICATOR));
            }
            let term = self.expectation(&Problem::from_labeled(&edges), altered, self.model.sampling)?;
            total = total.add(&coefficient.mul(&term));
        }
        Ok(total)
    }

    /// `Ẽ[1{𝒜} ∏ edges]` with the latent assignment sampled independently (whatever
    /// the model's own scheme), where `𝒜` is the event that the graph on `groups`
    /// — two groups adjacent when some node of one shares its latent value with
    /// some node of the other — is connected. Computed exactly by summing over the
    /// equality pattern of the latent values: given a pattern with `t` distinct values
    /// these values form a uniform injective tuple, i.e. a permutation-sampling problem
    /// on the merged nodes.
    pub fn independent_event_expectation(
        &self,
        edges: &[(u64, u64)],
        groups: &[Vec<u64>],
    ) -> Result<MomentValue> {
        let problem = Problem::from_labeled(&signal_edges(edges));
        let mut labels: Vec<u64> = Vec::new();
        for &(a, b) in edges {
            for x in [a, b] {
                if !labels.contains(&x) {
                    labels.push(x);
                }
            }
        }
        for g in groups {
            for &x in g {
                if !labels.contains(&x) {
                    labels.push(x);
                }
            }
        }
        let m = labels.len();
        if engine::bell(m) > self.config.state_budget as u128 {
            return cap(format!("{m} nodes give too many equality patterns"));
        }
        let group_of: Vec<Vec<usize>> = {
            // group membership per label (labels outside every group belong to none)
            labels.iter().map(|x| (0..groups.len()).filter(|&g| groups[g].contains(x)).collect()).collect()
        };
        // Problem node `i` corresponds to the i-th label in first-appearance order of `edges`.
        let n = self.model.n;
        let nm = q_from_big(num_traits::pow(num_bigint::BigInt::from(n), m));
        let mut total = MomentValue::zero();
        let mut rgs = vec![0usize; m];
        loop {
            let t = rgs.iter().copied().max().map_or(0, |x| x + 1);
            if t as u64 <= n && event_connected(&rgs, &group_of, groups.len()) {
                let merged = merge_nodes(&problem, &rgs[..problem.m]);
                let prob = q_from_big(crate::rational::falling_factorial(n, t as u64)) / &nm;
                let value = self.expectation(&merged, false, Sampling::Permutation)?;
                total = total.add(&value.scale(&prob));
            }
            if !next_rgs(&mut rgs) {
                break;
            }
        }
        Ok(total)
    }

    /// Expectation of a problem, with caching, constant-edge extraction,
    /// component splitting and Monte-Carlo fallback.
    pub(crate) fn expectation(&self, problem: &Problem, altered: bool, sampling: Sampling) -> Result<MomentValue> {
        let key = (altered, sampling, problem.clone());
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(v.clone());
        }
        let value = self.compute(problem, altered, sampling)?;
        self.cache.lock().expect("cache lock").insert(key, value.clone());
        Ok(value)
    }

    fn params(&self, sampling: Sampling) -> engine::Params {
        let mut p = engine::Params::from_model(
            &self.model,
            self.alteration.as_ref().map(|a| a.epsilon.clone()),
            self.config.state_budget,
        );
        p.sampling = sampling;
        p
    }

    fn compute(&self, problem: &Problem, altered: bool, sampling: Sampling) -> Result<MomentValue> {
        let params = self.params(sampling);
        if sampling == Sampling::Permutation && problem.m as u64 > self.model.n {
            return invalid(format!("{} distinct nodes exceed n = {}", problem.m, self.model.n));
        }
        let mut constant = Q::one();
        let mut remaining: Vec<(usize, usize, Factor, Q, Q)> = Vec::new();
        for &(a, b, f) in &problem.edges {
            let (w0, w1) = params.weights(f);
            if w0.is_zero() && w1.is_zero() {
                return Ok(MomentValue::zero());
            }
            if w0 == w1 {
                constant *= w0;
            } else {
                remaining.push((a, b, f, w0, w1));
            }
        }
        if remaining.is_empty() {
            return Ok(MomentValue::Exact(constant));
        }
        let splits = sampling == Sampling::Independent && (!altered || self.model.family == Family::Hs);
        let pairs: Vec<(usize, usize)> = remaining.iter().map(|e| (e.0, e.1)).collect();
        let comps: Vec<Vec<usize>> =
            components_of(problem.m, &pairs).into_iter().filter(|c| remaining.iter().any(|e| c.contains(&e.0))).collect();
        if splits && comps.len() > 1 {
            let mut value = MomentValue::Exact(constant);
            for comp in comps {
                let sub: Vec<(usize, usize, Factor)> =
                    remaining.iter().filter(|e| comp.contains(&e.0)).map(|e| (e.0, e.1, e.2)).collect();
                let v = self.expectation(&Problem::from_labeled(&sub), altered, sampling)?;
                value = value.mul(&v);
                if value.exact().is_some_and(|x| x.is_zero()) {
                    break;
                }
            }
            return Ok(value);
        }
        // Renumber the nodes still involved.
        let mut index: HashMap<usize, usize> = HashMap::new();
        let mut weighted = Vec::with_capacity(remaining.len());
        for (a, b, _, w0, w1) in remaining {
            let next = index.len();
            let a = *index.entry(a).or_insert(next);
            let next = index.len();
            let b = *index.entry(b).or_insert(next);
            weighted.push(engine::WeightedEdge { a, b, w0, w1 });
        }
        let m = index.len();
        if let Some(v) = engine::enumerate_exact(&params, m, &weighted, altered) {
            return Ok(MomentValue::Exact(constant * v));
        }
        let Some(samples) = self.config.mc_samples else {
            return cap(format!(
                "reduced latent enumeration for {m} nodes exceeds the budget of {} states",
                self.config.state_budget
            ));
        };
        let mut hasher = DefaultHasher::new();
        (altered, sampling, problem).hash(&mut hasher);
        let seed = self.config.seed ^ hasher.finish();
        let (mean, std_error) = engine::monte_carlo(&params, m, &weighted, altered, samples, seed);
        Ok(MomentValue::MonteCarlo { mean, std_error, samples, seed: self.config.seed }.scale(&constant))
    }
}

fn signal_edges(edges: &[(u64, u64)]) -> Vec<(u64, u64, Factor)> {
    edges.iter().map(|&(a, b)| (a, b, Factor::SIGNAL)).collect()
}

/// Non-trivial connected components of a labeled graph, as labeled edge lists.
pub(crate) fn labeled_components(g: &LabeledGraph) -> Vec<Vec<(u64, u64)>> {
    let t = g.template();
    nontrivial_components(t)
        .into_iter()
        .map(|comp| {
            t.edges()
                .iter()
                .filter(|(a, _)| comp.contains(a))
                .map(|&(a, b)| (g.labels()[a], g.labels()[b]))
                .collect()
        })
        .collect()
}

/// Merges problem nodes according to `part` (node -> part index) without
/// collapsing repeated factors: distinct edge variables stay distinct factors.
fn merge_nodes(problem: &Problem, part: &[usize]) -> Problem {
    let mut merged: std::collections::BTreeMap<(usize, usize), Factor> = std::collections::BTreeMap::new();
    for &(a, b, f) in &problem.edges {
        let (pa, pb) = (part[a], part[b]);
        let e = merged.entry((pa.min(pb), pa.max(pb))).or_default();
        *e = e.combine(f);
    }
    let m = part.iter().copied().max().map_or(0, |x| x + 1);
    Problem { m, edges: merged.into_iter().map(|((a, b), f)| (a, b, f)).collect() }
}

/// Next restricted growth string in lexicographic order; false after the last one.
fn next_rgs(rgs: &mut [usize]) -> bool {
    for i in (1..rgs.len()).rev() {
        let prefix_max = rgs[..i].iter().copied().max().unwrap_or(0);
        if rgs[i] <= prefix_max {
            rgs[i] += 1;
            for x in rgs.iter_mut().skip(i + 1) {
                *x = 0;
            }
            return true;
        }
    }
    false
}

fn event_connected(rgs: &[usize], group_of: &[Vec<usize>], groups: usize) -> bool {
    if groups <= 1 {
        return true;
    }
    let mut links = Vec::new();
    for i in 0..rgs.len() {
        for j in 0..rgs.len() {
            if rgs[i] == rgs[j] {
                for &gi in &group_of[i] {
                    for &gj in &group_of[j] {
                        if gi != gj {
                            links.push((gi, gj));
                        }
                    }
                }
            }
        }
    }
    components_of(groups, &links).len() == 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_core::canonicalize;
    use crate::rational::q_int;

    fn hs(n: u64, k: u64, lambda: Q) -> ModelSpec {
        ModelSpec::new(Family::Hs, Sampling::Independent, n, k, q_frac(1, 2), lambda).unwrap()
    }

    #[test]
    fn validation_names_the_invariant() {
        let e = ModelSpec::new(Family::Sbm, Sampling::Independent, 10, 3, q_frac(1, 2), q_frac(1, 10)).unwrap_err();
        assert!(e.to_string().contains("k | n"));
        let e = ModelSpec::new(Family::Ts, Sampling::Independent, 10, 3, q_frac(1, 2), q_frac(1, 10)).unwrap_err();
        assert!(e.to_string().contains("even"));
        let e = ModelSpec::new(Family::Hs, Sampling::Independent, 10, 3, q_frac(3, 4), q_frac(1, 10)).unwrap_err();
        assert!(e.to_string().contains("(0, 1/2]"));
        assert!(AlterationSpec::new(q_int(1)).is_err());
    }

    #[test]
    fn theta_examples() {
        let l = q_frac(1, 10);
        let m = hs(10, 2, l.clone());
        assert_eq!(m.theta(1, 2).unwrap(), l);
        assert!(m.theta(1, 3).unwrap().is_zero());
        let s = ModelSpec::new(Family::Sbm, Sampling::Independent, 9, 3, q_frac(1, 2), l.clone()).unwrap();
        assert_eq!(s.theta(1, 3).unwrap(), l);
        assert!(s.theta(3, 4).unwrap().is_zero());
        let t = ModelSpec::new(Family::Ts, Sampling::Independent, 10, 4, q_frac(1, 2), l.clone()).unwrap();
        assert_eq!(t.theta(1, 3).unwrap(), l);
        assert!(t.theta(1, 4).unwrap().is_zero());
        assert!(t.theta(2, 2).is_err());
    }

    #[test]
    fn p_bar_identity() {
        let m = ModelSpec::new(Family::Hs, Sampling::Independent, 10, 2, q_frac(1, 3), q_frac(1, 7)).unwrap();
        assert_eq!(m.p_bar(), m.q_bar() + &m.lambda * (Q::one() - q_int(2) * &m.q));
    }

    #[test]
    fn single_edge_moments() {
        let edge = LabeledGraph::standard(canonicalize(2, &[(0, 1)], None).unwrap());
        let o = MomentOracle::new(hs(10, 2, q_frac(1, 10)));
        assert_eq!(o.raw_moment(&edge).unwrap(), MomentValue::Exact(q_frac(1, 250)));
        let s = ModelSpec::new(Family::Sbm, Sampling::Independent, 9, 3, q_frac(1, 2), q_frac(1, 10)).unwrap();
        assert_eq!(MomentOracle::new(s).raw_moment(&edge).unwrap(), MomentValue::Exact(q_frac(1, 30)));
        assert_eq!(o.raw_product_moment(&edge, &edge).unwrap(), MomentValue::Exact(q_frac(1, 4)));
        assert_eq!(o.centered_product_moment(&edge, None).unwrap(), MomentValue::zero());
    }

    #[test]
    fn restricted_growth_strings_count_bell_numbers() {
        for m in 1..7 {
            let mut rgs = vec![0; m];
            let mut count = 1;
            while next_rgs(&mut rgs) {
                count += 1;
            }
            assert_eq!(count as u128, engine::bell(m));
        }
    }
}
