//! Monte-Carlo simulator of the six models and their alterations, with direct
//! evaluation of the normalized basis polynomials on sampled graphs.
//!
//! Every analytic quantity of [`crate::basis`] has an empirical counterpart here,
//! computed from nothing but sampled instances and brute-force injection sums.
//! Sampling is split into fixed-size tasks; task `i` draws from the ChaCha stream
//! `i` of the root seed, so estimates are bit-identical for a given seed whatever
//! the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::basis::{basis_templates, gram_matrix, mean_entry, variance_proxy, x_weighted_entry};
use crate::error::{cap, invalid, Result};
use crate::graph_core::{nontrivial_components, Template};
use crate::models::{AlterationSpec, Family, ModelSpec, MomentOracle, MomentValue, Sampling, Welford};
use crate::rational::q_to_f64;

/// Largest `n` for which injection sums are evaluated.
pub const MAX_NODES: u64 = 12;
/// Largest template vertex count for which injection sums are evaluated.
pub const MAX_TEMPLATE_VERTICES: usize = 6;
/// Samples drawn by one sampling task (one ChaCha stream).
pub const TASK_SAMPLES: u64 = 1024;

/// A sampled graph: latent positions, centered adjacency, and erasure marks (H1 only).
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    /// Latent position `z_i ∈ [n]` of each node.
    pub z: Vec<u64>,
    /// Row-major `n × n` centered adjacency `Y_ij = Y*_ij - q` (zero diagonal).
    pub y: Vec<f64>,
    /// Nodes whose signal was erased by the alteration.
    pub erased: Option<Vec<bool>>,
}

impl Instance {
    pub fn n(&self) -> usize {
        self.z.len()
    }

    /// Centered edge value between nodes `i` and `j` (0-based).
    pub fn y(&self, i: usize, j: usize) -> f64 {
        self.y[i * self.n() + j]
    }

    /// The instance with node `i` renamed `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Instance> {
        let n = self.n();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return invalid("relabeling must be a permutation of the nodes");
        }
        let mut z = vec![0; n];
        let mut y = vec![0.0; n * n];
        for i in 0..n {
            z[perm[i]] = self.z[i];
            for j in 0..n {
                y[perm[i] * n + perm[j]] = self.y[i * n + j];
            }
        }
        let erased = self.erased.as_ref().map(|e| {
            let mut out = vec![false; n];
            for i in 0..n {
                out[perm[i]] = e[i];
            }
            out
        });
        Ok(Instance { z, y, erased })
    }
}

/// Whether `Θ_{ab}` lies on the planted support (also for `a = b`, possible under
/// independent sampling).
fn support(model: &ModelSpec, a: u64, b: u64) -> bool {
    match model.family {
        Family::Hs => a <= model.k && b <= model.k,
        Family::Sbm => (a - 1) / model.k == (b - 1) / model.k,
        Family::Ts => a.abs_diff(b) <= model.k / 2,
    }
}

/// Samples one instance with the given generator.
pub fn sample_instance_with<R: Rng>(model: &ModelSpec, alteration: Option<&AlterationSpec>, rng: &mut R) -> Instance {
    let n = model.n as usize;
    let z: Vec<u64> = match model.sampling {
        Sampling::Independent => (0..n).map(|_| rng.random_range(1..=model.n)).collect(),
        Sampling::Permutation => {
            let mut z: Vec<u64> = (1..=model.n).collect();
            // Fisher–Yates.
            for i in (1..n).rev() {
                z.swap(i, rng.random_range(0..=i));
            }
            z
        }
    };
    let erased = alteration.map(|alt| {
        let eps = q_to_f64(&alt.epsilon);
        let target: Box<dyn Fn(u64) -> bool> = match model.family {
            Family::Hs => Box::new(|zi| zi <= model.k),
            Family::Sbm => {
                let block = rng.random_range(0..model.blocks());
                Box::new(move |zi| (zi - 1) / model.k == block)
            }
            Family::Ts => {
                let centre = rng.random_range(1..=model.n);
                Box::new(move |zi| zi.abs_diff(centre) <= model.k / 2)
            }
        };
        z.iter().map(|&zi| target(zi) && rng.random_bool(eps)).collect::<Vec<bool>>()
    });
    let q = q_to_f64(&model.q);
    let lambda = q_to_f64(&model.lambda);
    let mut y = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let kept = erased.as_ref().is_none_or(|e| !e[i] && !e[j]);
            let p = if kept && support(model, z[i], z[j]) { q + lambda } else { q };
            let v = if rng.random::<f64>() < p { 1.0 - q } else { -q };
            y[i * n + j] = v;
            y[j * n + i] = v;
        }
    }
    Instance { z, y, erased }
}

/// Samples one instance from a seed.
pub fn sample_instance(model: &ModelSpec, alteration: Option<&AlterationSpec>, seed: u64) -> Instance {
    sample_instance_with(model, alteration, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// `x = 1{Θ_{z_1 z_2} ≠ 0}` on an instance.
pub fn x_indicator(model: &ModelSpec, inst: &Instance) -> f64 {
    if model.lambda == num_traits::Zero::zero() {
        return 0.0;
    }
    if support(model, inst.z[0], inst.z[1]) {
        1.0
    } else {
        0.0
    }
}

/// Evaluator of `Ψ_G` (or the rooted `Ψ^{(1,2)}_G`) by summing the centered
/// monomial over every injection of the template's vertices into the nodes.
#[derive(Clone, Debug)]
pub struct PsiEvaluator {
    template: Template,
    /// Vertices in evaluation order; components are contiguous.
    order: Vec<usize>,
    /// For each position in `order`: earlier vertices adjacent to it.
    back_edges: Vec<Vec<usize>>,
    /// Component index finished at this position, if any.
    closes: Vec<Option<usize>>,
    /// Null mean of each component monomial.
    means: Vec<f64>,
    /// Label pinned to each vertex (roots), if any.
    pinned: Vec<Option<usize>>,
    scale: f64,
}

impl PsiEvaluator {
    pub fn new(oracle: &MomentOracle, t: &Template) -> Result<Self> {
        let model = oracle.model();
        if model.n > MAX_NODES {
            return cap(format!("direct evaluation needs n <= {MAX_NODES} (n = {})", model.n));
        }
        if t.vertex_count() > MAX_TEMPLATE_VERTICES {
            return cap(format!("direct evaluation needs at most {MAX_TEMPLATE_VERTICES} template vertices ({t})"));
        }
        let proxy = variance_proxy(t, model)?;
        let comps = nontrivial_components(t);
        let mut order = Vec::new();
        let mut closes = Vec::new();
        let mut means = Vec::new();
        for (ci, comp) in comps.iter().enumerate() {
            let edges: Vec<(u64, u64)> = t
                .edges()
                .iter()
                .filter(|(a, _)| comp.contains(a))
                .map(|&(a, b)| (a as u64 + 1, b as u64 + 1))
                .collect();
            means.push(oracle.raw_edge_moment(&edges)?.to_f64());
            for (i, &v) in comp.iter().enumerate() {
                order.push(v);
                closes.push(if i + 1 == comp.len() { Some(ci) } else { None });
            }
        }
        let mut pinned = vec![None; t.vertex_count()];
        if let Some((r1, r2)) = t.roots() {
            pinned[r1] = Some(0);
            pinned[r2] = Some(1);
        }
        // Roots outside every edge (isolated roots) carry no factor.
        let back_edges = order
            .iter()
            .enumerate()
            .map(|(pos, &v)| {
                order[..pos]
                    .iter()
                    .copied()
                    .filter(|&u| t.edges().contains(&(u.min(v), u.max(v))))
                    .collect()
            })
            .collect();
        Ok(PsiEvaluator {
            template: t.clone(),
            order,
            back_edges,
            closes,
            means,
            pinned,
            scale: 1.0 / q_to_f64(&proxy).sqrt(),
        })
    }

    pub fn template(&self) -> &Template {
        &self.template
    }

    /// `Ψ_G(Y)` on one instance.
    pub fn evaluate(&self, inst: &Instance) -> f64 {
        let mut labels = vec![usize::MAX; self.template.vertex_count()];
        let mut used = 0u64;
        for (v, p) in self.pinned.iter().enumerate() {
            if let Some(l) = p {
                labels[v] = *l;
                used |= 1 << l;
            }
        }
        let total = self.rec(inst, 0, &mut labels, used, 1.0, 1.0);
        // Every vertex not covered by `order` is a pinned isolated root.
        total * self.scale
    }

    fn rec(&self, inst: &Instance, pos: usize, labels: &mut [usize], used: u64, done: f64, current: f64) -> f64 {
        if pos == self.order.len() {
            return done;
        }
        let v = self.order[pos];
        let step = |label: usize, used: u64, labels: &mut [usize]| -> f64 {
            labels[v] = label;
            let mut cur = current;
            for &u in &self.back_edges[pos] {
                cur *= inst.y(label, labels[u]);
            }
            match self.closes[pos] {
                Some(c) => {
                    let next = done * (cur - self.means[c]);
                    if next == 0.0 {
                        0.0
                    } else {
                        self.rec(inst, pos + 1, labels, used, next, 1.0)
                    }
                }
                None => self.rec(inst, pos + 1, labels, used, done, cur),
            }
        };
        if let Some(l) = self.pinned[v] {
            return step(l, used, labels);
        }
        let mut sum = 0.0;
        for label in 0..inst.n() {
            if used >> label & 1 == 0 {
                sum += step(label, used | 1 << label, labels);
            }
        }
        labels[v] = usize::MAX;
        sum
    }
}

/// `Ψ_G` of one template on one instance.
pub fn evaluate_psi(oracle: &MomentOracle, t: &Template, inst: &Instance) -> Result<f64> {
    if inst.n() as u64 != oracle.model().n {
        return invalid("instance size does not match the model");
    }
    Ok(PsiEvaluator::new(oracle, t)?.evaluate(inst))
}

/// Runs `samples` draws split into deterministic tasks; `observe` maps one instance
/// to the observation vector accumulated into the returned running means.
fn run_tasks<F>(samples: u64, seed: u64, dim: usize, draw: F) -> Vec<Welford>
where
    F: Fn(&mut ChaCha8Rng) -> Vec<f64> + Sync,
{
    let tasks = samples.div_ceil(TASK_SAMPLES);
    let partial: Vec<Vec<Welford>> = (0..tasks)
        .into_par_iter()
        .map(|task| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(task);
            let count = TASK_SAMPLES.min(samples - task * TASK_SAMPLES);
            let mut acc = vec![Welford::default(); dim];
            for _ in 0..count {
                for (a, x) in acc.iter_mut().zip(draw(&mut rng)) {
                    a.push(x);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Welford::default(); dim];
    for acc in &partial {
        for (t, a) in total.iter_mut().zip(acc) {
            t.merge(a);
        }
    }
    total
}

fn to_value(w: &Welford, seed: u64) -> MomentValue {
    MomentValue::MonteCarlo { mean: w.mean, std_error: w.std_error(), samples: w.count, seed }
}

fn evaluators(oracle: &MomentOracle, d: usize, rooted: bool) -> Result<(Vec<Template>, Vec<PsiEvaluator>)> {
    let templates = basis_templates(d, rooted)?;
    let evals = templates.iter().map(|t| PsiEvaluator::new(oracle, t)).collect::<Result<Vec<_>>>()?;
    Ok((templates, evals))
}

fn check_samples(samples: u64) -> Result<()> {
    if samples < 2 {
        return invalid("at least two samples are needed for a standard error");
    }
    Ok(())
}

/// Empirical Gram matrix `E[Ψ_i Ψ_j]` over `{constant} ∪ templates` under the null.
#[derive(Clone, Debug)]
pub struct EmpiricalGram {
    pub model: ModelSpec,
    pub degree: usize,
    pub rooted: bool,
    pub templates: Vec<Template>,
    pub entries: Vec<Vec<MomentValue>>,
    pub samples: u64,
    pub seed: u64,
}

impl EmpiricalGram {
    pub fn size(&self) -> usize {
        self.templates.len() + 1
    }

    /// JSON mirroring the analytic Gram matrix, with standard errors.
    pub fn to_json(&self) -> Value {
        let float: Vec<Vec<f64>> = self.entries.iter().map(|r| r.iter().map(MomentValue::to_f64).collect()).collect();
        let se: Vec<Vec<f64>> = self.entries.iter().map(|r| r.iter().map(MomentValue::std_error).collect()).collect();
        json!({
            "D": self.degree,
            "float_gamma": float,
            "model": self.model,
            "rooted": self.rooted,
            "samples": self.samples,
            "seed": self.seed,
            "std_error": se,
            "templates": self.templates.iter().map(Template::to_string).collect::<Vec<_>>(),
        })
    }
}

pub fn estimate_gram(oracle: &MomentOracle, d: usize, rooted: bool, samples: u64, seed: u64) -> Result<EmpiricalGram> {
    check_samples(samples)?;
    let (templates, evals) = evaluators(oracle, d, rooted)?;
    let size = templates.len() + 1;
    let model = oracle.model();
    let acc = run_tasks(samples, seed, size * (size + 1) / 2, |rng| {
        let inst = sample_instance_with(model, None, rng);
        let mut psi = vec![1.0];
        psi.extend(evals.iter().map(|e| e.evaluate(&inst)));
        let mut out = Vec::with_capacity(size * (size + 1) / 2);
        for i in 0..size {
            for j in i..size {
                out.push(psi[i] * psi[j]);
            }
        }
        out
    });
    let mut entries = vec![vec![MomentValue::zero(); size]; size];
    let mut idx = 0;
    for i in 0..size {
        for j in i..size {
            entries[i][j] = to_value(&acc[idx], seed);
            entries[j][i] = entries[i][j].clone();
            idx += 1;
        }
    }
    Ok(EmpiricalGram { model: model.clone(), degree: d, rooted, templates, entries, samples, seed })
}

/// Empirical `E_{H1}[Ψ_G]` per unrooted template (the null mean without an alteration).
pub fn estimate_h1_means(oracle: &MomentOracle, d: usize, samples: u64, seed: u64) -> Result<Vec<MomentValue>> {
    check_samples(samples)?;
    let (_, evals) = evaluators(oracle, d, false)?;
    let model = oracle.model();
    let alt = oracle.alteration();
    let acc = run_tasks(samples, seed, evals.len(), |rng| {
        let inst = sample_instance_with(model, alt, rng);
        evals.iter().map(|e| e.evaluate(&inst)).collect()
    });
    Ok(acc.iter().map(|w| to_value(w, seed)).collect())
}

/// Empirical `(E[x], E[x Ψ^{(1,2)}_G]...)` over the rooted templates.
pub fn estimate_corr_vector(oracle: &MomentOracle, d: usize, samples: u64, seed: u64) -> Result<Vec<MomentValue>> {
    check_samples(samples)?;
    let (_, evals) = evaluators(oracle, d, true)?;
    let model = oracle.model();
    let acc = run_tasks(samples, seed, evals.len() + 1, |rng| {
        let inst = sample_instance_with(model, None, rng);
        let x = x_indicator(model, &inst);
        let mut out = vec![x];
        out.extend(evals.iter().map(|e| if x == 0.0 { 0.0 } else { x * e.evaluate(&inst) }));
        out
    });
    Ok(acc.iter().map(|w| to_value(w, seed)).collect())
}

/// One analytic-versus-empirical comparison.
#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub analytic: f64,
    pub empirical: f64,
    pub quantity: String,
    pub std_error: f64,
    pub z_score: f64,
}

impl Comparison {
    fn new(quantity: String, analytic: f64, est: &MomentValue) -> Self {
        let empirical = est.to_f64();
        let std_error = est.std_error();
        let diff = empirical - analytic;
        let z_score = if std_error > 0.0 {
            diff / std_error
        } else if diff.abs() <= 1e-12 * analytic.abs().max(1.0) {
            0.0
        } else {
            f64::INFINITY.copysign(diff)
        };
        Comparison { analytic, empirical, quantity, std_error, z_score }
    }
}

/// Compares every analytic Gram entry (plain and rooted), every `E_{H1}[Ψ_G]` (when
/// an alteration is attached) and every correlation-vector entry with its
/// empirical estimate.
pub fn cross_check(oracle: &MomentOracle, d: usize, samples: u64, seed: u64) -> Result<Vec<Comparison>> {
    let mut out = Vec::new();
    for (rooted, stream_seed) in [(false, seed), (true, seed.wrapping_add(1))] {
        let analytic = gram_matrix(oracle, d, rooted)?;
        let empirical = estimate_gram(oracle, d, rooted, samples, stream_seed)?;
        let label = |i: usize| if i == 0 { "1".to_string() } else { analytic.templates[i - 1].to_string() };
        for i in 0..analytic.size() {
            for j in i..analytic.size() {
                let kind = if rooted { "rooted_gram" } else { "gram" };
                out.push(Comparison::new(
                    format!("{kind}[{}, {}]", label(i), label(j)),
                    analytic.entry(i, j).to_f64(),
                    &empirical.entries[i][j],
                ));
            }
        }
    }
    if oracle.alteration().is_some() {
        let templates = basis_templates(d, false)?;
        let est = estimate_h1_means(oracle, d, samples, seed.wrapping_add(2))?;
        for (t, e) in templates.iter().zip(&est) {
            out.push(Comparison::new(format!("h1_mean[{t}]"), mean_entry(oracle, t, true)?.to_f64(), e));
        }
    }
    let rooted = basis_templates(d, true)?;
    let est = estimate_corr_vector(oracle, d, samples, seed.wrapping_add(3))?;
    out.push(Comparison::new("x_mean".into(), oracle.x_mean()?.to_f64(), &est[0]));
    for (t, e) in rooted.iter().zip(&est[1..]) {
        out.push(Comparison::new(format!("x_weighted[{t}]"), x_weighted_entry(oracle, t)?.to_f64(), e));
    }
    Ok(out)
}
