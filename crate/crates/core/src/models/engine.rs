//! Reduced latent-state enumeration for expectations of edge-weight products.
//!
//! A [`Problem`] is a small multigraph on abstract nodes `0..m` whose edges carry
//! a [`Factor`]: a product of conditional moments of centered edge variables given
//! the latent assignment. Each factor is a pair of weights `(inactive, active)`
//! according to whether `Θ` is non-zero on that pair. Because both sampling schemes
//! are exchangeable, the expectation depends only on this structure, never on the
//! concrete node labels.

use std::collections::HashMap;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Family, ModelSpec, Sampling};
use crate::rational::{falling_factorial, q_from_big, q_to_f64, qpow, Q};

/// Product of basic conditional moments attached to one node pair:
/// `sig` copies of `E[Y|z]`, `sq` copies of `E[Y^2|z]`, `ind` copies of `1{Θ != 0}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) struct Factor {
    pub sig: u8,
    pub sq: u8,
    pub ind: u8,
}

impl Factor {
    pub const SIGNAL: Factor = Factor { sig: 1, sq: 0, ind: 0 };
    pub const INDICATOR: Factor = Factor { sig: 0, sq: 0, ind: 1 };

    pub fn combine(self, other: Factor) -> Factor {
        Factor { sig: self.sig + other.sig, sq: self.sq + other.sq, ind: self.ind + other.ind }
    }

    /// Two copies of the same edge variable collapse into one square factor.
    pub fn with_repeated_signal(self) -> Factor {
        let pairs = self.sig / 2;
        Factor { sig: self.sig % 2, sq: self.sq + pairs, ind: self.ind }
    }
}

/// Expectation problem on abstract nodes; edges `(a, b, factor)` with `a <= b`
/// (`a == b` is a self-pair, used when two nodes share the same latent value).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) struct Problem {
    pub m: usize,
    pub edges: Vec<(usize, usize, Factor)>,
}

impl Problem {
    /// Builds a problem from labeled edges, merging repeated pairs and renumbering
    /// nodes by order of first appearance.
    pub fn from_labeled<L: Copy + Eq + std::hash::Hash>(edges: &[(L, L, Factor)]) -> Problem {
        let mut index: HashMap<L, usize> = HashMap::new();
        let mut merged: std::collections::BTreeMap<(usize, usize), Factor> = std::collections::BTreeMap::new();
        for &(a, b, f) in edges {
            let next = index.len();
            let ia = *index.entry(a).or_insert(next);
            let next = index.len();
            let ib = *index.entry(b).or_insert(next);
            let key = (ia.min(ib), ia.max(ib));
            let entry = merged.entry(key).or_default();
            *entry = entry.combine(f);
        }
        let mut out: Vec<(usize, usize, Factor)> = merged.into_iter().map(|((a, b), f)| (a, b, f)).collect();
        // Repeated signal factors on one pair of distinct nodes are the same edge variable.
        for e in out.iter_mut() {
            if e.0 != e.1 {
                e.2 = e.2.with_repeated_signal();
            }
        }
        Problem { m: index.len(), edges: out }
    }
}

/// An edge after weights are evaluated: forced edges have zero inactive weight.
#[derive(Clone, Debug)]
pub(crate) struct WeightedEdge {
    pub a: usize,
    pub b: usize,
    pub w0: Q,
    pub w1: Q,
}

impl WeightedEdge {
    pub fn forced(&self) -> bool {
        self.w0.is_zero()
    }
}

/// Numeric parameters needed by the enumerators.
#[derive(Clone, Debug)]
pub(crate) struct Params {
    pub family: Family,
    pub sampling: Sampling,
    pub n: u64,
    pub k: u64,
    pub lambda: Q,
    pub qbar: Q,
    pub pbar: Q,
    pub epsilon: Option<Q>,
    pub budget: u64,
}

impl Params {
    pub fn from_model(model: &ModelSpec, epsilon: Option<Q>, budget: u64) -> Self {
        Params {
            family: model.family,
            sampling: model.sampling,
            n: model.n,
            k: model.k,
            lambda: model.lambda.clone(),
            qbar: model.q_bar(),
            pbar: model.p_bar(),
            epsilon,
            budget,
        }
    }

    /// `(inactive, active)` weights of a factor.
    pub fn weights(&self, f: Factor) -> (Q, Q) {
        let signal_on = !self.lambda.is_zero();
        let w1 = if f.ind > 0 && !signal_on {
            Q::zero()
        } else {
            qpow(&self.lambda, f.sig as usize) * qpow(&self.pbar, f.sq as usize)
        };
        let w0 = if f.sig > 0 || f.ind > 0 { Q::zero() } else { qpow(&self.qbar, f.sq as usize) };
        (w0, w1)
    }

    fn blocks(&self) -> u64 {
        self.n / self.k
    }
}

/// Bell numbers, saturating.
pub(crate) fn bell(n: usize) -> u128 {
    let mut row: Vec<u128> = vec![1];
    for _ in 0..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(*row.last().unwrap());
        for &x in &row {
            let v = next.last().unwrap().saturating_add(x);
            next.push(v);
        }
        row = next;
    }
    row[0]
}

/// Exact value of a weighted problem, or `None` when the reduced state space exceeds the budget.
pub(crate) fn enumerate_exact(p: &Params, m: usize, edges: &[WeightedEdge], altered: bool) -> Option<Q> {
    // Forced edges are active in every surviving state (their endpoints are never erased).
    let forced: Q = edges.iter().filter(|e| e.forced()).map(|e| e.w1.clone()).product();
    let value = match p.family {
        Family::Hs => hs_enumerate(p, m, edges, altered),
        Family::Sbm => sbm_enumerate(p, m, edges, altered),
        Family::Ts => ts_enumerate(p, m, edges, altered),
    }?;
    Some(forced * value)
}

struct GeneralEdges<'a> {
    list: Vec<&'a WeightedEdge>,
    cache: HashMap<u64, Q>,
}

impl<'a> GeneralEdges<'a> {
    fn new(edges: &'a [WeightedEdge]) -> Self {
        GeneralEdges { list: edges.iter().filter(|e| !e.forced()).collect(), cache: HashMap::new() }
    }

    fn product(&mut self, mask: u64) -> Q {
        if let Some(v) = self.cache.get(&mask) {
            return v.clone();
        }
        let mut acc = Q::one();
        for (i, e) in self.list.iter().enumerate() {
            acc *= if mask >> i & 1 == 1 { &e.w1 } else { &e.w0 };
        }
        self.cache.insert(mask, acc.clone());
        acc
    }
}

fn erasure_weight(p: &Params, kept: usize, erased: usize) -> Q {
    let eps = p.epsilon.clone().unwrap_or_else(Q::zero);
    qpow(&eps, erased) * qpow(&(Q::one() - eps), kept)
}

fn hs_enumerate(p: &Params, m: usize, edges: &[WeightedEdge], altered: bool) -> Option<Q> {
    let mut forced_nodes = 0u64;
    for e in edges.iter().filter(|e| e.forced()) {
        forced_nodes |= (1 << e.a) | (1 << e.b);
    }
    let free: Vec<usize> = (0..m).filter(|&v| forced_nodes >> v & 1 == 0).collect();
    let base: u64 = if altered { 3 } else { 2 };
    let states = (base as u128).checked_pow(free.len() as u32)?;
    if states > p.budget as u128 {
        return None;
    }
    let mut general = GeneralEdges::new(edges);
    let nf = forced_nodes.count_ones() as usize;
    let mut hist: HashMap<(usize, usize, u64), u64> = HashMap::new();
    let mut digits = vec![0u8; free.len()];
    loop {
        let mut kept = forced_nodes;
        let mut members = nf;
        let mut erased = 0;
        for (i, &v) in free.iter().enumerate() {
            match digits[i] {
                1 => {
                    kept |= 1 << v;
                    members += 1;
                }
                2 => {
                    members += 1;
                    erased += 1;
                }
                _ => {}
            }
        }
        let mut mask = 0u64;
        for (i, e) in general.list.iter().enumerate() {
            if kept >> e.a & 1 == 1 && kept >> e.b & 1 == 1 {
                mask |= 1 << i;
            }
        }
        *hist.entry((members, erased, mask)).or_insert(0) += 1;
        // Odometer increment.
        let mut i = 0;
        loop {
            if i == digits.len() {
                return Some(hs_total(p, m, altered, hist, &mut general));
            }
            digits[i] += 1;
            if (digits[i] as u64) < base {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

fn hs_membership_probability(p: &Params, m: usize, s: usize) -> Q {
    let n = p.n;
    let k = p.k;
    match p.sampling {
        Sampling::Independent => {
            let r = Q::new(k.into(), n.into());
            qpow(&r, s) * qpow(&(Q::one() - &r), m - s)
        }
        Sampling::Permutation => {
            let num = falling_factorial(k, s as u64) * falling_factorial(n - k, (m - s) as u64);
            Q::new(num, falling_factorial(n, m as u64))
        }
    }
}

fn hs_total(
    p: &Params,
    m: usize,
    altered: bool,
    hist: HashMap<(usize, usize, u64), u64>,
    general: &mut GeneralEdges,
) -> Q {
    let mut keys: Vec<_> = hist.into_iter().collect();
    keys.sort_unstable_by_key(|(k, _)| *k);
    let mut total = Q::zero();
    for ((s, e, mask), count) in keys {
        let mut w = hs_membership_probability(p, m, s) * general.product(mask) * Q::from_integer(count.into());
        if altered {
            w *= erasure_weight(p, s - e, e);
        }
        total += w;
    }
    total
}

fn sbm_base_probability(p: &Params, m: usize, sizes: &[usize]) -> Q {
    let kk = p.blocks();
    let t = sizes.len() as u64;
    match p.sampling {
        Sampling::Independent => Q::new(falling_factorial(kk, t), num_traits::pow(num_bigint::BigInt::from(kk), m)),
        Sampling::Permutation => {
            let mut num = falling_factorial(kk, t);
            for &s in sizes {
                num *= falling_factorial(p.k, s as u64);
            }
            Q::new(num, falling_factorial(p.n, m as u64))
        }
    }
}

/// Probability that `m` exchangeable nodes fall into blocks with exactly the given
/// partition pattern (one specific set partition with these part sizes).
pub(crate) fn sbm_partition_probability(p: &Params, sizes: &[usize]) -> Q {
    let m = sizes.iter().sum();
    sbm_base_probability(p, m, sizes)
}

fn sbm_enumerate(p: &Params, m: usize, edges: &[WeightedEdge], altered: bool) -> Option<Q> {
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(pa: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while pa[r] != r {
            r = pa[r];
        }
        pa[x] = r;
        r
    }
    let mut forced_nodes = 0u64;
    for e in edges.iter().filter(|e| e.forced()) {
        forced_nodes |= (1 << e.a) | (1 << e.b);
        let (ra, rb) = (find(&mut parent, e.a), find(&mut parent, e.b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut super_of = vec![usize::MAX; m];
    let mut supers: Vec<Vec<usize>> = Vec::new();
    for v in 0..m {
        let r = find(&mut parent, v);
        if super_of[r] == usize::MAX {
            super_of[r] = supers.len();
            supers.push(Vec::new());
        }
        super_of[v] = super_of[r];
        supers[super_of[v]].push(v);
    }
    let s = supers.len();
    let free_count = m - forced_nodes.count_ones() as usize;
    let mut estimate = bell(s);
    if altered {
        estimate = estimate.saturating_mul((s as u128 + 1) << free_count.min(64));
    }
    if estimate > p.budget as u128 {
        return None;
    }
    let mut general = GeneralEdges::new(edges);
    // Key: (sorted part sizes, hit flag, kept count in hit part, erased count, general mask).
    let mut hist: HashMap<(Vec<usize>, bool, usize, usize, u64), u64> = HashMap::new();
    let mut rgs = vec![0usize; s];
    let record = |rgs: &[usize], hist: &mut HashMap<(Vec<usize>, bool, usize, usize, u64), u64>| {
        let t = rgs.iter().copied().max().map_or(0, |x| x + 1);
        let part: Vec<usize> = (0..m).map(|v| rgs[super_of[v]]).collect();
        let mut sizes = vec![0usize; t];
        for &pv in &part {
            sizes[pv] += 1;
        }
        let mut sorted = sizes.clone();
        sorted.sort_unstable();
        let mask_with = |erased: u64| -> u64 {
            let mut mask = 0u64;
            for (i, e) in general.list.iter().enumerate() {
                if part[e.a] == part[e.b] && erased >> e.a & 1 == 0 && erased >> e.b & 1 == 0 {
                    mask |= 1 << i;
                }
            }
            mask
        };
        *hist.entry((sorted.clone(), false, 0, 0, mask_with(0))).or_insert(0) += 1;
        if altered {
            for j in 0..t {
                let members: Vec<usize> = (0..m).filter(|&v| part[v] == j).collect();
                let forced_in = members.iter().filter(|&&v| forced_nodes >> v & 1 == 1).count();
                let free_in: Vec<usize> = members.iter().copied().filter(|&v| forced_nodes >> v & 1 == 0).collect();
                for sub in 0u64..(1 << free_in.len()) {
                    let mut erased = 0u64;
                    for (i, &v) in free_in.iter().enumerate() {
                        if sub >> i & 1 == 1 {
                            erased |= 1 << v;
                        }
                    }
                    let e = sub.count_ones() as usize;
                    let kept = forced_in + free_in.len() - e;
                    *hist.entry((sorted.clone(), true, kept, e, mask_with(erased))).or_insert(0) += 1;
                }
            }
        }
    };
    // Restricted growth strings over the supernodes.
    if s == 0 {
        record(&rgs, &mut hist);
    } else {
        loop {
            record(&rgs, &mut hist);
            let mut i = s - 1;
            loop {
                if i == 0 {
                    return Some(sbm_total(p, m, altered, hist, &mut general));
                }
                let prefix_max = rgs[..i].iter().copied().max().unwrap_or(0);
                if rgs[i] <= prefix_max {
                    rgs[i] += 1;
                    for x in rgs.iter_mut().skip(i + 1) {
                        *x = 0;
                    }
                    break;
                }
                i -= 1;
            }
        }
    }
    Some(sbm_total(p, m, altered, hist, &mut general))
}

fn sbm_total(
    p: &Params,
    m: usize,
    altered: bool,
    hist: HashMap<(Vec<usize>, bool, usize, usize, u64), u64>,
    general: &mut GeneralEdges,
) -> Q {
    let kk = Q::from_integer(p.blocks().into());
    let mut keys: Vec<_> = hist.into_iter().collect();
    keys.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    let mut total = Q::zero();
    for ((sizes, hit, kept, erased, mask), count) in keys {
        let base = sbm_base_probability(p, m, &sizes);
        if base.is_zero() {
            continue;
        }
        let mut w = base * general.product(mask) * Q::from_integer(count.into());
        if altered {
            if hit {
                w *= erasure_weight(p, kept, erased) / &kk;
            } else {
                w *= (&kk - Q::from_integer((sizes.len() as u64).into())) / &kk;
            }
        }
        total += w;
    }
    total
}

fn ts_enumerate(p: &Params, m: usize, edges: &[WeightedEdge], altered: bool) -> Option<Q> {
    let n = p.n;
    let half = p.k / 2;
    let mut forced_adj = vec![0u64; m];
    let mut forced_nodes = 0u64;
    for e in edges.iter().filter(|e| e.forced()) {
        forced_nodes |= (1 << e.a) | (1 << e.b);
        if e.a != e.b {
            forced_adj[e.a] |= 1 << e.b;
            forced_adj[e.b] |= 1 << e.a;
        }
    }
    // Breadth-first order so that every non-root node has an earlier forced neighbour.
    let mut order = Vec::with_capacity(m);
    let mut parent = vec![usize::MAX; m];
    let mut seen = 0u64;
    for start in 0..m {
        if seen >> start & 1 == 1 {
            continue;
        }
        seen |= 1 << start;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for w in 0..m {
                if forced_adj[v] >> w & 1 == 1 && seen >> w & 1 == 0 {
                    seen |= 1 << w;
                    parent[w] = v;
                    queue.push_back(w);
                }
            }
        }
    }
    let mut estimate: u128 = 1;
    for &v in &order {
        let choices = if parent[v] == usize::MAX { n } else { (2 * half + 1).min(n) };
        estimate = estimate.saturating_mul(choices as u128);
    }
    if altered {
        estimate = estimate.saturating_mul(n as u128).saturating_mul(1u128 << m.min(100));
    }
    if estimate > p.budget as u128 {
        return None;
    }
    let forced_list: Vec<(usize, usize)> =
        edges.iter().filter(|e| e.forced() && e.a != e.b).map(|e| (e.a, e.b)).collect();
    let mut general = GeneralEdges::new(edges);
    let general_pairs: Vec<(usize, usize)> = general.list.iter().map(|e| (e.a, e.b)).collect();
    let mut hist: HashMap<(u64, usize, usize), u64> = HashMap::new();
    let mut z = vec![0u64; m];
    let distinct = p.sampling == Sampling::Permutation;
    let close = |a: u64, b: u64| a.abs_diff(b) <= half;

    struct Ctx<'a> {
        n: u64,
        half: u64,
        order: &'a [usize],
        parent: &'a [usize],
        distinct: bool,
    }
    fn rec(ctx: &Ctx, pos: usize, z: &mut [u64], leaf: &mut dyn FnMut(&[u64])) {
        if pos == ctx.order.len() {
            leaf(z);
            return;
        }
        let v = ctx.order[pos];
        let (lo, hi) = if ctx.parent[v] == usize::MAX {
            (1, ctx.n)
        } else {
            let c = z[ctx.parent[v]];
            (c.saturating_sub(ctx.half).max(1), (c + ctx.half).min(ctx.n))
        };
        for val in lo..=hi {
            if ctx.distinct && ctx.order[..pos].iter().any(|&u| z[u] == val) {
                continue;
            }
            z[v] = val;
            rec(ctx, pos + 1, z, leaf);
        }
        z[v] = 0;
    }
    let ctx = Ctx { n, half, order: &order, parent: &parent, distinct };
    let mut leaf = |z: &[u64]| {
        if !forced_list.iter().all(|&(a, b)| close(z[a], z[b])) {
            return;
        }
        let mask_with = |erased: u64| -> u64 {
            let mut mask = 0u64;
            for (i, &(a, b)) in general_pairs.iter().enumerate() {
                if close(z[a], z[b]) && erased >> a & 1 == 0 && erased >> b & 1 == 0 {
                    mask |= 1 << i;
                }
            }
            mask
        };
        if !altered {
            *hist.entry((mask_with(0), 0, 0)).or_insert(0) += 1;
            return;
        }
        // Group the window centre by the set of affected nodes (non-wrapping window).
        let mut groups: Vec<(u64, u64)> = Vec::new();
        for centre in 1..=n {
            let mut affected = 0u64;
            for (v, &zv) in z.iter().enumerate() {
                if zv.abs_diff(centre) <= half {
                    affected |= 1 << v;
                }
            }
            match groups.iter_mut().find(|g| g.0 == affected) {
                Some(g) => g.1 += 1,
                None => groups.push((affected, 1)),
            }
        }
        for (affected, count) in groups {
            let forced_in = (affected & forced_nodes).count_ones() as usize;
            let free_in: Vec<usize> = (0..z.len()).filter(|&v| affected >> v & 1 == 1 && forced_nodes >> v & 1 == 0).collect();
            for sub in 0u64..(1 << free_in.len()) {
                let mut erased = 0u64;
                for (i, &v) in free_in.iter().enumerate() {
                    if sub >> i & 1 == 1 {
                        erased |= 1 << v;
                    }
                }
                let e = sub.count_ones() as usize;
                let kept = forced_in + free_in.len() - e;
                *hist.entry((mask_with(erased), kept, e)).or_insert(0) += count;
            }
        }
    };
    rec(&ctx, 0, &mut z, &mut leaf);
    let denom = match p.sampling {
        Sampling::Independent => num_traits::pow(num_bigint::BigInt::from(n), m),
        Sampling::Permutation => falling_factorial(n, m as u64),
    };
    let mut keys: Vec<_> = hist.into_iter().collect();
    keys.sort_unstable_by_key(|(k, _)| *k);
    let mut total = Q::zero();
    for ((mask, kept, erased), count) in keys {
        let mut w = general.product(mask) * Q::from_integer(count.into());
        if altered {
            w *= erasure_weight(p, kept, erased) / Q::from_integer(n.into());
        }
        total += w;
    }
    Some(total / q_from_big(denom))
}

/// Welford running mean and variance.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Welford {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Combines two accumulators (Chan et al. parallel update).
    pub fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / count as f64;
        self.m2 += other.m2 + delta * delta * (self.count as f64 * other.count as f64 / count as f64);
        self.count = count;
    }

    pub fn std_error(&self) -> f64 {
        if self.count < 2 {
            return f64::INFINITY;
        }
        (self.m2 / (self.count - 1) as f64 / self.count as f64).sqrt()
    }
}

/// Monte-Carlo estimate of a weighted problem: samples the latent state of the
/// involved nodes (and the alteration) and averages the exact conditional product.
pub(crate) fn monte_carlo(
    p: &Params,
    m: usize,
    edges: &[WeightedEdge],
    altered: bool,
    samples: u64,
    seed: u64,
) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<(usize, usize, f64, f64)> = edges.iter().map(|e| (e.a, e.b, q_to_f64(&e.w0), q_to_f64(&e.w1))).collect();
    let eps = p.epsilon.as_ref().map_or(0.0, q_to_f64);
    let half = p.k / 2;
    let mut acc = Welford::default();
    let mut z = vec![0u64; m];
    let mut erased = vec![false; m];
    for _ in 0..samples {
        for i in 0..m {
            loop {
                let val = rng.random_range(1..=p.n);
                if p.sampling == Sampling::Independent || !z[..i].contains(&val) {
                    z[i] = val;
                    break;
                }
            }
        }
        erased.iter_mut().for_each(|e| *e = false);
        if altered {
            match p.family {
                Family::Hs => {
                    for i in 0..m {
                        if z[i] <= p.k {
                            erased[i] = rng.random_bool(eps);
                        }
                    }
                }
                Family::Sbm => {
                    let group = rng.random_range(0..p.blocks());
                    for i in 0..m {
                        if (z[i] - 1) / p.k == group {
                            erased[i] = rng.random_bool(eps);
                        }
                    }
                }
                Family::Ts => {
                    let centre = rng.random_range(1..=p.n);
                    for i in 0..m {
                        if z[i].abs_diff(centre) <= half {
                            erased[i] = rng.random_bool(eps);
                        }
                    }
                }
            }
        }
        let mut prod = 1.0;
        for &(a, b, w0, w1) in &w {
            let support = match p.family {
                Family::Hs => z[a] <= p.k && z[b] <= p.k,
                Family::Sbm => (z[a] - 1) / p.k == (z[b] - 1) / p.k,
                Family::Ts => z[a].abs_diff(z[b]) <= half,
            };
            let active = support && !erased[a] && !erased[b];
            prod *= if active { w1 } else { w0 };
            if prod == 0.0 {
                break;
            }
        }
        acc.push(prod);
    }
    (acc.mean, acc.std_error())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bell_numbers() {
        let expected = [1u128, 1, 2, 5, 15, 52, 203, 877, 4140];
        for (n, &b) in expected.iter().enumerate() {
            assert_eq!(bell(n), b);
        }
    }

    #[test]
    fn repeated_signal_becomes_square() {
        let p = Problem::from_labeled(&[(1u64, 2u64, Factor::SIGNAL), (2, 1, Factor::SIGNAL)]);
        assert_eq!(p.edges, vec![(0, 1, Factor { sig: 0, sq: 1, ind: 0 })]);
    }

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 2.0, 4.0, 7.0];
        let mut w = Welford::default();
        xs.iter().for_each(|&x| w.push(x));
        let mean = xs.iter().sum::<f64>() / 4.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 3.0;
        assert!((w.mean - mean).abs() < 1e-12);
        assert!((w.std_error() - (var / 4.0).sqrt()).abs() < 1e-12);
        let (mut a, mut b) = (Welford::default(), Welford::default());
        xs[..1].iter().for_each(|&x| a.push(x));
        xs[1..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert_eq!(a.count, 4);
        assert!((a.mean - w.mean).abs() < 1e-12 && (a.m2 - w.m2).abs() < 1e-12);
    }
}
