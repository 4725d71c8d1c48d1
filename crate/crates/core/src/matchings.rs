//! Node matchings between two labeled templates and the graphs they induce:
//! merged (union), intersection and symmetric-difference graphs, unmatched,
//! semi-matched and perfectly-matched sets, pure components and shadows.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;

use crate::error::{cap, invalid, Result};
use crate::graph_core::{components_of, nontrivial_components, Template};
use crate::rational::falling_factorial;

/// Largest number of matchings materialized by [`enumerate_matchings`].
pub const DEFAULT_MAX_MATCHINGS: u64 = 5_000_000;

/// A partial injection between the vertices of two templates, as `(v of G1, v of G2)`
/// pairs sorted by the first coordinate.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Matching {
    pairs: Vec<(usize, usize)>,
}

impl Matching {
    /// Builds a matching, checking injectivity on both sides.
    pub fn new(mut pairs: Vec<(usize, usize)>) -> Result<Self> {
        pairs.sort_unstable();
        let left: BTreeSet<usize> = pairs.iter().map(|p| p.0).collect();
        let right: BTreeSet<usize> = pairs.iter().map(|p| p.1).collect();
        if left.len() != pairs.len() || right.len() != pairs.len() {
            return invalid("a matching may not repeat a vertex on either side");
        }
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    fn validate_for(&self, g1: &Template, g2: &Template) -> Result<()> {
        for &(a, b) in &self.pairs {
            if a >= g1.vertex_count() || b >= g2.vertex_count() {
                return invalid(format!("pair ({a},{b}) is outside the templates"));
            }
        }
        if g1.is_rooted() != g2.is_rooted() {
            return invalid("cannot match a rooted template with an unrooted one");
        }
        if g1.is_rooted() {
            for root in [0, 1] {
                if !self.pairs.contains(&(root, root)) {
                    return invalid("rooted matchings must pair v1 with v1 and v2 with v2");
                }
            }
            if self.pairs.iter().any(|&(a, b)| (a < 2) != (b < 2)) {
                return invalid("a root may only be matched to the corresponding root");
            }
        }
        Ok(())
    }
}

/// Number of partial injections between sets of sizes `a` and `b`.
pub fn partial_injection_count(a: usize, b: usize) -> u128 {
    let mut total: u128 = 0;
    let mut binom_a: u128 = 1;
    let mut binom_b: u128 = 1;
    let mut fact: u128 = 1;
    for k in 0..=a.min(b) {
        if k > 0 {
            binom_a = binom_a * (a - k + 1) as u128 / k as u128;
            binom_b = binom_b * (b - k + 1) as u128 / k as u128;
            fact *= k as u128;
        }
        total += binom_a * binom_b * fact;
    }
    total
}

/// Number of matchings between two templates (root pairs forced when rooted).
pub fn matching_count(g1: &Template, g2: &Template) -> u128 {
    if g1.is_rooted() {
        partial_injection_count(g1.vertex_count() - 2, g2.vertex_count() - 2)
    } else {
        partial_injection_count(g1.vertex_count(), g2.vertex_count())
    }
}

/// Visits every matching in the deterministic order of [`enumerate_matchings`].
pub fn for_each_matching(g1: &Template, g2: &Template, mut visit: impl FnMut(&[(usize, usize)])) {
    let rooted = g1.is_rooted();
    let start = if rooted { 2 } else { 0 };
    let mut pairs: Vec<(usize, usize)> = if rooted { vec![(0, 0), (1, 1)] } else { Vec::new() };
    let mut used = if rooted { 0b11u32 } else { 0 };
    fn rec(
        i: usize,
        v1: usize,
        v2: usize,
        start: usize,
        pairs: &mut Vec<(usize, usize)>,
        used: &mut u32,
        visit: &mut dyn FnMut(&[(usize, usize)]),
    ) {
        if i == v1 {
            visit(pairs);
            return;
        }
        rec(i + 1, v1, v2, start, pairs, used, visit);
        for u in start..v2 {
            if *used >> u & 1 == 0 {
                *used |= 1 << u;
                pairs.push((i, u));
                rec(i + 1, v1, v2, start, pairs, used, visit);
                pairs.pop();
                *used &= !(1 << u);
            }
        }
    }
    rec(start, g1.vertex_count(), g2.vertex_count(), start, &mut pairs, &mut used, &mut visit);
}

/// All matchings between `g1` and `g2`, including the empty one; for rooted
/// templates the root pairs `(v1,v1)`, `(v2,v2)` are always present and other
/// vertices never match a root. Order: backtracking over `g1` vertices, trying
/// "unmatched" first and then partners in increasing order.
pub fn enumerate_matchings(g1: &Template, g2: &Template) -> Result<Vec<Matching>> {
    if g1.is_rooted() != g2.is_rooted() {
        return invalid("cannot match a rooted template with an unrooted one");
    }
    let count = matching_count(g1, g2);
    if count > DEFAULT_MAX_MATCHINGS as u128 {
        return cap(format!("{count} matchings exceed the cap of {DEFAULT_MAX_MATCHINGS}"));
    }
    let mut out = Vec::with_capacity(count as usize);
    for_each_matching(g1, g2, |p| out.push(Matching { pairs: p.to_vec() }));
    Ok(out)
}

/// Merged, intersection and difference graphs of a matching, with all derived counts.
///
/// Vertices of the merged graph are identified by integers: vertex `a` of `G1`
/// keeps id `a`; vertex `u` of `G2` takes the id of its partner when matched and
/// `|V1| + u` otherwise.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MergeResult {
    /// Fused id of each `G2` vertex.
    pub g2_ids: Vec<usize>,
    pub union_vertices: Vec<usize>,
    pub union_edges: Vec<(usize, usize)>,
    pub intersection_vertices: Vec<usize>,
    pub intersection_edges: Vec<(usize, usize)>,
    pub delta_vertices: Vec<usize>,
    pub delta_edges: Vec<(usize, usize)>,
    /// Edge multiplicity over the merged graph: 2 on common edges, 1 elsewhere.
    pub multiplicity: BTreeMap<(usize, usize), u8>,
    /// Unmatched vertices of `G1` (as `G1` indices) and of `G2` (as `G2` indices).
    pub u1: Vec<usize>,
    pub u2: Vec<usize>,
    /// Matched pairs whose fused vertex lies in the difference graph.
    pub m_sm: Vec<(usize, usize)>,
    /// Matched pairs whose fused vertex carries no difference edge.
    pub m_pm: Vec<(usize, usize)>,
    /// Connected components of the difference graph (fused ids).
    pub delta_components: Vec<Vec<usize>>,
    /// Components of the difference graph containing no matched vertex.
    pub pure_components: Vec<Vec<usize>>,
    pub cc_delta: usize,
    pub cc_pure: usize,
    /// Number of matched pairs.
    pub matched: usize,
}

impl MergeResult {
    /// Total number of distinct labeled nodes, `|V1| + |V2| - |M|`.
    pub fn node_count(&self, v1: usize, v2: usize) -> usize {
        v1 + v2 - self.matched
    }

    /// Vertices of the difference graph that belong to no pure component, together
    /// with the pure components themselves; the matched part of the union is `omega_0`.
    pub fn pure_vertex_set(&self) -> BTreeSet<usize> {
        self.pure_components.iter().flatten().copied().collect()
    }
}

/// Classification on raw labeled graphs (no isolated-vertex or canonical-form requirements).
pub fn classify_raw(
    v1: usize,
    edges1: &[(usize, usize)],
    v2: usize,
    edges2: &[(usize, usize)],
    pairs: &[(usize, usize)],
) -> MergeResult {
    let mut g2_ids: Vec<usize> = (0..v2).map(|u| v1 + u).collect();
    let mut matched1 = vec![false; v1];
    for &(a, u) in pairs {
        g2_ids[u] = a;
        matched1[a] = true;
    }
    let norm = |a: usize, b: usize| (a.min(b), a.max(b));
    let e1: BTreeSet<(usize, usize)> = edges1.iter().map(|&(a, b)| norm(a, b)).collect();
    let e2: BTreeSet<(usize, usize)> = edges2.iter().map(|&(a, b)| norm(g2_ids[a], g2_ids[b])).collect();
    let intersection_edges: Vec<_> = e1.intersection(&e2).copied().collect();
    let delta_edges: Vec<_> = e1.symmetric_difference(&e2).copied().collect();
    let union_edges: Vec<_> = e1.union(&e2).copied().collect();
    let mut multiplicity = BTreeMap::new();
    for e in &union_edges {
        multiplicity.insert(*e, if e1.contains(e) && e2.contains(e) { 2 } else { 1 });
    }
    let endpoints = |es: &[(usize, usize)]| -> Vec<usize> {
        es.iter().flat_map(|&(a, b)| [a, b]).collect::<BTreeSet<_>>().into_iter().collect()
    };
    let mut union_set: BTreeSet<usize> = (0..v1).collect();
    union_set.extend(g2_ids.iter().copied());
    let delta_vertices = endpoints(&delta_edges);
    let delta_set: BTreeSet<usize> = delta_vertices.iter().copied().collect();
    let u1: Vec<usize> = (0..v1).filter(|&a| !matched1[a]).collect();
    let mut matched2 = vec![false; v2];
    for &(_, u) in pairs {
        matched2[u] = true;
    }
    let u2: Vec<usize> = (0..v2).filter(|&u| !matched2[u]).collect();
    let (m_sm, m_pm): (Vec<_>, Vec<_>) = pairs.iter().copied().partition(|&(a, _)| delta_set.contains(&a));
    let delta_components: Vec<Vec<usize>> = components_of(v1 + v2, &delta_edges)
        .into_iter()
        .filter(|c| c.len() > 1)
        .collect();
    let pure_components: Vec<Vec<usize>> =
        delta_components.iter().filter(|c| c.iter().all(|&x| x >= v1 || !matched1[x])).cloned().collect();
    MergeResult {
        g2_ids,
        union_vertices: union_set.into_iter().collect(),
        intersection_vertices: endpoints(&intersection_edges),
        intersection_edges,
        delta_vertices,
        cc_delta: delta_components.len(),
        cc_pure: pure_components.len(),
        delta_components,
        pure_components,
        delta_edges,
        union_edges,
        multiplicity,
        u1,
        u2,
        m_sm,
        m_pm,
        matched: pairs.len(),
    }
}

/// Classifies a matching between two templates.
pub fn classify(g1: &Template, g2: &Template, m: &Matching) -> Result<MergeResult> {
    m.validate_for(g1, g2)?;
    Ok(classify_raw(g1.vertex_count(), g1.edges(), g2.vertex_count(), g2.edges(), m.pairs()))
}

/// True iff every connected component of `g1` and of `g2` contains a matched vertex
/// (equivalently, the difference graph has no pure component).
pub fn is_star(mr: &MergeResult, g1: &Template, g2: &Template) -> bool {
    let matched1: BTreeSet<usize> = (0..g1.vertex_count()).filter(|a| !mr.u1.contains(a)).collect();
    let matched2: BTreeSet<usize> = (0..g2.vertex_count()).filter(|u| !mr.u2.contains(u)).collect();
    nontrivial_components(g1).iter().all(|c| c.iter().any(|v| matched1.contains(v)))
        && nontrivial_components(g2).iter().all(|c| c.iter().any(|v| matched2.contains(v)))
}

/// Summary of a matching up to its perfectly-matched part.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Shadow {
    pub u1: BTreeSet<usize>,
    pub u2: BTreeSet<usize>,
    pub m_sm: BTreeSet<(usize, usize)>,
}

/// The shadow `(U1, U2, M_SM)` of a classified matching.
pub fn shadow_of(mr: &MergeResult) -> Shadow {
    Shadow {
        u1: mr.u1.iter().copied().collect(),
        u2: mr.u2.iter().copied().collect(),
        m_sm: mr.m_sm.iter().copied().collect(),
    }
}

/// All matchings whose unmatched sets are `s.u1`, `s.u2` and whose semi-matched
/// set is `s.m_sm`; every other vertex is perfectly matched.
pub fn matchings_with_shadow(g1: &Template, g2: &Template, s: &Shadow) -> Result<Vec<Matching>> {
    if g1.is_rooted() != g2.is_rooted() {
        return invalid("cannot match a rooted template with an unrooted one");
    }
    let left: Vec<usize> = (0..g1.vertex_count()).filter(|a| !s.u1.contains(a)).collect();
    let right: Vec<usize> = (0..g2.vertex_count()).filter(|u| !s.u2.contains(u)).collect();
    if left.len() != right.len() {
        return Ok(Vec::new());
    }
    if s.m_sm.iter().any(|&(a, u)| s.u1.contains(&a) || s.u2.contains(&u)) {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut pairs = Vec::with_capacity(left.len());
    let mut used = vec![false; g2.vertex_count()];
    fn rec(
        i: usize,
        left: &[usize],
        right: &[usize],
        g1: &Template,
        g2: &Template,
        s: &Shadow,
        pairs: &mut Vec<(usize, usize)>,
        used: &mut [bool],
        out: &mut Vec<Matching>,
    ) {
        if i == left.len() {
            let mr = classify_raw(g1.vertex_count(), g1.edges(), g2.vertex_count(), g2.edges(), pairs);
            let sm: BTreeSet<(usize, usize)> = mr.m_sm.iter().copied().collect();
            if sm == s.m_sm {
                let mut p = pairs.clone();
                p.sort_unstable();
                out.push(Matching { pairs: p });
            }
            return;
        }
        let a = left[i];
        for &u in right {
            if used[u] || (g1.is_rooted() && (a < 2 || u < 2) && a != u) {
                continue;
            }
            used[u] = true;
            pairs.push((a, u));
            rec(i + 1, left, right, g1, g2, s, pairs, used, out);
            pairs.pop();
            used[u] = false;
        }
    }
    rec(0, &left, &right, g1, g2, s, &mut pairs, &mut used, &mut out);
    out.sort();
    Ok(out)
}

/// Number of labeling pairs compatible with a matching: the falling factorial
/// `n (n-1) ... ` of length `|V1| + |V2| - |M|` (unrooted), or of `n-2` with
/// length `|V1| + |V2| - |M| - 2` (rooted, nodes 1 and 2 being pinned).
pub fn labeling_count(g1: &Template, g2: &Template, m: &Matching, n: u64) -> Result<BigInt> {
    let total = (g1.vertex_count() + g2.vertex_count() - m.len()) as u64;
    if n < total {
        return invalid(format!("n = {n} is smaller than the {total} nodes required by the matching"));
    }
    Ok(if g1.is_rooted() { falling_factorial(n - 2, total - 2) } else { falling_factorial(n, total) })
}

/// Maximum number of common edges over all matchings (branch and bound).
pub fn max_common_edges(g1: &Template, g2: &Template) -> usize {
    let adj1 = g1.adjacency();
    let adj2 = g2.adjacency();
    let v1 = g1.vertex_count();
    let v2 = g2.vertex_count();
    let rooted = g1.is_rooted();
    // Edges of g1 whose larger endpoint is >= i: an upper bound on what is still attainable.
    let remaining: Vec<usize> = (0..=v1).map(|i| g1.edges().iter().filter(|&&(_, b)| b >= i).count()).collect();
    let mut image = vec![usize::MAX; v1];
    let mut used = 0u32;
    let mut best = 0usize;
    if rooted {
        image[0] = 0;
        image[1] = 1;
        used = 0b11;
    }
    let start = if rooted { 2 } else { 0 };
    let base = if rooted { usize::from(adj1[0] >> 1 & 1 == 1 && adj2[0] >> 1 & 1 == 1) } else { 0 };
    #[allow(clippy::too_many_arguments)]
    fn rec(
        i: usize,
        current: usize,
        v1: usize,
        v2: usize,
        start: usize,
        adj1: &[u32],
        adj2: &[u32],
        remaining: &[usize],
        image: &mut [usize],
        used: &mut u32,
        best: &mut usize,
    ) {
        if current > *best {
            *best = current;
        }
        if i == v1 || current + remaining[i] <= *best {
            return;
        }
        rec(i + 1, current, v1, v2, start, adj1, adj2, remaining, image, used, best);
        for u in start..v2 {
            if *used >> u & 1 == 1 {
                continue;
            }
            let gained = (0..i)
                .filter(|&w| image[w] != usize::MAX && adj1[i] >> w & 1 == 1 && adj2[u] >> image[w] & 1 == 1)
                .count();
            image[i] = u;
            *used |= 1 << u;
            rec(i + 1, current + gained, v1, v2, start, adj1, adj2, remaining, image, used, best);
            *used &= !(1 << u);
            image[i] = usize::MAX;
        }
    }
    rec(start, base, v1, v2, start, &adj1, &adj2, &remaining, &mut image, &mut used, &mut best);
    best
}

/// Quantity `R` from the lower-bound lemma: remove the components `s1` of `g1` and
/// `s2` of `g2` (indices into their non-trivial component lists), restrict the
/// matching to the remaining vertices, and return
/// `(|V_Δ'| - #CC_Δ' + Σ_{S1}(|V_i|-1) + Σ_{S2}(|V_i|-1),  |V_Δ| - #CC_Δ)`.
pub fn lower_bound_r(g1: &Template, g2: &Template, m: &Matching, s1: &[usize], s2: &[usize]) -> (i64, i64) {
    let full = classify_raw(g1.vertex_count(), g1.edges(), g2.vertex_count(), g2.edges(), m.pairs());
    let comps1 = nontrivial_components(g1);
    let comps2 = nontrivial_components(g2);
    let removed1: BTreeSet<usize> = s1.iter().flat_map(|&i| comps1[i].iter().copied()).collect();
    let removed2: BTreeSet<usize> = s2.iter().flat_map(|&i| comps2[i].iter().copied()).collect();
    let keep = |es: &[(usize, usize)], removed: &BTreeSet<usize>| -> Vec<(usize, usize)> {
        es.iter().copied().filter(|(a, _)| !removed.contains(a)).collect()
    };
    let pairs: Vec<(usize, usize)> =
        m.pairs().iter().copied().filter(|(a, u)| !removed1.contains(a) && !removed2.contains(u)).collect();
    let reduced = classify_raw(
        g1.vertex_count(),
        &keep(g1.edges(), &removed1),
        g2.vertex_count(),
        &keep(g2.edges(), &removed2),
        &pairs,
    );
    let extra: i64 = s1.iter().map(|&i| comps1[i].len() as i64 - 1).sum::<i64>()
        + s2.iter().map(|&i| comps2[i].len() as i64 - 1).sum::<i64>();
    let r = reduced.delta_vertices.len() as i64 - reduced.cc_delta as i64 + extra;
    (r, full.delta_vertices.len() as i64 - full.cc_delta as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_core::canonicalize;

    fn edge() -> Template {
        canonicalize(2, &[(0, 1)], None).unwrap()
    }

    #[test]
    fn edge_vs_edge_has_seven_matchings() {
        let m = enumerate_matchings(&edge(), &edge()).unwrap();
        assert_eq!(m.len(), 7);
        assert!(m[0].is_empty());
        assert_eq!(partial_injection_count(2, 2), 7);
    }

    #[test]
    fn empty_matching_of_edges() {
        let mr = classify(&edge(), &edge(), &Matching::new(vec![]).unwrap()).unwrap();
        assert_eq!(mr.delta_edges.len(), 2);
        assert_eq!(mr.cc_pure, 2);
        assert_eq!(mr.u1, vec![0, 1]);
        assert_eq!(mr.u2, vec![0, 1]);
        assert!(!is_star(&mr, &edge(), &edge()));
    }

    #[test]
    fn full_matching_of_edges() {
        let mr = classify(&edge(), &edge(), &Matching::new(vec![(0, 0), (1, 1)]).unwrap()).unwrap();
        assert_eq!(mr.intersection_edges.len(), 1);
        assert!(mr.delta_edges.is_empty());
        assert_eq!(mr.m_pm.len(), 2);
        assert_eq!(mr.cc_pure, 0);
        assert!(is_star(&mr, &edge(), &edge()));
    }

    #[test]
    fn labeling_counts() {
        let full = Matching::new(vec![(0, 0), (1, 1)]).unwrap();
        let empty = Matching::new(vec![]).unwrap();
        assert_eq!(labeling_count(&edge(), &edge(), &full, 10).unwrap(), BigInt::from(90));
        assert_eq!(labeling_count(&edge(), &edge(), &empty, 10).unwrap(), BigInt::from(5040));
        assert!(labeling_count(&edge(), &edge(), &empty, 3).is_err());
    }

    #[test]
    fn invalid_matchings_rejected() {
        assert!(Matching::new(vec![(0, 0), (0, 1)]).is_err());
        let r = canonicalize(3, &[(0, 2)], Some((0, 1))).unwrap();
        let m = Matching::new(vec![(0, 0)]).unwrap();
        assert!(classify(&r, &r, &m).is_err());
    }
}
