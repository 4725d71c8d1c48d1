//! Small undirected template graphs: canonical forms, automorphism counts,
//! exhaustive enumeration up to isomorphism, components and edit distance.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{cap, invalid, LdError, Result};

/// Default largest degree (number of edges) accepted by the enumerators.
pub const DEFAULT_MAX_DEGREE: usize = 5;

/// Default largest vertex count accepted by [`canonicalize`] (`2 * 5 + 2`).
pub const DEFAULT_MAX_VERTICES: usize = 2 * DEFAULT_MAX_DEGREE + 2;

/// Hard limit imposed by the bitmask representation of adjacency.
const HARD_MAX_VERTICES: usize = 24;

/// A canonical unlabeled simple graph, optionally rooted at two ordered vertices.
///
/// Rooted templates always carry their roots at vertices `0` and `1`; only the
/// roots may be isolated. Unrooted templates have no isolated vertex.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Template {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
    roots: Option<(usize, usize)>,
}

impl Template {
    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    /// Canonical edge list, each pair `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn roots(&self) -> Option<(usize, usize)> {
        self.roots
    }

    pub fn is_rooted(&self) -> bool {
        self.roots.is_some()
    }

    /// Adjacency bitmasks, one per vertex.
    pub fn adjacency(&self) -> Vec<u32> {
        adjacency_masks(self.vertex_count, &self.edges)
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == v || b == v).count()
    }

    /// Ordering key used by the enumerators: edge count, vertex count, edge list.
    pub fn order_key(&self) -> (usize, usize, &[(usize, usize)]) {
        (self.edges.len(), self.vertex_count, &self.edges)
    }

    /// Number of connected components with at least one edge.
    pub fn nontrivial_component_count(&self) -> usize {
        nontrivial_components(self).len()
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v={};roots=", self.vertex_count)?;
        match self.roots {
            Some((a, b)) => write!(f, "{a},{b}")?,
            None => write!(f, "none")?,
        }
        write!(f, ";edges=")?;
        for (a, b) in &self.edges {
            write!(f, "({a},{b})")?;
        }
        Ok(())
    }
}

impl FromStr for Template {
    type Err = LdError;

    /// Parses `v=<int>;roots=<i,j|none>;edges=(a,b)(c,d)...` and canonicalizes it.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| LdError::Validation(format!("cannot parse template '{s}': {why}"));
        let mut vertex_count = None;
        let mut roots = None;
        let mut edges = None;
        for part in s.trim().split(';') {
            let (key, value) = part.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            match key.trim() {
                "v" => vertex_count = Some(value.trim().parse::<usize>().map_err(|_| bad("bad vertex count"))?),
                "roots" => {
                    let value = value.trim();
                    roots = Some(if value == "none" {
                        None
                    } else {
                        let (a, b) = value.split_once(',').ok_or_else(|| bad("roots must be i,j or none"))?;
                        let a = a.trim().parse::<usize>().map_err(|_| bad("bad root index"))?;
                        let b = b.trim().parse::<usize>().map_err(|_| bad("bad root index"))?;
                        Some((a, b))
                    })
                }
                "edges" => {
                    let mut list = Vec::new();
                    let mut rest = value.trim();
                    while !rest.is_empty() {
                        let inner = rest.strip_prefix('(').ok_or_else(|| bad("edge must start with '('"))?;
                        let close = inner.find(')').ok_or_else(|| bad("unterminated edge"))?;
                        let (a, b) = inner[..close].split_once(',').ok_or_else(|| bad("edge must be (a,b)"))?;
                        let a = a.trim().parse::<usize>().map_err(|_| bad("bad edge endpoint"))?;
                        let b = b.trim().parse::<usize>().map_err(|_| bad("bad edge endpoint"))?;
                        list.push((a, b));
                        rest = inner[close + 1..].trim_start();
                    }
                    edges = Some(list);
                }
                other => return Err(bad(&format!("unknown key '{other}'"))),
            }
        }
        let vertex_count = vertex_count.ok_or_else(|| bad("missing v="))?;
        let edges = edges.ok_or_else(|| bad("missing edges="))?;
        canonicalize(vertex_count, &edges, roots.flatten())
    }
}

impl Serialize for Template {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Template {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A template together with an injective labeling of its vertices by nodes of `[n]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LabeledGraph {
    template: Template,
    labels: Vec<u64>,
}

impl LabeledGraph {
    /// Builds a labeled copy; labels are 1-based node indices, pairwise distinct.
    /// Rooted templates must send root `v1` to node 1 and root `v2` to node 2.
    pub fn new(template: Template, labels: Vec<u64>) -> Result<Self> {
        if labels.len() != template.vertex_count() {
            return invalid(format!(
                "labeling has {} entries but the template has {} vertices",
                labels.len(),
                template.vertex_count()
            ));
        }
        let distinct: BTreeSet<u64> = labels.iter().copied().collect();
        if distinct.len() != labels.len() {
            return invalid("labeling is not injective");
        }
        if labels.contains(&0) {
            return invalid("node labels are 1-based");
        }
        if let Some((r1, r2)) = template.roots() {
            if labels[r1] != 1 || labels[r2] != 2 {
                return invalid("rooted labelings must map v1 to node 1 and v2 to node 2");
            }
        }
        Ok(Self { template, labels })
    }

    /// The identity-style labeling `v -> v + 1` (roots land on nodes 1 and 2).
    pub fn standard(template: Template) -> Self {
        let labels = (1..=template.vertex_count() as u64).collect();
        Self { template, labels }
    }

    pub fn template(&self) -> &Template {
        &self.template
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    /// Edges as pairs of node labels.
    pub fn labeled_edges(&self) -> Vec<(u64, u64)> {
        self.template.edges().iter().map(|&(a, b)| (self.labels[a], self.labels[b])).collect()
    }

    pub fn max_label(&self) -> u64 {
        self.labels.iter().copied().max().unwrap_or(0)
    }
}

fn adjacency_masks(vertex_count: usize, edges: &[(usize, usize)]) -> Vec<u32> {
    let mut adj = vec![0u32; vertex_count];
    for &(a, b) in edges {
        adj[a] |= 1 << b;
        adj[b] |= 1 << a;
    }
    adj
}

/// Canonicalizes a raw graph with the default vertex cap.
pub fn canonicalize(vertex_count: usize, edges: &[(usize, usize)], roots: Option<(usize, usize)>) -> Result<Template> {
    canonicalize_with_cap(vertex_count, edges, roots, DEFAULT_MAX_VERTICES)
}

/// Returns the canonical representative of the (root-preserving) isomorphism class
/// of the given graph: its lexicographically smallest sorted edge list over all
/// vertex relabelings (relabelings that send the roots to `0` and `1` when rooted).
pub fn canonicalize_with_cap(
    vertex_count: usize,
    edges: &[(usize, usize)],
    roots: Option<(usize, usize)>,
    max_vertices: usize,
) -> Result<Template> {
    if vertex_count > max_vertices.min(HARD_MAX_VERTICES) {
        return cap(format!(
            "template has {vertex_count} vertices, above the cap of {}",
            max_vertices.min(HARD_MAX_VERTICES)
        ));
    }
    let mut seen = BTreeSet::new();
    for &(a, b) in edges {
        if a >= vertex_count || b >= vertex_count {
            return invalid(format!("edge ({a},{b}) uses a vertex outside 0..{vertex_count}"));
        }
        if a == b {
            return invalid(format!("self-loop at vertex {a}"));
        }
        if !seen.insert((a.min(b), a.max(b))) {
            return invalid(format!("duplicate edge ({a},{b})"));
        }
    }
    if let Some((r1, r2)) = roots {
        if r1 >= vertex_count || r2 >= vertex_count || r1 == r2 {
            return invalid("roots must be two distinct vertices of the graph");
        }
    }
    let adj = adjacency_masks(vertex_count, edges);
    for (v, &mask) in adj.iter().enumerate() {
        let is_root = roots.is_some_and(|(r1, r2)| v == r1 || v == r2);
        if mask == 0 && !is_root {
            return invalid(format!("vertex {v} is isolated; only roots may be isolated"));
        }
    }
    let mut search = CanonSearch::new(vertex_count, adj, edges.len());
    if let Some((r1, r2)) = roots {
        search.assign(r1, 0);
        search.assign(r2, 1);
        search.run(2);
    } else {
        search.run(0);
    }
    Ok(Template {
        vertex_count,
        edges: search.best.unwrap_or_default(),
        roots: roots.map(|_| (0, 1)),
    })
}

/// Branch-and-bound search for the lexicographically minimal relabeled edge list.
///
/// New labels are handed out in increasing order. At each step the part of the
/// final sorted edge list that is already determined is compared against the
/// best complete list found so far, which prunes all but a few branches.
struct CanonSearch {
    n: usize,
    adj: Vec<u32>,
    edge_count: usize,
    label_of: Vec<usize>,
    vertex_at: Vec<usize>,
    assigned: u32,
    best: Option<Vec<(usize, usize)>>,
}

const UNSET: usize = usize::MAX;

impl CanonSearch {
    fn new(n: usize, adj: Vec<u32>, edge_count: usize) -> Self {
        Self { n, adj, edge_count, label_of: vec![UNSET; n], vertex_at: vec![UNSET; n], assigned: 0, best: None }
    }

    fn assign(&mut self, v: usize, label: usize) {
        self.label_of[v] = label;
        self.vertex_at[label] = v;
        self.assigned |= 1 << v;
    }

    fn unassign(&mut self, v: usize, label: usize) {
        self.label_of[v] = UNSET;
        self.vertex_at[label] = UNSET;
        self.assigned &= !(1 << v);
    }

    /// Determined prefix of the final edge list when labels `0..j` are placed,
    /// plus the vertex label `a` whose next edge is known to be at least `(a, j)`.
    fn prefix(&self, j: usize) -> (Vec<(usize, usize)>, Option<usize>) {
        let mut out = Vec::with_capacity(self.edge_count);
        for a in 0..j {
            let va = self.vertex_at[a];
            for b in (a + 1)..j {
                if self.adj[va] >> self.vertex_at[b] & 1 == 1 {
                    out.push((a, b));
                }
            }
            if self.adj[va] & !self.assigned != 0 {
                return (out, Some(a));
            }
        }
        (out, None)
    }

    fn run(&mut self, j: usize) {
        if j == self.n {
            let mut list: Vec<(usize, usize)> = (0..self.n)
                .flat_map(|a| {
                    let va = self.vertex_at[a];
                    let adj = &self.adj;
                    let vertex_at = &self.vertex_at;
                    ((a + 1)..self.n).filter(move |&b| adj[va] >> vertex_at[b] & 1 == 1).map(move |b| (a, b))
                })
                .collect();
            list.sort_unstable();
            if self.best.as_ref().is_none_or(|b| list < *b) {
                self.best = Some(list);
            }
            return;
        }
        let (prefix, pivot) = self.prefix(j);
        if let Some(best) = &self.best {
            match prefix.as_slice().cmp(&best[..prefix.len()]) {
                std::cmp::Ordering::Greater => return,
                std::cmp::Ordering::Equal if prefix.len() < best.len() => {
                    let bound = match pivot {
                        Some(a) => (a, j),
                        None => (j, j + 1),
                    };
                    if bound > best[prefix.len()] {
                        return;
                    }
                }
                _ => {}
            }
        }
        let candidates = match pivot {
            Some(a) => self.adj[self.vertex_at[a]] & !self.assigned,
            None => !self.assigned & ((1u32 << self.n) - 1),
        };
        for v in 0..self.n {
            if candidates >> v & 1 == 1 {
                self.assign(v, j);
                self.run(j + 1);
                self.unassign(v, j);
            }
        }
    }
}

/// `|Aut(G)|`: number of edge-preserving vertex permutations (roots fixed pointwise when rooted).
pub fn automorphism_count(t: &Template) -> u64 {
    let adj = t.adjacency();
    let n = t.vertex_count();
    let degree: Vec<u32> = adj.iter().map(|m| m.count_ones()).collect();
    let mut image = vec![UNSET; n];
    let mut used = 0u32;
    if let Some((r1, r2)) = t.roots() {
        image[r1] = r1;
        image[r2] = r2;
        used |= (1 << r1) | (1 << r2);
    }
    fn rec(u: usize, n: usize, adj: &[u32], degree: &[u32], image: &mut [usize], used: &mut u32) -> u64 {
        if u == n {
            return 1;
        }
        if image[u] != UNSET {
            // Pre-fixed root: only check consistency with earlier vertices.
            let ok = (0..u).all(|w| (adj[u] >> w & 1) == (adj[image[u]] >> image[w] & 1));
            return if ok { rec(u + 1, n, adj, degree, image, used) } else { 0 };
        }
        let mut total = 0;
        for cand in 0..n {
            if *used >> cand & 1 == 1 || degree[cand] != degree[u] {
                continue;
            }
            let ok = (0..u).all(|w| image[w] == UNSET || (adj[u] >> w & 1) == (adj[cand] >> image[w] & 1));
            if !ok {
                continue;
            }
            image[u] = cand;
            *used |= 1 << cand;
            total += rec(u + 1, n, adj, degree, image, used);
            *used &= !(1 << cand);
            image[u] = UNSET;
        }
        total
    }
    rec(0, n, &adj, &degree, &mut image, &mut used)
}

fn check_degree(d: usize, max_degree: usize) -> Result<()> {
    if d == 0 {
        return invalid("the degree D must be at least 1");
    }
    if d > max_degree {
        return cap(format!("degree D={d} exceeds the configured cap {max_degree}"));
    }
    Ok(())
}

fn enumerate_from(base: Template, d: usize) -> Result<Vec<Template>> {
    let max_vertices = 2 * d + 2;
    let mut all: Vec<Template> = Vec::new();
    let mut level: BTreeSet<(usize, Vec<(usize, usize)>)> = BTreeSet::new();
    level.insert((base.vertex_count, base.edges.clone()));
    let roots = base.roots;
    for _ in 0..d {
        let mut next = BTreeSet::new();
        for (v, edges) in &level {
            let v = *v;
            let adj = adjacency_masks(v, edges);
            let mut extend = |nv: usize, extra: (usize, usize)| -> Result<()> {
                let mut e = edges.clone();
                e.push(extra);
                let t = canonicalize_with_cap(nv, &e, roots, max_vertices)?;
                next.insert((t.vertex_count, t.edges));
                Ok(())
            };
            for a in 0..v {
                for b in (a + 1)..v {
                    if adj[a] >> b & 1 == 0 {
                        extend(v, (a, b))?;
                    }
                }
                extend(v + 1, (a, v))?;
            }
            extend(v + 2, (v, v + 1))?;
        }
        all.extend(next.iter().map(|(v, e)| Template { vertex_count: *v, edges: e.clone(), roots: roots.map(|_| (0, 1)) }));
        level = next;
    }
    all.sort_by(|a, b| a.order_key().cmp(&b.order_key()));
    Ok(all)
}

/// All unrooted templates with `1 <= |E| <= d` and no isolated vertex, in the
/// deterministic order (edge count, vertex count, canonical edge list).
pub fn enumerate_templates(d: usize) -> Result<Vec<Template>> {
    enumerate_templates_with_cap(d, DEFAULT_MAX_DEGREE)
}

pub fn enumerate_templates_with_cap(d: usize, max_degree: usize) -> Result<Vec<Template>> {
    check_degree(d, max_degree)?;
    enumerate_from(Template { vertex_count: 0, edges: vec![], roots: None }, d)
}

/// All rooted templates (ordered roots at vertices 0 and 1) with `1 <= |E| <= d`,
/// up to root-preserving isomorphism; only roots may be isolated.
pub fn enumerate_rooted_templates(d: usize) -> Result<Vec<Template>> {
    enumerate_rooted_templates_with_cap(d, DEFAULT_MAX_DEGREE)
}

pub fn enumerate_rooted_templates_with_cap(d: usize, max_degree: usize) -> Result<Vec<Template>> {
    check_degree(d, max_degree)?;
    enumerate_from(Template { vertex_count: 2, edges: vec![], roots: Some((0, 1)) }, d)
}

/// All connected components (including isolated roots as singletons), each sorted,
/// listed by their smallest vertex.
pub fn connected_components(t: &Template) -> Vec<Vec<usize>> {
    components_of(t.vertex_count(), t.edges())
}

/// Components that contain at least one edge.
pub fn nontrivial_components(t: &Template) -> Vec<Vec<usize>> {
    connected_components(t).into_iter().filter(|c| c.len() > 1).collect()
}

/// Components of an arbitrary graph on vertices `0..n`.
pub fn components_of(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut c = x;
        while p[c] != r {
            let next = p[c];
            p[c] = r;
            c = next;
        }
        r
    }
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![UNSET; n];
    for v in 0..n {
        let r = find(&mut parent, v);
        if slot[r] == UNSET {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(v);
    }
    groups
}

/// Edit distance: the minimum, over all matchings, of the number of edges of the
/// symmetric-difference graph. Zero exactly for (root-preserving) isomorphic templates.
pub fn edit_distance(g1: &Template, g2: &Template) -> Result<usize> {
    if g1.is_rooted() != g2.is_rooted() {
        return invalid("edit distance needs two rooted or two unrooted templates");
    }
    let common = crate::matchings::max_common_edges(g1, g2);
    Ok(g1.edge_count() + g2.edge_count() - 2 * common)
}
