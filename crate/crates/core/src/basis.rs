//! Normalized invariant basis `Ψ_G` and exact assembly of its Gram matrix.
//!
//! An entry `E[Ψ_{G1} Ψ_{G2}]` is kept as an exact numerator
//! `s = Σ_M |Π(M)| E[P̄ P̄]` over a denominator `𝕍(G1) 𝕍(G2)`; the only irrational
//! step, the square root, is taken in double-double precision at the very end.

use std::str::FromStr;

use num_traits::Zero;
use rayon::prelude::*;
use serde_json::{json, Value};
use twofloat::TwoFloat;

use crate::error::{invalid, Result};
use crate::graph_core::{
    automorphism_count, enumerate_rooted_templates, enumerate_templates, nontrivial_components, Template,
};
use crate::matchings::{classify, for_each_matching, is_star, labeling_count, Matching};
use crate::models::{ModelSpec, MomentOracle, MomentValue, Sampling};
use crate::rational::{dd_div, falling_factorial, format_sqrt_ratio, parse_rational, q_from_big, q_to_twofloat, qpow, signed_sqrt_ratio, Q};

/// Variance proxy `𝕍(G) = n^{(|V|)} |Aut(G)| q̄^{|E|}`, or for a rooted template
/// `𝕍^{(1,2)}(G) = (n-2)^{(|V|-2)} |Aut^{(1,2)}(G)| q̄^{|E|}`.
pub fn variance_proxy(t: &Template, model: &ModelSpec) -> Result<Q> {
    let v = t.vertex_count() as u64;
    if model.n < v {
        return invalid(format!("n = {} is smaller than the {v} vertices of template {t}", model.n));
    }
    let labelings = if t.is_rooted() { falling_factorial(model.n - 2, v - 2) } else { falling_factorial(model.n, v) };
    Ok(q_from_big(labelings * automorphism_count(t)) * qpow(&model.q_bar(), t.edge_count()))
}

/// A basis element: template plus its variance proxy.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisElement {
    pub template: Template,
    pub variance_proxy: Q,
}

impl BasisElement {
    pub fn new(template: Template, model: &ModelSpec) -> Result<Self> {
        let variance_proxy = variance_proxy(&template, model)?;
        Ok(BasisElement { template, variance_proxy })
    }
}

/// One Gram entry `numerator / sqrt(proxy)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GramEntry {
    /// Exact (or Monte-Carlo) numerator `s`.
    pub numerator: MomentValue,
    /// Product of the variance proxies of the two indices (`1` for the constant).
    pub proxy: Q,
}

impl GramEntry {
    fn constant() -> Self {
        GramEntry { numerator: MomentValue::one(), proxy: Q::from_integer(1.into()) }
    }

    /// Entry value in double-double precision.
    pub fn value(&self) -> TwoFloat {
        match &self.numerator {
            MomentValue::Exact(s) => signed_sqrt_ratio(s, &self.proxy),
            MomentValue::MonteCarlo { mean, .. } => dd_div(TwoFloat::from(*mean), q_to_twofloat(&self.proxy).sqrt()),
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.value().hi() + self.value().lo()
    }

    /// Standard error of the entry (zero when exact).
    pub fn std_error(&self) -> f64 {
        let scale = q_to_twofloat(&self.proxy).sqrt();
        self.numerator.std_error() / (scale.hi() + scale.lo())
    }

    pub fn is_exact(&self) -> bool {
        self.numerator.is_exact()
    }

    /// Exact rational value when the entry is rational (always on the diagonal).
    pub fn exact_rational(&self) -> Option<Q> {
        let s = self.numerator.exact()?;
        crate::rational::exact_sqrt(&(s * s / &self.proxy)).map(|r| if s < &Q::zero() { -r } else { r })
    }

    /// Text form: `a/b`, `±sqrt(r)` with `r = s²/proxy` exact, or `~x` for Monte-Carlo entries.
    pub fn text(&self) -> String {
        match &self.numerator {
            MomentValue::Exact(s) => format_sqrt_ratio(s, &self.proxy),
            MomentValue::MonteCarlo { .. } => format!("~{:e}", self.to_f64()),
        }
    }
}

/// Parses the text form produced by [`GramEntry::text`] into a double-double.
pub fn parse_entry_text(text: &str) -> Result<TwoFloat> {
    let t = text.trim();
    if let Some(rest) = t.strip_prefix('~') {
        return f64::from_str(rest).map(TwoFloat::from).map_err(|_| crate::LdError::Validation(format!("bad entry '{t}'")));
    }
    let (negative, body) = match t.strip_prefix('-') {
        Some(rest) if rest.starts_with("sqrt(") => (true, rest),
        _ => (false, t),
    };
    if let Some(inner) = body.strip_prefix("sqrt(").and_then(|r| r.strip_suffix(')')) {
        let root = q_to_twofloat(&parse_rational(inner)?).sqrt();
        return Ok(if negative { -root } else { root });
    }
    Ok(q_to_twofloat(&parse_rational(t)?))
}

/// Options of the Gram assembly.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GramOptions {
    /// Skip matchings outside `𝓜*` (valid only under independent sampling, where
    /// they contribute exactly zero).
    pub skip_non_star: bool,
}

/// Labeled items (connected components as edge lists over fused ids) of a matching.
fn matching_items(g1: &Template, g2: &Template, m: &Matching) -> Result<Vec<Vec<(u64, u64)>>> {
    let mr = classify(g1, g2, m)?;
    let mut items = Vec::new();
    for comp in nontrivial_components(g1) {
        items.push(g1.edges().iter().filter(|(a, _)| comp.contains(a)).map(|&(a, b)| (a as u64, b as u64)).collect());
    }
    for comp in nontrivial_components(g2) {
        items.push(
            g2.edges()
                .iter()
                .filter(|(a, _)| comp.contains(a))
                .map(|&(a, b)| (mr.g2_ids[a] as u64, mr.g2_ids[b] as u64))
                .collect(),
        );
    }
    Ok(items)
}

/// Numerator `s = Σ_M |Π(M)| E[P̄_{G1,π1} P̄_{G2,π2}]` of a Gram entry.
pub fn gram_numerator(oracle: &MomentOracle, g1: &Template, g2: &Template, options: &GramOptions) -> Result<MomentValue> {
    if g1.is_rooted() != g2.is_rooted() {
        return invalid("cannot pair a rooted template with an unrooted one");
    }
    if options.skip_non_star && oracle.model().sampling != Sampling::Independent {
        return invalid("non-star matchings only vanish under independent sampling");
    }
    let n = oracle.model().n;
    let mut matchings = Vec::new();
    for_each_matching(g1, g2, |pairs| matchings.push(pairs.to_vec()));
    let mut total = MomentValue::zero();
    for pairs in matchings {
        let m = Matching::new(pairs)?;
        let count = labeling_count(g1, g2, &m, n).or_else(|_| Ok::<_, crate::LdError>(Zero::zero()))?;
        if count.is_zero() {
            continue;
        }
        if options.skip_non_star && !is_star(&classify(g1, g2, &m)?, g1, g2) {
            continue;
        }
        let items = matching_items(g1, g2, &m)?;
        let moment = oracle.centered_expectation(&items, None, false)?;
        total = total.add(&moment.scale(&q_from_big(count)));
    }
    Ok(total)
}

/// `E[Ψ_{G1} Ψ_{G2}]` as an exact numerator over the product of variance proxies.
pub fn gram_entry(oracle: &MomentOracle, g1: &Template, g2: &Template) -> Result<GramEntry> {
    gram_entry_with(oracle, g1, g2, &GramOptions::default())
}

pub fn gram_entry_with(oracle: &MomentOracle, g1: &Template, g2: &Template, options: &GramOptions) -> Result<GramEntry> {
    let proxy = variance_proxy(g1, oracle.model())? * variance_proxy(g2, oracle.model())?;
    Ok(GramEntry { numerator: gram_numerator(oracle, g1, g2, options)?, proxy })
}

/// Border entry `E[Ψ_G]` (null distribution) or `E_{H1}[Ψ_G]` when `altered`.
pub fn mean_entry(oracle: &MomentOracle, t: &Template, altered: bool) -> Result<GramEntry> {
    let model = oracle.model();
    let proxy = variance_proxy(t, model)?;
    let v = t.vertex_count() as u64;
    let count = if t.is_rooted() { falling_factorial(model.n - 2, v - 2) } else { falling_factorial(model.n, v) };
    let items = matching_items(t, t, &Matching::new(if t.is_rooted() { vec![(0, 0), (1, 1)] } else { vec![] })?)?;
    let own: Vec<Vec<(u64, u64)>> = items[..nontrivial_components(t).len()].to_vec();
    let moment = oracle.centered_expectation(&own, None, altered)?;
    Ok(GramEntry { numerator: moment.scale(&q_from_big(count)), proxy })
}

/// `E[x Ψ^{(1,2)}_G]` for a rooted template (roots carry the indicator).
pub fn x_weighted_entry(oracle: &MomentOracle, t: &Template) -> Result<GramEntry> {
    if !t.is_rooted() {
        return invalid("x-weighted entries need a rooted template");
    }
    let model = oracle.model();
    let proxy = variance_proxy(t, model)?;
    let count = falling_factorial(model.n - 2, t.vertex_count() as u64 - 2);
    let items = matching_items(t, t, &Matching::new(vec![(0, 0), (1, 1)])?)?;
    let own: Vec<Vec<(u64, u64)>> = items[..nontrivial_components(t).len()].to_vec();
    let (r1, r2) = t.roots().expect("rooted");
    let moment = oracle.centered_expectation(&own, Some((r1 as u64, r2 as u64)), false)?;
    Ok(GramEntry { numerator: moment.scale(&q_from_big(count)), proxy })
}

/// Gram matrix over `{constant} ∪ templates`.
#[derive(Clone, Debug)]
pub struct GramMatrix {
    pub model: ModelSpec,
    pub degree: usize,
    pub rooted: bool,
    pub templates: Vec<Template>,
    /// Template-by-template entries (without the constant index).
    pub entries: Vec<Vec<GramEntry>>,
    /// `E[Ψ_G]` for each template (the constant row).
    pub border: Vec<GramEntry>,
}

/// Templates indexing the basis at degree `d`.
pub fn basis_templates(d: usize, rooted: bool) -> Result<Vec<Template>> {
    if rooted {
        enumerate_rooted_templates(d)
    } else {
        enumerate_templates(d)
    }
}

/// Assembles the Gram matrix; unordered pairs are computed in parallel and
/// collected in a fixed order, so the result does not depend on scheduling.
pub fn gram_matrix(oracle: &MomentOracle, d: usize, rooted: bool) -> Result<GramMatrix> {
    gram_matrix_with(oracle, d, rooted, &GramOptions::default())
}

pub fn gram_matrix_with(oracle: &MomentOracle, d: usize, rooted: bool, options: &GramOptions) -> Result<GramMatrix> {
    let templates = basis_templates(d, rooted)?;
    let t = templates.len();
    for tpl in &templates {
        variance_proxy(tpl, oracle.model())?;
    }
    let pairs: Vec<(usize, usize)> = (0..t).flat_map(|i| (i..t).map(move |j| (i, j))).collect();
    let computed: Vec<GramEntry> = pairs
        .par_iter()
        .map(|&(i, j)| gram_entry_with(oracle, &templates[i], &templates[j], options))
        .collect::<Result<Vec<_>>>()?;
    let border: Vec<GramEntry> =
        templates.par_iter().map(|tpl| mean_entry(oracle, tpl, false)).collect::<Result<Vec<_>>>()?;
    let mut entries = vec![vec![GramEntry::constant(); t]; t];
    for (&(i, j), e) in pairs.iter().zip(computed) {
        entries[j][i] = e.clone();
        entries[i][j] = e;
    }
    Ok(GramMatrix { model: oracle.model().clone(), degree: d, rooted, templates, entries, border })
}

impl GramMatrix {
    /// Size including the constant index.
    pub fn size(&self) -> usize {
        self.templates.len() + 1
    }

    /// Entry at `(i, j)` over `{constant} ∪ templates` (index 0 is the constant).
    pub fn entry(&self, i: usize, j: usize) -> GramEntry {
        match (i, j) {
            (0, 0) => GramEntry::constant(),
            (0, j) => self.border[j - 1].clone(),
            (i, 0) => self.border[i - 1].clone(),
            (i, j) => self.entries[i - 1][j - 1].clone(),
        }
    }

    /// Full matrix in double-double precision.
    pub fn float_matrix(&self) -> Vec<Vec<TwoFloat>> {
        (0..self.size()).map(|i| (0..self.size()).map(|j| self.entry(i, j).value()).collect()).collect()
    }

    pub fn is_exact(&self) -> bool {
        self.entries.iter().flatten().chain(&self.border).all(GramEntry::is_exact)
    }

    /// True when every entry equals the identity exactly.
    pub fn is_exact_identity(&self) -> bool {
        (0..self.size()).all(|i| {
            (0..self.size()).all(|j| {
                let e = self.entry(i, j);
                e.is_exact() && e.exact_rational() == Some(Q::from_integer(if i == j { 1 } else { 0 }.into()))
            })
        })
    }

    /// JSON with sorted keys: model, D, rooted, templates, gamma (text entries),
    /// border, float_gamma, and std_error when any entry is a Monte-Carlo estimate.
    pub fn to_json(&self) -> Value {
        let size = self.size();
        let gamma: Vec<Vec<String>> = (0..size).map(|i| (0..size).map(|j| self.entry(i, j).text()).collect()).collect();
        let float_gamma: Vec<Vec<f64>> =
            (0..size).map(|i| (0..size).map(|j| self.entry(i, j).to_f64()).collect()).collect();
        let mut obj = json!({
            "model": self.model,
            "D": self.degree,
            "rooted": self.rooted,
            "templates": self.templates.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
            "gamma": gamma,
            "border": self.border.iter().map(GramEntry::text).collect::<Vec<_>>(),
            "float_gamma": float_gamma,
        });
        if !self.is_exact() {
            let se: Vec<Vec<f64>> =
                (0..size).map(|i| (0..size).map(|j| self.entry(i, j).std_error()).collect()).collect();
            obj["std_error"] = json!(se);
        }
        obj
    }
}

/// Reads the `gamma` text matrix of a Gram JSON document into double-doubles.
pub fn float_matrix_from_json(doc: &Value) -> Result<Vec<Vec<TwoFloat>>> {
    let rows = doc
        .get("gamma")
        .and_then(Value::as_array)
        .ok_or_else(|| crate::LdError::Validation("Gram document has no 'gamma' array".into()))?;
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        let cells = row.as_array().ok_or_else(|| crate::LdError::Validation("gamma rows must be arrays".into()))?;
        let parsed = cells
            .iter()
            .map(|c| {
                c.as_str()
                    .ok_or_else(|| crate::LdError::Validation("gamma entries must be strings".into()))
                    .and_then(parse_entry_text)
            })
            .collect::<Result<Vec<_>>>()?;
        if parsed.len() != rows.len() {
            return invalid("gamma must be square");
        }
        out.push(parsed);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_core::canonicalize;
    use crate::models::Family;
    use crate::rational::{q_frac, q_int};

    fn model(n: u64) -> ModelSpec {
        ModelSpec::new(Family::Hs, Sampling::Independent, n, 2, q_frac(1, 2), q_frac(1, 10)).unwrap()
    }

    #[test]
    fn variance_proxy_examples() {
        let edge = canonicalize(2, &[(0, 1)], None).unwrap();
        assert_eq!(variance_proxy(&edge, &model(10)).unwrap(), q_int(45));
        let rooted = canonicalize(2, &[(0, 1)], Some((0, 1))).unwrap();
        assert_eq!(variance_proxy(&rooted, &model(10)).unwrap(), q_frac(1, 4));
        let tri = canonicalize(3, &[(0, 1), (1, 2), (0, 2)], None).unwrap();
        assert_eq!(variance_proxy(&tri, &model(10)).unwrap(), q_frac(135, 2));
        assert!(variance_proxy(&tri, &model(2)).is_err());
    }

    #[test]
    fn entry_text_round_trips() {
        for (s, v) in [(q_frac(3, 1), q_int(4)), (q_frac(-1, 3), q_int(2)), (q_frac(2, 5), q_int(1))] {
            let e = GramEntry { numerator: MomentValue::Exact(s), proxy: v };
            let parsed = parse_entry_text(&e.text()).unwrap();
            assert!((parsed - e.value()).abs() < TwoFloat::from(1e-30));
        }
    }
}
