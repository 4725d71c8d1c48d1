//! Spectral verification of near-orthonormality, exact low-degree advantage and
//! correlation, and checkers for the structural conditions on moments.
//!
//! Linear algebra runs in double-double precision (about 106 significant bits)
//! on exactly assembled Gram matrices.

use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;
use twofloat::TwoFloat;

use crate::basis::{gram_matrix, mean_entry, x_weighted_entry, GramMatrix};
use crate::error::{invalid, LdError, Result};
use crate::graph_core::{enumerate_templates, Template};
use crate::matchings::{classify, enumerate_matchings, MergeResult};
use crate::models::{Family, ModelSpec, MomentOracle, MomentValue, Sampling};
use crate::rational::{dd_div, format_rational, parse_rational, q_to_f64, qpow, Q};

fn tf(x: f64) -> TwoFloat {
    TwoFloat::from(x)
}

fn to_f64(x: TwoFloat) -> f64 {
    f64::from(x)
}

fn check_symmetric(a: &[Vec<TwoFloat>]) -> Result<()> {
    let n = a.len();
    for (i, row) in a.iter().enumerate() {
        if row.len() != n {
            return invalid("matrix must be square");
        }
        for j in 0..i {
            let scale = a[i][i].abs().max(a[j][j].abs()).max(tf(1.0));
            if (a[i][j] - a[j][i]).abs() > scale * 1e-25 {
                return invalid(format!("matrix is not symmetric at ({i}, {j})"));
            }
        }
    }
    Ok(())
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(matrix: &[Vec<TwoFloat>]) -> Result<Vec<TwoFloat>> {
    check_symmetric(matrix)?;
    let n = matrix.len();
    let mut a: Vec<Vec<TwoFloat>> = matrix.to_vec();
    let frob: TwoFloat = a.iter().flatten().fold(tf(0.0), |acc, &x| acc + x * x);
    let tolerance = frob * 1e-62;
    for _sweep in 0..100 {
        let off: TwoFloat =
            (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).fold(tf(0.0), |acc, (i, j)| {
                acc + a[i][j] * a[i][j]
            });
        if off <= tolerance {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = dd_div(a[q][q] - a[p][p], a[p][q] * 2.0);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = dd_div(tf(sign), theta.abs() + (theta * theta + 1.0).sqrt());
                let c = dd_div(tf(1.0), (t * t + 1.0).sqrt());
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<TwoFloat> = (0..n).map(|i| a[i][i]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    Ok(eig)
}

/// Spectrum summary of a Gram matrix.
#[derive(Clone, Debug, Serialize)]
pub struct Spectrum {
    /// Eigenvalues of `Γ`, ascending.
    pub eigenvalues: Vec<f64>,
    /// `max |eig(Γ - I)|`.
    pub op_norm_deviation: f64,
    /// `max_i Σ_j |(Γ - I)_ij|`, an upper bound on the deviation.
    pub l1_row_bound: f64,
}

/// Eigenvalues of `Γ`, the exact operator-norm deviation and the ℓ1-row bound.
pub fn spectrum(matrix: &[Vec<TwoFloat>]) -> Result<Spectrum> {
    let eig = symmetric_eigenvalues(matrix)?;
    let dev = eig.iter().map(|&e| (e - 1.0).abs()).fold(tf(0.0), |a, b| a.max(b));
    let l1 = matrix
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter().enumerate().fold(tf(0.0), |acc, (j, &x)| acc + if i == j { (x - 1.0).abs() } else { x.abs() })
        })
        .fold(tf(0.0), |a, b| a.max(b));
    Ok(Spectrum { eigenvalues: eig.into_iter().map(to_f64).collect(), op_norm_deviation: to_f64(dev), l1_row_bound: to_f64(l1) })
}

/// `(‖Γ - I‖_op, ℓ1-row bound)` of a Gram matrix.
pub fn operator_norm_deviation(g: &GramMatrix) -> Result<(f64, f64)> {
    let s = spectrum(&g.float_matrix())?;
    Ok((s.op_norm_deviation, s.l1_row_bound))
}

/// Solves `A x = b` for symmetric positive-definite `A` by Cholesky factorization.
pub fn solve_spd(a: &[Vec<TwoFloat>], b: &[TwoFloat]) -> Result<Vec<TwoFloat>> {
    let n = a.len();
    let mut l = vec![vec![tf(0.0); n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(LdError::SingularGram(format!("matrix is not positive definite (pivot {i})")));
                }
                l[i][i] = sum.sqrt();
            } else {
                l[i][j] = dd_div(sum, l[j][j]);
            }
        }
    }
    let mut y = vec![tf(0.0); n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i][k] * y[k];
        }
        y[i] = dd_div(sum, l[i][i]);
    }
    let mut x = vec![tf(0.0); n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum -= l[k][i] * x[k];
        }
        x[i] = dd_div(sum, l[i][i]);
    }
    Ok(x)
}

/// `αᵀ A α`.
pub fn quadratic_form(a: &[Vec<TwoFloat>], alpha: &[TwoFloat]) -> TwoFloat {
    let mut acc = tf(0.0);
    for (i, row) in a.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            acc += alpha[i] * x * alpha[j];
        }
    }
    acc
}

/// Low-degree report: near-orthonormality figures, advantage or correlation, and
/// the optimizing coefficient vector (indexed like the Gram matrix).
#[derive(Clone, Debug, Default, Serialize)]
pub struct LdReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adv_exact: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adv_orthonormal_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corr_exact: Option<f64>,
    /// Exact rational value of the criterion when it is rational (degree 0).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corr_exact_rational: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corr_orthonormal_approx: Option<f64>,
    #[serde(rename = "D")]
    pub degree: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<String>,
    /// True when every moment entering the report was computed exactly.
    pub exact_moments: bool,
    pub l1_row_bound: f64,
    pub model: Option<ModelSpec>,
    /// `m = (1, E_{H1}[Ψ_G])` for the advantage, `c = (E[x], E[x Ψ_G])` for the correlation.
    pub moment_vector: Vec<f64>,
    pub op_norm_deviation: f64,
    pub optimal_coefficients: Vec<f64>,
    pub templates: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_mean: Option<f64>,
}

struct Quadratic {
    value: TwoFloat,
    coefficients: Vec<TwoFloat>,
    deviation: f64,
    l1: f64,
}

/// `vᵀ Γ⁻¹ v`, refusing when `‖Γ - I‖_op ≥ 1`.
fn inverse_quadratic(gram: &[Vec<TwoFloat>], v: &[TwoFloat]) -> Result<Quadratic> {
    let s = spectrum(gram)?;
    if s.op_norm_deviation >= 1.0 {
        return Err(LdError::SingularGram(format!(
            "operator-norm deviation {} >= 1: outside the near-orthonormal regime",
            s.op_norm_deviation
        )));
    }
    let coefficients = solve_spd(gram, v)?;
    let value = v.iter().zip(&coefficients).fold(tf(0.0), |acc, (&a, &b)| acc + a * b);
    Ok(Quadratic { value, coefficients, deviation: s.op_norm_deviation, l1: s.l1_row_bound })
}

/// Advantage from an assembled null Gram matrix and the vector `E_{H1}[Ψ_G]`.
pub fn advantage_from(gram: &GramMatrix, h1_means: &[TwoFloat]) -> Result<LdReport> {
    if h1_means.len() != gram.templates.len() {
        return invalid("one H1 mean per template is required");
    }
    let mut m = vec![tf(1.0)];
    m.extend_from_slice(h1_means);
    let quad = inverse_quadratic(&gram.float_matrix(), &m)?;
    let norm2 = m.iter().fold(tf(0.0), |acc, &x| acc + x * x);
    let bound = (norm2.sqrt() / (1.0 - quad.deviation)).hi();
    Ok(LdReport {
        adv_exact: Some(to_f64(quad.value.max(tf(0.0)).sqrt())),
        adv_orthonormal_bound: Some(bound),
        degree: gram.degree,
        l1_row_bound: quad.l1,
        model: Some(gram.model.clone()),
        moment_vector: m.iter().map(|&x| to_f64(x)).collect(),
        op_norm_deviation: quad.deviation,
        optimal_coefficients: quad.coefficients.iter().map(|&x| to_f64(x)).collect(),
        templates: gram.templates.iter().map(Template::to_string).collect(),
        ..Default::default()
    })
}

/// `Adv_{≤D}` for distinguishing the null from the oracle's alteration (the null
/// itself when no alteration is attached, i.e. `ε = 0`).
pub fn advantage(oracle: &MomentOracle, d: usize) -> Result<LdReport> {
    let epsilon = Some(oracle.alteration().map_or("0".to_string(), |a| format_rational(&a.epsilon)));
    if d == 0 {
        // Only the constant polynomial: its mean is one under both distributions.
        return Ok(LdReport {
            adv_exact: Some(1.0),
            adv_orthonormal_bound: Some(1.0),
            epsilon,
            exact_moments: true,
            model: Some(oracle.model().clone()),
            moment_vector: vec![1.0],
            optimal_coefficients: vec![1.0],
            ..Default::default()
        });
    }
    let gram = gram_matrix(oracle, d, false)?;
    let means: Vec<_> =
        gram.templates.par_iter().map(|t| mean_entry(oracle, t, true)).collect::<Result<Vec<_>>>()?;
    let exact = gram.is_exact() && means.iter().all(|e| e.is_exact());
    let mut report = advantage_from(&gram, &means.iter().map(|e| e.value()).collect::<Vec<_>>())?;
    report.exact_moments = exact;
    report.epsilon = epsilon;
    Ok(report)
}

/// `Corr_{≤D}` for estimating `x = 1{Θ_{z1 z2} ≠ 0}` with the rooted basis.
pub fn correlation(oracle: &MomentOracle, d: usize) -> Result<LdReport> {
    let x = oracle.x_mean()?;
    if d == 0 {
        let exact = x.exact().cloned();
        return Ok(LdReport {
            corr_exact: Some(x.to_f64()),
            corr_exact_rational: exact.as_ref().map(format_rational),
            corr_orthonormal_approx: Some(x.to_f64()),
            degree: 0,
            exact_moments: x.is_exact(),
            model: Some(oracle.model().clone()),
            moment_vector: vec![x.to_f64()],
            optimal_coefficients: vec![1.0],
            x_mean: Some(x.to_f64()),
            ..Default::default()
        });
    }
    let gram = gram_matrix(oracle, d, true)?;
    let entries: Vec<_> =
        gram.templates.par_iter().map(|t| x_weighted_entry(oracle, t)).collect::<Result<Vec<_>>>()?;
    let mut c = vec![crate::rational::q_to_twofloat(x.exact().unwrap_or(&Q::zero()))];
    if !x.is_exact() {
        c[0] = tf(x.to_f64());
    }
    c.extend(entries.iter().map(|e| e.value()));
    let quad = inverse_quadratic(&gram.float_matrix(), &c)?;
    let norm2 = c.iter().fold(tf(0.0), |acc, &v| acc + v * v);
    Ok(LdReport {
        corr_exact: Some(to_f64(quad.value.max(tf(0.0)).sqrt())),
        corr_orthonormal_approx: Some(to_f64(norm2.sqrt())),
        degree: d,
        exact_moments: gram.is_exact() && x.is_exact() && entries.iter().all(|e| e.is_exact()),
        l1_row_bound: quad.l1,
        model: Some(oracle.model().clone()),
        moment_vector: c.iter().map(|&v| to_f64(v)).collect(),
        op_norm_deviation: quad.deviation,
        optimal_coefficients: quad.coefficients.iter().map(|&v| to_f64(v)).collect(),
        templates: gram.templates.iter().map(Template::to_string).collect(),
        x_mean: Some(x.to_f64()),
        ..Default::default()
    })
}

/// The structural conditions that can be checked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Condition {
    Signal,
    Moment,
    Variance,
    VariancePermutation,
}

impl std::str::FromStr for Condition {
    type Err = LdError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "signal" => Ok(Condition::Signal),
            "moment" => Ok(Condition::Moment),
            "variance" => Ok(Condition::Variance),
            "variance-permutation" => Ok(Condition::VariancePermutation),
            other => invalid(format!(
                "unknown condition '{other}' (expected signal, moment, variance or variance-permutation)"
            )),
        }
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Condition::Signal => "signal",
            Condition::Moment => "moment",
            Condition::Variance => "variance",
            Condition::VariancePermutation => "variance-permutation",
        })
    }
}

/// Constants of the conditions (all non-negative).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConditionConstants {
    #[serde(serialize_with = "ser_q")]
    pub c_m: Q,
    #[serde(serialize_with = "ser_q")]
    pub c_s: Q,
    #[serde(serialize_with = "ser_q")]
    pub c_v1: Q,
    #[serde(serialize_with = "ser_q")]
    pub c_v2: Q,
    #[serde(serialize_with = "ser_q")]
    pub c_v3: Q,
    #[serde(serialize_with = "ser_q")]
    pub c_v4: Q,
    #[serde(serialize_with = "ser_q")]
    pub c_vd1: Q,
    #[serde(serialize_with = "ser_q")]
    pub c_vd2: Q,
}

fn ser_q<S: serde::Serializer>(q: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(q))
}

impl ConditionConstants {
    /// Constants established for each model: `c_m = 0` for HS-I and SBM-I,
    /// `1` for TS-I, HS-P and SBM-P, `2` for TS-P; `c_v1 = c_m`;
    /// `c_s = c_v2 = c_v3 = c_v4 = 1`; `c_vd1 = 2`, `c_vd2 = 8`.
    pub fn defaults_for(model: &ModelSpec) -> Self {
        let c_m = match (model.family, model.sampling) {
            (Family::Hs | Family::Sbm, Sampling::Independent) => 0,
            (Family::Ts, Sampling::Permutation) => 2,
            _ => 1,
        };
        let q = |v: i64| Q::from_integer(v.into());
        ConditionConstants {
            c_m: q(c_m),
            c_s: q(1),
            c_v1: q(c_m),
            c_v2: q(1),
            c_v3: q(1),
            c_v4: q(1),
            c_vd1: q(2),
            c_vd2: q(8),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c_s", &self.c_s),
            ("c_m", &self.c_m),
            ("c_v1", &self.c_v1),
            ("c_v2", &self.c_v2),
            ("c_v3", &self.c_v3),
            ("c_v4", &self.c_v4),
            ("c_vd1", &self.c_vd1),
            ("c_vd2", &self.c_vd2),
        ] {
            if v.is_negative() {
                return invalid(format!("{name} = {} must be non-negative", format_rational(v)));
            }
        }
        Ok(())
    }

    /// Sets a constant by name (`c_m`, `c_v1`, ...).
    pub fn set(&mut self, name: &str, value: &str) -> Result<()> {
        let v = parse_rational(value)?;
        let slot = match name {
            "c_s" => &mut self.c_s,
            "c_m" => &mut self.c_m,
            "c_v1" => &mut self.c_v1,
            "c_v2" => &mut self.c_v2,
            "c_v3" => &mut self.c_v3,
            "c_v4" => &mut self.c_v4,
            "c_vd1" => &mut self.c_vd1,
            "c_vd2" => &mut self.c_vd2,
            other => return invalid(format!("unknown condition constant '{other}'")),
        };
        *slot = v;
        Ok(())
    }
}

/// Result of a condition check: the largest ratio LHS/RHS over every case, with its witness.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    pub cases_checked: usize,
    pub cases_skipped: usize,
    pub condition: String,
    pub constants: ConditionConstants,
    #[serde(rename = "D")]
    pub degree: usize,
    pub holds: bool,
    pub model: ModelSpec,
    /// For the variance condition: exact `max_G |E[P_G²] - q̄^{|E|}| / q̄^{|E|}`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance_part2_max_deviation: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance_part2_worst_ratio: Option<f64>,
    pub witness: String,
    pub worst_ratio: f64,
}

/// Largest number of distinct nodes for which the equality-pattern sum of the
/// permutation-dependence condition is evaluated; larger cases are skipped and counted.
pub const DEFAULT_MAX_PATTERN_NODES: usize = 8;

struct Worst {
    ratio: f64,
    witness: String,
    checked: usize,
    skipped: usize,
}

impl Worst {
    fn new() -> Self {
        Worst { ratio: 0.0, witness: "none".into(), checked: 0, skipped: 0 }
    }

    fn merge(mut self, other: Worst) -> Worst {
        if other.ratio > self.ratio {
            self.ratio = other.ratio;
            self.witness = other.witness;
        }
        self.checked += other.checked;
        self.skipped += other.skipped;
        self
    }

    fn record(&mut self, ratio: f64, witness: impl FnOnce() -> String) {
        self.checked += 1;
        if ratio > self.ratio || (self.witness == "none" && ratio >= self.ratio) {
            self.ratio = ratio;
            self.witness = witness();
        }
    }
}

fn powf(d: usize, c: &Q) -> f64 {
    (d as f64).powf(q_to_f64(c))
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else if rhs == 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    }
}

/// Labeled representative of a matching: fused ids shifted to 1-based labels.
fn labeled_pair(g1: &Template, g2: &Template, mr: &MergeResult) -> (Vec<(u64, u64)>, Vec<(u64, u64)>) {
    let e1 = g1.edges().iter().map(|&(a, b)| (a as u64 + 1, b as u64 + 1)).collect();
    let e2 = g2.edges().iter().map(|&(a, b)| (mr.g2_ids[a] as u64 + 1, mr.g2_ids[b] as u64 + 1)).collect();
    (e1, e2)
}

fn is_perfect(mr: &MergeResult, g1: &Template, g2: &Template) -> bool {
    mr.delta_edges.is_empty() && mr.matched == g1.vertex_count() && mr.matched == g2.vertex_count()
}

fn raw_edges_moment(oracle: &MomentOracle, edges: &[(u64, u64)]) -> Result<MomentValue> {
    oracle.raw_edge_moment(edges)
}

/// Evaluates one condition over all templates (and matchings) at degree `d`.
pub fn check_condition(
    oracle: &MomentOracle,
    d: usize,
    which: Condition,
    consts: &ConditionConstants,
) -> Result<ConditionReport> {
    check_condition_with(oracle, d, which, consts, DEFAULT_MAX_PATTERN_NODES)
}

pub fn check_condition_with(
    oracle: &MomentOracle,
    d: usize,
    which: Condition,
    consts: &ConditionConstants,
    max_pattern_nodes: usize,
) -> Result<ConditionReport> {
    consts.validate()?;
    if d == 0 {
        return invalid("conditions are stated for D >= 1");
    }
    let model = oracle.model().clone();
    let lambda = q_to_f64(&model.lambda);
    let kn = model.k as f64 / model.n as f64;
    let pbar = q_to_f64(&model.p_bar());
    let templates = enumerate_templates(d)?;
    let mut part2: Option<(Q, f64)> = None;
    let worst = match which {
        Condition::Signal => {
            let q = q_to_f64(&model.q);
            let terms = [
                ("k/n", kn),
                ("lambda k / sqrt(n q)", lambda * model.k as f64 / (model.n as f64 * q).sqrt()),
                ("lambda/q", lambda / q),
            ];
            let rhs = (d as f64).powf(-8.0 * q_to_f64(&consts.c_s));
            let mut w = Worst::new();
            for (name, value) in terms {
                w.record(value / rhs, || name.to_string());
            }
            w
        }
        Condition::Moment => {
            let dm = powf(d, &consts.c_m);
            let mut w = Worst::new();
            for t in &templates {
                if t.vertex_count() as u64 > model.n {
                    w.skipped += 1;
                    continue;
                }
                let edges: Vec<(u64, u64)> = t.edges().iter().map(|&(a, b)| (a as u64 + 1, b as u64 + 1)).collect();
                let lhs = raw_edges_moment(oracle, &edges)?.to_f64().abs();
                let cc = t.nontrivial_component_count();
                let rhs = (dm * lambda).powi(t.edge_count() as i32) * (dm * kn).powi((t.vertex_count() - cc) as i32);
                w.record(ratio(lhs, rhs), || t.to_string());
            }
            w
        }
        Condition::Variance => {
            let d1 = powf(d, &consts.c_v1);
            let c2 = q_to_f64(&consts.c_v2);
            let per_pair: Vec<Worst> = pairs(&templates)
                .par_iter()
                .map(|&(g1, g2)| -> Result<Worst> {
                    let mut w = Worst::new();
                    for m in enumerate_matchings(g1, g2)? {
                        let mr = classify(g1, g2, &m)?;
                        if is_perfect(&mr, g1, g2) {
                            continue;
                        }
                        if mr.node_count(g1.vertex_count(), g2.vertex_count()) as u64 > model.n {
                            w.skipped += 1;
                            continue;
                        }
                        let (e1, e2) = labeled_pair(g1, g2, &mr);
                        let mut all = e1;
                        all.extend(e2);
                        let lhs = raw_edges_moment(oracle, &all)?.to_f64().abs();
                        let rhs = c2
                            * (d1 * lambda).powi(mr.delta_edges.len() as i32)
                            * pbar.powi(mr.intersection_edges.len() as i32)
                            * (d1 * kn).powi(mr.delta_vertices.len() as i32 - mr.cc_delta as i32);
                        w.record(ratio(lhs, rhs), || format!("{g1} | {g2} | {:?}", m.pairs()));
                    }
                    Ok(w)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut w = per_pair.into_iter().fold(Worst::new(), Worst::merge);
            // Part 2: second moments against q̄^{|E|}.
            let qbar = model.q_bar();
            let tol = q_to_f64(&consts.c_v3) * powf(d, &-consts.c_v4.clone());
            let mut max_dev = Q::zero();
            let mut worst2 = 0.0f64;
            for t in &templates {
                if t.vertex_count() as u64 > model.n {
                    continue;
                }
                let edges: Vec<(u64, u64)> = t.edges().iter().map(|&(a, b)| (a as u64 + 1, b as u64 + 1)).collect();
                let mut doubled = edges.clone();
                doubled.extend(edges);
                let second = raw_edges_moment(oracle, &doubled)?;
                let base = qpow(&qbar, t.edge_count());
                let dev = match second.exact() {
                    Some(v) => ((v - &base) / &base).abs(),
                    None => Q::from_float((second.to_f64() / q_to_f64(&base) - 1.0).abs()).unwrap_or_else(Q::zero),
                };
                let r = q_to_f64(&dev) / tol;
                w.record(r, || format!("second moment of {t}"));
                worst2 = worst2.max(r);
                if dev > max_dev {
                    max_dev = dev;
                }
            }
            part2 = Some((max_dev, worst2));
            w
        }
        Condition::VariancePermutation => {
            let dv = powf(d, &consts.c_vd1);
            let c2 = q_to_f64(&consts.c_vd2);
            let sqrt_n = (model.n as f64).sqrt();
            let per_pair: Vec<Worst> = pairs(&templates)
                .par_iter()
                .map(|&(g1, g2)| -> Result<Worst> {
                    let mut w = Worst::new();
                    for m in enumerate_matchings(g1, g2)? {
                        let mr = classify(g1, g2, &m)?;
                        if is_perfect(&mr, g1, g2) {
                            continue;
                        }
                        let nodes = mr.node_count(g1.vertex_count(), g2.vertex_count());
                        if nodes > max_pattern_nodes {
                            w.skipped += 1;
                            continue;
                        }
                        let (e1, e2) = labeled_pair(g1, g2, &mr);
                        let mut all = e1;
                        all.extend(e2);
                        let pure = mr.pure_vertex_set();
                        let mut groups: Vec<Vec<u64>> =
                            mr.pure_components.iter().map(|c| c.iter().map(|&x| x as u64 + 1).collect()).collect();
                        let rest: Vec<u64> =
                            mr.union_vertices.iter().filter(|x| !pure.contains(x)).map(|&x| x as u64 + 1).collect();
                        if !rest.is_empty() {
                            groups.push(rest);
                        }
                        let lhs = oracle.independent_event_expectation(&all, &groups)?.to_f64().abs();
                        let rhs = c2
                            * dv
                            * (dv * lambda).powi(mr.delta_edges.len() as i32)
                            * pbar.powi(mr.intersection_edges.len() as i32)
                            * (dv * kn).powi(mr.delta_vertices.len() as i32 - mr.cc_delta as i32)
                            * (c2 * dv / sqrt_n).powi(mr.cc_pure as i32);
                        w.record(ratio(lhs, rhs), || format!("{g1} | {g2} | {:?}", m.pairs()));
                    }
                    Ok(w)
                })
                .collect::<Result<Vec<_>>>()?;
            per_pair.into_iter().fold(Worst::new(), Worst::merge)
        }
    };
    Ok(ConditionReport {
        cases_checked: worst.checked,
        cases_skipped: worst.skipped,
        condition: which.to_string(),
        constants: consts.clone(),
        degree: d,
        holds: worst.ratio <= 1.0,
        model,
        variance_part2_max_deviation: part2.as_ref().map(|(q, _)| format_rational(q)),
        variance_part2_worst_ratio: part2.map(|(_, r)| r),
        witness: worst.witness,
        worst_ratio: worst.ratio,
    })
}

fn pairs(templates: &[Template]) -> Vec<(&Template, &Template)> {
    templates.iter().flat_map(|a| templates.iter().map(move |b| (a, b))).collect()
}
