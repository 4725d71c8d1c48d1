//! Linear-algebra and low-degree-criterion properties: eigenvalues against
//! independent characteristic-polynomial checks, the sandwich inequality, the
//! Rayleigh-quotient characterization of the advantage, and condition checkers.

use ldgram_core::analysis::{
    advantage, check_condition, correlation, quadratic_form, solve_spd, spectrum, symmetric_eigenvalues, Condition,
    ConditionConstants,
};
use ldgram_core::basis::gram_matrix;
use ldgram_core::models::{AlterationSpec, Family, ModelSpec, MomentOracle, Sampling};
use ldgram_core::rational::{dd_div, format_rational, q_frac, q_int};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twofloat::TwoFloat;

fn tf(x: f64) -> TwoFloat {
    TwoFloat::from(x)
}

fn dense_model() -> MomentOracle {
    // Small n and sizeable signal: a Gram matrix visibly away from the identity.
    let model = ModelSpec::new(Family::Hs, Sampling::Permutation, 12, 3, q_frac(1, 2), q_frac(1, 5)).unwrap();
    MomentOracle::new(model).with_alteration(Some(AlterationSpec::new(q_frac(1, 2)).unwrap()))
}

fn random_vectors(dim: usize, count: usize, seed: u64) -> Vec<Vec<TwoFloat>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..dim).map(|_| tf(rng.random_range(-1.0..1.0))).collect()).collect()
}

fn det_by_elimination(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut m = a.to_vec();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        if m[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        det *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    det
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Each computed eigenvalue makes `A - μI` singular, and they sum to the trace.
    #[test]
    fn eigenvalues_are_roots_of_the_characteristic_polynomial(
        entries in proptest::collection::vec(-1.0f64..1.0, 10)
    ) {
        let n = 4;
        let mut a = vec![vec![0.0; n]; n];
        let mut it = entries.iter();
        for i in 0..n {
            for j in i..n {
                let v = *it.next().unwrap();
                a[i][j] = v;
                a[j][i] = v;
            }
        }
        let tfa: Vec<Vec<TwoFloat>> = a.iter().map(|r| r.iter().map(|&x| tf(x)).collect()).collect();
        let eig = symmetric_eigenvalues(&tfa).unwrap();
        let trace: f64 = (0..n).map(|i| a[i][i]).sum();
        let sum: f64 = eig.iter().map(|&e| f64::from(e)).sum();
        prop_assert!((trace - sum).abs() < 1e-12);
        for &mu in &eig {
            let shifted: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..n).map(|j| a[i][j] - if i == j { f64::from(mu) } else { 0.0 }).collect())
                .collect();
            prop_assert!(det_by_elimination(&shifted).abs() < 1e-10);
        }
        let s = spectrum(&tfa).unwrap();
        prop_assert!(s.l1_row_bound + 1e-15 >= s.op_norm_deviation);
    }
}

#[test]
fn sandwich_property_on_a_nontrivial_gram() {
    let o = dense_model();
    for rooted in [false, true] {
        let g = gram_matrix(&o, 2, rooted).unwrap();
        let f = g.float_matrix();
        let s = spectrum(&f).unwrap();
        assert!(s.op_norm_deviation > 1e-3, "the test matrix should not be the identity");
        assert!(s.l1_row_bound >= s.op_norm_deviation);
        for alpha in random_vectors(g.size(), 200, 7) {
            let norm2 = alpha.iter().fold(tf(0.0), |acc, &x| acc + x * x);
            let q = quadratic_form(&f, &alpha);
            assert!(q >= norm2 * (1.0 - s.op_norm_deviation) * (1.0 - 1e-12));
            assert!(q <= norm2 * (1.0 + s.op_norm_deviation) * (1.0 + 1e-12));
        }
    }
}

#[test]
fn advantage_is_the_maximal_rayleigh_quotient() {
    let o = dense_model();
    let report = advantage(&o, 2).unwrap();
    let g = gram_matrix(&o, 2, false).unwrap();
    let f = g.float_matrix();
    let m: Vec<TwoFloat> = report.moment_vector.iter().map(|&x| tf(x)).collect();
    let adv2 = report.adv_exact.unwrap().powi(2);
    let quotient = |alpha: &[TwoFloat]| -> f64 {
        let num = alpha.iter().zip(&m).fold(tf(0.0), |acc, (&a, &b)| acc + a * b);
        f64::from(dd_div(num * num, quadratic_form(&f, alpha)))
    };
    // α* attains the maximum.
    let star: Vec<TwoFloat> = report.optimal_coefficients.iter().map(|&x| tf(x)).collect();
    assert!((quotient(&star) - adv2).abs() <= 1e-9 * adv2);
    // Hill-climbing from random starts never beats it.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for mut alpha in random_vectors(g.size(), 20, 3) {
        let mut best = quotient(&alpha);
        let mut step = 0.5;
        for _ in 0..400 {
            let i = rng.random_range(0..alpha.len());
            let delta = tf(rng.random_range(-step..step));
            alpha[i] += delta;
            let v = quotient(&alpha);
            if v > best {
                best = v;
            } else {
                alpha[i] -= delta;
                step *= 0.995;
            }
        }
        assert!(best <= adv2 + 1e-9, "{best} > {adv2}");
    }
    assert!(report.adv_exact.unwrap() <= report.adv_orthonormal_bound.unwrap());
    assert!(report.exact_moments);
}

#[test]
fn solve_reproduces_right_hand_side() {
    let g = gram_matrix(&dense_model(), 2, true).unwrap();
    let f = g.float_matrix();
    let b: Vec<TwoFloat> = (0..g.size()).map(|i| tf(1.0 + i as f64)).collect();
    let x = solve_spd(&f, &b).unwrap();
    for i in 0..g.size() {
        let r = (0..g.size()).fold(tf(0.0), |acc, j| acc + f[i][j] * x[j]) - b[i];
        assert!(r.abs() < 1e-28, "{r:?}");
    }
}

#[test]
fn null_advantage_is_one_for_independent_models() {
    for family in [Family::Hs, Family::Sbm, Family::Ts] {
        let k = if family == Family::Ts { 4 } else { 3 };
        let model = ModelSpec::new(family, Sampling::Independent, 12, k, q_frac(1, 2), q_frac(1, 10)).unwrap();
        let r = advantage(&MomentOracle::new(model), 2).unwrap();
        assert!((r.adv_exact.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(r.epsilon.as_deref(), Some("0"));
    }
    // At λ = 0 the Gram matrix is the identity and every moment vanishes.
    let model = ModelSpec::new(Family::Hs, Sampling::Permutation, 12, 3, q_frac(1, 2), q_int(0)).unwrap();
    let r = advantage(&MomentOracle::new(model), 2).unwrap();
    assert_eq!(r.op_norm_deviation, 0.0);
    assert_eq!(r.adv_exact, Some(1.0));
}

#[test]
fn correlation_anchor_and_monotonicity() {
    let model = ModelSpec::new(Family::Hs, Sampling::Independent, 40, 4, q_frac(1, 2), q_frac(1, 8)).unwrap();
    let o = MomentOracle::new(model.clone());
    let r0 = correlation(&o, 0).unwrap();
    let ex = (model.k * model.k) as i64;
    let n2 = (model.n * model.n) as i64;
    assert_eq!(r0.corr_exact_rational.as_deref(), Some(format_rational(&q_frac(ex, n2)).as_str()));
    let mut last = r0.corr_exact.unwrap();
    for d in 1..=2 {
        let r = correlation(&o, d).unwrap();
        let c = r.corr_exact.unwrap();
        assert!(c + 1e-15 >= last, "D={d}: {c} < {last}");
        last = c;
    }
}

#[test]
fn condition_checkers_reproduce_known_constants() {
    let hs = ModelSpec::new(Family::Hs, Sampling::Independent, 12, 3, q_frac(1, 2), q_frac(1, 5)).unwrap();
    let o = MomentOracle::new(hs.clone());
    let consts = ConditionConstants::defaults_for(&hs);
    assert_eq!(consts.c_m, q_int(0));
    let moment = check_condition(&o, 3, Condition::Moment, &consts).unwrap();
    assert!(moment.holds, "{moment:?}");
    let variance = check_condition(&o, 2, Condition::Variance, &consts).unwrap();
    assert_eq!(variance.variance_part2_max_deviation.as_deref(), Some("0"));
    // Break the signal condition with a large λ.
    let strong = ModelSpec::new(Family::Hs, Sampling::Independent, 12, 3, q_frac(1, 2), q_frac(1, 2)).unwrap();
    let signal = check_condition(&MomentOracle::new(strong.clone()), 2, Condition::Signal, &consts).unwrap();
    assert!(!signal.holds && signal.worst_ratio > 1.0);
    assert!("variance_permutation".parse::<Condition>().is_ok());
    assert!("bogus".parse::<Condition>().is_err());
}

#[test]
fn permutation_dependence_condition_runs_and_counts_skips() {
    let model = ModelSpec::new(Family::Hs, Sampling::Permutation, 12, 3, q_frac(1, 2), q_frac(1, 20)).unwrap();
    let o = MomentOracle::new(model.clone());
    let consts = ConditionConstants::defaults_for(&model);
    let r = check_condition(&o, 2, Condition::VariancePermutation, &consts).unwrap();
    assert!(r.cases_checked > 0);
    assert!(r.worst_ratio.is_finite());
}
