mod brute;

use brute::{c, C};
use wickkin_core::cumulants::multisets;
use wickkin_core::hierarchy::*;
use wickkin_core::wick::wick_product_expectation_from;
use wickkin_core::*;

fn table_from(vars: &[Var], order: usize, f: impl Fn(&[Var]) -> f64) -> CumulantTable {
    let mut t = CumulantTable::new(Provenance::Analytic);
    for k in multisets(vars, order) {
        t.insert(k.vars(), c(f(k.vars())));
    }
    t
}

/// Linear dynamics `ẏ = A y + b`, written with `I = ∅` (drift) and `|I| = 1`.
fn linear_model(a: [[f64; 2]; 2], b: [f64; 2]) -> AmplitudeModel {
    let v = [Var(0), Var(1)];
    let mut m = AmplitudeModel::new(v.to_vec());
    for i in 0..2 {
        let mut drift = vec![(c(b[i]), vec![])];
        for j in 0..2 {
            m.add(v[i], &[v[j]], Amplitude::Constant(c(a[i][j]))).unwrap();
            drift.push((c(a[i][j]), vec![v[j]]));
        }
        m.add(v[i], &[], Amplitude::StateMoments(drift)).unwrap();
    }
    m
}

#[test]
fn linear_model_rhs_is_the_moment_equation() {
    let a = [[0.2, 1.0], [-1.0, -0.1]];
    let b = [0.5, -0.3];
    let m = linear_model(a, b);
    let vars = [Var(0), Var(1)];
    let t = table_from(&vars, 3, |k| match k.len() {
        1 => 0.3 + k[0].0 as f64,
        2 => if k[0] == k[1] { 1.0 + k[0].0 as f64 } else { 0.4 },
        _ => 0.1,
    });
    let st = HierarchyState::new(t.clone(), 3, 0.0);
    let mean = |i: usize| t.get(&[vars[i]]).unwrap();
    let cov = |i: usize, j: usize| t.get(&[vars[i], vars[j]]).unwrap();
    for i in 0..2 {
        let want = c(b[i]) + (0..2).map(|j| a[i][j] * mean(j)).sum::<C>();
        let got = hierarchy_rhs(&m, &st, &LabeledSeq::from_vars(&[vars[i]])).unwrap();
        assert!((got - want).norm() < 1e-12);
    }
    for (i, j) in [(0, 0), (0, 1), (1, 1)] {
        let want: C = (0..2).map(|k| a[i][k] * cov(k, j) + a[j][k] * cov(i, k)).sum();
        let got = hierarchy_rhs(&m, &st, &LabeledSeq::from_vars(&[vars[i], vars[j]])).unwrap();
        assert!((got - want).norm() < 1e-12, "{i}{j}");
    }
    // Third cumulants of a linear flow: ∂κ_{ijk} = Σ_l (A_il κ_ljk + …).
    let k3 = |x: usize, y: usize, z: usize| t.get(&[vars[x], vars[y], vars[z]]).unwrap();
    let want: C = (0..2).map(|l| a[0][l] * k3(l, 0, 1) + a[0][l] * k3(0, l, 1) + a[1][l] * k3(0, 0, l)).sum();
    let got = hierarchy_rhs(&m, &st, &LabeledSeq::from_vars(&[vars[0], vars[0], vars[1]])).unwrap();
    assert!((got - want).norm() < 1e-12);
}

#[test]
fn truncation_closure_zeroes_higher_cumulants() {
    let vars = [Var(0), Var(1)];
    let t = table_from(&vars, 4, |_| 0.5);
    let st = HierarchyState::new(t, 2, 0.0);
    assert_eq!(st.cumulant(&[Var(0), Var(0), Var(1)]).unwrap(), c(0.0));
    assert_eq!(st.cumulant(&[Var(0), Var(1)]).unwrap(), c(0.5));
    let m = linear_model([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0]);
    assert!(matches!(
        hierarchy_rhs(&m, &st, &LabeledSeq::from_ids(&[0, 0, 1])),
        Err(Error::OrderExceeded { .. })
    ));
    assert!(matches!(hierarchy_rhs(&m, &st, &LabeledSeq::empty()), Err(Error::EmptySequence)));
}

#[test]
fn evolve_matches_the_exact_linear_flow() {
    // ẋ = y, ẏ = −x from mean (1, 0), covariance diag(1, 2).
    let m = linear_model([[0.0, 1.0], [-1.0, 0.0]], [0.0, 0.0]);
    let vars = [Var(0), Var(1)];
    let t = table_from(&vars, 2, |k| match k {
        [x] if x.0 == 0 => 1.0,
        [_] => 0.0,
        [x, y] if x == y => 1.0 + x.0 as f64,
        _ => 0.0,
    });
    let st = HierarchyState::new(t, 2, 0.0);
    let tt: f64 = 1.3;
    let out = evolve(&m, &st, 1e-3, 1300).unwrap();
    let (co, si) = (tt.cos(), tt.sin());
    assert!((out.cumulant(&[Var(0)]).unwrap() - c(co)).norm() < 1e-10);
    assert!((out.cumulant(&[Var(1)]).unwrap() - c(-si)).norm() < 1e-10);
    let cxx = co * co + 2.0 * si * si;
    let cxy = -co * si + 2.0 * si * co;
    let cyy = si * si + 2.0 * co * co;
    assert!((out.cumulant(&[Var(0), Var(0)]).unwrap() - c(cxx)).norm() < 1e-10);
    assert!((out.cumulant(&[Var(0), Var(1)]).unwrap() - c(cxy)).norm() < 1e-10);
    assert!((out.cumulant(&[Var(1), Var(1)]).unwrap() - c(cyy)).norm() < 1e-10);
    assert!((out.t - tt).abs() < 1e-12);
}

#[test]
fn phase_and_table_amplitudes() {
    let st = HierarchyState::new(CumulantTable::new(Provenance::Analytic), 1, 0.0);
    let p = Amplitude::Phase { coeff: c(2.0), omega: 0.5 };
    let v = p.eval(1.0, &st).unwrap();
    assert!((v - c(2.0) * num_complex::Complex64::new(0.0, 0.5).exp()).norm() < 1e-15);
    let tab = Amplitude::Table(vec![(0.0, c(0.0)), (2.0, c(4.0))]);
    assert_eq!(tab.eval(0.5, &st).unwrap(), c(1.0));
    assert_eq!(tab.eval(5.0, &st).unwrap(), c(4.0));
    assert!(!tab.is_state_dependent());
}

#[test]
fn duhamel_first_order_matches_a_short_evolution() {
    let vars = [Var(0), Var(1)];
    let mut m = AmplitudeModel::new(vars.to_vec());
    m.add(Var(0), &[Var(1)], Amplitude::Phase { coeff: c(1.0), omega: 2.0 }).unwrap();
    m.add(Var(1), &[Var(0), Var(0)], Amplitude::Constant(c(-0.4))).unwrap();
    let t = table_from(&vars, 3, |k| 0.2 + 0.1 * k.len() as f64);
    let st = HierarchyState::new(t, 3, 0.0);
    let target = LabeledSeq::from_ids(&[0, 1]);
    for h in [1e-2, 5e-3] {
        let d = duhamel_expand(&m, &st, &target, h, 1e-12).unwrap();
        let ev = evolve(&m, &st, h / 50.0, 50).unwrap();
        let exact = ev.cumulant(&[Var(0), Var(1)]).unwrap();
        // First-order truncation error is O(h²).
        assert!((d.zeroth + d.first - exact).norm() < 5.0 * h * h);
        assert_eq!(d.remainder.len(), 2);
    }
}

#[test]
fn leibniz_terms_reproduce_the_time_derivative_of_wick_polynomials() {
    // y(t) = y₀ + t v with y₀, v independent: ∂_t⟨⟨y^I⟩⟩ = Σ_i ⟨⟨v y^{I∖i}⟩⟩.
    let g = GaussianOracle::new(
        vec![c(0.4), c(-0.2)],
        vec![vec![c(1.0), c(0.0)], vec![c(0.0), c(0.5)]],
        8,
    )
    .unwrap();
    // Var(0)=y₀, Var(1)=v, Var(2)=y₀+t v.
    let seq = LabeledSeq::from_ids(&[2, 2, 2]);
    let terms = leibniz_wick_derivative(&seq).unwrap();
    assert_eq!(terms.len(), 3);
    let expected_at = |t: f64| -> Polynomial {
        let sub = Substitution { target: Var(2), alpha: c(1.0), first: Var(0), beta: c(t), second: Var(1) };
        let ext = wickkin_core::cumulants::SubstitutedOracle::new(&g, sub);
        wick_recursive(&ext, &seq).unwrap().to_polynomial().substitute(&sub)
    };
    let h = 1e-4;
    let mut fd = expected_at(h);
    fd.add_scaled(&expected_at(-h), c(-1.0));
    let fd = fd.scaled(c(0.5 / h));
    let sub0 = Substitution { target: Var(2), alpha: c(1.0), first: Var(0), beta: c(0.0), second: Var(1) };
    let ext0 = wickkin_core::cumulants::SubstitutedOracle::new(&g, sub0);
    let mut sum = Polynomial::zero();
    for t in &terms {
        let s = t.with_derivative(&seq, Var(1));
        sum.add_scaled(&wick_recursive(&ext0, &s).unwrap().to_polynomial().substitute(&sub0), c(1.0));
    }
    assert!(fd.max_abs_diff(&sum) < 1e-6, "{}", fd.max_abs_diff(&sum));
}

#[test]
fn harmonic_particle_force_is_linear() {
    let lam = 0.7;
    let m = particle_model(2, 2, &[vec![0.0, lam], vec![lam, 0.0]]).unwrap();
    let vars = m.vars().to_vec();
    let t = table_from(&vars, 3, |k| 0.1 * (k.iter().map(|v| v.0 as f64 + 1.0).product::<f64>()).sin());
    let st = HierarchyState::new(t.clone(), 3, 0.0);
    let (q0, q1, p0) = (position_var(0), position_var(1), momentum_var(0));
    let got = hierarchy_rhs(&m, &st, &LabeledSeq::from_vars(&[p0])).unwrap();
    let want = c(-lam) * (t.get(&[q0]).unwrap() - t.get(&[q1]).unwrap());
    assert!((got - want).norm() < 1e-12);
    let got = hierarchy_rhs(&m, &st, &LabeledSeq::from_vars(&[q0, p0])).unwrap();
    let want = t.get(&[p0, p0]).unwrap() - c(lam) * (t.get(&[q0, q0]).unwrap() - t.get(&[q0, q1]).unwrap());
    assert!((got - want).norm() < 1e-12);
}

#[test]
fn quartic_particle_amplitudes_resum_to_the_cubic_force() {
    // Σ_I M^I ⟨⟨y^I⟩⟩ = −λ(q₀ − q₁)³ as polynomials, for any state.
    let lam = 0.35;
    let m = particle_model(2, 4, &[vec![0.0, lam], vec![lam, 0.0]]).unwrap();
    let vars = m.vars().to_vec();
    let t = table_from(&vars, 4, |k| 0.3 * ((k.len() * 7 + k.iter().map(|v| v.0 as usize).sum::<usize>()) as f64).cos());
    let st = HierarchyState::new(t, 4, 0.0);
    let p0 = momentum_var(0);
    let (q0, q1) = (position_var(0), position_var(1));
    let mut total = Polynomial::zero();
    for inter in m.interactions(p0) {
        let amp = inter.amplitude.eval(0.0, &st).unwrap();
        let w = wick_from_cumulants(&st, &inter.seq).unwrap().to_polynomial();
        total.add_scaled(&w, amp);
    }
    let mut want = Polynomial::zero();
    for (k, b) in [(3usize, 1.0), (2, -3.0), (1, 3.0), (0, -1.0)] {
        let mut mono = vec![q0; k];
        mono.extend(std::iter::repeat_n(q1, 3 - k));
        want.add_scaled(&Polynomial::monomial(&mono, c(1.0)), c(-lam * b));
    }
    assert!(total.max_abs_diff(&want) < 1e-12, "{}", total.max_abs_diff(&want));
    assert!(m.interactions(p0).len() >= 10);
}

#[test]
fn pair_expectation_is_the_two_block_product_formula() {
    let o = brute::RandomMoments::new(4, 2, 6, false);
    let src = OracleCumulants::new(&o);
    let a = LabeledSeq::from_ids(&[0, 1]);
    let b = LabeledSeq::from_ids(&[1, 1]);
    let x = pair_expectation(&src, &a, &b).unwrap();
    let y = wick_product_expectation_from(&src, &[a, b], &LabeledSeq::empty()).unwrap();
    assert!((x - y).norm() < 1e-14);
}

#[test]
fn model_rejects_unknown_variables() {
    let mut m = AmplitudeModel::new(vec![Var(0)]);
    assert!(m.add(Var(1), &[], Amplitude::Constant(c(1.0))).is_err());
    assert!(m.add(Var(0), &[Var(3)], Amplitude::Constant(c(1.0))).is_err());
    assert!(particle_model(2, 3, &[vec![0.0, 1.0], vec![1.0, 0.0]]).is_err());
}
