use halfrange_core::discretize::{assemble_operators, build_grid, random_jpositive_instance, DiscreteModel, GridSpec};
use halfrange_core::duhamel::{solve_nonhomogeneous, ForcingFunction, TailModel};
use halfrange_core::halfrange::{build_g, build_r, solve, BoundaryData, Slab, SolveOptions};
use halfrange_core::kinetic::{build_spaces, pairing_defect, reduce, TModel};
use halfrange_core::krein::decompose;
use halfrange_core::oracle::direct_block_solve;
use halfrange_core::problem::{admissibility, check_kos_conditions, AdmissibilityOptions, CoefficientSet, RProfile};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn vector(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, n)
}

/// A random J-positive model together with two random vectors of its size.
fn model_and_vectors() -> impl Strategy<Value = (DiscreteModel, Vec<f64>, Vec<f64>)> {
    (2usize..24, any::<u64>())
        .prop_flat_map(|(n, seed)| (Just(random_jpositive_instance(n, seed, 0.1)), vector(n), vector(n)))
}

fn restrict(m: &DiscreteModel, v: &[f64], sign: f64) -> DVector<f64> {
    DVector::from_fn(m.dim(), |i, _| if m.signature()[i] == sign { v[i] } else { 0.0 })
}

fn tau() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.1), Just(1.0), Just(10.0)]
}

fn no_neumann() -> SolveOptions {
    SolveOptions {
        neumann_check: false,
        ..SolveOptions::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn signature_and_projections_are_exact((m, x, _) in model_and_vectors()) {
        let x = DVector::from_vec(x);
        prop_assert!(m.signature().iter().all(|s| s * s == 1.0));
        prop_assert_eq!(m.project_plus(&x) + m.project_minus(&x), x);
    }

    #[test]
    fn j_positivity_of_random_models((m, h, _) in model_and_vectors()) {
        let h = DVector::from_vec(h);
        prop_assume!(h.norm() > 1e-6);
        let lh = m.operator() * &h;
        prop_assert!(m.inner(&lh, &h) > 0.0);
        prop_assert!(m.krein(&m.apply_b(&h), &h) > 0.0);
        let k = decompose(&m).unwrap();
        let bh = m.apply_b(&h);
        prop_assert!(k.model().krein(&bh, &h) > 0.0);
    }

    #[test]
    fn j_positivity_of_assembled_models(alpha in -0.5..2.0f64, n in 8usize..64, k in 0.0..1.0f64, h in vector(64)) {
        let c = CoefficientSet::signum_power(alpha, k, 1.0);
        let spec = GridSpec { turning_points: vec![0.0], symmetric: true, ..GridSpec::uniform(1.0, n) };
        let g = build_grid(&spec).unwrap();
        let m = assemble_operators(&c, &g).unwrap();
        let h = DVector::from_column_slice(&h[..g.len()]);
        prop_assume!(h.norm() > 1e-6);
        prop_assert!(m.inner(&(m.operator() * &h), &h) > 0.0);
        prop_assert!(m.symmetry_defect() < 1e-12);
    }

    #[test]
    fn decomposition_invariants((m, _, _) in model_and_vectors()) {
        let k = decompose(&m).unwrap();
        let n = m.dim();
        prop_assert!(k.eigen_residual() < 1e-10);
        prop_assert!(k.orthonormality_defect() < 1e-10);
        prop_assert!((k.p_plus() + k.p_minus() - DMatrix::identity(n, n)).amax() < 1e-10);
        let vp = k.vectors_plus();
        prop_assert!((k.p_plus() * &vp - &vp).amax() < 1e-10 * vp.amax());
        prop_assert!(k.beta_proj() < 1.0);
        let g = k.gamma();
        prop_assert!(g > 0.0 && g <= 1.0);
        let (cp, cm) = k.restriction_conditions();
        prop_assert!(cp.is_finite() && cm.is_finite());
    }

    #[test]
    fn contraction_bound((m, _, _) in model_and_vectors(), tau in tau()) {
        let k = decompose(&m).unwrap();
        let r = build_r(&k).unwrap();
        let g = build_g(&k, &r, tau).unwrap();
        let bound = k.beta_proj() * (-tau * k.min_abs_eigenvalue()).exp() + 1e-10;
        prop_assert!(g.norm_plus < 1.0 && g.norm_minus < 1.0);
        prop_assert!(g.norm_plus <= bound && g.norm_minus <= bound);
    }

    #[test]
    fn semigroup_is_contractive((m, h, _) in model_and_vectors()) {
        let k = decompose(&m).unwrap();
        let c = k.coords_plus(&DVector::from_vec(h));
        let lp = k.eigenvalues_plus();
        let mut prev = f64::INFINITY;
        for x in [0.0, 0.5, 1.0, 2.0] {
            let modes = DVector::from_fn(c.len(), |i, _| (-x * lp[i]).exp() * c[i]);
            let v = k.vectors_plus() * modes;
            let norm = k.intrinsic_norm(&v);
            prop_assert!(norm <= prev * (1.0 + 1e-12) + 1e-300);
            prev = norm;
        }
    }

    #[test]
    fn solution_map_is_linear((m, a, b) in model_and_vectors(), tau in tau(), s in -3.0..3.0f64) {
        let k = decompose(&m).unwrap();
        let bd1 = BoundaryData::finite(&m, restrict(&m, &a, 1.0), restrict(&m, &b, -1.0), tau).unwrap();
        let bd2 = BoundaryData::finite(&m, restrict(&m, &b, 1.0), restrict(&m, &a, -1.0), tau).unwrap();
        let bd3 = BoundaryData::finite(
            &m,
            bd1.phi_plus() * s + bd2.phi_plus(),
            bd1.phi_minus().unwrap() * s + bd2.phi_minus().unwrap(),
            tau,
        ).unwrap();
        let s1 = solve(&k, &bd1, &no_neumann()).unwrap();
        let s2 = solve(&k, &bd2, &no_neumann()).unwrap();
        let s3 = solve(&k, &bd3, &no_neumann()).unwrap();
        for j in 0..=10 {
            let x = tau * j as f64 / 10.0;
            let want = s1.evaluate(x).unwrap() * s + s2.evaluate(x).unwrap();
            let got = s3.evaluate(x).unwrap();
            let scale = (s1.evaluate(x).unwrap() * s).amax() + s2.evaluate(x).unwrap().amax();
            prop_assert!((got - want).amax() <= 1e-10 * scale.max(1e-300));
        }
    }

    #[test]
    fn stability_constant_is_scale_free((m, a, b) in model_and_vectors(), tau in tau(), scale in 1e-3..1e3f64) {
        let k = decompose(&m).unwrap();
        let ratio = |f: f64| {
            let bd = BoundaryData::finite(&m, restrict(&m, &a, 1.0) * f, restrict(&m, &b, -1.0) * f, tau).unwrap();
            let s = solve(&k, &bd, &no_neumann()).unwrap();
            let data = m.norm(bd.phi_plus()) + m.norm(bd.phi_minus().unwrap());
            (0..20)
                .map(|j| m.norm(&s.evaluate(tau * j as f64 / 19.0).unwrap()))
                .fold(0.0, f64::max)
                / data
        };
        let (r1, r2) = (ratio(1.0), ratio(scale));
        prop_assert!(r1.is_finite());
        prop_assert!((r1 - r2).abs() <= 1e-10 * r1);
    }

    #[test]
    fn direct_and_neumann_paths_agree((m, a, b) in model_and_vectors(), tau in tau()) {
        let k = decompose(&m).unwrap();
        let bd = BoundaryData::finite(&m, restrict(&m, &a, 1.0), restrict(&m, &b, -1.0), tau).unwrap();
        let opts = SolveOptions { neumann_check: true, ..SolveOptions::default() };
        let s = solve(&k, &bd, &opts).unwrap();
        prop_assert!(s.diagnostics.neumann_discrepancy.unwrap() <= 1e-8);
        let (ap, am) = direct_block_solve(&k, &bd).unwrap();
        let scale = s.coeff_plus().amax().max(s.coeff_minus().amax());
        prop_assert!((ap - s.coeff_plus()).amax() <= 1e-9 * scale);
        prop_assert!((am - s.coeff_minus()).amax() <= 1e-9 * scale);
    }

    #[test]
    fn forced_residual_is_small((m, a, b) in model_and_vectors(), freq in 0.5..4.0f64) {
        let k = decompose(&m).unwrap();
        let tau = 1.0;
        let xs: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
        let (va, vb) = (DVector::from_vec(a), DVector::from_vec(b));
        let f = ForcingFunction::sampled(xs, |x| &va * (freq * x).sin() + &vb, TailModel::Hold).unwrap();
        let bd = BoundaryData::finite(&m, m.project_plus(&va), m.project_minus(&vb), tau).unwrap();
        let s = solve_nonhomogeneous(&k, &bd, &f, &no_neumann()).unwrap();
        for j in 1..=10 {
            let x = j as f64 / 11.0;
            prop_assert!(s.relative_residual(x).unwrap() <= 1e-6);
        }
    }

    #[test]
    fn kinetic_identities(n in 2usize..16, seed in any::<u64>(), h in vector(16)) {
        let m = random_jpositive_instance(n, seed, 0.5);
        let t: Vec<f64> = (0..n).map(|i| m.signature()[i] * (0.5 + (i as f64 * 0.37).fract() * 2.0)).collect();
        let tm = TModel::new(t.clone(), m.operator().clone()).unwrap();
        let reduced = reduce(&tm).unwrap();
        prop_assert!(pairing_defect(&tm, &reduced, 100, seed) <= 1e-12);
        let sp = build_spaces(&tm).unwrap();
        let h = DVector::from_column_slice(&h[..n]);
        let root = h.component_mul(&sp.t_abs.map(f64::sqrt));
        prop_assert!((sp.norm_t(&h) - root.norm()).abs() <= 1e-14 * root.norm().max(1e-300));
        for q in [&sp.q_plus, &sp.q_minus] {
            let a = h.component_mul(&sp.t_abs).component_mul(q);
            let b = h.component_mul(q).component_mul(&sp.t_abs);
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn kos_check_is_scale_invariant(s in 0.01..100.0f64, alpha in 0.0..2.0f64) {
        let r = RProfile::Gaussian { c: 2.0, amplitude: 1.0, width: 1.0 };
        let c = CoefficientSet::power_with_r(alpha, alpha, r, 0.0, 4.0);
        let opts = AdmissibilityOptions::default();
        let a = check_kos_conditions(&c, &opts).unwrap();
        let b = check_kos_conditions(&c.scaled(s), &opts).unwrap();
        prop_assert_eq!(a.pass, b.pass);
    }
}

#[test]
fn admissibility_report_is_deterministic() {
    let c = CoefficientSet::signum_power(0.5, 0.0, 2.0);
    let g = build_grid(&GridSpec::uniform(2.0, 64)).unwrap();
    let opts = AdmissibilityOptions::default();
    let a = admissibility(&c, &g, &opts);
    let b = admissibility(&c, &g, &opts);
    assert_eq!(a, b);
}

#[test]
fn halfspace_slab_has_no_right_data() {
    let m = random_jpositive_instance(5, 1, 0.3);
    let bd = BoundaryData::halfspace(&m, restrict(&m, &[1.0; 5], 1.0)).unwrap();
    assert_eq!(bd.slab(), Slab::HalfSpace);
    assert!(bd.phi_minus().is_none());
}
