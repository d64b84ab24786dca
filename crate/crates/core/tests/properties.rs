use kdvctl_core::spectral::{evolve_program, ControlProfileSet, ControlProgram, SpectralState, StepControl};
use kdvctl_core::synthesis::{phase_program, PhaseOptions, PhaseTarget, TauRule};
use kdvctl_core::trig::{lie_bracket, ExactPoly, FloatPoly, Rational, VectorField};
use kdvctl_core::Complex64;
use proptest::prelude::*;

fn rational() -> impl Strategy<Value = Rational> {
    (-6i64..=6, 1i64..=5).prop_map(|(n, d)| Rational::new(n.into(), d.into()))
}

fn exact_poly(max_deg: usize) -> impl Strategy<Value = ExactPoly> {
    (rational(), prop::collection::vec(rational(), 0..=max_deg), prop::collection::vec(rational(), 0..=max_deg))
        .prop_map(|(a0, c, s)| ExactPoly::new(a0, c, s))
}

fn float_poly(max_deg: usize) -> impl Strategy<Value = FloatPoly> {
    (
        -1.0..1.0f64,
        prop::collection::vec(-1.0..1.0f64, 0..=max_deg),
        prop::collection::vec(-1.0..1.0f64, 0..=max_deg),
    )
        .prop_map(|(a0, c, s)| FloatPoly::new(a0, c, s))
}

/// Unit state on truncation `k` supported in `|mode| ≤ band`.
fn state(k: usize, band: usize) -> impl Strategy<Value = SpectralState> {
    (prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 2 * band + 1), -3.0..3.0f64).prop_map(move |(c, alpha)| {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * k + 1];
        for (j, (re, im)) in c.into_iter().enumerate() {
            coeffs[k - band + j] = Complex64::new(re, im) + 0.05;
        }
        SpectralState::new(k, alpha, coeffs).unwrap().normalized()
    })
}

fn vf(p: ExactPoly) -> VectorField<Rational> {
    VectorField::new(p)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn bracket_is_antisymmetric_and_satisfies_jacobi(a in exact_poly(3), b in exact_poly(3), c in exact_poly(3)) {
        let (x, y, z) = (vf(a), vf(b), vf(c));
        let xy = lie_bracket(&x, &y);
        let yx = lie_bracket(&y, &x);
        prop_assert_eq!(&xy.coeff + &yx.coeff, ExactPoly::zero());
        let jac = &(&lie_bracket(&x, &lie_bracket(&y, &z)).coeff + &lie_bracket(&y, &lie_bracket(&z, &x)).coeff)
            + &lie_bracket(&z, &xy).coeff;
        prop_assert!(jac.is_zero());
    }

    #[test]
    fn product_rule_holds_exactly(a in exact_poly(4), b in exact_poly(4)) {
        let lhs = (&a * &b).derivative();
        let rhs = &(&a.derivative() * &b) + &(&a * &b.derivative());
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn float_product_matches_pointwise(a in float_poly(5), b in float_poly(5), x in 0.0..6.3f64) {
        let p = &a * &b;
        prop_assert!((p.eval(x) - a.eval(x) * b.eval(x)).abs() < 1e-12);
    }

    #[test]
    fn free_flow_is_a_unitary_group(s in state(12, 12), t1 in -2.0..2.0f64, t2 in -2.0..2.0f64) {
        let a = s.free_flow(t1).free_flow(t2);
        let b = s.free_flow(t1 + t2);
        prop_assert!(a.distance(&b) < 1e-12);
        prop_assert!((a.norm() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn translations_compose(s in state(12, 12), d1 in -4.0..4.0f64, d2 in -4.0..4.0f64) {
        let a = s.translate(d1).translate(d2);
        prop_assert!(a.distance(&s.translate(d1 + d2)) < 1e-12);
        prop_assert!((a.norm() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn phase_multiplication_preserves_norm_and_inverts(s in state(40, 4), theta in float_poly(2)) {
        let (a, tail) = s.phase_multiply(&theta).unwrap();
        prop_assert!(tail < 1e-10);
        prop_assert!((a.norm() - 1.0).abs() < 1e-10);
        let (back, _) = a.phase_multiply(&theta.scale(&-1.0)).unwrap();
        prop_assert!(back.resized(s.k_max()).0.distance(&s) < 1e-9);
    }

    #[test]
    fn controlled_evolution_conserves_norm(
        s in state(48, 4),
        segs in prop::collection::vec((1e-4..1e-2f64, prop::collection::vec(-5.0..5.0f64, 5)), 1..5),
    ) {
        let q = ControlProfileSet::standard();
        let mut p = ControlProgram::new(q.len());
        for (i, (tau, u)) in segs.into_iter().enumerate() {
            p.push(tau, u, format!("s{i}"));
        }
        let (out, trace) = evolve_program(&s, &p, &q, &StepControl::default()).unwrap();
        prop_assert!((out.norm() - s.norm()).abs() < 1e-10);
        prop_assert_eq!(trace.len(), p.len());
    }
}

#[test]
fn phase_error_does_not_grow_as_times_shrink() {
    let q = ControlProfileSet::standard();
    let psi0 = SpectralState::unit_mode_one(32, 0.5);
    let theta = FloatPoly::new(0.0, vec![0.0, 0.0, 0.3], vec![]);
    let target = PhaseTarget::new(theta, 1.0, 1.0).unwrap();
    let tau0 = 1e-4;
    let err = |j: i32| {
        let opts = PhaseOptions { rule: TauRule::ladder(tau0 * 2f64.powi(-j)), ..PhaseOptions::default() };
        phase_program(&target, &psi0, &q, &StepControl::default(), opts, 1).unwrap().achieved_error
    };
    let base = err(0);
    for j in 1..=6 {
        let e = err(j);
        assert!(e <= 2.0 * base, "τ·2^-{j}: error {e:.3e} vs base {base:.3e}");
    }
}
