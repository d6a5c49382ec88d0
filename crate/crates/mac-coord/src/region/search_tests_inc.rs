use super::*;
use crate::examples1::example1_target;

fn copy_target() -> JointPmf {
    // X1, X2 independent-ish bits, Z correlated, Y = Z
    let mut probs = vec![0.0; 16];
    let mut total = 0.0;
    for x1 in 0..2 {
        for x2 in 0..2 {
            for z in 0..2 {
                let w = 1.0 + 0.4 * (x1 as f64) + 0.2 * (x2 as f64) + 0.6 * ((x1 ^ z) as f64);
                probs[((x1 * 2 + x2) * 2 + z) * 2 + z] = w;
                total += w;
            }
        }
    }
    probs.iter_mut().for_each(|p| *p /= total);
    JointPmf::new(
        vec![
            VariableDecl::new("X1", 2),
            VariableDecl::new("X2", 2),
            VariableDecl::new("Z", 2),
            VariableDecl::new("Y", 2),
        ],
        probs,
    )
    .unwrap()
}

#[test]
fn mix_seed_spreads() {
    let a = mix_seed(7, 0);
    let b = mix_seed(7, 1);
    let c = mix_seed(8, 0);
    assert_ne!(a, b);
    assert_ne!(a, c);
    assert_eq!(mix_seed(7, 1), b);
}

#[test]
fn weighted_lp_on_fixed_bounds() {
    use Rate::*;
    let bounds = vec![
        BoundEval { label: "R1".into(), rates: vec![R1], rhs: 1.0 },
        BoundEval { label: "R2".into(), rates: vec![R2], rhs: 1.0 },
        BoundEval { label: "R1+R2".into(), rates: vec![R1, R2], rhs: 3.0 },
        BoundEval { label: "R1+R01".into(), rates: vec![R1, R01], rhs: 2.5 },
    ];
    let order = vec![R1, R2, R01, R02];
    let (obj, point, duals) = weighted_lp(&bounds, &order, &[1.0, 1.0, 0.0, 0.0]);
    assert!((obj - 3.0).abs() < 1e-9, "obj = {obj}");
    assert!((point[0] + point[1] - 3.0).abs() < 1e-9);
    assert!(point[2].is_infinite() && point[3].is_infinite());
    // the sum constraint is the binding one
    assert!(duals[2] > 0.5);
}

#[test]
fn weighted_lp_single_rate() {
    use Rate::*;
    let bounds = vec![
        BoundEval { label: "R1".into(), rates: vec![R1], rhs: 0.7 },
        BoundEval { label: "R1+R2".into(), rates: vec![R1, R2], rhs: 5.0 },
    ];
    let order = vec![R1, R2, R01, R02];
    let (obj, point, _) = weighted_lp(&bounds, &order, &[1.0, 0.0, 0.0, 0.0]);
    // R2 is free, so only the first bound constrains R1
    assert!((obj - 0.7).abs() < 1e-9);
    assert!((point[0] - 0.7).abs() < 1e-9);
}

#[test]
fn membership_zero_point_for_copy_target() {
    let q = copy_target();
    let sizes = AuxSizes { u1: 2, u2: 2, u0: 1, t: 1 };
    let mut budget = SearchBudget::new(sizes, 8, 11);
    budget.iters = 300;
    let point = RatePoint::without_r00(0.0, 0.0, 0.0, 0.0);
    let out = region_membership(&q, &point, TheoremId::Thm1, &budget).unwrap();
    let (dec, eval) = out.certificate().expect("zero rates achievable when Y = Z");
    assert!(eval.correctness_error <= budget.correctness_tol);
    assert!(eval.satisfied_by(&point, budget.bound_tol));
    // certificate kernels compose correctly under the plain evaluator too
    let re = evaluate(TheoremId::Thm1, &q, dec, DEFAULT_MEMORY_CAP).unwrap();
    assert!(re.correctness_error <= budget.correctness_tol);
}

#[test]
fn membership_up_closedness() {
    let q = copy_target();
    let sizes = AuxSizes { u1: 2, u2: 2, u0: 1, t: 1 };
    let mut budget = SearchBudget::new(sizes, 8, 5);
    budget.iters = 300;
    let point = RatePoint::without_r00(0.0, 0.0, 0.0, 0.0);
    let out = region_membership(&q, &point, TheoremId::Thm1, &budget).unwrap();
    let (_, eval) = out.certificate().expect("certificate expected");
    // the same certificate covers any coordinate-wise larger point
    let bigger = RatePoint::without_r00(0.5, 1.0, 2.0, 0.1);
    assert!(eval.satisfied_by(&bigger, budget.bound_tol));
}

#[test]
fn membership_rejects_bad_budget() {
    let q = copy_target();
    let sizes = AuxSizes { u1: 2, u2: 2, u0: 1, t: 1 };
    let budget = SearchBudget::new(sizes, 0, 1);
    let point = RatePoint::without_r00(0.0, 0.0, 0.0, 0.0);
    assert!(matches!(
        region_membership(&q, &point, TheoremId::Thm1, &budget),
        Err(RegionError::InvalidBudget(_))
    ));
}

#[test]
fn trace_zero_for_copy_target() {
    let q = copy_target();
    let sizes = AuxSizes { u1: 2, u2: 2, u0: 1, t: 1 };
    let mut budget = SearchBudget::new(sizes, 8, 3);
    budget.iters = 300;
    let tp = trace_boundary(&q, TheoremId::Thm1, &[1.0, 0.0, 0.0, 0.0], &budget).unwrap();
    assert!(tp.objective < 1e-6, "objective = {}", tp.objective);
}

#[test]
fn trace_validates_weights() {
    let q = copy_target();
    let sizes = AuxSizes { u1: 2, u2: 2, u0: 1, t: 1 };
    let budget = SearchBudget::new(sizes, 2, 3);
    assert!(trace_boundary(&q, TheoremId::Thm1, &[0.0, 0.0, 0.0, 0.0], &budget).is_err());
    assert!(trace_boundary(&q, TheoremId::Thm1, &[1.0, -1.0, 0.0, 0.0], &budget).is_err());
    assert!(trace_boundary(&q, TheoremId::Thm1, &[1.0, 1.0], &budget).is_err());
}

#[test]
fn membership_selector_corner_small_budget() {
    // the (2,1) corner with unlimited per-pair randomness; small auxiliary
    // sizes keep this test quick
    let q = example1_target();
    let sizes = AuxSizes { u1: 5, u2: 5, u0: 1, t: 1 };
    let mut budget = SearchBudget::new(sizes, 192, 21);
    budget.iters = 700;
    let inf = f64::INFINITY;
    let point = RatePoint::without_r00(2.0, 1.0, inf, inf);
    let out = region_membership(&q, &point, TheoremId::Thm3, &budget).unwrap();
    match out {
        MembershipOutcome::Certificate { eval, .. } => {
            assert!(eval.correctness_error <= budget.correctness_tol);
            assert!(eval.bound("R2").unwrap() <= 1.0 + budget.bound_tol);
        }
        MembershipOutcome::NotFound { best_violation, restarts_run } => {
            panic!("no certificate in {restarts_run} restarts, best violation {best_violation}")
        }
    }
}
