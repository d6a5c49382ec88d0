// temporary calibration probe; not part of the deliverable surface
use mac_coord::examples1::example1_target;
use mac_coord::prob::DEFAULT_MEMORY_CAP;
use mac_coord::region::{
    evaluate, region_membership, AuxSizes, MembershipOutcome, RatePoint, SearchBudget, TheoremId,
};

fn main() {
    let q = example1_target();
    let inf = f64::INFINITY;
    let args: Vec<String> = std::env::args().collect();
    let u: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let restarts: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(64);
    let iters: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(700);
    let seed: u64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(21);

    let sizes = AuxSizes { u1: u, u2: u, u0: 1, t: 1 };
    let mut budget = SearchBudget::new(sizes, restarts, seed);
    budget.iters = iters;
    let point = RatePoint::without_r00(2.0, 1.0, inf, inf);
    let t0 = std::time::Instant::now();
    let out = region_membership(&q, &point, TheoremId::Thm3, &budget).unwrap();
    let dt = t0.elapsed();
    match out {
        MembershipOutcome::Certificate { dec, eval, restart } => {
            println!(
                "cert at restart {restart} in {dt:?}: corr {:.3e}, R1 {:.9}, R2 {:.9}",
                eval.correctness_error,
                eval.bound("R1").unwrap(),
                eval.bound("R2").unwrap()
            );
            let re = evaluate(TheoremId::Thm3, &q, &dec, DEFAULT_MEMORY_CAP).unwrap();
            println!("recheck corr {:.3e}", re.correctness_error);
        }
        MembershipOutcome::NotFound { best_violation, restarts_run } => {
            println!("not found after {restarts_run} restarts in {dt:?}; best violation {best_violation:.6}");
        }
    }
    println!("per-restart: {:?}", dt / restarts as u32);
}
