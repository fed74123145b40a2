//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line with the
//! measured quantity, its tolerance and the runtime against its budget.

use std::io::Write;
use std::time::{Duration, Instant};

use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use nilpotent_lcs::algebra::LieAlgebra;
use nilpotent_lcs::dynamics::*;
use nilpotent_lcs::heisenberg::*;
use nilpotent_lcs::reach::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn report(id: u32, name: &str, ok: bool, detail: &str, start: Instant, budget: Duration) {
    let took = start.elapsed();
    let pass = ok && took <= budget;
    let line = format!(
        "{} criterion {id} ({name}): {detail}; runtime {:.2}s (budget {}s)",
        if pass { "PASS" } else { "FAIL" },
        took.as_secs_f64(),
        budget.as_secs()
    );
    writeln!(std::io::stderr().lock(), "{line}").unwrap();
    assert!(pass, "{line}");
}

fn range(lo: f64, hi: f64) -> ControlRange {
    ControlRange::interval(lo, hi).unwrap()
}

fn random_point(rng: &mut ChaCha8Rng, n: usize, r: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-r..r))
}

fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax() / a.amax().max(1.0)
}

#[test]
fn criterion_1_closed_forms() {
    const TOL: f64 = 1e-8;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let normal = FieldSystem::example1_conjugated(range(-1.0, 1.0)).unwrap();
    let rotating = LinearControlSystem::example2(range(-1.0, 1.0)).unwrap();
    let (mut worst1, mut worst2) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let p0 = random_point(&mut rng, 3, 2.0);
        let u = rng.random_range(-1.0..=1.0);
        let c = PiecewiseControl::constant(dvector![u], 10.0).unwrap();
        let t1 = integrate_direct(&normal, &p0, &c, 10.0, 1e-3).unwrap();
        for (t, p) in t1.times.iter().zip(&t1.points) {
            worst1 = worst1.max((p - example1_closed_form(&p0, u, *t)).amax());
        }
        let t2 = integrate(&rotating, &p0, &c, 10.0, 1e-3).unwrap();
        for (t, p) in t2.times.iter().zip(&t2.points) {
            worst2 = worst2.max((p - example2_closed_form(&p0, u, *t)).amax());
        }
    }
    report(
        1,
        "closed-form fidelity",
        worst1 <= TOL && worst2 <= TOL,
        &format!("sup error example 1 {worst1:.2e}, example 2 {worst2:.2e} (tol {TOL:e})"),
        start,
        Duration::from_secs(10),
    );
}

#[test]
fn criterion_2_structural_identities() {
    const TRIALS: usize = 500;
    const AUTO_TOL: f64 = 1e-9;
    const F_TOL: f64 = 1e-9;
    const COCYCLE_TOL: f64 = 1e-7;
    const COMPOSE_TOL: f64 = 1e-7;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let heis = LieAlgebra::heisenberg();
    let derivations = [
        dmatrix![0.0, 1.0, 0.0; 0.0, 0.0, 0.0; 0.0, 0.0, 0.0],
        dmatrix![0.0, -1.0, 0.0; 1.0, 0.0, 0.0; 0.0, 0.0, 0.0],
        DMatrix::from_diagonal(&dvector![1.0, 1.0, 2.0]),
        dmatrix![0.3, -1.0, 0.0; 0.5, 0.2, 0.0; 1.0, -2.0, 0.5],
    ];
    let engel = LieAlgebra::engel();
    let engel_a = DMatrix::from_diagonal(&dvector![1.0, 0.5, 1.5, 2.5]);
    let unit = range(-1.0, 1.0);
    let systems = [
        LinearControlSystem::example1(unit.clone()).unwrap(),
        LinearControlSystem::example2(unit.clone()).unwrap(),
    ];
    let regular = LinearControlSystem::regular_heisenberg();

    let (mut auto, mut fcomp, mut cocycle, mut compose) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for k in 0..TRIALS {
        let s = rng.random_range(-3.0..3.0);
        let a = &derivations[k % derivations.len()];
        let (x, y) = (
            random_point(&mut rng, 3, 2.0),
            random_point(&mut rng, 3, 2.0),
        );
        let lhs = linear_flow(a, s, &heis.multiply(&x, &y).unwrap());
        let rhs = heis
            .multiply(&linear_flow(a, s, &x), &linear_flow(a, s, &y))
            .unwrap();
        auto = auto.max(rel(&lhs, &rhs));
        let (x4, y4) = (
            random_point(&mut rng, 4, 2.0),
            random_point(&mut rng, 4, 2.0),
        );
        let lhs = linear_flow(&engel_a, s, &engel.multiply(&x4, &y4).unwrap());
        let rhs = engel
            .multiply(
                &linear_flow(&engel_a, s, &x4),
                &linear_flow(&engel_a, s, &y4),
            )
            .unwrap();
        auto = auto.max(rel(&lhs, &rhs));

        let s1 = rng.random_range(-3.0..3.0);
        let lhs = f_s_map(&heis, a, s + s1, &x);
        let rhs = heis
            .multiply(
                &f_s_map(&heis, a, s, &x),
                &linear_flow(a, s, &f_s_map(&heis, a, s1, &x)),
            )
            .unwrap();
        fcomp = fcomp.max(rel(&lhs, &rhs));

        let sys = &systems[k % 2];
        let t = rng.random_range(0.1..2.0);
        let u = random_control(&unit, t, 10 + k, 7);
        let direct = endpoint_direct(sys, &x, &u, t, DEFAULT_STEP).unwrap();
        let from_e = identity_endpoint(sys, &u, t, DEFAULT_STEP).unwrap();
        let composed = sys
            .algebra()
            .multiply(&from_e, &sys.linear_flow(t, &x))
            .unwrap();
        cocycle = cocycle.max((direct - composed).amax());

        let (t1, t2) = (rng.random_range(0.1..1.5), rng.random_range(0.1..1.5));
        let u1 = random_control(regular.omega(), t1, 10 + k, 5);
        let u2 = random_control(regular.omega(), t2, 10 + k, 6);
        let joined = u1.concat(&u2).unwrap();
        let lhs = identity_endpoint(&regular, &joined, t1 + t2, DEFAULT_STEP).unwrap();
        let first = identity_endpoint(&regular, &u1, t1, DEFAULT_STEP).unwrap();
        let second = identity_endpoint(&regular, &u2, t2, DEFAULT_STEP).unwrap();
        let rhs = regular
            .algebra()
            .multiply(&second, &regular.linear_flow(t2, &first))
            .unwrap();
        compose = compose.max(rel(&lhs, &rhs));
    }
    report(
        2,
        "structural identities",
        auto <= AUTO_TOL && fcomp <= F_TOL && cocycle <= COCYCLE_TOL && compose <= COMPOSE_TOL,
        &format!(
            "{TRIALS} trials; automorphism {auto:.1e} (tol {AUTO_TOL:e}), f-composition {fcomp:.1e} \
             (tol {F_TOL:e}), cocycle {cocycle:.1e} (tol {COCYCLE_TOL:e}), composition {compose:.1e} \
             (tol {COMPOSE_TOL:e})"
        ),
        start,
        Duration::from_secs(30),
    );
}

#[test]
fn criterion_3_exceptional_set() {
    const SINGULAR_TOL: f64 = 1e-8;
    const REGULAR_MIN: f64 = 1e-3;
    const INVERSE_TOL: f64 = 1e-10;
    let start = Instant::now();
    let ex2 = LinearControlSystem::example2(range(-1.0, 1.0)).unwrap();
    let a = ex2.derivation();
    let at_two_pi = fixed_point_determinant(a, 2.0 * PI).abs();
    let others: Vec<f64> = [1.0, 2.0, 3.0]
        .iter()
        .map(|&s| fixed_point_determinant(a, s).abs())
        .collect();
    let reg = LinearControlSystem::regular_heisenberg();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..1000 {
        let y = random_point(&mut rng, 3, 2.0);
        match invert_f_s(reg.algebra(), reg.derivation(), 1.0, &y) {
            Ok(x) => {
                worst = worst.max((f_s_map(reg.algebra(), reg.derivation(), 1.0, &x) - &y).amax())
            }
            Err(_) => failures += 1,
        }
    }
    let ok = at_two_pi < SINGULAR_TOL
        && others.iter().all(|&d| d > REGULAR_MIN)
        && failures == 0
        && worst <= INVERSE_TOL;
    report(
        3,
        "exceptional set",
        ok,
        &format!(
            "|det(I - e^(SA))| at 2pi {at_two_pi:.1e} (< {SINGULAR_TOL:e}), at S=1,2,3 \
             {:.1e}, {:.1e}, {:.1e} (> {REGULAR_MIN:e}); inverse round trip {worst:.1e} \
             (tol {INVERSE_TOL:e}), {failures} failures",
            others[0], others[1], others[2]
        ),
        start,
        Duration::from_secs(10),
    );
}

#[test]
fn criterion_4_regular_control_set() {
    const RETURN: f64 = 1e-6;
    let start = Instant::now();
    let sys = LinearControlSystem::regular_heisenberg();
    let seeded = seed_control_set(&sys, 1.0, 1000, 404).unwrap();
    let fraction = seeded.pass_fraction(RETURN);
    let spec = GridSpec::cube(3, 4.0, 33, 0.2, sys.omega(), 5).unwrap();
    let graph = grid_transition_graph(&sys, &spec).unwrap();
    let estimates = control_set_estimate(&graph);
    let multi: Vec<&ControlSetEstimate> = estimates.iter().filter(|e| e.cells.len() > 1).collect();
    let identity_ok = multi.len() == 1 && multi[0].contains_identity_closure;
    report(
        4,
        "regular control set",
        seeded.points.len() >= 1000 && fraction >= 0.99 && identity_ok,
        &format!(
            "{} seeded points, {:.2}% return within {RETURN:e}; {} multi-cell estimates on 33^3, \
             identity in or next to it: {identity_ok}",
            seeded.points.len(),
            100.0 * fraction,
            multi.len()
        ),
        start,
        Duration::from_secs(300),
    );
}

#[test]
fn criterion_5_singleton_obstruction() {
    let start = Instant::now();
    let omega = range(-1.0, 1.0);
    let rho = omega.bounds()[0].0;
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, sigma) in [2.0 * rho, rho - 0.1].into_iter().enumerate() {
        let params = LyapunovParams::for_range(sigma, &omega).unwrap();
        let r = verify_singleton_control_sets(params, &omega, 10_000, 3.0, 500 + k as u64).unwrap();
        ok &= r.monotonicity_violations == 0 && r.strict_violations == 0 && r.strict_cases >= 1000;
        parts.push(format!(
            "sigma {sigma}: {} violations, {} strict cases, {} strict violations",
            r.monotonicity_violations, r.strict_cases, r.strict_violations
        ));
    }
    report(
        5,
        "singleton control sets",
        ok,
        &format!("10^4 samples each; {}", parts.join("; ")),
        start,
        Duration::from_secs(120),
    );
}

#[test]
fn criterion_6_rotation_controllability() {
    const END_TOL: f64 = 1e-6;
    const DROP_TOL: f64 = 1e-8;
    let start = Instant::now();
    let omega = range(-2.0, 2.0);
    let sys = LinearControlSystem::example2(omega.clone()).unwrap();
    let alpha = 1.0;
    let up = build_ascent_plan(-3.0, 5.0, -1.0, &omega).unwrap();
    let down = build_descent_plan(5.0, -3.0, alpha, &omega).unwrap();
    let in_range = up.check_range(&omega).is_ok() && down.check_range(&omega).is_ok();
    let up_err = (up.endpoint(&sys, DEFAULT_STEP).unwrap() - dvector![0.0, 0.0, 5.0]).amax();
    let down_err = (down.endpoint(&sys, DEFAULT_STEP).unwrap() - dvector![0.0, 0.0, -3.0]).amax();

    let chained = down.leg_endpoints(&sys, DEFAULT_STEP).unwrap();
    let mut drop_err = 0.0f64;
    for k in 1..=down.loops {
        let i = down
            .legs
            .iter()
            .position(|l| l.label == format!("ii.{k}"))
            .unwrap();
        let before = &chained[i - 1];
        let after = &chained[i + 1];
        drop_err = drop_err.max((before[2] - after[2] - alpha * alpha * PI / 2.0).abs());
    }
    report(
        6,
        "rotation example controllability",
        in_range && up_err <= END_TOL && down_err <= END_TOL && down.loops > 0 && drop_err <= DROP_TOL,
        &format!(
            "ascent error {up_err:.1e}, descent error {down_err:.1e} (tol {END_TOL:e}); controls in \
             [-2, 2]: {in_range}; {} loops, per-loop drop error {drop_err:.1e} (tol {DROP_TOL:e})",
            down.loops
        ),
        start,
        Duration::from_secs(30),
    );
}

#[test]
fn criterion_7_rank_reports() {
    let start = Instant::now();
    let unit = range(-1.0, 1.0);
    let cases = [
        (
            "example 1",
            LinearControlSystem::example1(unit.clone()).unwrap(),
            [1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0],
        ),
        (
            "example 2",
            LinearControlSystem::example2(unit).unwrap(),
            [-1.0, 0.0, 0.0],
            [-1.0, 1.0, -0.5],
        ),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, sys, want_ay, want_bracket) in cases {
        let y = &sys.controls()[0];
        let ay = sys.derivation() * y;
        let bracket = sys.algebra().bracket(&ay, y).unwrap();
        let rank = larc_check(&sys).rank;
        let good = ay.as_slice() == want_ay && bracket.as_slice() == want_bracket && rank == 3;
        ok &= good;
        parts.push(format!(
            "{name}: AY = {:?} (want {want_ay:?}), [AY, Y] = {:?} (want {want_bracket:?}), rank {rank}",
            ay.as_slice(),
            bracket.as_slice()
        ));
    }
    report(
        7,
        "rank reports",
        ok,
        &parts.join("; "),
        start,
        Duration::from_secs(1),
    );
}
