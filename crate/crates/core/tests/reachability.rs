use nalgebra::{dvector, DMatrix, DVector};
use nilpotent_lcs::algebra::LieAlgebra;
use nilpotent_lcs::dynamics::*;
use nilpotent_lcs::error::Error;
use nilpotent_lcs::reach::*;
use petgraph::algo::has_path_connecting;
use petgraph::graph::NodeIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn unit() -> ControlRange {
    ControlRange::interval(-1.0, 1.0).unwrap()
}

// F in the normal-form coordinates of the first example.
fn lyapunov(p: &DVector<f64>, sigma: f64) -> f64 {
    6.0 * p[2] * sigma + p[1] * (p[1] * p[1] - 2.0 * p[0] * sigma)
}

#[test]
fn conjugated_cloud_never_lowers_f() {
    let sys = FieldSystem::example1_conjugated(unit()).unwrap();
    let cloud = sample_reachable(&sys, &DVector::zeros(3), 1.0, 10_000, 11).unwrap();
    assert_eq!(cloud.len(), 10_000);
    let f0 = lyapunov(&DVector::zeros(3), -1.0);
    let worst = cloud
        .points
        .iter()
        .map(|p| lyapunov(p, -1.0) - f0)
        .fold(f64::INFINITY, f64::min);
    assert!(worst >= -1e-9, "F dropped by {worst}");
}

#[test]
fn clouds_are_reproducible() {
    let sys = LinearControlSystem::regular_heisenberg();
    let a = sample_reachable(&sys, &DVector::zeros(3), 1.5, 300, 42).unwrap();
    let b = sample_reachable(&sys, &DVector::zeros(3), 1.5, 300, 42).unwrap();
    assert_eq!(a, b);
    let c = sample_reachable(&sys, &DVector::zeros(3), 1.5, 300, 43).unwrap();
    assert_ne!(a.points, c.points);
    // a longer run extends a shorter one
    let d = sample_reachable(&sys, &DVector::zeros(3), 1.5, 100, 42).unwrap();
    assert_eq!(&a.points[..100], &d.points[..]);
}

#[test]
fn clouds_translate_by_the_linear_flow() {
    let sys = LinearControlSystem::example2(unit()).unwrap();
    let x = dvector![0.4, -1.2, 2.5];
    let s = 2.3;
    let at_e = sample_reachable(&sys, &DVector::zeros(3), s, 200, 5).unwrap();
    let at_x = sample_reachable(&sys, &x, s, 200, 5).unwrap();
    let shift = sys.linear_flow(s, &x);
    for (p, q) in at_e.points.iter().zip(&at_x.points) {
        let translated = sys.algebra().multiply(p, &shift).unwrap();
        assert!((translated - q).amax() < 1e-12);
    }
    // and against direct integration from x
    for (u, q) in at_x.controls.iter().zip(&at_x.points).take(50) {
        let direct = endpoint_direct(&sys, &x, u, s, DEFAULT_STEP).unwrap();
        assert!((direct - q).amax() < 1e-7);
    }
}

fn random_point(rng: &mut ChaCha8Rng, n: usize, r: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-r..r))
}

#[test]
fn f_s_inverse_round_trips() {
    let engel = LieAlgebra::engel();
    let engel_a = DMatrix::from_diagonal(&dvector![1.0, 0.5, 1.5, 2.5]);
    assert!(engel.validate_derivation(&engel_a).max_violation == 0.0);
    let reg = LinearControlSystem::regular_heisenberg();
    let cases = [
        (reg.algebra().clone(), reg.derivation().clone(), 1.0),
        (engel, engel_a, 0.7),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (algebra, a, s) in cases {
        let n = algebra.dim();
        for _ in 0..1000 {
            let y = random_point(&mut rng, n, 2.0);
            let x = invert_f_s(&algebra, &a, s, &y).unwrap();
            assert!((f_s_map(&algebra, &a, s, &x) - &y).amax() <= 1e-10);
        }
    }
}

#[test]
fn exceptional_times_are_refused() {
    let sys = LinearControlSystem::example2(unit()).unwrap();
    let r = invert_f_s(
        sys.algebra(),
        sys.derivation(),
        2.0 * PI,
        &dvector![0.3, 0.1, -0.2],
    );
    assert!(matches!(r, Err(Error::ExceptionalTime { .. })));
}

#[test]
fn seeded_control_set() {
    let sys = LinearControlSystem::regular_heisenberg();
    let seeded = seed_control_set(&sys, 1.0, 1000, 21).unwrap();
    assert!(!seeded.points.is_empty());
    assert!(seeded.pass_fraction(RETURN_TOL) >= 0.99);

    // points produced by nonzero controls approach the identity as n grows
    let nearest = |n: usize| {
        let s = seed_control_set(&sys, 1.0, n, 21).unwrap();
        s.points
            .iter()
            .zip(&s.controls)
            .filter(|(_, u)| u.segments().iter().any(|(_, v)| v.amax() > 0.0))
            .map(|(p, _)| p.amax())
            .fold(f64::INFINITY, f64::min)
    };
    let coarse = nearest(100);
    let fine = nearest(4000);
    assert!(fine <= coarse);
    assert!(
        fine < 0.1,
        "closest seeded point is {fine} from the identity"
    );

    let ex1 = LinearControlSystem::example1(unit()).unwrap();
    assert!(matches!(
        seed_control_set(&ex1, 1.0, 10, 0),
        Err(Error::NotRegular { .. })
    ));
}

#[test]
fn normal_form_graph_respects_f() {
    let sigma = -2.0;
    let sys = FieldSystem::example1_conjugated(unit()).unwrap();
    let mut spec = GridSpec::cube(3, 2.0, 21, 2.0, sys.omega(), 3).unwrap();
    spec.step = 0.05;
    let g = grid_transition_graph(&sys, &spec).unwrap();
    // sign of F on a whole cell, judged from its corners
    let sign = |c: usize| {
        let ctr = spec.center(c);
        let vals: Vec<f64> = (0..8)
            .map(|k| {
                let p = DVector::from_fn(3, |a, _| {
                    let half = 0.5 * spec.cell_width(a);
                    ctr[a] + if (k >> a) & 1 == 1 { half } else { -half }
                });
                lyapunov(&p, sigma)
            })
            .collect();
        if vals.iter().all(|&v| v > 0.0) {
            1
        } else if vals.iter().all(|&v| v < 0.0) {
            -1
        } else {
            0
        }
    };
    for comp in petgraph::algo::tarjan_scc(&g.graph) {
        let signs: Vec<i32> = comp
            .iter()
            .filter(|n| n.index() < spec.num_cells())
            .map(|n| sign(n.index()))
            .collect();
        assert!(!(signs.contains(&1) && signs.contains(&-1)));
    }
    let plane = spec
        .cell_of(&[0.0, 0.0, 0.0])
        .map(|c| spec.multi_index(c)[1])
        .unwrap();
    for est in control_set_estimate(&g) {
        let off_plane = est
            .multi_indices(&spec)
            .iter()
            .filter(|i| i[1] != plane)
            .count();
        assert!(off_plane < 2);
    }
}

#[test]
fn rotation_example_is_one_component() {
    let sys = LinearControlSystem::example2(unit()).unwrap();
    let spec = GridSpec::cube(3, 3.0, 21, 0.5, sys.omega(), 5).unwrap();
    let g = grid_transition_graph(&sys, &spec).unwrap();
    let est = control_set_estimate(&g);
    assert_eq!(est.len(), 1);
    let inner: Vec<usize> = (0..spec.num_cells())
        .filter(|&c| spec.is_window_interior(c))
        .collect();
    let covered = inner.iter().filter(|&&c| est[0].contains(c)).count();
    assert!(
        covered as f64 >= 0.9 * inner.len() as f64,
        "{covered} of {}",
        inner.len()
    );
    assert!(est[0].contains_identity_closure);
}

#[test]
fn regular_system_has_one_estimate_next_to_the_identity() {
    let sys = LinearControlSystem::regular_heisenberg();
    let spec = GridSpec::cube(3, 4.0, 33, 0.2, sys.omega(), 5).unwrap();
    let g = grid_transition_graph(&sys, &spec).unwrap();
    let est = control_set_estimate(&g);
    let multi: Vec<&ControlSetEstimate> = est.iter().filter(|e| e.cells.len() > 1).collect();
    assert_eq!(multi.len(), 1);
    let d = multi[0];
    assert!(d.contains_identity_closure);
    assert!(d.diameter > 0.0 && d.interior_cells >= 1);

    // maximality: no adjacent cell is mutually reachable with the component
    let inside = NodeIndex::new(d.cells[0]);
    let mut adjacent: Vec<usize> = d
        .cells
        .iter()
        .flat_map(|&c| spec.face_neighbors(c))
        .filter(|&c| !d.contains(c))
        .collect();
    adjacent.sort_unstable();
    adjacent.dedup();
    assert!(!adjacent.is_empty());
    for c in adjacent {
        let n = NodeIndex::new(c);
        let both = has_path_connecting(&g.graph, inside, n, None)
            && has_path_connecting(&g.graph, n, inside, None);
        assert!(!both);
    }
}

#[test]
fn estimates_are_disjoint() {
    let sys = LinearControlSystem::example2(unit()).unwrap();
    let spec = GridSpec::cube(3, 6.0, 9, 0.3, sys.omega(), 3).unwrap();
    let est = control_set_estimate(&grid_transition_graph(&sys, &spec).unwrap());
    let mut seen = vec![false; spec.num_cells()];
    for e in &est {
        for &c in &e.cells {
            assert!(!seen[c]);
            seen[c] = true;
        }
    }
}

#[test]
fn equilibrium_reaches_itself() {
    let sys = LinearControlSystem::example2(unit()).unwrap();
    let x = dvector![0.0, 0.0, 1.5];
    assert!(mutual_reachability_check(&sys, &x, &x, 1e-3, 1, 1e-12, 0));
}

#[test]
fn rotation_example_connects_the_vertical_axis() {
    let sys = LinearControlSystem::example2(unit()).unwrap();
    let x = dvector![0.0, 0.0, 5.0];
    let y = dvector![0.0, 0.0, -3.0];
    assert!(mutual_reachability_check(&sys, &x, &y, 32.0, 300, 0.05, 1));
}

#[test]
fn normal_form_cannot_go_back_down() {
    let sys = FieldSystem::example1_conjugated(unit()).unwrap();
    let x = DVector::zeros(3);
    let y = dvector![0.0, 0.0, -1.0];
    assert!(lyapunov(&y, -1.0) > lyapunov(&x, -1.0));
    assert!(find_witness(&sys, &y, &x, 8.0, 300, 0.05, 2).is_none());
    assert!(!mutual_reachability_check(&sys, &x, &y, 8.0, 300, 0.05, 2));
}
