mod common;

use common::{enumerate_vertices, load, relative_gap, DcFlowOracle};
use opfbasis::{
    extract_basis, make_policy, Error, LpStatus, OpfProblem, OpfSolver, PowerNetwork,
    UncertaintyModel,
};
use proptest::prelude::*;

/// Solver and brute force agree on status and objective; the returned basis
/// reproduces the vertex and is active there.
fn check_against_enumeration(
    net: &PowerNetwork,
    prob: &OpfProblem,
    oracle: &DcFlowOracle,
    omega: &[f64],
) -> bool {
    let solver = OpfSolver::new(prob).unwrap();
    let sol = solver.solve(omega).unwrap();
    let brute = enumerate_vertices(net, oracle, omega);
    match (sol.status, brute) {
        (LpStatus::Optimal, Some(b)) => {
            assert!(
                relative_gap(sol.objective, b.cost) <= 1e-8,
                "objective {} vs enumeration {}",
                sol.objective,
                b.cost
            );
            let basis = sol.basis.as_ref().unwrap();
            let policy = make_policy(prob, basis).unwrap();
            let p = policy.eval(omega);
            for (a, b) in p.iter().zip(&sol.p) {
                assert!((a - b).abs() <= 1e-8, "policy {a} vs vertex {b}");
            }
            let shift = prob.flow_shift(omega);
            for &r in basis.rows() {
                assert!((prob.row_dot(r, &sol.p) - prob.row_rhs(r, &shift)).abs() <= 1e-7);
            }
            assert!(prob.max_violation(&sol.p, &shift) <= 1e-7);
            assert!((sol.p.iter().sum::<f64>() - prob.balance_rhs(omega)).abs() <= 1e-8);
            true
        }
        (LpStatus::Infeasible, None) => false,
        (status, brute) => panic!(
            "solver says {status:?}, enumeration found {:?}",
            brute.map(|b| b.cost)
        ),
    }
}

fn run_case(name: &str, sigma: f64, seed: u64, count: usize) -> usize {
    let (net, prob) = load(name);
    let oracle = DcFlowOracle::new(&net);
    let model = UncertaintyModel::from_network(&net, sigma, seed).unwrap();
    (0..count)
        .filter(|&i| check_against_enumeration(&net, &prob, &oracle, &model.sample(0, i)))
        .count()
}

#[test]
fn case3_matches_vertex_enumeration() {
    assert_eq!(run_case("case3_lmbd", 0.03, 1, 100), 100);
}

#[test]
fn case5_matches_vertex_enumeration() {
    assert_eq!(run_case("case5_pjm", 0.03, 2, 100), 100);
}

#[test]
fn wide_uncertainty_matches_enumeration_including_infeasible() {
    let optimal = run_case("case5_pjm", 0.6, 3, 100);
    assert!(optimal < 100, "no infeasible scenario was exercised");
    assert!(optimal > 0);
    run_case("case3_lmbd", 0.5, 4, 100);
}

#[test]
fn nominal_case5_basis_reproduces_vertex() {
    let (net, prob) = load("case5_pjm");
    let omega = vec![0.0; net.n_bus()];
    let sol = OpfSolver::new(&prob).unwrap().solve(&omega).unwrap();
    let basis = extract_basis(&prob, &sol.p, &omega).unwrap();
    assert_eq!(Some(&basis), sol.basis.as_ref());
    let p = make_policy(&prob, &basis).unwrap().eval(&omega);
    for (a, b) in p.iter().zip(&sol.p) {
        assert!((a - b).abs() < 1e-8);
    }
    let factored = basis.factor(&prob).unwrap();
    let id = &factored.inverse * &factored.matrix;
    assert!((id - nalgebra::DMatrix::identity(net.n_gen(), net.n_gen())).amax() < 1e-8);
}

#[test]
fn identical_inputs_give_identical_active_sets() {
    let (net, prob) = load("case118_ieee");
    let model = UncertaintyModel::from_network(&net, 0.03, 9).unwrap();
    for i in 0..20 {
        let omega = model.sample(0, i);
        // separate solver instances, so warm-start state cannot leak
        let a = OpfSolver::new(&prob).unwrap().solve(&omega).unwrap();
        let b = OpfSolver::new(&prob).unwrap().solve(&omega).unwrap();
        assert_eq!(a.active_rows, b.active_rows);
        assert_eq!(a.basis, b.basis);
    }
}

#[test]
fn optimal_solutions_are_vertices() {
    for name in ["case24_ieee_rts", "case73_ieee_rts", "case300_ieee"] {
        let (net, prob) = load(name);
        let solver = OpfSolver::new(&prob).unwrap();
        let model = UncertaintyModel::from_network(&net, 0.05, 5).unwrap();
        for i in 0..30 {
            let omega = model.sample(0, i);
            let sol = solver.solve(&omega).unwrap();
            if sol.status != LpStatus::Optimal {
                continue;
            }
            let basis = sol.basis.unwrap();
            assert_eq!(basis.rows().len(), net.n_gen() - 1);
            assert!(basis.rows().windows(2).all(|w| w[0] < w[1]));
            assert!(basis.rows().iter().all(|r| sol.active_rows.contains(r)));
            basis.factor(&prob).unwrap();
        }
    }
}

#[test]
fn wrong_scenario_length_is_rejected() {
    let (_, prob) = load("case3_lmbd");
    let solver = OpfSolver::new(&prob).unwrap();
    assert!(matches!(solver.solve(&[0.0]), Err(Error::Domain(_))));
    assert!(matches!(
        solver.solve(&[f64::NAN, 0.0, 0.0]),
        Err(Error::Domain(_))
    ));
}

/// Small connected networks with random data.
fn small_network() -> impl Strategy<Value = (PowerNetwork, Vec<f64>)> {
    (3usize..=5, 2usize..=4).prop_flat_map(|(v, n)| {
        let extra = v; // chords on top of a spanning path
        (
            prop::collection::vec(0.0..1.0f64, v),
            prop::collection::vec((0..v, 0.0..0.6f64, 0.4..2.0f64, 1.0..40.0f64), n),
            prop::collection::vec((0..v, 0..v, 2.0..20.0f64, 0.2..1.5f64), extra),
            prop::collection::vec(2.0..20.0f64, v - 1),
            prop::collection::vec(0.2..1.5f64, v - 1),
            prop::collection::vec(-0.3..0.3f64, v),
        )
            .prop_map(move |(demand, gens, chords, path_b, path_f, omega)| {
                let mut net = PowerNetwork {
                    case_id: "random".into(),
                    base_mva: 100.0,
                    bus_ids: (1..=v as u64).collect(),
                    demand,
                    forecast: vec![0.0; v],
                    ref_bus: 0,
                    ..Default::default()
                };
                for (bus, lo, span, cost) in gens {
                    net.gen_bus.push(bus);
                    net.pmin.push(lo * 0.2);
                    net.pmax.push(lo * 0.2 + span);
                    net.cost.push(cost.round());
                }
                let mut add = |f: usize, t: usize, b: f64, lim: f64| {
                    net.branch_from.push(f);
                    net.branch_to.push(t);
                    net.susceptance.push(b);
                    net.fmin.push(-lim);
                    net.fmax.push(lim);
                };
                for i in 0..v - 1 {
                    add(i, i + 1, path_b[i], path_f[i]);
                }
                for (f, t, b, lim) in chords {
                    if f != t {
                        add(f, t, b, lim);
                    }
                }
                (net, omega)
            })
    })
}

#[test]
fn parallel_branch_network_matches_enumeration() {
    // Reference optimum 12.846981511338456 from an external LP solver.
    let net = PowerNetwork {
        case_id: "parallel".into(),
        base_mva: 100.0,
        bus_ids: vec![1, 2, 3],
        demand: vec![0.7857387556008774, 0.9977728022911966, 0.0],
        forecast: vec![0.0; 3],
        gen_bus: vec![0, 2],
        pmin: vec![0.0, 0.0],
        pmax: vec![1.6596375286427918, 1.397056243114844],
        cost: vec![20.0, 1.0],
        branch_from: vec![0, 1, 1, 2],
        branch_to: vec![1, 2, 0, 0],
        susceptance: vec![
            7.671036274583145,
            17.71020913840717,
            13.96008407507276,
            17.340210614999645,
        ],
        fmin: vec![-0.2, -1.4071260517985027, -0.2, -0.48160575714224196],
        fmax: vec![0.2, 1.4071260517985027, 0.2, 0.48160575714224196],
        ref_bus: 0,
    };
    let prob = OpfProblem::from_network(&net).unwrap();
    let oracle = DcFlowOracle::new(&net);
    assert!(check_against_enumeration(&net, &prob, &oracle, &[0.0; 3]));
    let sol = OpfSolver::new(&prob).unwrap().solve(&[0.0; 3]).unwrap();
    assert!(relative_gap(sol.objective, 12.846981511338456) <= 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn random_networks_match_vertex_enumeration((net, omega) in small_network()) {
        let prob = OpfProblem::from_network(&net).unwrap();
        let oracle = DcFlowOracle::new(&net);
        check_against_enumeration(&net, &prob, &oracle, &omega);
    }
}
