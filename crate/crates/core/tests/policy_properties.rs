mod common;

use std::sync::OnceLock;

use common::load;
use opfbasis::policy::cost_matches;
use opfbasis::{
    check_feasible, classify_generators, run_learning, top_k_ensemble, EnsemblePolicy, Error,
    OpfProblem, OpfSolver, PowerNetwork, UncertaintyModel,
};
use proptest::prelude::*;

struct Fixture {
    net: PowerNetwork,
    prob: OpfProblem,
    ensemble: EnsemblePolicy,
}

/// case73 with every basis seen in 600 samples at a wide sigma.
fn fixture() -> &'static Fixture {
    static CELL: OnceLock<Fixture> = OnceLock::new();
    CELL.get_or_init(|| {
        let (net, prob) = load("case73_ieee_rts");
        let model = UncertaintyModel::from_network(&net, 0.05, 21).unwrap();
        let trace = run_learning(&prob, &model, 500, 100).unwrap();
        let ensemble = top_k_ensemble(&trace, &prob, 1000).unwrap();
        assert!(
            ensemble.len() >= 3,
            "need several bases, got {}",
            ensemble.len()
        );
        Fixture {
            net,
            prob,
            ensemble,
        }
    })
}

fn scenario(net: &PowerNetwork, scale: f64, z: &[f64]) -> Vec<f64> {
    net.demand
        .iter()
        .zip(z)
        .map(|(d, z)| scale * d.abs() * z)
        .collect()
}

fn normals(v: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, v)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_member_conserves_power(z in normals(73), scale in 0.0..0.1f64) {
        let f = fixture();
        let omega = scenario(&f.net, scale, &z);
        let balance = f.prob.balance_rhs(&omega);
        for m in f.ensemble.members() {
            let p = m.policy.eval(&omega);
            prop_assert!((p.iter().sum::<f64>() - balance).abs() <= 1e-8);
        }
    }

    #[test]
    fn optimal_members_are_feasible_and_ensemble_is_bounded_by_lp(z in normals(73), scale in 0.0..0.08f64) {
        let f = fixture();
        let omega = scenario(&f.net, scale, &z);
        let sol = OpfSolver::new(&f.prob).unwrap().solve(&omega).unwrap();
        let Some(lp_basis) = sol.basis.clone() else { return Ok(()) };
        let mut lp_basis_is_member = false;
        for m in f.ensemble.members() {
            if m.policy.basis() == &lp_basis {
                lp_basis_is_member = true;
                let p = m.policy.eval(&omega);
                prop_assert!(check_feasible(&f.prob, &p, &omega));
                prop_assert!(cost_matches(f.prob.objective(&p), sol.objective));
            }
        }
        match f.ensemble.eval(&f.prob, &omega) {
            Ok(choice) => {
                prop_assert!(choice.cost >= sol.objective - 1e-6 * sol.objective.abs().max(1.0));
                if lp_basis_is_member {
                    prop_assert!(cost_matches(choice.cost, sol.objective));
                }
            }
            Err(Error::NoFeasibleBasis) => prop_assert!(!lp_basis_is_member),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }

    #[test]
    fn larger_ensembles_never_do_worse(z in normals(73), scale in 0.0..0.1f64) {
        let f = fixture();
        let omega = scenario(&f.net, scale, &z);
        let choices = f.ensemble.prefix_choices(&f.prob, &omega);
        for k in 1..choices.len() {
            if let Some((_, small)) = choices[k - 1] {
                let (_, large) = choices[k].expect("feasibility cannot be lost by adding members");
                prop_assert!(large <= small);
            }
        }
        // prefix choice agrees with evaluating the truncated ensemble directly
        for k in [1, choices.len()] {
            let direct = f.ensemble.truncated(k).eval(&f.prob, &omega).ok().map(|c| (c.chosen, c.cost));
            prop_assert_eq!(direct, choices[k - 1]);
        }
    }
}

#[test]
fn classification_partitions_every_member() {
    let f = fixture();
    for m in f.ensemble.members() {
        let c = classify_generators(m.policy.basis());
        let mut all: Vec<usize> = c
            .at_upper
            .iter()
            .chain(&c.at_lower)
            .chain(&c.varying)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..f.net.n_gen()).collect::<Vec<_>>());
    }
}

#[test]
fn nominal_case5_classification() {
    let (net, prob) = load("case5_pjm");
    let sol = OpfSolver::new(&prob)
        .unwrap()
        .solve(&vec![0.0; net.n_bus()])
        .unwrap();
    let c = classify_generators(sol.basis.as_ref().unwrap());
    assert_eq!(c.at_upper.len() + c.at_lower.len() + c.varying.len(), 5);
}

#[test]
fn policy_feasibility_tracks_basis_changes() {
    // The nominal basis stays feasible exactly where it stays optimal, up to
    // cost-equivalent alternatives.
    let (net, prob) = load("case118_ieee");
    let solver = OpfSolver::new(&prob).unwrap();
    let nominal = solver
        .solve(&vec![0.0; net.n_bus()])
        .unwrap()
        .basis
        .unwrap();
    let policy = opfbasis::make_policy(&prob, &nominal).unwrap();
    let model = UncertaintyModel::from_network(&net, 0.05, 8).unwrap();
    let (mut same_basis, mut feasible_optimal, mut feasible) = (0, 0, 0);
    let n = 1000;
    for i in 0..n {
        let omega = model.sample(0, i);
        let sol = solver.solve(&omega).unwrap();
        let p = policy.eval(&omega);
        let ok = check_feasible(&prob, &p, &omega);
        if sol.basis.as_ref() == Some(&nominal) {
            same_basis += 1;
            assert!(ok, "sample {i}: own region must be feasible");
        }
        if ok {
            feasible += 1;
            if cost_matches(prob.objective(&p), sol.objective) {
                feasible_optimal += 1;
            }
        }
    }
    assert!(same_basis < n, "scenario set never left the nominal region");
    assert!(feasible_optimal >= same_basis);
    assert!(feasible_optimal - same_basis <= n / 100);
    assert!(feasible >= feasible_optimal);
}
