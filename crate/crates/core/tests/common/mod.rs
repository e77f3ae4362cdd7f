//! Shared helpers for integration tests: case loading and independent oracles
//! that do not go through the library's PTDF, assembly or solver code.

#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use opfbasis::{read_case, OpfProblem, PowerNetwork, RawCase};

pub fn case_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data/pglib")
        .join(format!("pglib_opf_{name}.m"))
}

pub fn raw_case(name: &str) -> RawCase {
    read_case(case_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn load(name: &str) -> (PowerNetwork, OpfProblem) {
    let net = raw_case(name).to_network().unwrap();
    let prob = OpfProblem::from_network(&net).unwrap();
    (net, prob)
}

/// Flows for balanced injections `q`, from the pseudo-inverse of the full
/// (unreduced) bus susceptance matrix: `f = diag(b) A theta`, `L theta = q`.
pub struct DcFlowOracle {
    /// diag(b) A L^+, m x v.
    pub sensitivity: DMatrix<f64>,
}

impl DcFlowOracle {
    pub fn new(net: &PowerNetwork) -> Self {
        let (m, v) = (net.n_branch(), net.n_bus());
        let mut incidence = DMatrix::<f64>::zeros(m, v);
        for l in 0..m {
            incidence[(l, net.branch_from[l])] += 1.0;
            incidence[(l, net.branch_to[l])] -= 1.0;
        }
        let weighted =
            DMatrix::from_diagonal(&DVector::from_column_slice(&net.susceptance)) * &incidence;
        let laplacian = incidence.transpose() * &weighted;
        // For a connected network L+ = (L + J/v)^-1 - J/v with J the all-ones
        // matrix. nalgebra's SVD-based pseudo_inverse is off by ~1e-6 on some
        // small networks, which is enough to move a vertex.
        let j = DMatrix::from_element(v, v, 1.0 / v as f64);
        let pinv = (laplacian + &j).try_inverse().expect("connected network") - j;
        DcFlowOracle {
            sensitivity: weighted * pinv,
        }
    }

    pub fn flows(&self, q: &[f64]) -> DVector<f64> {
        &self.sensitivity * DVector::from_column_slice(q)
    }
}

/// Nodal injection `H p + mu + w - d`.
pub fn injection(net: &PowerNetwork, p: &[f64], omega: &[f64]) -> Vec<f64> {
    let mut q: Vec<f64> = (0..net.n_bus())
        .map(|i| net.forecast[i] + omega[i] - net.demand[i])
        .collect();
    for (g, &bus) in net.gen_bus.iter().enumerate() {
        q[bus] += p[g];
    }
    q
}

/// Direct check of the original inequalities and the balance row.
pub fn directly_feasible(
    net: &PowerNetwork,
    oracle: &DcFlowOracle,
    p: &[f64],
    omega: &[f64],
    tol: f64,
) -> bool {
    let balance: f64 = net.demand.iter().sum::<f64>()
        - net.forecast.iter().sum::<f64>()
        - omega.iter().sum::<f64>();
    if (p.iter().sum::<f64>() - balance).abs() > 1e-8 {
        return false;
    }
    if (0..net.n_gen()).any(|i| p[i] > net.pmax[i] + tol || p[i] < net.pmin[i] - tol) {
        return false;
    }
    let flows = oracle.flows(&injection(net, p, omega));
    (0..net.n_branch()).all(|l| flows[l] <= net.fmax[l] + tol && flows[l] >= net.fmin[l] - tol)
}

/// Brute-force LP: enumerate every (n-1)-subset of inequality rows, solve
/// `[rows; e'] p = [rhs; balance]`, keep the feasible points, take the cheapest.
/// Rows are built from the oracle flows, not from the library's assembly.
pub struct VertexEnumeration {
    pub cost: f64,
    pub p: Vec<f64>,
}

pub fn enumerate_vertices(
    net: &PowerNetwork,
    oracle: &DcFlowOracle,
    omega: &[f64],
) -> Option<VertexEnumeration> {
    let n = net.n_gen();
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    for i in 0..n {
        let mut a = DVector::zeros(n);
        a[i] = 1.0;
        rows.push((a.clone(), net.pmax[i]));
        rows.push((-a, -net.pmin[i]));
    }
    // flow = G p + h with G = S H, h = S (mu + w - d)
    let zero = vec![0.0; n];
    let h = oracle.flows(&injection(net, &zero, omega));
    for l in 0..net.n_branch() {
        let g = DVector::from_iterator(
            n,
            net.gen_bus.iter().map(|&bus| oracle.sensitivity[(l, bus)]),
        );
        if net.fmax[l].is_finite() {
            rows.push((g.clone(), net.fmax[l] - h[l]));
        }
        if net.fmin[l].is_finite() {
            rows.push((-g, -net.fmin[l] + h[l]));
        }
    }
    let balance: f64 = net.demand.iter().sum::<f64>()
        - net.forecast.iter().sum::<f64>()
        - omega.iter().sum::<f64>();

    let mut best: Option<VertexEnumeration> = None;
    let mut subset = Vec::with_capacity(n.saturating_sub(1));
    visit_subsets(rows.len(), n - 1, 0, &mut subset, &mut |chosen| {
        let mut b = DMatrix::zeros(n, n);
        let mut rhs = DVector::zeros(n);
        for (k, &r) in chosen.iter().enumerate() {
            b.set_row(k, &rows[r].0.transpose());
            rhs[k] = rows[r].1;
        }
        b.row_mut(n - 1).fill(1.0);
        rhs[n - 1] = balance;
        // Any feasible solution costs at least the optimum, so a loose
        // singularity filter cannot produce a value below the true minimum.
        let Some(p) = b.clone().lu().solve(&rhs) else {
            return;
        };
        if !p.iter().all(|x| x.is_finite()) || (&b * &p - &rhs).amax() > 1e-9 {
            return;
        }
        if rows.iter().any(|(a, r)| a.dot(&p) > r + 1e-7) {
            return;
        }
        let cost: f64 = net.cost.iter().zip(p.iter()).map(|(c, x)| c * x).sum();
        if best.as_ref().is_none_or(|bst| cost < bst.cost) {
            best = Some(VertexEnumeration {
                cost,
                p: p.iter().copied().collect(),
            });
        }
    });
    best
}

fn visit_subsets(
    total: usize,
    size: usize,
    start: usize,
    chosen: &mut Vec<usize>,
    f: &mut dyn FnMut(&[usize]),
) {
    if chosen.len() == size {
        f(chosen);
        return;
    }
    let remaining = size - chosen.len();
    for r in start..total {
        if total - r < remaining {
            break;
        }
        chosen.push(r);
        visit_subsets(total, size, r + 1, chosen, f);
        chosen.pop();
    }
}

pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Reference constraint counts per case: (name, buses, branches, generators, constraints).
pub const CASE_TABLE: [(&str, usize, usize, usize, usize); 15] = [
    ("case3_lmbd", 3, 3, 3, 13),
    ("case5_pjm", 5, 6, 5, 23),
    ("case14_ieee", 14, 20, 5, 51),
    ("case24_ieee_rts", 24, 38, 33, 143),
    ("case30_ieee", 30, 41, 6, 95),
    ("case39_epri", 39, 46, 10, 113),
    ("case57_ieee", 57, 80, 7, 175),
    ("case73_ieee_rts", 73, 120, 99, 439),
    ("case118_ieee", 118, 186, 54, 481),
    ("case162_ieee_dtc", 162, 284, 12, 593),
    ("case200_activ", 200, 245, 38, 567),
    ("case240_pserc", 240, 448, 143, 1183),
    ("case300_ieee", 300, 411, 69, 961),
    ("case1888_rte", 1888, 2531, 290, 5643),
    ("case1951_rte", 1951, 2596, 366, 5925),
];
