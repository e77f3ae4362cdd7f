//! Vertex-returning LP solver for the DC-OPF and canonical basis extraction.
//!
//! The solver keeps a working set of `n - 1` inequality rows that, stacked
//! with the balance row, form the square basis matrix `B = [A_W; e']`. It runs
//! a dual simplex on that working set: every working set it visits is dual
//! feasible (the cost vector lies in the cone of the active normals), and each
//! pivot brings a violated row into the set. Because the cost does not depend
//! on the scenario, the nominal optimal working set is a valid start for any
//! scenario, so every solve starts from the same place.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{OpfProblem, RowLabel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Inequality feasibility, p.u.
    pub feasibility: f64,
    /// Power balance.
    pub equality: f64,
    /// Residual below which a row counts as active.
    pub active: f64,
    pub pivot: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feasibility: 1e-7,
            equality: 1e-8,
            active: 1e-7,
            pivot: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// An ordered set of `n - 1` row indices into the global row space of `A`.
/// Together with the balance row they define `B = [A_rows; e']`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Basis {
    n_gen: usize,
    rows: Vec<usize>,
}

impl Basis {
    pub fn new(n_gen: usize, mut rows: Vec<usize>) -> Result<Self> {
        if n_gen == 0 {
            return Err(Error::Domain("basis needs at least one generator".into()));
        }
        rows.sort_unstable();
        rows.dedup();
        if rows.len() != n_gen - 1 {
            return Err(Error::RankDeficient {
                found: rows.len(),
                needed: n_gen - 1,
            });
        }
        Ok(Basis { n_gen, rows })
    }

    pub fn n_gen(&self) -> usize {
        self.n_gen
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn labels(&self, prob: &OpfProblem) -> Vec<RowLabel> {
        self.rows.iter().map(|&r| prob.label(r)).collect()
    }

    /// `B = [A_rows; e']`.
    pub fn matrix(&self, prob: &OpfProblem) -> DMatrix<f64> {
        basis_matrix(prob, &self.rows)
    }

    pub fn factor(&self, prob: &OpfProblem) -> Result<FactoredBasis> {
        if self.n_gen != prob.n_gen() {
            return Err(Error::Domain(format!(
                "basis for {} generators used with a {}-generator problem",
                self.n_gen,
                prob.n_gen()
            )));
        }
        if let Some(&r) = self
            .rows
            .iter()
            .find(|&&r| r >= prob.n_rows() || !prob.is_present(r))
        {
            return Err(Error::Domain(format!(
                "row {r} is not part of the constraint system"
            )));
        }
        let matrix = self.matrix(prob);
        let inverse = invert(&matrix).ok_or(Error::SingularBasis)?;
        let identity = DMatrix::<f64>::identity(self.n_gen, self.n_gen);
        if (&inverse * &matrix - identity).amax() > 1e-8 {
            return Err(Error::SingularBasis);
        }
        Ok(FactoredBasis {
            basis: self.clone(),
            matrix,
            inverse,
        })
    }
}

/// A basis together with `B` and its inverse.
#[derive(Debug, Clone)]
pub struct FactoredBasis {
    pub basis: Basis,
    pub matrix: DMatrix<f64>,
    pub inverse: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub p: Vec<f64>,
    pub objective: f64,
    /// Every present row active at `p`, ascending.
    pub active_rows: Vec<usize>,
    /// Canonical basis, present iff optimal.
    pub basis: Option<Basis>,
}

impl LpSolution {
    fn without_solution(status: LpStatus) -> Self {
        LpSolution {
            status,
            p: Vec::new(),
            objective: f64::NAN,
            active_rows: Vec::new(),
            basis: None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

fn basis_matrix(prob: &OpfProblem, rows: &[usize]) -> DMatrix<f64> {
    let n = prob.n_gen();
    let mut b = DMatrix::zeros(n, n);
    for (k, &r) in rows.iter().enumerate() {
        b.set_row(k, &prob.row_vector(r).transpose());
    }
    b.row_mut(n - 1).fill(1.0);
    b
}

fn invert(matrix: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let inverse = matrix.clone().lu().try_inverse()?;
    inverse.iter().all(|x| x.is_finite()).then_some(inverse)
}

#[derive(Debug, Clone)]
struct WorkingSet {
    /// Row at each basis position `0..n-1`; position `n-1` is the balance row.
    rows: Vec<usize>,
    inverse: DMatrix<f64>,
}

enum Outcome {
    Optimal(DVector<f64>),
    Infeasible,
}

const REFACTOR_INTERVAL: usize = 50;
const DEGENERATE_PIVOTS_BEFORE_BLAND: usize = 30;

/// Reusable solver for one problem. Cheap to clone; one per worker thread.
#[derive(Debug, Clone)]
pub struct OpfSolver<'a> {
    prob: &'a OpfProblem,
    tol: Tolerances,
    start: WorkingSet,
    cost: DVector<f64>,
    dual_tol: f64,
}

pub fn solve_opf(prob: &OpfProblem, omega: &[f64]) -> Result<LpSolution> {
    OpfSolver::new(prob)?.solve(omega)
}

impl<'a> OpfSolver<'a> {
    pub fn new(prob: &'a OpfProblem) -> Result<Self> {
        Self::with_tolerances(prob, Tolerances::default())
    }

    pub fn with_tolerances(prob: &'a OpfProblem, tol: Tolerances) -> Result<Self> {
        let cost = DVector::from_column_slice(prob.cost());
        let scale = cost.amax().max(1.0);
        let mut solver = OpfSolver {
            prob,
            tol,
            start: merit_order_start(prob)?,
            cost,
            dual_tol: 1e-9 * scale,
        };
        // Start every solve from the nominal optimum when there is one.
        let zero = vec![0.0; prob.n_bus()];
        let shift = prob.flow_shift(&zero);
        let mut ws = solver.start.clone();
        if let Outcome::Optimal(_) =
            solver.dual_simplex(&mut ws, &shift, prob.balance_rhs(&zero))?
        {
            solver.start = ws;
        }
        Ok(solver)
    }

    pub fn problem(&self) -> &OpfProblem {
        self.prob
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tol
    }

    pub fn solve(&self, omega: &[f64]) -> Result<LpSolution> {
        let prob = self.prob;
        if omega.len() != prob.n_bus() {
            return Err(Error::Domain(format!(
                "scenario has {} entries, network has {} buses",
                omega.len(),
                prob.n_bus()
            )));
        }
        if omega.iter().any(|w| !w.is_finite()) {
            return Err(Error::Domain("scenario contains non-finite values".into()));
        }
        let shift = prob.flow_shift(omega);
        let balance = prob.balance_rhs(omega);
        let mut ws = self.start.clone();
        match self.dual_simplex(&mut ws, &shift, balance)? {
            Outcome::Infeasible => Ok(LpSolution::without_solution(LpStatus::Infeasible)),
            Outcome::Optimal(p) => {
                let p: Vec<f64> = p.iter().copied().collect();
                let active_rows = active_rows(prob, &p, &shift, self.tol.active);
                let basis = canonical_basis(prob, &active_rows)?;
                Ok(LpSolution {
                    status: LpStatus::Optimal,
                    objective: prob.objective(&p),
                    p,
                    active_rows,
                    basis: Some(basis),
                })
            }
        }
    }

    fn refactor(&self, ws: &mut WorkingSet) -> Result<()> {
        let b = basis_matrix(self.prob, &ws.rows);
        ws.inverse = invert(&b)
            .ok_or_else(|| Error::NumericalFailure("working basis became singular".into()))?;
        Ok(())
    }

    fn dual_simplex(
        &self,
        ws: &mut WorkingSet,
        shift: &DVector<f64>,
        balance: f64,
    ) -> Result<Outcome> {
        let prob = self.prob;
        let n = prob.n_gen();
        let n_rows = prob.n_rows();
        let tol = self.tol;

        let mut in_set = vec![false; n_rows];
        for &r in &ws.rows {
            in_set[r] = true;
        }
        let mut bland = false;
        let mut degenerate_run = 0;
        let mut since_refactor = 0;
        let mut verified = false;
        let max_iterations = 20 * (n_rows + n) + 1000;

        for _ in 0..max_iterations {
            let mut rhs = DVector::zeros(n);
            for (k, &r) in ws.rows.iter().enumerate() {
                rhs[k] = prob.row_rhs(r, shift);
            }
            rhs[n - 1] = balance;
            let p = &ws.inverse * &rhs;
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::NumericalFailure("non-finite iterate".into()));
            }

            let Some(entering) = self.entering_row(&p, shift, &in_set, bland) else {
                if (p.sum() - balance).abs() > tol.equality && !verified {
                    self.refactor(ws)?;
                    verified = true;
                    since_refactor = 0;
                    continue;
                }
                return Ok(Outcome::Optimal(p));
            };
            if prob.row_norm(entering) < 1e-14 {
                // A row with no generator sensitivity that is violated cannot be repaired.
                return Ok(Outcome::Infeasible);
            }

            let duals = ws.inverse.tr_mul(&self.cost);
            let alpha = ws.inverse.tr_mul(&prob.row_vector(entering));
            let pivot_tol = tol.pivot.max(1e-11 * alpha.amax());

            let mut leaving: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for k in 0..n - 1 {
                if alpha[k] <= pivot_tol {
                    continue;
                }
                let ratio = (-duals[k]).max(0.0) / alpha[k];
                let slack = 1e-12 * (1.0 + best_ratio.abs().min(1e12));
                let better = match leaving {
                    None => true,
                    Some(_) if ratio < best_ratio - slack => true,
                    Some(j) if ratio <= best_ratio + slack => {
                        if bland {
                            ws.rows[k] < ws.rows[j]
                        } else {
                            alpha[k] > alpha[j]
                        }
                    }
                    Some(_) => false,
                };
                if better {
                    leaving = Some(k);
                    best_ratio = ratio;
                }
            }
            let Some(k) = leaving else {
                return Ok(Outcome::Infeasible);
            };

            if best_ratio * alpha[k] <= self.dual_tol {
                degenerate_run += 1;
                if degenerate_run > DEGENERATE_PIVOTS_BEFORE_BLAND {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }

            // Replace row k of B by a_q: B'^-1 = B^-1 - B^-1 e_k (alpha - e_k)' / alpha_k.
            let column = ws.inverse.column(k).clone_owned();
            let mut direction = alpha.clone();
            direction[k] -= 1.0;
            let scale = -1.0 / alpha[k];
            ws.inverse.ger(scale, &column, &direction, 1.0);
            in_set[ws.rows[k]] = false;
            in_set[entering] = true;
            ws.rows[k] = entering;
            verified = false;

            since_refactor += 1;
            if since_refactor >= REFACTOR_INTERVAL {
                self.refactor(ws)?;
                since_refactor = 0;
            }
        }
        Err(Error::NumericalFailure("iteration limit reached".into()))
    }

    /// Most violated row (scaled by its norm), or the lowest-index violated row under Bland's rule.
    fn entering_row(
        &self,
        p: &DVector<f64>,
        shift: &DVector<f64>,
        in_set: &[bool],
        bland: bool,
    ) -> Option<usize> {
        let prob = self.prob;
        let (n, m) = (prob.n_gen(), prob.n_branch());
        let tol = self.tol.feasibility;
        let rhs = prob.rhs();
        let flows = prob.gen_ptdf() * p;

        let mut best: Option<(usize, f64)> = None;
        let mut consider = |row: usize, violation: f64| -> bool {
            if in_set[row] || violation <= tol {
                return false;
            }
            if bland {
                best = Some((row, violation));
                return true;
            }
            let norm = prob.row_norm(row);
            let score = if norm < 1e-14 {
                f64::INFINITY
            } else {
                violation / norm
            };
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((row, score));
            }
            false
        };
        for i in 0..n {
            if consider(i, p[i] - rhs[i]) {
                return best.map(|b| b.0);
            }
        }
        for i in 0..n {
            if consider(n + i, -p[i] - rhs[n + i]) {
                return best.map(|b| b.0);
            }
        }
        for l in 0..m {
            let row = 2 * n + l;
            if rhs[row].is_finite() && consider(row, flows[l] - prob.row_rhs(row, shift)) {
                return best.map(|b| b.0);
            }
        }
        for l in 0..m {
            let row = 2 * n + m + l;
            if rhs[row].is_finite() && consider(row, -flows[l] - prob.row_rhs(row, shift)) {
                return best.map(|b| b.0);
            }
        }
        best.map(|b| b.0)
    }
}

/// Economic dispatch ignoring the network: generators below the marginal unit
/// in cost order sit at their upper bound, those above at their lower bound.
/// Any such working set is dual feasible.
fn merit_order_start(prob: &OpfProblem) -> Result<WorkingSet> {
    let n = prob.n_gen();
    let rhs = prob.rhs();
    let (pmax, pmin): (Vec<f64>, Vec<f64>) = (0..n).map(|i| (rhs[i], -rhs[n + i])).unzip();
    if pmax.iter().chain(&pmin).any(|x| !x.is_finite()) {
        return Err(Error::Domain("generator bounds must be finite".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| prob.cost()[a].total_cmp(&prob.cost()[b]).then(a.cmp(&b)));

    let mut remaining = prob.balance_rhs_base() - pmin.iter().sum::<f64>();
    let mut marginal = *order.last().expect("at least one generator");
    for &g in &order {
        let span = pmax[g] - pmin[g];
        if remaining <= span {
            marginal = g;
            break;
        }
        remaining -= span;
    }
    let position_in_order: Vec<usize> = {
        let mut pos = vec![0; n];
        for (k, &g) in order.iter().enumerate() {
            pos[g] = k;
        }
        pos
    };

    let mut rows = Vec::with_capacity(n - 1);
    let mut inverse = DMatrix::zeros(n, n);
    for g in (0..n).filter(|&g| g != marginal) {
        let upper = position_in_order[g] < position_in_order[marginal];
        let (row, sign) = if upper { (g, 1.0) } else { (n + g, -1.0) };
        let k = rows.len();
        rows.push(row);
        // B x = r: x_g = sign r_k, x_marginal = r_balance - sum of the others.
        inverse[(g, k)] = sign;
        inverse[(marginal, k)] = -sign;
    }
    inverse[(marginal, n - 1)] = 1.0;
    Ok(WorkingSet { rows, inverse })
}

fn active_rows(prob: &OpfProblem, p: &[f64], shift: &DVector<f64>, tol: f64) -> Vec<usize> {
    let (n, m) = (prob.n_gen(), prob.n_branch());
    let flows = prob.gen_ptdf() * DVector::from_column_slice(p);
    let rhs = prob.rhs();
    let mut active = Vec::new();
    for i in 0..n {
        if (p[i] - rhs[i]).abs() <= tol {
            active.push(i);
        }
    }
    for i in 0..n {
        if (-p[i] - rhs[n + i]).abs() <= tol {
            active.push(n + i);
        }
    }
    for l in 0..m {
        let row = 2 * n + l;
        if rhs[row].is_finite() && (flows[l] - prob.row_rhs(row, shift)).abs() <= tol {
            active.push(row);
        }
    }
    for l in 0..m {
        let row = 2 * n + m + l;
        if rhs[row].is_finite() && (-flows[l] - prob.row_rhs(row, shift)).abs() <= tol {
            active.push(row);
        }
    }
    active
}

/// Canonical basis of the vertex `p` at scenario `omega`: the lowest-indexed
/// active rows that keep `[rows; e']` full rank.
pub fn extract_basis(prob: &OpfProblem, p: &[f64], omega: &[f64]) -> Result<Basis> {
    let shift = prob.flow_shift(omega);
    let active = active_rows(prob, p, &shift, Tolerances::default().active);
    canonical_basis(prob, &active)
}

/// Greedy rank selection over `active` (ascending). Generator rows come
/// first in the global numbering and are unit vectors, so they are handled
/// combinatorially; flow rows are orthogonalised in the coordinates of the
/// generators left free.
fn canonical_basis(prob: &OpfProblem, active: &[usize]) -> Result<Basis> {
    let n = prob.n_gen();
    let needed = n - 1;
    let mut selected = Vec::with_capacity(needed);
    let mut fixed = vec![false; n];
    let mut flow_rows = Vec::new();
    for &row in active {
        match prob.label(row) {
            RowLabel::GenUpper(i) | RowLabel::GenLower(i) => {
                if selected.len() < needed && !fixed[i] {
                    fixed[i] = true;
                    selected.push(row);
                }
            }
            _ => flow_rows.push(row),
        }
    }

    if selected.len() < needed {
        let free: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
        let dim = free.len();
        let mut ortho: Vec<DVector<f64>> =
            vec![DVector::from_element(dim, 1.0 / (dim as f64).sqrt())];
        for &row in &flow_rows {
            if selected.len() == needed {
                break;
            }
            let full = prob.row_vector(row);
            let mut r = DVector::from_iterator(dim, free.iter().map(|&i| full[i]));
            let norm0 = r.norm();
            if norm0 <= 1e-12 {
                continue;
            }
            for _ in 0..2 {
                for q in &ortho {
                    let proj = q.dot(&r);
                    r.axpy(-proj, q, 1.0);
                }
            }
            let norm = r.norm();
            if norm > 1e-8 * norm0 {
                ortho.push(r / norm);
                selected.push(row);
            }
        }
    }

    if selected.len() < needed {
        return Err(Error::RankDeficient {
            found: selected.len(),
            needed,
        });
    }
    Basis::new(n, selected)
}
