//! Affine dispatch policies from bases, generator classification and the
//! ensemble policy that picks the cheapest feasible member.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{OpfProblem, RowLabel};
use crate::solver::{Basis, Tolerances};

/// `rho(w) = offset + gain w`, valid wherever the basis stays feasible.
#[derive(Debug, Clone)]
pub struct BasisPolicy {
    basis: Basis,
    /// n x v.
    gain: DMatrix<f64>,
    offset: DVector<f64>,
    /// `B^-1`, used to evaluate from the flow shift `M w` in O(n^2).
    inverse: DMatrix<f64>,
}

pub fn make_policy(prob: &OpfProblem, basis: &Basis) -> Result<BasisPolicy> {
    let factored = basis.factor(prob)?;
    let n = prob.n_gen();
    let v = prob.n_bus();

    let mut rhs = DVector::zeros(n);
    let mut sensitivity = DMatrix::zeros(n, v);
    for (k, &row) in basis.rows().iter().enumerate() {
        rhs[k] = prob.rhs()[row];
        sensitivity.set_row(k, &prob.c_row(row).transpose());
    }
    rhs[n - 1] = prob.balance_rhs_base();
    sensitivity.row_mut(n - 1).fill(-1.0);

    Ok(BasisPolicy {
        basis: basis.clone(),
        offset: &factored.inverse * rhs,
        gain: &factored.inverse * sensitivity,
        inverse: factored.inverse,
    })
}

impl BasisPolicy {
    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn gain(&self) -> &DMatrix<f64> {
        &self.gain
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    pub fn eval(&self, omega: &[f64]) -> Vec<f64> {
        let p = &self.offset + &self.gain * DVector::from_column_slice(omega);
        p.iter().copied().collect()
    }

    /// Same as [`eval`](Self::eval), given `shift = M w` and `total = e'w`.
    pub fn eval_from_shift(&self, shift: &DVector<f64>, total: f64) -> DVector<f64> {
        let n = self.offset.len();
        let n_gen = self.basis.n_gen();
        let mut delta = DVector::zeros(n);
        for (k, &row) in self.basis.rows().iter().enumerate() {
            let layout = row_layout(row, n_gen, shift.len());
            delta[k] = match layout {
                RowLabel::GenUpper(_) | RowLabel::GenLower(_) => 0.0,
                RowLabel::FlowUpper(l) => -shift[l],
                RowLabel::FlowLower(l) => shift[l],
            };
        }
        delta[n - 1] = -total;
        &self.offset + &self.inverse * delta
    }
}

fn row_layout(row: usize, n_gen: usize, n_branch: usize) -> RowLabel {
    if row < n_gen {
        RowLabel::GenUpper(row)
    } else if row < 2 * n_gen {
        RowLabel::GenLower(row - n_gen)
    } else if row < 2 * n_gen + n_branch {
        RowLabel::FlowUpper(row - 2 * n_gen)
    } else {
        RowLabel::FlowLower(row - 2 * n_gen - n_branch)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorClassification {
    pub at_upper: Vec<usize>,
    pub at_lower: Vec<usize>,
    pub varying: Vec<usize>,
}

/// Generators pinned at a bound by the basis, and the ones left to vary.
pub fn classify_generators(basis: &Basis) -> GeneratorClassification {
    let n = basis.n_gen();
    let mut pinned = vec![false; n];
    let mut out = GeneratorClassification {
        at_upper: Vec::new(),
        at_lower: Vec::new(),
        varying: Vec::new(),
    };
    for &row in basis.rows() {
        if row < n {
            out.at_upper.push(row);
            pinned[row] = true;
        } else if row < 2 * n {
            out.at_lower.push(row - n);
            pinned[row - n] = true;
        }
    }
    out.varying = (0..n).filter(|&i| !pinned[i]).collect();
    out
}

/// Whether `p` lies in the feasible set at `omega`.
pub fn check_feasible(prob: &OpfProblem, p: &[f64], omega: &[f64]) -> bool {
    let shift = prob.flow_shift(omega);
    let total: f64 = omega.iter().sum();
    feasible_with_shift(prob, p, &shift, total, &Tolerances::default())
}

fn feasible_with_shift(
    prob: &OpfProblem,
    p: &[f64],
    shift: &DVector<f64>,
    total: f64,
    tol: &Tolerances,
) -> bool {
    if p.len() != prob.n_gen() || p.iter().any(|x| !x.is_finite()) {
        return false;
    }
    let balance = prob.balance_rhs_base() - total;
    let sum: f64 = p.iter().sum();
    if (sum - balance).abs() > tol.equality {
        return false;
    }
    // generator bounds first; they are cheap and reject most infeasible outputs
    let n = prob.n_gen();
    let rhs = prob.rhs();
    if (0..n).any(|i| p[i] - rhs[i] > tol.feasibility || -p[i] - rhs[n + i] > tol.feasibility) {
        return false;
    }
    prob.max_violation(p, shift) <= tol.feasibility
}

/// Whether `cost` matches the LP optimum closely enough to count as optimal.
pub fn cost_matches(cost: f64, optimum: f64) -> bool {
    (cost - optimum).abs() <= 1e-6 * optimum.abs().max(1.0)
}

#[derive(Debug, Clone)]
pub struct EnsembleMember {
    pub policy: BasisPolicy,
    /// Empirical probability over the training samples.
    pub probability: f64,
    /// Identifier of the basis in the learning catalog.
    pub basis_id: usize,
}

#[derive(Debug, Clone)]
pub struct EnsemblePolicy {
    members: Vec<EnsembleMember>,
    tol: Tolerances,
}

/// Output of the ensemble: the dispatch and the index of the member that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleChoice {
    pub p: Vec<f64>,
    pub chosen: usize,
    pub cost: f64,
}

impl EnsemblePolicy {
    pub fn new(members: Vec<EnsembleMember>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Domain("ensemble needs at least one member".into()));
        }
        for (i, m) in members.iter().enumerate() {
            if !(0.0..=1.0).contains(&m.probability) {
                return Err(Error::Domain(format!(
                    "member {i} has probability {}",
                    m.probability
                )));
            }
            if i > 0 && m.probability > members[i - 1].probability {
                return Err(Error::Domain(
                    "member probabilities must be non-increasing".into(),
                ));
            }
            if members[..i]
                .iter()
                .any(|o| o.policy.basis == m.policy.basis)
            {
                return Err(Error::Domain(format!(
                    "member {i} repeats an earlier basis"
                )));
            }
        }
        Ok(EnsemblePolicy {
            members,
            tol: Tolerances::default(),
        })
    }

    pub fn members(&self) -> &[EnsembleMember] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// The ensemble formed by the first `k` members.
    pub fn truncated(&self, k: usize) -> EnsemblePolicy {
        EnsemblePolicy {
            members: self.members[..k.clamp(1, self.members.len())].to_vec(),
            tol: self.tol,
        }
    }

    /// Cost of each member's output at `omega`, or `None` where it is infeasible.
    pub fn member_costs(&self, prob: &OpfProblem, omega: &[f64]) -> Vec<Option<f64>> {
        let shift = prob.flow_shift(omega);
        let total: f64 = omega.iter().sum();
        self.members
            .iter()
            .map(|m| {
                let p = m.policy.eval_from_shift(&shift, total);
                feasible_with_shift(prob, p.as_slice(), &shift, total, &self.tol)
                    .then(|| prob.objective(p.as_slice()))
            })
            .collect()
    }

    /// The member chosen by each prefix of the ensemble: entry `k - 1` is the
    /// choice of the first `k` members. A member is checked for feasibility
    /// only when it would be cheaper than the current choice.
    pub fn prefix_choices(&self, prob: &OpfProblem, omega: &[f64]) -> Vec<Option<(usize, f64)>> {
        let shift = prob.flow_shift(omega);
        let total: f64 = omega.iter().sum();
        let mut best: Option<(usize, f64)> = None;
        let mut out = Vec::with_capacity(self.members.len());
        for (i, m) in self.members.iter().enumerate() {
            let p = m.policy.eval_from_shift(&shift, total);
            let cost = prob.objective(p.as_slice());
            if best.is_none_or(|(_, b)| cost < b)
                && feasible_with_shift(prob, p.as_slice(), &shift, total, &self.tol)
            {
                best = Some((i, cost));
            }
            out.push(best);
        }
        out
    }

    pub fn eval(&self, prob: &OpfProblem, omega: &[f64]) -> Result<EnsembleChoice> {
        let (chosen, cost) = self
            .prefix_choices(prob, omega)
            .last()
            .copied()
            .flatten()
            .ok_or(Error::NoFeasibleBasis)?;
        Ok(EnsembleChoice {
            p: self.members[chosen].policy.eval(omega),
            chosen,
            cost,
        })
    }
}

pub fn ensemble_eval(
    ens: &EnsemblePolicy,
    prob: &OpfProblem,
    omega: &[f64],
) -> Result<EnsembleChoice> {
    ens.eval(prob, omega)
}

/// Index of the cheapest feasible entry among the first `k`; ties go to the lower index.
pub fn cheapest(costs: &[Option<f64>], k: usize) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in costs.iter().take(k).enumerate() {
        if let Some(c) = *c {
            if best.is_none_or(|(_, b)| c < b) {
                best = Some((i, c));
            }
        }
    }
    best.map(|b| b.0)
}

pub const ENSEMBLE_SCHEMA_VERSION: u32 = 1;

/// Serialized ensemble: enough to reload and evaluate without re-learning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleDocument {
    pub schema_version: u32,
    pub case_id: String,
    pub case_digest: String,
    pub sigma_scaling: f64,
    pub seed: u64,
    pub n_gen: usize,
    pub n_bus: usize,
    pub members: Vec<MemberDocument>,
    pub metadata: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberDocument {
    pub basis_id: usize,
    pub rows: Vec<RowLabel>,
    pub probability: f64,
    pub offset: Vec<f64>,
    /// Row-major, n rows of v entries.
    pub gain: Vec<Vec<f64>>,
}

impl EnsembleDocument {
    pub fn from_ensemble(
        ens: &EnsemblePolicy,
        prob: &OpfProblem,
        case_id: &str,
        case_digest: &str,
        sigma_scaling: f64,
        seed: u64,
        metadata: serde_json::Value,
    ) -> Self {
        let members = ens
            .members
            .iter()
            .map(|m| MemberDocument {
                basis_id: m.basis_id,
                rows: m.policy.basis.labels(prob),
                probability: m.probability,
                offset: m.policy.offset.iter().copied().collect(),
                gain: m
                    .policy
                    .gain
                    .row_iter()
                    .map(|r| r.iter().copied().collect())
                    .collect(),
            })
            .collect();
        EnsembleDocument {
            schema_version: ENSEMBLE_SCHEMA_VERSION,
            case_id: case_id.to_string(),
            case_digest: case_digest.to_string(),
            sigma_scaling,
            seed,
            n_gen: prob.n_gen(),
            n_bus: prob.n_bus(),
            members,
            metadata,
        }
    }

    /// Rebuild the ensemble for `prob`. The stored offsets must agree with
    /// the ones recomputed from the basis rows.
    pub fn to_ensemble(&self, prob: &OpfProblem) -> Result<EnsemblePolicy> {
        if self.schema_version != ENSEMBLE_SCHEMA_VERSION {
            return Err(Error::SchemaMismatch {
                expected: ENSEMBLE_SCHEMA_VERSION.to_string(),
                found: self.schema_version.to_string(),
            });
        }
        if self.n_gen != prob.n_gen() || self.n_bus != prob.n_bus() {
            return Err(Error::EnsembleCaseMismatch {
                expected: format!("{} generators, {} buses", prob.n_gen(), prob.n_bus()),
                found: format!("{} generators, {} buses", self.n_gen, self.n_bus),
            });
        }
        let mut members = Vec::with_capacity(self.members.len());
        for doc in &self.members {
            let rows = doc
                .rows
                .iter()
                .map(|&l| prob.checked_row(l))
                .collect::<Result<_>>()?;
            let basis = Basis::new(prob.n_gen(), rows)?;
            let policy = make_policy(prob, &basis)?;
            let drift = policy
                .offset
                .iter()
                .zip(&doc.offset)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if doc.offset.len() != prob.n_gen() || drift > 1e-8 * (1.0 + policy.offset.amax()) {
                return Err(Error::EnsembleCaseMismatch {
                    expected: "offsets consistent with the network".into(),
                    found: format!("basis {} offset differs by {drift:e}", doc.basis_id),
                });
            }
            members.push(EnsembleMember {
                policy,
                probability: doc.probability,
                basis_id: doc.basis_id,
            });
        }
        EnsemblePolicy::new(members)
    }
}
