//! Scenario sampling, basis discovery, the rate-of-discovery coverage test and
//! ensemble construction from the most frequent bases.

use std::collections::HashMap;
use std::io::Write;

use log::info;
use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{OpfProblem, PowerNetwork, RowLabel};
use crate::policy::{make_policy, EnsembleMember, EnsemblePolicy};
use crate::solver::{Basis, LpSolution, OpfSolver};

/// RNG stream used for training samples.
pub const TRAINING_STREAM: u64 = 0;
/// RNG stream used for out-of-sample tests.
pub const TEST_STREAM: u64 = 1;

/// Independent zero-mean Gaussian deviation per bus with `sigma_i = scaling * |d_i|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyModel {
    pub sigma_scaling: f64,
    pub sigma: Vec<f64>,
    pub seed: u64,
}

impl UncertaintyModel {
    pub fn from_network(net: &PowerNetwork, sigma_scaling: f64, seed: u64) -> Result<Self> {
        if !sigma_scaling.is_finite() || sigma_scaling < 0.0 {
            return Err(Error::Domain(format!(
                "sigma scaling must be >= 0, got {sigma_scaling}"
            )));
        }
        Ok(UncertaintyModel {
            sigma_scaling,
            sigma: net.demand.iter().map(|d| sigma_scaling * d.abs()).collect(),
            seed,
        })
    }

    /// Sample `index` of `stream`. Each sample has its own position in the
    /// ChaCha keystream, so draws do not depend on evaluation order.
    pub fn sample(&self, stream: u64, index: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng.set_word_pos((index as u128) << 32);
        self.sigma
            .iter()
            .map(|&s| {
                let z: f64 = rng.sample(StandardNormal);
                s * z
            })
            .collect()
    }

    pub fn samples(&self, stream: u64, range: std::ops::Range<usize>) -> Vec<Vec<f64>> {
        range.map(|i| self.sample(stream, i)).collect()
    }
}

/// The first `k` training samples.
pub fn sample_omega(model: &UncertaintyModel, k: usize) -> Vec<Vec<f64>> {
    model.samples(TRAINING_STREAM, 0..k)
}

/// Solve `count` scenarios of `stream` in parallel; results in sample order.
pub fn solve_scenarios(
    prob: &OpfProblem,
    model: &UncertaintyModel,
    stream: u64,
    count: usize,
) -> Result<Vec<LpSolution>> {
    let solver = OpfSolver::new(prob)?;
    (0..count)
        .into_par_iter()
        .map(|i| {
            solver
                .solve(&model.sample(stream, i))
                .map_err(|e| Error::Sample {
                    index: i,
                    source: Box::new(e),
                })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub sample_index: usize,
    /// `None` when the scenario is infeasible.
    pub basis_id: Option<usize>,
    /// First appearance of this basis in the run.
    pub is_new: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub id: usize,
    pub basis: Basis,
    /// Occurrences among the first M samples.
    pub count: usize,
    /// Occurrences among the window samples.
    pub window_count: usize,
    pub first_seen: usize,
}

/// Outcome of solving the M + W learning samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryTrace {
    pub m: usize,
    pub w: usize,
    pub records: Vec<TraceRecord>,
    /// Ids are assigned in order of first appearance.
    pub catalog: Vec<CatalogEntry>,
}

impl DiscoveryTrace {
    /// Assemble a trace from per-sample optimal bases (`None` for infeasible samples).
    pub fn from_bases(bases: Vec<Option<Basis>>, m: usize) -> Result<Self> {
        if m == 0 || m > bases.len() {
            return Err(Error::Domain(format!(
                "training count {m} outside 1..={}",
                bases.len()
            )));
        }
        let w = bases.len() - m;
        let mut ids: HashMap<Basis, usize> = HashMap::new();
        let mut catalog: Vec<CatalogEntry> = Vec::new();
        let mut records = Vec::with_capacity(bases.len());
        for (i, basis) in bases.into_iter().enumerate() {
            let Some(basis) = basis else {
                records.push(TraceRecord {
                    sample_index: i,
                    basis_id: None,
                    is_new: false,
                });
                continue;
            };
            let mut is_new = false;
            let id = *ids.entry(basis.clone()).or_insert_with(|| {
                is_new = true;
                catalog.push(CatalogEntry {
                    id: catalog.len(),
                    basis,
                    count: 0,
                    window_count: 0,
                    first_seen: i,
                });
                catalog.len() - 1
            });
            if i < m {
                catalog[id].count += 1;
            } else {
                catalog[id].window_count += 1;
            }
            records.push(TraceRecord {
                sample_index: i,
                basis_id: Some(id),
                is_new,
            });
        }
        Ok(DiscoveryTrace {
            m,
            w,
            records,
            catalog,
        })
    }

    pub fn total(&self) -> usize {
        self.records.len()
    }

    /// Bases observed among the first M samples.
    pub fn observed(&self) -> impl Iterator<Item = &CatalogEntry> {
        self.catalog.iter().filter(|e| e.count > 0)
    }

    /// `pi_hat` of a catalog entry.
    pub fn pi_hat(&self, entry: &CatalogEntry) -> f64 {
        entry.count as f64 / self.m as f64
    }

    pub fn infeasible_count(&self) -> usize {
        self.records.iter().filter(|r| r.basis_id.is_none()).count()
    }

    pub fn training_infeasible_count(&self) -> usize {
        self.records[..self.m]
            .iter()
            .filter(|r| r.basis_id.is_none())
            .count()
    }

    /// Distinct bases among the first `k` samples.
    pub fn unique_bases_at(&self, k: usize) -> usize {
        self.catalog.iter().filter(|e| e.first_seen < k).count()
    }

    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["sample_index", "basis_id", "is_new"])?;
        for r in &self.records {
            let id = r
                .basis_id
                .map_or_else(|| "INFEASIBLE".to_string(), |id| id.to_string());
            wtr.write_record([r.sample_index.to_string(), id, r.is_new.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// One row per catalog basis; `row_labels` requires the problem the trace was learned on.
    pub fn write_catalog_csv<W: Write>(&self, prob: &OpfProblem, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["basis_id", "count", "pi_hat", "row_labels"])?;
        for e in &self.catalog {
            let labels: Vec<String> = e
                .basis
                .labels(prob)
                .iter()
                .map(RowLabel::to_string)
                .collect();
            wtr.write_record([
                e.id.to_string(),
                e.count.to_string(),
                self.pi_hat(e).to_string(),
                labels.join("|"),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Draw and solve `m + w` training samples and record the basis of each.
pub fn run_learning(
    prob: &OpfProblem,
    model: &UncertaintyModel,
    m: usize,
    w: usize,
) -> Result<DiscoveryTrace> {
    if m == 0 || w == 0 {
        return Err(Error::Domain(
            "training and window sizes must be at least 1".into(),
        ));
    }
    let solutions = solve_scenarios(prob, model, TRAINING_STREAM, m + w)?;
    let trace = DiscoveryTrace::from_bases(solutions.into_iter().map(|s| s.basis).collect(), m)?;
    info!(
        "learned {} bases from {} samples ({} infeasible)",
        trace.catalog.len(),
        m + w,
        trace.infeasible_count()
    );
    Ok(trace)
}

/// Fraction of window samples whose basis was not observed among the first M.
/// Infeasible samples count as not new.
pub fn rate_of_discovery(trace: &DiscoveryTrace) -> Result<f64> {
    if trace.w == 0 || trace.records.len() < trace.m + trace.w {
        return Err(Error::InsufficientSamples {
            needed: trace.w.max(1),
            available: trace.records.len().saturating_sub(trace.m),
        });
    }
    let window = &trace.records[trace.m..trace.m + trace.w];
    let novel = window
        .iter()
        .filter(|r| {
            r.basis_id
                .is_some_and(|id| trace.catalog[id].first_seen >= trace.m)
        })
        .count();
    Ok(novel as f64 / trace.w as f64)
}

/// Smallest integer strictly greater than `(8 / epsilon) ln(1 / delta)`.
pub fn window_size(epsilon: f64, delta: f64) -> Result<usize> {
    let open_unit = |x: f64| x > 0.0 && x < 1.0;
    if !open_unit(epsilon) || !open_unit(delta) {
        return Err(Error::Domain(format!(
            "epsilon and delta must lie in (0, 1), got {epsilon} and {delta}"
        )));
    }
    let bound = 8.0 / epsilon * (1.0 / delta).ln();
    Ok(bound.floor() as usize + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoverageOutcome {
    Success,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageVerdict {
    pub epsilon: f64,
    pub delta: f64,
    pub window: usize,
    pub rate_of_discovery: f64,
    pub outcome: CoverageOutcome,
}

/// Success when the rate of discovery is strictly below `epsilon / 2`: then,
/// with confidence `1 - delta`, the unobserved bases carry at most `epsilon`
/// probability mass.
pub fn coverage_test(trace: &DiscoveryTrace, epsilon: f64, delta: f64) -> Result<CoverageVerdict> {
    let required = window_size(epsilon, delta)?;
    if trace.w < required {
        return Err(Error::WindowTooSmall {
            window: trace.w,
            required,
        });
    }
    let rate = rate_of_discovery(trace)?;
    Ok(CoverageVerdict {
        epsilon,
        delta,
        window: trace.w,
        rate_of_discovery: rate,
        outcome: if rate < epsilon / 2.0 {
            CoverageOutcome::Success
        } else {
            CoverageOutcome::Inconclusive
        },
    })
}

/// Catalog entries observed among the first M samples, most frequent first;
/// equal counts keep first-observation order.
pub fn ranked_bases(trace: &DiscoveryTrace) -> Vec<&CatalogEntry> {
    let mut ranked: Vec<&CatalogEntry> = trace.observed().collect();
    ranked.sort_by(|a, b| b.count.cmp(&a.count).then(a.first_seen.cmp(&b.first_seen)));
    ranked
}

/// Ensemble of the `k` most frequent training bases (fewer if the catalog is smaller).
pub fn top_k_ensemble(
    trace: &DiscoveryTrace,
    prob: &OpfProblem,
    k: usize,
) -> Result<EnsemblePolicy> {
    if k == 0 {
        return Err(Error::Domain("ensemble size must be at least 1".into()));
    }
    let members = ranked_bases(trace)
        .into_iter()
        .take(k)
        .map(|e| {
            Ok(EnsembleMember {
                policy: make_policy(prob, &e.basis)?,
                probability: trace.pi_hat(e),
                basis_id: e.id,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EnsemblePolicy::new(members)
}

/// Empirical check of the coverage guarantee on a synthetic categorical
/// distribution whose unobserved categories carry `tail_mass`. Returns the
/// fraction of trials in which the windowed rate of discovery fell below
/// `epsilon / 2` even though the unobserved mass exceeds `epsilon`.
pub fn coverage_guarantee_montecarlo(
    num_categories: usize,
    tail_mass: f64,
    epsilon: f64,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let w = window_size(epsilon, delta)?;
    if !(tail_mass > epsilon && tail_mass <= 1.0) {
        return Err(Error::Domain(format!(
            "tail mass {tail_mass} must lie in (epsilon, 1] with epsilon = {epsilon}"
        )));
    }
    if trials == 0 {
        return Err(Error::Domain("at least one trial is required".into()));
    }
    let all_unobserved = tail_mass >= 1.0;
    if num_categories < if all_unobserved { 1 } else { 2 } {
        return Err(Error::Domain(format!(
            "{num_categories} categories cannot split the mass"
        )));
    }
    // Categories [0, n_unobserved) are unobserved and share tail_mass equally.
    let n_unobserved = if all_unobserved {
        num_categories
    } else {
        (num_categories / 2).max(1)
    };
    let n_observed = num_categories - n_unobserved;
    let weights: Vec<f64> = (0..num_categories)
        .map(|c| {
            if c < n_unobserved {
                tail_mass / n_unobserved as f64
            } else {
                (1.0 - tail_mass) / n_observed as f64
            }
        })
        .collect();
    let dist = WeightedIndex::new(&weights).map_err(|e| Error::Domain(e.to_string()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0usize;
    for _ in 0..trials {
        let novel = (0..w)
            .filter(|_| dist.sample(&mut rng) < n_unobserved)
            .count();
        if (novel as f64 / w as f64) < epsilon / 2.0 {
            violations += 1;
        }
    }
    Ok(violations as f64 / trials as f64)
}
