//! Out-of-sample assessment of learned ensembles and table rendering.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learning::{
    ranked_bases, solve_scenarios, top_k_ensemble, CatalogEntry, CoverageVerdict, DiscoveryTrace,
    UncertaintyModel, TEST_STREAM, TRAINING_STREAM,
};
use crate::network::{OpfProblem, PowerNetwork};
use crate::policy::{cost_matches, EnsemblePolicy};
use crate::solver::{Basis, LpSolution};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Sample counts at which coverage and unique-basis counts are reported.
pub const CHECKPOINTS: [usize; 6] = [100, 200, 500, 1000, 2500, 5000];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KRecord {
    pub k: usize,
    /// Members actually used (the catalog may be smaller than `k`).
    pub effective_k: usize,
    pub prop_optimal: f64,
    pub prop_feasible: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSummary {
    pub buses: usize,
    pub branches: usize,
    pub generators: usize,
    pub constraints: usize,
}

impl NetworkSummary {
    pub fn of(net: &PowerNetwork) -> Self {
        NetworkSummary {
            buses: net.n_bus(),
            branches: net.n_branch(),
            generators: net.n_gen(),
            constraints: net.constraint_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub case_id: String,
    pub sigma_scaling: f64,
    pub seed: u64,
    pub network: NetworkSummary,
    pub training_stream: u64,
    pub test_stream: u64,
    pub n_test: usize,
    /// Test scenarios for which the LP itself is infeasible; excluded from all proportions.
    pub infeasible_lp_count: usize,
    /// Training samples (M + W) and how many of them were infeasible.
    pub training_samples: usize,
    pub training_infeasible: usize,
    pub catalog_size: usize,
    pub per_k: Vec<KRecord>,
    /// (samples seen, fraction of feasible test scenarios whose basis was already observed).
    pub coverage_curve: Vec<(usize, f64)>,
    /// (samples seen, distinct bases observed).
    pub unique_bases_curve: Vec<(usize, usize)>,
    pub coverage: Option<CoverageVerdict>,
    pub metadata: BTreeMap<String, String>,
}

impl EvaluationReport {
    /// Optimal implies feasible, and both proportions grow with K.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Domain(msg));
        for (i, r) in self.per_k.iter().enumerate() {
            if r.prop_optimal > r.prop_feasible {
                return fail(format!(
                    "K={}: optimal {} above feasible {}",
                    r.k, r.prop_optimal, r.prop_feasible
                ));
            }
            if i > 0 {
                let prev = &self.per_k[i - 1];
                if r.prop_optimal < prev.prop_optimal || r.prop_feasible < prev.prop_feasible {
                    return fail(format!(
                        "proportions decrease from K={} to K={}",
                        prev.k, r.k
                    ));
                }
            }
        }
        for pair in self.coverage_curve.windows(2) {
            if pair[1].1 < pair[0].1 {
                return fail("coverage curve decreases".into());
            }
        }
        if self
            .coverage_curve
            .iter()
            .any(|&(_, c)| !(0.0..=1.0).contains(&c))
        {
            return fail("coverage outside [0, 1]".into());
        }
        Ok(())
    }
}

/// The LP result of one held-out scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutSample {
    pub basis: Option<Basis>,
    pub objective: f64,
}

impl From<LpSolution> for HoldoutSample {
    fn from(sol: LpSolution) -> Self {
        HoldoutSample {
            objective: sol.objective,
            basis: sol.basis,
        }
    }
}

/// Solve `n_test` scenarios from the test stream.
pub fn solve_holdout(
    prob: &OpfProblem,
    model: &UncertaintyModel,
    n_test: usize,
) -> Result<Vec<HoldoutSample>> {
    Ok(solve_scenarios(prob, model, TEST_STREAM, n_test)?
        .into_iter()
        .map(HoldoutSample::from)
        .collect())
}

/// For each checkpoint, the fraction of feasible holdout scenarios whose
/// basis was observed among the first `checkpoint` training samples.
pub fn coverage_curve(
    catalog: &[CatalogEntry],
    checkpoints: &[usize],
    holdout: &[HoldoutSample],
) -> Vec<(usize, f64)> {
    let first_seen: std::collections::HashMap<&Basis, usize> =
        catalog.iter().map(|e| (&e.basis, e.first_seen)).collect();
    // Index of the training sample that first revealed each holdout basis, if any.
    let reveal: Vec<Option<usize>> = holdout
        .iter()
        .filter_map(|h| h.basis.as_ref())
        .map(|b| first_seen.get(b).copied())
        .collect();
    checkpoints
        .iter()
        .map(|&c| {
            if reveal.is_empty() {
                return (c, 0.0);
            }
            let covered = reveal.iter().filter(|r| r.is_some_and(|i| i < c)).count();
            (c, covered as f64 / reveal.len() as f64)
        })
        .collect()
}

/// Checkpoints reported for a run of `total` samples with `m` training samples.
pub fn default_checkpoints(m: usize, total: usize) -> Vec<usize> {
    let set: BTreeSet<usize> = CHECKPOINTS
        .iter()
        .copied()
        .filter(|&c| c <= total)
        .chain([m, total])
        .collect();
    set.into_iter().collect()
}

/// Proportions of feasible and optimal outputs for each prefix size of `ens`.
pub fn evaluate_ensemble(
    ens: &EnsemblePolicy,
    prob: &OpfProblem,
    model: &UncertaintyModel,
    holdout: &[HoldoutSample],
    ks: &[usize],
) -> Vec<KRecord> {
    // (feasible, optimal) flags per k, per scenario.
    let outcomes: Vec<Option<Vec<(bool, bool)>>> = holdout
        .par_iter()
        .enumerate()
        .map(|(i, h)| {
            h.basis.as_ref()?;
            let choices = ens.prefix_choices(prob, &model.sample(TEST_STREAM, i));
            Some(
                ks.iter()
                    .map(|&k| match choices[k.min(choices.len()) - 1] {
                        Some((_, cost)) => (true, cost_matches(cost, h.objective)),
                        None => (false, false),
                    })
                    .collect(),
            )
        })
        .collect();
    let recoverable: Vec<&Vec<(bool, bool)>> = outcomes.iter().flatten().collect();
    let n = recoverable.len();
    ks.iter()
        .enumerate()
        .map(|(j, &k)| {
            let (feasible, optimal) = recoverable.iter().fold((0usize, 0usize), |(f, o), flags| {
                (f + flags[j].0 as usize, o + flags[j].1 as usize)
            });
            let prop = |x: usize| if n == 0 { 0.0 } else { x as f64 / n as f64 };
            KRecord {
                k,
                effective_k: k.min(ens.len()),
                prop_optimal: prop(optimal),
                prop_feasible: prop(feasible),
            }
        })
        .collect()
}

/// Everything the evaluation needs from learning, independent of how it was obtained.
#[derive(Debug, Clone)]
pub struct LearnedSet<'a> {
    pub ensemble: &'a EnsemblePolicy,
    pub catalog: &'a [CatalogEntry],
    pub m: usize,
    pub total: usize,
    pub training_infeasible: usize,
    pub coverage: Option<CoverageVerdict>,
}

pub fn evaluate_learned(
    learned: &LearnedSet,
    net: &PowerNetwork,
    prob: &OpfProblem,
    model: &UncertaintyModel,
    ks: &[usize],
    n_test: usize,
) -> Result<EvaluationReport> {
    if n_test == 0 {
        return Err(Error::Domain("n_test must be at least 1".into()));
    }
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.first() == Some(&0) {
        return Err(Error::Domain("ensemble sizes must be at least 1".into()));
    }
    let holdout = solve_holdout(prob, model, n_test)?;
    let per_k = evaluate_ensemble(learned.ensemble, prob, model, &holdout, &ks);
    let checkpoints = default_checkpoints(learned.m, learned.total);
    let unique_bases_curve = checkpoints
        .iter()
        .map(|&c| {
            (
                c,
                learned.catalog.iter().filter(|e| e.first_seen < c).count(),
            )
        })
        .collect();
    let report = EvaluationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        case_id: net.case_id.clone(),
        sigma_scaling: model.sigma_scaling,
        seed: model.seed,
        network: NetworkSummary::of(net),
        training_stream: TRAINING_STREAM,
        test_stream: TEST_STREAM,
        n_test,
        infeasible_lp_count: holdout.iter().filter(|h| h.basis.is_none()).count(),
        training_samples: learned.total,
        training_infeasible: learned.training_infeasible,
        catalog_size: learned.catalog.iter().filter(|e| e.count > 0).count(),
        per_k,
        coverage_curve: coverage_curve(learned.catalog, &checkpoints, &holdout),
        unique_bases_curve,
        coverage: learned.coverage,
        metadata: BTreeMap::from([(
            "library_version".to_string(),
            env!("CARGO_PKG_VERSION").to_string(),
        )]),
    };
    report.check_invariants()?;
    Ok(report)
}

/// Evaluate the top-K ensembles of `trace` on `n_test` fresh scenarios.
pub fn evaluate_out_of_sample(
    ks: &[usize],
    trace: &DiscoveryTrace,
    net: &PowerNetwork,
    prob: &OpfProblem,
    model: &UncertaintyModel,
    n_test: usize,
) -> Result<EvaluationReport> {
    if ranked_bases(trace).is_empty() {
        return Err(Error::Domain(
            "no basis was observed during training".into(),
        ));
    }
    let k_max = ks.iter().copied().max().unwrap_or(1);
    let ensemble = top_k_ensemble(trace, prob, k_max)?;
    let learned = LearnedSet {
        ensemble: &ensemble,
        catalog: &trace.catalog,
        m: trace.m,
        total: trace.total(),
        training_infeasible: trace.infeasible_count(),
        coverage: None,
    };
    evaluate_learned(&learned, net, prob, model, ks, n_test)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableFormat {
    Csv,
    Json,
    Text,
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "json" => Ok(TableFormat::Json),
            "text" => Ok(TableFormat::Text),
            _ => Err(Error::Domain(format!("unknown format `{s}`"))),
        }
    }
}

impl TableFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TableFormat::Csv => "csv",
            TableFormat::Json => "json",
            TableFormat::Text => "txt",
        }
    }
}

fn csv_document(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(header)?;
    for row in rows {
        wtr.write_record(row)?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn text_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(String::len).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| {
                if i == 0 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        writeln!(out, "{}", padded.join("  ").trim_end()).unwrap();
    };
    line(header);
    for row in rows {
        line(row);
    }
    out
}

/// Per-K proportions of one report. Text mode prints three decimals.
pub fn render_tables(report: &EvaluationReport, format: TableFormat) -> Result<String> {
    match format {
        TableFormat::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
        TableFormat::Csv => {
            let rows: Vec<Vec<String>> = report
                .per_k
                .iter()
                .map(|r| {
                    vec![
                        r.k.to_string(),
                        r.effective_k.to_string(),
                        r.prop_optimal.to_string(),
                        r.prop_feasible.to_string(),
                    ]
                })
                .collect();
            csv_document(
                &["k", "effective_k", "prop_optimal", "prop_feasible"],
                &rows,
            )
        }
        TableFormat::Text => {
            let header: Vec<String> = ["K", "optimal", "feasible"].map(String::from).to_vec();
            let rows: Vec<Vec<String>> = report
                .per_k
                .iter()
                .map(|r| {
                    vec![
                        r.k.to_string(),
                        format!("{:.3}", r.prop_optimal),
                        format!("{:.3}", r.prop_feasible),
                    ]
                })
                .collect();
            Ok(text_table(&header, &rows))
        }
    }
}

/// Coverage and unique-basis curves as plot-ready CSV.
pub fn render_curves(report: &EvaluationReport) -> Result<String> {
    let unique: BTreeMap<usize, usize> = report.unique_bases_curve.iter().copied().collect();
    let rows: Vec<Vec<String>> = report
        .coverage_curve
        .iter()
        .map(|&(s, c)| {
            vec![
                s.to_string(),
                c.to_string(),
                unique.get(&s).map_or_else(String::new, |u| u.to_string()),
            ]
        })
        .collect();
    csv_document(&["samples_seen", "cumulative_mass", "unique_bases"], &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedTables {
    pub schema_version: u32,
    pub sizes: Vec<Vec<String>>,
    pub unique_bases: Vec<Vec<String>>,
    pub coverage: Vec<Vec<String>>,
    pub ensemble: Vec<Vec<String>>,
    pub headers: BTreeMap<String, Vec<String>>,
}

/// Merge reports of several cases into four tables: network sizes with
/// infeasible counts, unique bases and coverage per checkpoint, and ensemble
/// proportions per K.
pub fn merge_reports(reports: &[EvaluationReport]) -> Result<MergedTables> {
    if reports.is_empty() {
        return Err(Error::Domain("no reports to merge".into()));
    }
    if let Some(r) = reports
        .iter()
        .find(|r| r.schema_version != REPORT_SCHEMA_VERSION)
    {
        return Err(Error::SchemaMismatch {
            expected: REPORT_SCHEMA_VERSION.to_string(),
            found: r.schema_version.to_string(),
        });
    }
    let checkpoints: Vec<usize> = reports
        .iter()
        .flat_map(|r| r.coverage_curve.iter().map(|c| c.0))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let ks: Vec<usize> = reports
        .iter()
        .flat_map(|r| r.per_k.iter().map(|k| k.k))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let label = |r: &EvaluationReport| vec![r.case_id.clone(), r.sigma_scaling.to_string()];

    let mut headers = BTreeMap::new();
    headers.insert(
        "sizes".to_string(),
        [
            "case",
            "sigma",
            "buses",
            "branches",
            "generators",
            "constraints",
            "infeasible",
            "samples",
        ]
        .map(String::from)
        .to_vec(),
    );
    let with_checkpoints = |name: &str| {
        let mut h = vec!["case".to_string(), "sigma".to_string()];
        h.extend(checkpoints.iter().map(|c| format!("{name}@{c}")));
        h
    };
    headers.insert("unique_bases".to_string(), with_checkpoints("unique"));
    headers.insert("coverage".to_string(), with_checkpoints("coverage"));
    let mut ens_header = vec!["case".to_string(), "sigma".to_string()];
    for k in &ks {
        ens_header.push(format!("K={k} optimal"));
        ens_header.push(format!("K={k} feasible"));
    }
    headers.insert("ensemble".to_string(), ens_header);

    let lookup = |curve: &[(usize, String)], c: usize| {
        curve
            .iter()
            .find(|(s, _)| *s == c)
            .map_or_else(|| "-".to_string(), |(_, v)| v.clone())
    };
    let mut out = MergedTables {
        schema_version: REPORT_SCHEMA_VERSION,
        sizes: Vec::new(),
        unique_bases: Vec::new(),
        coverage: Vec::new(),
        ensemble: Vec::new(),
        headers,
    };
    for r in reports {
        let mut row = label(r);
        let n = &r.network;
        row.extend(
            [
                n.buses,
                n.branches,
                n.generators,
                n.constraints,
                r.training_infeasible,
                r.training_samples,
            ]
            .map(|x| x.to_string()),
        );
        out.sizes.push(row);

        let unique: Vec<(usize, String)> = r
            .unique_bases_curve
            .iter()
            .map(|&(s, u)| (s, u.to_string()))
            .collect();
        let mut row = label(r);
        row.extend(checkpoints.iter().map(|&c| lookup(&unique, c)));
        out.unique_bases.push(row);

        let cov: Vec<(usize, String)> = r
            .coverage_curve
            .iter()
            .map(|&(s, c)| (s, format!("{c:.3}")))
            .collect();
        let mut row = label(r);
        row.extend(checkpoints.iter().map(|&c| lookup(&cov, c)));
        out.coverage.push(row);

        let mut row = label(r);
        for k in &ks {
            match r.per_k.iter().find(|x| x.k == *k) {
                Some(x) => {
                    row.push(format!("{:.3}", x.prop_optimal));
                    row.push(format!("{:.3}", x.prop_feasible));
                }
                None => row.extend(["-".to_string(), "-".to_string()]),
            }
        }
        out.ensemble.push(row);
    }
    Ok(out)
}

pub fn render_merged(merged: &MergedTables, format: TableFormat) -> Result<String> {
    let tables = [
        (
            "sizes",
            "Network sizes and infeasible training scenarios",
            &merged.sizes,
        ),
        (
            "unique_bases",
            "Unique bases observed",
            &merged.unique_bases,
        ),
        (
            "coverage",
            "Out-of-sample coverage of observed bases",
            &merged.coverage,
        ),
        (
            "ensemble",
            "Ensemble policy: optimal and feasible proportions",
            &merged.ensemble,
        ),
    ];
    match format {
        TableFormat::Json => Ok(serde_json::to_string_pretty(merged)? + "\n"),
        TableFormat::Csv => {
            let mut out = String::new();
            for (key, _, rows) in tables {
                let header: Vec<&str> = merged.headers[key].iter().map(String::as_str).collect();
                writeln!(out, "# {key}").unwrap();
                out.push_str(&csv_document(&header, rows)?);
            }
            Ok(out)
        }
        TableFormat::Text => {
            let mut out = String::new();
            for (i, (key, title, rows)) in tables.into_iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                writeln!(out, "{title}").unwrap();
                out.push_str(&text_table(&merged.headers[key], rows));
            }
            Ok(out)
        }
    }
}

/// Fraction of feasible holdout scenarios whose basis lies in `bases`.
pub fn basis_coverage(bases: &HashSet<Basis>, holdout: &[HoldoutSample]) -> f64 {
    let feasible: Vec<&Basis> = holdout.iter().filter_map(|h| h.basis.as_ref()).collect();
    if feasible.is_empty() {
        return 0.0;
    }
    feasible.iter().filter(|b| bases.contains(**b)).count() as f64 / feasible.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(per_k: Vec<KRecord>) -> EvaluationReport {
        EvaluationReport {
            schema_version: REPORT_SCHEMA_VERSION,
            case_id: "case_x".into(),
            sigma_scaling: 0.03,
            seed: 1,
            network: NetworkSummary {
                buses: 3,
                branches: 3,
                generators: 3,
                constraints: 13,
            },
            training_stream: TRAINING_STREAM,
            test_stream: TEST_STREAM,
            n_test: 10,
            infeasible_lp_count: 0,
            training_samples: 20,
            training_infeasible: 0,
            catalog_size: 1,
            per_k,
            coverage_curve: vec![(0, 0.0), (20, 1.0)],
            unique_bases_curve: vec![(0, 0), (20, 1)],
            coverage: None,
            metadata: BTreeMap::new(),
        }
    }

    fn k(k: usize, o: f64, f: f64) -> KRecord {
        KRecord {
            k,
            effective_k: k,
            prop_optimal: o,
            prop_feasible: f,
        }
    }

    #[test]
    fn empty_report_renders_header_only() {
        let r = report(vec![]);
        assert_eq!(
            render_tables(&r, TableFormat::Csv).unwrap(),
            "k,effective_k,prop_optimal,prop_feasible\n"
        );
        assert_eq!(
            render_tables(&r, TableFormat::Text).unwrap(),
            "K  optimal  feasible\n"
        );
    }

    #[test]
    fn text_uses_three_decimals() {
        let r = report(vec![k(1, 0.932, 0.95), k(10, 1.0, 1.0)]);
        let text = render_tables(&r, TableFormat::Text).unwrap();
        assert!(text.contains("0.932"));
        assert!(text.contains("0.950"));
        assert!(text.contains("1.000"));
    }

    #[test]
    fn json_round_trip() {
        let r = report(vec![k(1, 0.5, 0.75)]);
        let text = render_tables(&r, TableFormat::Json).unwrap();
        let back: EvaluationReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn invariants_catch_violations() {
        assert!(report(vec![k(1, 0.5, 0.75), k(5, 0.6, 0.8)])
            .check_invariants()
            .is_ok());
        assert!(report(vec![k(1, 0.8, 0.75)]).check_invariants().is_err());
        assert!(report(vec![k(1, 0.5, 0.75), k(5, 0.4, 0.8)])
            .check_invariants()
            .is_err());
    }

    #[test]
    fn coverage_curve_counts_first_sightings() {
        let basis = |r: usize| Basis::new(2, vec![r]).unwrap();
        let catalog = vec![
            CatalogEntry {
                id: 0,
                basis: basis(0),
                count: 3,
                window_count: 0,
                first_seen: 0,
            },
            CatalogEntry {
                id: 1,
                basis: basis(1),
                count: 1,
                window_count: 0,
                first_seen: 5,
            },
        ];
        let holdout = vec![
            HoldoutSample {
                basis: Some(basis(0)),
                objective: 1.0,
            },
            HoldoutSample {
                basis: Some(basis(1)),
                objective: 1.0,
            },
            HoldoutSample {
                basis: Some(basis(2)),
                objective: 1.0,
            },
            HoldoutSample {
                basis: None,
                objective: f64::NAN,
            },
        ];
        let curve = coverage_curve(&catalog, &[0, 1, 6], &holdout);
        assert_eq!(curve[0], (0, 0.0));
        assert!((curve[1].1 - 1.0 / 3.0).abs() < 1e-15);
        assert!((curve[2].1 - 2.0 / 3.0).abs() < 1e-15);
        let all: HashSet<Basis> = [basis(0), basis(1), basis(2)].into();
        assert_eq!(basis_coverage(&all, &holdout), 1.0);
    }

    #[test]
    fn checkpoints_include_training_split() {
        assert_eq!(
            default_checkpoints(4078, 5000),
            vec![100, 200, 500, 1000, 2500, 4078, 5000]
        );
        assert_eq!(default_checkpoints(50, 150), vec![50, 100, 150]);
    }

    #[test]
    fn merge_checks_schema_and_counts_rows() {
        let a = report(vec![k(1, 1.0, 1.0)]);
        let mut b = report(vec![k(1, 0.9, 1.0), k(5, 1.0, 1.0)]);
        b.case_id = "case_y".into();
        let merged = merge_reports(&[a.clone(), b]).unwrap();
        assert_eq!(merged.ensemble.len(), 2);
        assert_eq!(
            merged.ensemble[0],
            vec!["case_x", "0.03", "1.000", "1.000", "-", "-"]
        );
        let single = merge_reports(std::slice::from_ref(&a)).unwrap();
        assert_eq!(single.sizes.len(), 1);

        let mut old = a;
        old.schema_version = 0;
        assert!(matches!(
            merge_reports(&[old]),
            Err(Error::SchemaMismatch { .. })
        ));
    }
}
