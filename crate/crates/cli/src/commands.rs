use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::{info, warn};
use opfbasis::evaluation::{
    evaluate_learned, render_curves, render_merged, LearnedSet, REPORT_SCHEMA_VERSION,
};
use opfbasis::learning::CatalogEntry;
use opfbasis::{
    coverage_test, merge_reports, read_case, render_tables, run_learning, top_k_ensemble, Basis,
    CoverageOutcome, CoverageVerdict, EnsembleDocument, Error, EvaluationReport, OpfProblem,
    PowerNetwork, RowLabel, TableFormat, UncertaintyModel,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::ExperimentConfig;

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Catalog entry as stored in the ensemble file, so that coverage curves can
/// be rebuilt at evaluation time.
#[derive(Debug, Serialize, Deserialize)]
struct StoredEntry {
    id: usize,
    first_seen: usize,
    count: usize,
    window_count: usize,
    rows: Vec<RowLabel>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TrainingSummary {
    m: usize,
    window: usize,
    infeasible: usize,
    catalog: Vec<StoredEntry>,
}

fn load_case(path: &Path) -> Result<(PowerNetwork, OpfProblem)> {
    let context = || format!("case {}", path.display());
    let net = read_case(path)
        .and_then(|raw| raw.to_network())
        .with_context(context)?;
    let prob = OpfProblem::from_network(&net).with_context(context)?;
    Ok((net, prob))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut out = create(path)?;
    out.write_all(text.as_bytes())?;
    out.flush()?;
    info!("wrote {}", path.display());
    Ok(())
}

/// Sample, solve, certify coverage and store the ensemble of the most frequent bases.
pub fn learn(cfg: &ExperimentConfig) -> Result<(CoverageVerdict, PathBuf)> {
    let (net, prob) = load_case(&cfg.case_path)?;
    let model = UncertaintyModel::from_network(&net, cfg.sigma_scaling, cfg.seed)?;
    info!(
        "{}: {} training samples, window {}",
        net.case_id, cfg.m, cfg.window
    );
    let trace =
        run_learning(&prob, &model, cfg.m, cfg.window).with_context(|| net.case_id.clone())?;
    let verdict = coverage_test(&trace, cfg.epsilon, cfg.delta)?;
    let ensemble = top_k_ensemble(&trace, &prob, cfg.k_max())?;

    let mut out = create(&cfg.artifact(&net.case_id, "trace.csv"))?;
    trace.write_trace_csv(&mut out)?;
    out.flush()?;
    let mut out = create(&cfg.artifact(&net.case_id, "catalog.csv"))?;
    trace.write_catalog_csv(&prob, &mut out)?;
    out.flush()?;

    let training = TrainingSummary {
        m: trace.m,
        window: trace.w,
        infeasible: trace.infeasible_count(),
        catalog: trace
            .catalog
            .iter()
            .map(|e| StoredEntry {
                id: e.id,
                first_seen: e.first_seen,
                count: e.count,
                window_count: e.window_count,
                rows: e.basis.labels(&prob),
            })
            .collect(),
    };
    let metadata = json!({
        "config": cfg,
        "version": VERSION,
        "training": training,
        "coverage": verdict,
    });
    let doc = EnsembleDocument::from_ensemble(
        &ensemble,
        &prob,
        &net.case_id,
        &net.digest(),
        cfg.sigma_scaling,
        cfg.seed,
        metadata,
    );
    let path = cfg.artifact(&net.case_id, "ensemble.json");
    let mut out = create(&path)?;
    serde_json::to_writer(&mut out, &doc)?;
    out.write_all(b"\n")?;
    out.flush()?;

    let summary = json!({
        "case_id": net.case_id,
        "config": cfg,
        "version": VERSION,
        "catalog_size": trace.observed().count(),
        "unique_bases": trace.catalog.len(),
        "infeasible": trace.infeasible_count(),
        "verdict": verdict,
    });
    write_text(
        &cfg.artifact(&net.case_id, "verdict.json"),
        &(serde_json::to_string_pretty(&summary)? + "\n"),
    )?;
    println!(
        "{}: {} bases observed, rate of discovery {:.4} over {} samples: {:?}",
        net.case_id,
        trace.observed().count(),
        verdict.rate_of_discovery,
        verdict.window,
        verdict.outcome
    );
    Ok((verdict, path))
}

/// Evaluate a stored ensemble on fresh scenarios and write the report files.
pub fn evaluate(cfg: &ExperimentConfig, ensemble_path: &Path) -> Result<EvaluationReport> {
    let (net, prob) = load_case(&cfg.case_path)?;
    let text = fs::read_to_string(ensemble_path)
        .with_context(|| format!("reading {}", ensemble_path.display()))?;
    let doc: EnsembleDocument = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", ensemble_path.display()))?;
    if doc.case_digest != net.digest() {
        return Err(Error::EnsembleCaseMismatch {
            expected: format!("{} ({})", net.case_id, &net.digest()[..12]),
            found: format!(
                "{} ({})",
                doc.case_id,
                doc.case_digest.get(..12).unwrap_or(&doc.case_digest)
            ),
        }
        .into());
    }
    if cfg.sigma_given && cfg.sigma_scaling != doc.sigma_scaling {
        return Err(Error::EnsembleCaseMismatch {
            expected: format!("sigma {}", cfg.sigma_scaling),
            found: format!("sigma {}", doc.sigma_scaling),
        }
        .into());
    }
    let mut cfg = cfg.clone();
    cfg.sigma_scaling = doc.sigma_scaling;
    if !cfg.seed_given {
        cfg.seed = doc.seed;
    }
    let ensemble = doc.to_ensemble(&prob)?;
    let training: TrainingSummary = serde_json::from_value(doc.metadata["training"].clone())
        .with_context(|| format!("{} has no training summary", ensemble_path.display()))?;
    let catalog = training
        .catalog
        .iter()
        .map(|e| {
            let rows = e
                .rows
                .iter()
                .map(|&l| prob.checked_row(l))
                .collect::<opfbasis::Result<_>>()?;
            Ok(CatalogEntry {
                id: e.id,
                basis: Basis::new(prob.n_gen(), rows)?,
                count: e.count,
                window_count: e.window_count,
                first_seen: e.first_seen,
            })
        })
        .collect::<opfbasis::Result<Vec<_>>>()?;
    let coverage: Option<CoverageVerdict> =
        serde_json::from_value(doc.metadata["coverage"].clone()).ok();
    for &k in cfg.k_list.iter().filter(|&&k| k > ensemble.len()) {
        warn!(
            "K={k} exceeds the {} stored bases; evaluating with {}",
            ensemble.len(),
            ensemble.len()
        );
    }

    let model = UncertaintyModel::from_network(&net, cfg.sigma_scaling, cfg.seed)?;
    let learned = LearnedSet {
        ensemble: &ensemble,
        catalog: &catalog,
        m: training.m,
        total: training.m + training.window,
        training_infeasible: training.infeasible,
        coverage,
    };
    let mut report = evaluate_learned(&learned, &net, &prob, &model, &cfg.k_list, cfg.n_test)?;
    report
        .metadata
        .insert("config".into(), serde_json::to_string(&cfg)?);
    report.metadata.insert("version".into(), VERSION.into());
    if let Some(name) = ensemble_path.file_name() {
        report
            .metadata
            .insert("ensemble".into(), name.to_string_lossy().into_owned());
    }

    write_text(
        &cfg.artifact(&net.case_id, "report.json"),
        &render_tables(&report, TableFormat::Json)?,
    )?;
    let format = cfg.table_format();
    if format != TableFormat::Json {
        write_text(
            &cfg.artifact(&net.case_id, &format!("report.{}", format.extension())),
            &render_tables(&report, format)?,
        )?;
    }
    write_text(
        &cfg.artifact(&net.case_id, "curves.csv"),
        &render_curves(&report)?,
    )?;
    print!("{}", render_tables(&report, TableFormat::Text)?);
    Ok(report)
}

/// Merge report files into one document of tables.
pub fn report(paths: &[PathBuf], format: TableFormat) -> Result<String> {
    let mut reports = Vec::with_capacity(paths.len());
    for path in paths {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let version = value.get("schema_version").and_then(|v| v.as_u64());
        if version != Some(REPORT_SCHEMA_VERSION as u64) {
            return Err(Error::SchemaMismatch {
                expected: REPORT_SCHEMA_VERSION.to_string(),
                found: version.map_or_else(|| "none".into(), |v| v.to_string()),
            })
            .with_context(|| path.display().to_string());
        }
        reports.push(
            serde_json::from_value(value).with_context(|| format!("parsing {}", path.display()))?,
        );
    }
    Ok(render_merged(&merge_reports(&reports)?, format)?)
}

/// Sizes of each case: buses, branches, generators and constraint rows.
pub fn summary(paths: &[PathBuf]) -> Result<String> {
    let mut out = format!(
        "{:<24} {:>6} {:>8} {:>5} {:>11}\n",
        "case", "buses", "branches", "gens", "constraints"
    );
    for path in paths {
        let (net, _) = load_case(path)?;
        out += &format!(
            "{:<24} {:>6} {:>8} {:>5} {:>11}\n",
            net.case_id,
            net.n_bus(),
            net.n_branch(),
            net.n_gen(),
            net.constraint_count()
        );
    }
    Ok(out)
}

pub fn exit_code(outcome: CoverageOutcome) -> u8 {
    match outcome {
        CoverageOutcome::Success => 0,
        CoverageOutcome::Inconclusive => 2,
    }
}
