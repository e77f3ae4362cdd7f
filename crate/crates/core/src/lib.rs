//! DC optimal power flow under load uncertainty: basis discovery and
//! ensemble dispatch policies built from optimal LP bases.

pub mod error;
pub mod evaluation;
pub mod learning;
pub mod matpower;
pub mod network;
pub mod policy;
pub mod solver;

pub use error::{Error, Result};
pub use evaluation::{
    coverage_curve, evaluate_out_of_sample, merge_reports, render_tables, EvaluationReport,
    KRecord, TableFormat,
};
pub use learning::{
    coverage_guarantee_montecarlo, coverage_test, rate_of_discovery, run_learning, sample_omega,
    top_k_ensemble, window_size, CoverageOutcome, CoverageVerdict, DiscoveryTrace,
    UncertaintyModel,
};
pub use matpower::{read_case, RawCase};
pub use network::{build_ptdf, OpfProblem, PowerNetwork, RowLabel};
pub use policy::{
    check_feasible, classify_generators, ensemble_eval, make_policy, BasisPolicy, EnsembleDocument,
    EnsemblePolicy, GeneratorClassification,
};
pub use solver::{
    extract_basis, solve_opf, Basis, FactoredBasis, LpSolution, LpStatus, OpfSolver, Tolerances,
};
