use std::path::{Path, PathBuf};

use clap::Args;
use serde_json::json;
use slsir::lasso::{CvRule, LassoOptions};
use slsir::numkit::{Matrix, SeededRng};
use slsir::simlab::appendix::{run_appendix, Link, Scenario};
use slsir::simlab::{
    run_experiment, AucOrientation, Estimator, ExperimentOptions, InstrumentKind, OutcomeModel,
    SimulationConfig,
};
use slsir::sir::{lasso_sir, SirOptions, SirTuning, DEFAULT_SLICES};
use slsir::twostage::{
    select_dimension, stability_selection, stage_one, stage_two_sir, tuned_lasso,
    DimensionOptions, RegressorChoice, StabilityEstimator, StabilityOptions, StageOneTuning,
};

use crate::config::{parse_key, pick, positive, probability, require, FileConfig};
use crate::error::CliError;
use crate::io::{
    drop_constant_columns, ensure_dir, opt_sig, read_response, read_table, sig, write_csv,
    write_json, Table,
};

const SUMMARY_DIGITS: usize = 3;
const FULL_DIGITS: usize = 17;

/// Settings shared by every command.
#[derive(Debug, Clone)]
pub struct Common {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub record_runtime: bool,
}

fn parse_stage_one(value: &str, seed: u64, folds: usize) -> Result<StageOneTuning, CliError> {
    match value.to_ascii_lowercase().as_str() {
        "bic" => Ok(StageOneTuning::Bic),
        "cv" => Ok(StageOneTuning::Cv { folds, seed }),
        "theory" => Ok(StageOneTuning::TheoryRate { c0: 1.0 }),
        other => Err(CliError::config(
            "stage_one",
            format!("unknown stage-one rule `{other}` (expected bic, cv or theory)"),
        )),
    }
}

fn stage_one_setting(flag: Option<String>, file: &FileConfig, seed: u64) -> Result<StageOneTuning, CliError> {
    let value = pick(flag, &file.stage_one).unwrap_or_else(|| "bic".into());
    parse_stage_one(&value, seed, 10)
}

fn parse_cv_rule(value: &str) -> Result<CvRule, CliError> {
    match value.to_ascii_lowercase().as_str() {
        "min" => Ok(CvRule::Min),
        "one-se" | "onese" | "1se" => Ok(CvRule::OneSe),
        other => Err(CliError::config(
            "cv_rule",
            format!("unknown CV rule `{other}` (expected min or one-se)"),
        )),
    }
}

fn stability_label(e: StabilityEstimator) -> &'static str {
    match e {
        StabilityEstimator::OneStage => "lsir",
        StabilityEstimator::TwoStage => "2slsir",
        StabilityEstimator::TwoStageLinear => "2slasso",
    }
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Args, Default)]
pub struct SimulateArgs {
    /// `table` (outcome models i-v) or `appendix` (endogeneity demonstration).
    #[arg(long)]
    pub design: Option<String>,
    /// Outcome model: i, ii, iii, iv or v.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub q: Option<usize>,
    /// Nonzero rows of the true direction matrix.
    #[arg(long)]
    pub s: Option<usize>,
    /// Nonzero instruments per covariate.
    #[arg(long)]
    pub r: Option<usize>,
    /// Instrument distribution: normal or bernoulli.
    #[arg(long)]
    pub z_kind: Option<String>,
    /// Comma-separated subset of lasso,lsir,2slasso,2slsir.
    #[arg(long, value_delimiter = ',')]
    pub estimators: Option<Vec<String>>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub slices: Option<usize>,
    /// CV folds for the second-stage (or only) penalty.
    #[arg(long)]
    pub folds: Option<usize>,
    /// bic, cv or theory.
    #[arg(long)]
    pub stage_one: Option<String>,
    /// fixed or auto ROC orientation.
    #[arg(long)]
    pub auc: Option<String>,
    /// Appendix scenario: I, II or III.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Appendix link: linear or sine.
    #[arg(long)]
    pub link: Option<String>,
}

pub fn simulate(args: SimulateArgs, file: &FileConfig, common: &Common) -> Result<(), CliError> {
    let design = pick(args.design.clone(), &file.design).unwrap_or_else(|| "table".into());
    match design.to_ascii_lowercase().as_str() {
        "table" => simulate_table(args, file, common),
        "appendix" => simulate_appendix(args, file, common),
        other => Err(CliError::config(
            "design",
            format!("unknown design `{other}` (expected table or appendix)"),
        )),
    }
}

fn simulate_table(args: SimulateArgs, file: &FileConfig, common: &Common) -> Result<(), CliError> {
    let model: OutcomeModel = parse_key("model", &require("model", pick(args.model, &file.model))?)?;
    let n = pick(args.n, &file.n).unwrap_or(200);
    let p = pick(args.p, &file.p).unwrap_or(40);
    let q = pick(args.q, &file.q).unwrap_or(40);
    let mut config = SimulationConfig::new(model, n, p, q);
    config.s = pick(args.s, &file.s).unwrap_or(config.s);
    config.r = pick(args.r, &file.r).unwrap_or(config.r);
    if let Some(z) = pick(args.z_kind, &file.z_kind) {
        config.z_kind = parse_key::<InstrumentKind>("z_kind", &z)?;
    }
    config.seed = common.seed;
    config.validate()?;

    let estimators: Vec<Estimator> = match pick(args.estimators, &file.estimators) {
        Some(list) => list
            .iter()
            .map(|e| parse_key("estimators", e.trim()))
            .collect::<Result<_, _>>()?,
        None => Estimator::ALL.to_vec(),
    };
    if estimators.is_empty() {
        return Err(CliError::config("estimators", "at least one estimator is required"));
    }
    let replicates = positive("replicates", pick(args.replicates, &file.replicates).unwrap_or(100))?;
    let folds = pick(args.folds, &file.folds).unwrap_or(10);
    if folds < 2 {
        return Err(CliError::config("folds", "must be at least 2"));
    }
    let opts = ExperimentOptions {
        stage_one: stage_one_setting(args.stage_one, file, common.seed)?,
        cv_folds: folds,
        slices: positive("slices", pick(args.slices, &file.slices).unwrap_or(DEFAULT_SLICES))?,
        auc: match pick(args.auc, &file.auc).as_deref().map(str::to_ascii_lowercase).as_deref() {
            None | Some("fixed") => AucOrientation::Fixed,
            Some("auto") => AucOrientation::Auto,
            Some(other) => {
                return Err(CliError::config("auc", format!("unknown orientation `{other}` (expected fixed or auto)")))
            }
        },
        ..ExperimentOptions::default()
    };

    let result = run_experiment(&config, &estimators, replicates, &opts)?;
    ensure_dir(&common.out_dir)?;

    let summary_rows: Vec<Vec<String>> = result
        .summaries
        .iter()
        .map(|s| {
            vec![
                s.estimator.to_string(),
                s.model.label().to_string(),
                s.n.to_string(),
                s.p.to_string(),
                s.q.to_string(),
                s.z_kind.label().to_string(),
                s.replicates.to_string(),
                sig(s.mean_error, SUMMARY_DIGITS),
                sig(s.sd_error, SUMMARY_DIGITS),
                sig(s.mean_auc, SUMMARY_DIGITS),
                sig(s.sd_auc, SUMMARY_DIGITS),
                s.failures.to_string(),
            ]
        })
        .collect();
    let summary_header = [
        "estimator", "model", "n", "p", "q", "z_kind", "replicates", "mean_error", "sd_error",
        "mean_auc", "sd_auc", "failures",
    ];
    write_csv(&common.out_dir.join("summary.csv"), &summary_header, &summary_rows)?;

    let mut header = vec!["estimator", "replicate", "error", "auc", "support_size", "failure"];
    if common.record_runtime {
        header.push("runtime");
    }
    let rows: Vec<Vec<String>> = result
        .records
        .iter()
        .map(|r| {
            let mut row = vec![
                r.estimator.to_string(),
                r.replicate.to_string(),
                opt_sig(r.error, FULL_DIGITS),
                opt_sig(r.auc, FULL_DIGITS),
                r.support_size.map_or_else(String::new, |s| s.to_string()),
                r.failure.clone().unwrap_or_default(),
            ];
            if common.record_runtime {
                row.push(sig(r.runtime, FULL_DIGITS));
            }
            row
        })
        .collect();
    write_csv(&common.out_dir.join("replicates.csv"), &header, &rows)?;

    for s in &result.summaries {
        println!(
            "{} model={} n={} p={} q={}: error {} ({}) auc {} ({}) failures {}",
            s.estimator,
            s.model,
            s.n,
            s.p,
            s.q,
            sig(s.mean_error, SUMMARY_DIGITS),
            sig(s.sd_error, SUMMARY_DIGITS),
            sig(s.mean_auc, SUMMARY_DIGITS),
            sig(s.sd_auc, SUMMARY_DIGITS),
            s.failures
        );
    }
    Ok(())
}

fn simulate_appendix(args: SimulateArgs, file: &FileConfig, common: &Common) -> Result<(), CliError> {
    let scenario: Scenario = parse_key(
        "scenario",
        &pick(args.scenario, &file.scenario).unwrap_or_else(|| "I".into()),
    )?;
    let link: Link = parse_key("link", &pick(args.link, &file.link).unwrap_or_else(|| "linear".into()))?;
    let n = pick(args.n, &file.n).unwrap_or(100);
    if n < 2 * DEFAULT_SLICES {
        return Err(CliError::config("n", format!("must be at least {}", 2 * DEFAULT_SLICES)));
    }
    let replicates = positive("replicates", pick(args.replicates, &file.replicates).unwrap_or(500))?;
    let result = run_appendix(scenario, link, n, replicates, common.seed)?;
    ensure_dir(&common.out_dir)?;

    let s = &result.summary;
    let header = [
        "scenario", "link", "n", "replicates", "mean_error", "sd_error", "mean_auc_fixed",
        "mean_auc_auto", "failures",
    ];
    let row = vec![
        scenario.label().to_string(),
        format!("{link:?}").to_ascii_lowercase(),
        n.to_string(),
        replicates.to_string(),
        sig(s.mean_error, SUMMARY_DIGITS),
        sig(s.sd_error, SUMMARY_DIGITS),
        sig(s.mean_auc_fixed, SUMMARY_DIGITS),
        sig(s.mean_auc_auto, SUMMARY_DIGITS),
        s.failures.to_string(),
    ];
    write_csv(&common.out_dir.join("summary.csv"), &header, &[row])?;
    let rows: Vec<Vec<String>> = result
        .records
        .iter()
        .map(|r| {
            vec![
                r.replicate.to_string(),
                opt_sig(r.error, FULL_DIGITS),
                opt_sig(r.auc_fixed, FULL_DIGITS),
                opt_sig(r.auc_auto, FULL_DIGITS),
                r.failure.clone().unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(
        &common.out_dir.join("replicates.csv"),
        &["replicate", "error", "auc_fixed", "auc_auto", "failure"],
        &rows,
    )?;
    println!(
        "scenario {} {:?} n={n}: error {} ({}) auc fixed {} auto {}",
        scenario.label(),
        link,
        sig(s.mean_error, SUMMARY_DIGITS),
        sig(s.sd_error, SUMMARY_DIGITS),
        sig(s.mean_auc_fixed, SUMMARY_DIGITS),
        sig(s.mean_auc_auto, SUMMARY_DIGITS)
    );
    Ok(())
}

// ---------------------------------------------------------------- data input

#[derive(Debug, Args, Default, Clone)]
pub struct DataArgs {
    /// Response CSV (one column, header row).
    #[arg(long)]
    pub y: Option<PathBuf>,
    /// Covariate CSV (header row of variable names).
    #[arg(long)]
    pub x: Option<PathBuf>,
    /// Instrument CSV (header row of variable names).
    #[arg(long)]
    pub z: Option<PathBuf>,
}

struct Data {
    y: Vec<f64>,
    x: Table,
    z: Option<Table>,
    dropped_x: Vec<String>,
    dropped_z: Vec<String>,
}

fn load_data(args: DataArgs, file: &FileConfig, need_z: bool) -> Result<Data, CliError> {
    let y_path = require("y", pick(args.y, &file.y))?;
    let x_path = require("x", pick(args.x, &file.x))?;
    let z_path = pick(args.z, &file.z);
    if need_z && z_path.is_none() {
        return Err(CliError::config("z", "instrument file required for this estimator"));
    }
    let (_, y) = read_response(&y_path)?;
    let mut x = read_table(&x_path)?;
    check_rows(&y_path, y.len(), &x_path, x.data.rows())?;
    let dropped_x = drop_constant_columns(&mut x, "x");
    if x.names.is_empty() {
        return Err(CliError::Data(format!("{}: no non-constant columns", x_path.display())));
    }
    let (z, dropped_z) = match z_path {
        Some(path) => {
            let mut z = read_table(&path)?;
            check_rows(&y_path, y.len(), &path, z.data.rows())?;
            let dropped = drop_constant_columns(&mut z, "z");
            if z.names.is_empty() {
                return Err(CliError::Data(format!("{}: no non-constant columns", path.display())));
            }
            (Some(z), dropped)
        }
        None => (None, Vec::new()),
    };
    Ok(Data {
        y,
        x,
        z,
        dropped_x,
        dropped_z,
    })
}

fn check_rows(y_path: &Path, ny: usize, other: &Path, rows: usize) -> Result<(), CliError> {
    if ny != rows {
        return Err(CliError::Data(format!(
            "{} has {ny} rows but {} has {rows}",
            y_path.display(),
            other.display()
        )));
    }
    Ok(())
}

fn names_of(names: &[String], idx: &[usize]) -> Vec<String> {
    idx.iter().map(|&j| names[j].clone()).collect()
}

// ---------------------------------------------------------------- fit

#[derive(Debug, Args, Default)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// lsir, 2slsir, lasso or 2slasso (default 2slsir with --z, else lsir).
    #[arg(long)]
    pub estimator: Option<String>,
    /// Number of directions.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub slices: Option<usize>,
    /// cv or bic for the second-stage (or only) penalty.
    #[arg(long)]
    pub tuning: Option<String>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// min or one-se (default one-se for SIR estimators, min for lasso).
    #[arg(long)]
    pub cv_rule: Option<String>,
    /// bic, cv or theory.
    #[arg(long)]
    pub stage_one: Option<String>,
}

pub fn fit(args: FitArgs, file: &FileConfig, common: &Common) -> Result<(), CliError> {
    let has_z = args.data.z.is_some() || file.z.is_some();
    let estimator: Estimator = match pick(args.estimator, &file.estimator) {
        Some(e) => parse_key("estimator", &e)?,
        None if has_z => Estimator::TwoStageLsir,
        None => Estimator::Lsir,
    };
    let two_stage = matches!(estimator, Estimator::TwoStageLsir | Estimator::TwoStageLasso);
    let linear = matches!(estimator, Estimator::Lasso | Estimator::TwoStageLasso);
    let d = positive("d", pick(args.d, &file.d).unwrap_or(1))?;
    if linear && d != 1 {
        return Err(CliError::config("d", "linear estimators fit a single direction"));
    }
    let slices = positive("slices", pick(args.slices, &file.slices).unwrap_or(DEFAULT_SLICES))?;
    let folds = pick(args.folds, &file.folds).unwrap_or(10);
    let rule = match pick(args.cv_rule, &file.cv_rule) {
        Some(r) => parse_cv_rule(&r)?,
        None if linear => CvRule::Min,
        None => CvRule::OneSe,
    };
    let tuning_name = pick(args.tuning, &file.tuning).unwrap_or_else(|| "cv".into());
    let tuning = match tuning_name.to_ascii_lowercase().as_str() {
        "cv" => {
            if folds < 2 {
                return Err(CliError::config("folds", "must be at least 2"));
            }
            SirTuning::Cv {
                folds,
                repeats: 1,
                seed: common.seed,
                rule,
            }
        }
        "bic" => SirTuning::Bic,
        other => {
            return Err(CliError::config("tuning", format!("unknown tuning `{other}` (expected cv or bic)")))
        }
    };
    let stage_one_tuning = stage_one_setting(args.stage_one, file, common.seed)?;
    let data = load_data(args.data, file, two_stage)?;
    let lasso = LassoOptions::default();

    let s1 = match (&data.z, two_stage) {
        (Some(z), true) => Some(stage_one(&data.x.data, &z.data, &stage_one_tuning, &lasso)?),
        _ => None,
    };
    let sir_opts = SirOptions {
        slices,
        d,
        tuning: tuning.clone(),
        lasso: lasso.clone(),
    };
    let (b_hat, eigenvalues, adjusted, penalties): (Matrix, Vec<f64>, Vec<f64>, Vec<f64>) = match estimator {
        Estimator::Lsir => {
            let est = lasso_sir(&data.y, &data.x.data, &sir_opts)?;
            (est.b_hat, est.eigenvalues, est.adjusted_eigenvalues, est.penalties)
        }
        Estimator::TwoStageLsir => {
            let s1 = s1.as_ref().expect("stage one fitted");
            let est = stage_two_sir(&data.y, &s1.fitted, &sir_opts)?;
            (est.b_hat, est.eigenvalues, est.adjusted_eigenvalues, est.penalties)
        }
        Estimator::Lasso | Estimator::TwoStageLasso => {
            let design = match &s1 {
                Some(s) => &s.fitted,
                None => &data.x.data,
            };
            let f = tuned_lasso(&data.y, design, &tuning, &lasso)?;
            (
                Matrix::column_vector(&f.fit.coefficients),
                Vec::new(),
                Vec::new(),
                vec![f.fit.penalty],
            )
        }
    };

    let names = &data.x.names;
    let support = slsir::sir::support_of(&b_hat);
    let coefficients: Vec<serde_json::Value> = (0..b_hat.rows())
        .map(|i| json!({ "variable": names[i], "beta": b_hat.row(i) }))
        .collect();
    let record = json!({
        "estimator": estimator.label(),
        "n": data.y.len(),
        "p": names.len(),
        "q": data.z.as_ref().map(|z| z.names.len()),
        "d": d,
        "slices": slices,
        "tuning": tuning_name.to_ascii_lowercase(),
        "cv_rule": match rule { CvRule::Min => "min", CvRule::OneSe => "one-se" },
        "seed": common.seed,
        "variables": names,
        "instruments": data.z.as_ref().map(|z| z.names.clone()),
        "dropped": { "x": data.dropped_x, "z": data.dropped_z },
        "coefficients": coefficients,
        "eigenvalues": eigenvalues,
        "adjusted_eigenvalues": adjusted,
        "support": names_of(names, &support),
        "penalties": penalties,
        "stage_one_penalties": s1.as_ref().map(|s| s.penalties.clone()),
    });
    ensure_dir(&common.out_dir)?;
    write_json(&common.out_dir.join("estimate.json"), &record)?;

    let mut header = vec!["variable".to_string()];
    header.extend((1..=b_hat.cols()).map(|k| format!("beta_{k}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = (0..b_hat.rows())
        .map(|i| {
            let mut row = vec![names[i].clone()];
            row.extend(b_hat.row(i).iter().map(|v| sig(*v, FULL_DIGITS)));
            row
        })
        .collect();
    write_csv(&common.out_dir.join("coefficients.csv"), &header_refs, &rows)?;
    println!("support: {}", names_of(names, &support).join(","));
    Ok(())
}

// ---------------------------------------------------------------- select-dim

#[derive(Debug, Args, Default)]
pub struct SelectDimArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Regressor for the lasso SIR fits: Z, X or Xhat.
    #[arg(long)]
    pub regressor: Option<String>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub slices: Option<usize>,
    /// min or one-se.
    #[arg(long)]
    pub cv_rule: Option<String>,
    /// Stage-one rule when the regressor is Xhat: bic, cv or theory.
    #[arg(long)]
    pub stage_one: Option<String>,
}

pub fn select_dim(args: SelectDimArgs, file: &FileConfig, common: &Common) -> Result<(), CliError> {
    let regressor: RegressorChoice =
        parse_key("regressor", &require("regressor", pick(args.regressor, &file.regressor))?)?;
    let defaults = DimensionOptions::default();
    let opts = DimensionOptions {
        slices: positive("slices", pick(args.slices, &file.slices).unwrap_or(defaults.slices))?,
        repeats: positive("repeats", pick(args.repeats, &file.repeats).unwrap_or(defaults.repeats))?,
        folds: pick(args.folds, &file.folds).unwrap_or(defaults.folds),
        rule: match pick(args.cv_rule, &file.cv_rule) {
            Some(r) => parse_cv_rule(&r)?,
            None => defaults.rule,
        },
        lasso: defaults.lasso,
    };
    if opts.folds < 2 {
        return Err(CliError::config("folds", "must be at least 2"));
    }
    let stage_one_tuning = stage_one_setting(args.stage_one, file, common.seed)?;
    let need_z = !matches!(regressor, RegressorChoice::X);
    let data = load_data(args.data, file, need_z)?;
    let fitted;
    let regressors = match regressor {
        RegressorChoice::X => &data.x.data,
        RegressorChoice::Z => &data.z.as_ref().expect("instruments loaded").data,
        RegressorChoice::Xhat => {
            let z = &data.z.as_ref().expect("instruments loaded").data;
            fitted = stage_one(&data.x.data, z, &stage_one_tuning, &opts.lasso)?.fitted;
            &fitted
        }
    };
    let mut rng = SeededRng::new(common.seed);
    let vote = select_dimension(&data.y, regressors, regressor, &opts, &mut rng)?;
    let record = json!({
        "regressor": regressor.to_string(),
        "d_hat": vote.d_hat,
        "votes": vote.votes,
        "degenerate": vote.degenerate,
        "adjusted_eigenvalues": vote.adjusted,
        "repeats": opts.repeats,
        "folds": opts.folds,
        "slices": opts.slices,
        "seed": common.seed,
    });
    ensure_dir(&common.out_dir)?;
    write_json(&common.out_dir.join("select_dim.json"), &record)?;
    println!("d_hat: {}", vote.d_hat);
    Ok(())
}

// ---------------------------------------------------------------- stability

#[derive(Debug, Args, Default)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// lsir, 2slsir or 2slasso.
    #[arg(long)]
    pub estimator: Option<String>,
    #[arg(long)]
    pub subsamples: Option<usize>,
    /// Probability cutoff entering the error-rate bound.
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// Report variables whose maximum probability reaches this value.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Per-family error rate bound.
    #[arg(long)]
    pub pfer: Option<f64>,
    #[arg(long)]
    pub slices: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    /// bic, cv or theory.
    #[arg(long)]
    pub stage_one: Option<String>,
}

pub fn stability(args: StabilityArgs, file: &FileConfig, common: &Common) -> Result<(), CliError> {
    let estimator: StabilityEstimator = parse_key(
        "estimator",
        &pick(args.estimator, &file.estimator).unwrap_or_else(|| "2slsir".into()),
    )?;
    let defaults = StabilityOptions::default();
    let cutoff = pick(args.cutoff, &file.cutoff).unwrap_or(defaults.cutoff);
    if !(cutoff > 0.5 && cutoff <= 1.0) {
        return Err(CliError::config("cutoff", format!("must lie in (0.5, 1], got {cutoff}")));
    }
    let pfer = pick(args.pfer, &file.pfer).unwrap_or(1.0);
    if !(pfer > 0.0 && pfer.is_finite()) {
        return Err(CliError::config("pfer", format!("must be positive, got {pfer}")));
    }
    let opts = StabilityOptions {
        subsamples: positive("subsamples", pick(args.subsamples, &file.subsamples).unwrap_or(defaults.subsamples))?,
        cutoff,
        threshold: probability("threshold", pick(args.threshold, &file.threshold).unwrap_or(defaults.threshold))?,
        pfer: Some(pfer),
        slices: positive("slices", pick(args.slices, &file.slices).unwrap_or(defaults.slices))?,
        d: positive("d", pick(args.d, &file.d).unwrap_or(defaults.d))?,
        stage_one: stage_one_setting(args.stage_one, file, common.seed)?,
        ..defaults
    };
    let need_z = !matches!(estimator, StabilityEstimator::OneStage);
    let data = load_data(args.data, file, need_z)?;
    let z = data.z.as_ref().map_or(&data.x.data, |z| &z.data);
    let rng = SeededRng::new(common.seed);
    let path = stability_selection(&data.y, &data.x.data, z, estimator, &opts, &rng)?;

    let names = &data.x.names;
    let mut rows = Vec::with_capacity(names.len() * path.grid.len());
    for (j, name) in names.iter().enumerate() {
        for (g, mu) in path.grid.iter().enumerate() {
            rows.push(vec![
                name.clone(),
                g.to_string(),
                sig(*mu, FULL_DIGITS),
                sig(path.probability[j][g], FULL_DIGITS),
            ]);
        }
    }
    ensure_dir(&common.out_dir)?;
    write_csv(
        &common.out_dir.join("stability.csv"),
        &["variable", "grid_index", "penalty", "probability"],
        &rows,
    )?;
    let max_prob: Vec<serde_json::Value> = names
        .iter()
        .zip(&path.max_probability)
        .map(|(n, p)| json!({ "variable": n, "max_probability": p }))
        .collect();
    let record = json!({
        "estimator": stability_label(estimator),
        "subsamples": path.subsamples,
        "subsample_size": path.subsample_size,
        "failures": path.failures,
        "cutoff": path.cutoff,
        "threshold": path.threshold,
        "pfer": pfer,
        "max_model_size": path.max_model_size,
        "grid": path.grid,
        "mean_model_size": path.mean_model_size,
        "admissible": path.admissible,
        "max_probability": max_prob,
        "selected": names_of(names, &path.selected),
        "seed": common.seed,
    });
    write_json(&common.out_dir.join("stability.json"), &record)?;
    println!("selected: {}", names_of(names, &path.selected).join(","));
    Ok(())
}
