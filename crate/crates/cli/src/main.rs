//! `dde`: simulate, initialize, fit, select, check and evaluate deep discrete
//! encoders from the command line.
//!
//! Exit codes: 0 success; 1 a checked condition fails; 2 usage error or an
//! undecided condition; 3 invalid input or shape mismatch; 4 I/O or parse
//! failure; 5 numerical or capacity failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dde::bench::{curves_csv, run_benchmark, ExperimentSpec};
use dde::estimation::{fit, random_init, Algo, FitConfig, FitReport};
use dde::evaluation::{
    accuracy_g, align, apply_alignment, candidates_for_layer, ebic_select, fit_candidates,
    heldout_perplexity, lrt_select, posterior_latents, rmse_theta, topic_metrics, DocFreq,
};
use dde::identifiability::{
    check_condition_a, check_condition_b, check_condition_c, default_pure_rows,
    validate_model_assumptions, ConditionReport, Holds,
};
use dde::io::{read_matrix, read_model, write_matrix, write_model};
use dde::model::{graphs_from_coefficients, make_benchmark_params, sample, ParamKind};
use dde::spectral::{
    candidate_grid, select_latent_dims, spectral_init, SpectralConfig, SpectralInit,
};
use dde::{Dataset, DdeError, DdeModel, FamilyKind, ObservedFamily, SCHEMA};
use ndarray::{concatenate, Array2, Axis};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "dde", version, about = "Deep discrete encoders")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw a dataset from a benchmark model.
    Simulate(SimulateArgs),
    /// Spectral initialization.
    Init(InitArgs),
    /// Penalized EM or SAEM.
    Fit(FitArgs),
    /// Select latent widths.
    SelectK(SelectArgs),
    /// Check identifiability conditions of a model file.
    CheckId(CheckArgs),
    /// Compare an estimated model with the truth.
    Evaluate(EvaluateArgs),
    /// Run a simulation benchmark from a TOML or JSON spec.
    Benchmark(BenchArgs),
    /// Post-fit metrics.
    #[command(subcommand)]
    Metrics(MetricsCmd),
}

#[derive(Subcommand)]
enum MetricsCmd {
    /// Representative words, coherence, similarity and perplexity.
    Topic(TopicArgs),
}

/// Comma-separated positive integers.
#[derive(Clone, Debug)]
struct Widths(Vec<usize>);

fn parse_list(s: &str) -> std::result::Result<Widths, String> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("'{t}': {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()
        .and_then(|v| {
            if v.contains(&0) {
                Err("widths must be positive".into())
            } else {
                Ok(Widths(v))
            }
        })
}

#[derive(Args)]
struct DataArgs {
    /// Header-free N x J CSV.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    family: FamilyKind,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        Ok(Dataset::new(
            read_matrix(&self.data)?,
            ObservedFamily::new(self.family),
        )?)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "strict")]
    kind: ParamKind,
    /// `J,K1,...,KD`.
    #[arg(long, value_parser = parse_list)]
    dims: Widths,
    #[arg(long)]
    family: FamilyKind,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for `data.csv`, `truth.json` and `latents.csv`.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct InitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// `K1,...,KD`.
    #[arg(long, value_parser = parse_list)]
    dims: Widths,
    /// Initial model JSON.
    #[arg(long)]
    out: PathBuf,
    /// Also write the initial latents (layers side by side).
    #[arg(long)]
    latents: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitChoice {
    Spectral,
    Random,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_parser = parse_list)]
    dims: Widths,
    #[arg(long, default_value = "saem")]
    algo: Algo,
    #[arg(long, value_enum, default_value = "spectral")]
    init: InitChoice,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long, default_value_t = 1)]
    gibbs_c: usize,
    /// Fitted model JSON.
    #[arg(long)]
    out: PathBuf,
    /// Fit report JSON (trace, iterations, timing).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectMethod {
    Spectral,
    Ebic,
    Lrt,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Number of latent layers.
    #[arg(long, default_value_t = 2)]
    depth: usize,
    #[arg(long, value_enum, default_value = "spectral")]
    method: SelectMethod,
    /// For EBIC/LRT: widths of the other layers, `K1,...,KD`; the selected
    /// layer's entry is ignored.
    #[arg(long, value_parser = parse_list)]
    dims: Option<Widths>,
    /// For EBIC/LRT: 1-based layer to select.
    #[arg(long, default_value_t = 1)]
    layer: usize,
    /// Candidate grid (defaults to the spectral grid).
    #[arg(long, value_parser = parse_list)]
    grid: Option<Widths>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConditionArg {
    A,
    A3,
    B,
    C,
    Assumptions,
    All,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, ignore_case = true, default_value = "all")]
    condition: ConditionArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Estimated model JSON.
    #[arg(long)]
    model: PathBuf,
    /// True model JSON.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// `.toml` or `.json` experiment spec.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Plottable per-N, per-layer curves.
    #[arg(long)]
    curves: Option<PathBuf>,
}

#[derive(Args)]
struct TopicArgs {
    #[arg(long)]
    model: PathBuf,
    /// J x J document-frequency CSV (diagonal: single-word counts).
    #[arg(long, conflicts_with = "counts", required_unless_present = "counts")]
    doc_freq: Option<PathBuf>,
    /// N x J word counts; document frequencies are computed from them.
    #[arg(long)]
    counts: Option<PathBuf>,
    #[arg(long, default_value_t = 15)]
    top: usize,
    /// With --counts: also report train/test perplexity.
    #[arg(long, requires = "counts")]
    perplexity: bool,
    #[arg(long, default_value_t = 0.8)]
    train_share: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// SHA-256 over the labelled contents of every input.
fn digest(parts: &[(&str, &[u8])]) -> String {
    let mut h = Sha256::new();
    for (label, bytes) in parts {
        h.update(label.as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn file_digest(paths: &[&Path]) -> Result<String> {
    let contents: Vec<(String, Vec<u8>)> = paths
        .iter()
        .map(|p| {
            Ok((
                p.file_name()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                read_bytes(p)?,
            ))
        })
        .collect::<Result<_>>()?;
    Ok(digest(
        &contents
            .iter()
            .map(|(l, b)| (l.as_str(), b.as_slice()))
            .collect::<Vec<_>>(),
    ))
}

fn read_bytes(p: &Path) -> Result<Vec<u8>> {
    fs::read(p).map_err(|e| {
        DdeError::Io {
            path: p.to_path_buf(),
            source: e,
        }
        .into()
    })
}

fn write_text(p: &Path, text: &str) -> Result<()> {
    fs::write(p, text).map_err(|e| {
        DdeError::Io {
            path: p.to_path_buf(),
            source: e,
        }
        .into()
    })
}

fn envelope(inputs_digest: String, seed: Option<u64>, body: Value) -> Value {
    let mut out = json!({ "schema": SCHEMA, "inputs_digest": inputs_digest, "seed": seed });
    if let (Value::Object(o), Value::Object(b)) = (&mut out, body) {
        o.extend(b);
    }
    out
}

fn emit(v: &Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(v)? + "\n";
    match out {
        Some(p) => write_text(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn side_by_side(layers: &[Array2<u8>]) -> Array2<u8> {
    let views: Vec<_> = layers.iter().map(|m| m.view()).collect();
    concatenate(Axis(1), &views).expect("layers share the row count")
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    if a.dims.0.len() < 2 {
        anyhow::bail!(DdeError::Validation(
            "--dims needs J and at least one latent width".into()
        ));
    }
    let truth = make_benchmark_params(
        a.kind,
        a.dims.0[0],
        &a.dims.0[1..],
        ObservedFamily::new(a.family),
    )?;
    let (data, lat) = sample(&truth, a.n as usize, a.seed)?;
    fs::create_dir_all(&a.out).map_err(|e| DdeError::Io {
        path: a.out.clone(),
        source: e,
    })?;
    write_matrix(&a.out.join("data.csv"), &data.y)?;
    write_model(&a.out.join("truth.json"), &truth)?;
    write_matrix(&a.out.join("latents.csv"), &side_by_side(&lat.layers))?;
    println!("seed {}", a.seed);
    Ok(())
}

fn init(a: &InitArgs) -> Result<()> {
    let data = a.data.load()?;
    let s = spectral_init(&data, &a.dims.0, &SpectralConfig::default())?;
    write_model(&a.out, &s.model0)?;
    if let Some(p) = &a.latents {
        write_matrix(p, &side_by_side(&s.a0.layers))?;
    }
    Ok(())
}

fn report_json(r: &FitReport) -> Value {
    json!({
        "algo": r.algo,
        "iters": r.iters,
        "converged": r.converged,
        "objective_trace": r.objective_trace,
        "wallclock_seconds": r.wallclock_seconds,
        "row_failures": r.row_failures,
    })
}

fn fit_cmd(a: &FitArgs) -> Result<()> {
    let data = a.data.load()?;
    let start: SpectralInit = match a.init {
        InitChoice::Spectral => spectral_init(&data, &a.dims.0, &SpectralConfig::default())?,
        InitChoice::Random => random_init(&data, &a.dims.0, a.seed)?,
    };
    let cfg = FitConfig {
        algo: a.algo,
        max_iter: a.max_iter,
        gibbs_c: a.gibbs_c,
        seed: a.seed,
        ..FitConfig::default()
    };
    let r = fit(&data, &start, &cfg)?;
    write_model(&a.out, &r.model_hat)?;
    if let Some(p) = &a.report {
        emit(
            &envelope(file_digest(&[&a.data.data])?, Some(a.seed), report_json(&r)),
            Some(p),
        )?;
    }
    Ok(())
}

fn select_k(a: &SelectArgs) -> Result<()> {
    let data = a.data.load()?;
    let scfg = SpectralConfig::default();
    let body = match a.method {
        SelectMethod::Spectral => {
            let sel = select_latent_dims(
                &data,
                a.depth,
                &scfg,
                a.grid.as_ref().map(|g| g.0.as_slice()),
            )?;
            json!({ "method": "spectral", "dims": sel.iter().map(|s| s.chosen).collect::<Vec<_>>(), "layers": sel })
        }
        SelectMethod::Ebic | SelectMethod::Lrt => {
            let dims = a.dims.as_ref().map(|d| d.0.clone()).ok_or_else(|| {
                DdeError::Validation("--dims is required for EBIC and LRT".into())
            })?;
            if a.layer == 0 || a.layer > dims.len() {
                anyhow::bail!(DdeError::Validation(format!(
                    "--layer must be in 1..={}",
                    dims.len()
                )));
            }
            let width = if a.layer == 1 {
                data.j()
            } else {
                dims[a.layer - 2]
            };
            let grid = a
                .grid
                .as_ref()
                .map(|g| g.0.clone())
                .unwrap_or_else(|| candidate_grid(width));
            let cands = candidates_for_layer(&dims, a.layer - 1, &grid);
            let cfg = FitConfig {
                seed: a.seed,
                ..FitConfig::for_selection(data.n())
            };
            let fits = fit_candidates(&data, &cands, &scfg, &cfg)?;
            if let SelectMethod::Ebic = a.method {
                let i = ebic_select(&fits)
                    .ok_or_else(|| DdeError::Validation("empty candidate grid".into()))?;
                json!({ "method": "ebic", "layer": a.layer, "dims": fits[i].dims, "candidates": fits })
            } else {
                let (i, steps) = lrt_select(&fits, a.alpha)?;
                json!({ "method": "lrt", "layer": a.layer, "alpha": a.alpha, "dims": fits[i].dims, "candidates": fits, "tests": steps })
            }
        }
    };
    emit(
        &envelope(file_digest(&[&a.data.data])?, Some(a.seed), body),
        a.out.as_deref(),
    )
}

fn check_reports(model: &DdeModel, which: ConditionArg) -> Vec<ConditionReport> {
    let graphs = graphs_from_coefficients(model);
    let mut out = Vec::new();
    for (d, g) in graphs.layers.iter().enumerate() {
        let layer = d + 1;
        if matches!(which, ConditionArg::A | ConditionArg::All) {
            out.push(check_condition_a(g, 2).at_layer(layer));
        }
        if matches!(which, ConditionArg::A3) {
            out.push(check_condition_a(g, 3).at_layer(layer));
        }
        if matches!(which, ConditionArg::B | ConditionArg::All) {
            let pure = default_pure_rows(g).unwrap_or_default();
            out.push(check_condition_b(&model.coefs[d], &pure).at_layer(layer));
        }
        if matches!(which, ConditionArg::C | ConditionArg::All) {
            out.push(check_condition_c(g).at_layer(layer));
        }
    }
    if matches!(which, ConditionArg::Assumptions | ConditionArg::All) {
        out.extend(validate_model_assumptions(model));
    }
    out
}

fn check_id(a: &CheckArgs) -> Result<Holds> {
    let model = read_model(&a.model)?;
    let reports = check_reports(&model, a.condition);
    let holds = Holds::all(reports.iter().map(|r| r.holds));
    let body = json!({ "holds": holds, "reports": reports });
    emit(
        &envelope(file_digest(&[&a.model])?, None, body),
        a.out.as_deref(),
    )?;
    Ok(holds)
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let hat = read_model(&a.model)?;
    let truth = read_model(&a.truth)?;
    if hat.dims != truth.dims || hat.n_obs != truth.n_obs || hat.family != truth.family {
        anyhow::bail!(DdeError::Validation(format!(
            "estimated model (J={}, K={:?}, {}) does not match the truth (J={}, K={:?}, {})",
            hat.n_obs, hat.dims, hat.family.kind, truth.n_obs, truth.dims, truth.family.kind
        )));
    }
    let al = align(&hat, &truth)?;
    let acc = accuracy_g(
        &graphs_from_coefficients(&hat),
        &graphs_from_coefficients(&truth),
        &al,
    )?;
    let rmse = rmse_theta(&hat, &truth, &al)?;
    let aligned = apply_alignment(&hat, &al);
    let layer_rmse: Vec<f64> = aligned
        .coefs
        .iter()
        .zip(&truth.coefs)
        .map(|(x, y)| {
            (x.iter()
                .zip(y.iter())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                / y.len() as f64)
                .sqrt()
        })
        .collect();
    let body = json!({
        "acc_g": { "per_layer": acc.per_layer, "overall": acc.overall },
        "rmse_theta": rmse,
        "rmse_b_per_layer": layer_rmse,
        "alignment": al.perms,
    });
    emit(
        &envelope(file_digest(&[&a.model, &a.truth])?, None, body),
        a.out.as_deref(),
    )
}

fn benchmark(a: &BenchArgs) -> Result<()> {
    let text = String::from_utf8(read_bytes(&a.spec)?).context("spec is not UTF-8")?;
    let spec = match a.spec.extension().and_then(|e| e.to_str()) {
        Some("json") => ExperimentSpec::from_json(&text)?,
        _ => ExperimentSpec::from_toml(&text)?,
    };
    let result = run_benchmark(&spec)?;
    let body = serde_json::to_value(&result)?;
    emit(
        &envelope(file_digest(&[&a.spec])?, Some(spec.seed), body),
        Some(&a.out),
    )?;
    if let Some(p) = &a.curves {
        write_text(p, &curves_csv(&result))?;
    }
    Ok(())
}

fn topic(a: &TopicArgs) -> Result<()> {
    let model = read_model(&a.model)?;
    let mut inputs: Vec<&Path> = vec![&a.model];
    let counts = match &a.counts {
        Some(p) => {
            inputs.push(p);
            Some(read_matrix(p)?)
        }
        None => None,
    };
    let freq = match (&a.doc_freq, &counts) {
        (Some(p), _) => {
            inputs.push(p);
            DocFreq {
                pair: read_matrix(p)?,
            }
        }
        (None, Some(y)) => DocFreq::from_counts(y),
        (None, None) => unreachable!("clap requires one of --doc-freq and --counts"),
    };
    let m = topic_metrics(&model.coefs[0], &freq, a.top)?;
    let mut body = serde_json::to_value(&m)?;
    if a.perplexity {
        let y = counts.expect("clap enforces --counts");
        let data = Dataset::new(y, model.family)?;
        let pp = heldout_perplexity(&model, &data, a.train_share, a.seed)?;
        body["perplexity"] = serde_json::to_value(pp)?;
        let est = posterior_latents(&model, &data, a.seed)?;
        body["latents_approximate"] = json!(est.approximate);
    }
    emit(
        &envelope(file_digest(&inputs)?, Some(a.seed), body),
        a.out.as_deref(),
    )
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<DdeError>() {
        Some(DdeError::Shape(_) | DdeError::Validation(_)) => 3,
        Some(DdeError::Io { .. } | DdeError::Parse { .. }) => 4,
        Some(DdeError::Numeric(_) | DdeError::Capacity { .. } | DdeError::UnsupportedFamily(_)) => {
            5
        }
        None if e.is::<serde_json::Error>() || e.is::<std::io::Error>() => 4,
        None => 3,
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("DDE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::warn!("could not size the thread pool: {e}");
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    configure_threads();
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Simulate(a) => simulate(a),
        Cmd::Init(a) => init(a),
        Cmd::Fit(a) => fit_cmd(a),
        Cmd::SelectK(a) => select_k(a),
        Cmd::CheckId(a) => match check_id(a) {
            Ok(h) => return ExitCode::from(h.exit_code() as u8),
            Err(e) => Err(e),
        },
        Cmd::Evaluate(a) => evaluate(a),
        Cmd::Benchmark(a) => benchmark(a),
        Cmd::Metrics(MetricsCmd::Topic(a)) => topic(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
