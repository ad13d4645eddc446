use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use finalsplit::dgp::{self, DgpKind, DgpSpec};
use finalsplit::experiments::{
    full_grid, mr, run_case_study, run_suite_with, smoke_grid, CaseStudyConfig, CaseStudyName, Method,
};
use finalsplit::io::{self, IoError};
use finalsplit::theory::{self, ConsistencyConfig, EtaModel, TheoryError};
use finalsplit::{
    fit_forest_with, grow_tree, grow_tree_kd, policy_report, predict, predict_proba, CriterionKind, DataError,
    Dataset, KdFinalResponse, Execution, ForestConfig, SplitCriterion, TrainConfig, Tree, TreeError, WeightFn,
};

#[derive(Parser, Debug)]
#[command(name = "finalsplit", version, about = "Trees with modified final splits for threshold targeting")]
struct Cli {
    /// TOML file whose keys mirror the flags (dashes as underscores); flags win
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Population split analysis for a one-feature model
    #[command(args_override_self = true)]
    Theory(TheoryArgs),
    /// Draw a synthetic sample and write it as CSV
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Run the simulation grid and write the report
    #[command(args_override_self = true)]
    Suite(SuiteArgs),
    /// Fit one tree on a CSV file or a synthetic sample
    #[command(args_override_self = true)]
    Fit(FitArgs),
    /// Fit a student tree on random-forest probabilities
    #[command(name = "kd-fit", args_override_self = true)]
    KdFit(KdFitArgs),
    /// Fit CART, MDFS, RF-CART and RF-MDFS on a case-study dataset
    #[command(name = "case-study", args_override_self = true)]
    CaseStudy(CaseStudyArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Criterion {
    Cart,
    Pfs,
    Mdfs,
    Wefs,
}

impl Criterion {
    fn kind(self) -> CriterionKind {
        match self {
            Criterion::Cart => CriterionKind::Cart,
            Criterion::Pfs => CriterionKind::Pfs,
            Criterion::Mdfs => CriterionKind::Mdfs,
            Criterion::Wefs => CriterionKind::Wefs,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SuiteMethod {
    Cart,
    Pfs,
    Mdfs,
    Wefs,
    RfCart,
    RfMdfs,
}

impl From<SuiteMethod> for Method {
    fn from(m: SuiteMethod) -> Self {
        match m {
            SuiteMethod::Cart => Method::Cart,
            SuiteMethod::Pfs => Method::Pfs,
            SuiteMethod::Mdfs => Method::Mdfs,
            SuiteMethod::Wefs => Method::Wefs,
            SuiteMethod::RfCart => Method::RfCart,
            SuiteMethod::RfMdfs => Method::RfMdfs,
        }
    }
}

/// Response used by the final PFS/MDFS split of a distilled tree.
#[derive(Clone, Copy, Debug, ValueEnum)]
enum KdFinal {
    Labels,
    Teacher,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Weight {
    Linear,
    Quadratic,
    Exponential,
}

impl From<Weight> for WeightFn {
    fn from(w: Weight) -> Self {
        match w {
            Weight::Linear => WeightFn::Linear,
            Weight::Quadratic => WeightFn::Quadratic,
            Weight::Exponential => WeightFn::Exponential,
        }
    }
}

fn parse_dgp(s: &str) -> Result<DgpKind, String> {
    DgpKind::parse(s).ok_or_else(|| {
        let names: Vec<&str> = DgpKind::ALL.iter().map(|k| k.name()).collect();
        format!("unknown process '{s}'; expected one of {}", names.join(", "))
    })
}

fn parse_model(s: &str) -> Result<String, String> {
    if EtaModel::by_name(s).is_some() {
        Ok(s.to_string())
    } else {
        Err(format!("unknown model '{s}'; expected one of {}", EtaModel::NAMES.join(", ")))
    }
}

fn parse_case(s: &str) -> Result<CaseStudyName, String> {
    CaseStudyName::parse(s).ok_or_else(|| format!("unknown case study '{s}'; expected pima or forestfire"))
}

#[derive(Args, Debug)]
struct TheoryArgs {
    /// Model of eta on [0, 1]
    #[arg(long, value_parser = parse_model)]
    model: String,
    #[arg(long)]
    c: f64,
    #[arg(long, default_value_t = SplitCriterion::DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long, value_enum, default_value_t = Weight::Linear)]
    weight: Weight,
    /// Number of evaluated split points
    #[arg(long, default_value_t = 1000)]
    grid: usize,
    /// Also run the finite-sample consistency experiment
    #[arg(long)]
    consistency: bool,
    #[arg(long, default_value_t = 50)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    jobs: Option<usize>,
    /// CSV of objective curves; printed to stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_parser = parse_dgp)]
    dgp: DgpKind,
    #[arg(long, default_value_t = 5000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV path; printed to stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SuiteArgs {
    /// Full grid: 8 processes x 3 thresholds x 4 depths x 3 leaf sizes, 50 replicates (default)
    #[arg(long, conflicts_with = "smoke")]
    full: bool,
    /// Reduced grid: depths {4, 6} and 5 replicates
    #[arg(long)]
    smoke: bool,
    /// Restrict to these processes
    #[arg(long, value_parser = parse_dgp, num_args = 1..)]
    dgp: Vec<DgpKind>,
    /// Restrict to these thresholds
    #[arg(long, num_args = 1..)]
    c: Vec<f64>,
    /// Restrict to these depths
    #[arg(long, num_args = 1..)]
    depth: Vec<usize>,
    /// Restrict to these minimum leaf fractions
    #[arg(long = "min-leaf-frac", num_args = 1..)]
    min_leaf_frac: Vec<f64>,
    /// Methods to compare [default: cart pfs mdfs wefs]
    #[arg(long, value_enum, num_args = 1..)]
    method: Vec<SuiteMethod>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = SplitCriterion::DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long = "teacher-trees", default_value_t = 100)]
    teacher_trees: usize,
    /// Score on an independent sample instead of the training sample
    #[arg(long)]
    holdout: bool,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// CSV file with a header row; every column but the response is a feature
    #[arg(long, conflicts_with = "dgp")]
    data: Option<PathBuf>,
    #[arg(long, default_value = "y")]
    response: String,
    /// Column holding the true probability, used for scoring only
    #[arg(long, default_value = "eta")]
    eta: String,
    /// Draw a synthetic sample from this process instead of reading a file
    #[arg(long, value_parser = parse_dgp)]
    dgp: Option<DgpKind>,
    #[arg(long, default_value_t = 5000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct TreeArgs {
    #[arg(long, value_enum, default_value_t = Criterion::Cart)]
    method: Criterion,
    /// Policy threshold; required by every method except cart
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, default_value_t = SplitCriterion::DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long, default_value_t = 3)]
    depth: usize,
    #[arg(long = "min-leaf-frac", default_value_t = 0.01)]
    min_leaf_frac: f64,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    tree: TreeArgs,
    /// Directory for the tree text and JSON files
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct KdFitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    tree: TreeArgs,
    #[arg(long = "teacher-trees", default_value_t = 100)]
    teacher_trees: usize,
    /// Response for the final PFS/MDFS split
    #[arg(long = "kd-final", value_enum, default_value_t = KdFinal::Labels)]
    kd_final: KdFinal,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CaseStudyArgs {
    #[arg(long, value_parser = parse_case)]
    name: CaseStudyName,
    /// CSV in the dataset's canonical layout
    #[arg(long)]
    data: PathBuf,
    /// Defaults to 0.6 for pima and 1/3 for forestfire
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, default_value_t = 3)]
    depth: usize,
    #[arg(long = "min-leaf-frac", default_value_t = 0.01)]
    min_leaf_frac: f64,
    #[arg(long = "teacher-trees", default_value_t = 100)]
    teacher_trees: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Downgrade shape mismatches with the canonical file to warnings
    #[arg(long)]
    lenient: bool,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Invalid input detected after parsing; exits with the usage code.
#[derive(Debug)]
struct Usage {
    message: String,
    remedy: &'static str,
}

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Usage {}

fn usage(message: impl Into<String>, remedy: &'static str) -> anyhow::Error {
    Usage { message: message.into(), remedy }.into()
}

fn main() -> ExitCode {
    let argv: Vec<OsString> = std::env::args_os().collect();
    let argv = match with_config(argv) {
        Ok(a) => a,
        Err(e) => return report(&e),
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}

fn report(e: &anyhow::Error) -> ExitCode {
    // error types already embed their sources in the message
    let mut message = e.to_string();
    for cause in e.chain().skip(1) {
        let text = cause.to_string();
        if !message.contains(&text) {
            message = format!("{message}: {text}");
        }
    }
    eprintln!("error: {message}");
    let (code, hint) = classify(e);
    eprintln!("hint: {hint}");
    ExitCode::from(code)
}

fn classify(e: &anyhow::Error) -> (u8, &'static str) {
    for cause in e.chain() {
        if let Some(u) = cause.downcast_ref::<Usage>() {
            return (1, u.remedy);
        }
        if let Some(io) = cause.downcast_ref::<IoError>() {
            let hint = match io {
                IoError::Io { .. } | IoError::Empty(_) | IoError::Csv { .. } => {
                    "check that the path exists and points to a readable CSV file with a header row"
                }
                IoError::MissingColumn(_) => "check the header, or name the label column with --response",
                IoError::Parse { .. } | IoError::UnknownCategory { .. } => "fix or remove the offending cell",
                IoError::Shape(_) => "pass --lenient to continue with a non-canonical file",
                IoError::Data(_) => "check that the response column holds 0/1 labels",
            };
            return (2, hint);
        }
        if cause.downcast_ref::<TreeError>().is_some() || cause.downcast_ref::<DataError>().is_some() {
            return (2, "check --depth, --min-leaf-frac, --c and that labels are 0/1");
        }
        if cause.downcast_ref::<TheoryError>().is_some() {
            return (2, "check --model and --c; c must lie strictly between 0 and 1");
        }
        if cause.downcast_ref::<toml::de::Error>().is_some() {
            return (1, "fix the configuration file; keys are flag names with underscores");
        }
    }
    (2, "re-run with the same flags after fixing the reported problem")
}

const SUBCOMMANDS: [&str; 6] = ["theory", "simulate", "suite", "fit", "kd-fit", "case-study"];

/// Splices the `--config` file's entries in right after the subcommand so
/// that explicit flags, which come later, override them.
fn with_config(mut argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path = None;
    let mut sub = None;
    let mut i = 1;
    while i < argv.len() {
        let arg = argv[i].to_string_lossy();
        if arg == "--config" {
            path = argv.get(i + 1).map(PathBuf::from);
            i += 2;
            continue;
        }
        if let Some(p) = arg.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        } else if sub.is_none() && SUBCOMMANDS.contains(&arg.as_ref()) {
            sub = Some(i);
        }
        i += 1;
    }
    let (Some(path), Some(sub)) = (path, sub) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display()), "check the --config path"))?;
    let extra = config_args(&text).with_context(|| format!("config {}", path.display()))?;
    argv.splice(sub + 1..sub + 1, extra);
    Ok(argv)
}

fn config_args(text: &str) -> Result<Vec<OsString>> {
    let table: toml::Table = toml::from_str(text)?;
    let mut out = Vec::new();
    for (key, value) in table {
        let flag = format!("--{}", key.replace('_', "-"));
        let scalar = |v: &toml::Value| -> Result<String> {
            match v {
                toml::Value::String(s) => Ok(s.clone()),
                toml::Value::Integer(i) => Ok(i.to_string()),
                toml::Value::Float(f) => Ok(f.to_string()),
                other => Err(usage(
                    format!("config key '{key}' has unsupported value {other}"),
                    "use strings, numbers, booleans or arrays of those",
                )),
            }
        };
        match &value {
            toml::Value::Boolean(true) => out.push(flag.into()),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                if !items.is_empty() {
                    out.push(flag.into());
                    for item in items {
                        out.push(scalar(item)?.into());
                    }
                }
            }
            v => {
                out.push(flag.into());
                out.push(scalar(v)?.into());
            }
        }
    }
    Ok(out)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Theory(a) => theory_cmd(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Suite(a) => suite_cmd(a),
        Command::Fit(a) => fit_cmd(a),
        Command::KdFit(a) => kd_fit_cmd(a),
        Command::CaseStudy(a) => case_study_cmd(a),
    }
}

/// Sizes the global worker pool; a single worker also selects the serial
/// code paths.
fn execution(jobs: Option<usize>) -> Result<Execution> {
    match jobs {
        Some(0) => Err(usage("--jobs must be at least 1", "pass --jobs 1 for serial execution")),
        Some(j) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build_global()
                .context("cannot size the worker pool")?;
            Ok(if j == 1 { Execution::Sequential } else { Execution::Parallel })
        }
        None => Ok(Execution::Parallel),
    }
}

fn check_c(c: f64) -> Result<()> {
    if c > 0.0 && c < 1.0 {
        Ok(())
    } else {
        Err(usage(format!("--c must lie strictly between 0 and 1, got {c}"), "pass a threshold such as --c 0.75"))
    }
}

fn write_or_print(out: Option<&Path>, body: &str) -> Result<()> {
    match out {
        Some(path) => {
            io::write_file(path, body)?;
            println!("wrote {}", path.display());
        }
        None => print!("{body}"),
    }
    Ok(())
}

fn theory_cmd(a: TheoryArgs) -> Result<()> {
    check_c(a.c)?;
    execution(a.jobs)?;
    let model = EtaModel::by_name(&a.model).ok_or_else(|| anyhow!("unknown model"))?;
    let w = WeightFn::from(a.weight);
    let rows = theory::evaluation_grid(&model, a.c, a.lambda, w, a.grid)?;
    let csv = theory::evaluations_csv(&rows);

    let mut summary = vec![format!("model {} (c = {})", model.name(), a.c)];
    let risk = |s: f64| theory::risk(&model, a.c, s);
    let s_cart = theory::cart_split(&model)?;
    summary.push(format!("CART split {s_cart:.6}  risk {:.6}", risk(s_cart)?));
    let s_pfs = theory::pfs_split(&model, a.c, a.lambda, w)?;
    summary.push(format!("PFS split  {s_pfs:.6}  risk {:.6}", risk(s_pfs)?));
    match theory::mdfs_split(&model, a.c) {
        Ok(s) => summary.push(format!("MDFS split {s:.6}  risk {:.6}", risk(s)?)),
        Err(e) => summary.push(format!("MDFS split unavailable: {e}")),
    }
    let cross: Vec<String> = theory::crossings(&model, a.c).iter().map(|x| format!("{x:.6}")).collect();
    summary.push(format!("eta = c at [{}]", cross.join(", ")));

    if a.out.is_some() {
        write_or_print(a.out.as_deref(), &csv)?;
        for line in &summary {
            println!("{line}");
        }
    } else {
        print!("{csv}");
    }
    if a.consistency {
        let cfg = ConsistencyConfig {
            replicates: a.replicates,
            seed: a.seed,
            ..ConsistencyConfig::default()
        };
        println!("n,median_abs_error,median_risk");
        for r in theory::consistency_experiment(&model, a.c, &cfg)? {
            println!("{},{:.6},{:.6}", r.n, r.median_abs_error, r.median_risk);
        }
    }
    Ok(())
}

fn simulate_cmd(a: SimulateArgs) -> Result<()> {
    if a.n == 0 {
        return Err(usage("--n must be at least 1", "pass a sample size such as --n 5000"));
    }
    let sample = dgp::sample(&DgpSpec::from(a.dgp), a.n, a.seed);
    write_or_print(a.out.as_deref(), &dgp::sample_csv(&sample))
}

fn suite_cmd(a: SuiteArgs) -> Result<()> {
    let exec = execution(a.jobs)?;
    for &c in &a.c {
        check_c(c)?;
    }
    let methods: Vec<Method> = if a.method.is_empty() {
        Method::DIRECT.to_vec()
    } else {
        a.method.iter().map(|&m| m.into()).collect()
    };
    let mut grid = if a.smoke { smoke_grid(a.seed, &methods) } else { full_grid(a.seed, &methods) };
    grid.retain(|s| {
        (a.dgp.is_empty() || a.dgp.contains(&s.dgp.kind))
            && (a.c.is_empty() || a.c.iter().any(|&c| (c - s.c).abs() < 1e-12))
            && (a.depth.is_empty() || a.depth.contains(&s.max_depth))
            && (a.min_leaf_frac.is_empty() || a.min_leaf_frac.iter().any(|&r| (r - s.min_leaf_fraction).abs() < 1e-12))
    });
    if grid.is_empty() {
        return Err(usage(
            "the filters select no settings",
            "use thresholds in {0.6, 0.7, 0.8}, depths in {4..7} (smoke: {4, 6}) and leaf fractions in {0.01, 0.02, 0.03}",
        ));
    }
    for s in &mut grid {
        s.lambda = a.lambda;
        s.teacher_trees = a.teacher_trees;
        s.holdout = a.holdout;
        if let Some(n) = a.n {
            s.n = n;
        }
        if let Some(r) = a.replicates {
            s.replicates = r;
        }
    }
    if grid[0].n == 0 || grid[0].replicates == 0 {
        return Err(usage("--n and --replicates must be at least 1", "pass positive values"));
    }
    let report = run_suite_with(&grid, exec);
    let files = io::write_suite_report(&report, &a.out)?;
    for w in &report.win_rates {
        println!(
            "{} beats {} in {}/{} settings ({:.1}%)",
            w.method.label(),
            w.baseline.label(),
            w.wins,
            w.settings,
            100.0 * w.rate()
        );
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

/// Dataset from `--data` or `--dgp`. A file column named like `--eta` is
/// taken as the true probability instead of a feature.
fn load_data(a: &DataArgs) -> Result<Dataset> {
    match (&a.data, a.dgp) {
        (Some(path), _) => {
            let raw = io::load_numeric_csv(path, &a.response)?;
            let Some(j) = raw.feature_names().iter().position(|f| *f == a.eta) else {
                return Ok(raw);
            };
            let eta = raw.column(j).to_vec();
            let cols = raw
                .feature_names()
                .iter()
                .zip(raw.columns())
                .enumerate()
                .filter(|(k, _)| *k != j)
                .map(|(_, (name, col))| (name.clone(), col.clone()))
                .collect();
            Ok(Dataset::new(cols, raw.response().to_vec(), Some(eta))?)
        }
        (None, Some(kind)) => {
            if a.n == 0 {
                return Err(usage("--n must be at least 1", "pass a sample size such as --n 5000"));
            }
            Ok(dgp::sample(&DgpSpec::from(kind), a.n, a.seed).dataset)
        }
        (None, None) => Err(usage(
            "no data: pass --data FILE or --dgp NAME",
            "for example --dgp ball --n 5000",
        )),
    }
}

fn train_config(t: &TreeArgs) -> Result<(TrainConfig, f64)> {
    let c = match (t.method, t.c) {
        (_, Some(c)) => {
            check_c(c)?;
            c
        }
        (Criterion::Cart, None) => 0.5,
        (_, None) => return Err(usage("--c is required for pfs, mdfs and wefs", "pass a threshold such as --c 0.7")),
    };
    let criterion = match t.method {
        Criterion::Pfs => SplitCriterion::pfs(c, t.lambda),
        m => SplitCriterion::of_kind(m.kind(), c),
    };
    let cfg = TrainConfig::new(t.depth, t.min_leaf_frac, criterion);
    cfg.validate().map_err(|e| usage(e, "use --depth in 1..=32 and --min-leaf-frac in (0, 0.5]"))?;
    Ok((cfg, c))
}

fn show_tree(tree: &Tree, ds: &Dataset, c: Option<f64>, label: &str, out: Option<&Path>) -> Result<()> {
    println!("{}", tree.render());
    if let Some(c) = c {
        let policy = policy_report(tree, c);
        println!("targeted at c = {c}: {:.1}% of the sample", 100.0 * policy.cost);
        for leaf in &policy.targeted_leaves {
            println!("  {} (value {:.3}, samples {})", leaf.predicate(), leaf.value, leaf.samples);
        }
        if let Some(eta) = ds.eta_true() {
            let preds = predict(tree, ds)?;
            println!("misclassification rate: {:.2}%", 100.0 * mr(&preds, eta, c)?);
        }
    }
    if let Some(dir) = out {
        let txt = dir.join(format!("{label}.txt"));
        let json = dir.join(format!("{label}.json"));
        io::write_file(&txt, &format!("{}\n", tree.render()))?;
        io::write_file(&json, &format!("{}\n", tree.to_json()?))?;
        println!("wrote {}\nwrote {}", txt.display(), json.display());
    }
    Ok(())
}

fn fit_cmd(a: FitArgs) -> Result<()> {
    let (cfg, c) = train_config(&a.tree)?;
    let ds = load_data(&a.data)?;
    let tree = grow_tree(&ds, &cfg)?;
    let shown_c = a.tree.c.or((!cfg.criterion.is_cart()).then_some(c));
    let label = format!("{:?}", a.tree.method).to_lowercase();
    show_tree(&tree, &ds, shown_c, &label, a.out.as_deref())
}

fn kd_fit_cmd(a: KdFitArgs) -> Result<()> {
    let exec = execution(a.jobs)?;
    let (mut cfg, _) = train_config(&a.tree)?;
    cfg.kd_final_response = match a.kd_final {
        KdFinal::Labels => KdFinalResponse::Labels,
        KdFinal::Teacher => KdFinalResponse::Teacher,
    };
    if a.teacher_trees == 0 {
        return Err(usage("--teacher-trees must be at least 1", "pass --teacher-trees 100"));
    }
    let ds = load_data(&a.data)?;
    let teacher = ForestConfig {
        n_trees: a.teacher_trees,
        seed: a.data.seed,
        ..ForestConfig::default()
    };
    let forest = fit_forest_with(&ds, &teacher, exec)?;
    let probs = predict_proba(&forest, &ds)?;
    let tree = grow_tree_kd(&ds, &probs, &cfg)?;
    let label = format!("rf-{:?}", a.tree.method).to_lowercase();
    show_tree(&tree, &ds, a.tree.c, &label, a.out.as_deref())
}

fn case_study_cmd(a: CaseStudyArgs) -> Result<()> {
    execution(a.jobs)?;
    let c = a.c.unwrap_or(a.name.default_c());
    check_c(c)?;
    let strict = !a.lenient;
    let prepared = match a.name {
        CaseStudyName::Pima => io::load_pima(&a.data, strict)?,
        CaseStudyName::ForestFire => io::load_forestfire(&a.data, strict)?,
    };
    for w in &prepared.warnings {
        eprintln!("warning: {w}");
    }
    let mut cfg = CaseStudyConfig::new(c);
    cfg.depth = a.depth;
    cfg.min_leaf_fraction = a.min_leaf_frac;
    cfg.teacher.n_trees = a.teacher_trees;
    cfg.teacher.seed = a.seed;
    TrainConfig::new(cfg.depth, cfg.min_leaf_fraction, SplitCriterion::cart())
        .validate()
        .map_err(|e| usage(e, "use --depth in 1..=32 and --min-leaf-frac in (0, 0.5]"))?;
    let study = run_case_study(a.name.slug(), &prepared.dataset, &cfg)?;
    for t in &study.trees {
        println!("== {} ==\n{}", t.method.label(), t.tree.render());
    }
    for f in io::write_case_study(&study, &a.out)? {
        println!("wrote {}", f.display());
    }
    Ok(())
}
