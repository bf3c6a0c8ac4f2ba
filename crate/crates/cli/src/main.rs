//! `sivrel`: train shallow MLP classifiers and compute guaranteed feature
//! relevance, relevance maps and heat images.
//!
//! Pattern ids and class numbers on the command line are one-based (class
//! 10 is the MNIST digit 0); feature indices are zero-based.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sivia_relevance::data::{self, Dataset};
use sivia_relevance::relevance::{
    feature_relevance, worker_pool, write_score_row, write_segment_rows,
    SCORES_HEADER, SEGMENTS_HEADER,
};
use sivia_relevance::render::{heat_analysis, heat_image, relevance_map_image, EpsPolicy, MAP_WIDTH};
use sivia_relevance::train::{evaluate, train, TrainConfig};
use sivia_relevance::{class_relevance_map, Activation, Error, MlpModel, OutputSpec, RelevanceMap};

#[derive(Parser)]
#[command(name = "sivrel", version, about = "Guaranteed feature relevance for shallow MLP classifiers")]
struct Cli {
    /// Worker threads for relevance queries [default: available parallelism]
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a one-hidden-layer network by full-batch gradient descent
    Train(TrainArgs),
    /// Report accuracy and misclassified patterns
    Eval(EvalArgs),
    /// Partition and score the features of one pattern
    Relevance(RelevanceArgs),
    /// Relevance maps for every pattern of a class
    Map(MapArgs),
    /// Per-pixel relevance heat image for one MNIST digit
    Heat(HeatArgs),
    /// Append uniformly random features to a dataset
    Augment(AugmentArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Class CSV: numeric columns followed by the class name
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// MNIST IDX image file (optionally gzip-compressed); needs --mnist-labels
    #[arg(long, requires = "mnist_labels")]
    mnist_images: Option<PathBuf>,
}

#[derive(Args)]
struct DataArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    mnist_labels: Option<PathBuf>,
    /// Skip this many leading patterns
    #[arg(long, default_value_t = 0)]
    offset: usize,
    /// Use at most this many patterns
    #[arg(long)]
    limit: Option<usize>,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset, CliError> {
        let ds = match (&self.source.dataset, &self.source.mnist_images, &self.mnist_labels) {
            (Some(csv), _, _) => data::load_csv(csv, None)?,
            (None, Some(images), Some(labels)) => data::load_mnist(images, labels)?,
            _ => return Err(CliError::Usage("--mnist-images needs --mnist-labels".into())),
        };
        if self.offset == 0 && self.limit.is_none() {
            return Ok(ds);
        }
        let sub = ds.slice(self.offset, self.limit.unwrap_or(usize::MAX));
        if sub.is_empty() {
            return Err(CliError::Usage(format!(
                "--offset {} leaves no patterns (dataset has {})",
                self.offset,
                ds.len()
            )));
        }
        Ok(sub)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    /// Mean squared error with logistic outputs
    Mse,
    /// Cross-entropy with softmax outputs
    CrossEntropy,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 2)]
    hidden: usize,
    #[arg(long, default_value = "tanh")]
    hidden_activation: Activation,
    #[arg(long, value_enum, default_value = "mse")]
    loss: LossArg,
    #[arg(long, default_value_t = 0.5)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    momentum: f64,
    #[arg(long, default_value_t = 10_000)]
    max_epochs: usize,
    /// Stop once the loss is at or below this value
    #[arg(long, default_value_t = 1e-3)]
    goal: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    init_scale: f64,
    /// Model file to write
    #[arg(long)]
    out: PathBuf,
    /// Training log CSV (`epoch,loss`)
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Predictions CSV to write
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    /// `[1 - beta, 1]`
    Desired,
    /// `[o - beta, o + beta]` around the current output `o`
    AsPredicted,
    /// `[o, 1]`
    AtLeast,
}

#[derive(Args)]
struct RelevanceArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// One-based pattern id
    #[arg(long)]
    pattern: usize,
    /// Zero-based feature index, or "all"
    #[arg(long, default_value = "all")]
    feature: String,
    /// One-based output node [default: the pattern's class]
    #[arg(long)]
    node: Option<usize>,
    #[arg(long, default_value_t = 0.2)]
    beta: f64,
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    #[arg(long, value_enum, default_value = "desired")]
    mode: ModeArg,
}

#[derive(Args)]
struct MapArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// One-based class number or class name
    #[arg(long)]
    class: String,
    #[arg(long, default_value_t = 0.2)]
    beta: f64,
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    /// Output path prefix
    #[arg(long)]
    out: PathBuf,
    /// Also map the other outputs against the target `[0, beta]`
    #[arg(long)]
    include_inactive: bool,
}

#[derive(Args)]
struct HeatArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// One-based pattern id
    #[arg(long)]
    pattern: usize,
    /// "literal", "proportional" or a fixed accuracy
    #[arg(long, default_value = "literal")]
    eps_policy: EpsPolicy,
    /// Fixed accuracy; overrides --eps-policy
    #[arg(long)]
    eps: Option<f64>,
    /// Output path prefix
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AugmentArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 2)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scaled CSV to write
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| {
        CliError::Run(Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn load_model(path: &Path) -> Result<MlpModel, CliError> {
    Ok(data::load_model(path)?)
}

fn check_compatible(model: &MlpModel, ds: &Dataset) -> Result<(), CliError> {
    if model.input_dim() != ds.feature_count() {
        return Err(CliError::Run(Error::DimensionMismatch {
            expected: model.input_dim(),
            found: ds.feature_count(),
        }));
    }
    if model.class_labels() != ds.class_names.as_slice() {
        return Err(CliError::Run(Error::InvalidConfig(format!(
            "model classes {:?} differ from dataset classes {:?}",
            model.class_labels(),
            ds.class_names
        ))));
    }
    Ok(())
}

fn pattern_index(id: usize, ds: &Dataset) -> Result<usize, CliError> {
    if id == 0 || id > ds.len() {
        return Err(CliError::Usage(format!(
            "--pattern must be between 1 and {}, got {id}",
            ds.len()
        )));
    }
    Ok(id - 1)
}

fn class_index(arg: &str, names: &[String]) -> Result<usize, CliError> {
    if let Ok(n) = arg.parse::<usize>() {
        if (1..=names.len()).contains(&n) {
            return Ok(n - 1);
        }
    } else if let Some(i) = names.iter().position(|c| c == arg) {
        return Ok(i);
    }
    Err(CliError::Usage(format!(
        "--class must be a number between 1 and {} or one of {names:?}, got {arg:?}",
        names.len()
    )))
}

fn cmd_train(a: &TrainArgs) -> Result<(), CliError> {
    let ds = a.data.load()?;
    let base = match a.loss {
        LossArg::Mse => TrainConfig::mse(a.hidden, a.seed),
        LossArg::CrossEntropy => TrainConfig::cross_entropy(a.hidden, a.seed),
    };
    let config = TrainConfig {
        hidden_activation: a.hidden_activation,
        learning_rate: a.learning_rate,
        momentum: a.momentum,
        max_epochs: a.max_epochs,
        goal_loss: a.goal,
        init_scale: a.init_scale,
        ..base
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let outcome = train(&config, &ds)?;
    data::save_model(&outcome.model, &a.out)?;
    if let Some(log) = &a.log {
        write_file(log, outcome.log_csv())?;
    }
    let ev = evaluate(&outcome.model, &ds)?;
    println!("epochs: {}", outcome.epochs);
    println!("final {} loss: {:.6e}", config.loss, outcome.final_loss);
    println!(
        "training accuracy: {:.4} ({}/{})",
        ev.accuracy,
        ds.len() - ev.misclassified(&ds).len(),
        ds.len()
    );
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let ds = a.data.load()?;
    check_compatible(&model, &ds)?;
    let ev = evaluate(&model, &ds)?;
    let wrong = ev.misclassified(&ds);
    println!("accuracy: {:.4} ({}/{})", ev.accuracy, ds.len() - wrong.len(), ds.len());
    for &i in &wrong {
        println!(
            "pattern {}: class {} predicted as {}",
            i + 1,
            ds.class_names[ds.labels[i]],
            ds.class_names[ev.predictions[i]]
        );
    }
    if let Some(out) = &a.out {
        let mut csv = String::from("pattern_id,class,predicted\n");
        for (i, (&l, &p)) in ds.labels.iter().zip(&ev.predictions).enumerate() {
            let _ = writeln!(csv, "{},{},{}", i + 1, ds.class_names[l], ds.class_names[p]);
        }
        write_file(out, csv)?;
    }
    Ok(())
}

fn cmd_relevance(a: &RelevanceArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let ds = a.data.load()?;
    check_compatible(&model, &ds)?;
    let i = pattern_index(a.pattern, &ds)?;
    let x = &ds.patterns[i];
    let n = ds.feature_count();
    let features: Vec<usize> = if a.feature == "all" {
        (0..n).collect()
    } else {
        match a.feature.parse::<usize>() {
            Ok(k) if k < n => vec![k],
            _ => {
                return Err(CliError::Usage(format!(
                    "--feature must be \"all\" or an index below {n}, got {:?}",
                    a.feature
                )))
            }
        }
    };
    let m = model.output_dim();
    let node = match a.node {
        None => ds.labels[i],
        Some(j) if (1..=m).contains(&j) => j - 1,
        Some(j) => {
            return Err(CliError::Usage(format!("--node must be between 1 and {m}, got {j}")));
        }
    };
    let output = model.forward(x)?[node];
    let spec = match a.mode {
        ModeArg::Desired => OutputSpec::desired(node, a.beta),
        ModeArg::AsPredicted => OutputSpec::as_predicted(node, output, a.beta),
        ModeArg::AtLeast => OutputSpec::at_least(node, output),
    };
    let results = features
        .iter()
        .map(|&k| feature_relevance(&model, x, k, spec, a.eps))
        .collect::<Result<Vec<_>, _>>()?;
    let mut segments = String::from(SEGMENTS_HEADER);
    let mut scores = String::from(SCORES_HEADER);
    for (&k, r) in features.iter().zip(&results) {
        write_segment_rows(&mut segments, a.pattern, k, &r.partition);
        write_score_row(&mut scores, a.pattern, k, &r.score);
    }
    let target = results[0].partition.target;
    println!(
        "# pattern {} class {} node {} output {} target [{}, {}] eps {}",
        a.pattern,
        ds.class_names[ds.labels[i]],
        node + 1,
        output,
        target.lo(),
        target.hi(),
        a.eps
    );
    print!("{segments}\n{scores}");
    Ok(())
}

fn write_map(map: &RelevanceMap, prefix: &Path, tag: &str) -> Result<(), CliError> {
    for k in 0..map.feature_count() {
        let img = relevance_map_image(map, k, MAP_WIDTH);
        img.write_ppm(&with_suffix(prefix, &format!("{tag}_feature{k}.ppm")))?;
    }
    write_file(&with_suffix(prefix, &format!("{tag}_scores.csv")), map.scores_csv())?;
    write_file(&with_suffix(prefix, &format!("{tag}_segments.csv")), map.segments_csv())
}

fn cmd_map(a: &MapArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let ds = a.data.load()?;
    check_compatible(&model, &ds)?;
    let class = class_index(&a.class, &ds.class_names)?;
    let map = class_relevance_map(&model, &ds, class, OutputSpec::desired(class, a.beta), a.eps)?;
    if map.rows.is_empty() {
        return Err(CliError::Usage(format!("class {} has no patterns", a.class)));
    }
    write_map(&map, &a.out, &format!("_class{}", class + 1))?;
    let ev = evaluate(&model, &ds)?;
    let correct = |r: &sivia_relevance::relevance::RelevanceRow| {
        ev.predictions[r.pattern_index] == ds.labels[r.pattern_index]
    };
    println!(
        "class {} ({}): {} patterns, target [{}, 1], eps {}",
        class + 1,
        ds.class_names[class],
        map.rows.len(),
        1.0 - a.beta,
        a.eps
    );
    println!("feature,name,mean_R_correct,mean_R_all");
    for k in 0..map.feature_count() {
        let fmt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |v| format!("{v:.6}"));
        println!(
            "{k},{},{},{}",
            ds.feature_names[k],
            fmt(map.mean_score(k, correct)),
            fmt(map.mean_score(k, |_| true))
        );
    }
    if a.include_inactive {
        for node in (0..model.output_dim()).filter(|&j| j != class) {
            let spec = OutputSpec::inactive(node, a.beta);
            let inactive = sivia_relevance::relevance_map(
                &model,
                &ds,
                &ds.indices_of_class(class),
                class,
                spec,
                a.eps,
            )?;
            write_map(&inactive, &a.out, &format!("_class{}_inactive{}", class + 1, node + 1))?;
        }
    }
    Ok(())
}

fn cmd_heat(a: &HeatArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let ds = a.data.load()?;
    check_compatible(&model, &ds)?;
    let i = pattern_index(a.pattern, &ds)?;
    let policy = match a.eps {
        Some(e) if e > 0.0 && e.is_finite() => EpsPolicy::Fixed(e),
        Some(e) => return Err(CliError::Usage(format!("--eps must be positive, got {e}"))),
        None => a.eps_policy,
    };
    let class = ds.labels[i];
    let h = match heat_analysis(&model, &ds.patterns[i], class, policy) {
        Err(Error::MisclassifiedInput { predicted, .. }) => {
            return Err(CliError::Run(Error::InvalidConfig(format!(
                "pattern {} (class {}) is classified as class {} ({}); heat images need a correctly classified pattern",
                a.pattern,
                ds.class_names[class],
                predicted + 1,
                ds.class_names[predicted]
            ))))
        }
        other => other?,
    };
    let side = (ds.feature_count() as f64).sqrt() as usize;
    let (w, hgt) = if side * side == ds.feature_count() {
        (side, side)
    } else {
        (ds.feature_count(), 1)
    };
    heat_image(&h.scores(), w, hgt).write_ppm(&with_suffix(&a.out, ".ppm"))?;
    let mut scores = String::from(SCORES_HEADER);
    for (k, f) in h.features.iter().enumerate() {
        write_score_row(&mut scores, a.pattern, k, &f.score);
    }
    write_file(&with_suffix(&a.out, "_scores.csv"), scores)?;
    println!(
        "pattern {} class {} ({}): output {} target [{}, {}] eps {:e}",
        a.pattern,
        class + 1,
        ds.class_names[class],
        h.output,
        h.target.lo(),
        h.target.hi(),
        h.eps
    );
    Ok(())
}

fn cmd_augment(a: &AugmentArgs) -> Result<(), CliError> {
    if a.count == 0 {
        return Err(CliError::Usage("--count must be at least 1".into()));
    }
    let ds = a.data.load()?;
    let aug = data::augment_random_features(&ds, a.count, a.seed)?;
    write_file(&a.out, aug.to_scaled_csv())?;
    println!(
        "{} patterns, {} features ({})",
        aug.len(),
        aug.feature_count(),
        aug.generator.as_deref().unwrap_or("")
    );
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let pool = worker_pool(cli.workers).map_err(|e| CliError::Usage(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Relevance(a) => cmd_relevance(a),
        Command::Map(a) => cmd_map(a),
        Command::Heat(a) => cmd_heat(a),
        Command::Augment(a) => cmd_augment(a),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
