use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use psm_core::cascade::{build_cascades, cascade_size_histogram};
use psm_core::config::PipelineConfig;
use psm_core::corpus::{generate_synthetic_with, load_corpus, write_corpus, Corpus};
use psm_core::eval::{EvaluationReport, GroupSpec};
use psm_core::features::layout::TOPICS;
use psm_core::features::FeatureContext;
use psm_core::learn::{train, ClassifierKind, LabeledDataset};
use psm_core::pipeline::{
    causal_csv, compute_causal, evaluate, feature_matrix_csv, featurizable_users, full_features,
    with_threads, EvalPlan, RunManifest,
};
use psm_core::textproc::Resources;

const MANIFEST: &str = "manifest.json";

/// Pathogenic social media account detection pipeline.
#[derive(Parser, Debug)]
#[command(name = "psm", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// TOML config file; defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Viral threshold.
    #[arg(long, global = true)]
    theta: Option<usize>,
    /// Number of LDA topics.
    #[arg(long = "k-topics", global = true)]
    k_topics: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic corpus and a matching config.
    Synth,
    /// Cascade-size histogram.
    Cascades {
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        min_size: u64,
    },
    /// Feature matrix for every user with tweets.
    Features {
        /// Also write the causal scores.
        #[arg(long)]
        dump_causal: bool,
    },
    /// Train one classifier on all labeled users.
    Train {
        #[arg(long, default_value = "gbdt", value_parser = parse_classifier)]
        classifier: ClassifierKind,
    },
    /// Cross-validated evaluation.
    Eval {
        #[arg(long, default_value = "gbdt", value_parser = parse_classifier)]
        classifier: ClassifierKind,
        #[arg(long, default_value = "all", value_parser = parse_group)]
        group: GroupSpec,
    },
    /// Per-group GBDT scores, ranked.
    Importance,
    /// Welch tests on the text statistics.
    Stats,
}

fn parse_classifier(s: &str) -> Result<ClassifierKind, String> {
    ClassifierKind::parse(s).ok_or_else(|| format!("expected one of gbdt, rf, dt, lr, nb; got {s}"))
}

fn parse_group(s: &str) -> Result<GroupSpec, String> {
    GroupSpec::parse(s).ok_or_else(|| format!("expected one of user, source, content, all; got {s}"))
}

enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

/// Collects artifacts under the output directory and records them in the
/// manifest.
struct Outputs {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Outputs {
    fn new(dir: &Path, command: &str, config: &PipelineConfig) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            manifest: RunManifest::new(command, config),
        })
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        self.manifest
            .add_input(path)
            .with_context(|| format!("hashing {}", path.display()))
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.add_output(name, bytes);
        info!("wrote {}", path.display());
        Ok(())
    }

    fn finish(self) -> Result<()> {
        let path = self.dir.join(MANIFEST);
        fs::write(&path, self.manifest.to_json())
            .with_context(|| format!("writing {}", path.display()))
    }
}

fn load_config(g: &GlobalArgs) -> Result<PipelineConfig, Failure> {
    let mut cfg = match &g.config {
        Some(p) => PipelineConfig::load(p)
            .with_context(|| format!("loading config {}", p.display()))?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(t) = g.theta {
        if t < 2 {
            return Err(Failure::Usage("--theta must be at least 2".into()));
        }
        cfg.theta = t;
        cfg.synth.theta = t;
    }
    if let Some(k) = g.k_topics {
        if k != TOPICS {
            return Err(Failure::Usage(format!(
                "--k-topics must be {TOPICS}: the feature layout reserves {TOPICS} topic columns"
            )));
        }
        cfg.lda.k = k;
        cfg.lda.alpha = 50.0 / k as f64;
    }
    cfg.validate().context("invalid configuration")?;
    Ok(cfg)
}

fn resources(cfg: &PipelineConfig) -> Result<Resources> {
    if cfg.stopwords_path.is_none() && cfg.lexicon_path.is_none() {
        return Ok(Resources::bundled().clone());
    }
    Resources::load(cfg.stopwords_path.as_deref(), cfg.lexicon_path.as_deref())
        .context("loading text resources")
}

fn load(cfg: &PipelineConfig, out: &mut Outputs) -> Result<Corpus> {
    let i = &cfg.input;
    let loaded = load_corpus(&i.tweets, &i.profiles, &i.urls, cfg).context("loading corpus")?;
    for w in &loaded.warnings {
        warn!("{w}");
    }
    for p in [&i.tweets, &i.profiles, &i.urls] {
        out.input(p)?;
    }
    Ok(loaded.corpus)
}

fn synth(cfg: &PipelineConfig, g: &GlobalArgs) -> Result<()> {
    let corpus = generate_synthetic_with(&cfg.synth, cfg.seed, cfg).context("generating corpus")?;
    let mut written = corpus.config.clone();
    written.input = Default::default();
    let mut out = Outputs::new(&g.out, "synth", &written)?;
    let dir = &out.dir;
    let names = ["tweets.jsonl", "profiles.jsonl", "urls.jsonl"];
    let paths = names.map(|n| dir.join(n));
    write_corpus(&corpus, &paths[0], &paths[1], &paths[2]).context("writing corpus")?;
    for (n, p) in names.iter().zip(&paths) {
        let bytes = fs::read(p)?;
        out.manifest.add_output(n, &bytes);
    }
    out.write("config.toml", written.to_toml_string().as_bytes())?;
    out.finish()
}

fn cascades(cfg: &PipelineConfig, g: &GlobalArgs, min_size: u64) -> Result<()> {
    let mut out = Outputs::new(&g.out, "cascades", cfg)?;
    let corpus = load(cfg, &mut out)?;
    let cs = build_cascades(&corpus, cfg.theta);
    let mut csv = String::from("size,frequency\n");
    for (size, freq) in cascade_size_histogram(&cs, min_size as usize) {
        csv.push_str(&format!("{size},{freq}\n"));
    }
    out.write("cascades.csv", csv.as_bytes())?;
    out.finish()
}

fn features(cfg: &PipelineConfig, g: &GlobalArgs, dump_causal: bool) -> Result<()> {
    let mut out = Outputs::new(&g.out, "features", cfg)?;
    let corpus = load(cfg, &mut out)?;
    let res = resources(cfg)?;
    let causal = compute_causal(&corpus, cfg);
    if dump_causal {
        out.write("causal.csv", causal_csv(&corpus, &causal).as_bytes())?;
    }
    let ctx = FeatureContext::new(&corpus, cfg, &res, &causal);
    let users = featurizable_users(&ctx);
    let (_, vectors) = full_features(&ctx, &users)?;
    out.write("features.csv", feature_matrix_csv(&corpus, &vectors).as_bytes())?;
    out.finish()
}

fn train_cmd(cfg: &PipelineConfig, g: &GlobalArgs, kind: ClassifierKind) -> Result<()> {
    let mut out = Outputs::new(&g.out, &format!("train {}", kind.name()), cfg)?;
    let corpus = load(cfg, &mut out)?;
    let res = resources(cfg)?;
    let causal = compute_causal(&corpus, cfg);
    let ctx = FeatureContext::new(&corpus, cfg, &res, &causal);
    let (users, labels) = psm_core::pipeline::labeled_users(&ctx);
    let (models, vectors) = full_features(&ctx, &users)?;
    let rows = vectors.into_iter().map(|v| v.values).collect();
    let data = LabeledDataset::from_rows(rows, labels)?;
    let model = train(kind, &data, &cfg.classifiers, cfg.stage_seeds().models)?;
    let mut bytes = Vec::new();
    model.write_to(&mut bytes)?;
    out.write("model.psm", &bytes)?;
    let mut topics = Vec::new();
    models.topics.write_to(&mut topics)?;
    out.write("topics.lda", &topics)?;
    out.finish()
}

fn run_eval(cfg: &PipelineConfig, out: &mut Outputs, plan: &EvalPlan) -> Result<EvaluationReport> {
    let corpus = load(cfg, out)?;
    let res = resources(cfg)?;
    let causal = compute_causal(&corpus, cfg);
    let ctx = FeatureContext::new(&corpus, cfg, &res, &causal);
    Ok(evaluate(&ctx, plan)?)
}

fn eval_cmd(cfg: &PipelineConfig, g: &GlobalArgs, kind: ClassifierKind, group: GroupSpec) -> Result<()> {
    let command = format!("eval {} {}", kind.name(), group.name());
    let mut out = Outputs::new(&g.out, &command, cfg)?;
    let plan = EvalPlan {
        classifiers: vec![kind],
        group,
        ..Default::default()
    };
    let report = run_eval(cfg, &mut out, &plan)?;
    out.write("report.json", report.to_json().as_bytes())?;
    out.write("folds.csv", report.folds_csv().as_bytes())?;
    out.finish()
}

fn importance(cfg: &PipelineConfig, g: &GlobalArgs) -> Result<()> {
    let mut out = Outputs::new(&g.out, "importance", cfg)?;
    let plan = EvalPlan {
        classifiers: Vec::new(),
        importance: true,
        ..Default::default()
    };
    let report = run_eval(cfg, &mut out, &plan)?;
    let mut groups = report.groups.clone();
    groups.sort_by_key(|gi| gi.rank);
    let mut csv = String::from("group,f1\n");
    for gi in &groups {
        csv.push_str(&format!("{},{}\n", gi.group.name(), gi.mean_f1_psm));
    }
    out.write("importance.csv", csv.as_bytes())?;
    out.write("importance.json", report.to_json().as_bytes())?;
    out.finish()
}

fn stats(cfg: &PipelineConfig, g: &GlobalArgs) -> Result<()> {
    let mut out = Outputs::new(&g.out, "stats", cfg)?;
    let plan = EvalPlan {
        classifiers: Vec::new(),
        statistics: true,
        ..Default::default()
    };
    let report = run_eval(cfg, &mut out, &plan)?;
    let mut csv = String::from("feature,tail,n_psm,n_normal,mean_psm,mean_normal,t,df,p,reject\n");
    for t in &report.ttests {
        let tail = serde_json::to_value(t.tail)?;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            t.feature,
            tail.as_str().unwrap_or_default(),
            t.n_psm,
            t.n_normal,
            t.mean_psm,
            t.mean_normal,
            t.t,
            t.df,
            t.p,
            t.reject
        ));
    }
    out.write("stats.csv", csv.as_bytes())?;
    out.write("stats.json", report.to_json().as_bytes())?;
    out.finish()
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = load_config(&cli.global)?;
    let g = &cli.global;
    with_threads(g.threads, || match cli.command {
        Command::Synth => synth(&cfg, g),
        Command::Cascades { min_size } => cascades(&cfg, g, min_size),
        Command::Features { dump_causal } => features(&cfg, g, dump_causal),
        Command::Train { classifier } => train_cmd(&cfg, g, classifier),
        Command::Eval { classifier, group } => eval_cmd(&cfg, g, classifier, group),
        Command::Importance => importance(&cfg, g),
        Command::Stats => stats(&cfg, g),
    })?;
    Ok(())
}

/// The error chain, skipping causes already quoted by the message above them.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut prev = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !prev.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
        prev = msg;
    }
    out
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("PSM_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.render().to_string();
            eprint!("{msg}");
            if !msg.contains("Usage:") {
                eprintln!("\n{}", <Cli as clap::CommandFactory>::command().render_usage());
            }
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n");
            eprintln!("{}", <Cli as clap::CommandFactory>::command().render_usage());
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}
