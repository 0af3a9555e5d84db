//! `hierarchy`: rank crowd answers by the thinking hierarchy of their respondents.
//!
//! Reports go to stdout as JSON (CSV for `simulate`); diagnostics go to stderr.
//! Exit status is 0 on success, 2 for unreadable or invalid input and 3 when the
//! answer set is too large for the requested exact search.

mod input;

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hierarchy_core::ingest::write_responses_csv;
use hierarchy_core::model::sample_question;
use hierarchy_core::rank::{DEFAULT_MAX, VARIANT_MAX};
use hierarchy_core::{
    analyze, evaluate, rank_default, Algorithm, CanonicalizationMap, Caps, DisplayDiagonal, HeatmapGrid, PSource,
    PredictionPolicy, Question, RankReport, RunConfig, ThinkingModel,
};

use input::{load_matrix, read_manifest, read_responses, read_text, Failure, Format};

#[derive(Parser)]
#[command(name = "hierarchy", version, about = "Rank crowd answers by inferred thinking hierarchy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank the answers of one question and print a report.
    Rank {
        input: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Print the count matrix reordered by the default ranking.
    Heatmap {
        input: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
        #[arg(long, default_value = "support")]
        display_diagonal: DisplayDiagonal,
    },
    /// Sample respondents from a model file and print them as CSV.
    Simulate {
        model: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Question id written to every row.
        #[arg(long, default_value = "sim")]
        question_id: String,
    },
    /// Rank every question of a manifest and score against known answers.
    Evaluate {
        manifest: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
        /// Worker threads; 0 uses one per core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
}

#[derive(Args)]
struct RunOpts {
    #[arg(long, default_value_t = 0.03)]
    threshold: f64,
    #[arg(long, default_value = "IDK")]
    dont_know_token: String,
    #[arg(long, default_value = "all")]
    prediction_policy: PredictionPolicy,
    #[arg(long, default_value = "support")]
    p_source: PSource,
    #[arg(long, default_value = "both")]
    algorithm: Algorithm,
    /// Input kind; `auto` looks at the extension, then at the content.
    #[arg(long, value_enum, default_value = "auto")]
    format: Format,
    /// JSON file of canonicalization rules.
    #[arg(long)]
    canonicalization: Option<PathBuf>,
    /// Keep only rows with this question id.
    #[arg(long)]
    question: Option<String>,
    #[arg(long, default_value_t = DEFAULT_MAX)]
    max_default: usize,
    #[arg(long, default_value_t = VARIANT_MAX)]
    max_variant: usize,
}

impl RunOpts {
    fn config(&self) -> Result<RunConfig, Failure> {
        let canonicalization = match &self.canonicalization {
            Some(path) => CanonicalizationMap::from_json(&read_text(path)?).map_err(|e| Failure::at(path, e))?,
            None => CanonicalizationMap::default(),
        };
        let config = RunConfig {
            threshold: self.threshold,
            dont_know_token: self.dont_know_token.clone(),
            prediction_policy: self.prediction_policy,
            p_source: self.p_source,
            algorithm: self.algorithm,
            seed: 0,
            caps: Caps {
                default: self.max_default,
                variant: self.max_variant,
            },
            canonicalization,
        };
        config.validate()?;
        Ok(config)
    }
}

fn emit(text: &str) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    writeln!(out, "{text}")
        .and_then(|_| out.flush())
        .map_err(|e| Failure::input(format!("cannot write output: {e}")))
}

fn rank(path: &Path, opts: &RunOpts) -> Result<(), Failure> {
    let config = opts.config()?;
    let matrix = load_matrix(path, opts.format, opts.question.as_deref(), &config)?;
    eprintln!(
        "{} answers from {} respondents, {} predictions dropped",
        matrix.len(),
        matrix.n_respondents,
        matrix.dropped_predictions
    );
    let analysis = analyze(matrix, &config)?;
    emit(&RankReport::from_analysis(&analysis).to_json())
}

fn heatmap(path: &Path, opts: &RunOpts, diagonal: DisplayDiagonal) -> Result<(), Failure> {
    let config = opts.config()?;
    let matrix = load_matrix(path, opts.format, opts.question.as_deref(), &config)?;
    let config = RunConfig {
        algorithm: Algorithm::Default,
        ..config
    };
    config.check_caps(matrix.len())?;
    let ranking = rank_default(&matrix, &config.frequencies(&matrix))?;
    emit(&HeatmapGrid::new(&matrix, &ranking, diagonal).to_json())
}

fn simulate(path: &Path, n: usize, seed: u64, question_id: &str) -> Result<(), Failure> {
    let model = ThinkingModel::from_json(&read_text(path)?).map_err(|e| Failure::at(path, e))?;
    let records = sample_question(&model, n, seed, question_id);
    let mut out = io::BufWriter::new(io::stdout().lock());
    write_responses_csv(&mut out, &records)?;
    out.flush().map_err(|e| Failure::input(format!("cannot write output: {e}")))
}

fn run_evaluate(path: &Path, opts: &RunOpts, jobs: usize) -> Result<(), Failure> {
    let config = opts.config()?;
    let manifest = read_manifest(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut questions = Vec::with_capacity(manifest.questions.len());
    for entry in manifest.questions {
        let mut records = read_responses(&base.join(&entry.responses))?;
        if let Some(q) = &opts.question {
            records.retain(|r| &r.question_id == q);
        }
        questions.push(Question {
            question_id: entry.id,
            records,
            truth: entry.truth,
        });
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::input(format!("cannot start worker threads: {e}")))?;
    let result = pool.install(|| evaluate(&questions, &config));
    let agg = &result.aggregate;
    eprintln!("{} questions, {} errors, {} scored", agg.questions, agg.errors, agg.scored);
    emit(&result.to_json())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Rank { input, opts } => rank(input, opts),
        Command::Heatmap {
            input,
            opts,
            display_diagonal,
        } => heatmap(input, opts, *display_diagonal),
        Command::Simulate {
            model,
            n,
            seed,
            question_id,
        } => simulate(model, *n, *seed, question_id),
        Command::Evaluate { manifest, opts, jobs } => run_evaluate(manifest, opts, *jobs),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
