mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use serde::Serialize;

use factcurve::claims::QaOptions;
use factcurve::estimator::SimulationConfig;
use factcurve::ingestion::{load_annotated, load_factscore, AnnotatedCorpus, EntityList, FilterRule, GenerationOptions};
use factcurve::judgment::{JudgeOptions, JudgmentStrategy};
use factcurve::pipeline;
use factcurve::rag::{load_docs, ChunkIndex};
use factcurve::report::{self, CommandOutput, ReportError};

use config::{InputFormat, Settings};

#[derive(Debug, Parser)]
#[command(name = "factcurve", version, about = "Position-aware factuality analysis of long-form generations")]
struct Cli {
    /// JSON config file; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Label fractions and claim counts per position bucket
    Analyze {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        #[serde(skip)]
        out: PathBuf,
    },
    /// Generate one biography per entity
    Generate {
        /// Text file with one entity name per line
        #[arg(long)]
        entities: PathBuf,
        #[arg(long)]
        #[serde(skip)]
        out: PathBuf,
    },
    /// Flag refusal-style generations
    Filter {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        #[serde(skip)]
        out: PathBuf,
    },
    /// Split each sentence into atomic claims
    Decompose {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        #[serde(skip)]
        out: PathBuf,
    },
    /// Derive a question-answer pair for every judgeable claim
    Qa {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        #[serde(skip)]
        out: PathBuf,
    },
    /// Ask the generating model to judge its own claims
    Judge {
        #[arg(long)]
        corpus: PathBuf,
        /// QA pairs from the qa command; needed by the qa and qa-noa strategies
        #[arg(long)]
        qa: Option<PathBuf>,
        /// direct, qa or qa-noa (repeatable; default: all three)
        #[arg(long = "strategy")]
        strategies: Vec<JudgmentStrategy>,
        #[arg(long)]
        #[serde(skip)]
        out: PathBuf,
    },
    /// Flip rates from qa to qa-noa judgments
    Fliprate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        judgments: PathBuf,
        #[arg(long)]
        #[serde(skip)]
        out: PathBuf,
    },
    /// Factuality estimates from self-scores (selfscores.json or .csv)
    Estimate {
        #[arg(long)]
        selfscores: PathBuf,
        #[arg(long)]
        #[serde(skip)]
        out: PathBuf,
    },
    /// Monte Carlo check of the estimator
    Simulate {
        #[arg(long)]
        n_claims: u64,
        /// True factuality of the simulated claim stream
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        self_known: f64,
        #[arg(long)]
        self_unknown: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        #[serde(skip)]
        out: Option<PathBuf>,
    },
    /// Chunk a JSON-lines document corpus into a retrieval index
    RagIndex {
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        #[serde(skip)]
        out: PathBuf,
    },
    /// Generate biographies with retrieved chunks in the prompt
    RagGenerate {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        entities: PathBuf,
        #[arg(long)]
        #[serde(skip)]
        out: PathBuf,
    },
    /// Claims per generation and filtered rate per model
    Stats {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        #[serde(skip)]
        out: Option<PathBuf>,
    },
    /// Analyze, derive QA, judge under every strategy, flip rates, estimates
    Report {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        #[serde(skip)]
        out: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Analyze { .. } => "analyze",
            Command::Generate { .. } => "generate",
            Command::Filter { .. } => "filter",
            Command::Decompose { .. } => "decompose",
            Command::Qa { .. } => "qa",
            Command::Judge { .. } => "judge",
            Command::Fliprate { .. } => "fliprate",
            Command::Estimate { .. } => "estimate",
            Command::Simulate { .. } => "simulate",
            Command::RagIndex { .. } => "rag-index",
            Command::RagGenerate { .. } => "rag-generate",
            Command::Stats { .. } => "stats",
            Command::Report { .. } => "report",
        }
    }
}

fn load_corpus(path: &Path, settings: &Settings) -> Result<AnnotatedCorpus, ReportError> {
    match settings.input_format {
        Some(InputFormat::Factscore) => {
            let model = settings.model_id.clone().unwrap_or_else(|| {
                path.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "unknown".into())
            });
            Ok(load_factscore(path, &model)?)
        }
        _ => Ok(load_annotated(path)?),
    }
}

/// The configured model, or the corpus's only model.
fn model_for(settings: &Settings, corpus: &AnnotatedCorpus) -> Result<String, ReportError> {
    if let Some(m) = &settings.model_id {
        return Ok(m.clone());
    }
    let mut models: Vec<&str> = corpus.records.iter().map(|r| r.model_id.as_str()).collect();
    models.sort_unstable();
    models.dedup();
    match models.as_slice() {
        [one] => Ok(one.to_string()),
        _ => Err(ReportError::Config(
            "set model_id: the corpus does not name exactly one model".into(),
        )),
    }
}

fn required_model(settings: &Settings) -> Result<String, ReportError> {
    settings
        .model_id
        .clone()
        .ok_or_else(|| ReportError::Config("model_id is required for this command".into()))
}

fn generation_options(settings: &Settings) -> Result<GenerationOptions, ReportError> {
    Ok(GenerationOptions {
        model_id: required_model(settings)?,
        temperature: settings.temperature.unwrap_or(0.0),
        max_tokens: settings.max_tokens.unwrap_or(1024),
        max_in_flight: settings.max_in_flight.unwrap_or(8),
    })
}

fn qa_options(settings: &Settings, model_id: &str) -> QaOptions {
    QaOptions {
        model_id: model_id.to_string(),
        max_in_flight: settings.max_in_flight.unwrap_or(8),
        retry_temperature: settings.retry_temperature.unwrap_or(0.7),
    }
}

fn judge_options(settings: &Settings, model_id: &str) -> JudgeOptions {
    JudgeOptions {
        model_id: model_id.to_string(),
        max_in_flight: settings.max_in_flight.unwrap_or(8),
        max_tokens: settings.max_tokens.unwrap_or(1024),
    }
}

fn filter_rules(settings: &Settings) -> Result<Vec<FilterRule>, ReportError> {
    match &settings.filter_phrases {
        None => Ok(FilterRule::defaults()),
        Some(list) => Ok(list.iter().map(FilterRule::new).collect::<Result<_, _>>()?),
    }
}

struct Run {
    output: CommandOutput,
    inputs: Vec<PathBuf>,
    out_dir: Option<PathBuf>,
}

fn execute(command: &Command, settings: &Settings) -> Result<Run, ReportError> {
    let run = |output, inputs: &[&PathBuf], out: &PathBuf| Run {
        output,
        inputs: inputs.iter().map(|p| p.to_path_buf()).collect(),
        out_dir: Some(out.clone()),
    };
    Ok(match command {
        Command::Analyze { corpus, out } => run(pipeline::analyze(&load_corpus(corpus, settings)?)?, &[corpus], out),
        Command::Generate { entities, out } => {
            let list = EntityList::load(entities)?;
            let opts = generation_options(settings)?;
            run(pipeline::generate(&list, &settings.gateway()?, &opts)?, &[entities], out)
        }
        Command::Filter { corpus, out } => {
            let c = load_corpus(corpus, settings)?;
            run(pipeline::filter(c, &filter_rules(settings)?, settings.scope())?, &[corpus], out)
        }
        Command::Decompose { corpus, out } => {
            let c = load_corpus(corpus, settings)?;
            let model = model_for(settings, &c)?;
            let gw = settings.gateway()?;
            run(pipeline::decompose(&c, &gw, &model, settings.max_in_flight.unwrap_or(8))?, &[corpus], out)
        }
        Command::Qa { corpus, out } => {
            let c = load_corpus(corpus, settings)?;
            let model = model_for(settings, &c)?;
            let gw = settings.gateway()?;
            run(pipeline::derive_qa(&c, &gw, &qa_options(settings, &model))?.1, &[corpus], out)
        }
        Command::Judge {
            corpus,
            qa,
            strategies,
            out,
        } => {
            let strategies = if strategies.is_empty() {
                JudgmentStrategy::ALL.to_vec()
            } else {
                strategies.clone()
            };
            let pairs = match qa {
                Some(path) => pipeline::load_qa(path)?,
                None if strategies.iter().any(|s| s.needs_qa()) => {
                    return Err(ReportError::Config("--qa is required for the qa and qa-noa strategies".into()))
                }
                None => Vec::new(),
            };
            let c = load_corpus(corpus, settings)?;
            let model = model_for(settings, &c)?;
            let gw = settings.gateway()?;
            let (_, output) = pipeline::judge(&c, &pairs, &strategies, &gw, &judge_options(settings, &model))?;
            let mut inputs = vec![corpus];
            inputs.extend(qa.iter());
            run(output, &inputs, out)
        }
        Command::Fliprate { corpus, judgments, out } => {
            let c = load_corpus(corpus, settings)?;
            run(pipeline::fliprate(&c, &pipeline::load_judgments(judgments)?)?, &[corpus, judgments], out)
        }
        Command::Estimate { selfscores, out } => {
            run(pipeline::estimate(&report::load_score_inputs(selfscores)?)?, &[selfscores], out)
        }
        Command::Simulate {
            n_claims,
            sigma,
            self_known,
            self_unknown,
            seed,
            out,
        } => {
            let cfg = SimulationConfig {
                n_claims: *n_claims,
                true_sigma: *sigma,
                self_known: *self_known,
                self_unknown: *self_unknown,
                seed: *seed,
            };
            let (_, output) = pipeline::simulate(&cfg)?;
            if out.is_none() {
                print!("{}", String::from_utf8_lossy(output.file("simulation.json").unwrap_or_default()));
            }
            Run {
                output,
                inputs: Vec::new(),
                out_dir: out.clone(),
            }
        }
        Command::RagIndex { docs, out } => run(pipeline::rag_index(&load_docs(docs)?)?, &[docs], out),
        Command::RagGenerate { index, entities, out } => {
            let idx = ChunkIndex::load(index)?;
            let list = EntityList::load(entities)?;
            let opts = generation_options(settings)?;
            let k = settings.top_k.unwrap_or(factcurve::rag::DEFAULT_TOP_K);
            run(pipeline::rag_generate(&idx, &list, k, &settings.gateway()?, &opts)?, &[index, entities], out)
        }
        Command::Stats { corpus, out } => {
            let (rows, output) = pipeline::stats(&load_corpus(corpus, settings)?)?;
            print!("{}", report::stats_table(&rows));
            Run {
                output,
                inputs: vec![corpus.clone()],
                out_dir: out.clone(),
            }
        }
        Command::Report { corpus, out } => {
            let c = load_corpus(corpus, settings)?;
            let model = model_for(settings, &c)?;
            let gw = settings.gateway()?;
            let output = pipeline::full_report(&c, &gw, &qa_options(settings, &model), &judge_options(settings, &model))?;
            run(output, &[corpus], out)
        }
    })
}

fn main_inner(cli: Cli) -> Result<ExitCode> {
    let file = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    let settings = file.merged(&cli.settings).resolved();
    settings.validate()?;
    let run = execute(&cli.command, &settings)?;
    if let Some(out) = &run.out_dir {
        let mut config = serde_json::to_value(&settings)?;
        config["command_args"] = serde_json::to_value(&cli.command)?;
        let inputs: Vec<&Path> = run.inputs.iter().map(PathBuf::as_path).collect();
        let manifest = report::emit(out, cli.command.name(), &config, &inputs, &run.output)?;
        log::info!("{}: wrote {} files to {} (run {})", cli.command.name(), manifest.outputs.len(), out.display(), manifest.run_id);
    }
    for f in &run.output.failures {
        if f.failed > 0 {
            eprintln!("{}: {} of {} failed", f.stage, f.failed, f.total);
        }
    }
    if run.output.is_partial() {
        eprintln!(
            "partial failure: a stage exceeded the {:.0}% error threshold",
            100.0 * report::PARTIAL_FAILURE_THRESHOLD
        );
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match main_inner(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<ReportError>().map(ReportError::exit_code).unwrap_or(1);
            ExitCode::from(code as u8)
        }
    }
}
