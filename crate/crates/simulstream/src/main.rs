use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use simulstream::harness::{
    cmd_curve, cmd_extract_background, cmd_run, cmd_score, AsrMode, ExtractionConfig,
    HarnessError, LlmMode, RunConfig,
};
use simulstream::policy::SessionConfig;
use simulstream::prompt::ChatTemplate;

/// Exit codes: 0 success, 1 configuration error, 2 backend error,
/// 3 partial failures.
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "simulstream",
    version,
    about = "Simultaneous speech translation harness: streaming ASR into a word-at-a-time \
             generation loop, with latency/quality scoring"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Translate every manifest entry and score the results.
    Run(RunArgs),
    /// Sweep min-read-time values and emit a quality/latency CSV.
    Curve(CurveArgs),
    /// Distill talk transcripts into background documents.
    ExtractBackground(ExtractArgs),
    /// Re-score an existing record log.
    Score(ScoreArgs),
}

#[derive(Args)]
struct BackendArgs {
    /// Scripted completion backend: JSON map of sentence id to fragment list.
    #[arg(long, value_name = "FILE", conflicts_with = "llm_endpoint")]
    llm_script: Option<PathBuf>,
    /// Live completion endpoint base URL (POST <url>/v1/completions).
    #[arg(long, value_name = "URL", requires = "llm_model")]
    llm_endpoint: Option<String>,
    /// Model name passed to the live completion endpoint.
    #[arg(long, value_name = "NAME")]
    llm_model: Option<String>,
    /// Live transcription endpoint base URL (POST <url>/v1/transcribe).
    /// Without it, recognition is simulated from the manifest fixtures.
    #[arg(long, value_name = "URL", requires = "asr_model")]
    asr_endpoint: Option<String>,
    /// Model name passed to the live transcription endpoint.
    #[arg(long, value_name = "NAME")]
    asr_model: Option<String>,
}

impl BackendArgs {
    fn llm_mode(&self) -> Result<LlmMode> {
        match (&self.llm_script, &self.llm_endpoint) {
            (Some(path), None) => Ok(LlmMode::Script(path.clone())),
            (None, Some(url)) => Ok(LlmMode::Endpoint {
                url: url.clone(),
                model: self.llm_model.clone().unwrap_or_default(),
            }),
            _ => bail!("configure exactly one of --llm-script or --llm-endpoint"),
        }
    }

    fn asr_mode(&self) -> AsrMode {
        match &self.asr_endpoint {
            Some(url) => AsrMode::Endpoint {
                url: url.clone(),
                model: self.asr_model.clone().unwrap_or_default(),
            },
            None => AsrMode::Fixture,
        }
    }
}

#[derive(Args)]
struct SessionArgs {
    /// Minimum elapsed source audio (ms) before any WRITE.
    #[arg(long, default_value_t = 1200)]
    min_read_time: u64,
    /// Audio chunk length (ms) added per ingest.
    #[arg(long, default_value_t = 200)]
    chunk_duration: u64,
    #[arg(long, default_value = "English")]
    src_lang: String,
    #[arg(long, default_value = "German")]
    tgt_lang: String,
    /// Ablation: move the partial target into the user turn instead of
    /// priming the assistant turn.
    #[arg(long)]
    no_priming: bool,
    /// Ablation: drop background documents from the system message.
    #[arg(long)]
    no_background: bool,
    /// Fragment budget per word completion.
    #[arg(long, default_value_t = 24)]
    max_word_tokens: usize,
    /// Fragment budget for the final run to end of turn.
    #[arg(long, default_value_t = 256)]
    max_final_tokens: usize,
    /// Fold generation wall time into delays (delays may then exceed the
    /// source duration and runs are not reproducible).
    #[arg(long)]
    computation_aware: bool,
    /// Prepend earlier sentences of the same talk to the prompt.
    #[arg(long)]
    context_carryover: bool,
    #[arg(long, value_name = "MARKER", default_value = "<|begin_of_text|>")]
    template_begin: String,
    #[arg(long, value_name = "MARKER", default_value = "<|start_header_id|>")]
    template_header_open: String,
    #[arg(long, value_name = "MARKER", default_value = "<|end_header_id|>")]
    template_header_close: String,
    #[arg(long, value_name = "MARKER", default_value = "<|eot_id|>")]
    template_turn_end: String,
}

impl SessionArgs {
    fn session_config(&self) -> SessionConfig {
        SessionConfig {
            src_lang: self.src_lang.clone(),
            tgt_lang: self.tgt_lang.clone(),
            min_read_time_ms: self.min_read_time,
            chunk_duration_ms: self.chunk_duration,
            priming_enabled: !self.no_priming,
            background_enabled: !self.no_background,
            max_word_tokens: self.max_word_tokens,
            max_final_tokens: self.max_final_tokens,
            computation_aware: self.computation_aware,
            context_carryover: self.context_carryover,
            template: ChatTemplate {
                begin_marker: self.template_begin.clone(),
                header_open: self.template_header_open.clone(),
                header_close: self.template_header_close.clone(),
                turn_end: self.template_turn_end.clone(),
                ..ChatTemplate::default()
            },
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// JSONL manifest of evaluation sentences.
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    #[command(flatten)]
    backends: BackendArgs,
    #[command(flatten)]
    session: SessionArgs,
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
    /// Concurrent sessions; 0 picks a default (1 in live mode, all cores
    /// otherwise).
    #[arg(long, default_value_t = 0)]
    parallelism: usize,
    /// Skip entries whose records are already in the output log.
    #[arg(long)]
    resume: bool,
    /// Write every rendered prompt under <out-dir>/prompts/.
    #[arg(long)]
    dump_prompts: bool,
}

impl RunArgs {
    fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::new(
            self.manifest.clone(),
            self.backends.asr_mode(),
            self.backends.llm_mode()?,
            self.out_dir.clone(),
        );
        cfg.session = self.session.session_config();
        cfg.parallelism = self.parallelism;
        cfg.resume = self.resume;
        cfg.dump_prompts = self.dump_prompts;
        cfg.llm_api_key = std::env::var("SIMULSTREAM_LLM_API_KEY").ok();
        cfg.asr_api_key = std::env::var("SIMULSTREAM_ASR_API_KEY").ok();
        Ok(cfg)
    }
}

#[derive(Args)]
struct CurveArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated min-read-time values (ms), strictly increasing.
    #[arg(long, value_delimiter = ',', required = true)]
    sweep: Vec<u64>,
}

#[derive(Args)]
struct ExtractArgs {
    /// Talk transcript text files; the file stem becomes the talk id.
    #[arg(long = "input", value_name = "FILE", required = true)]
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    backends: BackendArgs,
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
    /// Additional attempts per talk after a failed extraction.
    #[arg(long, default_value_t = 2)]
    retries: usize,
}

#[derive(Args)]
struct ScoreArgs {
    /// Record log produced by `run`.
    #[arg(long, value_name = "FILE")]
    records: PathBuf,
    /// Include wall-clock-derived RTF (only meaningful for live runs).
    #[arg(long)]
    with_rtf: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .downcast_ref::<HarnessError>()
                .map(|h| h.exit_code())
                .unwrap_or(1);
            ExitCode::from(code as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.run_config()?;
            let summary = cmd_run(&cfg).map_err(anyhow::Error::from)?;
            println!(
                "wrote {} record(s) to {}",
                summary.records.len(),
                summary.records_path.display()
            );
            if let Some(report) = &summary.report {
                print_report(report);
            }
            for (id, error) in &summary.failures {
                eprintln!("failed {id}: {error}");
            }
            Ok(if summary.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_PARTIAL)
            })
        }
        Command::Curve(args) => {
            let mut cfg = args.run.run_config()?;
            cfg.sweep = args.sweep;
            let summary = cmd_curve(&cfg).map_err(anyhow::Error::from)?;
            println!("wrote {}", summary.csv_path.display());
            for point in &summary.points {
                match &point.report {
                    Some(r) => println!(
                        "min_read_time {} ms: BLEU {:.2}, AL {:.0} ms, LAAL {:.0} ms",
                        point.min_read_time_ms, r.bleu, r.al_ms, r.laal_ms
                    ),
                    None => println!(
                        "min_read_time {} ms: no report ({} failure(s))",
                        point.min_read_time_ms,
                        point.failures.len()
                    ),
                }
            }
            Ok(if summary.failure_count() == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_PARTIAL)
            })
        }
        Command::ExtractBackground(args) => {
            let cfg = ExtractionConfig {
                inputs: args.inputs,
                llm: args.backends.llm_mode()?,
                out_dir: args.out_dir,
                retries: args.retries,
                llm_api_key: std::env::var("SIMULSTREAM_LLM_API_KEY").ok(),
            };
            let summary = cmd_extract_background(&cfg).map_err(anyhow::Error::from)?;
            for path in &summary.written {
                println!("wrote {path}");
            }
            for failure in &summary.failures {
                eprintln!("failed {}: {}", failure.talk_id, failure.error);
            }
            Ok(if summary.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_PARTIAL)
            })
        }
        Command::Score(args) => {
            let report = cmd_score(&args.records, args.with_rtf)
                .with_context(|| format!("scoring {}", args.records.display()))?;
            print_report(&report);
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serialization")
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn print_report(report: &simulstream::metrics::MetricReport) {
    let rtf = report
        .rtf
        .map(|r| format!("{r:.3}"))
        .unwrap_or_else(|| "n/a".into());
    println!(
        "BLEU {:.2} | AL {:.1} ms | LAAL {:.1} ms | WER {:.3} | RTF {} | excluded {}",
        report.bleu, report.al_ms, report.laal_ms, report.wer, rtf, report.excluded_count
    );
}
