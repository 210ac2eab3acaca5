use std::collections::BTreeSet;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use scenefuse::align::{dtw_align, scene_time_spans};
use scenefuse::backend::BackendError;
use scenefuse::config::PipelineConfig;
use scenefuse::pipeline::{run_batch, run_eval, PipelineError};
use scenefuse::postprocess::{postprocess_scene, GenderLexicon};
use scenefuse::prefs::PrefsError;
use scenefuse::reorder::reorder;
use scenefuse::segment::{effective_partition, optimal_partition, uniform_partition, uniform_token_chunks};
use scenefuse::stats::{ari, clustering_accuracy, mean, nmi, welch_df, welch_t, SampleStats};
use scenefuse::{parse_transcript, Alignment, Episode, Partition, Transcript};

/// Scene-aware summarization of TV episodes.
#[derive(Debug, Parser)]
#[command(name = "scenefuse", version)]
struct Cli {
    /// Pipeline config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Episode directory; repeatable where several episodes make sense.
    #[arg(long, global = true)]
    episode: Vec<PathBuf>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Replace remote backends with offline mocks.
    #[arg(long, global = true)]
    mock: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split a transcript into scenes.
    Segment(SegmentArgs),
    /// Align transcript lines with caption cues.
    Align,
    /// Reorder scenes to group recurring casts.
    Reorder(SegmentArgs),
    /// Visual caption utilities.
    Captions {
        #[command(subcommand)]
        command: CaptionsCommand,
    },
    /// Run the full pipeline and print the final summary.
    Summarize,
    /// Score a summary against gold summaries with PREFS.
    Evaluate(EvaluateArgs),
    /// Statistics over results.
    Stats {
        #[command(subcommand)]
        command: StatsCommand,
    },
}

#[derive(Debug, Args)]
struct SegmentArgs {
    /// Transcript file, instead of an episode directory.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Ignore explicit scene markers.
    #[arg(long)]
    ignore_markers: bool,
    /// Fixed token windows instead of MDL scenes.
    #[arg(long)]
    chunk_tokens: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum CaptionsCommand {
    /// Filter raw captions and insert speaker names. Reads one caption per
    /// line from FILE (or stdin) unless an episode is given.
    Clean {
        file: Option<PathBuf>,
        /// Comma-separated scene speakers.
        #[arg(long, value_delimiter = ',')]
        speakers: Vec<String>,
    },
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Summary to score; defaults to the pipeline's summary.txt.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Gold summary files, added to the episode's gold summaries.
    #[arg(long)]
    gold: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SplitMethod {
    Mdl,
    Uniform,
    UniformOracle,
}

#[derive(Debug, Subcommand)]
enum StatsCommand {
    /// ACC, NMI and ARI of predicted against marked scene breaks, per
    /// episode and averaged.
    SceneSplit {
        #[arg(long, value_enum, default_value = "mdl")]
        method: SplitMethod,
    },
    /// Welch's t statistic and degrees of freedom for two samples, each
    /// given as `mean,std,n`.
    Welch {
        #[arg(long, allow_hyphen_values = true)]
        a: String,
        #[arg(long, allow_hyphen_values = true)]
        b: String,
    },
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

trait Code<T> {
    fn code(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Code<T> for Result<T, E> {
    fn code(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure { code, error: e.into() })
    }
}

fn data<T, E: Into<anyhow::Error>>(r: Result<T, E>) -> Result<T, Failure> {
    r.code(4)
}

fn pipeline_failure(e: PipelineError) -> Failure {
    Failure { code: e.exit_code() as u8, error: e.into() }
}

fn backend_code(e: &BackendError) -> u8 {
    match e {
        BackendError::NotConfigured(_) => 2,
        _ => 3,
    }
}

fn prefs_failure(e: PrefsError) -> Failure {
    let code = match &e {
        PrefsError::Extraction { source, .. } | PrefsError::Judge { source, .. } => backend_code(source),
        _ => 4,
    };
    Failure { code, error: e.into() }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, Failure> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path).code(2)?,
        None => PipelineConfig::default(),
    };
    if let Some(out) = &cli.out {
        config.paths.output = out.clone();
    }
    if cli.mock {
        config = config.with_mocks();
    }
    Ok(config)
}

fn episode_dirs(cli: &Cli, config: &PipelineConfig) -> Result<Vec<PathBuf>, Failure> {
    if !cli.episode.is_empty() {
        return Ok(cli.episode.clone());
    }
    match &config.paths.episode {
        Some(p) => Ok(vec![p.clone()]),
        None => Err(Failure { code: 2, error: anyhow!("no episode given (--episode or paths.episode)") }),
    }
}

fn load_episodes(cli: &Cli, config: &PipelineConfig) -> Result<Vec<Episode>, Failure> {
    episode_dirs(cli, config)?.iter().map(|d| data(Episode::load(d))).collect()
}

fn one_episode(cli: &Cli, config: &PipelineConfig) -> Result<Episode, Failure> {
    let mut episodes = load_episodes(cli, config)?;
    if episodes.len() != 1 {
        return Err(Failure { code: 2, error: anyhow!("this command takes exactly one --episode") });
    }
    Ok(episodes.remove(0))
}

fn print_json(value: &impl serde::Serialize) -> Result<(), Failure> {
    println!("{}", serde_json::to_string_pretty(value).expect("output serializes"));
    Ok(())
}

fn transcript_for(cli: &Cli, config: &PipelineConfig, args: &SegmentArgs) -> Result<Transcript, Failure> {
    let transcript = match &args.transcript {
        Some(path) => {
            let text = data(std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())))?;
            data(parse_transcript(&text))?.value
        }
        None => one_episode(cli, config)?.transcript,
    };
    Ok(if args.ignore_markers { transcript.without_breaks() } else { transcript })
}

fn partition_for(transcript: &Transcript, args: &SegmentArgs) -> Result<Partition, Failure> {
    match args.chunk_tokens {
        Some(0) => Err(Failure { code: 2, error: anyhow!("--chunk-tokens must be positive") }),
        Some(n) => data(uniform_token_chunks(transcript, n)),
        None => data(effective_partition(transcript)),
    }
}

fn rosters(partition: &Partition) -> Vec<BTreeSet<String>> {
    partition.scenes.iter().map(|s| s.roster.iter().map(|r| r.to_lowercase()).collect()).collect()
}

fn parse_sample(spec: &str) -> Result<SampleStats<f64>, Failure> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    let parsed = match parts.as_slice() {
        [m, s, n] => m.parse().ok().zip(s.parse().ok()).zip(n.parse().ok()),
        _ => None,
    };
    let ((mean, std), n) =
        parsed.ok_or_else(|| Failure { code: 2, error: anyhow!("expected mean,std,n but got {spec:?}") })?;
    Ok(SampleStats::new(mean, std, n))
}

fn read_lines(file: Option<&Path>) -> Result<Vec<String>, Failure> {
    let mut text = String::new();
    match file {
        Some(path) => text = data(std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())))?,
        None => {
            data(std::io::stdin().read_to_string(&mut text))?;
        }
    }
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
}

fn scene_split(cli: &Cli, config: &PipelineConfig, method: SplitMethod) -> Result<(), Failure> {
    let mut episodes = Vec::new();
    for ep in load_episodes(cli, config)? {
        let Some(breaks) = ep.transcript.explicit_breaks().map(<[usize]>::to_vec) else {
            log::warn!("{}: no scene markers, skipped", ep.id);
            continue;
        };
        episodes.push((ep.id, ep.transcript.without_breaks(), breaks));
    }
    if episodes.is_empty() {
        return Err(Failure { code: 4, error: anyhow!("no episode has scene markers") });
    }
    let gold_counts: Vec<f64> = episodes.iter().map(|(_, _, b)| (b.len() + 1) as f64).collect();
    let average_scenes = mean(&gold_counts).unwrap_or(1.0).round() as usize;
    let mut rows = Vec::new();
    let (mut accs, mut nmis, mut aris) = (Vec::new(), Vec::new(), Vec::new());
    for (id, transcript, breaks) in &episodes {
        let gold = data(transcript.with_breaks(breaks.clone()))?;
        let gold_labels = data(effective_partition::<f64>(&gold))?.labels();
        let predicted: Partition = match method {
            SplitMethod::Mdl => data(optimal_partition(transcript))?,
            SplitMethod::Uniform => data(uniform_partition(transcript, average_scenes))?,
            SplitMethod::UniformOracle => data(uniform_partition(transcript, breaks.len() + 1))?,
        };
        let labels = predicted.labels();
        let acc: f64 = data(clustering_accuracy(&gold_labels, &labels))?;
        let n: f64 = data(nmi(&gold_labels, &labels))?;
        let a: f64 = data(ari(&gold_labels, &labels))?;
        accs.push(acc);
        nmis.push(n);
        aris.push(a);
        rows.push(json!({ "episode": id, "acc": acc, "nmi": n, "ari": a }));
    }
    print_json(&json!({
        "method": format!("{method:?}").to_lowercase(),
        "episodes": rows,
        "mean": { "acc": mean(&accs), "nmi": mean(&nmis), "ari": mean(&aris) },
    }))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let config = load_config(cli)?;
    match &cli.command {
        Command::Segment(args) => {
            let transcript = transcript_for(cli, &config, args)?;
            print_json(&partition_for(&transcript, args)?)
        }
        Command::Reorder(args) => {
            let transcript = transcript_for(cli, &config, args)?;
            let partition = partition_for(&transcript, args)?;
            let order: scenefuse::SceneOrder = reorder(&rosters(&partition));
            print_json(&order)
        }
        Command::Align => {
            let episode = one_episode(cli, &config)?;
            let track = episode
                .captions
                .as_ref()
                .ok_or_else(|| Failure { code: 4, error: anyhow!("episode {} has no caption track", episode.id) })?;
            let lines: Vec<&str> = episode.transcript.lines().iter().map(|l| l.text.as_str()).collect();
            let alignment: Alignment = data(dtw_align(&lines, &track.texts()))?;
            let partition: Partition = data(effective_partition(&episode.transcript))?;
            let spans = data(scene_time_spans(&partition, &alignment, track))?;
            print_json(&json!({ "alignment": alignment, "spans": spans }))
        }
        Command::Captions { command: CaptionsCommand::Clean { file, speakers } } => {
            let lexicon = GenderLexicon::bundled();
            if file.is_none() && (!cli.episode.is_empty() || config.paths.episode.is_some()) {
                let episode = one_episode(cli, &config)?;
                let partition: Partition = data(effective_partition(&episode.transcript))?;
                let Some(scenefuse::model::VisualInput::Captions(lists)) = &episode.visual else {
                    return Err(Failure { code: 4, error: anyhow!("episode {} has no precomputed captions", episode.id) });
                };
                let cleaned: Vec<_> = partition
                    .scenes
                    .iter()
                    .enumerate()
                    .map(|(i, scene)| {
                        let raw = lists.get(i).map(Vec::as_slice).unwrap_or_default();
                        postprocess_scene(i, raw, scene.roster.iter().map(String::as_str), lexicon, "captions")
                    })
                    .collect();
                return print_json(&cleaned);
            }
            let raw = read_lines(file.as_deref())?;
            let cleaned = postprocess_scene(0, &raw, speakers.iter().map(String::as_str), lexicon, "input");
            for sentence in cleaned.sentences {
                println!("{sentence}");
            }
            Ok(())
        }
        Command::Summarize => {
            let episodes = load_episodes(cli, &config)?;
            let backends = config.build_backends().code(2)?;
            let mut first_error = None;
            for (episode, result) in episodes.iter().zip(run_batch(&episodes, &config, &backends)) {
                match result {
                    Ok(artifacts) => {
                        if episodes.len() > 1 {
                            println!("== {}", episode.id);
                        }
                        print!("{}", artifacts.summary);
                        if let Some(report) = &artifacts.prefs {
                            log::info!(
                                "{}: fact-precision {:.2} fact-recall {:.2} PREFS {:.2}",
                                episode.id,
                                report.fact_precision,
                                report.fact_recall,
                                report.prefs
                            );
                        }
                    }
                    Err(e) => {
                        eprintln!("error: {}: {e}", episode.id);
                        first_error.get_or_insert(pipeline_failure(e));
                    }
                }
            }
            first_error.map_or(Ok(()), Err)
        }
        Command::Evaluate(args) => {
            let mut episode = one_episode(cli, &config)?;
            for g in &args.gold {
                let text = data(std::fs::read_to_string(g).with_context(|| format!("reading {}", g.display())))?;
                episode.add_gold(text.trim());
            }
            let summary_path = match &args.summary {
                Some(p) => p.clone(),
                None => scenefuse::pipeline::episode_dir(&config, &episode).join("summary.txt"),
            };
            let summary = data(
                std::fs::read_to_string(&summary_path).with_context(|| format!("reading {}", summary_path.display())),
            )?;
            let backends = config.build_backends().code(2)?;
            let report = run_eval(&episode, &summary, &config, &backends).map_err(|e| match e {
                PipelineError::Eval(p) => prefs_failure(p),
                other => pipeline_failure(other),
            })?;
            print_json(&report)
        }
        Command::Stats { command: StatsCommand::SceneSplit { method } } => scene_split(cli, &config, *method),
        Command::Stats { command: StatsCommand::Welch { a, b } } => {
            let (a, b) = (parse_sample(a)?, parse_sample(b)?);
            let t = data(welch_t(&a, &b))?;
            let df = data(welch_df(&a, &b))?;
            print_json(&json!({ "t": t, "df": df }))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
