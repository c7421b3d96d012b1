use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use dupescan_core::config::DEFAULT_SEED;
use dupescan_core::corpus::{ingest, IngestOptions, IngestReport, LineError};
use dupescan_core::dedup::{select_published_duplicates, select_simultaneous};
use dupescan_core::journeys::{export_journeys, recommend_transfers};
use dupescan_core::lsh::write_pairs_csv;
use dupescan_core::pipeline::{self, sha256_hex, IndexedCorpus, InputInfo, RunOutput};
use dupescan_core::snapshot;
use dupescan_core::synth::{generate_synthetic, Perturbation, SynthSpec};
use dupescan_core::{Error, PipelineConfig};

#[derive(Parser)]
#[command(name = "dupescan", version, about = "Near-duplicate manuscript detection")]
struct Cli {
    /// Caps the worker threads used by parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a JSONL corpus and write an indexed snapshot.
    Ingest {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        config: ConfigArgs,
        /// Directory receiving snapshot.bin and ingest_errors.jsonl.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run the full pipeline and write every report to an output directory.
    Run {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out_dir: PathBuf,
        /// Add wall-clock stage timings to the manifest (breaks byte-identity).
        #[arg(long)]
        record_timings: bool,
    },
    /// Screen one manuscript against an indexed corpus.
    Query {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        title: String,
        #[arg(long, default_value = "")]
        r#abstract: String,
        #[arg(long, default_value = "query")]
        id: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Verified near-duplicate pairs as CSV.
    Pairs {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Simultaneous submissions as JSONL.
    Simultaneous {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Duplicate publications as JSONL.
    PublishedDups {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Manuscript journeys as DOT or JSONL.
    Journeys {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_enum, default_value_t = JourneyFormat::Dot)]
        format: JourneyFormat,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Rank transfer destinations for manuscripts rejected at a journal.
    Recommend {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long = "from")]
        from_journal: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Aggregate editorial statistics.
    Stats {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Generate a synthetic corpus with planted duplicates and its ground truth.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum JourneyFormat {
    Dot,
    Jsonl,
}

#[derive(Args)]
struct InputArgs {
    /// JSONL corpus or snapshot file.
    input: PathBuf,
    /// Keep the first record of a repeated id instead of failing.
    #[arg(long)]
    skip_duplicate_ids: bool,
}

#[derive(Args)]
struct OutputArgs {
    /// Write to this file instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Default)]
struct ConfigArgs {
    #[arg(long)]
    shingle_k: Option<usize>,
    #[arg(long)]
    num_hashes: Option<usize>,
    #[arg(long)]
    bands: Option<usize>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    analysis_date: Option<NaiveDate>,
    #[arg(long)]
    min_support: Option<usize>,
    /// Treat withdrawn manuscripts like rejected ones when detecting resubmissions.
    #[arg(long)]
    withdrawn_as_rejection: bool,
    /// Config file (TOML, or JSON by extension). Flags override its values.
    #[arg(long, env = "DUPESCAN_CONFIG")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    size: usize,
    #[arg(long, default_value_t = 0.25)]
    near_duplicate_rate: f64,
    #[arg(long, default_value_t = 0.025)]
    simultaneous_rate: f64,
    #[arg(long, default_value_t = 0.01)]
    bad_transfer_rate: f64,
    #[arg(long, default_value_t = 5)]
    published_duplicate_pairs: usize,
    #[arg(long, default_value_t = 0.01)]
    replace_fraction: f64,
    #[arg(long, default_value_t = 0.005)]
    delete_fraction: f64,
    #[arg(long, default_value_t = 60)]
    journal_count: usize,
    #[arg(long, default_value = "2018-01-01")]
    start_date: NaiveDate,
    #[arg(long, default_value = "2020-10-31")]
    end_date: NaiveDate,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 0.8)]
    threshold: f64,
    #[arg(long, default_value_t = 3)]
    shingle_k: usize,
    /// Corpus destination.
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth destination (default: next to the corpus, `.truth.json`).
    #[arg(long)]
    truth: Option<PathBuf>,
}

impl ConfigArgs {
    fn index_overrides(&self) -> [(&'static str, Option<u64>); 5] {
        [
            ("shingle_k", self.shingle_k.map(|v| v as u64)),
            ("num_hashes", self.num_hashes.map(|v| v as u64)),
            ("bands", self.bands.map(|v| v as u64)),
            ("rows", self.rows.map(|v| v as u64)),
            ("seed", self.seed),
        ]
    }

    fn apply_query_settings(&self, config: &mut PipelineConfig) {
        if let Some(t) = self.threshold {
            config.threshold = t;
        }
        if self.analysis_date.is_some() {
            config.analysis_date = self.analysis_date;
        }
        if let Some(m) = self.min_support {
            config.min_support = m;
        }
        if self.withdrawn_as_rejection {
            config.withdrawn_as_rejection = true;
        }
    }

    /// Config file, then flags.
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::from_file(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(k) = self.shingle_k {
            config.shingle_k = k;
        }
        if let Some(n) = self.num_hashes {
            config.num_hashes = n;
        }
        if let Some(b) = self.bands {
            config.bands = b;
        }
        if let Some(r) = self.rows {
            config.rows = r;
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        self.apply_query_settings(&mut config);
        config.validate()?;
        Ok(config)
    }

    /// A snapshot fixes the index parameters; only query-time settings may change.
    fn resolve_for_snapshot(&self, stored: &PipelineConfig) -> Result<PipelineConfig> {
        let current = [
            stored.shingle_k as u64,
            stored.num_hashes as u64,
            stored.bands as u64,
            stored.rows as u64,
            stored.seed,
        ];
        for ((name, wanted), have) in self.index_overrides().into_iter().zip(current) {
            if let Some(w) = wanted {
                if w != have {
                    return Err(Error::Config(format!(
                        "snapshot was built with {name} = {have}; rebuild from JSONL to use {w}"
                    ))
                    .into());
                }
            }
        }
        if self.config.is_some() {
            info!("snapshot input: index parameters come from the snapshot, config file ignored");
        }
        let mut config = stored.clone();
        self.apply_query_settings(&mut config);
        config.validate()?;
        Ok(config)
    }
}

struct Loaded {
    indexed: IndexedCorpus,
    input: InputInfo,
    errors: Vec<LineError>,
}

fn load(input: &InputArgs, args: &ConfigArgs) -> Result<Loaded> {
    let bytes = fs::read(&input.input)
        .with_context(|| format!("cannot read {}", input.input.display()))?;
    if snapshot::is_snapshot(&bytes) {
        let mut indexed = snapshot::from_bytes(&bytes)
            .with_context(|| format!("loading snapshot {}", input.input.display()))?;
        indexed.config = args.resolve_for_snapshot(&indexed.config)?;
        let info = InputInfo {
            file_name: file_name(&input.input),
            sha256: sha256_hex(&bytes),
            bytes: bytes.len(),
            lines: 0,
            records: indexed.corpus.len(),
            malformed: 0,
            skipped_duplicates: 0,
        };
        return Ok(Loaded {
            indexed,
            input: info,
            errors: Vec::new(),
        });
    }

    let config = args.resolve()?;
    let report = ingest(
        bytes.as_slice(),
        IngestOptions {
            skip_duplicate_ids: input.skip_duplicate_ids,
        },
    )
    .map_err(|e| e.in_stage("ingest"))?;
    log_ingest(&report);
    let info = InputInfo::describe(&input.input, &bytes, &report);
    let errors = report.errors.clone();
    let indexed = IndexedCorpus::build(report.corpus, &config)?;
    Ok(Loaded {
        indexed,
        input: info,
        errors,
    })
}

fn log_ingest(report: &IngestReport) {
    info!(
        "ingested {} records from {} lines",
        report.corpus.len(),
        report.lines_read
    );
    for e in report.errors.iter().take(20) {
        warn!("line {}: {}", e.line, e.message);
    }
    if report.malformed > 0 {
        warn!("{} malformed lines skipped", report.malformed);
    }
    if report.skipped_duplicates > 0 {
        warn!("{} duplicate ids skipped", report.skipped_duplicates);
    }
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn sink(output: &OutputArgs) -> Result<Box<dyn Write>> {
    Ok(match &output.output {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_jsonl<T: serde::Serialize>(items: &[T], mut out: impl Write) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn execute(command: Command) -> Result<ExitCode> {
    match command {
        Command::Ingest {
            input,
            config,
            out_dir,
        } => {
            let loaded = load(&input, &config)?;
            fs::create_dir_all(&out_dir)?;
            snapshot::save_file(&loaded.indexed, &out_dir.join("snapshot.bin"))?;
            let mut errs = BufWriter::new(File::create(out_dir.join("ingest_errors.jsonl"))?);
            write_jsonl(&loaded.errors, &mut errs)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&loaded.input)?
            );
            if loaded.input.malformed > 0 {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Run {
            input,
            config,
            out_dir,
            record_timings,
        } => {
            let t0 = Instant::now();
            let loaded = load(&input, &config)?;
            let t1 = Instant::now();
            let pairs = loaded.indexed.verified_pairs(loaded.indexed.config.threshold)?;
            let t2 = Instant::now();
            let analysis = pipeline::analyze_pairs(&loaded.indexed, pairs)?;
            let t3 = Instant::now();
            let output = RunOutput {
                indexed: loaded.indexed,
                analysis,
                timings: pipeline::StageTimings {
                    index_ms: (t1 - t0).as_millis(),
                    verify_ms: (t2 - t1).as_millis(),
                    analyze_ms: (t3 - t2).as_millis(),
                },
            };
            let timings = record_timings.then(|| output.timings.clone());
            pipeline::write_output_dir(&out_dir, &output, loaded.input, &loaded.errors, timings)?;
            print!("{}", output.analysis.stats.to_table());
        }
        Command::Query {
            input,
            config,
            title,
            r#abstract,
            id,
            output,
        } => {
            let loaded = load(&input, &config)?;
            let ix = &loaded.indexed;
            let hits = ix.query(&id, &title, &r#abstract, ix.config.threshold)?;
            if hits.is_empty() {
                info!("no indexed manuscript reaches the threshold");
            }
            write_jsonl(&hits, sink(&output)?)?;
        }
        Command::Pairs {
            input,
            config,
            output,
        } => {
            let loaded = load(&input, &config)?;
            let pairs = loaded.indexed.verified_pairs(loaded.indexed.config.threshold)?;
            let mut out = sink(&output)?;
            write_pairs_csv(&pairs, &mut out)?;
            out.flush()?;
        }
        Command::Simultaneous {
            input,
            config,
            output,
        } => {
            let analysis = pipeline::analyze(&load(&input, &config)?.indexed)?;
            write_jsonl(&select_simultaneous(&analysis.classifications), sink(&output)?)?;
        }
        Command::PublishedDups {
            input,
            config,
            output,
        } => {
            let analysis = pipeline::analyze(&load(&input, &config)?.indexed)?;
            write_jsonl(
                &select_published_duplicates(&analysis.classifications),
                sink(&output)?,
            )?;
        }
        Command::Journeys {
            input,
            config,
            format,
            output,
        } => {
            let analysis = pipeline::analyze(&load(&input, &config)?.indexed)?;
            let mut out = sink(&output)?;
            match format {
                JourneyFormat::Dot => {
                    out.write_all(export_journeys(&analysis.journeys).as_bytes())?;
                    out.flush()?;
                }
                JourneyFormat::Jsonl => write_jsonl(&analysis.journeys, out)?,
            }
        }
        Command::Recommend {
            input,
            config,
            from_journal,
            output,
        } => {
            let loaded = load(&input, &config)?;
            let analysis = pipeline::analyze(&loaded.indexed)?;
            let rec = recommend_transfers(
                &analysis.journeys,
                &from_journal,
                loaded.indexed.config.min_support,
            );
            if let Some(w) = &rec.warning {
                warn!("{w}");
            }
            let mut out = sink(&output)?;
            serde_json::to_writer_pretty(&mut out, &rec)?;
            out.write_all(b"\n")?;
            out.flush()?;
        }
        Command::Stats {
            input,
            config,
            json,
            output,
        } => {
            let analysis = pipeline::analyze(&load(&input, &config)?.indexed)?;
            let mut out = sink(&output)?;
            if json {
                serde_json::to_writer_pretty(&mut out, &analysis.stats)?;
                out.write_all(b"\n")?;
            } else {
                out.write_all(analysis.stats.to_table().as_bytes())?;
            }
            out.flush()?;
        }
        Command::Synth(args) => {
            let spec = SynthSpec {
                size: args.size,
                near_duplicate_rate: args.near_duplicate_rate,
                simultaneous_rate: args.simultaneous_rate,
                bad_transfer_rate: args.bad_transfer_rate,
                published_duplicate_pairs: args.published_duplicate_pairs,
                perturbation: Perturbation {
                    replace_fraction: args.replace_fraction,
                    delete_fraction: args.delete_fraction,
                },
                journal_count: args.journal_count,
                start_date: args.start_date,
                end_date: args.end_date,
                seed: args.seed,
                threshold: args.threshold,
                shingle_k: args.shingle_k,
            };
            let synth = generate_synthetic(&spec)?;
            let truth = args
                .truth
                .unwrap_or_else(|| args.out.with_extension("truth.json"));
            synth.write(&args.out, &truth)?;
            info!(
                "wrote {} records to {} and ground truth to {}",
                synth.records.len(),
                args.out.display(),
                truth.display()
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn is_config_error(err: &anyhow::Error) -> bool {
    err.chain()
        .any(|e| e.downcast_ref::<Error>().is_some_and(Error::is_config))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }

    match execute(cli.command) {
        Ok(code) => code,
        Err(err) => {
            let broken_pipe = err.chain().any(|e| {
                e.downcast_ref::<io::Error>()
                    .is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe)
            });
            if broken_pipe {
                return ExitCode::SUCCESS;
            }
            eprintln!("error: {err:#}");
            if is_config_error(&err) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
