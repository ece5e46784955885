//! The `s2t` command line. Results go to stdout, progress and diagnostics to
//! stderr. Exit codes: 0 success, 1 usage, 2 bad input data, 3 internal.
//!
//! Every flag can also come from an `S2T_*` environment variable; flags on
//! the command line win, then the environment, then the built-in default.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};
use speech2traj::control::{parse_event_lines, simulate, steps_from_events, Gains, PlantParams};
use speech2traj::dataset::{scan_dataset, Split};
use speech2traj::model::{format_layer_table, load_checkpoint, Network, NetworkSpec};
use speech2traj::nn::gradcheck::{run_all, TOLERANCE};
use speech2traj::nn::AdamConfig;
use speech2traj::runtime::{bench, replay, LatencyLog, DEFAULT_PERIOD_MS, MIN_BENCH_ITERATIONS};
use speech2traj::synth::{write_corpus, CorpusSpec};
use speech2traj::training::{evaluate, train, AugmentConfig, TrainConfig};
use speech2traj::{read_wav, Engine, LabelMap};
use speech2traj_service::{Server, ServiceConfig, ServiceError, DEFAULT_PORT, OUTBOX_DEPTH};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

pub const SIMULATION_FILE: &str = "simulation.csv";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const LATENCY_FILE: &str = "latency.csv";
pub const BENCH_FILE: &str = "bench.csv";
pub const FEATURES_FILE: &str = "features.txt";

#[cfg(debug_assertions)]
const LONG_VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (debug build, checkpoint format S2T1)");
#[cfg(not(debug_assertions))]
const LONG_VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (release build, checkpoint format S2T1)");

fn filters_arg(s: &str) -> Result<usize, String> {
    let f: usize = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if [32, 64, 128, 256].contains(&f) {
        Ok(f)
    } else {
        Err(format!("{f} is not one of 32, 64, 128, 256"))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "s2t",
    version,
    long_version = LONG_VERSION,
    about = "Speech command to five-finger trajectory: training, inference, streaming and control simulation"
)]
pub struct Cli {
    /// Worker threads for feature extraction and batched kernels (0 = one per core)
    #[arg(long, global = true, env = "S2T_THREADS", default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the network on a Speech Commands tree
    Train(TrainArgs),
    /// Score a checkpoint on one split
    Eval(EvalArgs),
    /// Run one WAV file through a checkpoint and print the event as JSON
    Infer(InferArgs),
    /// Print the layer table with output shapes and parameter counts
    Describe(DescribeArgs),
    /// Time feature extraction plus forward pass on one clip
    Bench(BenchArgs),
    /// Finite-difference check of every kernel's backward pass
    Gradcheck(GradcheckArgs),
    /// Drive the simulated finger controllers from events or a WAV file
    Simulate(SimulateArgs),
    /// Serve the WebSocket streaming endpoint
    Serve(ServeArgs),
    /// Count utterances per word and split
    Scan(ScanArgs),
    /// Write a small synthetic corpus in the Speech Commands layout
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset root (word folders plus validation_list.txt and testing_list.txt)
    #[arg(long, env = "S2T_DATA")]
    pub data: PathBuf,
    /// Word to trajectory JSON map; the built-in map when absent
    #[arg(long, env = "S2T_LABELS")]
    pub labels: Option<PathBuf>,
    /// Filters in the second convolution
    #[arg(long, env = "S2T_FILTERS", default_value_t = 256, value_parser = filters_arg)]
    pub filters: usize,
    #[arg(long, env = "S2T_EPOCHS", default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, env = "S2T_BATCH_SIZE", default_value_t = 64)]
    pub batch_size: usize,
    /// Adam learning rate
    #[arg(long, env = "S2T_LR", default_value_t = 1e-3)]
    pub lr: f64,
    /// Dropout rate before the output layer
    #[arg(long, env = "S2T_DROPOUT", default_value_t = 0.5)]
    pub dropout: f64,
    #[arg(long, env = "S2T_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output directory for best.ckpt, last.ckpt and report.csv
    #[arg(long, env = "S2T_OUT")]
    pub out: PathBuf,
    /// Mix background noise into half of the training clips at 5 to 20 dB SNR
    #[arg(long, env = "S2T_AUGMENT")]
    pub augment: bool,
    /// Keep a stratified subset of about this many utterances
    #[arg(long, env = "S2T_SUBSET")]
    pub subset: Option<usize>,
    /// Comma-separated words to keep (all words when absent)
    #[arg(long, env = "S2T_WORDS", value_delimiter = ',')]
    pub words: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, env = "S2T_DATA")]
    pub data: PathBuf,
    #[arg(long, env = "S2T_CHECKPOINT")]
    pub checkpoint: PathBuf,
    #[arg(long, env = "S2T_LABELS")]
    pub labels: Option<PathBuf>,
    /// train, val1 (validation list) or val2 (testing list)
    #[arg(long, env = "S2T_SPLIT", default_value = "val1", value_parser = ["train", "val1", "val2"])]
    pub split: String,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long, env = "S2T_CHECKPOINT")]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub wav: PathBuf,
    /// Also write the 129 x 71 log-spectrogram as text to <out>/features.txt
    #[arg(long, requires = "out")]
    pub dump_features: bool,
    #[arg(long, env = "S2T_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DescribeArgs {
    #[arg(long, env = "S2T_FILTERS", default_value_t = 256, value_parser = filters_arg)]
    pub filters: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Time this checkpoint instead of a randomly initialised network
    #[arg(long, env = "S2T_CHECKPOINT")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, env = "S2T_FILTERS", default_value_t = 256, value_parser = filters_arg)]
    pub filters: usize,
    #[arg(long, default_value_t = 100)]
    pub iterations: usize,
    #[arg(long, env = "S2T_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Write per-iteration latencies to <out>/bench.csv
    #[arg(long, env = "S2T_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, env = "S2T_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("input").required(true).args(["events", "wav"])))]
pub struct SimulateArgs {
    /// Trajectory events, one JSON object per line
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Replay this WAV through a checkpoint at the streaming cadence
    #[arg(long, requires = "checkpoint")]
    pub wav: Option<PathBuf>,
    #[arg(long, env = "S2T_CHECKPOINT")]
    pub checkpoint: Option<PathBuf>,
    /// Inference period when replaying a WAV
    #[arg(long, env = "S2T_PERIOD_MS", default_value_t = DEFAULT_PERIOD_MS)]
    pub period_ms: u64,
    /// Simulated time in seconds
    #[arg(long, default_value_t = 3.0)]
    pub duration: f64,
    #[arg(long, default_value_t = Gains::default().kp)]
    pub kp: f64,
    #[arg(long, default_value_t = Gains::default().ki)]
    pub ki: f64,
    /// Integrator clamp
    #[arg(long, default_value_t = Gains::default().i_max)]
    pub i_max: f64,
    /// Actuator time constant in seconds
    #[arg(long, default_value_t = PlantParams::default().time_constant_s)]
    pub tau: f64,
    /// Control step in seconds
    #[arg(long, default_value_t = PlantParams::default().dt_s)]
    pub dt: f64,
    /// Write simulation.csv (and events.jsonl, latency.csv for WAV input) here instead of printing
    #[arg(long, env = "S2T_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "S2T_CHECKPOINT")]
    pub checkpoint: PathBuf,
    #[arg(long, env = "S2T_HOST", default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    /// TCP port; 0 picks a free one
    #[arg(long, env = "S2T_PORT", default_value_t = DEFAULT_PORT)]
    pub port: u16,
    #[arg(long, env = "S2T_PERIOD_MS", default_value_t = DEFAULT_PERIOD_MS)]
    pub period_ms: u64,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long, env = "S2T_DATA")]
    pub data: PathBuf,
    #[arg(long, env = "S2T_LABELS")]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, env = "S2T_OUT")]
    pub out: PathBuf,
    #[arg(long, env = "S2T_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Utterances per word
    #[arg(long, default_value_t = 20)]
    pub per_word: usize,
    /// Comma-separated words (a dozen command and filler words when absent)
    #[arg(long, value_delimiter = ',')]
    pub words: Option<Vec<String>>,
    /// Seconds of background noise to write (0 for none)
    #[arg(long, default_value_t = 5.0)]
    pub noise_seconds: f64,
}

/// A failed command: what to print and which exit class it belongs to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INTERNAL,
            message: message.into(),
        }
    }
}

impl From<speech2traj::Error> for Failure {
    fn from(e: speech2traj::Error) -> Self {
        Self {
            code: if e.is_data_error() { EXIT_DATA } else { EXIT_INTERNAL },
            message: e.to_string(),
        }
    }
}

impl From<ServiceError> for Failure {
    fn from(e: ServiceError) -> Self {
        let code = match e {
            ServiceError::Serve(_) => EXIT_INTERNAL,
            ServiceError::Config(_) => EXIT_USAGE,
            ServiceError::Bind { .. } | ServiceError::Checkpoint(_) => EXIT_DATA,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_DATA,
        message: format!("{}: {e}", path.display()),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn main_with<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp_millis()
        .try_init();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            log::warn!("thread pool already configured: {e}");
        }
    }
    match run(cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

pub fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Infer(a) => cmd_infer(a),
        Command::Describe(a) => cmd_describe(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Serve(a) => cmd_serve(a),
        Command::Scan(a) => cmd_scan(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn load_labels(path: Option<&Path>) -> Result<LabelMap, Failure> {
    Ok(match path {
        Some(p) => LabelMap::load(p)?,
        None => LabelMap::default(),
    })
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn cmd_train(a: TrainArgs) -> Result<(), Failure> {
    let labels = load_labels(a.labels.as_deref())?;
    let mut manifest = scan_dataset(&a.data)?;
    if let Some(words) = &a.words {
        manifest = manifest.filter_words(|w| words.iter().any(|k| k.trim().eq_ignore_ascii_case(w)));
    }
    if let Some(n) = a.subset {
        manifest = manifest.stratified_subset(n, a.seed);
    }
    log::info!(
        "{} utterances: {} train, {} val1",
        manifest.len(),
        manifest.split(Split::Train).len(),
        manifest.split(Split::Val1).len()
    );
    let config = TrainConfig {
        network: NetworkSpec {
            filters2: a.filters,
            dropout_rate: a.dropout,
        },
        epochs: a.epochs,
        batch_size: a.batch_size,
        adam: AdamConfig {
            lr: a.lr,
            ..AdamConfig::default()
        },
        seed: a.seed,
        augment: a.augment.then(AugmentConfig::default),
        full_batch: false,
        out_dir: Some(a.out.clone()),
    };
    let outcome = train(&config, &manifest, &labels)?;
    let best = outcome.report.best_epoch().unwrap_or(0);
    let best_rmse = outcome.report.best_val_rmse().unwrap_or(f64::NAN);
    println!("best epoch {best}, val1 rmse {best_rmse:.6}");
    println!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<(), Failure> {
    let labels = load_labels(a.labels.as_deref())?;
    let (net, _) = load_checkpoint(&a.checkpoint)?;
    let manifest = scan_dataset(&a.data)?;
    let split = Split::parse(&a.split).ok_or_else(|| Failure::usage(format!("unknown split {}", a.split)))?;
    let result = evaluate(&net, &manifest, split, &labels)?;
    print!("{}", result.format());
    Ok(())
}

fn cmd_infer(a: InferArgs) -> Result<(), Failure> {
    let engine = Engine::load(&a.checkpoint)?;
    let clip = read_wav(&a.wav)?;
    let event = engine.infer_clip(&clip)?;
    if a.dump_features {
        let dir = a.out.as_deref().ok_or_else(|| Failure::usage("--dump-features needs --out"))?;
        create_dir(dir)?;
        speech2traj::log_spectrogram(&clip).write_text(&dir.join(FEATURES_FILE))?;
    }
    println!("{}", event.to_json());
    Ok(())
}

fn cmd_describe(a: DescribeArgs) -> Result<(), Failure> {
    let spec = NetworkSpec::with_filters(a.filters);
    // building checks every layer's output shape against the table
    Network::<f32>::zeros(spec)?;
    print!("{}", format_layer_table(&spec.layer_table()));
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<(), Failure> {
    if a.iterations < MIN_BENCH_ITERATIONS {
        return Err(Failure::usage(format!("--iterations must be at least {MIN_BENCH_ITERATIONS}")));
    }
    let net = match &a.checkpoint {
        Some(p) => load_checkpoint(p)?.0,
        None => Network::build(NetworkSpec::with_filters(a.filters), a.seed)?,
    };
    let filters = net.spec().filters2;
    let stats = bench(&Engine::from_network(net), a.iterations, a.seed)?;
    println!("filters2 {filters}, {} threads", rayon::current_num_threads());
    print!("{}", stats.format());
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        let mut csv = String::from("iteration,latency_ms\n");
        for (i, ms) in stats.samples_ms.iter().enumerate() {
            csv.push_str(&format!("{i},{ms:.4}\n"));
        }
        write_file(&dir.join(BENCH_FILE), &csv)?;
    }
    Ok(())
}

fn cmd_gradcheck(a: GradcheckArgs) -> Result<(), Failure> {
    let checks = run_all(a.seed)?;
    println!("{:<10} {:>8} {:>14} {:>6}", "kernel", "entries", "max_rel_error", "ok");
    for c in &checks {
        println!(
            "{:<10} {:>8} {:>14.3e} {:>6}",
            c.kernel,
            c.entries,
            c.max_rel_error,
            if c.passed() { "yes" } else { "NO" }
        );
    }
    if checks.iter().all(|c| c.passed()) {
        Ok(())
    } else {
        Err(Failure::internal(format!("gradient check above {TOLERANCE:e}")))
    }
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), Failure> {
    if !(a.duration > 0.0 && a.duration.is_finite()) {
        return Err(Failure::usage("--duration must be positive"));
    }
    let events = match (&a.events, &a.wav, &a.checkpoint) {
        (Some(path), _, _) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
            parse_event_lines(&text)?
        }
        (None, Some(wav), Some(ckpt)) => {
            let engine = Engine::load(ckpt)?;
            let samples = speech2traj::audio::read_wav_samples(wav)?;
            replay(&engine, &samples, a.period_ms, (a.duration * 1e3) as u64)?
        }
        _ => return Err(Failure::usage("give --events, or --wav with --checkpoint")),
    };
    let gains = Gains {
        kp: a.kp,
        ki: a.ki,
        i_max: a.i_max,
    };
    let plant = PlantParams {
        time_constant_s: a.tau,
        dt_s: a.dt,
    };
    let trace = simulate(&steps_from_events(&events), gains, plant, a.duration)?;
    let csv = trace.to_csv();
    match &a.out {
        Some(dir) => {
            create_dir(dir)?;
            write_file(&dir.join(SIMULATION_FILE), &csv)?;
            if a.wav.is_some() {
                let jsonl: String = events.iter().map(|e| e.to_json() + "\n").collect();
                write_file(&dir.join(EVENTS_FILE), &jsonl)?;
                let mut log = LatencyLog::create(&dir.join(LATENCY_FILE))?;
                for e in &events {
                    log.record(e)?;
                }
            }
            println!("wrote {}", dir.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_serve(a: ServeArgs) -> Result<(), Failure> {
    let config = ServiceConfig {
        bind: std::net::SocketAddr::new(a.host, a.port),
        period_ms: a.period_ms,
        outbox_depth: OUTBOX_DEPTH,
    };
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::internal(format!("cannot start async runtime: {e}")))?;
    rt.block_on(async move {
        let server = Server::start_from_checkpoint(config, &a.checkpoint).await?;
        println!("listening on {}", server.local_addr());
        let _ = std::io::stdout().flush();
        let _ = tokio::signal::ctrl_c().await;
        log::info!("shutting down");
        server.shutdown().await?;
        Ok(())
    })
}

fn cmd_scan(a: ScanArgs) -> Result<(), Failure> {
    let labels = load_labels(a.labels.as_deref())?;
    let manifest = scan_dataset(&a.data)?;
    print!("{}", manifest.counts_report(&labels).format());
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<(), Failure> {
    let defaults = CorpusSpec::default();
    let spec = CorpusSpec {
        words: a.words.unwrap_or(defaults.words),
        per_word: a.per_word,
        noise_seconds: a.noise_seconds,
        seed: a.seed,
        ..defaults
    };
    write_corpus(&a.out, &spec)?;
    println!("wrote {} utterances to {}", spec.words.len() * spec.per_word, a.out.display());
    Ok(())
}
