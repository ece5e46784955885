//! Streaming inference: a fixed-cadence loop over a one-second ring buffer.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::{AudioClip, RingBuffer, CLIP_SAMPLES};
use crate::dataset::Trajectory;
use crate::error::{Error, Result};
use crate::features::log_spectrogram;
use crate::model::{load_checkpoint, Network};

pub const DEFAULT_PERIOD_MS: u64 = 200;
pub const MIN_PERIOD_MS: u64 = 20;
pub const MIN_BENCH_ITERATIONS: usize = 30;

/// Anything that maps a clip to five raw (unclamped) outputs.
pub trait ClipInference: Send + Sync {
    fn infer_raw(&self, clip: &AudioClip) -> Result<[f32; 5]>;
}

impl ClipInference for Network<f32> {
    fn infer_raw(&self, clip: &AudioClip) -> Result<[f32; 5]> {
        self.forward_feature(&log_spectrogram(clip))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEvent {
    pub trajectory: Trajectory,
    pub latency_ms: f64,
    /// Milliseconds since the engine started, at the end of the audio window.
    pub ts_ms: u64,
}

impl TrajectoryEvent {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("event serializes")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeConfig {
    pub checkpoint: PathBuf,
    pub period_ms: u64,
    pub latency_log: Option<PathBuf>,
}

impl RuntimeConfig {
    pub fn new(checkpoint: impl Into<PathBuf>) -> Self {
        Self {
            checkpoint: checkpoint.into(),
            period_ms: DEFAULT_PERIOD_MS,
            latency_log: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_period(self.period_ms)
    }
}

pub fn validate_period(period_ms: u64) -> Result<()> {
    if period_ms < MIN_PERIOD_MS {
        return Err(Error::InvalidConfig(format!(
            "inference period {period_ms} ms is below {MIN_PERIOD_MS} ms"
        )));
    }
    Ok(())
}

/// A loaded model plus the clock events are stamped against.
pub struct Engine {
    model: Arc<dyn ClipInference>,
    epoch: Instant,
}

impl Engine {
    pub fn new(model: Arc<dyn ClipInference>) -> Self {
        Self {
            model,
            epoch: Instant::now(),
        }
    }

    pub fn from_network(net: Network<f32>) -> Self {
        Self::new(Arc::new(net))
    }

    pub fn load(checkpoint: &Path) -> Result<Self> {
        let (net, _) = load_checkpoint(checkpoint)?;
        Ok(Self::from_network(net))
    }

    pub fn now_ms(&self) -> u64 {
        self.epoch.elapsed().as_millis() as u64
    }

    pub fn infer_clip(&self, clip: &AudioClip) -> Result<TrajectoryEvent> {
        let ts_ms = self.now_ms();
        let started = Instant::now();
        let raw = self.model.infer_raw(clip)?;
        let latency_ms = (started.elapsed().as_secs_f64() * 1e3).max(f64::MIN_POSITIVE);
        Ok(TrajectoryEvent {
            trajectory: Trajectory::clamped(raw),
            latency_ms,
            ts_ms,
        })
    }
}

/// Handle to a running [`stream_loop`]. Dropping it stops the loop.
pub struct StreamHandle {
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<Result<()>>>,
}

impl StreamHandle {
    pub fn is_running(&self) -> bool {
        self.thread.as_ref().is_some_and(|t| !t.is_finished())
    }

    /// Signals the loop and waits for it; returns the loop's own result.
    pub fn stop(mut self) -> Result<()> {
        self.shutdown()
    }

    fn shutdown(&mut self) -> Result<()> {
        self.stop.store(true, Ordering::SeqCst);
        match self.thread.take() {
            Some(t) => t.join().unwrap_or(Err(Error::EngineStopped)),
            None => Ok(()),
        }
    }
}

impl Drop for StreamHandle {
    fn drop(&mut self) {
        let _ = self.shutdown();
    }
}

/// Every `period`, snapshots `ring`, runs inference and hands the event to
/// `sink`. A tick that arrives while inference is still running is skipped.
/// The loop ends when `sink` returns `false`, the handle is stopped, or
/// inference fails.
pub fn stream_loop(
    engine: Arc<Engine>,
    ring: Arc<Mutex<RingBuffer>>,
    period: Duration,
    mut sink: impl FnMut(TrajectoryEvent) -> bool + Send + 'static,
) -> Result<StreamHandle> {
    validate_period(period.as_millis() as u64)?;
    let stop = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&stop);
    let thread = std::thread::Builder::new()
        .name("s2t-stream".into())
        .spawn(move || {
            let mut next = Instant::now() + period;
            while !flag.load(Ordering::SeqCst) {
                let now = Instant::now();
                if next > now {
                    // sleep in slices so stop requests are seen promptly
                    std::thread::sleep((next - now).min(Duration::from_millis(10)));
                    continue;
                }
                let clip = ring.lock().map_err(|_| Error::EngineStopped)?.snapshot_clip("stream");
                let event = engine.infer_clip(&clip)?;
                if !sink(event) {
                    break;
                }
                next += period;
                let now = Instant::now();
                while next <= now {
                    next += period;
                }
            }
            Ok(())
        })
        .map_err(|e| Error::io("<thread>", e))?;
    Ok(StreamHandle {
        stop,
        thread: Some(thread),
    })
}

/// [`stream_loop`] delivering into an ordered channel.
pub fn stream_events(
    engine: Arc<Engine>,
    ring: Arc<Mutex<RingBuffer>>,
    period: Duration,
) -> Result<(StreamHandle, EventReceiver)> {
    let (tx, rx) = mpsc::channel();
    let handle = stream_loop(engine, ring, period, move |e| tx.send(e).is_ok())?;
    Ok((handle, EventReceiver { rx }))
}

pub struct EventReceiver {
    rx: mpsc::Receiver<TrajectoryEvent>,
}

impl EventReceiver {
    /// Next event, `Ok(None)` on timeout, `EngineStopped` once the loop is gone.
    pub fn next_event(&self, timeout: Duration) -> Result<Option<TrajectoryEvent>> {
        match self.rx.recv_timeout(timeout) {
            Ok(e) => Ok(Some(e)),
            Err(mpsc::RecvTimeoutError::Timeout) => Ok(None),
            Err(mpsc::RecvTimeoutError::Disconnected) => Err(Error::EngineStopped),
        }
    }
}

/// CSV sink of `timestamp_ms,latency_ms` rows.
pub struct LatencyLog {
    out: std::io::BufWriter<std::fs::File>,
    path: PathBuf,
}

impl LatencyLog {
    pub fn create(path: &Path) -> Result<Self> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        writeln!(out, "timestamp_ms,latency_ms").map_err(|e| Error::io(path, e))?;
        Ok(Self {
            out,
            path: path.to_path_buf(),
        })
    }

    pub fn record(&mut self, event: &TrajectoryEvent) -> Result<()> {
        writeln!(self.out, "{},{:.4}", event.ts_ms, event.latency_ms).map_err(|e| Error::io(&self.path, e))?;
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyStats {
    pub samples_ms: Vec<f64>,
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
    pub max: f64,
}

impl LatencyStats {
    pub fn from_samples(samples_ms: Vec<f64>) -> Self {
        let mut sorted = samples_ms.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len().max(1);
        // nearest-rank percentile
        let rank = |p: f64| sorted[((p * n as f64).ceil() as usize).clamp(1, n) - 1];
        Self {
            mean: sorted.iter().sum::<f64>() / n as f64,
            p50: rank(0.50),
            p95: rank(0.95),
            max: *sorted.last().unwrap_or(&0.0),
            samples_ms,
        }
    }

    pub fn format(&self) -> String {
        format!(
            "{:<10} {:>10}\n{:<10} {:>10}\n{:<10} {:>10.3}\n{:<10} {:>10.3}\n{:<10} {:>10.3}\n{:<10} {:>10.3}\n",
            "metric",
            "ms",
            "samples",
            self.samples_ms.len(),
            "mean",
            self.mean,
            "p50",
            self.p50,
            "p95",
            self.p95,
            "max",
            self.max
        )
    }
}

/// Times `iterations` feature+forward passes on a fixed random clip.
pub fn bench(engine: &Engine, iterations: usize, seed: u64) -> Result<LatencyStats> {
    if iterations < MIN_BENCH_ITERATIONS {
        return Err(Error::InvalidConfig(format!(
            "{iterations} iterations; at least {MIN_BENCH_ITERATIONS} required"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..CLIP_SAMPLES).map(|_| rng.random_range(-8000..8000)).collect();
    let clip = AudioClip::from_samples(samples, "bench");
    // one warm-up pass builds the FFT plan and touches the weights
    engine.infer_clip(&clip)?;
    let mut times = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        times.push(engine.infer_clip(&clip)?.latency_ms);
    }
    Ok(LatencyStats::from_samples(times))
}

/// Plays `samples` into a fresh ring at 16 kHz in simulated time and runs
/// one inference every `period_ms` for `duration_ms`. Timestamps are the
/// simulated tick times, so the output only depends on the inputs.
pub fn replay(engine: &Engine, samples: &[i16], period_ms: u64, duration_ms: u64) -> Result<Vec<TrajectoryEvent>> {
    validate_period(period_ms)?;
    let per_ms = CLIP_SAMPLES / 1000;
    let mut ring = RingBuffer::new();
    let mut fed = 0;
    let mut events = Vec::new();
    let mut t_ms = period_ms;
    while t_ms <= duration_ms {
        let upto = (t_ms as usize * per_ms).min(samples.len());
        if upto > fed {
            ring.push(&samples[fed..upto]);
            fed = upto;
        }
        let mut event = engine.infer_clip(&ring.snapshot_clip("replay"))?;
        event.ts_ms = t_ms;
        events.push(event);
        t_ms += period_ms;
    }
    Ok(events)
}
