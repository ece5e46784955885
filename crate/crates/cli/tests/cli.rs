use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

use clap::CommandFactory;
use speech2traj::audio::write_wav;
use speech2traj::model::{save_checkpoint, CheckpointMetadata, Network, NetworkSpec};
use speech2traj::synth::synth_utterance;
use speech2traj_cli::{Cli, EXIT_DATA, EXIT_OK, EXIT_USAGE};

fn s2t(args: &[&str]) -> Output {
    s2t_env(args, &[])
}

fn s2t_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_s2t"));
    cmd.args(args).env("RUST_LOG", "warn");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn code(out: &Output) -> u8 {
    out.status.code().unwrap() as u8
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn long_flags(text: &str) -> BTreeSet<String> {
    let mut flags = BTreeSet::new();
    for (i, _) in text.match_indices("--") {
        let name: String = text[i + 2..]
            .chars()
            .take_while(|c| c.is_ascii_lowercase() || *c == '-')
            .collect();
        if !name.is_empty() {
            flags.insert(name);
        }
    }
    flags
}

#[test]
fn help_text_and_parser_agree_for_every_subcommand() {
    let cli = Cli::command();
    for sub in cli.get_subcommands() {
        let name = sub.get_name();
        let out = s2t(&[name, "--help"]);
        assert_eq!(code(&out), EXIT_OK, "{name}");
        let help = stdout(&out);
        let mut parsed: BTreeSet<String> = sub
            .get_arguments()
            .filter_map(|a| a.get_long().map(String::from))
            .collect();
        parsed.extend(["help", "threads"].map(String::from));
        assert_eq!(long_flags(&help), parsed, "{name} --help");
        for arg in sub.get_arguments() {
            if let Some(var) = arg.get_env() {
                let var = var.to_str().unwrap();
                assert!(help.contains(&format!("[env: {var}")), "{name}: {var} undocumented");
            }
        }
    }
}

#[test]
fn version_reports_build() {
    let out = s2t(&["--version"]);
    assert_eq!(code(&out), EXIT_OK);
    assert!(stdout(&out).starts_with(&format!("s2t {}", env!("CARGO_PKG_VERSION"))));
}

#[test]
fn usage_errors_exit_1() {
    for args in [
        &["describe", "--bogus"][..],
        &["describe", "--filters", "100"],
        &["frobnicate"],
        &[],
        &["simulate"],
        &["bench", "--iterations", "10"],
    ] {
        let out = s2t(args);
        assert_eq!(code(&out), EXIT_USAGE, "{args:?}");
        assert!(out.stdout.is_empty() || args.is_empty(), "{args:?}");
    }
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.wav");
    std::fs::write(&junk, b"RIFFnope").unwrap();
    let ckpt = dir.path().join("net.ckpt");
    save_checkpoint(
        &Network::build(NetworkSpec::with_filters(32), 1).unwrap(),
        CheckpointMetadata::default(),
        &ckpt,
    )
    .unwrap();
    let ckpt = ckpt.to_str().unwrap();
    let missing = dir.path().join("missing");
    for args in [
        vec!["infer", "--checkpoint", ckpt, "--wav", junk.to_str().unwrap()],
        vec!["infer", "--checkpoint", "/nonexistent.ckpt", "--wav", junk.to_str().unwrap()],
        vec!["scan", "--data", missing.to_str().unwrap()],
        vec!["serve", "--checkpoint", junk.to_str().unwrap(), "--port", "0"],
    ] {
        let out = s2t(&args);
        assert_eq!(code(&out), EXIT_DATA, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
    }
}

#[test]
fn failure_classes_map_to_exit_codes() {
    use speech2traj_cli::{Failure, EXIT_INTERNAL};
    let internal = Failure::from(speech2traj::Error::ShapeMismatch {
        op: "dense",
        expected: vec![64],
        got: vec![65],
    });
    assert_eq!(internal.code, EXIT_INTERNAL);
    assert_eq!(Failure::from(speech2traj::Error::EngineStopped).code, EXIT_INTERNAL);
    assert_eq!(Failure::from(speech2traj::Error::ZeroSignalPower).code, EXIT_DATA);
}

#[test]
fn flags_beat_environment_beats_defaults() {
    let filters_of = |out: Output| -> String {
        let text = stdout(&out);
        let row = text.lines().find(|l| l.starts_with("4 ")).unwrap().to_string();
        row.split_whitespace().nth(3).unwrap().to_string()
    };
    assert_eq!(filters_of(s2t(&["describe"])), "256");
    assert_eq!(filters_of(s2t_env(&["describe"], &[("S2T_FILTERS", "64")])), "64");
    assert_eq!(filters_of(s2t_env(&["describe", "--filters", "128"], &[("S2T_FILTERS", "64")])), "128");
    let bad_env = s2t_env(&["describe"], &[("S2T_FILTERS", "7")]);
    assert_eq!(code(&bad_env), EXIT_USAGE);
}

fn fixture(dir: &Path) -> (String, String) {
    let wav = dir.join("two.wav");
    write_wav(&wav, &synth_utterance("two", 5)).unwrap();
    let ckpt = dir.join("net.ckpt");
    let net = Network::build(NetworkSpec::with_filters(32), 2).unwrap();
    save_checkpoint(&net, CheckpointMetadata::default(), &ckpt).unwrap();
    (wav.to_str().unwrap().into(), ckpt.to_str().unwrap().into())
}

#[test]
fn infer_prints_one_json_line_and_can_dump_features() {
    let dir = tempfile::tempdir().unwrap();
    let (wav, ckpt) = fixture(dir.path());
    let out_dir = dir.path().join("dump");
    let out = s2t(&["infer", "--checkpoint", &ckpt, "--wav", &wav, "--dump-features", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), EXIT_OK);
    let text = stdout(&out);
    assert!(text.ends_with('\n'));
    assert_eq!(text.lines().count(), 1);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["trajectory"].as_array().unwrap().len(), 5);
    let dump = std::fs::read_to_string(out_dir.join("features.txt")).unwrap();
    assert_eq!(dump.lines().count(), 129);
    assert!(dump.lines().all(|l| l.split_whitespace().count() == 71));

    let no_out = s2t(&["infer", "--checkpoint", &ckpt, "--wav", &wav, "--dump-features"]);
    assert_eq!(code(&no_out), EXIT_USAGE);
}

#[test]
fn simulate_replays_a_wav_and_reads_events_back() {
    let dir = tempfile::tempdir().unwrap();
    let (wav, ckpt) = fixture(dir.path());
    let out_dir = dir.path().join("sim");
    let out = s2t(&["simulate", "--wav", &wav, "--checkpoint", &ckpt, "--duration", "2", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), EXIT_OK, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("simulation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 201);
    let events = out_dir.join("events.jsonl");
    assert_eq!(std::fs::read_to_string(&events).unwrap().lines().count(), 10);
    let latency = std::fs::read_to_string(out_dir.join("latency.csv")).unwrap();
    assert!(latency.starts_with("timestamp_ms,latency_ms\n"));

    let again = s2t(&["simulate", "--events", events.to_str().unwrap(), "--duration", "2"]);
    assert_eq!(code(&again), EXIT_OK);
    let printed = stdout(&again);
    // events were stamped from the first tick, so the replayed trace starts a period later
    assert_eq!(printed.lines().count(), 202);
    assert_eq!(printed.lines().next(), csv.lines().next());
}

#[test]
fn train_writes_the_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let run = dir.path().join("run");
    let out = s2t(&["synth", "--out", corpus.to_str().unwrap(), "--per-word", "5", "--words", "two,one,bed", "--seed", "4"]);
    assert_eq!(code(&out), EXIT_OK);
    let out = s2t(&[
        "train", "--data", corpus.to_str().unwrap(), "--filters", "32", "--epochs", "2", "--batch-size", "4", "--seed", "7",
        "--out", run.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), EXIT_OK, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["best.ckpt", "last.ckpt", "report.csv"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    let report = std::fs::read_to_string(run.join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 3);

    let eval = s2t(&["eval", "--data", corpus.to_str().unwrap(), "--checkpoint", run.join("best.ckpt").to_str().unwrap()]);
    assert_eq!(code(&eval), EXIT_OK);
    assert!(stdout(&eval).starts_with("examples 3 "));
}
