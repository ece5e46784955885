use std::net::SocketAddr;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use speech2traj::audio::{read_wav, write_wav};
use speech2traj::model::{Network, NetworkSpec};
use speech2traj::synth::synth_utterance;
use speech2traj::{AudioClip, Engine, TrajectoryEvent};
use speech2traj_service::{Health, Server, ServiceConfig, ServiceError};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio_tungstenite::tungstenite::Message;

type Client = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

fn network() -> Network<f32> {
    Network::build(NetworkSpec::with_filters(32), 21).unwrap()
}

fn config(period_ms: u64) -> ServiceConfig {
    ServiceConfig {
        bind: SocketAddr::from(([127, 0, 0, 1], 0)),
        period_ms,
        ..ServiceConfig::default()
    }
}

async fn connect(addr: SocketAddr) -> Client {
    tokio_tungstenite::connect_async(format!("ws://{addr}/stream")).await.unwrap().0
}

async fn send_pcm(client: &mut Client, samples: &[i16]) {
    for chunk in samples.chunks(1024) {
        let bytes: Vec<u8> = chunk.iter().flat_map(|s| s.to_le_bytes()).collect();
        client.send(Message::Binary(bytes.into())).await.unwrap();
    }
}

async fn next_text(client: &mut Client) -> Option<String> {
    loop {
        match tokio::time::timeout(Duration::from_secs(5), client.next()).await.ok()?? {
            Ok(Message::Text(t)) => return Some(t.to_string()),
            Ok(Message::Close(_)) | Err(_) => return None,
            Ok(_) => {}
        }
    }
}

async fn next_event(client: &mut Client) -> TrajectoryEvent {
    let text = next_text(client).await.expect("event");
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("{e}: {text}"))
}

/// Reads events until one matches `want` exactly.
async fn wait_for(client: &mut Client, want: &TrajectoryEvent) -> usize {
    for seen in 1..=50 {
        if next_event(client).await.trajectory == want.trajectory {
            return seen;
        }
    }
    panic!("no event matched {want:?}");
}

async fn wait_sessions(server: &Server, n: usize) {
    for _ in 0..500 {
        if server.session_count() == n {
            return;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    panic!("session count stuck at {}", server.session_count());
}

async fn get_health(addr: SocketAddr) -> (String, Health) {
    let mut tcp = tokio::net::TcpStream::connect(addr).await.unwrap();
    tcp.write_all(b"GET /healthz HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n")
        .await
        .unwrap();
    let mut raw = String::new();
    tcp.read_to_string(&mut raw).await.unwrap();
    let (head, body) = raw.split_once("\r\n\r\n").unwrap();
    let status = head.lines().next().unwrap().to_string();
    (status, serde_json::from_str(body).unwrap())
}

#[tokio::test]
async fn health_reports_model_and_sessions() {
    let server = Server::start(config(100), network()).await.unwrap();
    let (status, health) = get_health(server.local_addr()).await;
    assert!(status.contains(" 200 "), "{status}");
    assert_eq!(health.status, "ok");
    assert_eq!(health.model.filters2, 32);
    assert_eq!(health.model.trainable_params, network().trainable_param_count());
    assert_eq!(health.sessions, 0);
    assert_eq!(health.period_ms, 100);
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn session_count_returns_to_zero() {
    let server = Server::start(config(100), network()).await.unwrap();
    let mut a = connect(server.local_addr()).await;
    let b = connect(server.local_addr()).await;
    wait_sessions(&server, 2).await;
    assert_eq!(get_health(server.local_addr()).await.1.sessions, 2);
    a.close(None).await.unwrap();
    drop(b);
    wait_sessions(&server, 0).await;
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn streamed_wav_matches_direct_inference() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("two.wav");
    write_wav(&path, &synth_utterance("two", 4)).unwrap();
    let clip = read_wav(&path).unwrap();
    let net = network();
    let direct = Engine::from_network(net.clone()).infer_clip(&clip).unwrap();

    let server = Server::start(config(50), net).await.unwrap();
    let mut client = connect(server.local_addr()).await;
    send_pcm(&mut client, clip.samples()).await;
    wait_for(&mut client, &direct).await;
    // nothing more arrives, so the window stays aligned
    for _ in 0..3 {
        assert_eq!(next_event(&mut client).await.trajectory, direct.trajectory);
    }
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn concurrent_sessions_are_isolated() {
    let net = network();
    let engine = Engine::from_network(net.clone());
    let one = synth_utterance("one", 1);
    let off = synth_utterance("off", 2);
    let want_one = engine.infer_clip(&AudioClip::from_samples(one.clone(), "one")).unwrap();
    let want_off = engine.infer_clip(&AudioClip::from_samples(off.clone(), "off")).unwrap();
    assert_ne!(want_one.trajectory, want_off.trajectory);

    let server = Server::start(config(50), net).await.unwrap();
    let mut a = connect(server.local_addr()).await;
    let mut b = connect(server.local_addr()).await;
    let (ra, rb) = tokio::join!(
        async {
            send_pcm(&mut a, &one).await;
            wait_for(&mut a, &want_one).await;
            next_event(&mut a).await
        },
        async {
            send_pcm(&mut b, &off).await;
            wait_for(&mut b, &want_off).await;
            next_event(&mut b).await
        }
    );
    assert_eq!(ra.trajectory, want_one.trajectory);
    assert_eq!(rb.trajectory, want_off.trajectory);
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn reset_clears_the_window() {
    let net = network();
    let silent = Engine::from_network(net.clone()).infer_clip(&AudioClip::silence("s")).unwrap();
    let loud = synth_utterance("five", 3);
    let server = Server::start(config(30), net).await.unwrap();
    let mut client = connect(server.local_addr()).await;
    send_pcm(&mut client, &loud).await;
    client.send(Message::Text(r#"{"cmd":"reset"}"#.into())).await.unwrap();
    wait_for(&mut client, &silent).await;
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn odd_frame_closes_only_that_session() {
    let server = Server::start(config(100), network()).await.unwrap();
    let mut bad = connect(server.local_addr()).await;
    let mut good = connect(server.local_addr()).await;
    bad.send(Message::Binary(vec![1u8, 2, 3].into())).await.unwrap();
    let mut error = None;
    while let Some(text) = next_text(&mut bad).await {
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        if let Some(e) = v.get("error") {
            error = Some(e.as_str().unwrap().to_string());
        }
    }
    assert!(error.unwrap().contains("3 bytes"));
    wait_sessions(&server, 1).await;

    next_event(&mut good).await;
    let mut again = connect(server.local_addr()).await;
    next_event(&mut again).await;
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn unknown_control_is_a_protocol_error() {
    let server = Server::start(config(100), network()).await.unwrap();
    let mut client = connect(server.local_addr()).await;
    client.send(Message::Text(r#"{"cmd":"jump"}"#.into())).await.unwrap();
    let mut saw_error = false;
    while let Some(text) = next_text(&mut client).await {
        saw_error |= text.contains("\"error\"");
    }
    assert!(saw_error);
    wait_sessions(&server, 0).await;
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn event_messages_have_the_agreed_shape() {
    let server = Server::start(config(50), network()).await.unwrap();
    let mut client = connect(server.local_addr()).await;
    let text = next_text(&mut client).await.unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let obj = v.as_object().unwrap();
    let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    keys.sort_unstable();
    assert_eq!(keys, ["latency_ms", "trajectory", "ts_ms"]);
    let traj = obj["trajectory"].as_array().unwrap();
    assert_eq!(traj.len(), 5);
    assert!(traj.iter().all(|x| (0.0..=1.0).contains(&x.as_f64().unwrap())));
    assert!(obj["ts_ms"].is_u64());
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn idle_client_sees_the_configured_rate() {
    let server = Server::start(config(100), network()).await.unwrap();
    let mut idle = connect(server.local_addr()).await;
    let mut events = Vec::new();
    for _ in 0..12 {
        events.push(next_event(&mut idle).await);
    }
    let span = (events.last().unwrap().ts_ms - events[0].ts_ms) as f64 / (events.len() - 1) as f64;
    assert!((80.0..=120.0).contains(&span), "{span} ms between events");
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn stalled_reader_does_not_hold_up_others() {
    let server = Server::start(config(50), network()).await.unwrap();
    let _stalled = connect(server.local_addr()).await;
    let mut live = connect(server.local_addr()).await;
    let started = tokio::time::Instant::now();
    for _ in 0..10 {
        next_event(&mut live).await;
    }
    assert!(started.elapsed() < Duration::from_secs(2), "{:?}", started.elapsed());
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn shutdown_closes_open_sessions() {
    let server = Server::start(config(100), network()).await.unwrap();
    let addr = server.local_addr();
    let mut client = connect(addr).await;
    wait_sessions(&server, 1).await;
    server.shutdown().await.unwrap();
    while next_text(&mut client).await.is_some() {}
    assert!(tokio::net::TcpStream::connect(addr).await.is_err());
}

#[tokio::test]
async fn startup_failures_are_typed() {
    let server = Server::start(config(100), network()).await.unwrap();
    let taken = ServiceConfig {
        bind: server.local_addr(),
        ..config(100)
    };
    assert!(matches!(Server::start(taken, network()).await, Err(ServiceError::Bind { .. })));
    let missing = std::path::Path::new("/nonexistent/model.ckpt");
    assert!(matches!(
        Server::start_from_checkpoint(config(100), missing).await,
        Err(ServiceError::Checkpoint(_))
    ));
    assert!(matches!(Server::start(config(5), network()).await, Err(ServiceError::Config(_))));
    server.shutdown().await.unwrap();
}
