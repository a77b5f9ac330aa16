//! Runs the `ghost` binary end to end.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

use common::{aim, core_dir};
use ghost_core::math::{Pose, Vec3};
use ghost_core::session::{ControllerEvent, EventKind, MenuAction};
use serde_json::Value;

fn ghost(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ghost")).args(args).output().expect("binary runs")
}

fn golden(name: &str) -> PathBuf {
    core_dir().join("goldens").join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn replay_writes_the_golden_instruction_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.jsonl");
    let g = golden("tidy_fig3");
    let run = ghost(&["replay", "--scene", s(&g.join("scene.json")), "--trace", s(&g.join("trace.jsonl")), "--out", s(&out)]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let stdout = String::from_utf8(run.stdout).unwrap();
    assert!(stdout.contains("instructions 6"));
    let digest = std::fs::read_to_string(g.join("expected_digest.txt")).unwrap();
    assert!(stdout.contains(&format!("digest {}", digest.trim())));
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(g.join("expected_instructions.jsonl")).unwrap());
}

#[test]
fn verify_accepts_goldens_and_flags_tampering() {
    let run = ghost(&["verify", "--golden", s(&core_dir().join("goldens"))]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stdout));
    assert_eq!(String::from_utf8(run.stdout).unwrap().matches("ok ").count(), 4);

    let dir = tempfile::tempdir().unwrap();
    let copy = dir.path().join("tidy");
    std::fs::create_dir(&copy).unwrap();
    for f in ["scene.json", "trace.jsonl", "expected_instructions.jsonl", "expected_digest.txt", "expected_status.jsonl"] {
        std::fs::copy(golden("tidy_fig3").join(f), copy.join(f)).unwrap();
    }
    let text = std::fs::read_to_string(copy.join("expected_instructions.jsonl")).unwrap();
    std::fs::write(copy.join("expected_instructions.jsonl"), text.replacen("\"seq\":1", "\"seq\":7", 1)).unwrap();
    let run = ghost(&["verify", "--golden", s(&copy)]);
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8(run.stdout).unwrap().contains("FAIL"));

    let run = ghost(&["verify", "--golden", s(dir.path().join("missing").as_path())]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn execute_reproduces_golden_statuses_and_final_scene() {
    let dir = tempfile::tempdir().unwrap();
    let g = golden("tidy_fig3");
    let (status_out, scene_out) = (dir.path().join("status.jsonl"), dir.path().join("scene.json"));
    let run = ghost(&[
        "execute",
        "--scene",
        s(&g.join("scene.json")),
        "--instructions",
        s(&g.join("expected_instructions.jsonl")),
        "--status-out",
        s(&status_out),
        "--scene-out",
        s(&scene_out),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(std::fs::read(&status_out).unwrap(), std::fs::read(g.join("expected_status.jsonl")).unwrap());
    let scene = ghost_core::Scene::from_json(&std::fs::read_to_string(&scene_out).unwrap()).unwrap();
    for o in scene.objects.iter().filter(|o| o.id.starts_with("block_")) {
        assert!(o.pose.bit_eq(&o.default_pose), "{} at its default", o.id);
    }
}

#[test]
fn execute_rejects_malformed_input() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"v\":1,\"type\":\"instruction\"}\n").unwrap();
    let run = ghost(&[
        "execute",
        "--scene",
        s(&golden("empty").join("scene.json")),
        "--instructions",
        s(&bad),
        "--status-out",
        s(&dir.path().join("status.jsonl")),
    ]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8(run.stderr).unwrap().contains("line 1"));
}

struct Server {
    child: Child,
    addr: String,
}

impl Server {
    fn start() -> Self {
        let scene = golden("tidy_fig3").join("scene.json");
        let mut child = Command::new(env!("CARGO_BIN_EXE_ghost"))
            .args(["serve", "--scene", s(&scene), "--port", "0"])
            .stdout(Stdio::piped())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let addr = line.trim().strip_prefix("listening on ").expect("listening banner").to_string();
        Self { child, addr }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Click `block_5`, drag it 0.5 m along x, release and commit.
fn session_events() -> Vec<String> {
    let center = Vec3::new(0.0, 0.05, -0.52);
    let above: Pose = aim(center + Vec3::new(0.0, 1.0, 0.0), center);
    let moved = Pose::new(above.position + Vec3::new(0.5, 0.0, 0.0), above.orientation);
    let kinds = [
        EventKind::PoseUpdate(above),
        EventKind::TriggerDown,
        EventKind::TriggerUp,
        EventKind::TriggerDown,
        EventKind::PoseUpdate(moved),
        EventKind::TriggerUp,
        EventKind::Menu(MenuAction::Commit),
    ];
    kinds.into_iter().enumerate().map(|(i, k)| ControllerEvent::new(i as f64 * 0.1, k).to_line()).collect()
}

fn parse(line: &str) -> Value {
    serde_json::from_str(line).unwrap_or_else(|e| panic!("{e}: {line}"))
}

#[test]
fn serve_speaks_newline_json_over_raw_tcp() {
    let server = Server::start();
    let stream = TcpStream::connect(&server.addr).unwrap();
    stream.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
    let mut writer = stream.try_clone().unwrap();
    let mut reader = BufReader::new(stream);
    let mut next = || {
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        parse(&line)
    };
    let snapshot = next();
    assert_eq!(snapshot["type"], "snapshot");
    assert_eq!(snapshot["rev"], 0);

    writeln!(writer, "{{nope").unwrap();
    assert_eq!(next()["type"], "error");

    for line in session_events() {
        writeln!(writer, "{line}").unwrap();
    }
    let deadline = Instant::now() + Duration::from_secs(10);
    let mut seen = Vec::new();
    let mut last_rev = 0;
    let mut moved = false;
    while Instant::now() < deadline {
        let msg = next();
        let rev = msg["rev"].as_u64().unwrap();
        assert_eq!(rev, last_rev + 1, "revs are contiguous");
        last_rev = rev;
        let ty = msg["type"].as_str().unwrap().to_string();
        if ty == "diff" && msg["objects"].as_array().is_some_and(|o| !o.is_empty()) {
            moved = true;
        }
        let done = ty == "status" && msg["status"]["state"] == "done";
        seen.push(ty);
        if done && moved {
            break;
        }
    }
    for ty in ["diff", "selection", "arc", "instructions", "status"] {
        assert!(seen.iter().any(|s| s == ty), "missing {ty} in {seen:?}");
    }
    assert!(moved, "the executed move reached the client as an object diff");

    writeln!(writer, "{{\"type\":\"resync\"}}").unwrap();
    let again = next();
    assert_eq!(again["type"], "snapshot");
    assert_eq!(again["rev"].as_u64().unwrap(), last_rev);
}

#[test]
fn serve_speaks_websocket_on_the_same_port() {
    let server = Server::start();
    let (mut ws, _) = tungstenite::connect(format!("ws://{}/", server.addr)).unwrap();
    let next = |ws: &mut tungstenite::WebSocket<_>| match ws.read().unwrap() {
        tungstenite::Message::Text(t) => parse(t.as_str()),
        other => panic!("unexpected frame {other:?}"),
    };
    assert_eq!(next(&mut ws)["type"], "snapshot");

    let events = session_events();
    ws.send(tungstenite::Message::text(events[0].clone())).unwrap();
    ws.send(tungstenite::Message::text(events[1].clone())).unwrap();
    let msg = next(&mut ws);
    assert_eq!(msg["type"], "diff", "trigger_down starts selecting");
    assert_eq!(msg["mode"], "selecting");
    ws.send(tungstenite::Message::text("{\"type\":\"resync\"}")).unwrap();
    loop {
        let tungstenite::Message::Text(t) = ws.read().unwrap() else { continue };
        let v = parse(t.as_str());
        if v["type"] == "snapshot" {
            assert_eq!(v["mode"], "selecting");
            break;
        }
    }
    ws.close(None).unwrap();
}
