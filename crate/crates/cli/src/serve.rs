//! Live session server. Network threads only enqueue; one loop owns the
//! session and the executor link.
//!
//! A connection whose first bytes are `GET ` is upgraded to WebSocket (one
//! JSON message per text frame); anything else, including a client that
//! sends nothing at first, is treated as raw TCP with one JSON message per
//! line.

use std::collections::BTreeMap;
use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::mpsc::{self, Receiver, Sender};
use std::thread;
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use tungstenite::Message;

use ghost_core::executor;
use ghost_core::service::ServiceCore;
use ghost_core::{Config, Scene};

const WS_POLL: Duration = Duration::from_millis(10);
const SNIFF_TIMEOUT: Duration = Duration::from_millis(150);

enum Input {
    Connected(u64, Sender<String>),
    Line(u64, String),
    Gone(u64),
    Status(String),
}

pub fn run(scene: Scene, config: Config, host: &str, port: u16) -> Result<()> {
    let listener = TcpListener::bind((host, port)).with_context(|| format!("binding {host}:{port}"))?;
    let addr = listener.local_addr()?;
    println!("listening on {addr}");
    io::stdout().flush()?;

    let (input_tx, input_rx) = mpsc::channel::<Input>();
    let robot = executor::spawn(scene.clone(), config.step_count);
    let status_tx = input_tx.clone();
    thread::spawn(move || {
        for line in robot.statuses {
            if status_tx.send(Input::Status(line)).is_err() {
                break;
            }
        }
    });
    thread::spawn(move || accept_loop(listener, input_tx));

    let mut core = ServiceCore::new(scene, config);
    let mut clients: BTreeMap<u64, Sender<String>> = BTreeMap::new();
    for input in input_rx {
        let out = match input {
            Input::Connected(id, tx) => {
                log::info!("client {id} connected");
                let _ = tx.send(core.snapshot());
                clients.insert(id, tx);
                continue;
            }
            Input::Gone(id) => {
                log::info!("client {id} left");
                clients.remove(&id);
                continue;
            }
            Input::Line(id, line) => {
                let out = core.handle_client_line(&line);
                if let Some(tx) = clients.get(&id) {
                    for r in &out.reply {
                        let _ = tx.send(r.clone());
                    }
                }
                out
            }
            Input::Status(line) => core.handle_status_line(&line),
        };
        for line in out.to_executor {
            robot.instructions.send(line).context("executor thread stopped")?;
        }
        clients.retain(|_, tx| out.broadcast.iter().all(|b| tx.send(b.clone()).is_ok()));
    }
    Ok(())
}

fn accept_loop(listener: TcpListener, inputs: Sender<Input>) {
    for (id, stream) in (1u64..).zip(listener.incoming()) {
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                log::warn!("accept failed: {e}");
                continue;
            }
        };
        let inputs = inputs.clone();
        thread::spawn(move || {
            if let Err(e) = handle_connection(id, stream, &inputs) {
                log::info!("client {id}: {e}");
            }
            let _ = inputs.send(Input::Gone(id));
        });
    }
}

/// Sniffs for an HTTP upgrade. A client that stays silent for
/// [`SNIFF_TIMEOUT`] is a raw-line client waiting for its snapshot.
fn is_http(stream: &TcpStream) -> io::Result<bool> {
    let mut buf = [0u8; 4];
    let deadline = Instant::now() + SNIFF_TIMEOUT;
    stream.set_read_timeout(Some(SNIFF_TIMEOUT))?;
    let result = loop {
        let n = match stream.peek(&mut buf) {
            Ok(n) => n,
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => break Ok(false),
            Err(e) => break Err(e),
        };
        if n == 0 || n == buf.len() || buf[..n].contains(&b'\n') {
            break Ok(&buf[..n] == b"GET ");
        }
        if Instant::now() >= deadline {
            break Ok(false);
        }
        thread::sleep(Duration::from_millis(2));
    };
    stream.set_read_timeout(None)?;
    result
}

fn handle_connection(id: u64, stream: TcpStream, inputs: &Sender<Input>) -> Result<()> {
    let (tx, rx) = mpsc::channel::<String>();
    if is_http(&stream)? {
        let ws = tungstenite::accept(stream).map_err(|e| anyhow::anyhow!("websocket handshake: {e}"))?;
        let _ = inputs.send(Input::Connected(id, tx));
        websocket_loop(id, ws, rx, inputs)
    } else {
        let _ = inputs.send(Input::Connected(id, tx));
        raw_loop(id, stream, rx, inputs)
    }
}

fn raw_loop(id: u64, stream: TcpStream, outgoing: Receiver<String>, inputs: &Sender<Input>) -> Result<()> {
    let mut writer = stream.try_clone()?;
    thread::spawn(move || {
        for line in outgoing {
            if writer.write_all(line.as_bytes()).and_then(|_| writer.write_all(b"\n")).is_err() {
                break;
            }
        }
    });
    for line in BufReader::new(stream).lines() {
        let line = line?;
        if !line.trim().is_empty() && inputs.send(Input::Line(id, line)).is_err() {
            break;
        }
    }
    Ok(())
}

fn websocket_loop(
    id: u64,
    mut ws: tungstenite::WebSocket<TcpStream>,
    outgoing: Receiver<String>,
    inputs: &Sender<Input>,
) -> Result<()> {
    ws.get_ref().set_read_timeout(Some(WS_POLL))?;
    loop {
        match ws.read() {
            Ok(Message::Text(text)) => {
                if inputs.send(Input::Line(id, text.as_str().to_string())).is_err() {
                    return Ok(());
                }
            }
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(tungstenite::Error::ConnectionClosed) => return Ok(()),
            Err(e) => return Err(e.into()),
        }
        loop {
            match outgoing.try_recv() {
                Ok(line) => ws.send(Message::text(line))?,
                Err(mpsc::TryRecvError::Empty) => break,
                Err(mpsc::TryRecvError::Disconnected) => return Ok(()),
            }
        }
    }
}
