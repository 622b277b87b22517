//! Network service. One simulation thread owns all state; clients talk
//! to it through a command queue and receive a broadcast stream of
//! newline-delimited JSON messages. The same port accepts raw TCP
//! clients, WebSocket clients on `/ws` and serves static files on `/ui`.

use std::io::{BufRead, BufReader, ErrorKind, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

use super::Simulation;
use crate::grid::EventKind;

/// Client-to-server commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum Command {
    Pause,
    Resume,
    Step {
        #[serde(default = "one")]
        n: u64,
    },
    Inject {
        event: EventKind,
    },
    SetSpeed {
        ticks_per_sec: f64,
    },
    Snapshot,
}

fn one() -> u64 {
    1
}

type ClientId = u64;

enum Input {
    Connect(ClientId, Sender<String>),
    Disconnect(ClientId),
    Line(ClientId, String),
}

/// Current state as a JSON message.
pub fn snapshot(sim: &Simulation, paused: bool) -> Json {
    let intentions: Vec<Json> = sim
        .agent
        .intentions
        .iter()
        .map(|i| {
            json!({
                "id": i.id,
                "plan": i.plan.id,
                "goal": i.goal,
                "status": i.status,
                "running": i.running.values().map(|r| format!("{} {}", r.actor, r.action)).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({
        "type": "snapshot",
        "tick": sim.tick,
        "paused": paused,
        "finished": sim.is_finished(),
        "world": sim.world,
        "goals": sim.agent.goals,
        "intentions": intentions,
        "schedule": sim.trace().records.last().map(trace_row),
        "capacity": crate::rational::format_rational(&sim.agent.config.capacity),
    })
}

fn trace_row(rec: &crate::rt::TickRecord) -> Json {
    use crate::rational::format_rational;
    json!({
        "tick": rec.tick,
        "shares": rec.shares.iter().map(|(j, s)| json!([j, format_rational(s)])).collect::<Vec<_>>(),
        "load": format_rational(&rec.load()),
        "misses": rec.misses,
    })
}

/// Runs the service on `listener` until `stop` is set. The simulation
/// starts paused.
pub fn serve(
    sim: Simulation,
    listener: TcpListener,
    ui_dir: Option<PathBuf>,
    stop: Arc<AtomicBool>,
) -> std::io::Result<()> {
    let (tx, rx) = channel::<Input>();
    listener.set_nonblocking(true)?;
    let stop_accept = stop.clone();
    let ui = Arc::new(ui_dir);
    let acceptor = thread::spawn(move || {
        let mut next: ClientId = 1;
        while !stop_accept.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((stream, _)) => {
                    let _ = stream.set_nonblocking(false);
                    let id = next;
                    next += 1;
                    let tx = tx.clone();
                    let ui = ui.clone();
                    thread::spawn(move || handle_connection(stream, id, tx, &ui));
                }
                Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(10)),
                Err(e) => log::warn!("accept failed: {e}"),
            }
        }
    });
    simulation_loop(sim, rx, &stop);
    let _ = acceptor.join();
    Ok(())
}

fn simulation_loop(mut sim: Simulation, rx: Receiver<Input>, stop: &AtomicBool) {
    let mut clients: Vec<(ClientId, Sender<String>)> = Vec::new();
    let mut paused = true;
    let mut budget: u64 = 0;
    let mut speed = 10.0f64;
    let mut last = Instant::now();
    let broadcast = |clients: &mut Vec<(ClientId, Sender<String>)>, msg: &Json| {
        let line = msg.to_string();
        clients.retain(|(_, c)| c.send(line.clone()).is_ok());
    };
    while !stop.load(Ordering::SeqCst) {
        let running = (!paused || budget > 0) && !sim.is_finished();
        let wait = if running && speed > 0.0 {
            Duration::from_secs_f64(1.0 / speed).saturating_sub(last.elapsed())
        } else if running {
            Duration::ZERO
        } else {
            Duration::from_millis(50)
        };
        match rx.recv_timeout(wait) {
            Ok(Input::Connect(id, out)) => clients.push((id, out)),
            Ok(Input::Disconnect(id)) => clients.retain(|(c, _)| *c != id),
            Ok(Input::Line(id, line)) => {
                let replies = match serde_json::from_str::<Command>(&line) {
                    Err(e) => vec![json!({"type": "error", "message": format!("malformed command: {e}")})],
                    Ok(cmd) => {
                        let mut out = vec![json!({"type": "ack", "command": cmd})];
                        match cmd {
                            Command::Pause => paused = true,
                            Command::Resume => paused = false,
                            Command::Step { n } => budget += n,
                            Command::Inject { event } => {
                                let at = sim.inject(event);
                                broadcast(&mut clients, &json!({"type": "queued", "tick": at}));
                            }
                            Command::SetSpeed { ticks_per_sec } => speed = ticks_per_sec.max(0.0),
                            Command::Snapshot => out.push(snapshot(&sim, paused)),
                        }
                        out
                    }
                };
                if let Some((_, c)) = clients.iter().find(|(c, _)| *c == id) {
                    for r in replies {
                        let _ = c.send(r.to_string());
                    }
                }
            }
            Err(RecvTimeoutError::Timeout) => {
                if running {
                    budget = budget.saturating_sub(1);
                    let lines: Vec<Json> = sim
                        .step()
                        .iter()
                        .map(|e| json!({"type": "log", "tick": e.tick, "name": e.name, "detail": e.detail, "line": e.to_string()}))
                        .collect();
                    for l in &lines {
                        broadcast(&mut clients, l);
                    }
                    let snap = snapshot(&sim, paused && budget == 0);
                    broadcast(&mut clients, &snap);
                    last = Instant::now();
                }
            }
            Err(RecvTimeoutError::Disconnected) => break,
        }
    }
}

fn handle_connection(stream: TcpStream, id: ClientId, tx: Sender<Input>, ui: &Option<PathBuf>) {
    let mut head = [0u8; 4];
    let n = stream.peek(&mut head).unwrap_or(0);
    if n == 4 && &head == b"GET " {
        let mut line = [0u8; 512];
        let got = stream.peek(&mut line).unwrap_or(0);
        let text = String::from_utf8_lossy(&line[..got]);
        let path = text.split_whitespace().nth(1).unwrap_or("/").to_string();
        if path == "/ws" || path.starts_with("/ws?") {
            websocket_client(stream, id, tx);
        } else {
            http_static(stream, &path, ui.as_deref());
        }
        return;
    }
    tcp_client(stream, id, tx);
}

fn tcp_client(stream: TcpStream, id: ClientId, tx: Sender<Input>) {
    let (out_tx, out_rx) = channel::<String>();
    if tx.send(Input::Connect(id, out_tx)).is_err() {
        return;
    }
    let Ok(mut writer) = stream.try_clone() else { return };
    let writer_thread = thread::spawn(move || {
        for line in out_rx {
            if writer.write_all(line.as_bytes()).and_then(|_| writer.write_all(b"\n")).is_err() {
                break;
            }
        }
    });
    let reader = BufReader::new(stream);
    for line in reader.lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        if tx.send(Input::Line(id, line)).is_err() {
            break;
        }
    }
    let _ = tx.send(Input::Disconnect(id));
    let _ = writer_thread.join();
}

fn websocket_client(stream: TcpStream, id: ClientId, tx: Sender<Input>) {
    let Ok(mut ws) = tungstenite::accept(stream) else { return };
    let _ = ws.get_ref().set_read_timeout(Some(Duration::from_millis(20)));
    let (out_tx, out_rx) = channel::<String>();
    if tx.send(Input::Connect(id, out_tx)).is_err() {
        return;
    }
    'outer: loop {
        loop {
            match out_rx.try_recv() {
                Ok(line) => {
                    if ws.send(tungstenite::Message::text(line)).is_err() {
                        break 'outer;
                    }
                }
                Err(std::sync::mpsc::TryRecvError::Empty) => break,
                Err(_) => break 'outer,
            }
        }
        match ws.read() {
            Ok(tungstenite::Message::Text(t)) => {
                for line in t.as_str().lines().filter(|l| !l.trim().is_empty()) {
                    if tx.send(Input::Line(id, line.to_string())).is_err() {
                        break 'outer;
                    }
                }
            }
            Ok(tungstenite::Message::Close(_)) => break,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(_) => break,
        }
    }
    let _ = tx.send(Input::Disconnect(id));
}

const PLACEHOLDER: &str =
    "<!doctype html><title>rtbdi</title><p>No UI bundle installed. Connect to <code>/ws</code>.</p>";

fn http_static(mut stream: TcpStream, path: &str, ui: Option<&Path>) {
    let mut buf = [0u8; 4096];
    let _ = stream.read(&mut buf);
    let rel = path.split('?').next().unwrap_or("").trim_start_matches("/ui").trim_start_matches('/');
    let (status, body, mime) = if !path.starts_with("/ui") {
        ("404 Not Found", b"not found".to_vec(), "text/plain")
    } else if rel.split('/').any(|c| c == "..") {
        ("400 Bad Request", b"bad path".to_vec(), "text/plain")
    } else {
        let rel = if rel.is_empty() { "index.html" } else { rel };
        match ui.map(|d| d.join(rel)).and_then(|p| std::fs::read(p).ok()) {
            Some(b) => ("200 OK", b, mime_of(rel)),
            None if rel == "index.html" => ("200 OK", PLACEHOLDER.as_bytes().to_vec(), "text/html"),
            None => ("404 Not Found", b"not found".to_vec(), "text/plain"),
        }
    };
    let header = format!(
        "HTTP/1.1 {status}\r\nContent-Type: {mime}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    );
    let _ = stream.write_all(header.as_bytes()).and_then(|_| stream.write_all(&body));
}

fn mime_of(p: &str) -> &'static str {
    match p.rsplit('.').next() {
        Some("html") => "text/html",
        Some("js") => "application/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        _ => "application/octet-stream",
    }
}

/// Handle on a service running in a background thread.
pub struct ServiceHandle {
    pub port: u16,
    stop: Arc<AtomicBool>,
    thread: Mutex<Option<thread::JoinHandle<()>>>,
}

impl ServiceHandle {
    pub fn stop(&self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(t) = self.thread.lock().unwrap().take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServiceHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Starts the service on `127.0.0.1:port` (0 picks a free port).
pub fn spawn(sim: Simulation, port: u16, ui_dir: Option<PathBuf>) -> std::io::Result<ServiceHandle> {
    let listener = TcpListener::bind(("127.0.0.1", port))?;
    let port = listener.local_addr()?.port();
    let stop = Arc::new(AtomicBool::new(false));
    let s = stop.clone();
    let thread = thread::spawn(move || {
        if let Err(e) = serve(sim, listener, ui_dir, s) {
            log::error!("service stopped: {e}");
        }
    });
    Ok(ServiceHandle { port, stop, thread: Mutex::new(Some(thread)) })
}
