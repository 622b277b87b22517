mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::time::Duration;

use serde_json::{json, Value};

use common::load;
use rtbdi::harness::serve::{spawn, ServiceHandle};
use rtbdi::harness::Simulation;

struct Client {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl Client {
    fn connect(h: &ServiceHandle) -> Client {
        let s = TcpStream::connect(("127.0.0.1", h.port)).unwrap();
        s.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
        Client { writer: s.try_clone().unwrap(), reader: BufReader::new(s) }
    }

    fn send(&mut self, v: Value) {
        writeln!(self.writer, "{v}").unwrap();
    }

    fn recv(&mut self) -> Value {
        let mut line = String::new();
        self.reader.read_line(&mut line).unwrap();
        serde_json::from_str(&line).unwrap_or_else(|e| panic!("{e}: {line:?}"))
    }

    /// Reads until `stop` matches, returning every message seen.
    fn until(&mut self, stop: impl Fn(&Value) -> bool) -> Vec<Value> {
        let mut seen = Vec::new();
        loop {
            let v = self.recv();
            let done = stop(&v);
            seen.push(v);
            if done {
                return seen;
            }
        }
    }
}

fn snapshot_at(tick: u64) -> impl Fn(&Value) -> bool {
    move |v| v["type"] == "snapshot" && v["tick"] == tick
}

fn finished(v: &Value) -> bool {
    v["type"] == "snapshot" && v["finished"] == true
}

fn log_lines(msgs: &[Value]) -> Vec<String> {
    msgs.iter().filter(|v| v["type"] == "log").map(|v| v["line"].as_str().unwrap().to_string()).collect()
}

#[test]
fn snapshot_of_a_paused_service() {
    let h = spawn(Simulation::new(load("execution1")).unwrap(), 0, None).unwrap();
    let mut c = Client::connect(&h);
    c.send(json!({"cmd": "snapshot"}));
    assert_eq!(c.recv()["type"], "ack");
    let snap = c.recv();
    assert_eq!(snap["type"], "snapshot");
    assert_eq!(snap["tick"], 0);
    assert_eq!(snap["paused"], true);
    assert_eq!(snap["capacity"], "1");
    assert!(snap["world"]["robots"]["C1"].is_object(), "{snap}");

    c.send(json!({"cmd": "fly"}));
    let err = c.recv();
    assert_eq!(err["type"], "error");
    assert!(err["message"].as_str().unwrap().contains("malformed"));
}

#[test]
fn injected_spawn_reproduces_the_scripted_run() {
    let scripted = {
        let mut sim = Simulation::new(load("execution1")).unwrap();
        sim.run_to_end();
        sim.log_text()
    };

    let mut sc = load("execution1");
    let spawn_event = sc.events.remove(0);
    assert_eq!(spawn_event.at, 15);
    let h = spawn(Simulation::new(sc).unwrap(), 0, None).unwrap();
    let mut c = Client::connect(&h);
    c.send(json!({"cmd": "set_speed", "ticks_per_sec": 0.0}));
    c.send(json!({"cmd": "step", "n": 15}));
    let mut msgs = c.until(snapshot_at(15));
    c.send(json!({"cmd": "inject", "event": spawn_event.kind}));
    c.send(json!({"cmd": "resume"}));
    msgs.extend(c.until(finished));

    let queued: Vec<&Value> = msgs.iter().filter(|v| v["type"] == "queued").collect();
    assert_eq!(queued.len(), 1);
    assert_eq!(queued[0]["tick"], 15);
    let mut served = log_lines(&msgs).join("\n");
    served.push('\n');
    assert_eq!(served, scripted);
}

#[test]
fn clients_receive_the_same_stream() {
    let h = spawn(Simulation::new(load("coordinator")).unwrap(), 0, None).unwrap();
    let mut a = Client::connect(&h);
    let mut b = Client::connect(&h);
    // both registered once their acks come back
    a.send(json!({"cmd": "pause"}));
    b.send(json!({"cmd": "pause"}));
    assert_eq!(a.recv()["type"], "ack");
    assert_eq!(b.recv()["type"], "ack");
    a.send(json!({"cmd": "set_speed", "ticks_per_sec": 0.0}));
    assert_eq!(a.recv()["type"], "ack");
    a.send(json!({"cmd": "resume"}));
    let from_a: Vec<Value> = a.until(finished).into_iter().filter(|v| v["type"] != "ack").collect();
    let from_b = b.until(finished);
    assert_eq!(from_a, from_b);
    assert!(log_lines(&from_a).len() > 10);
}

#[test]
fn websocket_clients_speak_the_same_protocol() {
    let h = spawn(Simulation::new(load("execution1")).unwrap(), 0, None).unwrap();
    let (mut ws, resp) = tungstenite::connect(format!("ws://127.0.0.1:{}/ws", h.port)).unwrap();
    assert_eq!(resp.status().as_u16(), 101);
    ws.send(tungstenite::Message::text(json!({"cmd": "step", "n": 1}).to_string())).unwrap();
    let mut got = Vec::new();
    while !got.iter().any(|v: &Value| v["type"] == "snapshot") {
        if let tungstenite::Message::Text(t) = ws.read().unwrap() {
            got.push(serde_json::from_str(t.as_str()).unwrap());
        }
    }
    assert_eq!(got[0]["type"], "ack");
    assert_eq!(got[0]["command"]["cmd"], "step");
    assert!(got.iter().any(|v| v["type"] == "log" && v["tick"] == 0));
}

fn http_get(h: &ServiceHandle, path: &str) -> String {
    let mut s = TcpStream::connect(("127.0.0.1", h.port)).unwrap();
    write!(s, "GET {path} HTTP/1.1\r\nHost: localhost\r\n\r\n").unwrap();
    let mut body = String::new();
    s.read_to_string(&mut body).unwrap();
    body
}

#[test]
fn ui_route_serves_files_or_a_placeholder() {
    let h = spawn(Simulation::new(load("execution1")).unwrap(), 0, None).unwrap();
    let page = http_get(&h, "/ui");
    assert!(page.starts_with("HTTP/1.1 200"));
    assert!(page.contains("/ws"));
    assert!(http_get(&h, "/elsewhere").starts_with("HTTP/1.1 404"));

    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("app.js"), "console.log(1)").unwrap();
    let h = spawn(Simulation::new(load("execution1")).unwrap(), 0, Some(dir.path().to_path_buf())).unwrap();
    let js = http_get(&h, "/ui/app.js");
    assert!(js.contains("application/javascript") && js.ends_with("console.log(1)"));
    assert!(http_get(&h, "/ui/../Cargo.toml").starts_with("HTTP/1.1 400"));
}
