//! Starts the service on a free port, drives it from a TCP client and
//! prints the NDJSON stream.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::PathBuf;

use rtbdi::harness::serve::spawn;
use rtbdi::harness::{Scenario, Simulation};

fn main() -> std::io::Result<()> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/execution1.json");
    let sim = Simulation::new(Scenario::load(&path).unwrap()).unwrap();
    let service = spawn(sim, 0, None)?;
    println!("listening on 127.0.0.1:{} (raw TCP, /ws, /ui)", service.port);

    let stream = TcpStream::connect(("127.0.0.1", service.port))?;
    let mut out = stream.try_clone()?;
    writeln!(out, r#"{{"cmd":"set_speed","ticks_per_sec":0}}"#)?;
    writeln!(out, r#"{{"cmd":"step","n":11}}"#)?;
    for line in BufReader::new(stream).lines() {
        let line = line?;
        let msg: serde_json::Value = serde_json::from_str(&line).unwrap();
        match msg["type"].as_str() {
            Some("log") => println!("{}", msg["line"].as_str().unwrap()),
            Some("snapshot") if msg["tick"] == 11 => {
                println!("paused at tick {}", msg["tick"]);
                break;
            }
            _ => {}
        }
    }
    service.stop();
    Ok(())
}
