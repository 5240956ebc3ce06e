#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

pub const SMALL: [&str; 8] = [
    "--set",
    "standardize.width=32",
    "--set",
    "standardize.height=18",
    "--set",
    "standardize.frame_cap=21",
    "--set",
    "retry.backoff_base_ms=0",
];

pub fn ditto(home: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ditto"))
        .args(args)
        .env("DITTO_HOME", home)
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Value of a `key   value` summary line.
pub fn field(out: &str, key: &str) -> String {
    out.lines()
        .find_map(|l| l.strip_prefix(key).map(|v| v.trim().to_string()))
        .unwrap_or_else(|| panic!("no {key} in {out}"))
}

/// `ditto mock-serve` on an ephemeral port; killed on drop.
pub struct Server {
    child: Child,
    pub url: String,
}

impl Server {
    pub fn start(media: &Path) -> Self {
        let mut child = Command::new(env!("CARGO_BIN_EXE_ditto"))
            .args(["mock-serve", "--addr", "127.0.0.1:0", "--media"])
            .arg(media)
            .stdout(Stdio::piped())
            .spawn()
            .expect("mock-serve starts");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap())
            .read_line(&mut line)
            .unwrap();
        let url = line.trim().strip_prefix("listening on ").expect("banner").to_string();
        Self { child, url }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
