//! Artifact writing. Every file starts with a header naming the code
//! version, the hash of the resolved configuration and the seed.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// SHA-256 of the canonical JSON form of the resolved configuration. The
/// output directory is left out so that relocated reruns hash identically.
pub fn config_hash(cfg: &RunConfig) -> String {
    let mut v = serde_json::to_value(cfg).expect("config serialises");
    if let Some(o) = v.as_object_mut() {
        o.remove("out_dir");
    }
    let canonical = v.to_string();
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

pub struct Writer {
    dir: PathBuf,
    hash: String,
    seed: u64,
    csv: bool,
    json: bool,
    written: Vec<PathBuf>,
}

impl Writer {
    pub fn new(cfg: &RunConfig) -> io::Result<Self> {
        fs::create_dir_all(&cfg.out_dir)?;
        Ok(Self {
            dir: cfg.out_dir.clone(),
            hash: config_hash(cfg),
            seed: cfg.seed,
            csv: cfg.writes_csv(),
            json: cfg.writes_json(),
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn header(&self) -> String {
        format!("# nutslab {VERSION} config_hash={} seed={}\n", self.hash, self.seed)
    }

    fn create(&mut self, name: &str) -> io::Result<fs::File> {
        let path = self.dir.join(name);
        let mut f = fs::File::create(&path)?;
        f.write_all(self.header().as_bytes())?;
        self.written.push(path);
        Ok(f)
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
        if !self.csv {
            return Ok(());
        }
        let f = self.create(&format!("{name}.csv"))?;
        let mut w = csv::Writer::from_writer(f);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()
    }

    pub fn json(&mut self, name: &str, body: &impl Serialize) -> io::Result<()> {
        if !self.json {
            return Ok(());
        }
        let path = self.dir.join(format!("{name}.json"));
        let doc = json!({
            "header": { "program": "nutslab", "version": VERSION, "config_hash": self.hash, "seed": self.seed },
            "body": serde_json::to_value(body)?,
        });
        fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")?;
        self.written.push(path);
        Ok(())
    }

    /// Whitespace-separated columns for external plotting.
    pub fn plot(&mut self, name: &str, columns: &[&str], rows: &[Vec<f64>]) -> io::Result<()> {
        let mut f = self.create(&format!("{name}.plot.txt"))?;
        writeln!(f, "# {}", columns.join(" "))?;
        for r in rows {
            let line: Vec<String> = r.iter().map(|x| format!("{x:.10e}")).collect();
            writeln!(f, "{}", line.join(" "))?;
        }
        Ok(())
    }

    /// Machine-readable record of failed assertions, written whatever the formats.
    pub fn failures(&mut self, command: &str, failed: &[Assertion]) -> io::Result<PathBuf> {
        let path = self.dir.join("failures.json");
        let doc = json!({
            "header": { "program": "nutslab", "version": VERSION, "config_hash": self.hash, "seed": self.seed },
            "command": command,
            "failed": failed,
        });
        fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// A checkpoint written earlier under the same configuration hash.
    pub fn load_checkpoint(&self, name: &str) -> Option<Value> {
        let text = fs::read_to_string(self.dir.join(format!("{name}.checkpoint.json"))).ok()?;
        let doc: Value = serde_json::from_str(&text).ok()?;
        (doc.get("config_hash")?.as_str()? == self.hash).then(|| doc.get("body").cloned()).flatten()
    }

    pub fn save_checkpoint(&self, name: &str, body: &impl Serialize) -> io::Result<()> {
        let doc = json!({ "config_hash": self.hash, "body": serde_json::to_value(body)? });
        fs::write(self.dir.join(format!("{name}.checkpoint.json")), serde_json::to_string(&doc)?)
    }
}

/// Short decimal form of a step size for file names.
pub fn tag(x: f64) -> String {
    let s = format!("{x:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}
