//! Data directories, manifests and file helpers.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};
use uot_align::synth::{Benchmark, Emitters, Probe, Trajectory};

use crate::config::{hex, RunConfig};
use crate::failure::Failure;

pub const D_SRC: &str = "d_src.jsonl";
pub const D_TGT: &str = "d_tgt.jsonl";
pub const PROBES: &str = "probes.jsonl";
pub const EMITTERS: &str = "emitters.json";
pub const CONFIG: &str = "config.txt";
pub const MANIFEST: &str = "manifest.json";

/// Files a data directory holds besides its manifest.
pub const DATA_FILES: [&str; 5] = [D_SRC, D_TGT, PROBES, EMITTERS, CONFIG];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    /// Input name to hex SHA-256 of its bytes.
    pub input_hashes: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(cfg: &RunConfig, input_hashes: BTreeMap<String, String>) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            input_hashes,
        }
    }
}

pub fn sha256(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub fn read_input(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))
}

pub fn read_text(path: &Path) -> Result<String, Failure> {
    String::from_utf8(read_input(path)?)
        .map_err(|_| Failure::Input(format!("{} is not utf-8", path.display())))
}

pub fn load_config(path: &Path) -> Result<(RunConfig, Vec<u8>), Failure> {
    let bytes = read_input(path)?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| Failure::Input(format!("{} is not utf-8", path.display())))?;
    let cfg = RunConfig::parse(text)?;
    cfg.validate()?;
    Ok((cfg, bytes))
}

/// Writes `files` into `dir` only after every payload is ready; each file
/// goes through a temporary name so a crash never leaves a truncated one.
pub fn write_files(dir: &Path, files: &[(&str, Vec<u8>)]) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Other(format!("cannot create {}: {e}", dir.display())))?;
    for (name, bytes) in files {
        let path = dir.join(name);
        let tmp = dir.join(format!(".{name}.tmp"));
        fs::write(&tmp, bytes)
            .and_then(|_| fs::rename(&tmp, &path))
            .map_err(|e| Failure::Other(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Failure::Input(format!("bad output path {}", path.display())))?;
    write_files(&dir, &[(name, bytes.to_vec())])
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> Result<Vec<u8>, Failure> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).map_err(|e| Failure::Other(e.to_string()))?;
        out.push(b'\n');
    }
    Ok(out)
}

fn from_jsonl<T: DeserializeOwned>(name: &str, bytes: &[u8]) -> Result<Vec<T>, Failure> {
    let text = std::str::from_utf8(bytes).map_err(|_| Failure::Input(format!("{name} is not utf-8")))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            serde_json::from_str(l).map_err(|e| Failure::Input(format!("{name} line {}: {e}", k + 1)))
        })
        .collect()
}

/// Serialized contents of a data directory, in [`DATA_FILES`] order.
pub fn benchmark_files(bench: &Benchmark, cfg: &RunConfig) -> Result<Vec<(&'static str, Vec<u8>)>, Failure> {
    let emitters = serde_json::to_vec_pretty(&bench.emitters).map_err(|e| Failure::Other(e.to_string()))?;
    Ok(vec![
        (D_SRC, to_jsonl(&bench.src)?),
        (D_TGT, to_jsonl(&bench.tgt)?),
        (PROBES, to_jsonl(&bench.probes)?),
        (EMITTERS, emitters),
        (CONFIG, cfg.emit().into_bytes()),
    ])
}

/// A benchmark read back from a data directory, with the hash of every file.
pub struct LoadedData {
    pub bench: Benchmark,
    pub hashes: BTreeMap<String, String>,
}

pub fn load_data(dir: &Path) -> Result<LoadedData, Failure> {
    let mut hashes = BTreeMap::new();
    let mut raw = BTreeMap::new();
    for name in DATA_FILES {
        let bytes = read_input(&dir.join(name))?;
        hashes.insert(name.to_string(), sha256(&bytes));
        raw.insert(name, bytes);
    }
    let text = std::str::from_utf8(&raw[CONFIG]).map_err(|_| Failure::Input(format!("{CONFIG} is not utf-8")))?;
    let config = RunConfig::parse(text)?.bench;
    let src: Vec<Trajectory> = from_jsonl(D_SRC, &raw[D_SRC])?;
    let tgt: Vec<Trajectory> = from_jsonl(D_TGT, &raw[D_TGT])?;
    let probes: Vec<Probe> = from_jsonl(PROBES, &raw[PROBES])?;
    let emitters: Emitters = serde_json::from_slice(&raw[EMITTERS])
        .map_err(|e| Failure::Input(format!("{EMITTERS}: {e}")))?;
    for t in src.iter().chain(&tgt) {
        t.validate()?;
    }
    if src.is_empty() || tgt.is_empty() {
        return Err(Failure::Input(format!("{} holds an empty dataset", dir.display())));
    }
    Ok(LoadedData {
        bench: Benchmark { config, emitters, src, tgt, probes },
        hashes,
    })
}
