//! CSV, JSON and binary artifacts, plus the failure type shared by all commands.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DVector;
use nlho_core::evolution::{BackwardRun, PerturbationState};
use nlho_core::linearized::FlowState;
use nlho_core::Error;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub enum Failure {
    Core(Error),
    /// A prior command's artifact is missing or unreadable.
    Dependency {
        artifact: String,
        command: &'static str,
    },
    /// Named invariants that did not hold.
    Invariant(Vec<String>),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Invariant(_) => 1,
            Failure::Dependency { .. } => 2,
            Failure::Core(e) => match e {
                Error::Config(_)
                | Error::NoSoliton { .. }
                | Error::Domain(_)
                | Error::Range { .. }
                | Error::Shape { .. }
                | Error::Io(_) => 2,
                _ => 3,
            },
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Dependency { artifact, command } => {
                write!(f, "dependency error: missing {artifact}; run `nlho {command}` first")
            }
            Failure::Invariant(names) => write!(f, "invariant failure: {}", names.join(", ")),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(Error::Io(e.to_string()))
    }
}

pub type CmdResult<T = ()> = std::result::Result<T, Failure>;

/// Shortest round-trip formatting.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CmdResult {
    let io = |e: csv::Error| Failure::Core(Error::Io(format!("{}: {e}", path.display())));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CmdResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path, command: &'static str) -> CmdResult<T> {
    let missing = || Failure::Dependency { artifact: path.display().to_string(), command };
    let text = std::fs::read_to_string(path).map_err(|_| missing())?;
    serde_json::from_str(&text).map_err(|_| missing())
}

/// Header of the raw perturbation file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WLimitHeader {
    #[serde(rename = "M")]
    pub m: f64,
    pub s0: f64,
    pub ds: f64,
    pub n_steps: usize,
    pub n_modes: usize,
    pub n_samples: usize,
    pub epsilon: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub bound_stat: f64,
    pub error_bound: f64,
    pub layout: String,
}

pub const W_LIMIT_LAYOUT: &str = "little-endian f64; per sample in decreasing s: s, w1[0..n_modes], w2[0..n_modes]";

pub fn write_w_limit(path: &Path, run: &BackwardRun) -> CmdResult {
    let mut out = BufWriter::new(File::create(path)?);
    for p in &run.samples {
        out.write_all(&p.s.to_le_bytes())?;
        for x in p.w.w1.iter().chain(p.w.w2.iter()) {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Rebuild the finest run from its artifacts.
pub fn read_w_limit(path: &Path, h: &WLimitHeader) -> CmdResult<BackwardRun> {
    let missing = || Failure::Dependency { artifact: path.display().to_string(), command: "evolve" };
    let mut bytes = Vec::new();
    BufReader::new(File::open(path).map_err(|_| missing())?).read_to_end(&mut bytes)?;
    let n = h.n_modes;
    let stride = 8 * (1 + 2 * n);
    if bytes.len() != stride * h.n_samples {
        return Err(Error::Shape { expected: stride * h.n_samples, got: bytes.len() }.into());
    }
    let f = |i: usize| f64::from_le_bytes(bytes[8 * i..8 * i + 8].try_into().expect("8-byte chunk"));
    let samples = (0..h.n_samples)
        .map(|k| {
            let base = k * (1 + 2 * n);
            let w1 = DVector::from_fn(n, |i, _| f(base + 1 + i));
            let w2 = DVector::from_fn(n, |i, _| f(base + 1 + n + i));
            PerturbationState { s: f(base), w: FlowState::new(w1, w2) }
        })
        .collect();
    Ok(BackwardRun {
        m: h.m,
        s0: h.s0,
        ds: h.ds,
        n_steps: h.n_steps,
        samples,
        bound_stat: h.bound_stat,
        l2_drift: f64::NAN,
        l2_drift_per_100: f64::NAN,
        quad_identity_max: f64::NAN,
        richardson_max: f64::NAN,
        bootstrap: Some(h.b),
    })
}

/// Outcome of one named invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Checks {
    pub items: Vec<Check>,
}

impl Checks {
    pub fn at_most(&mut self, name: &str, value: f64, limit: f64) {
        self.items.push(Check { name: name.into(), pass: value <= limit, value, limit });
    }

    pub fn at_least(&mut self, name: &str, value: f64, limit: f64) {
        self.items.push(Check { name: name.into(), pass: value >= limit, value, limit });
    }

    pub fn holds(&mut self, name: &str, pass: bool) {
        self.items.push(Check { name: name.into(), pass, value: f64::from(u8::from(pass)), limit: 1.0 });
    }

    /// Relative agreement with a locked value, if one exists.
    pub fn locked(&mut self, name: &str, value: f64, locked: Option<f64>, rel: f64) {
        if let Some(l) = locked {
            let dev = (value - l).abs() / l.abs().max(f64::MIN_POSITIVE);
            self.items.push(Check { name: format!("{name}_regression"), pass: dev <= rel, value: dev, limit: rel });
        }
    }

    pub fn finish(&self) -> CmdResult {
        let failed: Vec<String> = self.items.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(Failure::Invariant(failed))
        }
    }
}
