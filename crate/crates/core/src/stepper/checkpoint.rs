//! Single-file checkpoints: `#`-prefixed header lines (config echo, time,
//! counters) followed by one CSV block per species. Floats are written in
//! shortest round-trip form, so a restored state is bit-identical.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

use super::{Diagnostics, SimState};
use crate::field::SpeciesField;
use crate::grid::GridSpec;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint line {line}: {message}")]
    Format { line: usize, message: String },
}

/// Contents of a checkpoint file.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Config echo as a single-line JSON string.
    pub config: String,
    pub state: SimState,
}

pub fn write_checkpoint(path: &Path, config_json: &str, s: &SimState) -> Result<(), CheckpointError> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
        let compact = match serde_json::from_str::<serde_json::Value>(config_json) {
            Ok(v) => v.to_string(),
            Err(_) => config_json.lines().map(str::trim).collect(),
        };
        let g = s.f.grid();
        writeln!(w, "# fragdiff checkpoint")?;
        writeln!(w, "# config: {compact}")?;
        writeln!(w, "# grid: {}", serde_json::to_string(g).expect("grid serializes"))?;
        writeln!(w, "# t: {:?}", s.t)?;
        writeln!(w, "# step: {}", s.step)?;
        writeln!(w, "# last_dt: {:?}", s.diag.last_dt)?;
        writeln!(w, "# rejected_steps: {}", s.diag.rejected_steps)?;
        writeln!(w, "# clip_events: {}", s.diag.clip_events)?;
        writeln!(w, "# clipped_mass: {:?}", s.diag.clipped_mass)?;
        writeln!(w, "# species: {}", s.f.n())?;
        for i in 1..=s.f.n() {
            writeln!(w, "# block: {i}")?;
            writeln!(w, "cell,value")?;
            for (c, v) in s.f.species(i).iter().enumerate() {
                writeln!(w, "{c},{v:?}")?;
            }
        }
        w.flush()?;
    }
    std::fs::rename(tmp, path)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut header: std::collections::HashMap<String, String> = std::collections::HashMap::new();
    let mut field: Option<SpeciesField> = None;
    let mut species = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let err = |message: String| CheckpointError::Format { line: lineno, message };
        if let Some(rest) = line.strip_prefix("# ") {
            let Some((key, value)) = rest.split_once(": ") else { continue };
            if key == "block" {
                if field.is_none() {
                    let grid: GridSpec = serde_json::from_str(header.get("grid").map(String::as_str).ok_or_else(|| err("missing grid".into()))?)
                        .map_err(|e| err(e.to_string()))?;
                    let n: usize = parse(&header, "species", lineno)?;
                    field = Some(SpeciesField::zeros(grid, n));
                }
                species = value.parse().map_err(|_| err(format!("bad block index {value}")))?;
                if species == 0 || species > field.as_ref().map_or(0, |f| f.n()) {
                    return Err(err(format!("block index {species} out of range")));
                }
            } else {
                header.insert(key.to_string(), value.to_string());
            }
            continue;
        }
        if line == "cell,value" || line.is_empty() {
            continue;
        }
        let f = field.as_mut().ok_or_else(|| err("data before first block".into()))?;
        let (c, v) = line.split_once(',').ok_or_else(|| err("expected cell,value".into()))?;
        let c: usize = c.parse().map_err(|_| err(format!("bad cell {c}")))?;
        let v: f64 = v.parse().map_err(|_| err(format!("bad value {v}")))?;
        let values = f.species_mut(species);
        if c >= values.len() {
            return Err(err(format!("cell {c} out of range")));
        }
        values[c] = v;
    }
    let f = field.ok_or_else(|| CheckpointError::Format { line: 0, message: "no species blocks".into() })?;
    let state = SimState {
        t: parse(&header, "t", 0)?,
        f,
        step: parse(&header, "step", 0)?,
        diag: Diagnostics {
            last_dt: parse(&header, "last_dt", 0)?,
            rejected_steps: parse(&header, "rejected_steps", 0)?,
            clip_events: parse(&header, "clip_events", 0)?,
            clipped_mass: parse(&header, "clipped_mass", 0)?,
        },
    };
    let config = header.remove("config").unwrap_or_default();
    Ok(Checkpoint { config, state })
}

fn parse<T: std::str::FromStr>(
    header: &std::collections::HashMap<String, String>,
    key: &str,
    line: usize,
) -> Result<T, CheckpointError> {
    header
        .get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| CheckpointError::Format { line, message: format!("missing or malformed header `{key}`") })
}
