use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Component, CoverageError, Frame, ReferenceSet, ReferenceTrajectory, Source};
use crate::schema;

/// First line of a trajectory JSONL file; one frame per following line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub schema: String,
    pub id: String,
    pub source: Source,
    #[serde(default)]
    pub recorded_with_dr: bool,
    pub components: Vec<Component>,
}

pub fn write_trajectory(t: &ReferenceTrajectory, mut w: impl Write) -> Result<(), CoverageError> {
    let header = TrajectoryHeader {
        schema: schema::TRAJECTORY.to_string(),
        id: t.id.clone(),
        source: t.source,
        recorded_with_dr: t.recorded_with_dr,
        components: t.components.clone(),
    };
    serde_json::to_writer(&mut w, &header).map_err(|e| CoverageError::Malformed(e.to_string()))?;
    writeln!(w)?;
    for f in &t.frames {
        serde_json::to_writer(&mut w, f).map_err(|e| CoverageError::Malformed(e.to_string()))?;
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_trajectory(r: impl BufRead) -> Result<ReferenceTrajectory, CoverageError> {
    let mut lines = r.lines().enumerate();
    let malformed =
        |n: usize, e: serde_json::Error| CoverageError::Malformed(format!("line {}: {e}", n + 1));
    let header_line = loop {
        match lines.next() {
            None => return Err(CoverageError::Malformed("empty trajectory file".into())),
            Some((_, l)) => {
                let l = l?;
                if !l.trim().is_empty() {
                    break l;
                }
            }
        }
    };
    let raw: serde_json::Value = serde_json::from_str(&header_line).map_err(|e| malformed(0, e))?;
    let found = raw.get("schema").and_then(|s| s.as_str()).unwrap_or("");
    schema::check(schema::TRAJECTORY, found)?;
    let header: TrajectoryHeader = serde_json::from_value(raw).map_err(|e| malformed(0, e))?;
    let mut frames = Vec::new();
    for (n, l) in lines {
        let l = l?;
        if l.trim().is_empty() {
            continue;
        }
        let f: Frame = serde_json::from_str(&l).map_err(|e| malformed(n, e))?;
        frames.push(f);
    }
    let t = ReferenceTrajectory {
        id: header.id,
        source: header.source,
        recorded_with_dr: header.recorded_with_dr,
        components: header.components,
        frames,
    };
    t.validate()?;
    Ok(t)
}

/// Hex SHA-256 of the trajectory's JSONL encoding.
pub fn content_hash(t: &ReferenceTrajectory) -> String {
    let mut buf = Vec::new();
    write_trajectory(t, &mut buf).expect("writing to memory");
    Sha256::digest(&buf)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub source: Source,
    pub frames: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub generation: u64,
    pub trajectories: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn of(set: &ReferenceSet) -> Self {
        Self {
            schema: schema::MANIFEST.to_string(),
            generation: set.generation,
            trajectories: set
                .trajectories
                .values()
                .map(|t| ManifestEntry {
                    id: t.id.clone(),
                    source: t.source,
                    frames: t.frames.len(),
                    sha256: content_hash(t),
                })
                .collect(),
        }
    }
}
