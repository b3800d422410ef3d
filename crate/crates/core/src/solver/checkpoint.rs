//! Binary checkpoints: `SQGB`, a version byte, a fixed header and the coefficient
//! array in row-major order, all little-endian.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::spectral::SpectralField;

use super::SolverState;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SQGB";
pub const CHECKPOINT_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub n: usize,
    pub side: f64,
    pub t: f64,
    pub steps: u64,
    pub config_hash: [u8; 32],
    pub coeffs: Array2<f64>,
}

impl Checkpoint {
    pub fn from_state(state: &SolverState, config_hash: [u8; 32]) -> Self {
        let g = state.theta.geometry();
        Checkpoint {
            n: g.n(),
            side: g.side(),
            t: state.t,
            steps: state.steps,
            config_hash,
            coeffs: state.theta.coeffs().clone(),
        }
    }

    /// Rebuilds the state on `geometry`, which must match the stored grid.
    pub fn to_state(&self, geometry: &Arc<Geometry>) -> Result<SolverState> {
        if geometry.n() != self.n || geometry.side() != self.side {
            return Err(Error::Shape(format!(
                "checkpoint grid N={} L={} does not match N={} L={}",
                self.n,
                self.side,
                geometry.n(),
                geometry.side()
            )));
        }
        Ok(SolverState { t: self.t, steps: self.steps, theta: SpectralField::from_coeffs(geometry, self.coeffs.clone())? })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + 8 * self.coeffs.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.push(CHECKPOINT_VERSION);
        out.extend_from_slice(&(self.n as u64).to_le_bytes());
        out.extend_from_slice(&self.side.to_le_bytes());
        out.extend_from_slice(&self.t.to_le_bytes());
        out.extend_from_slice(&self.steps.to_le_bytes());
        out.extend_from_slice(&self.config_hash);
        for v in self.coeffs.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("checkpoint: {m}"));
        if bytes.len() < 5 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(bad("missing SQGB magic"));
        }
        if bytes[4] != CHECKPOINT_VERSION {
            return Err(bad(&format!("unsupported version {}", bytes[4])));
        }
        let mut pos = 5;
        let mut take = |len: usize| -> Result<&[u8]> {
            let s = bytes.get(pos..pos + len).ok_or_else(|| bad("truncated"))?;
            pos += len;
            Ok(s)
        };
        let u64_at = |s: &[u8]| u64::from_le_bytes(s.try_into().expect("8 bytes"));
        let f64_at = |s: &[u8]| f64::from_le_bytes(s.try_into().expect("8 bytes"));
        let n = u64_at(take(8)?) as usize;
        let side = f64_at(take(8)?);
        let t = f64_at(take(8)?);
        let steps = u64_at(take(8)?);
        let config_hash: [u8; 32] = take(32)?.try_into().expect("32 bytes");
        if n < 2 {
            return Err(bad(&format!("invalid N = {n}")));
        }
        let m = n - 1;
        let body = take(8 * m * m)?;
        let values: Vec<f64> = body.chunks_exact(8).map(f64_at).collect();
        if pos != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        let coeffs = Array2::from_shape_vec((m, m), values).map_err(|e| bad(&e.to_string()))?;
        Ok(Checkpoint { n, side, t, steps, config_hash, coeffs })
    }
}

pub fn write_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&checkpoint.encode())?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    Checkpoint::decode(&bytes)
}
