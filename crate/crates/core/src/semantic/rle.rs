use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{BinaryMask, ScalarGrid};

/// Row-major run lengths of a binary mask, alternating clear/set and
/// always starting with a (possibly empty) clear run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryRle {
    pub counts: Vec<u64>,
}

impl BinaryRle {
    pub fn encode(bits: &[bool]) -> Self {
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u64;
        for &b in bits {
            if b == current {
                run += 1;
            } else {
                counts.push(run);
                current = b;
                run = 1;
            }
        }
        counts.push(run);
        Self { counts }
    }

    pub fn decode(&self, width: usize, height: usize) -> Result<BinaryMask> {
        let mut bits = Vec::with_capacity(width * height);
        let mut value = false;
        for &c in &self.counts {
            bits.extend(std::iter::repeat_n(value, c as usize));
            value = !value;
        }
        if bits.len() != width * height {
            return Err(Error::param(format!(
                "RLE covers {} pixels, expected {}",
                bits.len(),
                width * height
            )));
        }
        BinaryMask::new(width, height, bits)
    }
}

/// Run-length encoding of a real-valued grid as `(value, count)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueRuns(pub Vec<(f64, u64)>);

impl ValueRuns {
    pub fn encode(grid: &ScalarGrid) -> Self {
        let mut runs: Vec<(f64, u64)> = Vec::new();
        for &v in grid.values() {
            match runs.last_mut() {
                Some((last, n)) if last.to_bits() == v.to_bits() => *n += 1,
                _ => runs.push((v, 1)),
            }
        }
        Self(runs)
    }

    pub fn decode(&self, width: usize, height: usize) -> Result<ScalarGrid> {
        let mut values = Vec::with_capacity(width * height);
        for &(v, n) in &self.0 {
            values.extend(std::iter::repeat_n(v, n as usize));
        }
        if values.len() != width * height {
            return Err(Error::param(format!(
                "value runs cover {} pixels, expected {}",
                values.len(),
                width * height
            )));
        }
        ScalarGrid::new(width, height, values)
    }
}
