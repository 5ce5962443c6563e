use serde::Serialize;

use crate::coupling::engine::{discrepancy_path, Engine, EngineConfig};
use crate::error::{Error, Result};

/// Stages beyond 3 would need blocks of `2^16` summands.
pub const MAX_CHAIN_STAGES: u32 = 3;

/// One stage of a chained coupling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainBlock {
    pub stage: u32,
    /// Summands before this block, `m_{s-1}`.
    pub start: u64,
    /// Summands in this block, `m_s - m_{s-1}`.
    pub size: u64,
    /// Depth of the padded tree (`2^depth >= size`).
    pub depth: u32,
    /// Discrepancy of this block on its own.
    pub delta: f64,
    pub underflow_flags: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainOutput {
    pub d: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub disc_path: Vec<f64>,
    pub delta: f64,
    pub blocks: Vec<ChainBlock>,
}

/// Block boundaries `m_s = 2^(2^s)` for `s = 1..=stages`, with `m_0 = 0`.
/// Returns `(start, size, depth)` for each stage.
pub fn block_plan(stages: u32) -> Result<Vec<(u64, u64, u32)>> {
    if !(1..=MAX_CHAIN_STAGES).contains(&stages) {
        return Err(Error::Config(format!(
            "chain stages must be in 1..={MAX_CHAIN_STAGES}, got {stages}"
        )));
    }
    let mut prev = 0u64;
    Ok((1..=stages)
        .map(|s| {
            let m = 1u64 << (1u32 << s);
            let size = m - prev;
            let depth = size.next_power_of_two().trailing_zeros();
            let out = (prev, size, depth);
            prev = m;
            out
        })
        .collect())
}

/// Independent couplings of consecutive blocks, concatenated.
///
/// Each block is padded to a power of two with standard Gaussian summands
/// placed after the target summands. The padded tree is coupled as a whole
/// and the padding is then dropped from both walks, so the kept `X` are
/// exactly target-distributed and the kept `Y` are i.i.d. standard Gaussian.
/// Block `s` uses stream `s` of `template.seed`; `template.depth` is ignored.
pub fn compose_chain(template: &EngineConfig, stages: u32) -> Result<ChainOutput> {
    let d = template.dim();
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut blocks = Vec::new();
    for (i, (start, size, depth)) in block_plan(stages)?.into_iter().enumerate() {
        let stage = i as u32 + 1;
        let config = EngineConfig {
            depth,
            ..template.clone()
        };
        let out = Engine::with_active(config, size)?.run_replicate(template.seed, stage as u64)?;
        let keep = size as usize * d;
        let path = discrepancy_path(&out.x[..keep], &out.y[..keep], d);
        blocks.push(ChainBlock {
            stage,
            start,
            size,
            depth,
            delta: path.iter().copied().fold(0.0, f64::max),
            underflow_flags: out.underflow_flags,
        });
        x.extend_from_slice(&out.x[..keep]);
        y.extend_from_slice(&out.y[..keep]);
    }
    let disc_path = discrepancy_path(&x, &y, d);
    let delta = disc_path.iter().copied().fold(0.0, f64::max);
    Ok(ChainOutput {
        d,
        x,
        y,
        disc_path,
        delta,
        blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_sizes() {
        assert_eq!(block_plan(1).unwrap(), vec![(0, 4, 2)]);
        let p = block_plan(3).unwrap();
        assert_eq!(p, vec![(0, 4, 2), (4, 12, 4), (16, 240, 8)]);
        assert!(block_plan(4).is_err());
        assert!(block_plan(0).is_err());
    }
}
