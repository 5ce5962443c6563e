//! Index algebra of the dyadic block tree over `2^N` summands.
//!
//! Block `(n, k)` holds the summands `k 2^n + 1 ..= (k+1) 2^n` (1-based). Its
//! children are `(n-1, 2k)` and `(n-1, 2k+1)`; the "difference" of the block is
//! the left child's sum minus the right child's.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// Block `(n, k)` of the tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct BlockIndex {
    pub n: u32,
    pub k: u64,
}

impl BlockIndex {
    pub fn new(n: u32, k: u64) -> Self {
        Self { n, k }
    }

    /// 1-based inclusive range of summands in the block.
    pub fn range(&self) -> (u64, u64) {
        (self.k << self.n | 1, (self.k + 1) << self.n)
    }

    pub fn children(&self) -> Option<(BlockIndex, BlockIndex)> {
        (self.n > 0).then(|| {
            (
                BlockIndex::new(self.n - 1, 2 * self.k),
                BlockIndex::new(self.n - 1, 2 * self.k + 1),
            )
        })
    }
}

/// Index `l` of the level-`n` block containing summand `m`: `l 2^n < m <= (l+1) 2^n`.
pub fn l_index(n: u32, m: u64) -> u64 {
    debug_assert!(m >= 1);
    (m - 1) >> n
}

/// The level-`(n-1)` child of block `l_index(n, m)` that does *not* contain `m`.
pub fn sibling_index(n: u32, m: u64) -> u64 {
    debug_assert!(n >= 1);
    l_index(n - 1, m) ^ 1
}

/// The sum/difference map `(x, y) -> (x + y, x - y)` on `R^d x R^d`.
pub fn apply_a(x: &[f64]) -> Result<Vec<f64>> {
    if !x.len().is_multiple_of(2) {
        return Err(Error::Domain(format!("operator A needs even length, got {}", x.len())));
    }
    let d = x.len() / 2;
    let (a, b) = x.split_at(d);
    Ok(a.iter()
        .zip(b)
        .map(|(p, q)| p + q)
        .chain(a.iter().zip(b).map(|(p, q)| p - q))
        .collect())
}

/// One term `gamma * Utilde_{n, l}` of a prefix decomposition; `gamma = numerator / 2^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Term {
    pub n: u32,
    pub l: u64,
    pub numerator: u64,
}

impl Term {
    pub fn gamma(&self) -> f64 {
        self.numerator as f64 / (1u64 << self.n) as f64
    }
}

/// `S_m = (m / 2^N) S_{2^N} + sum gamma_n Utilde_{n, l_{n,m}}` over `n = r+1..=N`,
/// where `2^r` is the largest power of two dividing `m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub m: u64,
    pub depth: u32,
    pub global_coeff: f64,
    /// Terms from the top level down.
    pub terms: Vec<Term>,
}

/// Decomposes the prefix sum `S_m` of `2^depth` summands.
///
/// Walking down from the root, let `a` be the number of the block's summands
/// that lie in the prefix. If they fit in the left child, the prefix is
/// `a/2^n` of the block sum plus `a/2^n` of its difference; otherwise it
/// covers the left child and part of the right, giving `(2^n - a)/2^n` of the
/// difference. Both coefficients are `min(a, 2^n - a) / 2^n`.
pub fn decompose(m: u64, depth: u32) -> Result<Decomposition> {
    if depth > 62 {
        return Err(Error::Domain(format!("depth {depth} too large")));
    }
    let total = 1u64 << depth;
    if m == 0 || m > total {
        return Err(Error::Domain(format!("prefix {m} outside 1..={total}")));
    }
    let r = m.trailing_zeros().min(depth);
    let terms = (r + 1..=depth)
        .rev()
        .map(|n| {
            let l = l_index(n, m);
            let a = m - (l << n);
            Term {
                n,
                l,
                numerator: a.min((1u64 << n) - a),
            }
        })
        .collect();
    Ok(Decomposition {
        m,
        depth,
        global_coeff: m as f64 / total as f64,
        terms,
    })
}

impl Decomposition {
    /// Evaluates the right-hand side given the total sum and a lookup of block differences.
    pub fn reconstruct(&self, total: f64, diff: impl Fn(u32, u64) -> f64) -> f64 {
        self.global_coeff * total
            + self.terms.iter().map(|t| t.gamma() * diff(t.n, t.l)).sum::<f64>()
    }
}

fn reduced(num: u64, pow: u32) -> (u64, u64) {
    let shift = num.trailing_zeros().min(pow);
    (num >> shift, 1u64 << (pow - shift))
}

fn write_coeff(f: &mut fmt::Formatter<'_>, num: u64, pow: u32) -> fmt::Result {
    match reduced(num, pow) {
        (p, 1) => write!(f, "{p}"),
        (p, q) => write!(f, "{p}/{q}"),
    }
}

fn subscript(v: u64) -> String {
    const DIGITS: [char; 10] = ['₀', '₁', '₂', '₃', '₄', '₅', '₆', '₇', '₈', '₉'];
    v.to_string()
        .bytes()
        .map(|b| DIGITS[(b - b'0') as usize])
        .collect()
}

/// Renders as e.g. `3/4·S₄ + 1/4·Ũ_{2,0} + 1/2·Ũ_{1,1}`.
impl fmt::Display for Decomposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_coeff(f, self.m, self.depth)?;
        write!(f, "·S{}", subscript(1u64 << self.depth))?;
        for t in &self.terms {
            f.write_str(" + ")?;
            write_coeff(f, t.numerator, t.n)?;
            write!(f, "·Ũ_{{{},{}}}", t.n, t.l)?;
        }
        Ok(())
    }
}

/// Block sums and differences of a sequence of `2^N` scalars.
///
/// `sums[n][k]` is `U_{n,k}`; `diffs[n][k]` is `Utilde_{n,k}` for `n >= 1`
/// (`diffs[0]` is empty).
#[derive(Debug, Clone)]
pub struct BlockTree {
    pub sums: Vec<Vec<f64>>,
    pub diffs: Vec<Vec<f64>>,
}

impl BlockTree {
    pub fn from_leaves(x: &[f64]) -> Result<Self> {
        if !x.len().is_power_of_two() {
            return Err(Error::Domain(format!("{} leaves is not a power of two", x.len())));
        }
        let depth = x.len().trailing_zeros() as usize;
        let mut sums = vec![x.to_vec()];
        let mut diffs = vec![Vec::new()];
        for n in 1..=depth {
            let prev = &sums[n - 1];
            let s = prev.chunks_exact(2).map(|c| c[0] + c[1]).collect();
            let d = prev.chunks_exact(2).map(|c| c[0] - c[1]).collect();
            sums.push(s);
            diffs.push(d);
        }
        Ok(Self { sums, diffs })
    }

    pub fn depth(&self) -> u32 {
        (self.sums.len() - 1) as u32
    }

    pub fn total(&self) -> f64 {
        self.sums[self.sums.len() - 1][0]
    }
}
