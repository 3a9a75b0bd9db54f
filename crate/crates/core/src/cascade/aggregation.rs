use crate::error::{Error, Result};
use crate::estimator::FirstStage;
use crate::linalg::Vector;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Block {
    pub name: String,
    /// Zero-based treatment indices.
    pub members: Vec<usize>,
    /// ω_{m|B}, aligned with `members`. Empty until [`block_weights`] runs.
    #[serde(default)]
    pub weights: Vec<f64>,
}

/// A partition of the K treatments into named blocks.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BlockSpec {
    pub blocks: Vec<Block>,
}

impl BlockSpec {
    /// Checks that the blocks partition `0..k`.
    pub fn new(blocks: Vec<Block>, k: usize) -> Result<Self> {
        let mut seen = vec![false; k];
        for b in &blocks {
            if b.members.is_empty() {
                return Err(Error::InvalidInput(format!("block '{}' is empty", b.name)));
            }
            for &m in &b.members {
                if m >= k {
                    return Err(Error::InvalidInput(format!("block '{}' names treatment {} but K = {k}", b.name, m + 1)));
                }
                if std::mem::replace(&mut seen[m], true) {
                    return Err(Error::InvalidInput(format!("treatment {} appears in more than one block", m + 1)));
                }
            }
        }
        if let Some(m) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidInput(format!("treatment {} is in no block", m + 1)));
        }
        Ok(BlockSpec { blocks })
    }

    /// Parses `name:1,2;other:3` with one-based treatment numbers.
    pub fn parse(text: &str, k: usize) -> Result<Self> {
        let mut blocks = Vec::new();
        for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, list) = part
                .split_once(':')
                .ok_or_else(|| Error::InvalidInput(format!("block '{part}' needs the form name:i,j")))?;
            let members = list
                .split(',')
                .map(|s| match s.trim().parse::<usize>() {
                    Ok(i) if i >= 1 => Ok(i - 1),
                    _ => Err(Error::InvalidInput(format!("bad treatment number '{}' in block '{name}'", s.trim()))),
                })
                .collect::<Result<Vec<_>>>()?;
            blocks.push(Block { name: name.trim().to_string(), members, weights: Vec::new() });
        }
        BlockSpec::new(blocks, k)
    }
}

/// Fills in `ω_{m|B} = π_mm / Σ_{j∈B} π_jj`.
///
/// These are the weights a block-level 2SLS places on its member programs
/// when each program has its own instrument and application dummies are
/// controlled for. A nonpositive own effect is a hard error.
pub fn block_weights(fs: &FirstStage, spec: &BlockSpec) -> Result<BlockSpec> {
    let mut out = BlockSpec::new(spec.blocks.clone(), fs.k())?;
    for b in &mut out.blocks {
        if let Some(&m) = b.members.iter().find(|&&m| !(fs.get(m, m) > 0.0)) {
            return Err(Error::NonpositiveDiagonal { m });
        }
        let total: f64 = b.members.iter().map(|&m| fs.get(m, m)).sum();
        b.weights = b.members.iter().map(|&m| fs.get(m, m) / total).collect();
    }
    Ok(out)
}

/// β_B = Σ_{m∈B} ω_{m|B} β_m for each block of a weighted spec.
pub fn block_coefficients(spec: &BlockSpec, beta: &Vector) -> Result<Vec<(String, f64)>> {
    spec.blocks
        .iter()
        .map(|b| {
            if b.weights.len() != b.members.len() {
                return Err(Error::InvalidInput(format!("block '{}' has no weights", b.name)));
            }
            let mut v = 0.0;
            for (&m, w) in b.members.iter().zip(&b.weights) {
                if m >= beta.len() {
                    return Err(Error::LengthMismatch { left: beta.len(), right: m + 1 });
                }
                v += w * beta[m];
            }
            Ok((b.name.clone(), v))
        })
        .collect()
}

/// Closed-form β₂ in the two-program-plus-outside example:
/// `(p02·e20 + p12·(e21 + e10)) / (p02 + p12)`.
///
/// `p02` and `p12` are the masses of 0→2 and 1→2 compliers; a 1→2 complier
/// frees a program-1 seat whose 0→1 entrant adds `e10`.
pub fn three_program_beta2(p02: f64, p12: f64, e20: f64, e21: f64, e10: f64) -> Result<f64> {
    if p02 < 0.0 || p12 < 0.0 || !(p02 + p12 > 0.0) {
        return Err(Error::ZeroComplierMass);
    }
    Ok((p02 * e20 + p12 * (e21 + e10)) / (p02 + p12))
}
