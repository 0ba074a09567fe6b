//! Block, global and random attention masks.

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SparseConfig {
    pub block_size: usize,
    pub num_global_tokens: usize,
    pub num_random_keys: usize,
    pub seed: u64,
}

impl Default for SparseConfig {
    fn default() -> Self {
        SparseConfig {
            block_size: 8,
            num_global_tokens: 1,
            num_random_keys: 1,
            seed: 0,
        }
    }
}

impl SparseConfig {
    /// A mask in which every query sees every key.
    pub fn dense() -> Self {
        SparseConfig {
            block_size: usize::MAX,
            num_global_tokens: 0,
            num_random_keys: 0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_size == 0 {
            return Err(Error::Config("block_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Row-major `T x T` boolean matrix; `row(q)[k]` says whether query `q`
/// may attend to key `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseMask {
    tokens: usize,
    allowed: Vec<bool>,
}

impl SparseMask {
    pub fn tokens(&self) -> usize {
        self.tokens
    }

    pub fn row(&self, q: usize) -> &[bool] {
        &self.allowed[q * self.tokens..(q + 1) * self.tokens]
    }

    pub fn is_allowed(&self, q: usize, k: usize) -> bool {
        self.allowed[q * self.tokens + k]
    }

    pub fn count_allowed(&self) -> usize {
        self.allowed.iter().filter(|&&a| a).count()
    }

    /// Fraction of query/key pairs that are attended.
    pub fn density(&self) -> f64 {
        self.count_allowed() as f64 / (self.tokens * self.tokens) as f64
    }
}

/// Builds the attention mask for `tokens` positions.
///
/// A pair is allowed when both tokens fall in the same block, when either
/// is one of the leading global tokens, or when the key is one of the
/// query's random picks. Random keys are drawn without replacement from the
/// keys the first two rules leave masked, so each adds a new link whenever
/// one is available.
pub fn build_sparse_mask(tokens: usize, cfg: &SparseConfig) -> SparseMask {
    let block = cfg.block_size.max(1);
    let g = cfg.num_global_tokens;
    let mut allowed = vec![false; tokens * tokens];
    for q in 0..tokens {
        for k in 0..tokens {
            allowed[q * tokens + k] = q / block == k / block || q < g || k < g;
        }
    }
    if cfg.num_random_keys > 0 {
        let mut rng = crate::rng::stream(cfg.seed, 0);
        for q in 0..tokens {
            let row = &mut allowed[q * tokens..(q + 1) * tokens];
            let candidates: Vec<usize> = (0..tokens).filter(|&k| !row[k]).collect();
            for &k in candidates.choose_multiple(&mut rng, cfg.num_random_keys) {
                row[k] = true;
            }
        }
    }
    SparseMask { tokens, allowed }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_block_is_dense() {
        let cfg = SparseConfig {
            block_size: 4,
            num_global_tokens: 0,
            num_random_keys: 0,
            seed: 1,
        };
        let m = build_sparse_mask(4, &cfg);
        assert_eq!(m.count_allowed(), 16);
    }

    #[test]
    fn diagonal_always_allowed_and_seeded() {
        let cfg = SparseConfig {
            block_size: 3,
            num_global_tokens: 2,
            num_random_keys: 2,
            seed: 9,
        };
        let m = build_sparse_mask(20, &cfg);
        assert!((0..20).all(|i| m.is_allowed(i, i)));
        assert_eq!(m, build_sparse_mask(20, &cfg));
        let other = build_sparse_mask(20, &SparseConfig { seed: 10, ..cfg });
        assert_ne!(m, other);
    }

    #[test]
    fn random_links_add_exactly_the_requested_count() {
        let base = SparseConfig {
            block_size: 4,
            num_global_tokens: 0,
            num_random_keys: 0,
            seed: 3,
        };
        let plain = build_sparse_mask(16, &base).count_allowed();
        let extra = build_sparse_mask(16, &SparseConfig { num_random_keys: 2, ..base }).count_allowed();
        assert_eq!(extra, plain + 16 * 2);
    }
}
