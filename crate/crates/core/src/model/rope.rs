//! Rotary position embedding.

use crate::error::{Error, Result};

/// Precomputed `cos(m * theta_i)` and `sin(m * theta_i)` for positions
/// `0..positions` and pair indices `0..head_dim / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct RopeTable {
    positions: usize,
    half: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl RopeTable {
    pub fn new(positions: usize, head_dim: usize, base: f64) -> Result<Self> {
        if head_dim == 0 || head_dim % 2 != 0 {
            return Err(Error::Config(format!(
                "RoPE needs an even head dimension, got {head_dim}"
            )));
        }
        if !(base > 0.0) {
            return Err(Error::Config(format!("RoPE base must be positive, got {base}")));
        }
        let half = head_dim / 2;
        let mut cos = Vec::with_capacity(positions * half);
        let mut sin = Vec::with_capacity(positions * half);
        for m in 0..positions {
            for i in 0..half {
                let angle = m as f64 * theta(i, head_dim, base);
                cos.push(angle.cos());
                sin.push(angle.sin());
            }
        }
        Ok(RopeTable {
            positions,
            half,
            cos,
            sin,
        })
    }

    pub fn positions(&self) -> usize {
        self.positions
    }

    pub fn head_dim(&self) -> usize {
        2 * self.half
    }

    /// `(cos, sin)` of the angle for pair `i` at position `m`.
    pub fn get(&self, m: usize, i: usize) -> (f64, f64) {
        let idx = m * self.half + i;
        (self.cos[idx], self.sin[idx])
    }
}

/// `theta_i = base^(-2i / head_dim)`.
pub fn theta(i: usize, head_dim: usize, base: f64) -> f64 {
    base.powf(-2.0 * i as f64 / head_dim as f64)
}

/// Rotates each vector's dimension pairs `(2i, 2i + 1)` by `m * theta_i`,
/// where `m` is the vector's position.
pub fn rope_rotate(x: &[Vec<f64>], positions: &[usize], base: f64) -> Result<Vec<Vec<f64>>> {
    if x.len() != positions.len() {
        return Err(Error::LengthMismatch(format!(
            "{} vectors but {} positions",
            x.len(),
            positions.len()
        )));
    }
    x.iter()
        .zip(positions)
        .map(|(v, &m)| {
            let d = v.len();
            if d % 2 != 0 {
                return Err(Error::Config(format!(
                    "RoPE needs an even dimension, got {d}"
                )));
            }
            let mut out = v.clone();
            for i in 0..d / 2 {
                let angle = m as f64 * theta(i, d, base);
                let (s, c) = angle.sin_cos();
                out[2 * i] = v[2 * i] * c - v[2 * i + 1] * s;
                out[2 * i + 1] = v[2 * i] * s + v[2 * i + 1] * c;
            }
            Ok(out)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn position_zero_is_identity() {
        let x = vec![vec![0.3, -1.2, 2.0, 0.7]];
        assert_eq!(rope_rotate(&x, &[0], 10_000.0).unwrap(), x);
    }

    #[test]
    fn odd_dimension_rejected() {
        assert!(rope_rotate(&[vec![1.0, 2.0, 3.0]], &[1], 10_000.0).is_err());
        assert!(RopeTable::new(4, 3, 10_000.0).is_err());
    }

    #[test]
    fn table_matches_direct_rotation() {
        let t = RopeTable::new(7, 6, 100.0).unwrap();
        for m in 0..7 {
            for i in 0..3 {
                let a = m as f64 * theta(i, 6, 100.0);
                assert_eq!(t.get(m, i), (a.cos(), a.sin()));
            }
        }
    }
}
