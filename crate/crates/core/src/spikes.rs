use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary spike raster, stored step-major: `bits[step * n_channels + channel]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpikeStream {
    n_channels: usize,
    n_steps: usize,
    bits: Vec<bool>,
}

impl SpikeStream {
    pub fn new(n_channels: usize, n_steps: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != n_channels * n_steps {
            return Err(Error::shape("spike raster", n_channels * n_steps, bits.len()));
        }
        Ok(Self {
            n_channels,
            n_steps,
            bits,
        })
    }

    pub fn zeros(n_channels: usize, n_steps: usize) -> Self {
        Self {
            n_channels,
            n_steps,
            bits: vec![false; n_channels * n_steps],
        }
    }

    pub fn from_rows(n_channels: usize, rows: &[Vec<bool>]) -> Result<Self> {
        let mut bits = Vec::with_capacity(rows.len() * n_channels);
        for row in rows {
            if row.len() != n_channels {
                return Err(Error::shape("spike raster row", n_channels, row.len()));
            }
            bits.extend_from_slice(row);
        }
        Ok(Self {
            n_channels,
            n_steps: rows.len(),
            bits,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn step(&self, n: usize) -> &[bool] {
        &self.bits[n * self.n_channels..(n + 1) * self.n_channels]
    }

    pub fn steps(&self) -> impl Iterator<Item = &[bool]> {
        // chunks() rejects a zero chunk size
        (0..self.n_steps).map(move |n| self.step(n))
    }

    pub fn get(&self, step: usize, channel: usize) -> bool {
        self.bits[step * self.n_channels + channel]
    }

    pub fn set(&mut self, step: usize, channel: usize, spike: bool) {
        self.bits[step * self.n_channels + channel] = spike;
    }

    pub fn push_step(&mut self, row: &[bool]) -> Result<()> {
        if row.len() != self.n_channels {
            return Err(Error::shape("spike raster row", self.n_channels, row.len()));
        }
        self.bits.extend_from_slice(row);
        self.n_steps += 1;
        Ok(())
    }

    /// Appends `n` silent steps.
    pub fn padded(&self, n: usize) -> Self {
        let mut out = self.clone();
        out.bits.resize(out.bits.len() + n * self.n_channels, false);
        out.n_steps += n;
        out
    }

    pub fn spike_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Fraction of steps carrying at least one spike.
    pub fn active_fraction(&self) -> f64 {
        if self.n_steps == 0 {
            return 0.0;
        }
        let active = self.steps().filter(|row| row.iter().any(|&b| b)).count();
        active as f64 / self.n_steps as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_checks() {
        assert!(SpikeStream::new(3, 2, vec![false; 5]).is_err());
        assert!(SpikeStream::from_rows(2, &[vec![true, false], vec![true]]).is_err());
        let s = SpikeStream::from_rows(2, &[vec![true, false], vec![false, false]]).unwrap();
        assert_eq!(s.n_steps(), 2);
        assert!(s.get(0, 0));
        assert_eq!(s.active_fraction(), 0.5);
        assert_eq!(s.padded(2).n_steps(), 4);
        assert_eq!(SpikeStream::zeros(0, 4).steps().count(), 4);
    }
}
