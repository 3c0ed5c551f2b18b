//! External input channels feeding substructure loads.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A bank of scalar input channels sampled at arbitrary times.
pub trait InputSignals: Sync {
    fn channels(&self) -> usize;
    /// Value of `channel` at time `t`; channels beyond `channels()` read as zero.
    fn value(&self, channel: usize, t: f64) -> f64;
}

/// No excitation on any channel.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroInput;

impl InputSignals for ZeroInput {
    fn channels(&self) -> usize {
        0
    }

    fn value(&self, _channel: usize, _t: f64) -> f64 {
        0.0
    }
}

/// Uniformly sampled channels starting at `t = 0`, linearly interpolated
/// between samples and held constant past the last one.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignals {
    dt: f64,
    channels: Vec<Vec<f64>>,
}

impl SampledSignals {
    pub fn new(dt: f64, channels: Vec<Vec<f64>>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidConfig("sample interval must be positive".into()));
        }
        if let Some(first) = channels.first() {
            if first.is_empty() {
                return Err(Error::InvalidConfig("input channels have no samples".into()));
            }
            if let Some(bad) = channels.iter().find(|c| c.len() != first.len()) {
                return Err(Error::LengthMismatch {
                    left: first.len(),
                    right: bad.len(),
                });
            }
        }
        Ok(Self { dt, channels })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn channel(&self, k: usize) -> &[f64] {
        &self.channels[k]
    }
}

impl InputSignals for SampledSignals {
    fn channels(&self) -> usize {
        self.channels.len()
    }

    fn value(&self, channel: usize, t: f64) -> f64 {
        let Some(data) = self.channels.get(channel) else {
            return 0.0;
        };
        let x = (t / self.dt).max(0.0);
        let i = libm::floor(x) as usize;
        if i + 1 >= data.len() {
            return data[data.len() - 1];
        }
        let frac = x - i as f64;
        // Snap to the sample when t hits the grid up to rounding.
        if frac < 1e-9 {
            return data[i];
        }
        if frac > 1.0 - 1e-9 {
            return data[i + 1];
        }
        data[i] + frac * (data[i + 1] - data[i])
    }
}

impl<F> InputSignals for F
where
    F: Fn(usize, f64) -> f64 + Sync,
{
    fn channels(&self) -> usize {
        usize::MAX
    }

    fn value(&self, channel: usize, t: f64) -> f64 {
        self(channel, t)
    }
}
