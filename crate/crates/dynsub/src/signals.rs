//! Excitation signal generation.
//!
//! Noise is drawn from ChaCha8 seeded with the user seed, one stream per
//! channel, so channels are independent and reproducible. Band limiting
//! masks the FFT of the white sequence to the requested band and inverts it;
//! the result is scaled by `sqrt(variance / kept_fraction)` so the expected
//! variance equals the requested one.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::csvio;
use crate::error::{Error, Result};

/// White noise, optionally restricted to `band = [low, high]` in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(default)]
    pub band: Option<[f64; 2]>,
    #[serde(default = "unit")]
    pub variance: f64,
    #[serde(default)]
    pub seed: u64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalKind {
    /// Sum of sines shared by every channel, plus optional per-channel noise.
    Multisine {
        #[serde(default = "default_frequencies")]
        frequencies: Vec<f64>,
        /// One per frequency, or a single value for all; defaults to 1.
        #[serde(default)]
        amplitudes: Vec<f64>,
        /// rad; defaults to 0.
        #[serde(default)]
        phases: Vec<f64>,
        #[serde(default)]
        noise: Option<NoiseSpec>,
    },
    BandlimitedWhiteNoise(NoiseSpec),
    /// Samples read from a CSV file in the input layout.
    File { path: PathBuf },
}

/// Arbitrary in-band defaults for the multi-sine component, Hz.
pub fn default_frequencies() -> Vec<f64> {
    vec![5.0, 17.0, 40.0, 85.0, 150.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    #[serde(flatten)]
    pub kind: SignalKind,
    /// Hz
    pub sample_rate: f64,
    #[serde(default = "one_channel")]
    pub channels: usize,
}

fn one_channel() -> usize {
    1
}

/// Channel-major samples at `1 / sample_rate` spacing starting at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Signals {
    pub sample_rate: f64,
    pub channels: Vec<Vec<f64>>,
}

impl Signals {
    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn samples(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn sampled(&self) -> Result<dynsub_core::SampledSignals> {
        Ok(dynsub_core::SampledSignals::new(self.dt(), self.channels.clone())?)
    }
}

impl SignalSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::Signal(format!(
                "sample rate must be positive, got {}",
                self.sample_rate
            )));
        }
        match &self.kind {
            SignalKind::Multisine {
                frequencies,
                amplitudes,
                phases,
                noise,
            } => {
                for (name, list) in [("amplitudes", amplitudes), ("phases", phases)] {
                    if list.len() > 1 && list.len() != frequencies.len() {
                        return Err(Error::Signal(format!(
                            "{} {name} for {} frequencies",
                            list.len(),
                            frequencies.len()
                        )));
                    }
                }
                let nyquist = self.sample_rate / 2.0;
                if let Some(f) = frequencies.iter().find(|f| !(**f >= 0.0 && **f < nyquist)) {
                    return Err(Error::Signal(format!(
                        "sine at {f} Hz is outside [0, {nyquist}) Hz"
                    )));
                }
                if let Some(n) = noise {
                    self.validate_noise(n)?;
                }
                Ok(())
            }
            SignalKind::BandlimitedWhiteNoise(n) => self.validate_noise(n),
            SignalKind::File { .. } => Ok(()),
        }
    }

    fn validate_noise(&self, n: &NoiseSpec) -> Result<()> {
        if !(n.variance >= 0.0) {
            return Err(Error::Signal(format!("variance must be non-negative, got {}", n.variance)));
        }
        if let Some([lo, hi]) = n.band {
            let nyquist = self.sample_rate / 2.0;
            if !(lo >= 0.0 && lo < hi && hi < nyquist) {
                return Err(Error::Signal(format!(
                    "band [{lo}, {hi}] Hz must satisfy 0 <= low < high < {nyquist} Hz (Nyquist)"
                )));
            }
        }
        Ok(())
    }
}

/// Generates `n_samples` per channel. File signals return the file content
/// (`n_samples` and `channels` are ignored for them).
pub fn generate_signal(spec: &SignalSpec, n_samples: usize) -> Result<Signals> {
    spec.validate()?;
    let fs = spec.sample_rate;
    let channels = match &spec.kind {
        SignalKind::Multisine {
            frequencies,
            amplitudes,
            phases,
            noise,
        } => {
            let pick = |list: &[f64], i: usize, default: f64| match list.len() {
                0 => default,
                1 => list[0],
                _ => list[i],
            };
            let base: Vec<f64> = (0..n_samples)
                .map(|j| {
                    let t = j as f64 / fs;
                    frequencies
                        .iter()
                        .enumerate()
                        .map(|(i, f)| {
                            pick(amplitudes, i, 1.0) * (2.0 * PI * f * t + pick(phases, i, 0.0)).sin()
                        })
                        .sum()
                })
                .collect();
            (0..spec.channels)
                .map(|c| {
                    let mut x = base.clone();
                    if let Some(n) = noise {
                        for (xi, ni) in x.iter_mut().zip(noise_channel(n, fs, c, n_samples)) {
                            *xi += ni;
                        }
                    }
                    x
                })
                .collect()
        }
        SignalKind::BandlimitedWhiteNoise(n) => (0..spec.channels)
            .map(|c| noise_channel(n, fs, c, n_samples))
            .collect(),
        SignalKind::File { path } => return read_signal_file(path, fs),
    };
    Ok(Signals {
        sample_rate: fs,
        channels,
    })
}

fn read_signal_file(path: &Path, fs: f64) -> Result<Signals> {
    let signals = csvio::read_signals(path)?;
    if (signals.sample_rate - fs).abs() > 1e-6 * fs {
        return Err(Error::Signal(format!(
            "{} is sampled at {} Hz, expected {fs} Hz",
            path.display(),
            signals.sample_rate
        )));
    }
    Ok(signals)
}

fn noise_channel(spec: &NoiseSpec, fs: f64, channel: usize, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(channel as u64);
    let white: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let Some([lo, hi]) = spec.band else {
        let s = spec.variance.sqrt();
        return white.into_iter().map(|x| x * s).collect();
    };
    if n == 0 {
        return white;
    }
    let mut buf: Vec<Complex<f64>> = white.iter().map(|&x| Complex::new(x, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let mut kept = 0usize;
    for (k, z) in buf.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 * fs / n as f64;
        if f >= lo && f <= hi {
            kept += 1;
        } else {
            *z = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    if kept == 0 {
        return vec![0.0; n];
    }
    let scale = (spec.variance / (kept as f64 / n as f64)).sqrt() / n as f64;
    buf.into_iter().map(|z| z.re * scale).collect()
}

/// Fraction of the (mean-removed) periodogram power at frequencies in
/// `[lo, hi]` Hz.
pub fn band_power_fraction(x: &[f64], fs: f64, lo: f64, hi: f64) -> f64 {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let (mut inside, mut total) = (0.0, 0.0);
    for (k, z) in buf.iter().enumerate() {
        let p = z.norm_sqr();
        let f = k.min(n - k) as f64 * fs / n as f64;
        total += p;
        if f >= lo && f <= hi {
            inside += p;
        }
    }
    if total == 0.0 {
        1.0
    } else {
        inside / total
    }
}

pub fn sample_variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(seed: u64, band: Option<[f64; 2]>, channels: usize) -> SignalSpec {
        SignalSpec {
            kind: SignalKind::BandlimitedWhiteNoise(NoiseSpec {
                band,
                variance: 1.0,
                seed,
            }),
            sample_rate: 1000.0,
            channels,
        }
    }

    #[test]
    fn single_sine_peak_is_its_amplitude() {
        let spec = SignalSpec {
            kind: SignalKind::Multisine {
                frequencies: vec![250.0],
                amplitudes: vec![2.5],
                phases: vec![],
                noise: Some(NoiseSpec {
                    band: None,
                    variance: 0.0,
                    seed: 3,
                }),
            },
            sample_rate: 1000.0,
            channels: 2,
        };
        let s = generate_signal(&spec, 100).unwrap();
        for c in &s.channels {
            let peak = c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            assert!((peak - 2.5).abs() < 1e-12);
        }
        assert_eq!(s.channels[0], s.channels[1]);
    }

    #[test]
    fn seeded_noise_is_reproducible_and_channels_differ() {
        let spec = noise(7, Some([0.0, 200.0]), 2);
        let a = generate_signal(&spec, 4096).unwrap();
        let b = generate_signal(&spec, 4096).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.channels[0], a.channels[1]);
        let c = generate_signal(&noise(8, Some([0.0, 200.0]), 2), 4096).unwrap();
        assert_ne!(a.channels[0], c.channels[0]);
    }

    #[test]
    fn multisine_shared_noise_independent() {
        let spec = SignalSpec {
            kind: SignalKind::Multisine {
                frequencies: default_frequencies(),
                amplitudes: vec![],
                phases: vec![],
                noise: Some(NoiseSpec {
                    band: None,
                    variance: 0.01,
                    seed: 1,
                }),
            },
            sample_rate: 1000.0,
            channels: 3,
        };
        let s = generate_signal(&spec, 2000).unwrap();
        let d01: f64 = s.channels[0].iter().zip(&s.channels[1]).map(|(a, b)| (a - b).powi(2)).sum();
        // Difference of two independent noises with variance 0.01 each.
        let var = d01 / 2000.0;
        assert!((var - 0.02).abs() < 0.004, "{var}");
    }

    #[test]
    fn band_limited_noise_statistics() {
        let s = generate_signal(&noise(11, Some([0.0, 200.0]), 1), 20_000).unwrap();
        let x = &s.channels[0];
        assert!((sample_variance(x) - 1.0).abs() < 0.05);
        assert!(band_power_fraction(x, 1000.0, 0.0, 200.0) > 0.99);
        let w = generate_signal(&noise(11, None, 1), 20_000).unwrap();
        assert!(band_power_fraction(&w.channels[0], 1000.0, 0.0, 200.0) < 0.5);
    }

    #[test]
    fn invalid_specs() {
        assert!(generate_signal(&noise(0, Some([0.0, 500.0]), 1), 10).is_err());
        assert!(generate_signal(&noise(0, Some([300.0, 200.0]), 1), 10).is_err());
        let mut spec = noise(0, None, 1);
        spec.kind = SignalKind::BandlimitedWhiteNoise(NoiseSpec {
            band: None,
            variance: -1.0,
            seed: 0,
        });
        assert!(generate_signal(&spec, 10).is_err());
        spec.sample_rate = 0.0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn spec_json() {
        let s: SignalSpec = serde_json::from_str(
            r#"{"kind":"bandlimited_white_noise","band":[0,200],"variance":1,"seed":5,"sample_rate":1000,"channels":4}"#,
        )
        .unwrap();
        assert_eq!(s.channels, 4);
        let m: SignalSpec = serde_json::from_str(r#"{"kind":"multisine","sample_rate":1000}"#).unwrap();
        let SignalKind::Multisine { frequencies, .. } = m.kind else {
            panic!()
        };
        assert_eq!(frequencies, default_frequencies());
    }
}
