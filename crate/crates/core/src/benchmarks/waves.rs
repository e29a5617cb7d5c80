//! Narrow-band Gaussian wave fields and their envelopes.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng as _;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

/// Spectral half-width, in units of `K`, beyond which the spectrum is cut.
const BAND_HALF_WIDTH: f64 = 5.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumConfig {
    /// Significant wave height (m).
    pub hs: f64,
    /// Peak wavenumber (1/m).
    pub k0: f64,
    /// Spectral width (1/m).
    pub k_width: f64,
    pub gravity: f64,
    /// Record length (s).
    pub duration: f64,
    /// Sampling interval (s).
    pub dt: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig::with_hours(150.0)
    }
}

impl SpectrumConfig {
    pub fn with_hours(hours: f64) -> Self {
        let (hs, k0, gravity): (f64, f64, f64) = (12.0, 0.018, 9.81);
        let tp = 2.0 * PI / (gravity * k0).sqrt();
        SpectrumConfig {
            hs,
            k0,
            k_width: 0.05 * k0,
            gravity,
            duration: hours * 3600.0,
            dt: tp / 20.0,
        }
    }

    /// Peak period from deep-water dispersion `ω = √(g k)`.
    pub fn peak_period(&self) -> f64 {
        2.0 * PI / (self.gravity * self.k0).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.hs, self.k0, self.k_width, self.gravity, self.duration, self.dt];
        if vals.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config("spectrum parameters must be positive".into()));
        }
        if self.k_width >= self.k0 {
            return Err(Error::Config("spectral width must be below the peak wavenumber".into()));
        }
        let tp = self.peak_period();
        if self.dt > tp / 20.0 * (1.0 + 1e-12) {
            return Err(Error::Config(format!("dt {} s is coarser than Tp/20 = {} s", self.dt, tp / 20.0)));
        }
        if self.duration < 100.0 * tp {
            return Err(Error::Config(format!("record of {} s is shorter than 100 Tp", self.duration)));
        }
        Ok(())
    }

    /// `F(k) = Hs²/16 · N(k; k0, K²)`.
    pub fn spectrum(&self, k: f64) -> f64 {
        let z = (k - self.k0) / self.k_width;
        self.hs * self.hs / 16.0 / ((2.0 * PI).sqrt() * self.k_width) * (-0.5 * z * z).exp()
    }
}

/// Surface elevation and envelope sampled every `dt` seconds.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveField {
    pub dt: f64,
    pub eta: Vec<f64>,
    pub rho: Vec<f64>,
}

impl WaveField {
    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.eta.len() as f64 * self.dt
    }

    const MAGIC: &'static [u8; 4] = b"SBWF";
    const VERSION: u32 = 1;

    /// Little-endian binary: magic, version, dt, length, η, ρ.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(Self::MAGIC)?;
        w.write_all(&Self::VERSION.to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        w.write_all(&(self.eta.len() as u64).to_le_bytes())?;
        for v in self.eta.iter().chain(&self.rho) {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let bad = || Error::Unsupported(format!("{} is not a wave field file", path.display()));
        if bytes.len() < 24 || &bytes[..4] != Self::MAGIC {
            return Err(bad());
        }
        let word = |o: usize| -> [u8; 8] { bytes[o..o + 8].try_into().expect("8 bytes") };
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != Self::VERSION {
            return Err(Error::Unsupported(format!("wave field version {version}")));
        }
        let dt = f64::from_le_bytes(word(8));
        let n = u64::from_le_bytes(word(16)) as usize;
        if bytes.len() != 24 + 16 * n {
            return Err(bad());
        }
        let series = |o: usize| (0..n).map(|i| f64::from_le_bytes(word(o + 8 * i))).collect::<Vec<_>>();
        Ok(WaveField {
            dt,
            eta: series(24),
            rho: series(24 + 8 * n),
        })
    }
}

/// Smallest `m ≥ n` whose only prime factors are 2, 3 and 5.
fn fft_friendly(n: usize) -> usize {
    let mut m = n.max(2);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 && m % 2 == 0 {
            return m;
        }
        m += 1;
    }
}

/// Envelope `|x + i H[x]|` via the FFT analytic signal.
pub fn hilbert_envelope(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(*v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    // keep DC (and Nyquist), double positive frequencies, drop negative ones
    let half = n / 2;
    for (m, c) in buf.iter_mut().enumerate() {
        let factor = if m == 0 || (n % 2 == 0 && m == half) {
            1.0
        } else if m < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *c *= factor;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.norm() / n as f64).collect()
}

/// `η(t) = Σ_i √(2 F(k_i) Δk_i) cos(ω_i t + φ_i)` on the FFT frequency grid
/// `ω_i = 2π i / T`, with `k_i = ω_i² / g`, `Δk_i = 2 ω_i Δω / g`, uniform
/// random phases, and the band limited to `|k − k0| ≤ 5K`.
pub fn synth_wave_field(cfg: &SpectrumConfig, seed: u64) -> Result<WaveField> {
    cfg.validate()?;
    let n = fft_friendly((cfg.duration / cfg.dt).ceil() as usize);
    let dw = 2.0 * PI / (n as f64 * cfg.dt);
    let mut rng = seeded(seed);
    let mut spec = vec![Complex::new(0.0, 0.0); n];
    for (m, slot) in spec.iter_mut().enumerate().take(n / 2).skip(1) {
        let w = m as f64 * dw;
        let k = w * w / cfg.gravity;
        if (k - cfg.k0).abs() > BAND_HALF_WIDTH * cfg.k_width {
            continue;
        }
        let dk = 2.0 * w * dw / cfg.gravity;
        let amp = (2.0 * cfg.spectrum(k) * dk).sqrt();
        let phase: f64 = rng.random_range(0.0..2.0 * PI);
        *slot = Complex::from_polar(amp, phase);
    }
    FftPlanner::<f64>::new().plan_fft_inverse(n).process(&mut spec);
    let eta: Vec<f64> = spec.iter().map(|c| c.re).collect();
    let rho = hilbert_envelope(&eta);
    Ok(WaveField { dt: cfg.dt, eta, rho })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_of_pure_cosine_is_flat() {
        let n = 4000;
        let a = 2.5;
        // whole number of periods so the record is periodic
        let x: Vec<f64> = (0..n).map(|i| a * (2.0 * PI * 37.0 * i as f64 / n as f64).cos()).collect();
        let rho = hilbert_envelope(&x);
        for r in &rho[100..n - 100] {
            assert!((r - a).abs() < 1e-6);
        }
    }

    #[test]
    fn field_variance_matches_spectrum() {
        let mut cfg = SpectrumConfig::default();
        cfg.duration = 1000.0 * cfg.peak_period();
        let w = synth_wave_field(&cfg, 3).unwrap();
        let var = w.eta.iter().map(|e| e * e).sum::<f64>() / w.len() as f64;
        assert!((var / 9.0 - 1.0).abs() < 0.05, "{var}");
        for (e, r) in w.eta.iter().zip(&w.rho) {
            assert!(e.abs() <= r + 1e-9);
        }
    }

    #[test]
    fn same_seed_same_field() {
        let mut cfg = SpectrumConfig::default();
        cfg.duration = 120.0 * cfg.peak_period();
        assert_eq!(synth_wave_field(&cfg, 9).unwrap(), synth_wave_field(&cfg, 9).unwrap());
        assert_ne!(synth_wave_field(&cfg, 9).unwrap().eta, synth_wave_field(&cfg, 10).unwrap().eta);
    }

    #[test]
    fn rejects_coarse_sampling() {
        let mut cfg = SpectrumConfig::default();
        cfg.dt = cfg.peak_period() / 10.0;
        assert!(synth_wave_field(&cfg, 1).is_err());
    }

    #[test]
    fn binary_round_trip() {
        let mut cfg = SpectrumConfig::default();
        cfg.duration = 110.0 * cfg.peak_period();
        let w = synth_wave_field(&cfg, 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("field.bin");
        w.save(&p).unwrap();
        assert_eq!(WaveField::load(&p).unwrap(), w);
    }
}
