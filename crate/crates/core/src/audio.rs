//! Multichannel sample buffers and FFT convolution.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

/// Planar multichannel audio: `channels[c][n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Audio {
    pub sample_rate: u32,
    pub channels: Vec<Vec<f64>>,
}

impl Audio {
    pub fn zeros(sample_rate: u32, n_channels: usize, n_samples: usize) -> Self {
        Self {
            sample_rate,
            channels: vec![vec![0.0; n_samples]; n_channels],
        }
    }

    pub fn mono(sample_rate: u32, samples: Vec<f64>) -> Self {
        Self {
            sample_rate,
            channels: vec![samples],
        }
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    /// Adds `other` into `self` starting at sample `offset`, dropping anything past the end.
    pub fn add_at(&mut self, other: &Audio, offset: usize) {
        for (dst, src) in self.channels.iter_mut().zip(&other.channels) {
            if offset >= dst.len() {
                continue;
            }
            for (d, s) in dst[offset..].iter_mut().zip(src) {
                *d += s;
            }
        }
    }

    pub fn scale(&mut self, gain: f64) {
        for ch in &mut self.channels {
            ch.iter_mut().for_each(|x| *x *= gain);
        }
    }

    /// Sum of squares over all channels.
    pub fn energy(&self) -> f64 {
        self.channels.iter().flatten().map(|x| x * x).sum()
    }

    pub fn rms(&self) -> f64 {
        let n = self.len() * self.n_channels();
        if n == 0 {
            0.0
        } else {
            (self.energy() / n as f64).sqrt()
        }
    }

    pub fn truncated(mut self, n_samples: usize) -> Self {
        for ch in &mut self.channels {
            ch.truncate(n_samples);
        }
        self
    }
}

type FftPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

/// Forward and inverse plans of length `n`, planned once per process.
fn fft_pair(n: usize) -> FftPair {
    static PLANS: OnceLock<Mutex<HashMap<usize, FftPair>>> = OnceLock::new();
    let mut plans = PLANS
        .get_or_init(Default::default)
        .lock()
        .unwrap_or_else(|e| e.into_inner());
    plans
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

/// Full linear convolution of `signal` with every kernel, by FFT overlap-add.
///
/// Output `k` has length `signal.len() + kernels[k].len() - 1`.
pub fn convolve_many(signal: &[f64], kernels: &[&[f64]]) -> Vec<Vec<f64>> {
    let kernel_len = kernels.iter().map(|k| k.len()).max().unwrap_or(0);
    if signal.is_empty() || kernel_len == 0 {
        return kernels.iter().map(|_| Vec::new()).collect();
    }
    let fft_len = (2 * kernel_len).max(1024).next_power_of_two();
    let block = fft_len - kernel_len + 1;
    let (fwd, inv) = fft_pair(fft_len);
    let scale = 1.0 / fft_len as f64;

    let spectra: Vec<Vec<Complex64>> = kernels
        .iter()
        .map(|k| {
            let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];
            for (b, &x) in buf.iter_mut().zip(k.iter()) {
                b.re = x;
            }
            fwd.process(&mut buf);
            buf
        })
        .collect();
    let mut out: Vec<Vec<f64>> = kernels
        .iter()
        .map(|k| vec![0.0; signal.len() + k.len().max(1) - 1])
        .collect();

    let mut seg = vec![Complex64::new(0.0, 0.0); fft_len];
    let mut prod = vec![Complex64::new(0.0, 0.0); fft_len];
    for start in (0..signal.len()).step_by(block) {
        let chunk = &signal[start..(start + block).min(signal.len())];
        seg.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for (s, &x) in seg.iter_mut().zip(chunk) {
            s.re = x;
        }
        fwd.process(&mut seg);
        for ((spec, kernel), dst) in spectra.iter().zip(kernels).zip(out.iter_mut()) {
            if kernel.is_empty() {
                continue;
            }
            for ((p, a), b) in prod.iter_mut().zip(&seg).zip(spec) {
                *p = a * b;
            }
            inv.process(&mut prod);
            let valid = chunk.len() + kernel.len() - 1;
            for (d, p) in dst[start..].iter_mut().zip(&prod[..valid]) {
                *d += p.re * scale;
            }
        }
    }
    out
}

pub fn convolve(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    convolve_many(signal, &[kernel]).pop().unwrap_or_default()
}

/// Samples `lo..hi` of the full linear convolution of `signal` with each
/// kernel, computed with a single overlap-save FFT.
pub fn convolve_window(signal: &[f64], kernels: &[&[f64]], lo: usize, hi: usize) -> Vec<Vec<f64>> {
    let kernel_len = kernels.iter().map(|k| k.len()).max().unwrap_or(0);
    if hi <= lo || signal.is_empty() || kernel_len == 0 {
        return kernels.iter().map(|_| vec![0.0; hi.saturating_sub(lo)]).collect();
    }
    let offset = (lo + 1).saturating_sub(kernel_len);
    let seg = &signal[offset.min(signal.len())..hi.min(signal.len())];
    // circular wrap-around must land in the zero padding for every index >= lo
    let wrap_free = seg.len() + kernel_len - 1 - (lo - offset);
    let fft_len = wrap_free.max(hi - offset).max(64).next_power_of_two();
    let (fwd, inv) = fft_pair(fft_len);
    let scale = 1.0 / fft_len as f64;
    let mut x = vec![Complex64::new(0.0, 0.0); fft_len];
    for (d, &v) in x.iter_mut().zip(seg) {
        d.re = v;
    }
    fwd.process(&mut x);
    let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];
    kernels
        .iter()
        .map(|k| {
            buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            for (d, &v) in buf.iter_mut().zip(k.iter()) {
                d.re = v;
            }
            fwd.process(&mut buf);
            for (b, a) in buf.iter_mut().zip(&x) {
                *b *= a;
            }
            inv.process(&mut buf);
            buf[lo - offset..hi - offset].iter().map(|c| c.re * scale).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn direct(x: &[f64], h: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len() + h.len() - 1];
        for (i, a) in x.iter().enumerate() {
            for (j, b) in h.iter().enumerate() {
                y[i + j] += a * b;
            }
        }
        y
    }

    #[test]
    fn matches_direct_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (n, m) in [(1, 1), (5, 3), (3000, 700), (4096, 1), (10, 2000)] {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fast = convolve(&x, &h);
            let slow = direct(&x, &h);
            assert_eq!(fast.len(), slow.len());
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-9, "{n}x{m}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn window_matches_direct_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (n, m, lo, hi) in [(3000, 700, 0, 10), (3000, 700, 1200, 1900), (3000, 700, 3500, 3699), (50, 400, 10, 449), (100, 1, 20, 30)] {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let win = convolve_window(&x, &[&h], lo, hi).pop().unwrap();
            let slow = direct(&x, &h);
            assert_eq!(win.len(), hi - lo);
            for (a, b) in win.iter().zip(&slow[lo..hi]) {
                assert!((a - b).abs() < 1e-9, "{n}x{m} [{lo},{hi}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn add_at_clips_to_length() {
        let mut a = Audio::zeros(24_000, 2, 4);
        let b = Audio {
            sample_rate: 24_000,
            channels: vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]],
        };
        a.add_at(&b, 2);
        assert_eq!(a.channels[0], vec![0.0, 0.0, 1.0, 2.0]);
        assert_eq!(a.channels[1], vec![0.0, 0.0, 4.0, 5.0]);
        a.add_at(&b, 10);
        assert_eq!(a.energy(), 1.0 + 4.0 + 16.0 + 25.0);
    }
}
