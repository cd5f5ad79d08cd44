//! Baseline input features: multichannel log-mel spectrograms plus FOA
//! intensity vectors or MIC GCC-PHAT sequences.
//!
//! Frames use a 960-sample (40 ms) periodic Hann window zero-padded to a
//! 1024-point FFT, with a 480-sample (20 ms) hop. The first window starts at
//! sample 0, so feature frames `5k..5k+4` line up with label frame `k`.

use std::sync::OnceLock;

use ndarray::{s, Array2, Array3, Axis};
use num_complex::Complex64;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::audio::Audio;
use crate::model::{Doa, Format};
use crate::SAMPLE_RATE;

pub const WINDOW_LEN: usize = 960;
pub const HOP_LEN: usize = 480;
pub const FFT_SIZE: usize = 1024;
pub const N_BINS: usize = FFT_SIZE / 2 + 1;
pub const N_MELS: usize = 64;
pub const N_LAGS: usize = 64;
pub const POWER_FLOOR: f64 = 1e-10;
pub const PHAT_FLOOR: f64 = 1e-12;

/// Channel pairs for GCC-PHAT, in output order.
pub const MIC_PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("audio has {0} samples, shorter than one {WINDOW_LEN}-sample window")]
    TooShort(usize),
    #[error("expected {SAMPLE_RATE} Hz audio, found {0} Hz")]
    SampleRate(u32),
    #[error("expected {expected} channels, found {found}")]
    ChannelCount { expected: usize, found: usize },
    #[error("{feature} requires {expected} input, got {found}")]
    WrongFormat {
        feature: &'static str,
        expected: Format,
        found: Format,
    },
}

/// Complex spectra, shape `(frames, 513, channels)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StftTensor {
    pub data: Array3<Complex64>,
}

impl StftTensor {
    pub fn n_frames(&self) -> usize {
        self.data.dim().0
    }

    pub fn n_channels(&self) -> usize {
        self.data.dim().2
    }
}

/// Stacked features, shape `(frames, 64, K)` with K = 7 (FOA) or 10 (MIC).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    pub format: Format,
    pub data: Array3<f64>,
}

impl FeatureStack {
    pub fn n_frames(&self) -> usize {
        self.data.dim().0
    }
}

pub fn n_stft_frames(n_samples: usize) -> usize {
    if n_samples < WINDOW_LEN {
        0
    } else {
        (n_samples - WINDOW_LEN) / HOP_LEN + 1
    }
}

pub fn hann_window() -> &'static [f64] {
    static WINDOW: OnceLock<Vec<f64>> = OnceLock::new();
    WINDOW.get_or_init(|| {
        (0..WINDOW_LEN)
            .map(|n| {
                0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / WINDOW_LEN as f64).cos()
            })
            .collect()
    })
}

pub fn stft(audio: &Audio) -> Result<StftTensor, FeatureError> {
    if audio.sample_rate != SAMPLE_RATE {
        return Err(FeatureError::SampleRate(audio.sample_rate));
    }
    let n_frames = n_stft_frames(audio.len());
    if n_frames == 0 {
        return Err(FeatureError::TooShort(audio.len()));
    }
    let window = hann_window();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(FFT_SIZE);
    let n_channels = audio.n_channels();
    let mut data = Array3::zeros((n_frames, N_BINS, n_channels));
    let mut buf = vec![Complex64::new(0.0, 0.0); FFT_SIZE];
    for (c, ch) in audio.channels.iter().enumerate() {
        for t in 0..n_frames {
            let frame = &ch[t * HOP_LEN..t * HOP_LEN + WINDOW_LEN];
            buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
            for ((b, x), w) in buf.iter_mut().zip(frame).zip(window) {
                b.re = x * w;
            }
            fft.process(&mut buf);
            for (k, v) in buf[..N_BINS].iter().enumerate() {
                data[[t, k, c]] = *v;
            }
        }
    }
    Ok(StftTensor { data })
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular HTK-mel filterbank, 64 bands over 0-12 kHz, shape `(64, 513)`.
pub fn mel_filterbank() -> &'static Array2<f64> {
    static BANK: OnceLock<Array2<f64>> = OnceLock::new();
    BANK.get_or_init(|| {
        let top = hz_to_mel(SAMPLE_RATE as f64 / 2.0);
        let edges: Vec<f64> = (0..N_MELS + 2)
            .map(|i| mel_to_hz(top * i as f64 / (N_MELS + 1) as f64))
            .collect();
        Array2::from_shape_fn((N_MELS, N_BINS), |(b, k)| {
            let f = k as f64 * SAMPLE_RATE as f64 / FFT_SIZE as f64;
            let (lo, mid, hi) = (edges[b], edges[b + 1], edges[b + 2]);
            let rising = (f - lo) / (mid - lo);
            let falling = (hi - f) / (hi - mid);
            rising.min(falling).max(0.0)
        })
    })
}

/// Log-mel power per channel, shape `(frames, 64, channels)`.
pub fn log_mel(spec: &StftTensor) -> Array3<f64> {
    let fb = mel_filterbank();
    let (n_frames, _, n_channels) = spec.data.dim();
    let mut out = Array3::zeros((n_frames, N_MELS, n_channels));
    for t in 0..n_frames {
        for c in 0..n_channels {
            let power = spec.data.slice(s![t, .., c]).mapv(|z| z.norm_sqr());
            let mel = fb.dot(&power);
            for (b, m) in mel.iter().enumerate() {
                out[[t, b, c]] = 10.0 * (m + POWER_FLOOR).log10();
            }
        }
    }
    out
}

fn require(
    spec: &StftTensor,
    format: Format,
    expected: Format,
    feature: &'static str,
) -> Result<(), FeatureError> {
    if format != expected {
        return Err(FeatureError::WrongFormat {
            feature,
            expected,
            found: format,
        });
    }
    if spec.n_channels() != 4 {
        return Err(FeatureError::ChannelCount {
            expected: 4,
            found: spec.n_channels(),
        });
    }
    Ok(())
}

/// Mel-band acoustic intensity `(x, y, z)`, shape `(frames, 64, 3)`.
///
/// Per bin `I = Re{conj(W) [X, Y, Z]}` with ACN channels `[W, Y, Z, X]`; bands
/// aggregate bins with the mel weights and are divided by the equally weighted
/// `|W|^2 + (|X|^2 + |Y|^2 + |Z|^2) / 3`.
pub fn intensity_vectors(spec: &StftTensor, format: Format) -> Result<Array3<f64>, FeatureError> {
    require(spec, format, Format::Foa, "intensity vectors")?;
    let fb = mel_filterbank();
    let n_frames = spec.n_frames();
    let mut out = Array3::zeros((n_frames, N_MELS, 3));
    let mut bins = Array2::<f64>::zeros((4, N_BINS));
    for t in 0..n_frames {
        for k in 0..N_BINS {
            let w = spec.data[[t, k, 0]];
            let y = spec.data[[t, k, 1]];
            let z = spec.data[[t, k, 2]];
            let x = spec.data[[t, k, 3]];
            bins[[0, k]] = (w.conj() * x).re;
            bins[[1, k]] = (w.conj() * y).re;
            bins[[2, k]] = (w.conj() * z).re;
            bins[[3, k]] = w.norm_sqr() + (x.norm_sqr() + y.norm_sqr() + z.norm_sqr()) / 3.0;
        }
        let banded = fb.dot(&bins.t());
        for b in 0..N_MELS {
            let norm = banded[[b, 3]] + POWER_FLOOR;
            for d in 0..3 {
                out[[t, b, d]] = banded[[b, d]] / norm;
            }
        }
    }
    Ok(out)
}

/// GCC-PHAT for the six capsule pairs, lags -32..=31, shape `(frames, 64, 6)`.
///
/// Lag index `l` holds delay `l - 32`; a positive delay means the second
/// capsule of the pair receives the signal later than the first.
pub fn gcc_phat(spec: &StftTensor, format: Format) -> Result<Array3<f64>, FeatureError> {
    require(spec, format, Format::Mic, "GCC-PHAT")?;
    let n_frames = spec.n_frames();
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(FFT_SIZE);
    let mut out = Array3::zeros((n_frames, N_LAGS, MIC_PAIRS.len()));
    let mut buf = vec![Complex64::new(0.0, 0.0); FFT_SIZE];
    let half = (N_LAGS / 2) as isize;
    for t in 0..n_frames {
        for (p, &(i, j)) in MIC_PAIRS.iter().enumerate() {
            for k in 0..N_BINS {
                let cross = spec.data[[t, k, i]].conj() * spec.data[[t, k, j]];
                let r = cross / (cross.norm() + PHAT_FLOOR);
                buf[k] = r;
                if k > 0 && k < FFT_SIZE - k {
                    buf[FFT_SIZE - k] = r.conj();
                }
            }
            ifft.process(&mut buf);
            for l in 0..N_LAGS {
                let lag = l as isize - half;
                let idx = lag.rem_euclid(FFT_SIZE as isize) as usize;
                out[[t, l, p]] = buf[idx].re / FFT_SIZE as f64;
            }
        }
    }
    Ok(out)
}

pub fn extract(audio: &Audio, format: Format) -> Result<FeatureStack, FeatureError> {
    if audio.n_channels() != 4 {
        return Err(FeatureError::ChannelCount {
            expected: 4,
            found: audio.n_channels(),
        });
    }
    let spec = stft(audio)?;
    let mel = log_mel(&spec);
    let extra = match format {
        Format::Foa => intensity_vectors(&spec, format)?,
        Format::Mic => gcc_phat(&spec, format)?,
    };
    let data = ndarray::concatenate(Axis(2), &[mel.view(), extra.view()])
        .expect("feature blocks share frame and band axes");
    Ok(FeatureStack { format, data })
}

/// Direction of the intensity vectors summed over all frames and bands.
pub fn intensity_direction(intensity: &Array3<f64>) -> Option<Doa> {
    let sum = intensity.sum_axis(Axis(0)).sum_axis(Axis(0));
    Doa::from_vector([sum[0], sum[1], sum[2]]).ok()
}

/// Peak lag (in samples) of each pair's frame-averaged GCC-PHAT.
pub fn gcc_peak_lags(gcc: &Array3<f64>) -> Vec<isize> {
    let mean = gcc.sum_axis(Axis(0));
    (0..mean.dim().1)
        .map(|p| {
            let col = mean.column(p);
            let best = (0..col.len())
                .max_by(|&a, &b| col[a].total_cmp(&col[b]))
                .unwrap_or(N_LAGS / 2);
            best as isize - (N_LAGS / 2) as isize
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(seed: u64, channels: usize, n: usize) -> Audio {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Audio {
            sample_rate: SAMPLE_RATE,
            channels: (0..channels)
                .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
                .collect(),
        }
    }

    #[test]
    fn frame_count_for_one_minute() {
        assert_eq!(n_stft_frames(1_440_000), 2999);
        assert_eq!(n_stft_frames(959), 0);
        assert_eq!(n_stft_frames(960), 1);
        let short = Audio::zeros(SAMPLE_RATE, 4, 500);
        assert_eq!(stft(&short), Err(FeatureError::TooShort(500)));
    }

    #[test]
    fn tone_peaks_at_expected_bin() {
        let n = 4800;
        let tone: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / 24_000.0).sin())
            .collect();
        let spec = stft(&Audio::mono(SAMPLE_RATE, tone)).unwrap();
        for t in 0..spec.n_frames() {
            let peak = (0..N_BINS)
                .max_by(|&a, &b| {
                    spec.data[[t, a, 0]]
                        .norm()
                        .total_cmp(&spec.data[[t, b, 0]].norm())
                })
                .unwrap();
            assert_eq!(peak, 43);
        }
    }

    #[test]
    fn parseval_per_frame() {
        let audio = noise(1, 1, 3000);
        let spec = stft(&audio).unwrap();
        let window = hann_window();
        for t in 0..spec.n_frames() {
            let time: f64 = audio.channels[0][t * HOP_LEN..t * HOP_LEN + WINDOW_LEN]
                .iter()
                .zip(window)
                .map(|(x, w)| (x * w).powi(2))
                .sum();
            let bins: f64 = (0..N_BINS)
                .map(|k| {
                    let e = spec.data[[t, k, 0]].norm_sqr();
                    if k == 0 || k == N_BINS - 1 {
                        e
                    } else {
                        2.0 * e
                    }
                })
                .sum::<f64>()
                / FFT_SIZE as f64;
            assert!(((bins - time) / time).abs() < 1e-6);
        }
    }

    #[test]
    fn silence_hits_the_floor() {
        let spec = stft(&Audio::zeros(SAMPLE_RATE, 4, 2400)).unwrap();
        let mel = log_mel(&spec);
        assert!(mel.iter().all(|&v| (v + 100.0).abs() < 1e-9));
    }

    #[test]
    fn white_noise_fills_every_band() {
        let spec = stft(&noise(2, 4, 9600)).unwrap();
        let fb = mel_filterbank();
        for t in 0..spec.n_frames() {
            let power = spec.data.slice(s![t, .., 0]).mapv(|z| z.norm_sqr());
            let mel: ndarray::Array1<f64> = fb.dot(&power);
            assert!(mel.iter().all(|m| *m > 0.0 && m.is_finite()));
        }
        assert!(fb.rows().into_iter().all(|r| r.sum() > 0.0));
    }

    #[test]
    fn tone_band_dominates_and_matches_dense_product() {
        let n = 4800;
        let f0 = 2500.0;
        let tone: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * f0 * i as f64 / 24_000.0).sin())
            .collect();
        let spec = stft(&Audio::mono(SAMPLE_RATE, tone)).unwrap();
        let mel = log_mel(&spec);
        let fb = mel_filterbank();
        // dense oracle: explicit triple loop over bands and bins
        for t in 0..spec.n_frames() {
            let mut best = (0, f64::MIN);
            for b in 0..N_MELS {
                let mut acc = 0.0;
                for k in 0..N_BINS {
                    acc += fb[[b, k]] * spec.data[[t, k, 0]].norm_sqr();
                }
                let expected = 10.0 * (acc + POWER_FLOOR).log10();
                assert!((mel[[t, b, 0]] - expected).abs() < 1e-6);
                if acc > best.1 {
                    best = (b, acc);
                }
            }
            let (lo, hi) = (mel_to_hz(hz_to_mel(12_000.0) * best.0 as f64 / 65.0),
                mel_to_hz(hz_to_mel(12_000.0) * (best.0 + 2) as f64 / 65.0));
            assert!(lo < f0 && f0 < hi, "band {} [{lo}, {hi}]", best.0);
        }
    }

    #[test]
    fn omni_only_field_has_no_intensity() {
        let mut audio = noise(3, 4, 4800);
        for c in 1..4 {
            audio.channels[c].iter_mut().for_each(|x| *x = 0.0);
        }
        let iv = intensity_vectors(&stft(&audio).unwrap(), Format::Foa).unwrap();
        assert!(iv.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn opposite_plane_waves_cancel() {
        let n = 4800;
        let s = noise(4, 1, n).channels.remove(0);
        // equal sources from +x and -x: X channel cancels, W doubles
        let audio = Audio {
            sample_rate: SAMPLE_RATE,
            channels: vec![
                s.iter().map(|v| 2.0 * v).collect(),
                vec![0.0; n],
                vec![0.0; n],
                s.iter().map(|v| v - v).collect(),
            ],
        };
        let iv = intensity_vectors(&stft(&audio).unwrap(), Format::Foa).unwrap();
        assert!(iv.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn plane_wave_intensity_points_at_source() {
        let n = 4800;
        let s = noise(5, 1, n).channels.remove(0);
        let d = Doa::new(-70.0, 25.0).unwrap();
        let g = crate::spatial::sh::real_sh(1, d);
        let audio = Audio {
            sample_rate: SAMPLE_RATE,
            channels: g.iter().map(|gc| s.iter().map(|v| v * gc).collect()).collect(),
        };
        let iv = intensity_vectors(&stft(&audio).unwrap(), Format::Foa).unwrap();
        for t in 0..iv.dim().0 {
            for b in 0..N_MELS {
                let v = [iv[[t, b, 0]], iv[[t, b, 1]], iv[[t, b, 2]]];
                let est = Doa::from_vector(v).unwrap();
                assert!(crate::model::angular_distance(est, d) < 1.0);
            }
        }
    }

    #[test]
    fn wrong_format_is_rejected() {
        let spec = stft(&Audio::zeros(SAMPLE_RATE, 4, 960)).unwrap();
        assert!(matches!(
            intensity_vectors(&spec, Format::Mic),
            Err(FeatureError::WrongFormat { .. })
        ));
        assert!(matches!(gcc_phat(&spec, Format::Foa), Err(FeatureError::WrongFormat { .. })));
    }

    #[test]
    fn gcc_identical_channels_peak_at_zero() {
        let s = noise(6, 1, 4800).channels.remove(0);
        let audio = Audio {
            sample_rate: SAMPLE_RATE,
            channels: vec![s.clone(), s.clone(), s.clone(), s],
        };
        let gcc = gcc_phat(&stft(&audio).unwrap(), Format::Mic).unwrap();
        for t in 0..gcc.dim().0 {
            for p in 0..6 {
                assert!((gcc[[t, 32, p]] - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn gcc_integer_delay_sign() {
        let n = 9600;
        let s = noise(7, 1, n + 5).channels.remove(0);
        let first: Vec<f64> = s[5..].to_vec();
        let delayed: Vec<f64> = s[..n].to_vec();
        let audio = Audio {
            sample_rate: SAMPLE_RATE,
            channels: vec![first.clone(), delayed, first.clone(), first],
        };
        let gcc = gcc_phat(&stft(&audio).unwrap(), Format::Mic).unwrap();
        let lags = gcc_peak_lags(&gcc);
        // pair (0, 1): channel 1 lags channel 0 by 5 samples
        assert_eq!(lags[0], 5);
        // pair (1, 2): channel 2 leads channel 1
        assert_eq!(lags[3], -5);
        assert_eq!(lags[1], 0);
    }

    #[test]
    fn gcc_of_independent_noise_has_no_dominant_lag() {
        let audio = noise(8, 4, 24_000);
        let gcc = gcc_phat(&stft(&audio).unwrap(), Format::Mic).unwrap();
        let mut ratios = Vec::new();
        for t in 0..gcc.dim().0 {
            for p in 0..6 {
                let lagv = gcc.slice(s![t, .., p]);
                let rms = (lagv.iter().map(|v| v * v).sum::<f64>() / N_LAGS as f64).sqrt();
                let max = lagv.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                ratios.push(max / rms);
            }
        }
        ratios.sort_by(f64::total_cmp);
        assert!(ratios[ratios.len() / 2] < 3.0, "median {}", ratios[ratios.len() / 2]);
    }

    #[test]
    fn extract_shapes() {
        let audio = noise(9, 4, 24_000);
        let foa = extract(&audio, Format::Foa).unwrap();
        let mic = extract(&audio, Format::Mic).unwrap();
        assert_eq!(foa.data.dim(), (49, 64, 7));
        assert_eq!(mic.data.dim(), (49, 64, 10));
    }

    #[test]
    fn one_hop_delay_shifts_one_frame() {
        let audio = noise(10, 4, 9600);
        let mut shifted = Audio::zeros(SAMPLE_RATE, 4, 9600 + HOP_LEN);
        shifted.add_at(&audio, HOP_LEN);
        for format in [Format::Foa, Format::Mic] {
            let a = extract(&audio, format).unwrap();
            let b = extract(&shifted, format).unwrap();
            for t in 0..a.n_frames() {
                for (x, y) in a.data.slice(s![t, .., ..]).iter().zip(b.data.slice(s![t + 1, .., ..])) {
                    assert!((x - y).abs() < 1e-6);
                }
            }
        }
    }
}
