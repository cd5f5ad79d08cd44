use super::{MovingPath, SpatialError};
use crate::audio::{convolve_many, convolve_window, Audio};

/// IR update interval for moving sources.
pub const DEFAULT_HOP_S: f64 = 0.02;

fn check_inputs(signal: &Audio, irs: &[&Audio]) -> Result<(), SpatialError> {
    if signal.n_channels() != 1 {
        return Err(SpatialError::ChannelCount {
            expected: 1,
            found: signal.n_channels(),
        });
    }
    if signal.is_empty() {
        return Err(SpatialError::EmptySignal);
    }
    for ir in irs {
        if ir.sample_rate != signal.sample_rate {
            return Err(SpatialError::SampleRate {
                expected: signal.sample_rate,
                found: ir.sample_rate,
            });
        }
        if ir.is_empty() {
            return Err(SpatialError::InvalidParameter("empty impulse response".into()));
        }
    }
    Ok(())
}

/// Convolves a mono signal with a multichannel IR. Output length is `N + L - 1`.
pub fn render_static(signal: &Audio, ir: &Audio) -> Result<Audio, SpatialError> {
    check_inputs(signal, &[ir])?;
    let kernels: Vec<&[f64]> = ir.channels.iter().map(Vec::as_slice).collect();
    Ok(Audio {
        sample_rate: signal.sample_rate,
        channels: convolve_many(&signal.channels[0], &kernels),
    })
}

/// Time-variant convolution along a trajectory.
///
/// `irs[i]` is the response at `path.nodes[i]`. The source position advances
/// at `speed_deg_per_s`; it is sampled every `hop_s` and linearly interpolated
/// in between, so each output sample mixes the two nearest node IRs with weights
/// that vary continuously in time. After the signal ends the position stays at
/// its final value while the reverberant tail decays.
pub fn render_moving(
    signal: &Audio,
    irs: &[&Audio],
    path: &MovingPath,
    speed_deg_per_s: f64,
    hop_s: f64,
) -> Result<Audio, SpatialError> {
    check_inputs(signal, irs)?;
    if irs.is_empty() || irs.len() != path.nodes.len() {
        return Err(SpatialError::InvalidParameter(format!(
            "{} IRs for a path of {} nodes",
            irs.len(),
            path.nodes.len()
        )));
    }
    if !(hop_s > 0.0) || !(speed_deg_per_s >= 0.0) {
        return Err(SpatialError::InvalidParameter(format!(
            "hop {hop_s} s, speed {speed_deg_per_s} deg/s"
        )));
    }
    if irs.len() == 1 {
        return render_static(signal, irs[0]);
    }
    let fs = signal.sample_rate as f64;
    let n_signal = signal.len();
    let needed = speed_deg_per_s * (n_signal - 1) as f64 / fs;
    let available = *path.arc_deg.last().expect("non-empty path");
    if needed > available + 1e-6 {
        return Err(SpatialError::TrajectoryTooShort {
            needed_deg: needed,
            available_deg: available,
        });
    }
    let n_channels = irs[0].n_channels();
    if let Some(bad) = irs.iter().find(|ir| ir.n_channels() != n_channels) {
        return Err(SpatialError::ChannelCount {
            expected: n_channels,
            found: bad.n_channels(),
        });
    }
    let ir_len = irs.iter().map(|ir| ir.len()).max().expect("non-empty");
    let out_len = n_signal + ir_len - 1;
    let position = position_track(path, speed_deg_per_s, fs, hop_s, n_signal, out_len);

    let x = &signal.channels[0];
    let mut out = Audio::zeros(signal.sample_rate, n_channels, out_len);
    for (i, ir) in irs.iter().enumerate() {
        let node = i as f64;
        // position is non-decreasing, so the support of each node's weight is contiguous
        let start = position.partition_point(|&p| p <= node - 1.0);
        let end = position.partition_point(|&p| p < node + 1.0);
        if start >= end {
            continue;
        }
        let kernels: Vec<&[f64]> = ir.channels.iter().map(Vec::as_slice).collect();
        let partial = convolve_window(x, &kernels, start, end);
        for (dst, part) in out.channels.iter_mut().zip(&partial) {
            for (n, v) in (start..end).zip(part) {
                let w = 1.0 - (position[n] - node).abs();
                dst[n] += w * v;
            }
        }
    }
    Ok(out)
}

/// Fractional node index for every output sample.
pub(crate) fn position_track(
    path: &MovingPath,
    speed_deg_per_s: f64,
    fs: f64,
    hop_s: f64,
    n_signal: usize,
    out_len: usize,
) -> Vec<f64> {
    let hop = ((hop_s * fs).round() as usize).max(1);
    let at = |n: usize| {
        let t = n.min(n_signal - 1) as f64 / fs;
        path.fractional_index(speed_deg_per_s * t)
    };
    let mut out = Vec::with_capacity(out_len);
    let mut b = 0;
    while out.len() < out_len {
        let (p0, p1) = (at(b * hop), at((b + 1) * hop));
        for j in 0..hop {
            if out.len() == out_len {
                break;
            }
            out.push(p0 + (p1 - p0) * j as f64 / hop as f64);
        }
        b += 1;
    }
    out
}
