use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{anechoic_ir, ArrayKind, ArrayModel, IrBank, SpatialError, Trajectory};
use crate::audio::Audio;
use crate::model::{Doa, Format};
use crate::SAMPLE_RATE;

/// Statistical room response parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReverbParams {
    pub rt60_s: f64,
    /// Direct-to-tail energy ratio; `f64::INFINITY` disables the tail.
    pub drr_db: f64,
}

/// Amplitude envelope of the tail `t` seconds after its onset: -60 dB in energy at `rt60_s`.
pub fn decay_envelope(t: f64, rt60_s: f64) -> f64 {
    10f64.powf(-3.0 * t / rt60_s)
}

/// Direct path plus an exponentially decaying diffuse noise tail.
///
/// The tail starts one sample after the direct arrival and lasts `rt60_s`.
/// For FOA the tail has the covariance of a diffuse SN3D field (unit W,
/// one third in each of X, Y, Z); for a capsule array each channel is
/// independent. Its level is set so that direct energy over tail energy
/// equals `drr_db`.
pub fn synth_reverb_ir(
    params: ReverbParams,
    direct_doa: Doa,
    distance_m: f64,
    array: &ArrayModel,
    seed: u64,
) -> Result<Audio, SpatialError> {
    if !(params.rt60_s > 0.0) {
        return Err(SpatialError::InvalidParameter(format!(
            "rt60 {} s must be positive",
            params.rt60_s
        )));
    }
    let mut ir = anechoic_ir(direct_doa, distance_m, array)?;
    if params.drr_db == f64::INFINITY {
        return Ok(ir);
    }
    let fs = SAMPLE_RATE as f64;
    let onset = (distance_m / crate::SPEED_OF_SOUND * fs).round() as usize + 1;
    let tail_len = (params.rt60_s * fs).ceil() as usize;
    let std: [f64; 4] = match array.kind {
        ArrayKind::FoaIdeal => {
            let s = (1.0f64 / 3.0).sqrt();
            [1.0, s, s, s]
        }
        ArrayKind::Tetrahedral => [1.0; 4],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tail = vec![vec![0.0; tail_len]; 4];
    for n in 0..tail_len {
        let env = decay_envelope(n as f64 / fs, params.rt60_s);
        for (ch, s) in tail.iter_mut().zip(std) {
            let z: f64 = rng.sample(StandardNormal);
            ch[n] = env * s * z;
        }
    }
    let direct_energy = ir.energy();
    let tail_energy: f64 = tail.iter().flatten().map(|x| x * x).sum();
    let gain = (direct_energy / (tail_energy * 10f64.powf(params.drr_db / 10.0))).sqrt();
    let len = ir.len().max(onset + tail_len);
    for (ch, t) in ir.channels.iter_mut().zip(&tail) {
        ch.resize(len, 0.0);
        for (d, x) in ch[onset..].iter_mut().zip(t) {
            *d += gain * x;
        }
    }
    Ok(ir)
}

/// Synthetic bank for one room: every trajectory node gets a [`synth_reverb_ir`].
pub fn synth_bank(
    room_id: &str,
    format: Format,
    trajectories: Vec<Trajectory>,
    params: ReverbParams,
    seed: u64,
) -> Result<IrBank, SpatialError> {
    let array = ArrayModel::for_format(format);
    let skeleton = IrBank {
        room_id: room_id.to_string(),
        format,
        sample_rate: SAMPLE_RATE,
        rt60_s: Some(params.rt60_s),
        irs: trajectories.iter().map(|_| Vec::new()).collect(),
        trajectories,
    };
    let mut counter = 0u64;
    let bank = skeleton.map_irs(format, Some(params.rt60_s), |_, node| {
        counter += 1;
        let node_seed = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(counter);
        synth_reverb_ir(params, node.doa, node.distance_m, &array, node_seed)
    })?;
    bank.validate()?;
    Ok(bank)
}
