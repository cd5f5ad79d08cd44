use std::collections::{BTreeMap, HashMap};

use super::{render_moving, render_static, IrBank, MovingPath, SpatialError, Trajectory, DEFAULT_HOP_S};
use crate::audio::Audio;
use crate::model::{ClassSet, Doa, Format, LabelFrameSet, Motion, SceneEvent, SceneScript, LABEL_HOP_S};

/// Mono event samples keyed by sample id.
#[derive(Debug, Clone, Default)]
pub struct SampleStore {
    samples: HashMap<String, Audio>,
}

impl SampleStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, sample_id: impl Into<String>, audio: Audio) -> Result<(), SpatialError> {
        if audio.n_channels() != 1 {
            return Err(SpatialError::ChannelCount {
                expected: 1,
                found: audio.n_channels(),
            });
        }
        self.samples.insert(sample_id.into(), audio);
        Ok(())
    }

    pub fn get(&self, sample_id: &str) -> Result<&Audio, SpatialError> {
        self.samples
            .get(sample_id)
            .ok_or_else(|| SpatialError::MissingSample(sample_id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// One output format: its IR bank and optional ambience recording.
#[derive(Debug, Clone, Copy)]
pub struct FormatInput<'a> {
    pub bank: &'a IrBank,
    pub ambience: Option<&'a Audio>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedScene {
    pub recordings: BTreeMap<Format, Audio>,
    pub labels: LabelFrameSet,
    /// Gain applied to each format's ambience.
    pub ambience_gain: BTreeMap<Format, f64>,
    /// SNR measured on the mixed stems; `None` without ambience or target activity.
    pub snr_db: BTreeMap<Format, Option<f64>>,
}

fn moving_path(
    trajectories: &[Trajectory],
    trajectory_id: usize,
    start_index: usize,
    direction: i8,
    needed_deg: f64,
) -> Result<(MovingPath, &Trajectory), SpatialError> {
    let traj = trajectories
        .get(trajectory_id)
        .ok_or(SpatialError::MissingIr {
            trajectory: trajectory_id,
            index: start_index,
        })?;
    Ok((MovingPath::along(traj, start_index, direction, needed_deg)?, traj))
}

fn doa_on_path(path: &MovingPath, traj: &Trajectory, angle_deg: f64) -> Doa {
    let f = path.fractional_index(angle_deg);
    let j = (f.floor() as usize).min(path.nodes.len() - 1);
    let w = f - j as f64;
    let here = traj.nodes[path.nodes[j]].doa;
    if w == 0.0 || j + 1 >= path.nodes.len() {
        return here;
    }
    let a = here.to_unit_vector();
    let b = traj.nodes[path.nodes[j + 1]].doa.to_unit_vector();
    let v: [f64; 3] = std::array::from_fn(|k| (1.0 - w) * a[k] + w * b[k]);
    // adjacent nodes are at most 2 degrees apart, so v is never near zero
    Doa::from_vector(v).unwrap_or(here)
}

/// Resolves an event's motion into a direction-of-time function.
enum Track<'a> {
    Fixed(Doa),
    Path {
        path: MovingPath,
        traj: &'a Trajectory,
        onset: f64,
        duration: f64,
        speed: f64,
    },
}

impl<'a> Track<'a> {
    fn new(event: &SceneEvent, trajectories: &'a [Trajectory]) -> Result<Self, SpatialError> {
        match event.motion.as_ref().ok_or(SpatialError::Unassigned(event.id))? {
            Motion::Static { doa, .. } => Ok(Track::Fixed(*doa)),
            Motion::Moving {
                trajectory_id,
                start_index,
                speed,
                direction,
            } => {
                let speed = speed.deg_per_s();
                let (path, traj) = moving_path(
                    trajectories,
                    *trajectory_id,
                    *start_index,
                    *direction,
                    speed * event.duration(),
                )?;
                Ok(Track::Path {
                    path,
                    traj,
                    onset: event.onset,
                    duration: event.duration(),
                    speed,
                })
            }
        }
    }

    fn at(&self, t: f64) -> Doa {
        match self {
            Track::Fixed(d) => *d,
            Track::Path {
                path,
                traj,
                onset,
                duration,
                speed,
            } => doa_on_path(path, traj, speed * (t - onset).clamp(0.0, *duration)),
        }
    }
}

/// Direction of an assigned event `t` seconds into the recording.
pub fn event_doa_at(
    event: &SceneEvent,
    trajectories: &[Trajectory],
    t: f64,
) -> Result<Doa, SpatialError> {
    Ok(Track::new(event, trajectories)?.at(t))
}

/// Reference labels for an assigned script.
pub fn label_script(
    script: &SceneScript,
    classes: &ClassSet,
    trajectories: &[Trajectory],
) -> Result<LabelFrameSet, SpatialError> {
    let tracks: HashMap<usize, Track<'_>> = script
        .targets()
        .map(|e| Ok((e.id, Track::new(e, trajectories)?)))
        .collect::<Result<_, SpatialError>>()?;
    Ok(LabelFrameSet::from_script(script, classes, |e, t| {
        tracks[&e.id].at(t)
    })?)
}

/// Renders one event; returns the onset sample and the spatialised audio.
pub fn render_event(
    event: &SceneEvent,
    store: &SampleStore,
    bank: &IrBank,
) -> Result<Option<(usize, Audio)>, SpatialError> {
    let fs = bank.sample_rate as f64;
    let sample = store.get(&event.sample_id)?;
    if sample.sample_rate != bank.sample_rate {
        return Err(SpatialError::SampleRate {
            expected: bank.sample_rate,
            found: sample.sample_rate,
        });
    }
    let start = (event.onset * fs).round() as usize;
    let stop = (event.offset * fs).round() as usize;
    let n = stop.saturating_sub(start).min(sample.len());
    if n == 0 {
        return Ok(None);
    }
    let signal = sample.clone().truncated(n);
    let rendered = match event.motion.as_ref().ok_or(SpatialError::Unassigned(event.id))? {
        Motion::Static { node, .. } => render_static(&signal, bank.ir(*node)?)?,
        Motion::Moving {
            trajectory_id,
            start_index,
            speed,
            direction,
        } => {
            let needed = speed.deg_per_s() * (n - 1) as f64 / fs;
            let (path, _) = moving_path(
                &bank.trajectories,
                *trajectory_id,
                *start_index,
                *direction,
                needed,
            )?;
            let irs = path
                .nodes
                .iter()
                .map(|&index| {
                    bank.ir(crate::model::NodeRef {
                        trajectory: *trajectory_id,
                        index,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            render_moving(&signal, &irs, &path, speed.deg_per_s(), DEFAULT_HOP_S)?
        }
    };
    Ok(Some((start, rendered)))
}

fn active_ranges(labels: &LabelFrameSet, fs: u32, total: usize) -> Vec<(usize, usize)> {
    let hop = (LABEL_HOP_S * fs as f64).round() as usize;
    labels
        .frames()
        .filter(|(_, row)| !row.is_empty())
        .map(|(k, _)| ((k * hop).min(total), ((k + 1) * hop).min(total)))
        .filter(|(a, b)| a < b)
        .collect()
}

fn energy_in(audio: &Audio, ranges: &[(usize, usize)]) -> f64 {
    audio
        .channels
        .iter()
        .map(|ch| {
            ranges
                .iter()
                .map(|&(a, b)| ch[a..b].iter().map(|x| x * x).sum::<f64>())
                .sum::<f64>()
        })
        .sum()
}

/// SNR of `targets` against `noise` over label frames with at least one active target.
pub fn measure_snr_db(targets: &Audio, noise: &Audio, labels: &LabelFrameSet) -> Option<f64> {
    let ranges = active_ranges(labels, targets.sample_rate, targets.len().min(noise.len()));
    let signal = energy_in(targets, &ranges);
    let noise = energy_in(noise, &ranges);
    (signal > 0.0 && noise > 0.0).then(|| 10.0 * (signal / noise).log10())
}

fn fit_ambience(ambience: &Audio, total: usize, sample_rate: u32) -> Result<Audio, SpatialError> {
    if ambience.sample_rate != sample_rate {
        return Err(SpatialError::SampleRate {
            expected: sample_rate,
            found: ambience.sample_rate,
        });
    }
    if ambience.n_channels() != 4 {
        return Err(SpatialError::ChannelCount {
            expected: 4,
            found: ambience.n_channels(),
        });
    }
    if ambience.is_empty() {
        return Err(SpatialError::InvalidParameter("empty ambience recording".into()));
    }
    // shorter recordings are looped
    Ok(Audio {
        sample_rate,
        channels: ambience
            .channels
            .iter()
            .map(|ch| ch.iter().copied().cycle().take(total).collect())
            .collect(),
    })
}

/// Renders every event of `script` into each requested format and adds ambience.
///
/// Ambience is scaled so that target energy over ambience energy, both
/// measured over label frames with an active target, equals `script.snr_db`.
/// Interferers are rendered into the audio but never annotated.
pub fn mix_scene(
    script: &SceneScript,
    store: &SampleStore,
    classes: &ClassSet,
    inputs: &[FormatInput<'_>],
) -> Result<RenderedScene, SpatialError> {
    let first = inputs
        .first()
        .ok_or_else(|| SpatialError::InvalidParameter("no output formats requested".into()))?;
    let labels = label_script(script, classes, &first.bank.trajectories)?;
    let mut recordings = BTreeMap::new();
    let mut ambience_gain = BTreeMap::new();
    let mut snr_db = BTreeMap::new();
    for input in inputs {
        let bank = input.bank;
        bank.validate()?;
        let total = (script.duration_s * bank.sample_rate as f64).round() as usize;
        let mut targets = Audio::zeros(bank.sample_rate, 4, total);
        let mut interferers = Audio::zeros(bank.sample_rate, 4, total);
        for event in &script.events {
            if let Some((start, audio)) = render_event(event, store, bank)? {
                if event.is_interferer {
                    interferers.add_at(&audio, start);
                } else {
                    targets.add_at(&audio, start);
                }
            }
        }
        let mut mix = targets.clone();
        mix.add_at(&interferers, 0);
        let mut gain = 0.0;
        let mut measured = None;
        if let Some(amb) = input.ambience {
            let mut noise = fit_ambience(amb, total, bank.sample_rate)?;
            let ranges = active_ranges(&labels, bank.sample_rate, total);
            let e_targets = energy_in(&targets, &ranges);
            let e_noise = energy_in(&noise, &ranges);
            gain = if e_targets > 0.0 && e_noise > 0.0 {
                (e_targets / (e_noise * 10f64.powf(script.snr_db / 10.0))).sqrt()
            } else {
                1.0
            };
            noise.scale(gain);
            measured = measure_snr_db(&targets, &noise, &labels);
            mix.add_at(&noise, 0);
        }
        recordings.insert(bank.format, mix);
        ambience_gain.insert(bank.format, gain);
        snr_db.insert(bank.format, measured);
    }
    Ok(RenderedScene {
        recordings,
        labels,
        ambience_gain,
        snr_db,
    })
}
