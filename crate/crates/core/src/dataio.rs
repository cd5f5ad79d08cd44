//! On-disk formats: WAV audio, label CSVs, IR bank directories, tensor dumps,
//! run configuration and the sample corpus manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::accdoa::AccdoaTensor;
use crate::audio::Audio;
use crate::features::{FeatureStack, N_MELS};
use crate::model::{
    ClassSet, Doa, Format, LabelEntry, LabelFrameSet, ModelError, SNR_RANGE_DB,
};
use crate::spatial::{
    IrBank, SampleInfo, SamplePool, SampleStore, SpatialError, Trajectory, TrajectoryNode,
    TrajectoryShape,
};
use crate::SAMPLE_RATE;

pub const BANK_MANIFEST: &str = "index.toml";
pub const BANK_MANIFEST_VERSION: u32 = 1;
pub const SAMPLE_MANIFEST: &str = "samples.csv";
pub const TENSOR_MAGIC: &[u8; 4] = b"SKT1";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },
    #[error("{}: expected {expected} channels, found {found}", path.display())]
    ChannelCount {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("{}: expected {expected} Hz, found {found} Hz", path.display())]
    SampleRate {
        path: PathBuf,
        expected: u32,
        found: u32,
    },
    #[error("{}:{line}: {message}", path.display())]
    Row {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{}: {message}", path.display())]
    Invalid { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Toml {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{}: {source}", path.display())]
    Spatial {
        path: PathBuf,
        #[source]
        source: SpatialError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn invalid(path: &Path, message: impl Into<String>) -> DataError {
    DataError::Invalid {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

// ---------------------------------------------------------------- audio

/// Writes interleaved 32-bit float WAV with any channel count.
pub fn write_wav(path: &Path, audio: &Audio) -> Result<(), DataError> {
    let wav_err = |source| DataError::Wav {
        path: path.to_path_buf(),
        source,
    };
    let n_channels = u16::try_from(audio.n_channels())
        .map_err(|_| invalid(path, format!("{} channels", audio.n_channels())))?;
    let spec = hound::WavSpec {
        channels: n_channels,
        sample_rate: audio.sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    for n in 0..audio.len() {
        for ch in &audio.channels {
            writer.write_sample(ch[n] as f32).map_err(wav_err)?;
        }
    }
    writer.finalize().map_err(wav_err)
}

/// Reads float or integer PCM WAV; integers are scaled to `[-1, 1)`.
pub fn read_wav(path: &Path) -> Result<Audio, DataError> {
    let wav_err = |source| DataError::Wav {
        path: path.to_path_buf(),
        source,
    };
    let reader = hound::WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    let n_channels = spec.channels as usize;
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(wav_err)?,
        hound::SampleFormat::Int => {
            let scale = 2f64.powi(spec.bits_per_sample as i32 - 1);
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<Result<_, _>>()
                .map_err(wav_err)?
        }
    };
    if n_channels == 0 || !interleaved.len().is_multiple_of(n_channels) {
        return Err(invalid(path, "sample count is not a multiple of the channel count"));
    }
    let mut channels = vec![Vec::with_capacity(interleaved.len() / n_channels); n_channels];
    for frame in interleaved.chunks_exact(n_channels) {
        for (ch, v) in channels.iter_mut().zip(frame) {
            ch.push(*v);
        }
    }
    Ok(Audio {
        sample_rate: spec.sample_rate,
        channels,
    })
}

fn check_layout(path: &Path, audio: &Audio, channels: usize) -> Result<(), DataError> {
    if audio.n_channels() != channels {
        return Err(DataError::ChannelCount {
            path: path.to_path_buf(),
            expected: channels,
            found: audio.n_channels(),
        });
    }
    if audio.sample_rate != SAMPLE_RATE {
        return Err(DataError::SampleRate {
            path: path.to_path_buf(),
            expected: SAMPLE_RATE,
            found: audio.sample_rate,
        });
    }
    Ok(())
}

/// Writes a 4-channel 24 kHz recording.
pub fn write_audio(path: &Path, audio: &Audio) -> Result<(), DataError> {
    check_layout(path, audio, 4)?;
    write_wav(path, audio)
}

/// Reads a 4-channel 24 kHz recording.
pub fn read_audio(path: &Path) -> Result<Audio, DataError> {
    let audio = read_wav(path)?;
    check_layout(path, &audio, 4)?;
    Ok(audio)
}

/// Reads a mono 24 kHz event sample.
pub fn read_mono(path: &Path) -> Result<Audio, DataError> {
    let audio = read_wav(path)?;
    check_layout(path, &audio, 1)?;
    Ok(audio)
}

// ---------------------------------------------------------------- metadata

/// Renders labels as `frame,class,track,azimuth,elevation` rows at integer degrees.
pub fn format_metadata(labels: &LabelFrameSet) -> String {
    let mut out = String::new();
    let mut rows = Vec::new();
    for (k, row) in labels.frames() {
        rows.clear();
        for e in row {
            let az = crate::model::wrap_azimuth(e.doa.azimuth.round()) as i64;
            let el = e.doa.elevation.round() as i64;
            rows.push((e.class_index, e.track_id, az, el));
        }
        rows.sort();
        for (c, t, az, el) in &rows {
            out.push_str(&format!("{k},{c},{t},{az},{el}\n"));
        }
    }
    out
}

pub fn parse_metadata(path: &Path, text: &str) -> Result<LabelFrameSet, DataError> {
    let mut entries = Vec::new();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let row_err = |message: String| DataError::Row {
            path: path.to_path_buf(),
            line,
            message,
        };
        let record = record.map_err(|e| row_err(e.to_string()))?;
        if record.len() != 5 {
            return Err(row_err(format!("expected 5 columns, found {}", record.len())));
        }
        let mut v = [0i64; 5];
        for (slot, field) in v.iter_mut().zip(record.iter()) {
            *slot = field
                .trim()
                .parse()
                .map_err(|_| row_err(format!("{field:?} is not an integer")))?;
        }
        let [frame, class, track, az, el] = v;
        if frame < 0 || class < 0 || track < 0 {
            return Err(row_err("frame, class and track must be non-negative".into()));
        }
        if !(-180..180).contains(&az) {
            return Err(row_err(format!("azimuth {az} outside [-180, 180)")));
        }
        if !(-90..=90).contains(&el) {
            return Err(row_err(format!("elevation {el} outside [-90, 90]")));
        }
        let doa = Doa::new(az as f64, el as f64)?;
        entries.push((
            line,
            frame as usize,
            LabelEntry {
                class_index: class as usize,
                track_id: track as usize,
                doa,
            },
        ));
    }
    let n_frames = entries.iter().map(|e| e.1 + 1).max().unwrap_or(0);
    let mut labels = LabelFrameSet::new(n_frames);
    for (line, frame, entry) in entries {
        labels.insert(frame, entry).map_err(|e| DataError::Row {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
    }
    Ok(labels)
}

pub fn write_metadata(path: &Path, labels: &LabelFrameSet) -> Result<(), DataError> {
    fs::write(path, format_metadata(labels)).map_err(io_err(path))
}

/// Reads a label CSV; the result spans frames up to the last listed one.
pub fn read_metadata(path: &Path) -> Result<LabelFrameSet, DataError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_metadata(path, &text)
}

// ---------------------------------------------------------------- IR banks

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BankManifest {
    version: u32,
    room_id: String,
    format: Format,
    sample_rate: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rt60_s: Option<f64>,
    trajectories: Vec<TrajectoryEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TrajectoryEntry {
    trajectory_id: usize,
    shape: TrajectoryShape,
    ir_file: String,
    /// `[azimuth, elevation, distance]` per node.
    nodes: Vec<[f64; 3]>,
}

/// Writes `index.toml` plus one `4 * nodes`-channel WAV per trajectory.
/// IRs of a trajectory are zero-padded to a common length.
pub fn write_ir_bank(dir: &Path, bank: &IrBank) -> Result<(), DataError> {
    bank.validate().map_err(|source| DataError::Spatial {
        path: dir.to_path_buf(),
        source,
    })?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut entries = Vec::new();
    for (traj, irs) in bank.trajectories.iter().zip(&bank.irs) {
        let ir_file = format!("traj_{:03}.wav", traj.trajectory_id);
        let len = irs.iter().map(Audio::len).max().unwrap_or(0);
        let mut stacked = Audio::zeros(bank.sample_rate, 4 * irs.len(), len);
        for (k, ir) in irs.iter().enumerate() {
            for (c, ch) in ir.channels.iter().enumerate() {
                stacked.channels[4 * k + c][..ch.len()].copy_from_slice(ch);
            }
        }
        write_wav(&dir.join(&ir_file), &stacked)?;
        entries.push(TrajectoryEntry {
            trajectory_id: traj.trajectory_id,
            shape: traj.shape,
            ir_file,
            nodes: traj
                .nodes
                .iter()
                .map(|n| [n.doa.azimuth, n.doa.elevation, n.distance_m])
                .collect(),
        });
    }
    let manifest = BankManifest {
        version: BANK_MANIFEST_VERSION,
        room_id: bank.room_id.clone(),
        format: bank.format,
        sample_rate: bank.sample_rate,
        rt60_s: bank.rt60_s,
        trajectories: entries,
    };
    let path = dir.join(BANK_MANIFEST);
    let text = toml::to_string(&manifest).expect("manifest is TOML-representable");
    fs::write(&path, text).map_err(io_err(&path))
}

pub fn read_ir_bank(dir: &Path) -> Result<IrBank, DataError> {
    let path = dir.join(BANK_MANIFEST);
    if !path.is_file() {
        return Err(invalid(dir, format!("missing bank manifest {BANK_MANIFEST}")));
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: BankManifest = toml::from_str(&text).map_err(|source| DataError::Toml {
        path: path.clone(),
        source,
    })?;
    if manifest.version != BANK_MANIFEST_VERSION {
        return Err(invalid(&path, format!("unsupported manifest version {}", manifest.version)));
    }
    let mut trajectories = Vec::new();
    let mut irs = Vec::new();
    for entry in &manifest.trajectories {
        let nodes = entry
            .nodes
            .iter()
            .map(|&[az, el, distance_m]| {
                Ok(TrajectoryNode {
                    doa: Doa::new(az, el)?,
                    distance_m,
                })
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        let wav_path = dir.join(&entry.ir_file);
        if !wav_path.is_file() {
            return Err(invalid(&wav_path, "IR file listed in manifest is missing"));
        }
        let stacked = read_wav(&wav_path)?;
        if stacked.sample_rate != manifest.sample_rate {
            return Err(DataError::SampleRate {
                path: wav_path,
                expected: manifest.sample_rate,
                found: stacked.sample_rate,
            });
        }
        if stacked.n_channels() != 4 * nodes.len() {
            return Err(invalid(
                &wav_path,
                format!(
                    "manifest lists {} nodes but the file holds {} channels ({} IRs)",
                    nodes.len(),
                    stacked.n_channels(),
                    stacked.n_channels() as f64 / 4.0
                ),
            ));
        }
        let mut channels = stacked.channels.into_iter();
        let node_irs = (0..nodes.len())
            .map(|_| Audio {
                sample_rate: stacked.sample_rate,
                channels: channels.by_ref().take(4).collect(),
            })
            .collect();
        trajectories.push(Trajectory {
            trajectory_id: entry.trajectory_id,
            room_id: manifest.room_id.clone(),
            shape: entry.shape,
            nodes,
        });
        irs.push(node_irs);
    }
    let bank = IrBank {
        room_id: manifest.room_id,
        format: manifest.format,
        sample_rate: manifest.sample_rate,
        rt60_s: manifest.rt60_s,
        trajectories,
        irs,
    };
    bank.validate().map_err(|source| DataError::Spatial { path, source })?;
    Ok(bank)
}

// ---------------------------------------------------------------- tensors

/// Self-describing little-endian f32 tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorDump {
    pub dims: Vec<usize>,
    pub axes: Vec<String>,
    pub data: Vec<f32>,
}

pub fn encode_tensor(t: &TensorDump) -> Result<Vec<u8>, String> {
    if t.dims.len() != t.axes.len() {
        return Err(format!("{} dims but {} axis labels", t.dims.len(), t.axes.len()));
    }
    let count = t
        .dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or("dimension product overflows")?;
    if count != t.data.len() {
        return Err(format!("dims hold {count} values but payload has {}", t.data.len()));
    }
    let u32_of = |v: usize| u32::try_from(v).map_err(|_| format!("{v} does not fit in u32"));
    let mut out = Vec::with_capacity(16 + 4 * count);
    out.extend_from_slice(TENSOR_MAGIC);
    out.extend_from_slice(&u32_of(t.dims.len())?.to_le_bytes());
    for &d in &t.dims {
        out.extend_from_slice(&u32_of(d)?.to_le_bytes());
    }
    for a in &t.axes {
        out.extend_from_slice(&u32_of(a.len())?.to_le_bytes());
        out.extend_from_slice(a.as_bytes());
    }
    for v in &t.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_tensor(bytes: &[u8]) -> Result<TensorDump, String> {
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8], String> {
        let end = pos.checked_add(n).filter(|&e| e <= bytes.len()).ok_or_else(|| {
            format!("truncated header: need {n} bytes at offset {pos}, file has {}", bytes.len())
        })?;
        let s = &bytes[pos..end];
        pos = end;
        Ok(s)
    };
    if take(4)? != TENSOR_MAGIC {
        return Err("bad magic, not a tensor dump".into());
    }
    let read_u32 = |s: &[u8]| u32::from_le_bytes(s.try_into().expect("4 bytes")) as usize;
    let rank = read_u32(take(4)?);
    let mut dims = Vec::with_capacity(rank.min(16));
    for _ in 0..rank {
        dims.push(read_u32(take(4)?));
    }
    let mut axes = Vec::with_capacity(rank.min(16));
    for _ in 0..rank {
        let len = read_u32(take(4)?);
        let label = std::str::from_utf8(take(len)?).map_err(|_| "axis label is not UTF-8")?;
        axes.push(label.to_string());
    }
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or("dimension product overflows")?;
    let payload = count.checked_mul(4).ok_or("payload size overflows")?;
    let rest = bytes.len() - pos;
    if rest != payload {
        return Err(format!("payload length {rest} bytes, header implies {payload}"));
    }
    let data = bytes[pos..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok(TensorDump { dims, axes, data })
}

pub fn write_tensor(path: &Path, t: &TensorDump) -> Result<(), DataError> {
    let bytes = encode_tensor(t).map_err(|m| invalid(path, m))?;
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn read_tensor(path: &Path) -> Result<TensorDump, DataError> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
        .map_err(io_err(path))?;
    decode_tensor(&bytes).map_err(|m| invalid(path, m))
}

fn array3_dump(data: &Array3<f64>, axes: [&str; 3]) -> TensorDump {
    let (a, b, c) = data.dim();
    TensorDump {
        dims: vec![a, b, c],
        axes: axes.iter().map(|s| s.to_string()).collect(),
        data: data.iter().map(|&v| v as f32).collect(),
    }
}

fn dump_array3(path: &Path, t: TensorDump) -> Result<Array3<f64>, DataError> {
    let [a, b, c] = t.dims[..] else {
        return Err(invalid(path, format!("expected rank 3, found rank {}", t.dims.len())));
    };
    Ok(Array3::from_shape_vec((a, b, c), t.data.into_iter().map(f64::from).collect())
        .expect("payload length checked at decode"))
}

pub const FEATURE_AXES: [&str; 3] = ["frame", "mel", "channel"];
pub const ACCDOA_AXES: [&str; 3] = ["frame", "class", "xyz"];

pub fn write_feature_dump(path: &Path, features: &FeatureStack) -> Result<(), DataError> {
    write_tensor(path, &array3_dump(&features.data, FEATURE_AXES))
}

pub fn read_feature_dump(path: &Path) -> Result<FeatureStack, DataError> {
    let data = dump_array3(path, read_tensor(path)?)?;
    let (_, mels, k) = data.dim();
    let format = match k {
        7 => Format::Foa,
        10 => Format::Mic,
        _ => return Err(invalid(path, format!("feature channel count {k}, expected 7 or 10"))),
    };
    if mels != N_MELS {
        return Err(invalid(path, format!("{mels} mel bands, expected {N_MELS}")));
    }
    Ok(FeatureStack { format, data })
}

pub fn write_accdoa_dump(path: &Path, tensor: &AccdoaTensor) -> Result<(), DataError> {
    write_tensor(path, &array3_dump(&tensor.data, ACCDOA_AXES))
}

pub fn read_accdoa_dump(path: &Path) -> Result<AccdoaTensor, DataError> {
    let data = dump_array3(path, read_tensor(path)?)?;
    if data.dim().2 != 3 {
        return Err(invalid(path, format!("last axis {}, expected 3", data.dim().2)));
    }
    Ok(AccdoaTensor { data })
}

// ---------------------------------------------------------------- splits

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitRole {
    Train,
    Validation,
    Test,
    Evaluation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub roles: BTreeMap<SplitRole, Vec<u8>>,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            roles: BTreeMap::from([
                (SplitRole::Train, vec![1, 2, 3, 4]),
                (SplitRole::Validation, vec![5]),
                (SplitRole::Test, vec![6]),
                (SplitRole::Evaluation, vec![7, 8]),
            ]),
        }
    }
}

impl SplitSpec {
    pub fn role_of(&self, fold: u8) -> Option<SplitRole> {
        self.roles
            .iter()
            .find(|(_, folds)| folds.contains(&fold))
            .map(|(r, _)| *r)
    }

    /// Role sets must be disjoint and cover every fold in `used`.
    pub fn validate(&self, used: &[u8]) -> Result<(), String> {
        let mut owner: BTreeMap<u8, SplitRole> = BTreeMap::new();
        for (role, folds) in &self.roles {
            for f in folds {
                if let Some(prev) = owner.insert(*f, *role) {
                    return Err(format!("fold {f} belongs to both {prev:?} and {role:?}"));
                }
            }
        }
        match used.iter().find(|f| !owner.contains_key(f)) {
            Some(f) => Err(format!("fold {f} has no split role")),
            None => Ok(()),
        }
    }
}

// ---------------------------------------------------------------- run config

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomConfig {
    pub room_id: String,
    pub fold: u8,
    pub foa: PathBuf,
    pub mic: PathBuf,
    #[serde(default)]
    pub foa_ambience: Option<PathBuf>,
    #[serde(default)]
    pub mic_ambience: Option<PathBuf>,
}

fn default_duration() -> f64 {
    60.0
}
fn default_targets() -> usize {
    3
}
fn default_interferers() -> usize {
    1
}
fn default_gap() -> Range {
    Range { min: 10.0, max: 30.0 }
}
fn default_snr() -> Range {
    Range {
        min: SNR_RANGE_DB.0,
        max: SNR_RANGE_DB.1,
    }
}
fn default_p_moving() -> f64 {
    0.5
}
fn default_formats() -> Vec<Format> {
    vec![Format::Foa, Format::Mic]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub n_recordings: usize,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default = "default_targets")]
    pub n_target_layers: usize,
    #[serde(default = "default_interferers")]
    pub n_interferer_layers: usize,
    #[serde(default = "default_gap")]
    pub total_gap_s: Range,
    #[serde(default = "default_snr")]
    pub snr_db: Range,
    #[serde(default = "default_p_moving")]
    pub p_moving: f64,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    /// Directory holding `samples.csv` and the sample files it lists.
    pub samples: PathBuf,
    pub rooms: Vec<RoomConfig>,
    #[serde(default)]
    pub classes: Option<ClassSet>,
    #[serde(default)]
    pub splits: Option<SplitSpec>,
}

impl RunConfig {
    pub fn parse(path: &Path, text: &str) -> Result<Self, DataError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|source| DataError::Toml {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate().map_err(|m| invalid(path, m))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(path, &text)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.samples);
        for room in &mut self.rooms {
            fix(&mut room.foa);
            fix(&mut room.mic);
            room.foa_ambience.as_mut().map(fix);
            room.mic_ambience.as_mut().map(fix);
        }
    }

    pub fn class_set(&self) -> ClassSet {
        self.classes.clone().unwrap_or_default()
    }

    pub fn split_spec(&self) -> SplitSpec {
        self.splits.clone().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<(), String> {
        let range = |name: &str, r: Range, lo: f64, hi: f64| {
            if !(r.min.is_finite() && r.max.is_finite() && lo <= r.min && r.min <= r.max && r.max <= hi) {
                Err(format!("{name} range [{}, {}] invalid (allowed [{lo}, {hi}])", r.min, r.max))
            } else {
                Ok(())
            }
        };
        if self.n_recordings == 0 {
            return Err("n_recordings must be positive".into());
        }
        if !(self.duration_s > 0.0) {
            return Err(format!("duration_s {} must be positive", self.duration_s));
        }
        range("total_gap_s", self.total_gap_s, 0.0, self.duration_s)?;
        range("snr_db", self.snr_db, SNR_RANGE_DB.0, SNR_RANGE_DB.1)?;
        if !(0.0..=1.0).contains(&self.p_moving) {
            return Err(format!("p_moving {} outside [0, 1]", self.p_moving));
        }
        if self.n_target_layers == 0 || self.n_target_layers > crate::model::MAX_TARGET_POLYPHONY {
            return Err(format!("n_target_layers {} outside 1..=3", self.n_target_layers));
        }
        if self.n_interferer_layers > crate::model::MAX_INTERFERER_POLYPHONY {
            return Err(format!("n_interferer_layers {} above 1", self.n_interferer_layers));
        }
        if self.formats.is_empty() {
            return Err("formats must list foa and/or mic".into());
        }
        if self.rooms.is_empty() {
            return Err("at least one [[rooms]] entry is required".into());
        }
        let folds: Vec<u8> = self.rooms.iter().map(|r| r.fold).collect();
        if let Some(f) = folds.iter().find(|f| !(1..=8).contains(*f)) {
            return Err(format!("fold {f} outside 1..=8"));
        }
        self.split_spec().validate(&folds)?;
        self.class_set().validate().map_err(|e| e.to_string())
    }
}

// ---------------------------------------------------------------- samples

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub sample_id: String,
    pub class_label: String,
    pub file: String,
}

pub fn write_sample_manifest(dir: &Path, rows: &[SampleRow]) -> Result<(), DataError> {
    let path = dir.join(SAMPLE_MANIFEST);
    let csv_err = |source| DataError::Csv {
        path: path.clone(),
        source,
    };
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(&path))
}

/// Loads `samples.csv` and every sample it lists. Labels that are neither a
/// target class nor a known interferer are rejected.
pub fn load_samples(dir: &Path, classes: &ClassSet) -> Result<(SamplePool, SampleStore), DataError> {
    let path = dir.join(SAMPLE_MANIFEST);
    let mut reader = csv::Reader::from_path(&path).map_err(|source| DataError::Csv {
        path: path.clone(),
        source,
    })?;
    let mut pool = SamplePool::default();
    let mut store = SampleStore::new();
    for (i, row) in reader.deserialize::<SampleRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| DataError::Row {
            path: path.clone(),
            line,
            message: e.to_string(),
        })?;
        let audio = read_mono(&dir.join(&row.file))?;
        let info = SampleInfo {
            sample_id: row.sample_id.clone(),
            class_label: row.class_label.clone(),
            duration_s: audio.duration_s(),
        };
        if classes.index_of(&row.class_label).is_some() {
            pool.targets.push(info);
        } else if classes.is_interferer(&row.class_label) {
            pool.interferers.push(info);
        } else {
            return Err(DataError::Row {
                path: path.clone(),
                line,
                message: format!("unknown class label {:?}", row.class_label),
            });
        }
        store.insert(row.sample_id, audio).map_err(|source| DataError::Spatial {
            path: path.clone(),
            source,
        })?;
    }
    Ok((pool, store))
}

/// Writes `text` through a buffered file handle.
pub fn write_text(path: &Path, text: &str) -> Result<(), DataError> {
    let f = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(f);
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metadata_rows_sorted_and_integer() {
        let mut l = LabelFrameSet::new(3);
        l.insert(
            2,
            LabelEntry {
                class_index: 4,
                track_id: 1,
                doa: Doa::new(179.6, -10.4).unwrap(),
            },
        )
        .unwrap();
        l.insert(
            0,
            LabelEntry {
                class_index: 1,
                track_id: 0,
                doa: Doa::new(-20.0, 5.0).unwrap(),
            },
        )
        .unwrap();
        assert_eq!(format_metadata(&l), "0,1,0,-20,5\n2,4,1,-180,-10\n");
    }

    #[test]
    fn bad_rows_name_their_line() {
        let p = Path::new("m.csv");
        let err = parse_metadata(p, "0,1,0,10,5\n3,2,0,10,95\n").unwrap_err();
        assert!(err.to_string().starts_with("m.csv:2:"), "{err}");
        assert!(matches!(parse_metadata(p, "0,1,0,10\n"), Err(DataError::Row { line: 1, .. })));
        assert!(parse_metadata(p, "0,1,0,180,0\n").is_err());
        assert!(parse_metadata(p, "0,1,x,0,0\n").is_err());
        assert!(matches!(
            parse_metadata(p, "0,1,0,1,0\n0,1,0,2,0\n"),
            Err(DataError::Row { line: 2, .. })
        ));
    }

    #[test]
    fn tensor_header_layout() {
        let t = TensorDump {
            dims: vec![2, 1],
            axes: vec!["a".into(), "bc".into()],
            data: vec![1.0, -2.5],
        };
        let bytes = encode_tensor(&t).unwrap();
        assert_eq!(&bytes[..4], b"SKT1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 2);
        assert_eq!(bytes.len(), 4 + 4 + 8 + (4 + 1) + (4 + 2) + 8);
        assert_eq!(decode_tensor(&bytes).unwrap(), t);
        assert!(decode_tensor(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_tensor(&bytes[..10]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_tensor(&bad).unwrap_err().contains("magic"));
        let mismatch = TensorDump {
            dims: vec![3],
            axes: vec!["a".into()],
            data: vec![0.0],
        };
        assert!(encode_tensor(&mismatch).is_err());
    }

    #[test]
    fn default_splits() {
        let s = SplitSpec::default();
        assert_eq!(s.role_of(3), Some(SplitRole::Train));
        assert_eq!(s.role_of(5), Some(SplitRole::Validation));
        assert_eq!(s.role_of(6), Some(SplitRole::Test));
        assert_eq!(s.role_of(8), Some(SplitRole::Evaluation));
        assert!(s.validate(&[1, 5, 6, 7]).is_ok());
        let mut overlap = s.clone();
        overlap.roles.get_mut(&SplitRole::Test).unwrap().push(5);
        assert!(overlap.validate(&[]).is_err());
        assert!(s.validate(&[9]).is_err());
    }

    #[test]
    fn config_requires_seed_and_resolves_paths() {
        let p = Path::new("/data/run/config.toml");
        let text = r#"
            n_recordings = 2
            samples = "samples"
            [[rooms]]
            room_id = "r1"
            fold = 1
            foa = "banks/r1_foa"
            mic = "/abs/r1_mic"
        "#;
        let err = RunConfig::parse(p, text).unwrap_err();
        assert!(err.to_string().contains("seed"), "{err}");
        let cfg = RunConfig::parse(p, &format!("seed = 3\n{text}")).unwrap();
        assert_eq!(cfg.samples, PathBuf::from("/data/run/samples"));
        assert_eq!(cfg.rooms[0].foa, PathBuf::from("/data/run/banks/r1_foa"));
        assert_eq!(cfg.rooms[0].mic, PathBuf::from("/abs/r1_mic"));
        assert_eq!(cfg.snr_db, Range { min: 6.0, max: 30.0 });
        let bad = format!("seed = 3\n{}", text.replace("n_recordings = 2", "n_recordings = 2\nsnr_db = { min = 3.0, max = 30.0 }"));
        assert!(RunConfig::parse(p, &bad).unwrap_err().to_string().contains("snr_db"));
    }
}
