//! Batch commands: synthetic banks, dataset synthesis, features, oracle
//! predictions, evaluation and ranking.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::Audio;
use crate::dataio::{
    self, DataError, Range, RoomConfig, RunConfig, SampleRow,
};
use crate::features::{self, FeatureError};
use crate::metrics::{self, MetricCounts, MetricsError, MetricsReport, RankedSystem};
use crate::model::{ClassSet, Format, LabelFrameSet, ModelError};
use crate::oracle::{self, DegradationSpec, OracleError};
use crate::spatial::{
    anechoic_bank, assign_spatial, mix_scene, plan_layers, synth_bank, ArrayModel, FormatInput,
    IrBank, LayerParams, ReverbParams, SpatialError, Trajectory,
};
use crate::SAMPLE_RATE;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Spatial(#[from] SpatialError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("unmatched files: {}", .0.join(", "))]
    MissingFiles(Vec<String>),
}

#[derive(Debug, Parser)]
#[command(name = "seldkit", version, about = "Spatial scene synthesis and SELD evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a dataset from a run configuration.
    Synthesize(SynthesizeArgs),
    /// Extract feature dumps from recordings of one format.
    Features(FeaturesArgs),
    /// Write degraded copies of reference labels as predictions.
    Oracle(OracleArgs),
    /// Score predictions against references.
    Evaluate(EvaluateArgs),
    /// Order systems by summed per-metric ranks.
    Rank(RankArgs),
    /// Generate synthetic IR banks, sample corpus, ambience and a config.
    MakeBank(MakeBankArgs),
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub no_ambience: bool,
    #[arg(long)]
    pub no_interferers: bool,
    /// Replace every room response with its direct path.
    #[arg(long)]
    pub anechoic: bool,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub format: Format,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// TOML degradation spec; omitted fields default to zero.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 12)]
    pub n_classes: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, default_value_t = metrics::DEFAULT_THRESHOLD_DEG)]
    pub threshold: f64,
    /// Label frames pooled per evaluation segment.
    #[arg(long, default_value_t = 1)]
    pub segment_frames: usize,
    #[arg(long, default_value_t = 12)]
    pub n_classes: usize,
    /// Report file; defaults to `report.toml` inside the prediction directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub reports: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MakeBankArgs {
    #[arg(long, default_value_t = 2)]
    pub rooms: usize,
    /// Reverberation times, cycled over rooms.
    #[arg(long, value_delimiter = ',', default_value = "0.3")]
    pub rt60: Vec<f64>,
    #[arg(long, default_value_t = 6.0)]
    pub drr: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Angular span of each circular trajectory.
    #[arg(long, default_value_t = 120.0)]
    pub arc_deg: f64,
    #[arg(long, default_value_t = 2.0)]
    pub step_deg: f64,
    /// Synthetic samples per class; 0 skips the sample corpus.
    #[arg(long, default_value_t = 4)]
    pub samples_per_class: usize,
    /// Length of generated ambience; 0 skips it.
    #[arg(long, default_value_t = 10.0)]
    pub ambience_s: f64,
    /// Recordings listed in the generated config.
    #[arg(long, default_value_t = 10)]
    pub n_recordings: usize,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synthesize(a) => {
            let mut config = RunConfig::load(&a.config)?;
            if let Some(seed) = a.seed {
                config.seed = seed;
            }
            let opts = SynthOptions {
                no_ambience: a.no_ambience,
                no_interferers: a.no_interferers,
                anechoic: a.anechoic,
            };
            let rows = synthesize(&config, &a.out, &opts)?;
            println!("wrote {} recordings to {}", rows.len(), a.out.display());
        }
        Command::Features(a) => {
            let n = extract_features(&a.input, a.format, &a.out)?;
            println!("wrote {n} feature dumps to {}", a.out.display());
        }
        Command::Oracle(a) => {
            let text = fs::read_to_string(&a.spec).map_err(io(&a.spec))?;
            let spec: DegradationSpec = toml::from_str(&text)
                .map_err(|e| CliError::Invalid(format!("{}: {e}", a.spec.display())))?;
            let n = oracle_predict(&a.reference, &spec, a.n_classes, &a.out)?;
            println!("wrote {n} prediction files to {}", a.out.display());
        }
        Command::Evaluate(a) => {
            let report = evaluate_dirs(
                &a.reference,
                &a.pred,
                a.n_classes,
                a.threshold,
                a.segment_frames,
            )?;
            let out = a.out.unwrap_or_else(|| a.pred.join("report.toml"));
            dataio::write_text(&out, &report.to_toml())?;
            println!("{report}");
            for note in &report.notes {
                eprintln!("note: {note}");
            }
        }
        Command::Rank(a) => {
            let ranked = rank_reports(&a.reports)?;
            print!("{}", format_ranking(&ranked));
        }
        Command::MakeBank(a) => {
            let config = make_bank(&a)?;
            println!("wrote banks and config {}", config.display());
        }
    }
    Ok(())
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// SplitMix64 finalizer; derives independent per-item seeds from one base seed.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stable_hash(text: &str) -> u64 {
    // FNV-1a, stable across runs and platforms
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Files `<prefix><id><suffix>` in `dir`, keyed by id.
fn list_ids(dir: &Path, prefix: &str, suffix: &str) -> Result<BTreeMap<String, PathBuf>, CliError> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(io(dir))? {
        let path = entry.map_err(io(dir))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(id) = name.strip_prefix(prefix).and_then(|r| r.strip_suffix(suffix)) {
            out.insert(id.to_string(), path.clone());
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- synthesize

#[derive(Debug, Clone, Copy, Default)]
pub struct SynthOptions {
    pub no_ambience: bool,
    pub no_interferers: bool,
    pub anechoic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub recording_id: String,
    pub fold: u8,
    pub room_id: String,
    pub seed: u64,
    pub snr_db: f64,
    pub n_events: usize,
    pub foa_snr_db: Option<f64>,
    pub mic_snr_db: Option<f64>,
}

struct Room {
    config: RoomConfig,
    banks: Vec<IrBank>,
    ambience: Vec<Option<Audio>>,
}

fn load_room(
    config: &RoomConfig,
    formats: &[Format],
    opts: &SynthOptions,
) -> Result<Room, CliError> {
    let mut banks = Vec::new();
    let mut ambience = Vec::new();
    for &format in formats {
        let (dir, amb) = match format {
            Format::Foa => (&config.foa, &config.foa_ambience),
            Format::Mic => (&config.mic, &config.mic_ambience),
        };
        let mut bank = dataio::read_ir_bank(dir)?;
        if bank.format != format {
            return Err(CliError::Invalid(format!(
                "{}: bank format {} listed as {format}",
                dir.display(),
                bank.format
            )));
        }
        if opts.anechoic {
            bank = anechoic_bank(&bank, &ArrayModel::for_format(format))?;
        }
        if let Some(first) = banks.first().map(|b: &IrBank| &b.trajectories) {
            if *first != bank.trajectories {
                return Err(CliError::Invalid(format!(
                    "room {}: format banks disagree on trajectory geometry",
                    config.room_id
                )));
            }
        }
        banks.push(bank);
        ambience.push(match amb {
            Some(p) if !opts.no_ambience => Some(dataio::read_audio(p)?),
            _ => None,
        });
    }
    Ok(Room {
        config: config.clone(),
        banks,
        ambience,
    })
}

fn uniform(rng: &mut impl Rng, r: Range) -> f64 {
    if r.max > r.min {
        rng.random_range(r.min..r.max)
    } else {
        r.min
    }
}

/// Renders every recording of `config` into `out` and returns the manifest rows.
///
/// Recording `i` draws everything from `mix_seed(seed, i)`, so ablation flags
/// change only the toggled component and never the scene plan.
pub fn synthesize(
    config: &RunConfig,
    out: &Path,
    opts: &SynthOptions,
) -> Result<Vec<ManifestRow>, CliError> {
    config.validate().map_err(CliError::Invalid)?;
    let classes = config.class_set();
    let (pool, store) = dataio::load_samples(&config.samples, &classes)?;
    let rooms = config
        .rooms
        .iter()
        .map(|r| load_room(r, &config.formats, opts))
        .collect::<Result<Vec<_>, _>>()?;
    fs::create_dir_all(out).map_err(io(out))?;

    let rows = (0..config.n_recordings)
        .into_par_iter()
        .map(|i| {
            let room = &rooms[i % rooms.len()];
            let seed = mix_seed(config.seed, i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let total_gap_s = uniform(&mut rng, config.total_gap_s);
            let snr_db = uniform(&mut rng, config.snr_db);
            let plan_seed: u64 = rng.random();
            let assign_seed: u64 = rng.random();
            let params = LayerParams {
                duration_s: config.duration_s,
                total_gap_s,
                n_target_layers: config.n_target_layers,
                n_interferer_layers: config.n_interferer_layers,
            };
            let recording_id = format!("fold{}_{}_mix{:03}", room.config.fold, room.config.room_id, i + 1);
            let mut script = plan_layers(&pool, &params, plan_seed)?;
            script.recording_id = recording_id.clone();
            script.fold = room.config.fold;
            script.room_id = room.config.room_id.clone();
            script.snr_db = snr_db;
            let mut script = assign_spatial(&script, &room.banks[0], config.p_moving, assign_seed)?;
            if opts.no_interferers {
                script.events.retain(|e| !e.is_interferer);
                script.n_interferer_layers = 0;
            }
            let inputs: Vec<FormatInput<'_>> = room
                .banks
                .iter()
                .zip(&room.ambience)
                .map(|(bank, amb)| FormatInput {
                    bank,
                    ambience: amb.as_ref(),
                })
                .collect();
            let rendered = mix_scene(&script, &store, &classes, &inputs)?;
            for (format, audio) in &rendered.recordings {
                dataio::write_audio(&out.join(format!("{format}_{recording_id}.wav")), audio)?;
            }
            dataio::write_metadata(&out.join(format!("meta_{recording_id}.csv")), &rendered.labels)?;
            let json = serde_json::to_string_pretty(&script).expect("script is JSON-representable");
            dataio::write_text(&out.join(format!("scene_{recording_id}.json")), &json)?;
            let snr = |f: Format| rendered.snr_db.get(&f).copied().flatten();
            Ok(ManifestRow {
                recording_id,
                fold: room.config.fold,
                room_id: room.config.room_id.clone(),
                seed,
                snr_db,
                n_events: script.events.len(),
                foa_snr_db: snr(Format::Foa),
                mic_snr_db: snr(Format::Mic),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut rows = rows;
    rows.sort_by(|a, b| a.recording_id.cmp(&b.recording_id));
    let path = out.join("manifest.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|source| DataError::Csv {
        path: path.clone(),
        source,
    })?;
    for r in &rows {
        w.serialize(r).map_err(|source| DataError::Csv {
            path: path.clone(),
            source,
        })?;
    }
    w.flush().map_err(io(&path))?;
    Ok(rows)
}

// ---------------------------------------------------------------- features

/// Writes `<format>_<id>.skt` for every `<format>_<id>.wav` in `input`.
pub fn extract_features(input: &Path, format: Format, out: &Path) -> Result<usize, CliError> {
    let files = list_ids(input, &format!("{format}_"), ".wav")?;
    fs::create_dir_all(out).map_err(io(out))?;
    files
        .par_iter()
        .map(|(id, path)| {
            let audio = dataio::read_audio(path)?;
            let stack = features::extract(&audio, format)?;
            dataio::write_feature_dump(&out.join(format!("{format}_{id}.skt")), &stack)?;
            Ok(())
        })
        .collect::<Result<Vec<()>, CliError>>()?;
    Ok(files.len())
}

// ---------------------------------------------------------------- oracle

/// Degrades every `meta_<id>.csv` in `reference`; each file gets its own
/// stream derived from the spec seed and its id.
pub fn oracle_predict(
    reference: &Path,
    spec: &DegradationSpec,
    n_classes: usize,
    out: &Path,
) -> Result<usize, CliError> {
    spec.validate()?;
    let files = list_ids(reference, "meta_", ".csv")?;
    fs::create_dir_all(out).map_err(io(out))?;
    files
        .par_iter()
        .map(|(id, path)| {
            let labels = dataio::read_metadata(path)?;
            let file_spec = DegradationSpec {
                seed: mix_seed(spec.seed, stable_hash(id)),
                ..*spec
            };
            let pred = oracle::degrade(&labels, &file_spec, n_classes)?;
            dataio::write_metadata(&out.join(format!("meta_{id}.csv")), &pred)?;
            Ok(())
        })
        .collect::<Result<Vec<()>, CliError>>()?;
    Ok(files.len())
}

// ---------------------------------------------------------------- evaluate

fn file_counts(
    reference: &LabelFrameSet,
    prediction: &LabelFrameSet,
    n_classes: usize,
    threshold_deg: f64,
    segment_frames: usize,
) -> Result<MetricCounts, MetricsError> {
    let n = reference.n_frames().max(prediction.n_frames());
    let r = reference.clone().resized(n);
    let p = prediction.clone().resized(n);
    if segment_frames == 1 {
        metrics::count_frames(&r, &p, n_classes, threshold_deg)
    } else {
        metrics::count_frames(
            &metrics::pool_segments(&r, segment_frames)?,
            &metrics::pool_segments(&p, segment_frames)?,
            n_classes,
            threshold_deg,
        )
    }
}

/// Pairs `meta_<id>.csv` files by id and merges their counts into one report.
pub fn evaluate_dirs(
    reference: &Path,
    prediction: &Path,
    n_classes: usize,
    threshold_deg: f64,
    segment_frames: usize,
) -> Result<MetricsReport, CliError> {
    if segment_frames == 0 {
        return Err(MetricsError::EmptySegment.into());
    }
    let refs = list_ids(reference, "meta_", ".csv")?;
    let preds = list_ids(prediction, "meta_", ".csv")?;
    let ref_ids: BTreeSet<&String> = refs.keys().collect();
    let pred_ids: BTreeSet<&String> = preds.keys().collect();
    let mut missing: Vec<String> = ref_ids
        .difference(&pred_ids)
        .map(|id| prediction.join(format!("meta_{id}.csv")).display().to_string())
        .collect();
    missing.extend(
        pred_ids
            .difference(&ref_ids)
            .map(|id| reference.join(format!("meta_{id}.csv")).display().to_string()),
    );
    if !missing.is_empty() {
        return Err(CliError::MissingFiles(missing));
    }
    if refs.is_empty() {
        return Err(CliError::Invalid(format!(
            "no meta_*.csv files in {}",
            reference.display()
        )));
    }
    let per_file = refs
        .par_iter()
        .map(|(id, path)| {
            let r = dataio::read_metadata(path)?;
            let p = dataio::read_metadata(&preds[id])?;
            Ok(file_counts(&r, &p, n_classes, threshold_deg, segment_frames)?)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    // merge in id order so floating-point sums do not depend on scheduling
    let mut total = MetricCounts::new(n_classes, threshold_deg);
    for c in &per_file {
        total.merge(c);
    }
    Ok(metrics::finalize(&total))
}

// ---------------------------------------------------------------- rank

fn system_id(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("system");
    if stem == "report" {
        if let Some(parent) = path.parent().and_then(|p| p.file_name()).and_then(|n| n.to_str()) {
            return parent.to_string();
        }
    }
    stem.to_string()
}

pub fn rank_reports(paths: &[PathBuf]) -> Result<Vec<RankedSystem>, CliError> {
    let reports = paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(io(p))?;
            let report: MetricsReport = toml::from_str(&text)
                .map_err(|e| CliError::Invalid(format!("{}: {e}", p.display())))?;
            Ok((system_id(p), report))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(metrics::rank_systems(reports)?)
}

pub fn format_ranking(ranked: &[RankedSystem]) -> String {
    let width = ranked.iter().map(|r| r.system_id.len()).max().unwrap_or(6).max(6);
    let mut out = format!(
        "{:<4} {:<width$} {:>6} {:>7} {:>7} {:>7}  {:<11} {:>3}\n",
        "pos", "system", "ER", "F", "LE", "LR", "ranks", "sum"
    );
    for (i, r) in ranked.iter().enumerate() {
        let ranks = format!("{}/{}/{}/{}", r.ranks[0], r.ranks[1], r.ranks[2], r.ranks[3]);
        out.push_str(&format!(
            "{:<4} {:<width$} {:>6.2} {:>6.1}% {:>6.1}° {:>6.1}%  {:<11} {:>3}\n",
            i + 1,
            r.system_id,
            r.report.er_20,
            100.0 * r.report.f_20,
            r.report.le_cd,
            100.0 * r.report.lr_cd,
            ranks,
            r.rank_sum
        ));
    }
    out
}

// ---------------------------------------------------------------- make-bank

/// Room geometry: three constant-elevation arcs plus one straight pass.
pub fn room_trajectories(
    room_id: &str,
    room_index: usize,
    arc_deg: f64,
    step_deg: f64,
) -> Result<Vec<Trajectory>, SpatialError> {
    let offset = 37.0 * room_index as f64;
    let mut out = Vec::new();
    for (t, (el, dist)) in [(-20.0, 1.5), (0.0, 1.0), (20.0, 2.0)].into_iter().enumerate() {
        out.push(Trajectory::circular(
            t,
            room_id,
            el,
            dist,
            -180.0 + offset + 40.0 * t as f64,
            arc_deg,
            step_deg,
        )?);
    }
    out.push(Trajectory::linear(
        3,
        room_id,
        [1.5, -2.0, 0.4],
        [1.5, 2.0, -0.2],
        step_deg,
    )?);
    Ok(out)
}

fn smoothed_noise(rng: &mut impl Rng, n: usize, pole: f64) -> Vec<f64> {
    let mut state = 0.0;
    (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            state = pole * state + (1.0 - pole) * z;
            state
        })
        .collect()
}

fn normalize_rms(x: &mut [f64], target: f64) {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if rms > 0.0 {
        x.iter_mut().for_each(|v| *v *= target / rms);
    }
}

/// A band-limited noise burst whose carrier frequency depends on the class.
pub fn synth_sample(class_index: usize, seed: u64) -> Audio {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs = SAMPLE_RATE as f64;
    let duration = rng.random_range(0.5..3.0);
    let n = (duration * fs) as usize;
    let carrier = 250.0 * 1.25f64.powi(class_index as i32);
    let noise = smoothed_noise(&mut rng, n, 0.95);
    let fade = (0.01 * fs) as usize;
    let mut x: Vec<f64> = noise
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let ramp = (i.min(n - 1 - i) as f64 / fade as f64).min(1.0);
            ramp * v * (std::f64::consts::TAU * carrier * i as f64 / fs).cos()
        })
        .collect();
    normalize_rms(&mut x, 0.1);
    Audio::mono(SAMPLE_RATE, x)
}

/// Four-channel diffuse background: SN3D-like channel levels for FOA,
/// independent channels for the capsule array.
pub fn synth_ambience(format: Format, duration_s: f64, seed: u64) -> Audio {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (duration_s * SAMPLE_RATE as f64) as usize;
    let levels = match format {
        Format::Foa => [1.0, 1.0 / 3f64.sqrt(), 1.0 / 3f64.sqrt(), 1.0 / 3f64.sqrt()],
        Format::Mic => [1.0; 4],
    };
    let channels = levels
        .iter()
        .map(|l| {
            let mut ch = smoothed_noise(&mut rng, n, 0.8);
            normalize_rms(&mut ch, 0.05 * l);
            ch
        })
        .collect();
    Audio {
        sample_rate: SAMPLE_RATE,
        channels,
    }
}

/// Writes banks, ambience, a sample corpus and `config.toml` under `args.out`.
pub fn make_bank(args: &MakeBankArgs) -> Result<PathBuf, CliError> {
    if args.rooms == 0 || args.rooms > 8 {
        return Err(CliError::Invalid(format!("--rooms {} outside 1..=8", args.rooms)));
    }
    if args.rt60.is_empty() {
        return Err(CliError::Invalid("--rt60 needs at least one value".into()));
    }
    let out = &args.out;
    let classes = ClassSet::default();
    let mut rooms = Vec::new();
    for r in 0..args.rooms {
        let room_id = format!("room{}", r + 1);
        let trajectories = room_trajectories(&room_id, r, args.arc_deg, args.step_deg)?;
        let params = ReverbParams {
            rt60_s: args.rt60[r % args.rt60.len()],
            drr_db: args.drr,
        };
        let mut paths = BTreeMap::new();
        let mut ambience = BTreeMap::new();
        for (f, format) in [Format::Foa, Format::Mic].into_iter().enumerate() {
            let seed = mix_seed(args.seed, (2 * r + f) as u64);
            let bank = synth_bank(&room_id, format, trajectories.clone(), params, seed)?;
            let rel = PathBuf::from("banks").join(format!("{room_id}_{format}"));
            dataio::write_ir_bank(&out.join(&rel), &bank)?;
            paths.insert(format, rel);
            if args.ambience_s > 0.0 {
                let rel = PathBuf::from("ambience").join(format!("{room_id}_{format}.wav"));
                fs::create_dir_all(out.join("ambience")).map_err(io(out))?;
                let amb = synth_ambience(format, args.ambience_s, seed ^ 0xA5A5);
                dataio::write_audio(&out.join(&rel), &amb)?;
                ambience.insert(format, rel);
            }
        }
        rooms.push(RoomConfig {
            room_id,
            fold: (r + 1) as u8,
            foa: paths[&Format::Foa].clone(),
            mic: paths[&Format::Mic].clone(),
            foa_ambience: ambience.get(&Format::Foa).cloned(),
            mic_ambience: ambience.get(&Format::Mic).cloned(),
        });
    }
    if args.samples_per_class > 0 {
        let dir = out.join("samples");
        fs::create_dir_all(&dir).map_err(io(&dir))?;
        let labels: Vec<&String> = classes
            .target_classes
            .iter()
            .chain(&classes.interferer_labels)
            .collect();
        let mut rows = Vec::new();
        for (c, label) in labels.iter().enumerate() {
            for k in 0..args.samples_per_class {
                let sample_id = format!("c{c:02}_{k:02}");
                let file = format!("{sample_id}.wav");
                let audio = synth_sample(c, mix_seed(args.seed ^ 0x5A5A, (c * 1000 + k) as u64));
                dataio::write_wav(&dir.join(&file), &audio)?;
                rows.push(SampleRow {
                    sample_id,
                    class_label: label.to_string(),
                    file,
                });
            }
        }
        dataio::write_sample_manifest(&dir, &rows)?;
    }
    let config = RunConfig {
        seed: args.seed,
        n_recordings: args.n_recordings,
        duration_s: 60.0,
        n_target_layers: 3,
        n_interferer_layers: 1,
        total_gap_s: Range { min: 10.0, max: 30.0 },
        snr_db: Range { min: 6.0, max: 30.0 },
        p_moving: 0.5,
        formats: vec![Format::Foa, Format::Mic],
        samples: PathBuf::from("samples"),
        rooms,
        classes: None,
        splits: None,
    };
    let path = out.join("config.toml");
    let text = toml::to_string(&config).expect("config is TOML-representable");
    dataio::write_text(&path, &text)?;
    Ok(path)
}
