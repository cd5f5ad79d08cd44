//! Python bindings. Label sets cross the boundary as lists of
//! `(frame, class_index, track_id, azimuth, elevation)` rows and audio as
//! lists of channels.

use std::fmt::Display;
use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use seldkit::accdoa::{self, AccdoaTensor};
use seldkit::audio::Audio;
use seldkit::cli::{self, MakeBankArgs, SynthOptions};
use seldkit::dataio::{self, DataError, RunConfig};
use seldkit::features;
use seldkit::metrics;
use seldkit::model::{self, Format};
use seldkit::oracle;
use seldkit::spatial;
use seldkit::{LabelEntry, LabelFrameSet, SAMPLE_RATE};

type Row = (usize, usize, usize, f64, f64);

fn value_err(e: impl Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn data_err(e: DataError) -> PyErr {
    match e {
        DataError::Io { .. } => PyOSError::new_err(e.to_string()),
        other => value_err(other),
    }
}

fn parse_format(format: &str) -> PyResult<Format> {
    format.parse().map_err(PyValueError::new_err)
}

fn to_labels(rows: &[Row], n_frames: Option<usize>) -> PyResult<LabelFrameSet> {
    let needed = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
    let mut out = LabelFrameSet::new(n_frames.unwrap_or(needed).max(needed));
    for &(frame, class_index, track_id, az, el) in rows {
        let doa = model::Doa::new(az, el).map_err(value_err)?;
        out.insert(frame, LabelEntry { class_index, track_id, doa })
            .map_err(value_err)?;
    }
    Ok(out)
}

fn from_labels(labels: &LabelFrameSet) -> Vec<Row> {
    labels
        .frames()
        .flat_map(|(k, row)| {
            row.iter()
                .map(move |e| (k, e.class_index, e.track_id, e.doa.azimuth, e.doa.elevation))
        })
        .collect()
}

fn to_audio(channels: Vec<Vec<f64>>) -> Audio {
    Audio { sample_rate: SAMPLE_RATE, channels }
}

/// A direction of arrival in degrees.
#[pyclass(frozen, from_py_object)]
#[derive(Clone, Copy)]
struct Doa {
    inner: model::Doa,
}

#[pymethods]
impl Doa {
    #[new]
    fn new(azimuth: f64, elevation: f64) -> PyResult<Self> {
        Ok(Self { inner: model::Doa::new(azimuth, elevation).map_err(value_err)? })
    }

    #[staticmethod]
    fn from_vector(x: f64, y: f64, z: f64) -> PyResult<Self> {
        Ok(Self { inner: model::Doa::from_vector([x, y, z]).map_err(value_err)? })
    }

    #[getter]
    fn azimuth(&self) -> f64 {
        self.inner.azimuth
    }

    #[getter]
    fn elevation(&self) -> f64 {
        self.inner.elevation
    }

    fn unit_vector(&self) -> (f64, f64, f64) {
        let [x, y, z] = self.inner.to_unit_vector();
        (x, y, z)
    }

    fn distance_to(&self, other: &Doa) -> f64 {
        model::angular_distance(self.inner, other.inner)
    }

    fn __repr__(&self) -> String {
        format!("Doa(azimuth={}, elevation={})", self.inner.azimuth, self.inner.elevation)
    }
}

/// Oracle degradation settings.
#[pyclass(from_py_object)]
#[derive(Clone)]
struct DegradationSpec {
    #[pyo3(get, set)]
    doa_jitter_deg: f64,
    #[pyo3(get, set)]
    p_miss: f64,
    #[pyo3(get, set)]
    p_false: f64,
    #[pyo3(get, set)]
    class_confusion: f64,
    #[pyo3(get, set)]
    seed: u64,
}

impl DegradationSpec {
    fn inner(&self) -> oracle::DegradationSpec {
        oracle::DegradationSpec {
            doa_jitter_deg: self.doa_jitter_deg,
            p_miss: self.p_miss,
            p_false: self.p_false,
            class_confusion: self.class_confusion,
            seed: self.seed,
        }
    }
}

#[pymethods]
impl DegradationSpec {
    #[new]
    #[pyo3(signature = (doa_jitter_deg=0.0, p_miss=0.0, p_false=0.0, class_confusion=0.0, seed=0))]
    fn new(doa_jitter_deg: f64, p_miss: f64, p_false: f64, class_confusion: f64, seed: u64) -> PyResult<Self> {
        let spec = Self { doa_jitter_deg, p_miss, p_false, class_confusion, seed };
        spec.inner().validate().map_err(value_err)?;
        Ok(spec)
    }

    fn __repr__(&self) -> String {
        format!(
            "DegradationSpec(doa_jitter_deg={}, p_miss={}, p_false={}, class_confusion={}, seed={})",
            self.doa_jitter_deg, self.p_miss, self.p_false, self.class_confusion, self.seed
        )
    }
}

/// Joint detection and localization scores.
#[pyclass(frozen)]
struct MetricsReport {
    inner: metrics::MetricsReport,
}

#[pymethods]
impl MetricsReport {
    #[getter]
    fn er_20(&self) -> f64 {
        self.inner.er_20
    }

    #[getter]
    fn f_20(&self) -> f64 {
        self.inner.f_20
    }

    #[getter]
    fn le_cd(&self) -> f64 {
        self.inner.le_cd
    }

    #[getter]
    fn lr_cd(&self) -> f64 {
        self.inner.lr_cd
    }

    #[getter]
    fn undefined(&self) -> bool {
        self.inner.undefined
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    fn __repr__(&self) -> String {
        format!("MetricsReport({})", self.inner)
    }
}

#[pyfunction]
fn angular_distance(a: Doa, b: Doa) -> f64 {
    model::angular_distance(a.inner, b.inner)
}

#[pyfunction]
fn n_stft_frames(n_samples: usize) -> usize {
    features::n_stft_frames(n_samples)
}

/// Feature stack of shape (frames, 64, 7) for FOA or (frames, 64, 10) for MIC.
#[pyfunction]
fn extract_features(channels: Vec<Vec<f64>>, format: &str) -> PyResult<Vec<Vec<Vec<f64>>>> {
    let stack = features::extract(&to_audio(channels), parse_format(format)?).map_err(value_err)?;
    Ok(stack
        .data
        .outer_iter()
        .map(|frame| frame.outer_iter().map(|band| band.to_vec()).collect())
        .collect())
}

/// Returns the ACCDOA tensor as (frames, classes, 3) and the number of dropped collisions.
#[pyfunction]
fn accdoa_encode(rows: Vec<Row>, n_classes: usize, n_frames: usize) -> PyResult<(Vec<Vec<[f64; 3]>>, usize)> {
    let labels = to_labels(&rows, Some(n_frames))?;
    let encoded = accdoa::encode(&labels, n_classes, n_frames);
    let t = &encoded.tensor.data;
    let (frames, classes, _) = t.dim();
    let data = (0..frames)
        .map(|f| (0..classes).map(|c| [t[[f, c, 0]], t[[f, c, 1]], t[[f, c, 2]]]).collect())
        .collect();
    Ok((data, encoded.collisions))
}

#[pyfunction]
#[pyo3(signature = (tensor, threshold=accdoa::DEFAULT_THRESHOLD))]
fn accdoa_decode(tensor: Vec<Vec<[f64; 3]>>, threshold: f64) -> PyResult<Vec<Row>> {
    let n_classes = tensor.first().map_or(0, Vec::len);
    if tensor.iter().any(|f| f.len() != n_classes) {
        return Err(PyValueError::new_err("every frame needs the same number of classes"));
    }
    let mut t = AccdoaTensor::zeros(tensor.len(), n_classes);
    for (f, frame) in tensor.iter().enumerate() {
        for (c, v) in frame.iter().enumerate() {
            for (k, x) in v.iter().enumerate() {
                t.data[[f, c, k]] = *x;
            }
        }
    }
    Ok(from_labels(&accdoa::decode(&t, threshold)))
}

#[pyfunction]
#[pyo3(signature = (reference, prediction, n_classes=12, threshold_deg=metrics::DEFAULT_THRESHOLD_DEG, segment_frames=1))]
fn evaluate(
    reference: Vec<Row>,
    prediction: Vec<Row>,
    n_classes: usize,
    threshold_deg: f64,
    segment_frames: usize,
) -> PyResult<MetricsReport> {
    let r = to_labels(&reference, None)?;
    let p = to_labels(&prediction, None)?;
    let n = r.n_frames().max(p.n_frames());
    let (r, p) = (r.resized(n), p.resized(n));
    let inner = if segment_frames == 1 {
        metrics::evaluate(&r, &p, n_classes, threshold_deg)
    } else {
        metrics::evaluate_segments(&r, &p, n_classes, threshold_deg, segment_frames)
    }
    .map_err(value_err)?;
    Ok(MetricsReport { inner })
}

/// Ranks `(system_id, er, f, le, lr)` rows; returns `(system_id, ranks, rank_sum)` best first.
#[pyfunction]
fn rank_systems(systems: Vec<(String, f64, f64, f64, f64)>) -> PyResult<Vec<(String, [usize; 4], usize)>> {
    let reports = systems
        .into_iter()
        .map(|(id, er, f, le, lr)| {
            let mut r = metrics::finalize(&metrics::MetricCounts::new(0, metrics::DEFAULT_THRESHOLD_DEG));
            r.er_20 = er;
            r.f_20 = f;
            r.le_cd = le;
            r.lr_cd = lr;
            r.undefined = false;
            (id, r)
        })
        .collect();
    Ok(metrics::rank_systems(reports)
        .map_err(value_err)?
        .into_iter()
        .map(|r| (r.system_id, r.ranks, r.rank_sum))
        .collect())
}

#[pyfunction]
#[pyo3(signature = (reference, spec, n_classes=12))]
fn degrade(reference: Vec<Row>, spec: &DegradationSpec, n_classes: usize) -> PyResult<Vec<Row>> {
    let labels = to_labels(&reference, None)?;
    Ok(from_labels(&oracle::degrade(&labels, &spec.inner(), n_classes).map_err(value_err)?))
}

#[pyfunction]
fn read_metadata(path: PathBuf) -> PyResult<Vec<Row>> {
    Ok(from_labels(&dataio::read_metadata(&path).map_err(data_err)?))
}

#[pyfunction]
fn write_metadata(path: PathBuf, rows: Vec<Row>) -> PyResult<()> {
    dataio::write_metadata(&path, &to_labels(&rows, None)?).map_err(data_err)
}

#[pyfunction]
fn read_audio(path: PathBuf) -> PyResult<Vec<Vec<f64>>> {
    Ok(dataio::read_audio(&path).map_err(data_err)?.channels)
}

#[pyfunction]
fn write_audio(path: PathBuf, channels: Vec<Vec<f64>>) -> PyResult<()> {
    dataio::write_audio(&path, &to_audio(channels)).map_err(data_err)
}

/// Free-field four-channel impulse response of the FOA or MIC array.
#[pyfunction]
fn anechoic_ir(doa: Doa, distance_m: f64, format: &str) -> PyResult<Vec<Vec<f64>>> {
    let array = spatial::ArrayModel::for_format(parse_format(format)?);
    Ok(spatial::anechoic_ir(doa.inner, distance_m, &array).map_err(value_err)?.channels)
}

/// Convolves a mono signal with a multichannel impulse response.
#[pyfunction]
fn render_static(signal: Vec<f64>, ir: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let out = spatial::render_static(&Audio::mono(SAMPLE_RATE, signal), &to_audio(ir)).map_err(value_err)?;
    Ok(out.channels)
}

/// Writes a synthetic kit (banks, ambience, samples) and returns the path of its config.
#[pyfunction]
#[pyo3(signature = (out, rooms=2, seed=0, n_recordings=10, samples_per_class=4, ambience_s=10.0))]
fn make_bank(
    out: PathBuf,
    rooms: usize,
    seed: u64,
    n_recordings: usize,
    samples_per_class: usize,
    ambience_s: f64,
) -> PyResult<PathBuf> {
    let args = MakeBankArgs {
        rooms,
        rt60: vec![0.3],
        drr: 6.0,
        out,
        seed,
        arc_deg: 120.0,
        step_deg: 2.0,
        samples_per_class,
        ambience_s,
        n_recordings,
    };
    cli::make_bank(&args).map_err(value_err)
}

/// Renders every recording of a run config; returns one dict per recording.
#[pyfunction]
#[pyo3(signature = (config, out, no_ambience=false, no_interferers=false, anechoic=false))]
fn synthesize<'py>(
    py: Python<'py>,
    config: PathBuf,
    out: PathBuf,
    no_ambience: bool,
    no_interferers: bool,
    anechoic: bool,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let config = RunConfig::load(&config).map_err(data_err)?;
    let opts = SynthOptions { no_ambience, no_interferers, anechoic };
    let rows = cli::synthesize(&config, &out, &opts).map_err(value_err)?;
    rows.into_iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("recording_id", r.recording_id)?;
            d.set_item("fold", r.fold)?;
            d.set_item("room_id", r.room_id)?;
            d.set_item("seed", r.seed)?;
            d.set_item("snr_db", r.snr_db)?;
            d.set_item("n_events", r.n_events)?;
            d.set_item("foa_snr_db", r.foa_snr_db)?;
            d.set_item("mic_snr_db", r.mic_snr_db)?;
            Ok(d)
        })
        .collect()
}

#[pyfunction]
#[pyo3(signature = (reference_dir, prediction_dir, n_classes=12, threshold_deg=metrics::DEFAULT_THRESHOLD_DEG, segment_frames=1))]
fn evaluate_dirs(
    reference_dir: PathBuf,
    prediction_dir: PathBuf,
    n_classes: usize,
    threshold_deg: f64,
    segment_frames: usize,
) -> PyResult<MetricsReport> {
    let inner = cli::evaluate_dirs(&reference_dir, &prediction_dir, n_classes, threshold_deg, segment_frames)
        .map_err(value_err)?;
    Ok(MetricsReport { inner })
}

#[pymodule]
#[pyo3(name = "seldkit")]
fn seldkit_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SAMPLE_RATE", SAMPLE_RATE)?;
    m.add_class::<Doa>()?;
    m.add_class::<DegradationSpec>()?;
    m.add_class::<MetricsReport>()?;
    m.add_function(wrap_pyfunction!(angular_distance, m)?)?;
    m.add_function(wrap_pyfunction!(n_stft_frames, m)?)?;
    m.add_function(wrap_pyfunction!(extract_features, m)?)?;
    m.add_function(wrap_pyfunction!(accdoa_encode, m)?)?;
    m.add_function(wrap_pyfunction!(accdoa_decode, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_dirs, m)?)?;
    m.add_function(wrap_pyfunction!(rank_systems, m)?)?;
    m.add_function(wrap_pyfunction!(degrade, m)?)?;
    m.add_function(wrap_pyfunction!(read_metadata, m)?)?;
    m.add_function(wrap_pyfunction!(write_metadata, m)?)?;
    m.add_function(wrap_pyfunction!(read_audio, m)?)?;
    m.add_function(wrap_pyfunction!(write_audio, m)?)?;
    m.add_function(wrap_pyfunction!(anechoic_ir, m)?)?;
    m.add_function(wrap_pyfunction!(render_static, m)?)?;
    m.add_function(wrap_pyfunction!(make_bank, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    Ok(())
}
