//! Joint detection and localization metrics.
//!
//! Detection counts (ER, F) only accept a prediction as correct when it is
//! within `threshold_deg` of its paired reference of the same class.
//! Localization scores (LE, LR) are computed per class over every
//! class-matched pair, ignoring the threshold, then macro-averaged.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::hungarian;
use crate::model::{angular_distance, Doa, LabelEntry, LabelFrameSet};

pub const DEFAULT_THRESHOLD_DEG: f64 = 20.0;
/// LE assigned to a class that has references but no predicted pairs.
pub const UNMATCHED_LE_DEG: f64 = 180.0;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("class index {class} outside the {n_classes}-class set")]
    ClassOutOfRange { class: usize, n_classes: usize },
    #[error("reference has {reference} frames but prediction has {prediction}")]
    FrameMismatch { reference: usize, prediction: usize },
    #[error("segment length must be at least one frame")]
    EmptySegment,
    #[error("no systems to rank")]
    NoSystems,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pairing {
    /// `(reference index, prediction index, angular error in degrees)`.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_refs: Vec<usize>,
    pub unmatched_preds: Vec<usize>,
}

/// Optimal one-to-one pairing minimizing the summed angular distance.
pub fn pair_within_class(refs: &[Doa], preds: &[Doa]) -> Pairing {
    let cost: Vec<Vec<f64>> = refs
        .iter()
        .map(|r| preds.iter().map(|p| angular_distance(*r, *p)).collect())
        .collect();
    let assignment = if preds.is_empty() {
        vec![None; refs.len()]
    } else {
        hungarian(&cost)
    };
    let mut pairs = Vec::new();
    let mut unmatched_refs = Vec::new();
    let mut used = vec![false; preds.len()];
    for (r, col) in assignment.into_iter().enumerate() {
        match col {
            Some(p) => {
                used[p] = true;
                pairs.push((r, p, cost[r][p]));
            }
            None => unmatched_refs.push(r),
        }
    }
    let unmatched_preds = (0..preds.len()).filter(|&p| !used[p]).collect();
    Pairing {
        pairs,
        unmatched_refs,
        unmatched_preds,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub n_ref: u64,
    /// Class-matched pairs regardless of threshold.
    pub n_pairs: u64,
    /// Sum of the angular errors of those pairs, degrees.
    pub error_sum: f64,
}

impl ClassCounts {
    fn merge(&mut self, o: &ClassCounts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.n_ref += o.n_ref;
        self.n_pairs += o.n_pairs;
        self.error_sum += o.error_sum;
    }
}

/// Additive evaluation state; per-file counts can be merged in any order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCounts {
    pub threshold_deg: f64,
    pub classes: Vec<ClassCounts>,
    pub substitutions: u64,
    pub deletions: u64,
    pub insertions: u64,
    pub n_frames: u64,
}

impl MetricCounts {
    pub fn new(n_classes: usize, threshold_deg: f64) -> Self {
        Self {
            threshold_deg,
            classes: vec![ClassCounts::default(); n_classes],
            substitutions: 0,
            deletions: 0,
            insertions: 0,
            n_frames: 0,
        }
    }

    pub fn merge(&mut self, other: &MetricCounts) {
        if self.classes.len() < other.classes.len() {
            self.classes.resize(other.classes.len(), ClassCounts::default());
        }
        for (a, b) in self.classes.iter_mut().zip(&other.classes) {
            a.merge(b);
        }
        self.substitutions += other.substitutions;
        self.deletions += other.deletions;
        self.insertions += other.insertions;
        self.n_frames += other.n_frames;
    }

    pub fn totals(&self) -> ClassCounts {
        let mut t = ClassCounts::default();
        for c in &self.classes {
            t.merge(c);
        }
        t
    }
}

fn by_class(
    row: &[LabelEntry],
    n_classes: usize,
) -> Result<BTreeMap<usize, Vec<Doa>>, MetricsError> {
    let mut map: BTreeMap<usize, Vec<Doa>> = BTreeMap::new();
    for e in row {
        if e.class_index >= n_classes {
            return Err(MetricsError::ClassOutOfRange {
                class: e.class_index,
                n_classes,
            });
        }
        map.entry(e.class_index).or_default().push(e.doa);
    }
    Ok(map)
}

/// Adds one frame of references and predictions to `counts`.
pub fn accumulate(
    counts: &mut MetricCounts,
    refs: &[LabelEntry],
    preds: &[LabelEntry],
) -> Result<(), MetricsError> {
    let n_classes = counts.classes.len();
    let refs = by_class(refs, n_classes)?;
    let preds = by_class(preds, n_classes)?;
    let (mut frame_fp, mut frame_fn) = (0u64, 0u64);
    let empty = Vec::new();
    for class in refs.keys().chain(preds.keys()).copied().collect::<std::collections::BTreeSet<_>>() {
        let r = refs.get(&class).unwrap_or(&empty);
        let p = preds.get(&class).unwrap_or(&empty);
        let pairing = pair_within_class(r, p);
        let c = &mut counts.classes[class];
        c.n_ref += r.len() as u64;
        for &(_, _, err) in &pairing.pairs {
            c.n_pairs += 1;
            c.error_sum += err;
            if err <= counts.threshold_deg {
                c.tp += 1;
            } else {
                c.fp += 1;
                c.fn_ += 1;
                frame_fp += 1;
                frame_fn += 1;
            }
        }
        c.fp += pairing.unmatched_preds.len() as u64;
        c.fn_ += pairing.unmatched_refs.len() as u64;
        frame_fp += pairing.unmatched_preds.len() as u64;
        frame_fn += pairing.unmatched_refs.len() as u64;
    }
    counts.substitutions += frame_fn.min(frame_fp);
    counts.deletions += frame_fn.saturating_sub(frame_fp);
    counts.insertions += frame_fp.saturating_sub(frame_fn);
    counts.n_frames += 1;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub class_index: usize,
    pub n_ref: u64,
    pub le: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub er_20: f64,
    pub f_20: f64,
    pub le_cd: f64,
    pub lr_cd: f64,
    /// No reference events at all: ER and F come from insertions only.
    pub undefined: bool,
    pub notes: Vec<String>,
    pub per_class: Vec<ClassScore>,
    pub counts: MetricCounts,
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ER {:.2}, F {:.1}%, LE {:.1}°, LR {:.1}%",
            self.er_20,
            100.0 * self.f_20,
            self.le_cd,
            100.0 * self.lr_cd
        )
    }
}

impl MetricsReport {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report fields are TOML-representable")
    }
}

pub fn finalize(counts: &MetricCounts) -> MetricsReport {
    let t = counts.totals();
    let mut notes = Vec::new();
    let undefined = t.n_ref == 0;
    let detection_den = 2 * t.tp + t.fp + t.fn_;
    let f_20 = if detection_den == 0 {
        1.0
    } else {
        2.0 * t.tp as f64 / detection_den as f64
    };
    let errors = (counts.substitutions + counts.deletions + counts.insertions) as f64;
    let mut per_class = Vec::new();
    for (class_index, c) in counts.classes.iter().enumerate().filter(|(_, c)| c.n_ref > 0) {
        let le = if c.n_pairs == 0 {
            notes.push(format!(
                "class {class_index}: {} references but no predictions, LE set to {UNMATCHED_LE_DEG}",
                c.n_ref
            ));
            UNMATCHED_LE_DEG
        } else {
            c.error_sum / c.n_pairs as f64
        };
        per_class.push(ClassScore {
            class_index,
            n_ref: c.n_ref,
            le,
            lr: (c.n_pairs as f64 / c.n_ref as f64).min(1.0),
        });
    }
    let (er_20, le_cd, lr_cd) = if undefined {
        notes.push("no reference events: ER counts insertions, LE/LR undefined".into());
        let clean = counts.insertions == 0;
        (
            errors,
            if clean { 0.0 } else { UNMATCHED_LE_DEG },
            if clean { 1.0 } else { 0.0 },
        )
    } else {
        let n = per_class.len() as f64;
        (
            errors / t.n_ref as f64,
            per_class.iter().map(|c| c.le).sum::<f64>() / n,
            per_class.iter().map(|c| c.lr).sum::<f64>() / n,
        )
    };
    MetricsReport {
        er_20,
        f_20,
        le_cd,
        lr_cd,
        undefined,
        notes,
        per_class,
        counts: counts.clone(),
    }
}

/// Frame-wise counts for one file. The prediction is padded with empty frames
/// or truncated to the reference length.
pub fn count_frames(
    reference: &LabelFrameSet,
    prediction: &LabelFrameSet,
    n_classes: usize,
    threshold_deg: f64,
) -> Result<MetricCounts, MetricsError> {
    let mut counts = MetricCounts::new(n_classes, threshold_deg);
    for k in 0..reference.n_frames() {
        accumulate(&mut counts, reference.frame(k), prediction.frame(k))?;
    }
    Ok(counts)
}

pub fn evaluate(
    reference: &LabelFrameSet,
    prediction: &LabelFrameSet,
    n_classes: usize,
    threshold_deg: f64,
) -> Result<MetricsReport, MetricsError> {
    Ok(finalize(&count_frames(
        reference,
        prediction,
        n_classes,
        threshold_deg,
    )?))
}

/// Pools consecutive frames into segments of `frames_per_segment`: each
/// `(class, track)` active anywhere in a segment becomes one entry whose DOA
/// is the mean direction over its active frames.
pub fn pool_segments(
    labels: &LabelFrameSet,
    frames_per_segment: usize,
) -> Result<LabelFrameSet, MetricsError> {
    if frames_per_segment == 0 {
        return Err(MetricsError::EmptySegment);
    }
    let n_segments = labels.n_frames().div_ceil(frames_per_segment);
    let mut out = LabelFrameSet::new(n_segments);
    for s in 0..n_segments {
        let mut sums: BTreeMap<(usize, usize), [f64; 3]> = BTreeMap::new();
        let end = ((s + 1) * frames_per_segment).min(labels.n_frames());
        for k in s * frames_per_segment..end {
            for e in labels.frame(k) {
                let v = e.doa.to_unit_vector();
                let acc = sums.entry((e.class_index, e.track_id)).or_insert([0.0; 3]);
                for d in 0..3 {
                    acc[d] += v[d];
                }
            }
        }
        for ((class_index, track_id), v) in sums {
            // a track that reverses inside the segment can cancel; fall back to its first frame
            let doa = Doa::from_vector(v).unwrap_or_else(|_| {
                (s * frames_per_segment..end)
                    .flat_map(|k| labels.frame(k))
                    .find(|e| e.class_index == class_index && e.track_id == track_id)
                    .map(|e| e.doa)
                    .expect("entry exists")
            });
            out.insert(
                s,
                LabelEntry {
                    class_index,
                    track_id,
                    doa,
                },
            )
            .expect("keys are unique");
        }
    }
    Ok(out)
}

/// [`evaluate`] after pooling both sides into segments; one frame per segment
/// is identical to [`evaluate`].
pub fn evaluate_segments(
    reference: &LabelFrameSet,
    prediction: &LabelFrameSet,
    n_classes: usize,
    threshold_deg: f64,
    frames_per_segment: usize,
) -> Result<MetricsReport, MetricsError> {
    let prediction = prediction.clone().resized(reference.n_frames());
    evaluate(
        &pool_segments(reference, frames_per_segment)?,
        &pool_segments(&prediction, frames_per_segment)?,
        n_classes,
        threshold_deg,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSystem {
    pub system_id: String,
    /// Ranks for ER, F, LE, LR.
    pub ranks: [usize; 4],
    pub rank_sum: usize,
    pub report: MetricsReport,
}

/// Competition ranking: 1 + the number of systems strictly better.
fn competition_ranks(values: &[f64], lower_is_better: bool) -> Vec<usize> {
    values
        .iter()
        .map(|&v| {
            1 + values
                .iter()
                .filter(|&&o| if lower_is_better { o < v } else { o > v })
                .count()
        })
        .collect()
}

/// Orders systems by the sum of their four per-metric ranks.
pub fn rank_systems(
    reports: Vec<(String, MetricsReport)>,
) -> Result<Vec<RankedSystem>, MetricsError> {
    if reports.is_empty() {
        return Err(MetricsError::NoSystems);
    }
    let column = |f: fn(&MetricsReport) -> f64| reports.iter().map(|(_, r)| f(r)).collect::<Vec<_>>();
    let er = competition_ranks(&column(|r| r.er_20), true);
    let f = competition_ranks(&column(|r| r.f_20), false);
    let le = competition_ranks(&column(|r| r.le_cd), true);
    let lr = competition_ranks(&column(|r| r.lr_cd), false);
    let mut ranked: Vec<RankedSystem> = reports
        .into_iter()
        .enumerate()
        .map(|(i, (system_id, report))| {
            let ranks = [er[i], f[i], le[i], lr[i]];
            RankedSystem {
                system_id,
                ranks,
                rank_sum: ranks.iter().sum(),
                report,
            }
        })
        .collect();
    ranked.sort_by(|a, b| {
        a.rank_sum
            .cmp(&b.rank_sum)
            .then(a.report.er_20.total_cmp(&b.report.er_20))
            .then_with(|| a.system_id.cmp(&b.system_id))
    });
    Ok(ranked)
}
