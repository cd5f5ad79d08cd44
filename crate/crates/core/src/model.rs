//! Domain types shared by the synthesis, feature, coding and metric stages.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Duration of one annotation frame in seconds.
pub const LABEL_HOP_S: f64 = 0.1;

/// Minimum overlap between an event and a label frame for the frame to count as active.
pub const MIN_FRAME_OVERLAP_S: f64 = 0.05;

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("elevation {0} outside [-90, 90]")]
    Elevation(f64),
    #[error("non-finite direction component")]
    NonFinite,
    #[error("zero-length direction vector")]
    ZeroVector,
    #[error("class label {0:?} is not a target class")]
    UnknownClass(String),
    #[error("duplicate (class {class}, track {track}) in frame {frame}")]
    DuplicateEntry {
        frame: usize,
        class: usize,
        track: usize,
    },
    #[error("frame {frame} outside label range 0..{n_frames}")]
    FrameOutOfRange { frame: usize, n_frames: usize },
    #[error("class sets overlap on label {0:?}")]
    OverlappingClassSets(String),
    #[error("duplicate class label {0:?}")]
    DuplicateClass(String),
}

/// Spatial audio format of a recording or IR bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// First-order Ambisonics, ACN channel order, SN3D normalisation.
    Foa,
    /// Tetrahedral microphone array.
    Mic,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Foa => "foa",
            Format::Mic => "mic",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "foa" => Ok(Format::Foa),
            "mic" => Ok(Format::Mic),
            other => Err(format!("unknown format {other:?} (expected foa or mic)")),
        }
    }
}

/// Target classes (dense indices `0..C`) and the labels treated as unannotated interference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSet {
    pub target_classes: Vec<String>,
    pub interferer_labels: Vec<String>,
}

impl Default for ClassSet {
    fn default() -> Self {
        let targets = [
            "alarm",
            "crying baby",
            "crash",
            "barking dog",
            "female scream",
            "female speech",
            "footsteps",
            "knocking on door",
            "male scream",
            "male speech",
            "ringing phone",
            "piano",
        ];
        let interferers = ["running engine", "burning fire", "general"];
        Self {
            target_classes: targets.iter().map(|s| s.to_string()).collect(),
            interferer_labels: interferers.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl ClassSet {
    pub fn new(
        target_classes: Vec<String>,
        interferer_labels: Vec<String>,
    ) -> Result<Self, ModelError> {
        let set = Self {
            target_classes,
            interferer_labels,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let mut seen = std::collections::HashSet::new();
        for label in &self.target_classes {
            if !seen.insert(label.as_str()) {
                return Err(ModelError::DuplicateClass(label.clone()));
            }
        }
        for label in &self.interferer_labels {
            if seen.contains(label.as_str()) {
                return Err(ModelError::OverlappingClassSets(label.clone()));
            }
        }
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        self.target_classes.len()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.target_classes.iter().position(|c| c == label)
    }

    pub fn is_interferer(&self, label: &str) -> bool {
        self.interferer_labels.iter().any(|c| c == label)
    }
}

/// Direction of arrival in degrees. Azimuth lives in `[-180, 180)`, elevation in `[-90, 90]`.
///
/// Axes follow the usual SELD convention: `x = cos el cos az`, `y = cos el sin az`, `z = sin el`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Doa {
    pub azimuth: f64,
    pub elevation: f64,
}

impl Doa {
    /// Builds a direction, wrapping the azimuth into `[-180, 180)`.
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self, ModelError> {
        if !azimuth.is_finite() || !elevation.is_finite() {
            return Err(ModelError::NonFinite);
        }
        if !(-90.0..=90.0).contains(&elevation) {
            return Err(ModelError::Elevation(elevation));
        }
        Ok(Self {
            azimuth: wrap_azimuth(azimuth),
            elevation,
        })
    }

    pub fn from_vector(v: [f64; 3]) -> Result<Self, ModelError> {
        if v.iter().any(|c| !c.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        let horizontal = v[0].hypot(v[1]);
        if horizontal == 0.0 && v[2] == 0.0 {
            return Err(ModelError::ZeroVector);
        }
        let azimuth = v[1].atan2(v[0]).to_degrees();
        let elevation = v[2].atan2(horizontal).to_degrees().clamp(-90.0, 90.0);
        Self::new(azimuth, elevation)
    }

    pub fn to_unit_vector(self) -> [f64; 3] {
        doa_to_unit_vector(self)
    }
}

impl fmt::Display for Doa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(az {:.2}, el {:.2})", self.azimuth, self.elevation)
    }
}

pub fn wrap_azimuth(azimuth: f64) -> f64 {
    let wrapped = (azimuth + 180.0).rem_euclid(360.0) - 180.0;
    if wrapped >= 180.0 {
        wrapped - 360.0
    } else {
        wrapped
    }
}

pub fn doa_to_unit_vector(d: Doa) -> [f64; 3] {
    let (az, el) = (d.azimuth.to_radians(), d.elevation.to_radians());
    [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()]
}

/// Great-circle angle between two directions, in degrees within `[0, 180]`.
pub fn angular_distance(a: Doa, b: Doa) -> f64 {
    let u = a.to_unit_vector();
    let v = b.to_unit_vector();
    let dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    let cross = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    let sin = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    sin.atan2(dot).to_degrees().clamp(0.0, 180.0)
}

/// Angular traversal speeds available to moving sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Speed {
    #[serde(rename = "10")]
    Slow,
    #[serde(rename = "20")]
    Medium,
    #[serde(rename = "40")]
    Fast,
}

impl Speed {
    pub const ALL: [Speed; 3] = [Speed::Slow, Speed::Medium, Speed::Fast];

    pub fn deg_per_s(self) -> f64 {
        match self {
            Speed::Slow => 10.0,
            Speed::Medium => 20.0,
            Speed::Fast => 40.0,
        }
    }

    pub fn from_deg_per_s(v: f64) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.deg_per_s() == v)
    }
}

/// Position of a node inside an IR bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeRef {
    pub trajectory: usize,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Motion {
    Static {
        doa: Doa,
        distance_m: f64,
        node: NodeRef,
    },
    Moving {
        trajectory_id: usize,
        start_index: usize,
        speed: Speed,
        /// +1 walks towards higher node indices, -1 towards lower.
        direction: i8,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEvent {
    pub id: usize,
    pub sample_id: String,
    pub class_label: String,
    pub layer_index: usize,
    pub is_interferer: bool,
    pub onset: f64,
    pub offset: f64,
    /// `None` until spatial assignment.
    pub motion: Option<Motion>,
}

impl SceneEvent {
    pub fn duration(&self) -> f64 {
        self.offset - self.onset
    }
}

/// Symbolic description of one recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneScript {
    pub recording_id: String,
    pub fold: u8,
    pub room_id: String,
    pub snr_db: f64,
    pub duration_s: f64,
    pub n_target_layers: usize,
    pub n_interferer_layers: usize,
    pub events: Vec<SceneEvent>,
}

impl SceneScript {
    pub fn n_label_frames(&self) -> usize {
        label_frame_count(self.duration_s)
    }

    pub fn targets(&self) -> impl Iterator<Item = &SceneEvent> {
        self.events.iter().filter(|e| !e.is_interferer)
    }

    pub fn interferers(&self) -> impl Iterator<Item = &SceneEvent> {
        self.events.iter().filter(|e| e.is_interferer)
    }
}

pub fn label_frame_count(duration_s: f64) -> usize {
    (duration_s / LABEL_HOP_S + 1e-6).floor() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    EventInterval,
    SnrRange,
    FoldRange,
    LayerRange,
    LayerRole,
    IntraLayerOverlap,
    TargetPolyphony,
    InterfererPolyphony,
}

/// One broken script invariant and the events involved.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub rule: Rule,
    pub event_ids: Vec<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.detail)?;
        if !self.event_ids.is_empty() {
            write!(f, " (events {:?})", self.event_ids)?;
        }
        Ok(())
    }
}

pub const SNR_RANGE_DB: (f64, f64) = (6.0, 30.0);
pub const MAX_TARGET_POLYPHONY: usize = 3;
pub const MAX_INTERFERER_POLYPHONY: usize = 1;

/// Checks every structural invariant of a scene script. An empty result means the script is valid.
pub fn validate_script(s: &SceneScript) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(SNR_RANGE_DB.0..=SNR_RANGE_DB.1).contains(&s.snr_db) {
        out.push(Violation {
            rule: Rule::SnrRange,
            event_ids: vec![],
            detail: format!("snr {} dB outside [6, 30]", s.snr_db),
        });
    }
    if !(1..=8).contains(&s.fold) {
        out.push(Violation {
            rule: Rule::FoldRange,
            event_ids: vec![],
            detail: format!("fold {} outside 1..8", s.fold),
        });
    }
    let n_layers = s.n_target_layers + s.n_interferer_layers;
    for e in &s.events {
        if !(e.onset >= 0.0 && e.onset < e.offset && e.offset <= s.duration_s + TIME_EPS) {
            out.push(Violation {
                rule: Rule::EventInterval,
                event_ids: vec![e.id],
                detail: format!(
                    "event interval [{}, {}) outside [0, {}]",
                    e.onset, e.offset, s.duration_s
                ),
            });
        }
        if e.layer_index >= n_layers {
            out.push(Violation {
                rule: Rule::LayerRange,
                event_ids: vec![e.id],
                detail: format!("layer {} outside 0..{}", e.layer_index, n_layers),
            });
        } else if (e.layer_index >= s.n_target_layers) != e.is_interferer {
            out.push(Violation {
                rule: Rule::LayerRole,
                event_ids: vec![e.id],
                detail: format!("layer {} role does not match event role", e.layer_index),
            });
        }
    }

    let mut by_layer: HashMap<usize, Vec<&SceneEvent>> = HashMap::new();
    for e in &s.events {
        by_layer.entry(e.layer_index).or_default().push(e);
    }
    let mut layers: Vec<_> = by_layer.into_iter().collect();
    layers.sort_by_key(|(l, _)| *l);
    for (_, mut events) in layers {
        events.sort_by(|a, b| a.onset.total_cmp(&b.onset).then(a.id.cmp(&b.id)));
        for pair in events.windows(2) {
            if pair[1].onset < pair[0].offset - TIME_EPS {
                out.push(Violation {
                    rule: Rule::IntraLayerOverlap,
                    event_ids: vec![pair[0].id, pair[1].id],
                    detail: "intra-layer overlap".into(),
                });
            }
        }
    }

    let check_polyphony = |interferers: bool, limit: usize, rule: Rule, name: &str| {
        let events: Vec<&SceneEvent> = s
            .events
            .iter()
            .filter(|e| e.is_interferer == interferers)
            .collect();
        let mut bounds: Vec<(f64, i32, usize)> = Vec::with_capacity(events.len() * 2);
        for e in &events {
            bounds.push((e.onset, 1, e.id));
            bounds.push((e.offset - TIME_EPS, -1, e.id));
        }
        // ends sort before starts at equal times: intervals are half-open
        bounds.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut active: Vec<usize> = Vec::new();
        let mut worst: Option<Vec<usize>> = None;
        for (_, delta, id) in bounds {
            if delta > 0 {
                active.push(id);
                if active.len() > limit && worst.as_ref().is_none_or(|w| active.len() > w.len()) {
                    worst = Some(active.clone());
                }
            } else {
                active.retain(|&a| a != id);
            }
        }
        worst.map(|mut ids| {
            ids.sort_unstable();
            Violation {
                rule,
                event_ids: ids,
                detail: format!("{name} polyphony > {limit}"),
            }
        })
    };
    out.extend(check_polyphony(
        false,
        MAX_TARGET_POLYPHONY,
        Rule::TargetPolyphony,
        "target",
    ));
    out.extend(check_polyphony(
        true,
        MAX_INTERFERER_POLYPHONY,
        Rule::InterfererPolyphony,
        "interferer",
    ));
    out
}

/// Label frames covered by an event active over `[onset, offset)`.
///
/// A frame is covered when the event overlaps it by at least 50 ms. Events shorter
/// than 50 ms cover their onset frame; longer events that straddle a boundary without
/// reaching 50 ms in either frame cover the frame with the larger overlap.
pub fn covered_frames(onset: f64, offset: f64, n_frames: usize) -> std::ops::Range<usize> {
    if offset <= onset || n_frames == 0 {
        return 0..0;
    }
    let frame_of = |t: f64| ((t / LABEL_HOP_S).floor().max(0.0) as usize).min(n_frames);
    if offset - onset < MIN_FRAME_OVERLAP_S - TIME_EPS {
        let k = frame_of(onset + TIME_EPS);
        return if k < n_frames { k..k + 1 } else { 0..0 };
    }
    let overlap = |k: usize| {
        let lo = k as f64 * LABEL_HOP_S;
        (offset.min(lo + LABEL_HOP_S) - onset.max(lo)).max(0.0)
    };
    let first = frame_of(onset).saturating_sub(1);
    let last = (frame_of(offset) + 1).min(n_frames);
    let mut covered = (first..last).filter(|&k| overlap(k) >= MIN_FRAME_OVERLAP_S - TIME_EPS);
    match covered.next() {
        Some(start) => {
            let end = covered.next_back().unwrap_or(start);
            start..end + 1
        }
        None => {
            let best = (first..last)
                .filter(|&k| overlap(k) > 0.0)
                .fold(None::<usize>, |best, k| match best {
                    Some(b) if overlap(b) >= overlap(k) => Some(b),
                    _ => Some(k),
                });
            best.map_or(0..0, |k| k..k + 1)
        }
    }
}

/// One annotated (or predicted) source in one label frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub class_index: usize,
    pub track_id: usize,
    pub doa: Doa,
}

/// Annotations at 100 ms resolution, indexed densely by frame.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LabelFrameSet {
    frames: Vec<Vec<LabelEntry>>,
}

impl LabelFrameSet {
    pub fn new(n_frames: usize) -> Self {
        Self {
            frames: vec![Vec::new(); n_frames],
        }
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn frame(&self, k: usize) -> &[LabelEntry] {
        self.frames.get(k).map_or(&[], |f| f.as_slice())
    }

    pub fn frames(&self) -> impl Iterator<Item = (usize, &[LabelEntry])> {
        self.frames.iter().enumerate().map(|(k, f)| (k, f.as_slice()))
    }

    /// Inserts an entry, keeping each frame sorted by `(class, track)`.
    pub fn insert(&mut self, frame: usize, entry: LabelEntry) -> Result<(), ModelError> {
        let n_frames = self.frames.len();
        let row = self
            .frames
            .get_mut(frame)
            .ok_or(ModelError::FrameOutOfRange { frame, n_frames })?;
        let key = (entry.class_index, entry.track_id);
        match row.binary_search_by_key(&key, |e| (e.class_index, e.track_id)) {
            Ok(_) => Err(ModelError::DuplicateEntry {
                frame,
                class: key.0,
                track: key.1,
            }),
            Err(pos) => {
                row.insert(pos, entry);
                Ok(())
            }
        }
    }

    pub fn n_entries(&self) -> usize {
        self.frames.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.iter().all(Vec::is_empty)
    }

    /// Pads with empty frames or truncates to `n_frames`.
    pub fn resized(mut self, n_frames: usize) -> Self {
        self.frames.resize(n_frames, Vec::new());
        self
    }

    /// Derives reference labels from a script. Interferers are skipped; `doa_at`
    /// gives an event's direction at a time inside its active interval.
    pub fn from_script(
        script: &SceneScript,
        classes: &ClassSet,
        mut doa_at: impl FnMut(&SceneEvent, f64) -> Doa,
    ) -> Result<Self, ModelError> {
        let n_frames = script.n_label_frames();
        let mut labels = Self::new(n_frames);
        let mut targets: Vec<&SceneEvent> = script.targets().collect();
        targets.sort_by(|a, b| a.onset.total_cmp(&b.onset).then(a.id.cmp(&b.id)));
        let mut next_track: HashMap<usize, usize> = HashMap::new();
        for e in targets {
            let class_index = classes
                .index_of(&e.class_label)
                .ok_or_else(|| ModelError::UnknownClass(e.class_label.clone()))?;
            let counter = next_track.entry(class_index).or_insert(0);
            let track_id = *counter;
            *counter += 1;
            for k in covered_frames(e.onset, e.offset, n_frames) {
                let centre = (k as f64 + 0.5) * LABEL_HOP_S;
                let t = centre.clamp(e.onset, e.offset);
                labels.insert(
                    k,
                    LabelEntry {
                        class_index,
                        track_id,
                        doa: doa_at(e, t),
                    },
                )?;
            }
        }
        Ok(labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doa(az: f64, el: f64) -> Doa {
        Doa::new(az, el).unwrap()
    }

    #[test]
    fn unit_vector_axes() {
        let v = doa(0.0, 0.0).to_unit_vector();
        assert_eq!(v, [1.0, 0.0, 0.0]);
        let v = doa(90.0, 0.0).to_unit_vector();
        assert!((v[0]).abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15 && v[2] == 0.0);
    }

    #[test]
    fn unit_vector_hand_evaluated() {
        // cos35 = 0.8191520442889918, sin35 = 0.573576436351046, cos45 = sin45 = 1/sqrt(2)
        let v = doa(45.0, 35.0).to_unit_vector();
        let half = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [0.8191520442889918 * half, 0.8191520442889918 * half, 0.573576436351046];
        for (a, b) in v.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn azimuth_wraps_into_half_open_range() {
        assert_eq!(doa(180.0, 0.0).azimuth, -180.0);
        assert_eq!(doa(-180.0, 0.0).azimuth, -180.0);
        assert_eq!(doa(540.0, 0.0).azimuth, -180.0);
        assert_eq!(doa(-190.0, 0.0).azimuth, 170.0);
        assert!(Doa::new(0.0, 90.5).is_err());
    }

    #[test]
    fn angular_distance_examples() {
        assert_eq!(angular_distance(doa(12.0, -7.0), doa(12.0, -7.0)), 0.0);
        assert!((angular_distance(doa(0.0, 0.0), doa(180.0, 0.0)) - 180.0).abs() < 1e-12);
        assert!((angular_distance(doa(0.0, 0.0), doa(30.0, 0.0)) - 30.0).abs() < 1e-12);
        assert!(angular_distance(doa(-179.5, 10.0), doa(179.5, 10.0)) < 1.0);
    }

    fn event(id: usize, layer: usize, interferer: bool, on: f64, off: f64) -> SceneEvent {
        SceneEvent {
            id,
            sample_id: format!("s{id}"),
            class_label: "alarm".into(),
            layer_index: layer,
            is_interferer: interferer,
            onset: on,
            offset: off,
            motion: None,
        }
    }

    fn script(events: Vec<SceneEvent>) -> SceneScript {
        SceneScript {
            recording_id: "r".into(),
            fold: 1,
            room_id: "room".into(),
            snr_db: 20.0,
            duration_s: 60.0,
            n_target_layers: 3,
            n_interferer_layers: 1,
            events,
        }
    }

    #[test]
    fn four_concurrent_targets_violate_polyphony() {
        let s = script(vec![
            event(0, 0, false, 0.0, 5.0),
            event(1, 1, false, 1.0, 5.0),
            event(2, 2, false, 2.0, 5.0),
            event(3, 2, false, 3.0, 5.0),
        ]);
        let v = validate_script(&s);
        assert!(v.iter().any(|v| v.rule == Rule::TargetPolyphony
            && v.detail == "target polyphony > 3"
            && v.event_ids == vec![0, 1, 2, 3]));
        assert!(v.iter().any(|v| v.rule == Rule::IntraLayerOverlap && v.event_ids == vec![2, 3]));
    }

    #[test]
    fn intra_layer_overlap_is_reported() {
        let s = script(vec![event(0, 0, false, 0.0, 5.0), event(1, 0, false, 4.0, 8.0)]);
        let v = validate_script(&s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].detail, "intra-layer overlap");
        assert_eq!(v[0].event_ids, vec![0, 1]);
    }

    #[test]
    fn touching_events_do_not_overlap() {
        let s = script(vec![
            event(0, 0, false, 0.0, 5.0),
            event(1, 0, false, 5.0, 8.0),
            event(2, 3, true, 0.0, 2.0),
            event(3, 3, true, 2.0, 9.0),
        ]);
        assert!(validate_script(&s).is_empty());
    }

    #[test]
    fn interferer_polyphony_and_roles() {
        let mut s = script(vec![event(0, 3, true, 0.0, 5.0), event(1, 1, true, 1.0, 2.0)]);
        s.snr_db = 31.0;
        let rules: Vec<Rule> = validate_script(&s).iter().map(|v| v.rule).collect();
        assert!(rules.contains(&Rule::InterfererPolyphony));
        assert!(rules.contains(&Rule::LayerRole));
        assert!(rules.contains(&Rule::SnrRange));
    }

    #[test]
    fn frame_coverage_rule() {
        assert_eq!(covered_frames(0.0, 1.0, 600), 0..10);
        assert_eq!(covered_frames(0.04, 0.26, 600), 0..3);
        assert_eq!(covered_frames(0.04, 0.24, 600), 0..2);
        assert_eq!(covered_frames(0.06, 0.26, 600), 1..3);
        // shorter than 50 ms: onset frame
        assert_eq!(covered_frames(0.09, 0.12, 600), 0..1);
        // 60 ms straddling a boundary: larger side wins, ties go to the earlier frame
        assert_eq!(covered_frames(0.08, 0.14, 600), 1..2);
        assert_eq!(covered_frames(0.07, 0.13, 600), 0..1);
        assert_eq!(covered_frames(59.95, 60.0, 600), 599..600);
        assert_eq!(covered_frames(0.3, 0.7, 600), 3..7);
    }

    #[test]
    fn labels_from_script_assign_tracks_per_class() {
        let mut a = event(0, 0, false, 0.0, 0.5);
        let mut b = event(1, 1, false, 0.2, 0.4);
        let c = event(2, 3, true, 0.0, 1.0);
        a.class_label = "piano".into();
        b.class_label = "piano".into();
        let s = script(vec![b, a, c]);
        let classes = ClassSet::default();
        let labels = LabelFrameSet::from_script(&s, &classes, |_, _| doa(10.0, 0.0)).unwrap();
        assert_eq!(labels.n_frames(), 600);
        let piano = classes.index_of("piano").unwrap();
        assert_eq!(labels.frame(0).len(), 1);
        assert_eq!(labels.frame(0)[0].track_id, 0);
        assert_eq!(labels.frame(2).len(), 2);
        assert!(labels.frame(2).iter().all(|e| e.class_index == piano));
        assert_eq!(labels.n_entries(), 5 + 2);
    }

    #[test]
    fn duplicate_entries_rejected() {
        let mut l = LabelFrameSet::new(3);
        let e = LabelEntry {
            class_index: 1,
            track_id: 0,
            doa: doa(0.0, 0.0),
        };
        l.insert(0, e).unwrap();
        assert!(matches!(l.insert(0, e), Err(ModelError::DuplicateEntry { .. })));
        assert!(l.insert(3, e).is_err());
    }

    #[test]
    fn class_sets_must_be_disjoint() {
        assert!(ClassSet::new(vec!["a".into()], vec!["a".into()]).is_err());
        assert!(ClassSet::default().validate().is_ok());
        assert_eq!(ClassSet::default().n_classes(), 12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn vector_round_trip(az in -180.0f64..180.0, el in -89.9f64..89.9) {
                let d = doa(az, el);
                let back = Doa::from_vector(d.to_unit_vector()).unwrap();
                prop_assert!((back.elevation - el).abs() < 1e-9);
                let daz = wrap_azimuth(back.azimuth - az).abs();
                prop_assert!(daz < 1e-9);
                let v = d.to_unit_vector();
                let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                prop_assert!((norm - 1.0).abs() < 1e-12);
            }

            #[test]
            fn distance_is_symmetric_and_bounded(
                a in -180.0f64..180.0, b in -90.0f64..=90.0,
                c in -180.0f64..180.0, d in -90.0f64..=90.0,
            ) {
                let x = doa(a, b);
                let y = doa(c, d);
                let dxy = angular_distance(x, y);
                prop_assert!((0.0..=180.0).contains(&dxy));
                prop_assert_eq!(dxy, angular_distance(y, x));
                prop_assert_eq!(angular_distance(x, x), 0.0);
            }
        }
    }
}
