//! Activity-coupled DOA targets: one Cartesian vector per label frame and
//! class, whose length encodes activity and whose direction encodes the DOA.

use ndarray::Array3;

use crate::model::{Doa, LabelEntry, LabelFrameSet};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
/// Feature frames per label frame (20 ms hop vs 100 ms labels).
pub const FRAMES_PER_LABEL: usize = 5;

/// Shape `(label frames, classes, 3)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AccdoaTensor {
    pub data: Array3<f64>,
}

impl AccdoaTensor {
    pub fn zeros(n_frames: usize, n_classes: usize) -> Self {
        Self {
            data: Array3::zeros((n_frames, n_classes, 3)),
        }
    }

    pub fn n_frames(&self) -> usize {
        self.data.dim().0
    }

    pub fn n_classes(&self) -> usize {
        self.data.dim().1
    }

    pub fn norm(&self, frame: usize, class: usize) -> f64 {
        (0..3)
            .map(|d| self.data[[frame, class, d]].powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub tensor: AccdoaTensor,
    /// Same-class entries dropped because a lower track already held the slot.
    pub collisions: usize,
}

pub fn frames_to_label_frames(n_feature_frames: usize) -> usize {
    n_feature_frames / FRAMES_PER_LABEL
}

/// Encodes labels into `n_frames` label frames. Entries with a class index
/// outside `n_classes` or a frame beyond `n_frames` are ignored.
pub fn encode(labels: &LabelFrameSet, n_classes: usize, n_frames: usize) -> Encoded {
    let mut tensor = AccdoaTensor::zeros(n_frames, n_classes);
    let mut collisions = 0;
    for (k, row) in labels.frames().take(n_frames) {
        let mut last_class = None;
        // rows are sorted by (class, track): the first entry of a class is its lowest track
        for entry in row.iter().filter(|e| e.class_index < n_classes) {
            if last_class == Some(entry.class_index) {
                collisions += 1;
                continue;
            }
            last_class = Some(entry.class_index);
            let v = entry.doa.to_unit_vector();
            for (d, c) in v.into_iter().enumerate() {
                tensor.data[[k, entry.class_index, d]] = c;
            }
        }
    }
    Encoded { tensor, collisions }
}

/// Active where the vector norm exceeds `threshold`; every detection gets track 0.
pub fn decode(tensor: &AccdoaTensor, threshold: f64) -> LabelFrameSet {
    let mut labels = LabelFrameSet::new(tensor.n_frames());
    for k in 0..tensor.n_frames() {
        for c in 0..tensor.n_classes() {
            if tensor.norm(k, c) <= threshold {
                continue;
            }
            let v = [
                tensor.data[[k, c, 0]],
                tensor.data[[k, c, 1]],
                tensor.data[[k, c, 2]],
            ];
            if let Ok(doa) = Doa::from_vector(v) {
                labels
                    .insert(
                        k,
                        LabelEntry {
                            class_index: c,
                            track_id: 0,
                            doa,
                        },
                    )
                    .expect("one entry per class and frame");
            }
        }
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::angular_distance;
    use proptest::prelude::*;

    fn entry(class: usize, track: usize, az: f64, el: f64) -> LabelEntry {
        LabelEntry {
            class_index: class,
            track_id: track,
            doa: Doa::new(az, el).unwrap(),
        }
    }

    #[test]
    fn single_front_source() {
        let mut l = LabelFrameSet::new(1);
        l.insert(0, entry(3, 0, 0.0, 0.0)).unwrap();
        let enc = encode(&l, 12, 1);
        assert_eq!(enc.collisions, 0);
        for c in 0..12 {
            let expected = if c == 3 { [1.0, 0.0, 0.0] } else { [0.0; 3] };
            for (d, want) in expected.iter().enumerate() {
                assert_eq!(enc.tensor.data[[0, c, d]], *want);
            }
        }
    }

    #[test]
    fn empty_labels_encode_to_zeros() {
        let enc = encode(&LabelFrameSet::new(4), 12, 4);
        assert!(enc.tensor.data.iter().all(|v| *v == 0.0));
        assert!(decode(&enc.tensor, 0.5).is_empty());
    }

    #[test]
    fn same_class_collision_keeps_lowest_track() {
        let mut l = LabelFrameSet::new(2);
        l.insert(1, entry(5, 1, 90.0, 0.0)).unwrap();
        l.insert(1, entry(5, 0, -90.0, 0.0)).unwrap();
        l.insert(1, entry(2, 0, 0.0, 0.0)).unwrap();
        let enc = encode(&l, 12, 2);
        // independent scan: count frames x classes with more than one entry
        let mut expected = 0;
        for (_, row) in l.frames() {
            for c in 0..12 {
                let n = row.iter().filter(|e| e.class_index == c).count();
                expected += n.saturating_sub(1);
            }
        }
        assert_eq!(enc.collisions, expected);
        assert_eq!(enc.collisions, 1);
        assert!((enc.tensor.data[[1, 5, 1]] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn below_threshold_is_inactive() {
        let mut t = AccdoaTensor::zeros(1, 2);
        t.data[[0, 0, 0]] = 0.4;
        t.data[[0, 1, 2]] = 0.6;
        let l = decode(&t, 0.5);
        assert_eq!(l.frame(0).len(), 1);
        assert_eq!(l.frame(0)[0].class_index, 1);
        assert_eq!(l.frame(0)[0].doa.elevation, 90.0);
    }

    #[test]
    fn label_frame_reduction() {
        assert_eq!(frames_to_label_frames(2998), 599);
        assert_eq!(frames_to_label_frames(2999), 599);
        assert_eq!(frames_to_label_frames(5), 1);
        assert_eq!(frames_to_label_frames(4), 0);
    }

    fn label_set() -> impl Strategy<Value = LabelFrameSet> {
        let cell = (0usize..12, -180.0f64..180.0, -90.0f64..=90.0);
        proptest::collection::vec(proptest::collection::vec(cell, 0..5), 1..20).prop_map(|rows| {
            let mut l = LabelFrameSet::new(rows.len());
            for (k, row) in rows.into_iter().enumerate() {
                for (c, az, el) in row {
                    // collision-free: at most one entry per class, track 0
                    let _ = l.insert(k, entry(c, 0, az, el));
                }
            }
            l
        })
    }

    proptest! {
        #[test]
        fn round_trip(l in label_set()) {
            let enc = encode(&l, 12, l.n_frames());
            prop_assert_eq!(enc.collisions, 0);
            let back = decode(&enc.tensor, DEFAULT_THRESHOLD);
            for (k, row) in l.frames() {
                let got = back.frame(k);
                prop_assert_eq!(got.len(), row.len());
                for (a, b) in row.iter().zip(got) {
                    prop_assert_eq!(a.class_index, b.class_index);
                    prop_assert!(angular_distance(a.doa, b.doa) < 1e-6);
                }
            }
        }

        #[test]
        fn shrinking_below_threshold_empties(l in label_set(), frac in 0.0f64..0.999) {
            let mut enc = encode(&l, 12, l.n_frames()).tensor;
            let max = enc.data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
            let max_norm = (0..enc.n_frames())
                .flat_map(|k| (0..12).map(move |c| (k, c)))
                .map(|(k, c)| enc.norm(k, c))
                .fold(0.0f64, f64::max)
                .max(max);
            enc.data.mapv_inplace(|v| v * frac * DEFAULT_THRESHOLD / max_norm);
            prop_assert!(decode(&enc, DEFAULT_THRESHOLD).is_empty());
        }
    }
}
