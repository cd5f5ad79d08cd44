//! A stand-in for a trained model: turns reference labels into predictions
//! with controlled, seed-reproducible degradations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Doa, LabelEntry, LabelFrameSet};

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("{name} = {value} must lie in [0, 1]")]
    Probability { name: &'static str, value: f64 },
    #[error("jitter {0} deg must be finite and non-negative")]
    Jitter(f64),
    #[error("class confusion needs at least two classes")]
    TooFewClasses,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegradationSpec {
    /// Every surviving DOA is rotated by exactly this great-circle angle.
    pub doa_jitter_deg: f64,
    /// Probability of dropping each (frame, entry).
    pub p_miss: f64,
    /// Probability per frame of one extra entry with random class and direction.
    pub p_false: f64,
    /// Probability of relabelling a surviving entry to a different class.
    pub class_confusion: f64,
    pub seed: u64,
}

impl DegradationSpec {
    pub fn validate(&self) -> Result<(), OracleError> {
        for (name, value) in [
            ("p_miss", self.p_miss),
            ("p_false", self.p_false),
            ("class_confusion", self.class_confusion),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(OracleError::Probability { name, value });
            }
        }
        if !(self.doa_jitter_deg.is_finite() && self.doa_jitter_deg >= 0.0) {
            return Err(OracleError::Jitter(self.doa_jitter_deg));
        }
        Ok(())
    }

    fn is_identity(&self) -> bool {
        self.doa_jitter_deg == 0.0
            && self.p_miss == 0.0
            && self.p_false == 0.0
            && self.class_confusion == 0.0
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalized(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    v.map(|c| c / n)
}

/// Rotates `doa` by `angle_deg` along the great circle heading `heading_rad`
/// in its tangent plane.
pub fn rotate_doa(doa: Doa, angle_deg: f64, heading_rad: f64) -> Doa {
    let u = doa.to_unit_vector();
    // any axis not parallel to u seeds the tangent basis
    let helper = if u[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
    let e1 = normalized(cross(helper, u));
    let e2 = cross(u, e1);
    let (s, c) = angle_deg.to_radians().sin_cos();
    let (sh, ch) = heading_rad.sin_cos();
    let v: [f64; 3] = std::array::from_fn(|k| c * u[k] + s * (ch * e1[k] + sh * e2[k]));
    Doa::from_vector(v).expect("rotation of a unit vector is a unit vector")
}

pub fn random_doa(rng: &mut impl Rng) -> Doa {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let az: f64 = rng.random_range(-180.0..180.0);
    Doa::new(az, z.asin().to_degrees()).expect("valid range")
}

fn free_track(row: &[LabelEntry], class_index: usize) -> usize {
    (0..)
        .find(|t| !row.iter().any(|e| e.class_index == class_index && e.track_id == *t))
        .expect("unbounded search")
}

/// Applies `spec` to `reference`. The identity spec returns an exact copy.
pub fn degrade(
    reference: &LabelFrameSet,
    spec: &DegradationSpec,
    n_classes: usize,
) -> Result<LabelFrameSet, OracleError> {
    spec.validate()?;
    if spec.is_identity() {
        return Ok(reference.clone());
    }
    if spec.class_confusion > 0.0 && n_classes < 2 {
        return Err(OracleError::TooFewClasses);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = LabelFrameSet::new(reference.n_frames());
    for (k, row) in reference.frames() {
        let mut kept: Vec<LabelEntry> = Vec::with_capacity(row.len() + 1);
        for entry in row {
            // fixed draw count per entry keeps streams aligned across specs
            let miss: f64 = rng.random();
            let confuse: f64 = rng.random();
            let shift = rng.random_range(1..n_classes.max(2));
            let heading = rng.random_range(0.0..std::f64::consts::TAU);
            if miss < spec.p_miss {
                continue;
            }
            let mut e = *entry;
            if confuse < spec.class_confusion {
                e.class_index = (e.class_index + shift) % n_classes;
                if kept.iter().any(|x| x.class_index == e.class_index && x.track_id == e.track_id)
                    || row.iter().any(|x| x.class_index == e.class_index && x.track_id == e.track_id)
                {
                    e.track_id = free_track(&[kept.as_slice(), row].concat(), e.class_index);
                }
            }
            if spec.doa_jitter_deg > 0.0 {
                e.doa = rotate_doa(e.doa, spec.doa_jitter_deg, heading);
            }
            kept.push(e);
        }
        let spurious: f64 = rng.random();
        let class_index = rng.random_range(0..n_classes.max(1));
        let doa = random_doa(&mut rng);
        if spurious < spec.p_false && n_classes > 0 {
            let track_id = free_track(&kept, class_index);
            kept.push(LabelEntry {
                class_index,
                track_id,
                doa,
            });
        }
        for e in kept {
            out.insert(k, e).expect("track ids are kept unique");
        }
    }
    Ok(out)
}
