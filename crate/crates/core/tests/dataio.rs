use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seldkit::accdoa;
use seldkit::audio::Audio;
use seldkit::dataio;
use seldkit::features;
use seldkit::model::{Format, LabelEntry, LabelFrameSet};
use seldkit::oracle::random_doa;
use seldkit::spatial::{synth_bank, ReverbParams, Trajectory};
use seldkit::SAMPLE_RATE;

fn random_audio(seed: u64, channels: usize, n: usize) -> Audio {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Audio {
        sample_rate: SAMPLE_RATE,
        // f32-representable values survive a float WAV round trip exactly
        channels: (0..channels)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0f32..1.0) as f64).collect())
            .collect(),
    }
}

fn random_labels(seed: u64, n_frames: usize) -> LabelFrameSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = LabelFrameSet::new(n_frames);
    for k in 0..n_frames {
        for slot in 0..rng.random_range(0..4usize) {
            let d = random_doa(&mut rng);
            let doa = seldkit::Doa::new(d.azimuth.round().clamp(-179.0, 179.0), d.elevation.round()).unwrap();
            labels
                .insert(
                    k,
                    LabelEntry {
                        class_index: rng.random_range(0..12),
                        track_id: slot,
                        doa,
                    },
                )
                .unwrap();
        }
    }
    labels
}

#[test]
fn audio_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.wav");
    let audio = random_audio(1, 4, 4800);
    dataio::write_audio(&path, &audio).unwrap();
    assert_eq!(dataio::read_audio(&path).unwrap(), audio);
}

#[test]
fn audio_rejects_wrong_channel_count() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stereo.wav");
    dataio::write_wav(&path, &random_audio(2, 2, 100)).unwrap();
    let err = dataio::read_audio(&path).unwrap_err().to_string();
    assert!(err.contains("stereo.wav"), "{err}");
}

#[test]
fn metadata_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("meta.csv");
    let labels = random_labels(3, 600);
    dataio::write_metadata(&path, &labels).unwrap();
    let back = dataio::read_metadata(&path).unwrap();
    // trailing empty frames are not representable in the CSV
    assert_eq!(back.clone().resized(600), labels);
    assert_eq!(dataio::format_metadata(&back), dataio::format_metadata(&labels));
}

#[test]
fn ir_bank_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let trajectories = vec![
        Trajectory::circular(0, "room9", -10.0, 1.2, 0.0, 20.0, 1.0).unwrap(),
        Trajectory::linear(1, "room9", [1.0, -1.0, 0.0], [1.0, 1.0, 0.3], 2.0).unwrap(),
    ];
    let bank = synth_bank(
        "room9",
        Format::Mic,
        trajectories,
        ReverbParams {
            rt60_s: 0.1,
            drr_db: 3.0,
        },
        8,
    )
    .unwrap();
    dataio::write_ir_bank(dir.path(), &bank).unwrap();
    let back = dataio::read_ir_bank(dir.path()).unwrap();
    assert_eq!(back.room_id, bank.room_id);
    assert_eq!(back.format, bank.format);
    assert_eq!(back.trajectories, bank.trajectories);
    for (ta, tb) in bank.irs.iter().zip(&back.irs) {
        assert_eq!(ta.len(), tb.len());
        for (a, b) in ta.iter().zip(tb) {
            // padded to a common length per trajectory, stored as f32
            for (ca, cb) in a.channels.iter().zip(&b.channels) {
                for (i, y) in cb.iter().enumerate() {
                    let x = ca.get(i).copied().unwrap_or(0.0);
                    assert!((x - y).abs() <= 1e-7 * x.abs().max(1.0));
                }
            }
        }
    }
}

#[test]
fn feature_dump_of_a_minute_of_audio() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("foa_x.skt");
    let audio = random_audio(4, 4, 60 * SAMPLE_RATE as usize);
    let stack = features::extract(&audio, Format::Foa).unwrap();
    dataio::write_feature_dump(&path, &stack).unwrap();
    let back = dataio::read_feature_dump(&path).unwrap();
    assert_eq!(back.data.dim(), (2999, 64, 7));
    assert_eq!(back.format, Format::Foa);
    for (a, b) in stack.data.iter().zip(back.data.iter()) {
        assert_eq!(*a as f32, *b as f32);
    }
}

#[test]
fn accdoa_dump_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("target.skt");
    let mut labels = LabelFrameSet::new(599);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for k in 0..599 {
        labels
            .insert(
                k,
                LabelEntry {
                    class_index: k % 12,
                    track_id: 0,
                    doa: random_doa(&mut rng),
                },
            )
            .unwrap();
    }
    let encoded = accdoa::encode(&labels, 12, 599);
    dataio::write_accdoa_dump(&path, &encoded.tensor).unwrap();
    let back = dataio::read_accdoa_dump(&path).unwrap();
    assert_eq!(back.data.dim(), (599, 12, 3));
    let decoded = accdoa::decode(&back, accdoa::DEFAULT_THRESHOLD);
    assert_eq!(decoded.n_entries(), labels.n_entries());
}

#[test]
fn truncated_tensor_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.skt");
    let tensor = accdoa::AccdoaTensor::zeros(10, 12);
    dataio::write_accdoa_dump(&path, &tensor).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
    assert!(dataio::read_accdoa_dump(&path).is_err());
}
