use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seldkit::audio::Audio;
use seldkit::model::{angular_distance, ClassSet, Format, Motion, NodeRef, SceneEvent, SceneScript, Speed};
use seldkit::spatial::{
    event_doa_at, mix_scene, render_moving, render_static, synth_bank, FormatInput, IrBank, MovingPath,
    ReverbParams, SampleStore, Trajectory, DEFAULT_HOP_S,
};
use seldkit::SAMPLE_RATE;

fn bank(format: Format) -> IrBank {
    let trajectories = vec![
        Trajectory::circular(0, "r", 0.0, 1.5, -60.0, 120.0, 1.0).unwrap(),
        Trajectory::circular(1, "r", 20.0, 2.0, 30.0, 90.0, 1.0).unwrap(),
    ];
    synth_bank(
        "r",
        format,
        trajectories,
        ReverbParams {
            rt60_s: 0.2,
            drr_db: 6.0,
        },
        4,
    )
    .unwrap()
}

fn noise(seed: u64, n: usize) -> Audio {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Audio::mono(SAMPLE_RATE, (0..n).map(|_| rng.random_range(-0.5..0.5)).collect())
}

fn event(id: usize, label: &str, layer: usize, onset: f64, offset: f64, motion: Motion) -> SceneEvent {
    SceneEvent {
        id,
        sample_id: format!("s{id}"),
        class_label: label.into(),
        layer_index: layer,
        is_interferer: layer == 3,
        onset,
        offset,
        motion: Some(motion),
    }
}

fn scene(bank: &IrBank) -> (SceneScript, SampleStore) {
    let node = |t, i| NodeRef {
        trajectory: t,
        index: i,
    };
    let at = |r: NodeRef| {
        let n = bank.node(r).unwrap();
        Motion::Static {
            doa: n.doa,
            distance_m: n.distance_m,
            node: r,
        }
    };
    let events = vec![
        event(0, "alarm", 0, 0.3, 2.0, at(node(0, 10))),
        event(
            1,
            "piano",
            1,
            1.0,
            3.5,
            Motion::Moving {
                trajectory_id: 1,
                start_index: 5,
                speed: Speed::Medium,
                direction: 1,
            },
        ),
        event(2, "general", 3, 0.5, 3.0, at(node(0, 100))),
    ];
    let mut store = SampleStore::new();
    for e in &events {
        store
            .insert(e.sample_id.clone(), noise(e.id as u64, (3.0 * SAMPLE_RATE as f64) as usize))
            .unwrap();
    }
    let script = SceneScript {
        recording_id: "x".into(),
        fold: 1,
        room_id: "r".into(),
        snr_db: 12.0,
        duration_s: 4.0,
        n_target_layers: 3,
        n_interferer_layers: 1,
        events,
    };
    (script, store)
}

#[test]
fn mixing_is_linear_in_events() {
    let bank = bank(Format::Foa);
    let (script, store) = scene(&bank);
    let classes = ClassSet::default();
    let input = [FormatInput {
        bank: &bank,
        ambience: None,
    }];
    let full = mix_scene(&script, &store, &classes, &input).unwrap();
    let mut sum = Audio::zeros(SAMPLE_RATE, 4, full.recordings[&Format::Foa].len());
    for e in &script.events {
        let single = SceneScript {
            events: vec![e.clone()],
            ..script.clone()
        };
        sum.add_at(&mix_scene(&single, &store, &classes, &input).unwrap().recordings[&Format::Foa], 0);
    }
    for (a, b) in full.recordings[&Format::Foa].channels.iter().zip(&sum.channels) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}

#[test]
fn labels_follow_event_trajectories() {
    let bank = bank(Format::Mic);
    let (script, store) = scene(&bank);
    let out = mix_scene(
        &script,
        &store,
        &ClassSet::default(),
        &[FormatInput {
            bank: &bank,
            ambience: None,
        }],
    )
    .unwrap();
    let classes = ClassSet::default();
    let piano = classes.index_of("piano").unwrap();
    let moving = &script.events[1];
    let mut checked = 0;
    for (k, row) in out.labels.frames() {
        // interferers never appear in the labels
        assert!(row.iter().all(|e| e.class_index < classes.n_classes()));
        for e in row.iter().filter(|e| e.class_index == piano) {
            let t = (k as f64 + 0.5) * 0.1;
            let expected = event_doa_at(moving, &bank.trajectories, t).unwrap();
            assert!(angular_distance(e.doa, expected) < 1.5, "frame {k}");
            checked += 1;
        }
    }
    assert!(checked >= 20);
}

#[test]
fn ambience_hits_requested_snr() {
    let bank = bank(Format::Foa);
    let (mut script, store) = scene(&bank);
    let ambience = noise(99, SAMPLE_RATE as usize);
    let ambience = Audio {
        sample_rate: SAMPLE_RATE,
        channels: vec![ambience.channels[0].clone(); 4],
    };
    for snr in [6.0, 20.0, 30.0] {
        script.snr_db = snr;
        let out = mix_scene(
            &script,
            &store,
            &ClassSet::default(),
            &[FormatInput {
                bank: &bank,
                ambience: Some(&ambience),
            }],
        )
        .unwrap();
        let measured = out.snr_db[&Format::Foa].unwrap();
        assert!((measured - snr).abs() < 1e-9, "{measured} vs {snr}");
    }
}

#[test]
fn moving_render_with_identical_irs_equals_static() {
    let trajectory = Trajectory::circular(0, "r", 0.0, 1.0, 0.0, 30.0, 1.0).unwrap();
    let path = MovingPath::along(&trajectory, 0, 1, 20.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ir = Audio {
        sample_rate: SAMPLE_RATE,
        channels: (0..4).map(|_| (0..300).map(|_| rng.random_range(-1.0..1.0)).collect()).collect(),
    };
    let irs: Vec<&Audio> = path.nodes.iter().map(|_| &ir).collect();
    let signal = noise(5, SAMPLE_RATE as usize);
    let moving = render_moving(&signal, &irs, &path, 20.0, DEFAULT_HOP_S).unwrap();
    let fixed = render_static(&signal, &ir).unwrap();
    assert_eq!(moving.len(), fixed.len());
    for (a, b) in moving.channels.iter().zip(&fixed.channels) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
