use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{IrBank, SpatialError};
use crate::model::{Motion, NodeRef, SceneScript, Speed};

/// Moving draws that fail to fit a trajectory before the event falls back to static.
pub const MAX_MOVING_ATTEMPTS: usize = 10;

/// Gives every event a static position or a moving trajectory from `bank`.
///
/// Static positions are uniform over all bank nodes. Moving events pick a
/// trajectory, speed and direction uniformly, then a start node uniformly among
/// those leaving enough arc for the event at that speed.
pub fn assign_spatial(
    script: &SceneScript,
    bank: &IrBank,
    p_moving: f64,
    seed: u64,
) -> Result<SceneScript, SpatialError> {
    if bank.trajectories.is_empty() || bank.n_nodes() == 0 {
        return Err(SpatialError::InvalidBank("no trajectories".into()));
    }
    if !(0.0..=1.0).contains(&p_moving) {
        return Err(SpatialError::InvalidParameter(format!(
            "p_moving {p_moving} outside [0, 1]"
        )));
    }
    let cumulative: Vec<Vec<f64>> = bank
        .trajectories
        .iter()
        .map(|t| t.cumulative_arc())
        .collect();
    let all_nodes: Vec<NodeRef> = bank.node_refs().collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = script.clone();
    for event in &mut out.events {
        let mut motion = None;
        if rng.random::<f64>() < p_moving {
            let duration = event.duration();
            for _ in 0..MAX_MOVING_ATTEMPTS {
                let trajectory_id = rng.random_range(0..bank.trajectories.len());
                let speed = Speed::ALL[rng.random_range(0..Speed::ALL.len())];
                let direction: i8 = if rng.random::<bool>() { 1 } else { -1 };
                let needed = speed.deg_per_s() * duration;
                let cum = &cumulative[trajectory_id];
                let total = cum[cum.len() - 1];
                let feasible: Vec<usize> = (0..cum.len())
                    .filter(|&i| {
                        let available = if direction > 0 { total - cum[i] } else { cum[i] };
                        available >= needed
                    })
                    .collect();
                if feasible.is_empty() {
                    continue;
                }
                let start_index = feasible[rng.random_range(0..feasible.len())];
                motion = Some(Motion::Moving {
                    trajectory_id,
                    start_index,
                    speed,
                    direction,
                });
                break;
            }
        }
        let motion = match motion {
            Some(m) => m,
            None => {
                let node = all_nodes[rng.random_range(0..all_nodes.len())];
                let n = bank.node(node)?;
                Motion::Static {
                    doa: n.doa,
                    distance_m: n.distance_m,
                    node,
                }
            }
        };
        event.motion = Some(motion);
    }
    Ok(out)
}
