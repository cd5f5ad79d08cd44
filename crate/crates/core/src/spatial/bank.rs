use serde::{Deserialize, Serialize};

use super::SpatialError;
use crate::audio::Audio;
use crate::model::{angular_distance, Doa, Format, NodeRef};
use crate::SAMPLE_RATE;

/// Largest great-circle step allowed between consecutive trajectory nodes.
pub const MAX_NODE_STEP_DEG: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryShape {
    Circular,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryNode {
    pub doa: Doa,
    pub distance_m: f64,
}

/// Measurement positions along one path, roughly 1 degree apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub trajectory_id: usize,
    pub room_id: String,
    pub shape: TrajectoryShape,
    pub nodes: Vec<TrajectoryNode>,
}

impl Trajectory {
    /// Constant-elevation arc around the listener.
    pub fn circular(
        trajectory_id: usize,
        room_id: &str,
        elevation: f64,
        distance_m: f64,
        start_azimuth: f64,
        span_deg: f64,
        step_deg: f64,
    ) -> Result<Self, SpatialError> {
        if !(step_deg > 0.0) || !(span_deg >= 0.0) {
            return Err(SpatialError::InvalidParameter(format!(
                "circular trajectory step {step_deg} and span {span_deg}"
            )));
        }
        let n = (span_deg / step_deg).round() as usize + 1;
        let nodes = (0..n)
            .map(|i| {
                Ok(TrajectoryNode {
                    doa: Doa::new(start_azimuth + i as f64 * step_deg, elevation)?,
                    distance_m,
                })
            })
            .collect::<Result<Vec<_>, SpatialError>>()?;
        let t = Self {
            trajectory_id,
            room_id: room_id.to_string(),
            shape: TrajectoryShape::Circular,
            nodes,
        };
        t.validate()?;
        Ok(t)
    }

    /// Straight line between two Cartesian points (metres, listener at the origin),
    /// sampled so that consecutive nodes are about `step_deg` apart as seen from the origin.
    pub fn linear(
        trajectory_id: usize,
        room_id: &str,
        from: [f64; 3],
        to: [f64; 3],
        step_deg: f64,
    ) -> Result<Self, SpatialError> {
        let point = |s: f64| -> [f64; 3] { std::array::from_fn(|k| from[k] + s * (to[k] - from[k])) };
        let node_at = |p: [f64; 3]| -> Result<TrajectoryNode, SpatialError> {
            let distance_m = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            Ok(TrajectoryNode {
                doa: Doa::from_vector(p)?,
                distance_m,
            })
        };
        let mut nodes = vec![node_at(from)?];
        let fine = 20_000;
        let mut prev = nodes[0];
        for i in 1..=fine {
            let cand = node_at(point(i as f64 / fine as f64))?;
            let last = nodes.last().expect("non-empty");
            // take the last fine point that stays within the step
            if angular_distance(last.doa, cand.doa) > step_deg && prev != *last {
                nodes.push(prev);
            }
            if i == fine {
                nodes.push(cand);
            }
            prev = cand;
        }
        let t = Self {
            trajectory_id,
            room_id: room_id.to_string(),
            shape: TrajectoryShape::Linear,
            nodes,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), SpatialError> {
        if self.nodes.is_empty() {
            return Err(SpatialError::InvalidBank(format!(
                "trajectory {} has no nodes",
                self.trajectory_id
            )));
        }
        if let Some((i, n)) = self
            .nodes
            .iter()
            .enumerate()
            .find(|(_, n)| !(n.distance_m > 0.0))
        {
            return Err(SpatialError::InvalidBank(format!(
                "trajectory {} node {i} has distance {}",
                self.trajectory_id, n.distance_m
            )));
        }
        for (i, step) in self.arc_steps().iter().enumerate() {
            if *step > MAX_NODE_STEP_DEG + 1e-9 {
                return Err(SpatialError::InvalidBank(format!(
                    "trajectory {} nodes {i}->{} are {step:.3} deg apart",
                    self.trajectory_id,
                    i + 1
                )));
            }
        }
        Ok(())
    }

    pub fn arc_steps(&self) -> Vec<f64> {
        self.nodes
            .windows(2)
            .map(|w| angular_distance(w[0].doa, w[1].doa))
            .collect()
    }

    /// Cumulative arc from node 0, one entry per node.
    pub fn cumulative_arc(&self) -> Vec<f64> {
        let mut acc = 0.0;
        std::iter::once(0.0)
            .chain(self.arc_steps().into_iter().map(|s| {
                acc += s;
                acc
            }))
            .collect()
    }

    /// Arc available when walking from `start` in `direction` to the end of the path.
    pub fn available_arc(&self, start: usize, direction: i8) -> f64 {
        let cum = self.cumulative_arc();
        if direction >= 0 {
            cum[cum.len() - 1] - cum[start]
        } else {
            cum[start]
        }
    }
}

/// Node indices and cumulative arc for one traversal of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct MovingPath {
    pub nodes: Vec<usize>,
    pub arc_deg: Vec<f64>,
}

impl MovingPath {
    /// Walks from `start` in `direction` until at least `needed_deg` of arc is covered.
    pub fn along(
        trajectory: &Trajectory,
        start: usize,
        direction: i8,
        needed_deg: f64,
    ) -> Result<Self, SpatialError> {
        let n = trajectory.nodes.len();
        if start >= n {
            return Err(SpatialError::MissingIr {
                trajectory: trajectory.trajectory_id,
                index: start,
            });
        }
        let step: isize = if direction >= 0 { 1 } else { -1 };
        let mut nodes = vec![start];
        let mut arc_deg = vec![0.0];
        let mut idx = start as isize;
        while *arc_deg.last().expect("non-empty") < needed_deg - 1e-9 {
            let next = idx + step;
            if next < 0 || next >= n as isize {
                return Err(SpatialError::TrajectoryTooShort {
                    needed_deg,
                    available_deg: *arc_deg.last().expect("non-empty"),
                });
            }
            let d = angular_distance(
                trajectory.nodes[idx as usize].doa,
                trajectory.nodes[next as usize].doa,
            );
            arc_deg.push(arc_deg.last().expect("non-empty") + d);
            nodes.push(next as usize);
            idx = next;
        }
        Ok(Self { nodes, arc_deg })
    }

    /// Fractional position along `nodes` after `angle_deg` of travel, clamped to the path.
    pub fn fractional_index(&self, angle_deg: f64) -> f64 {
        let last = self.arc_deg.len() - 1;
        if last == 0 || angle_deg <= 0.0 {
            return 0.0;
        }
        if angle_deg >= self.arc_deg[last] {
            return last as f64;
        }
        let j = self.arc_deg.partition_point(|&a| a <= angle_deg) - 1;
        let span = self.arc_deg[j + 1] - self.arc_deg[j];
        if span <= 0.0 {
            j as f64
        } else {
            j as f64 + (angle_deg - self.arc_deg[j]) / span
        }
    }
}

/// A room's impulse responses, one 4-channel IR per trajectory node.
#[derive(Debug, Clone, PartialEq)]
pub struct IrBank {
    pub room_id: String,
    pub format: Format,
    pub sample_rate: u32,
    pub rt60_s: Option<f64>,
    pub trajectories: Vec<Trajectory>,
    /// `irs[t][k]` belongs to node `k` of trajectory `t`.
    pub irs: Vec<Vec<Audio>>,
}

impl IrBank {
    pub fn validate(&self) -> Result<(), SpatialError> {
        if self.sample_rate != SAMPLE_RATE {
            return Err(SpatialError::SampleRate {
                expected: SAMPLE_RATE,
                found: self.sample_rate,
            });
        }
        if self.trajectories.is_empty() {
            return Err(SpatialError::InvalidBank("no trajectories".into()));
        }
        if self.irs.len() != self.trajectories.len() {
            return Err(SpatialError::InvalidBank(format!(
                "{} trajectories but {} IR stacks",
                self.trajectories.len(),
                self.irs.len()
            )));
        }
        for (t, (traj, irs)) in self.trajectories.iter().zip(&self.irs).enumerate() {
            traj.validate()?;
            if traj.trajectory_id != t {
                return Err(SpatialError::InvalidBank(format!(
                    "trajectory at position {t} has id {}",
                    traj.trajectory_id
                )));
            }
            if irs.len() != traj.nodes.len() {
                return Err(SpatialError::InvalidBank(format!(
                    "trajectory {t} has {} nodes but {} IRs",
                    traj.nodes.len(),
                    irs.len()
                )));
            }
            for ir in irs {
                if ir.n_channels() != 4 {
                    return Err(SpatialError::ChannelCount {
                        expected: 4,
                        found: ir.n_channels(),
                    });
                }
                if ir.sample_rate != self.sample_rate {
                    return Err(SpatialError::SampleRate {
                        expected: self.sample_rate,
                        found: ir.sample_rate,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.trajectories.iter().map(|t| t.nodes.len()).sum()
    }

    pub fn node_refs(&self) -> impl Iterator<Item = NodeRef> + '_ {
        self.trajectories.iter().enumerate().flat_map(|(t, traj)| {
            (0..traj.nodes.len()).map(move |index| NodeRef {
                trajectory: t,
                index,
            })
        })
    }

    pub fn node(&self, r: NodeRef) -> Result<&TrajectoryNode, SpatialError> {
        self.trajectories
            .get(r.trajectory)
            .and_then(|t| t.nodes.get(r.index))
            .ok_or(SpatialError::MissingIr {
                trajectory: r.trajectory,
                index: r.index,
            })
    }

    pub fn ir(&self, r: NodeRef) -> Result<&Audio, SpatialError> {
        self.irs
            .get(r.trajectory)
            .and_then(|t| t.get(r.index))
            .ok_or(SpatialError::MissingIr {
                trajectory: r.trajectory,
                index: r.index,
            })
    }

    /// Same geometry with every IR replaced by `make(node)`.
    pub fn map_irs(
        &self,
        format: Format,
        rt60_s: Option<f64>,
        mut make: impl FnMut(NodeRef, &TrajectoryNode) -> Result<Audio, SpatialError>,
    ) -> Result<IrBank, SpatialError> {
        let irs = self
            .trajectories
            .iter()
            .enumerate()
            .map(|(t, traj)| {
                traj.nodes
                    .iter()
                    .enumerate()
                    .map(|(index, node)| {
                        make(
                            NodeRef {
                                trajectory: t,
                                index,
                            },
                            node,
                        )
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(IrBank {
            room_id: self.room_id.clone(),
            format,
            sample_rate: self.sample_rate,
            rt60_s,
            trajectories: self.trajectories.clone(),
            irs,
        })
    }
}
