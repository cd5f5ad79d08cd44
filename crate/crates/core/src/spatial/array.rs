use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::sh::{self, ShFit};
use super::SpatialError;
use crate::audio::{convolve, Audio};
use crate::model::{Doa, Format};
use crate::{SAMPLE_RATE, SPEED_OF_SOUND};

/// Taps of the windowed-sinc fractional delay filter.
pub const FRACTIONAL_DELAY_TAPS: usize = 64;
const KAISER_BETA: f64 = 10.0;
/// Source distance at which the anechoic gain is 1.
pub const REFERENCE_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrayKind {
    /// Ideal first-order Ambisonic encoder.
    FoaIdeal,
    /// Four omnidirectional capsules.
    Tetrahedral,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensor {
    pub doa: Doa,
    pub radius_m: f64,
}

/// Measured array responses on an equirectangular grid.
///
/// Nodes follow [`grid_points`]; `responses[node][bin][channel]` holds the
/// one-sided spectrum (`fft_size / 2 + 1` bins) of the response at that node.
#[derive(Debug, Clone, PartialEq)]
pub struct GridResponses {
    pub az_step_deg: f64,
    pub el_step_deg: f64,
    pub fft_size: usize,
    pub responses: Vec<Vec<[Complex64; 4]>>,
}

/// Grid directions: elevation from -90 to 90, azimuth from -180 upwards, azimuth fastest.
pub fn grid_points(az_step_deg: f64, el_step_deg: f64) -> Vec<Doa> {
    let n_az = (360.0 / az_step_deg).round() as usize;
    let n_el = (180.0 / el_step_deg).round() as usize + 1;
    let mut out = Vec::with_capacity(n_az * n_el);
    for e in 0..n_el {
        let el = (-90.0 + e as f64 * el_step_deg).clamp(-90.0, 90.0);
        for a in 0..n_az {
            out.push(Doa::new(-180.0 + a as f64 * az_step_deg, el).expect("grid direction"));
        }
    }
    out
}

fn divides(step: f64, total: f64) -> bool {
    step > 0.0 && {
        let n = total / step;
        (n - n.round()).abs() < 1e-9
    }
}

type ShCoefficients = Vec<[Vec<Complex64>; 4]>;

#[derive(Debug, Clone)]
pub struct ArrayModel {
    pub kind: ArrayKind,
    pub sensors: Vec<Sensor>,
    pub grid: Option<Arc<GridResponses>>,
    pub sh_order: usize,
    coefficients: OnceLock<Result<Arc<ShCoefficients>, String>>,
}

impl PartialEq for ArrayModel {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.sensors == other.sensors
            && self.grid == other.grid
            && self.sh_order == other.sh_order
    }
}

impl ArrayModel {
    pub fn foa() -> Self {
        Self {
            kind: ArrayKind::FoaIdeal,
            sensors: Vec::new(),
            grid: None,
            sh_order: 1,
            coefficients: OnceLock::new(),
        }
    }

    /// Tetrahedral capsules at (45, 35), (-45, -35), (135, -35), (-135, 35) on a 4.2 cm sphere.
    pub fn tetrahedral() -> Self {
        let at = |az, el| Sensor {
            doa: Doa::new(az, el).expect("capsule direction"),
            radius_m: 0.042,
        };
        Self::tetrahedral_with(vec![
            at(45.0, 35.0),
            at(-45.0, -35.0),
            at(135.0, -35.0),
            at(-135.0, 35.0),
        ])
        .expect("default geometry")
    }

    pub fn tetrahedral_with(sensors: Vec<Sensor>) -> Result<Self, SpatialError> {
        let model = Self {
            kind: ArrayKind::Tetrahedral,
            sensors,
            grid: None,
            sh_order: 0,
            coefficients: OnceLock::new(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn for_format(format: Format) -> Self {
        match format {
            Format::Foa => Self::foa(),
            Format::Mic => Self::tetrahedral(),
        }
    }

    /// Attaches measured grid responses, interpolated with SH expansions of `sh_order`.
    pub fn with_grid(mut self, grid: GridResponses, sh_order: usize) -> Result<Self, SpatialError> {
        self.grid = Some(Arc::new(grid));
        self.sh_order = sh_order;
        self.coefficients = OnceLock::new();
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), SpatialError> {
        if self.kind == ArrayKind::Tetrahedral {
            if self.sensors.len() != 4 {
                return Err(SpatialError::InvalidParameter(format!(
                    "tetrahedral array needs 4 sensors, got {}",
                    self.sensors.len()
                )));
            }
            if let Some(s) = self.sensors.iter().find(|s| !(s.radius_m > 0.0)) {
                return Err(SpatialError::InvalidParameter(format!(
                    "sensor radius {} must be positive",
                    s.radius_m
                )));
            }
        }
        if let Some(g) = &self.grid {
            if !divides(g.az_step_deg, 360.0) || !divides(g.el_step_deg, 180.0) {
                return Err(SpatialError::InvalidParameter(format!(
                    "grid spacing {} x {} deg must divide 360 x 180",
                    g.az_step_deg, g.el_step_deg
                )));
            }
            let expected = grid_points(g.az_step_deg, g.el_step_deg).len();
            if g.responses.len() != expected {
                return Err(SpatialError::InvalidParameter(format!(
                    "grid has {} responses, spacing implies {expected}",
                    g.responses.len()
                )));
            }
            let bins = g.fft_size / 2 + 1;
            if g.responses.iter().any(|r| r.len() != bins) {
                return Err(SpatialError::InvalidParameter(format!(
                    "every grid response needs {bins} bins"
                )));
            }
        }
        Ok(())
    }

    /// Capsule positions in metres.
    pub fn sensor_positions(&self) -> Vec<[f64; 3]> {
        self.sensors
            .iter()
            .map(|s| {
                let u = s.doa.to_unit_vector();
                [u[0] * s.radius_m, u[1] * s.radius_m, u[2] * s.radius_m]
            })
            .collect()
    }

    /// Plane-wave arrival time of each capsule relative to the array centre, in seconds.
    pub fn plane_wave_delays(&self, doa: Doa) -> [f64; 4] {
        let u = doa.to_unit_vector();
        let mut out = [0.0; 4];
        for (o, p) in out.iter_mut().zip(self.sensor_positions()) {
            *o = -(p[0] * u[0] + p[1] * u[1] + p[2] * u[2]) / SPEED_OF_SOUND;
        }
        out
    }

    fn sh_coefficients(&self) -> Result<Arc<ShCoefficients>, SpatialError> {
        let grid = self
            .grid
            .as_ref()
            .ok_or_else(|| SpatialError::InvalidParameter("array has no measured grid".into()))?;
        let order = self.sh_order;
        let result = self.coefficients.get_or_init(|| {
            let points = grid_points(grid.az_step_deg, grid.el_step_deg);
            let fit = ShFit::new(order, &points).map_err(|e| e.to_string())?;
            let bins = grid.fft_size / 2 + 1;
            let coeffs = (0..bins)
                .map(|b| {
                    std::array::from_fn(|c| {
                        let values: Vec<Complex64> =
                            grid.responses.iter().map(|r| r[b][c]).collect();
                        fit.fit(&values)
                    })
                })
                .collect();
            Ok(Arc::new(coeffs))
        });
        result.clone().map_err(|reason| SpatialError::IllConditioned {
            order,
            nodes: grid.responses.len(),
            reason,
        })
    }
}

/// Direction-dependent array response, before distance delay and attenuation.
#[derive(Debug, Clone, PartialEq)]
pub enum SteeringResponse {
    /// Frequency-independent channel gains (ideal FOA encoder, ACN/SN3D).
    Gains([f64; 4]),
    /// Pure per-channel delays in seconds relative to the array centre.
    Delays([f64; 4]),
    /// One-sided spectra per bin, interpolated from a measured grid.
    Spectrum {
        fft_size: usize,
        bins: Vec<[Complex64; 4]>,
    },
}

pub fn steering_response(doa: Doa, array: &ArrayModel) -> Result<SteeringResponse, SpatialError> {
    match array.kind {
        ArrayKind::FoaIdeal => {
            let y = sh::real_sh(1, doa);
            Ok(SteeringResponse::Gains([y[0], y[1], y[2], y[3]]))
        }
        ArrayKind::Tetrahedral => match &array.grid {
            None => Ok(SteeringResponse::Delays(array.plane_wave_delays(doa))),
            Some(grid) => {
                let coeffs = array.sh_coefficients()?;
                let basis = sh::real_sh(array.sh_order, doa);
                let bins = coeffs
                    .iter()
                    .map(|per_channel| {
                        std::array::from_fn(|c| {
                            basis
                                .iter()
                                .zip(&per_channel[c])
                                .map(|(y, k)| k * *y)
                                .sum()
                        })
                    })
                    .collect();
                Ok(SteeringResponse::Spectrum {
                    fft_size: grid.fft_size,
                    bins,
                })
            }
        },
    }
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser-windowed sinc delaying by `delay` samples, placed at absolute positions.
///
/// Returns `(first_index, taps)`; integer delays give a single unit tap.
pub fn fractional_delay_kernel(delay: f64) -> (isize, Vec<f64>) {
    let base = delay.floor();
    let frac = delay - base;
    let base = base as isize;
    if frac == 0.0 {
        return (base, vec![1.0]);
    }
    let half = (FRACTIONAL_DELAY_TAPS / 2) as isize;
    let first = base - half + 1;
    let norm = bessel_i0(KAISER_BETA);
    let taps = (0..FRACTIONAL_DELAY_TAPS)
        .map(|j| {
            let x = (first + j as isize) as f64 - delay;
            let r = x / half as f64;
            let w = if r.abs() >= 1.0 {
                0.0
            } else {
                bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / norm
            };
            let sinc = if x == 0.0 {
                1.0
            } else {
                (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
            };
            w * sinc
        })
        .collect();
    (first, taps)
}

fn place(out: &mut [f64], first: isize, taps: &[f64], gain: f64) {
    for (j, t) in taps.iter().enumerate() {
        let n = first + j as isize;
        if n >= 0 && (n as usize) < out.len() {
            out[n as usize] += gain * t;
        }
    }
}

fn kernel_end(delay: f64) -> usize {
    let (first, taps) = fractional_delay_kernel(delay);
    (first + taps.len() as isize).max(1) as usize
}

/// Free-field response of `array` to a source at `doa` and `distance_m`.
///
/// The steering response is delayed by `distance_m / c` (integer part plus a
/// windowed-sinc fractional part) and scaled by `1 m / distance_m`.
pub fn anechoic_ir(doa: Doa, distance_m: f64, array: &ArrayModel) -> Result<Audio, SpatialError> {
    if !(distance_m > 0.0) {
        return Err(SpatialError::InvalidParameter(format!(
            "distance {distance_m} m must be positive"
        )));
    }
    let fs = SAMPLE_RATE as f64;
    let delay = distance_m / SPEED_OF_SOUND * fs;
    let gain = REFERENCE_DISTANCE_M / distance_m;
    match steering_response(doa, array)? {
        SteeringResponse::Gains(g) => {
            let (first, taps) = fractional_delay_kernel(delay);
            let mut out = Audio::zeros(SAMPLE_RATE, 4, kernel_end(delay));
            for (ch, gc) in out.channels.iter_mut().zip(g) {
                place(ch, first, &taps, gain * gc);
            }
            Ok(out)
        }
        SteeringResponse::Delays(d) => {
            let delays: Vec<f64> = d.iter().map(|t| delay + t * fs).collect();
            let len = delays.iter().map(|&d| kernel_end(d)).max().unwrap_or(1);
            let mut out = Audio::zeros(SAMPLE_RATE, 4, len);
            for (ch, d) in out.channels.iter_mut().zip(delays) {
                let (first, taps) = fractional_delay_kernel(d);
                place(ch, first, &taps, gain);
            }
            Ok(out)
        }
        SteeringResponse::Spectrum { fft_size, bins } => {
            let (first, taps) = fractional_delay_kernel(delay);
            let mut shift = vec![0.0; kernel_end(delay)];
            place(&mut shift, first, &taps, gain);
            let mut planner = FftPlanner::<f64>::new();
            let inverse = planner.plan_fft_inverse(fft_size);
            let channels = (0..4)
                .map(|c| {
                    let mut full = vec![Complex64::new(0.0, 0.0); fft_size];
                    for (k, b) in bins.iter().enumerate() {
                        full[k] = b[c];
                        if k > 0 && k < fft_size - k {
                            full[fft_size - k] = b[c].conj();
                        }
                    }
                    inverse.process(&mut full);
                    let h: Vec<f64> = full.iter().map(|z| z.re / fft_size as f64).collect();
                    convolve(&h, &shift)
                })
                .collect();
            Ok(Audio {
                sample_rate: SAMPLE_RATE,
                channels,
            })
        }
    }
}

/// Anechoic counterpart of a bank: same trajectories, free-field IRs at each node's direction and distance.
pub fn anechoic_bank(
    bank: &super::IrBank,
    array: &ArrayModel,
) -> Result<super::IrBank, SpatialError> {
    bank.map_irs(bank.format, None, |_, node| {
        anechoic_ir(node.doa, node.distance_m, array)
    })
}
