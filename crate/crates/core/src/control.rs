//! Per-finger PI loops driving a first-order actuator model, used to smooth
//! the step-wise reference produced by fixed-cadence inference.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::FINGER_NAMES;
use crate::error::{Error, Result};
use crate::runtime::TrajectoryEvent;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    pub kp: f64,
    pub ki: f64,
    pub i_max: f64,
}

impl Default for Gains {
    fn default() -> Self {
        Self {
            kp: 2.0,
            ki: 15.0,
            i_max: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantParams {
    pub time_constant_s: f64,
    pub dt_s: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            time_constant_s: 0.05,
            dt_s: 0.01,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_s > 0.0 && self.time_constant_s > 0.0 && self.dt_s < self.time_constant_s) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < dt ({}) < time constant ({})",
                self.dt_s, self.time_constant_s
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiController {
    pub gains: Gains,
    pub dt_s: f64,
    pub u_min: f64,
    pub u_max: f64,
    integral: f64,
}

impl PiController {
    pub fn new(gains: Gains, dt_s: f64) -> Self {
        Self {
            gains,
            dt_s,
            u_min: 0.0,
            u_max: 1.0,
            integral: 0.0,
        }
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
    }

    pub fn step(&mut self, reference: f64, measured: f64) -> f64 {
        let e = reference - measured;
        let lim = self.gains.i_max;
        self.integral = (self.integral + self.gains.ki * e * self.dt_s).clamp(-lim, lim);
        (self.gains.kp * e + self.integral).clamp(self.u_min, self.u_max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FingerPlant {
    pub position: f64,
    pub params: PlantParams,
}

impl FingerPlant {
    pub fn new(params: PlantParams) -> Self {
        Self { position: 0.0, params }
    }

    /// `x <- x + dt (u - x) / tau`, saturated to `[0, 1]`.
    pub fn step(&mut self, u: f64) -> f64 {
        let p = &self.params;
        self.position = (self.position + p.dt_s * (u - self.position) / p.time_constant_s).clamp(0.0, 1.0);
        self.position
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimRow {
    pub t_s: f64,
    pub reference: [f64; 5],
    pub position: [f64; 5],
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimTrace {
    pub rows: Vec<SimRow>,
}

impl SimTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t_s");
        for f in FINGER_NAMES {
            let _ = write!(s, ",ref_{f}");
        }
        for f in FINGER_NAMES {
            let _ = write!(s, ",pos_{f}");
        }
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "{:.4}", r.t_s);
            for v in r.reference.iter().chain(&r.position) {
                let _ = write!(s, ",{v:.6}");
            }
            s.push('\n');
        }
        s
    }

    pub fn last(&self) -> Option<&SimRow> {
        self.rows.last()
    }
}

/// A reference that becomes active at `t_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceStep {
    pub t_s: f64,
    pub reference: [f64; 5],
}

/// Turns events into reference steps, with time measured from the first event.
pub fn steps_from_events(events: &[TrajectoryEvent]) -> Vec<ReferenceStep> {
    let t0 = events.iter().map(|e| e.ts_ms).min().unwrap_or(0);
    let mut steps: Vec<ReferenceStep> = events
        .iter()
        .map(|e| ReferenceStep {
            t_s: (e.ts_ms - t0) as f64 / 1e3,
            reference: e.trajectory.values().map(f64::from),
        })
        .collect();
    steps.sort_by(|a, b| a.t_s.total_cmp(&b.t_s));
    steps
}

/// Parses one JSON event per non-empty line.
pub fn parse_event_lines(text: &str) -> Result<Vec<TrajectoryEvent>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::InvalidConfig(format!("event line {}: {e}", i + 1)))
        })
        .collect()
}

/// Simulates five independent loops for `duration_s`, holding the latest
/// reference step (relaxed before the first one). Row 0 is the initial state.
pub fn simulate(steps: &[ReferenceStep], gains: Gains, plant: PlantParams, duration_s: f64) -> Result<SimTrace> {
    plant.validate()?;
    if gains.kp < 0.0 || gains.ki < 0.0 || gains.i_max < 0.0 {
        return Err(Error::InvalidConfig(format!("gains must be non-negative: {gains:?}")));
    }
    let n = (duration_s / plant.dt_s).round() as usize;
    let mut ctrl: Vec<PiController> = (0..5).map(|_| PiController::new(gains, plant.dt_s)).collect();
    let mut fingers: Vec<FingerPlant> = (0..5).map(|_| FingerPlant::new(plant)).collect();
    let mut reference = [0.0; 5];
    let mut next_step = 0;
    let mut rows = Vec::with_capacity(n + 1);

    for k in 0..=n {
        let t_s = k as f64 * plant.dt_s;
        while next_step < steps.len() && steps[next_step].t_s <= t_s + 1e-9 {
            reference = steps[next_step].reference.map(|r| r.clamp(0.0, 1.0));
            next_step += 1;
        }
        let position: [f64; 5] = std::array::from_fn(|i| fingers[i].position);
        rows.push(SimRow {
            t_s,
            reference,
            position,
        });
        if k < n {
            for i in 0..5 {
                let u = ctrl[i].step(reference[i], fingers[i].position);
                fingers[i].step(u);
            }
        }
    }
    Ok(SimTrace { rows })
}
