//! Curriculum that ramps the share of sketch pairs from 0.1 to 0.9.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleState {
    pub i_cur: usize,
    pub i_max: usize,
    /// Ramp exponent.
    pub lambda: f64,
}

impl ScheduleState {
    pub fn new(i_cur: usize, i_max: usize, lambda: f64) -> Result<Self> {
        let s = ScheduleState { i_cur, i_max, lambda };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.i_max == 0 {
            return invalid("schedule", "i_max must be positive");
        }
        if self.i_cur > self.i_max {
            return invalid("schedule", format!("i_cur {} exceeds i_max {}", self.i_cur, self.i_max));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return invalid("schedule", format!("lambda {} must be positive", self.lambda));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixRatio {
    pub sketch: f64,
    pub edge: f64,
}

/// `P_sk = 0.1 + min(0.8, (i_cur / i_max)^λ)`, `P_edge = 1 - P_sk`.
pub fn mix_ratio(state: &ScheduleState) -> Result<MixRatio> {
    state.validate()?;
    let t = state.i_cur as f64 / state.i_max as f64;
    let sketch = 0.1 + t.powf(state.lambda).min(0.8);
    Ok(MixRatio { sketch, edge: 1.0 - sketch })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Sketch,
    Edge,
}

/// Each slot is a sketch independently with probability `p_sketch`.
pub fn draw_batch_sources(p_sketch: f64, batch: usize, rng: &mut impl Rng) -> Vec<Source> {
    (0..batch)
        .map(|_| if rng.random::<f64>() < p_sketch { Source::Sketch } else { Source::Edge })
        .collect()
}

/// How the sketch share evolves over a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleMode {
    /// Gradual ramp by [`mix_ratio`].
    Ramp,
    /// Edge maps only until `switch` (a fraction of the run), then sketches only.
    PretrainFinetune { switch: f64 },
}

impl ScheduleMode {
    pub fn sketch_probability(&self, state: &ScheduleState) -> Result<f64> {
        match *self {
            ScheduleMode::Ramp => Ok(mix_ratio(state)?.sketch),
            ScheduleMode::PretrainFinetune { switch } => {
                state.validate()?;
                if !(0.0..=1.0).contains(&switch) {
                    return invalid("schedule", format!("switch point {switch} outside [0, 1]"));
                }
                let t = state.i_cur as f64 / state.i_max as f64;
                Ok(if t < switch { 0.0 } else { 1.0 })
            }
        }
    }
}
