//! Curriculum stages: depth, residual fade-in, tolerance and hard-sample
//! weight per epoch range.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Result, SdfError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumStage {
    pub epoch_begin: usize,
    pub epoch_end: usize,
    pub depth: usize,
    pub residual_fade: bool,
    pub epsilon: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumSchedule {
    pub total_epochs: usize,
    #[serde(rename = "stage")]
    pub stages: Vec<CurriculumStage>,
}

/// Rows of the reference schedule: (end epoch out of 2000, depth, residual,
/// ε, λ).
const TABLE: [(usize, usize, bool, f64, f64); 7] = [
    (200, 5, false, 0.025, 0.0),
    (400, 6, true, 0.01, 0.1),
    (600, 6, false, 0.01, 0.1),
    (800, 7, true, 0.0025, 0.2),
    (1000, 7, false, 0.0025, 0.2),
    (1200, 8, true, 0.0, 0.5),
    (2000, 8, false, 0.0, 0.5),
];
const TABLE_EPOCHS: usize = 2000;

impl CurriculumSchedule {
    /// The full 2000-epoch curriculum.
    pub fn full() -> Self {
        Self::scaled(TABLE_EPOCHS).expect("the built-in schedule is valid")
    }

    /// The curriculum with its boundaries scaled to `total_epochs`
    /// (10/10/10/10/10/10/40 %). Needs at least 10 epochs.
    pub fn scaled(total_epochs: usize) -> Result<Self> {
        if total_epochs < 10 {
            return Err(SdfError::Schedule(format!(
                "{total_epochs} epochs is too few to scale the curriculum (need 10)"
            )));
        }
        let mut begin = 0;
        let stages = TABLE
            .iter()
            .map(|&(end, depth, residual_fade, epsilon, lambda)| {
                let end = end * total_epochs / TABLE_EPOCHS;
                let stage = CurriculumStage {
                    epoch_begin: begin,
                    epoch_end: end,
                    depth,
                    residual_fade,
                    epsilon,
                    lambda,
                };
                begin = end;
                stage
            })
            .collect();
        Self::new(total_epochs, stages)
    }

    /// Plain clamped-L1 training at a fixed depth.
    pub fn baseline(total_epochs: usize, depth: usize) -> Result<Self> {
        Self::new(
            total_epochs,
            vec![CurriculumStage {
                epoch_begin: 0,
                epoch_end: total_epochs,
                depth,
                residual_fade: false,
                epsilon: 0.0,
                lambda: 0.0,
            }],
        )
    }

    pub fn new(total_epochs: usize, stages: Vec<CurriculumStage>) -> Result<Self> {
        let schedule = CurriculumSchedule { total_epochs, stages };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(SdfError::Schedule(m));
        if self.stages.is_empty() {
            return err("schedule has no stages".into());
        }
        let mut expected_begin = 0;
        for (i, s) in self.stages.iter().enumerate() {
            if s.epoch_begin != expected_begin {
                return err(format!("stage {i} starts at {} but should start at {expected_begin}", s.epoch_begin));
            }
            if s.epoch_begin >= s.epoch_end {
                return err(format!("stage {i} is empty ({}..{})", s.epoch_begin, s.epoch_end));
            }
            if !(s.epsilon >= 0.0) || !(0.0..1.0).contains(&s.lambda) {
                return err(format!("stage {i}: need epsilon ≥ 0 and 0 ≤ lambda < 1"));
            }
            if s.depth < 2 {
                return err(format!("stage {i}: depth {} is below 2", s.depth));
            }
            match i.checked_sub(1).map(|p| &self.stages[p]) {
                None if s.residual_fade => return err("the first stage cannot fade in a layer".into()),
                None => {}
                Some(prev) => {
                    if s.depth < prev.depth || s.depth > prev.depth + 1 {
                        return err(format!("stage {i}: depth may only stay or grow by one"));
                    }
                    if s.residual_fade && s.depth != prev.depth + 1 {
                        return err(format!("stage {i}: residual fade-in needs a new layer"));
                    }
                    if s.epsilon > prev.epsilon {
                        return err(format!("stage {i}: epsilon must not increase"));
                    }
                    if s.lambda < prev.lambda {
                        return err(format!("stage {i}: lambda must not decrease"));
                    }
                }
            }
            expected_begin = s.epoch_end;
        }
        if expected_begin != self.total_epochs {
            return err(format!(
                "stages end at {expected_begin} but total_epochs is {}",
                self.total_epochs
            ));
        }
        Ok(())
    }

    pub fn initial_depth(&self) -> usize {
        self.stages[0].depth
    }

    pub fn final_depth(&self) -> usize {
        self.stages.last().map_or(0, |s| s.depth)
    }

    /// Stage index, stage and fade-in weight for `epoch`.
    pub fn stage_for_epoch(&self, epoch: usize) -> Result<(usize, &CurriculumStage, f64)> {
        let idx = self
            .stages
            .iter()
            .position(|s| epoch < s.epoch_end)
            .filter(|_| epoch < self.total_epochs)
            .ok_or_else(|| SdfError::Schedule(format!("epoch {epoch} is past the schedule end {}", self.total_epochs)))?;
        let s = &self.stages[idx];
        let alpha = if s.residual_fade {
            (epoch - s.epoch_begin) as f64 / (s.epoch_end - s.epoch_begin) as f64
        } else {
            1.0
        };
        Ok((idx, s, alpha))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("schedules always serialise")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let schedule: CurriculumSchedule = toml::from_str(text).map_err(|e| SdfError::Schedule(e.to_string()))?;
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SdfError::File {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_rows() {
        let s = CurriculumSchedule::full();
        let (_, st, a) = s.stage_for_epoch(100).unwrap();
        assert_eq!((st.depth, st.epsilon, st.lambda, a), (5, 0.025, 0.0, 1.0));
        let (_, st, a) = s.stage_for_epoch(300).unwrap();
        assert_eq!((st.depth, st.residual_fade, st.epsilon, st.lambda, a), (6, true, 0.01, 0.1, 0.5));
        let (_, st, a) = s.stage_for_epoch(1500).unwrap();
        assert_eq!((st.depth, st.epsilon, st.lambda, a), (8, 0.0, 0.5, 1.0));
        let depths: Vec<usize> = s.stages.iter().map(|s| s.depth).collect();
        assert_eq!(depths, [5, 6, 6, 7, 7, 8, 8]);
        assert!(s.stage_for_epoch(2000).is_err());
    }

    #[test]
    fn scaled_boundaries() {
        let s = CurriculumSchedule::scaled(300).unwrap();
        let ends: Vec<usize> = s.stages.iter().map(|s| s.epoch_end).collect();
        assert_eq!(ends, [30, 60, 90, 120, 150, 180, 300]);
        assert!(CurriculumSchedule::scaled(9).is_err());
        // Ramp covers [0, 1) within a residual stage.
        assert_eq!(s.stage_for_epoch(30).unwrap().2, 0.0);
        assert_eq!(s.stage_for_epoch(45).unwrap().2, 0.5);
    }

    #[test]
    fn toml_round_trip() {
        let s = CurriculumSchedule::full();
        assert_eq!(CurriculumSchedule::from_toml(&s.to_toml()).unwrap(), s);
    }

    #[test]
    fn rejects_non_monotone_schedules() {
        let mut s = CurriculumSchedule::full();
        s.stages[3].epsilon = 0.5;
        assert!(s.validate().is_err());
        let mut s = CurriculumSchedule::full();
        s.stages[2].lambda = 0.0;
        assert!(s.validate().is_err());
        let mut s = CurriculumSchedule::full();
        s.stages[2].depth = 5;
        assert!(s.validate().is_err());
        let mut s = CurriculumSchedule::full();
        s.stages[6].epoch_end = 1999;
        assert!(s.validate().is_err());
        let mut s = CurriculumSchedule::full();
        s.stages[1].epoch_begin = 201;
        assert!(s.validate().is_err());
    }
}
