//! Learning-rate schedule: warmup to a peak, then linear decay to zero.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("invalid schedule: {0}")]
    Invalid(String),
    #[error("step {step} is past the end of the schedule ({total})")]
    StepOutOfRange { step: u64, total: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScheduleShape {
    /// Linear warmup from zero to the peak, then linear decay to zero at
    /// `total_steps`.
    #[default]
    LinearWarmupLinearDecay,
    /// Constant peak for the warmup steps, then `peak * sqrt(warmup / step)`.
    /// This is the inverse-square-root schedule of the original T5
    /// pre-training, kept for parity experiments; it does not reach zero.
    InverseSqrt,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    peak: f64,
    warmup_steps: u64,
    total_steps: u64,
    shape: ScheduleShape,
}

impl LrSchedule {
    pub const DEFAULT_PEAK: f64 = 4e-3;
    pub const DEFAULT_WARMUP: u64 = 5_000;

    pub fn new(peak: f64, warmup_steps: u64, total_steps: u64) -> Result<Self, ScheduleError> {
        Self::with_shape(peak, warmup_steps, total_steps, ScheduleShape::default())
    }

    pub fn with_shape(
        peak: f64,
        warmup_steps: u64,
        total_steps: u64,
        shape: ScheduleShape,
    ) -> Result<Self, ScheduleError> {
        if !(peak > 0.0 && peak.is_finite()) {
            return Err(ScheduleError::Invalid(format!("peak {peak} must be positive")));
        }
        if warmup_steps == 0 || warmup_steps >= total_steps {
            return Err(ScheduleError::Invalid(format!(
                "need 0 < warmup ({warmup_steps}) < total ({total_steps})"
            )));
        }
        Ok(LrSchedule {
            peak,
            warmup_steps,
            total_steps,
            shape,
        })
    }

    pub fn peak(&self) -> f64 {
        self.peak
    }

    pub fn warmup_steps(&self) -> u64 {
        self.warmup_steps
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    pub fn shape(&self) -> ScheduleShape {
        self.shape
    }

    pub fn lr_at(&self, step: u64) -> Result<f64, ScheduleError> {
        if step > self.total_steps {
            return Err(ScheduleError::StepOutOfRange {
                step,
                total: self.total_steps,
            });
        }
        let (s, w, t) = (step as f64, self.warmup_steps as f64, self.total_steps as f64);
        Ok(match self.shape {
            ScheduleShape::LinearWarmupLinearDecay if step <= self.warmup_steps => self.peak * s / w,
            ScheduleShape::LinearWarmupLinearDecay => self.peak * (t - s) / (t - w),
            ScheduleShape::InverseSqrt if step <= self.warmup_steps => self.peak,
            ScheduleShape::InverseSqrt => self.peak * (w / s).sqrt(),
        })
    }
}

/// Optimizer steps needed to see every sequence `epochs` times at the given
/// effective batch size (a final partial batch counts as a step).
pub fn total_steps_for(sequences: u64, epochs: u64, effective_batch: u64) -> u64 {
    (sequences * epochs).div_ceil(effective_batch.max(1))
}
