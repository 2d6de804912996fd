use crate::error::{Error, Result};

/// Constant rate for the first `warm_epochs`, then divided by `decay_factor`
/// after every further epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub base_lr: f64,
    pub warm_epochs: usize,
    pub decay_factor: f64,
    pub total_epochs: usize,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self { base_lr: 0.1, warm_epochs: 2, decay_factor: 10.0, total_epochs: 5 }
    }
}

impl LrSchedule {
    /// Learning rate for 1-based `epoch`.
    pub fn lr_at_epoch(&self, epoch: usize) -> Result<f64> {
        if epoch == 0 || epoch > self.total_epochs {
            return Err(Error::Invalid(format!("epoch {epoch} outside 1..={}", self.total_epochs)));
        }
        let decays = epoch.saturating_sub(self.warm_epochs);
        Ok(self.base_lr / self.decay_factor.powi(decays as i32))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr >= 0.0 && self.base_lr.is_finite()) {
            return Err(Error::Invalid(format!("base_lr must be a finite non-negative number, got {}", self.base_lr)));
        }
        if self.decay_factor < 1.0 {
            return Err(Error::Invalid(format!("decay_factor {} would increase the rate", self.decay_factor)));
        }
        Ok(())
    }
}
