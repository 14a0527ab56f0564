/// Multiplies the learning rate by `factor` whenever the best validation loss
/// has not improved for `patience` consecutive epochs, then resets the count.
#[derive(Clone, Debug, PartialEq)]
pub struct PlateauScheduler {
    pub lr: f64,
    pub patience: usize,
    pub factor: f64,
    best: Option<f64>,
    stale: usize,
}

impl PlateauScheduler {
    pub fn new(lr: f64, patience: usize, factor: f64) -> Self {
        Self {
            lr,
            patience: patience.max(1),
            factor,
            best: None,
            stale: 0,
        }
    }

    /// Feeds one epoch's validation loss and returns the lr for the next epoch.
    pub fn observe(&mut self, val_loss: f64) -> f64 {
        match self.best {
            Some(b) if val_loss >= b || val_loss.is_nan() => {
                self.stale += 1;
                if self.stale >= self.patience {
                    self.lr *= self.factor;
                    self.stale = 0;
                }
            }
            _ => {
                self.best = Some(val_loss);
                self.stale = 0;
            }
        }
        self.lr
    }
}

/// Learning rate after replaying `history` through a fresh scheduler.
pub fn plateau_lr(history: &[f64], lr: f64, patience: usize, factor: f64) -> f64 {
    let mut s = PlateauScheduler::new(lr, patience, factor);
    history.iter().fold(lr, |_, &l| s.observe(l))
}
