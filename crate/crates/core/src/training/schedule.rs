//! Learning-rate reduction on plateau and early stopping.

/// `candidate` improves on `best` by more than `min_delta`.
pub fn improves(candidate: f64, best: f64, min_delta: f64) -> bool {
    candidate < best - min_delta
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlateauScheduler {
    pub factor: f64,
    pub patience: usize,
    pub min_lr: f64,
    pub min_delta: f64,
    best: f64,
    wait: usize,
}

impl PlateauScheduler {
    pub fn new(factor: f64, patience: usize, min_lr: f64, min_delta: f64) -> Self {
        Self {
            factor,
            patience,
            min_lr,
            min_delta,
            best: f64::INFINITY,
            wait: 0,
        }
    }

    /// Records one epoch's validation loss; returns the learning rate for
    /// the next epoch.
    pub fn observe(&mut self, val_loss: f64, lr: f64) -> f64 {
        if improves(val_loss, self.best, self.min_delta) {
            self.best = val_loss;
            self.wait = 0;
            return lr;
        }
        self.wait += 1;
        if self.wait >= self.patience {
            self.wait = 0;
            return (lr * self.factor).max(self.min_lr).min(lr);
        }
        lr
    }
}

/// Replays a validation-loss history through the plateau rule. Entry `k`
/// of the result is the rate in effect after epoch `k`.
pub fn reduce_lr_on_plateau(
    val_losses: &[f64],
    initial_lr: f64,
    factor: f64,
    patience: usize,
    min_lr: f64,
) -> Vec<f64> {
    let mut s = PlateauScheduler::new(factor, patience, min_lr, 1e-7);
    let mut lr = initial_lr;
    val_losses
        .iter()
        .map(|&l| {
            lr = s.observe(l, lr);
            lr
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop { best_epoch: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub min_delta: f64,
    best: f64,
    best_epoch: Option<usize>,
    wait: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        Self {
            patience,
            min_delta,
            best: f64::INFINITY,
            best_epoch: None,
            wait: 0,
        }
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }

    /// Records epoch `epoch` (0-based). Returns whether it became the new best
    /// together with the stop decision.
    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> (bool, StopDecision) {
        if improves(val_loss, self.best, self.min_delta) {
            self.best = val_loss;
            self.best_epoch = Some(epoch);
            self.wait = 0;
            return (true, StopDecision::Continue);
        }
        self.wait += 1;
        if self.wait >= self.patience {
            let best_epoch = self.best_epoch.unwrap_or(0);
            return (false, StopDecision::Stop { best_epoch });
        }
        (false, StopDecision::Continue)
    }
}

/// Replays a validation-loss history; stops at the first epoch where the
/// patience runs out.
pub fn early_stop_check(val_losses: &[f64], patience: usize) -> StopDecision {
    let mut es = EarlyStopping::new(patience, 1e-7);
    for (epoch, &l) in val_losses.iter().enumerate() {
        if let (_, stop @ StopDecision::Stop { .. }) = es.observe(epoch, l) {
            return stop;
        }
    }
    StopDecision::Continue
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decreasing_losses_keep_lr() {
        let lrs = reduce_lr_on_plateau(&[5.0, 4.0, 3.0, 2.0, 1.0, 0.5, 0.1], 1e-3, 0.5, 2, 1e-6);
        assert!(lrs.iter().all(|&l| l == 1e-3));
    }

    #[test]
    fn flat_losses_halve_lr() {
        // First epoch sets the reference; then `patience` flat epochs.
        let lrs = reduce_lr_on_plateau(&[1.0; 6], 1e-3, 0.5, 5, 1e-6);
        assert_eq!(lrs[4], 1e-3);
        assert_eq!(lrs[5], 5e-4);
        // Counter resets after a reduction.
        let lrs = reduce_lr_on_plateau(&[1.0; 11], 1e-3, 0.5, 5, 1e-6);
        assert_eq!(lrs[9], 5e-4);
        assert_eq!(lrs[10], 2.5e-4);
    }

    #[test]
    fn floor_holds() {
        let lrs = reduce_lr_on_plateau(&[1.0; 20], 1e-6, 0.5, 2, 1e-6);
        assert!(lrs.iter().all(|&l| l == 1e-6));
    }

    #[test]
    fn sub_threshold_gain_is_not_improvement() {
        let lrs = reduce_lr_on_plateau(&[1.0, 1.0 - 5e-8, 1.0 - 9e-8], 1e-3, 0.5, 2, 1e-6);
        assert_eq!(lrs[2], 5e-4);
    }

    #[test]
    fn early_stop_cases() {
        assert_eq!(early_stop_check(&[5.0, 4.0, 3.0, 2.0], 2), StopDecision::Continue);
        assert_eq!(
            early_stop_check(&[5.0, 4.0, 4.1, 4.2, 4.3], 3),
            StopDecision::Stop { best_epoch: 1 }
        );
        assert_eq!(early_stop_check(&[5.0, 4.0], 3), StopDecision::Continue);
    }
}
