use super::ControlError;
use crate::signal::{dot, FirFilter, SignalGen, TapLine};

/// Something that can play a training sample on a secondary source and
/// report what the error microphone picked up.
pub trait SecondaryPathProbe {
    fn probe(&mut self, drive: f64) -> f64;

    /// True impulse response, when known (simulation only).
    fn true_response(&self) -> Option<Vec<f64>> {
        None
    }
}

#[derive(Debug, Clone)]
pub struct CalibrationResult {
    pub shat: FirFilter,
    /// `10 log10(|s - shat|^2 / |s|^2)`, when the true path is known.
    pub misalignment_db: Option<f64>,
    pub training_samples: usize,
    /// Mean squared identification error over the final quarter.
    pub residual_power: f64,
}

const BLOCK_LEN: usize = 256;
const MISALIGNMENT_FLOOR_DB: f64 = -300.0;
// Growth of the tracked metric between the two halves of the final quarter
// that counts as divergence.
const DIVERGENCE_GROWTH: f64 = 2.0;

/// Misalignment between an estimate and the true response, zero padding the
/// shorter of the two.
pub fn misalignment_db(truth: &[f64], estimate: &[f64]) -> f64 {
    let n = truth.len().max(estimate.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    let err: f64 = (0..n).map(|i| (at(truth, i) - at(estimate, i)).powi(2)).sum();
    let norm: f64 = truth.iter().map(|v| v * v).sum();
    if norm == 0.0 {
        return f64::INFINITY;
    }
    (10.0 * (err / norm).log10()).max(MISALIGNMENT_FLOOR_DB)
}

/// Step size giving a normalized LMS rate of `factor` for a white training
/// signal of the given power.
pub fn identification_step(factor: f64, model_order: usize, training_power: f64) -> f64 {
    factor / (model_order.max(1) as f64 * training_power.max(f64::MIN_POSITIVE))
}

/// Incremental LMS system identification of a secondary path.
///
/// `shat += mu * eps * u_hist` with `eps = measured - shat . u_hist`.
#[derive(Debug, Clone)]
pub struct PathIdentifier {
    estimate: Vec<f64>,
    u_hist: TapLine,
    mu: f64,
    truth: Option<Vec<f64>>,
    samples: usize,
    block_err: f64,
    block_fill: usize,
    // per-block mean squared prediction error
    error_trace: Vec<f64>,
}

impl PathIdentifier {
    pub fn new(model_order: usize, mu: f64, truth: Option<Vec<f64>>) -> Result<Self, ControlError> {
        if model_order == 0 {
            return Err(ControlError::Config("model order must be at least 1".into()));
        }
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(ControlError::Config(format!("identification step {mu} invalid")));
        }
        Ok(Self {
            estimate: vec![0.0; model_order],
            u_hist: TapLine::new(model_order),
            mu,
            truth,
            samples: 0,
            block_err: 0.0,
            block_fill: 0,
            error_trace: Vec::new(),
        })
    }

    pub fn model_order(&self) -> usize {
        self.estimate.len()
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn estimate(&self) -> &[f64] {
        &self.estimate
    }

    /// Records one training sample `u` and the microphone sample it produced.
    #[inline]
    pub fn push(&mut self, u: f64, measured: f64) {
        self.u_hist.push(u);
        let eps = measured - dot(&self.estimate, self.u_hist.window());
        let g = self.mu * eps;
        for (s, &uk) in self.estimate.iter_mut().zip(self.u_hist.window()) {
            *s += g * uk;
        }
        self.samples += 1;
        self.block_err += eps * eps;
        self.block_fill += 1;
        if self.block_fill == BLOCK_LEN {
            self.error_trace.push(self.block_err / BLOCK_LEN as f64);
            self.block_err = 0.0;
            self.block_fill = 0;
        }
    }

    /// Validates convergence and returns the estimate.
    pub fn finish(self) -> Result<CalibrationResult, ControlError> {
        if !self.estimate.iter().all(|v| v.is_finite()) {
            return Err(ControlError::Calibration("estimate is not finite".into()));
        }
        let tail = |trace: &[f64]| -> Option<(f64, f64)> {
            let q = trace.len() / 4;
            if q < 2 {
                return None;
            }
            let last = &trace[trace.len() - q..];
            let (a, b) = last.split_at(q / 2);
            let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
            Some((mean(a), mean(b)))
        };
        let residual_power = tail(&self.error_trace)
            .map(|(a, b)| (a + b) / 2.0)
            .unwrap_or(f64::NAN);
        // Divergence shows in the prediction error whether or not the true
        // path is known; misalignment merely wobbles under tonal noise.
        // Only growth well above numerical noise counts.
        let floor = 1e-12;
        if let Some((first, second)) = tail(&self.error_trace) {
            if !second.is_finite() || (second > DIVERGENCE_GROWTH * first && second > floor) {
                return Err(ControlError::Calibration(format!(
                    "identification diverged: tracked error grew from {first:.3e} to {second:.3e}"
                )));
            }
        }
        let misalignment_db = self
            .truth
            .as_ref()
            .map(|t| misalignment_db(t, &self.estimate));
        let shat = FirFilter::new(self.estimate)
            .map_err(|e| ControlError::Calibration(e.to_string()))?;
        Ok(CalibrationResult {
            shat,
            misalignment_db,
            training_samples: self.samples,
            residual_power,
        })
    }
}

/// Identifies the secondary path behind `probe` by driving it with the
/// training generator for `n_samples` samples.
pub fn estimate_secondary_path<P: SecondaryPathProbe>(
    probe: &mut P,
    training: &mut SignalGen,
    n_samples: usize,
    model_order: usize,
    mu: f64,
) -> Result<CalibrationResult, ControlError> {
    let mut id = PathIdentifier::new(model_order, mu, probe.true_response())?;
    for _ in 0..n_samples {
        let u = training.next_sample();
        let m = probe.probe(u);
        id.push(u, m);
    }
    id.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::SignalSpec;

    struct FirProbe {
        path: FirFilter,
        ambient: Option<SignalGen>,
    }

    impl SecondaryPathProbe for FirProbe {
        fn probe(&mut self, drive: f64) -> f64 {
            let a = self.ambient.as_mut().map_or(0.0, |g| g.next_sample());
            self.path.push(drive) + a
        }
        fn true_response(&self) -> Option<Vec<f64>> {
            Some(self.path.coeffs().to_vec())
        }
    }

    fn training(amp: f64) -> SignalGen {
        SignalGen::new(SignalSpec::white_noise(amp, 11), 8000).unwrap()
    }

    #[test]
    fn quiet_identification_converges() {
        let mut probe = FirProbe {
            path: FirFilter::new(vec![0.9, 0.1]).unwrap(),
            ambient: None,
        };
        let amp = 0.5;
        let mu = identification_step(0.01, 8, amp * amp / 3.0);
        let r = estimate_secondary_path(&mut probe, &mut training(amp), 64_000, 8, mu).unwrap();
        assert!(r.misalignment_db.unwrap() <= -30.0, "{:?}", r.misalignment_db);
        assert_eq!(r.shat.taps(), 8);
    }

    #[test]
    fn truncated_model_hits_tail_floor() {
        let s: Vec<f64> = (0..12).map(|i| 0.8f64.powi(i)).collect();
        let order = 6;
        let total: f64 = s.iter().map(|v| v * v).sum();
        let tail: f64 = s[order..].iter().map(|v| v * v).sum();
        let floor = 10.0 * (tail / total).log10();
        let mut probe = FirProbe {
            path: FirFilter::new(s).unwrap(),
            ambient: None,
        };
        let amp = 0.5;
        let mu = identification_step(0.002, order, amp * amp / 3.0);
        let r = estimate_secondary_path(&mut probe, &mut training(amp), 200_000, order, mu).unwrap();
        let m = r.misalignment_db.unwrap();
        assert!((m - floor).abs() < 0.5, "misalignment {m} vs floor {floor}");
    }

    #[test]
    fn oversized_step_is_reported_as_divergence() {
        let mut probe = FirProbe {
            path: FirFilter::new(vec![0.9, 0.1]).unwrap(),
            ambient: None,
        };
        let amp = 0.5;
        let mu = identification_step(3.0, 8, amp * amp / 3.0);
        let err = estimate_secondary_path(&mut probe, &mut training(amp), 20_000, 8, mu).unwrap_err();
        assert!(matches!(err, ControlError::Calibration(_)));
    }

    #[test]
    fn misalignment_pads_shorter_vector() {
        assert_eq!(misalignment_db(&[1.0, 0.0], &[1.0]), MISALIGNMENT_FLOOR_DB);
        let m = misalignment_db(&[1.0, 1.0], &[1.0]);
        assert!((m - 10.0 * 0.5f64.log10()).abs() < 1e-12);
    }
}
