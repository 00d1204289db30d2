use super::SignalError;

/// Default simulation sample rate in Hz.
pub const DEFAULT_SAMPLE_RATE: u32 = 8000;

/// A contiguous block of samples at a fixed rate.
///
/// Every sample is finite; constructors reject NaN and infinities so that
/// downstream filters never have to re-check.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFrame {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl SampleFrame {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, SignalError> {
        if sample_rate == 0 {
            return Err(SignalError::ZeroSampleRate);
        }
        if samples.is_empty() {
            return Err(SignalError::EmptyFrame);
        }
        if let Some(index) = samples.iter().position(|s| !s.is_finite()) {
            return Err(SignalError::NonFinite { index });
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// Skips validation; only for exercising error paths in tests.
    #[cfg(test)]
    pub(crate) fn from_raw_unchecked(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn zeros(frame_len: usize, sample_rate: u32) -> Result<Self, SignalError> {
        Self::new(vec![0.0; frame_len], sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn frame_len(&self) -> usize {
        self.samples.len()
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Splits into consecutive frames of `frame_len` samples; the last frame
    /// may be shorter.
    pub fn chunks(&self, frame_len: usize) -> impl Iterator<Item = SampleFrame> + '_ {
        let rate = self.sample_rate;
        self.samples
            .chunks(frame_len.max(1))
            .map(move |c| SampleFrame {
                samples: c.to_vec(),
                sample_rate: rate,
            })
    }

    /// Concatenates frames that share a sample rate.
    pub fn concat<'a, I>(frames: I) -> Result<Self, SignalError>
    where
        I: IntoIterator<Item = &'a SampleFrame>,
    {
        let mut rate = None;
        let mut samples = Vec::new();
        for f in frames {
            match rate {
                None => rate = Some(f.sample_rate),
                Some(r) if r != f.sample_rate => {
                    return Err(SignalError::RateMismatch {
                        expected: r,
                        found: f.sample_rate,
                    })
                }
                _ => {}
            }
            samples.extend_from_slice(&f.samples);
        }
        Self::new(samples, rate.unwrap_or(DEFAULT_SAMPLE_RATE))
    }

    pub fn mean_square(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64
    }

    pub fn rms(&self) -> f64 {
        self.mean_square().sqrt()
    }
}
