use super::{SampleFrame, SignalError};

/// Fixed-length history of the most recent samples, exposed as a contiguous
/// slice ordered newest first.
///
/// Backed by a mirrored buffer of twice the length so that the window is
/// always one slice without copying.
#[derive(Debug, Clone)]
pub struct TapLine {
    buf: Vec<f64>,
    len: usize,
    head: usize,
}

impl TapLine {
    pub fn new(len: usize) -> Self {
        let len = len.max(1);
        Self {
            buf: vec![0.0; 2 * len],
            len,
            head: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.head = if self.head == 0 {
            self.len - 1
        } else {
            self.head - 1
        };
        self.buf[self.head] = x;
        self.buf[self.head + self.len] = x;
    }

    /// `window()[i]` is the sample pushed `i` steps ago.
    #[inline]
    pub fn window(&self) -> &[f64] {
        &self.buf[self.head..self.head + self.len]
    }

    pub fn newest(&self) -> f64 {
        self.buf[self.head]
    }

    pub fn energy(&self) -> f64 {
        self.window().iter().map(|v| v * v).sum()
    }

    pub fn clear(&mut self) {
        self.buf.iter_mut().for_each(|v| *v = 0.0);
        self.head = 0;
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Streaming FIR filter with persisted input history.
#[derive(Debug, Clone)]
pub struct FirFilter {
    coeffs: Vec<f64>,
    history: TapLine,
}

impl FirFilter {
    pub fn new(coeffs: Vec<f64>) -> Result<Self, SignalError> {
        if coeffs.is_empty() {
            return Err(SignalError::InvalidParameter(
                "FIR filter needs at least one tap".into(),
            ));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(SignalError::InvalidParameter(
                "FIR coefficients must be finite".into(),
            ));
        }
        let history = TapLine::new(coeffs.len());
        Ok(Self { coeffs, history })
    }

    pub fn identity() -> Self {
        Self::new(vec![1.0]).expect("unit impulse is valid")
    }

    pub fn zeros(taps: usize) -> Self {
        Self::new(vec![0.0; taps.max(1)]).expect("zero taps are valid")
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn taps(&self) -> usize {
        self.coeffs.len()
    }

    /// Replaces the coefficients, keeping as much history as fits.
    pub fn set_coeffs(&mut self, coeffs: Vec<f64>) -> Result<(), SignalError> {
        let mut next = Self::new(coeffs)?;
        let old = self.history.window();
        for &x in old.iter().take(next.taps()).rev() {
            next.history.push(x);
        }
        *self = next;
        Ok(())
    }

    pub fn reset(&mut self) {
        self.history.clear();
    }

    /// Pushes one input sample and returns the filter output for it.
    #[inline]
    pub fn push(&mut self, x: f64) -> f64 {
        self.history.push(x);
        dot(&self.coeffs, self.history.window())
    }

    /// Filters a frame, continuing from the stored history.
    pub fn process(&mut self, frame: &SampleFrame) -> Result<SampleFrame, SignalError> {
        if let Some(index) = frame.samples().iter().position(|s| !s.is_finite()) {
            return Err(SignalError::NonFinite { index });
        }
        let out: Vec<f64> = frame.samples().iter().map(|&x| self.push(x)).collect();
        SampleFrame::new(out, frame.sample_rate())
    }

    /// Squared l2 norm of the coefficients.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }
}

/// One-shot full-length linear convolution truncated to `input.len()`.
pub fn convolve(coeffs: &[f64], input: &[f64]) -> Vec<f64> {
    (0..input.len())
        .map(|n| {
            coeffs
                .iter()
                .enumerate()
                .take(n + 1)
                .map(|(i, c)| c * input[n - i])
                .sum()
        })
        .collect()
}
