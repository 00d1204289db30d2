use std::collections::VecDeque;

use super::{SampleFrame, SignalError};

/// Integer-sample pure delay with zero initial state.
#[derive(Debug, Clone)]
pub struct DelayLine {
    delay: usize,
    buf: VecDeque<f64>,
}

impl DelayLine {
    pub fn new(delay: usize) -> Self {
        Self {
            delay,
            buf: std::iter::repeat(0.0).take(delay).collect(),
        }
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    #[inline]
    pub fn push(&mut self, x: f64) -> f64 {
        if self.delay == 0 {
            return x;
        }
        self.buf.push_back(x);
        self.buf.pop_front().unwrap_or(0.0)
    }

    pub fn process(&mut self, frame: &SampleFrame) -> Result<SampleFrame, SignalError> {
        let out = frame.samples().iter().map(|&x| self.push(x)).collect();
        SampleFrame::new(out, frame.sample_rate())
    }

    pub fn reset(&mut self) {
        self.buf.iter_mut().for_each(|v| *v = 0.0);
    }
}
