use std::f64::consts::PI;

use num_complex::Complex64;

// Analog C-weighting pole frequencies (Hz).
const POLE_LOW_HZ: f64 = 20.598_997;
const POLE_HIGH_HZ: f64 = 12_194.217;
const NORMALIZE_AT_HZ: f64 = 1000.0;

/// Transposed direct-form II biquad.
#[derive(Debug, Clone)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
    z: [f64; 2],
}

impl Biquad {
    #[inline]
    fn push(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.z[0];
        self.z[0] = self.b[1] * x - self.a[0] * y + self.z[1];
        self.z[1] = self.b[2] * x - self.a[1] * y;
        y
    }

    fn response(&self, w: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        (self.b[0] + self.b[1] * z1 + self.b[2] * z2) / (1.0 + self.a[0] * z1 + self.a[1] * z2)
    }
}

/// Streaming C-weighting filter: the analog double poles at 20.6 Hz and
/// 12.2 kHz with a double zero at DC, mapped by the bilinear transform and
/// normalized to 0 dB at 1 kHz.
#[derive(Debug, Clone)]
pub struct CWeighting {
    stages: [Biquad; 2],
    gain: f64,
    sample_rate: u32,
}

impl CWeighting {
    pub fn new(sample_rate: u32) -> Self {
        let fs2 = 2.0 * sample_rate as f64;
        let pole = |f: f64| {
            let w = 2.0 * PI * f;
            (fs2 - w) / (fs2 + w)
        };
        let p1 = pole(POLE_LOW_HZ);
        let p4 = pole(POLE_HIGH_HZ);
        let stages = [
            Biquad {
                b: [1.0, -2.0, 1.0],
                a: [-2.0 * p1, p1 * p1],
                z: [0.0; 2],
            },
            Biquad {
                b: [1.0, 2.0, 1.0],
                a: [-2.0 * p4, p4 * p4],
                z: [0.0; 2],
            },
        ];
        let mut c = Self {
            stages,
            gain: 1.0,
            sample_rate,
        };
        c.gain = 1.0 / c.response(NORMALIZE_AT_HZ).norm();
        c
    }

    fn response(&self, f: f64) -> Complex64 {
        let w = 2.0 * PI * f / self.sample_rate as f64;
        self.gain * self.stages[0].response(w) * self.stages[1].response(w)
    }

    /// Magnitude response in dB.
    pub fn response_db(&self, f: f64) -> f64 {
        20.0 * self.response(f).norm().log10()
    }

    #[inline]
    pub fn push(&mut self, x: f64) -> f64 {
        let y = self.stages[0].push(x);
        self.gain * self.stages[1].push(y)
    }

    pub fn process(&mut self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&v| self.push(v)).collect()
    }

    pub fn reset(&mut self) {
        for s in &mut self.stages {
            s.z = [0.0; 2];
        }
    }
}
