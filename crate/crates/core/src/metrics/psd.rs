use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::signal::SampleFrame;

fn default_segment_len() -> usize {
    4096
}

fn default_overlap() -> f64 {
    0.5
}

/// Welch estimator settings. `overlap` is a fraction of the segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsdConfig {
    #[serde(default = "default_segment_len")]
    pub segment_len: usize,
    #[serde(default = "default_overlap")]
    pub overlap: f64,
}

impl Default for PsdConfig {
    fn default() -> Self {
        Self {
            segment_len: default_segment_len(),
            overlap: default_overlap(),
        }
    }
}

/// One-sided power spectral density, Hann window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumEstimate {
    pub freqs: Vec<f64>,
    /// Power per hertz, full scale squared.
    pub psd: Vec<f64>,
    pub bin_width: f64,
    pub segment_len: usize,
    pub overlap: f64,
    pub segments: usize,
    pub window: &'static str,
}

impl SpectrumEstimate {
    pub fn psd_db(&self) -> Vec<f64> {
        self.psd.iter().map(|p| 10.0 * p.max(1e-300).log10()).collect()
    }

    pub fn total_power(&self) -> f64 {
        self.psd.iter().sum::<f64>() * self.bin_width
    }

    /// Power in bins whose centre lies in `[lo, hi)`, and the bin count.
    pub fn band_power(&self, lo: f64, hi: f64) -> (f64, usize) {
        let mut p = 0.0;
        let mut n = 0;
        for (f, v) in self.freqs.iter().zip(&self.psd) {
            if *f >= lo && *f < hi {
                p += v;
                n += 1;
            }
        }
        (p * self.bin_width, n)
    }

    pub fn nearest_bin(&self, f: f64) -> usize {
        ((f / self.bin_width).round() as usize).min(self.freqs.len() - 1)
    }

    /// Power in bins `centre - half_width ..= centre + half_width`.
    pub fn neighborhood_power(&self, centre: usize, half_width: usize) -> f64 {
        let lo = centre.saturating_sub(half_width);
        let hi = (centre + half_width).min(self.psd.len() - 1);
        self.psd[lo..=hi].iter().sum::<f64>() * self.bin_width
    }

    /// Frequency of the largest bin.
    pub fn peak(&self) -> (f64, f64) {
        let (i, p) = self
            .psd
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc });
        (self.freqs[i], p)
    }
}

/// Averaged modified periodogram (Welch), mean removed per segment.
pub fn welch_psd(stream: &SampleFrame, config: PsdConfig) -> Result<SpectrumEstimate, MetricsError> {
    let n = config.segment_len;
    if n < 2 || !n.is_power_of_two() {
        return Err(MetricsError::Config(format!(
            "segment length {n} must be a power of two"
        )));
    }
    if !(0.0..1.0).contains(&config.overlap) {
        return Err(MetricsError::Config(format!(
            "overlap {} must be in [0, 1)",
            config.overlap
        )));
    }
    let step = n - (config.overlap * n as f64).round() as usize;
    let x = stream.samples();
    if x.len() < n + step {
        return Err(MetricsError::TooShort {
            need: n + step,
            got: x.len(),
        });
    }
    let segments = 1 + (x.len() - n) / step;
    let window: Vec<f64> = (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect();
    let wss: f64 = window.iter().map(|w| w * w).sum();
    let fs = stream.sample_rate() as f64;
    let fft = FftPlanner::new().plan_fft_forward(n);
    let half = n / 2;
    let mut acc = vec![0.0; half + 1];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for s in 0..segments {
        let seg = &x[s * step..s * step + n];
        let mean = seg.iter().sum::<f64>() / n as f64;
        for ((b, &v), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex64::new((v - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }
    let scale = 1.0 / (fs * wss * segments as f64);
    let psd = acc
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let one_sided = if k == 0 || k == half { 1.0 } else { 2.0 };
            p * scale * one_sided
        })
        .collect();
    let bin_width = fs / n as f64;
    Ok(SpectrumEstimate {
        freqs: (0..=half).map(|k| k as f64 * bin_width).collect(),
        psd,
        bin_width,
        segment_len: n,
        overlap: config.overlap,
        segments,
        window: "hann",
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{saturate, SaturationModel};
    use crate::signal::{SignalGen, SignalSpec};

    fn gen(spec: SignalSpec, secs: f64) -> SampleFrame {
        SignalGen::new(spec, 8000)
            .unwrap()
            .generate((8000.0 * secs) as usize)
            .unwrap()
    }

    #[test]
    fn tone_peak_lands_on_its_bin() {
        let s = welch_psd(&gen(SignalSpec::tone(150.0, 1.0), 4.0), PsdConfig::default()).unwrap();
        let (f, _) = s.peak();
        assert!((f - 150.0).abs() <= s.bin_width);
        // Hann mainlobe: nearly all power within two bins of the tone
        let near = s.neighborhood_power(s.nearest_bin(150.0), 2);
        assert!(near / s.total_power() > 0.99);
    }

    #[test]
    fn parseval_and_flatness_for_white_noise() {
        let x = gen(SignalSpec::white_noise(1.0, 8), 60.0);
        let s = welch_psd(&x, PsdConfig::default()).unwrap();
        let mean = x.samples().iter().sum::<f64>() / x.frame_len() as f64;
        let var = x.samples().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.frame_len() as f64;
        assert!((s.total_power() / var - 1.0).abs() < 0.01);
        let level = var / 4000.0;
        let worst = s.psd[1..s.psd.len() - 1]
            .iter()
            .map(|p| (10.0 * (p / level).log10()).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1.5, "worst deviation {worst} dB");
    }

    #[test]
    fn clipped_sine_has_odd_harmonics() {
        let x = gen(SignalSpec::tone(150.0, 2.0), 4.0);
        let clip = SaturationModel::HardClip { limit: 1.0 };
        let y = SampleFrame::new(x.samples().iter().map(|&v| saturate(&clip, v)).collect(), 8000)
            .unwrap();
        let s = welch_psd(&y, PsdConfig::default()).unwrap();
        let floor = s.neighborhood_power(s.nearest_bin(300.0), 1) + 1e-30;
        for f in [450.0, 750.0] {
            let p = s.neighborhood_power(s.nearest_bin(f), 1);
            assert!(p > 1e6 * floor, "{f} Hz");
        }
    }

    #[test]
    fn configuration_errors() {
        let x = gen(SignalSpec::tone(100.0, 1.0), 2.0);
        let bad = PsdConfig {
            segment_len: 1000,
            overlap: 0.5,
        };
        assert!(matches!(welch_psd(&x, bad), Err(MetricsError::Config(_))));
        let short = gen(SignalSpec::tone(100.0, 1.0), 0.5);
        assert!(matches!(
            welch_psd(&short, PsdConfig::default()),
            Err(MetricsError::TooShort { .. })
        ));
    }
}
