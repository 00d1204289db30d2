use serde::Serialize;

use super::psd::{welch_psd, PsdConfig};
use super::MetricsError;
use crate::signal::SampleFrame;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarmonicLevel {
    pub order: u32,
    pub freq_hz: f64,
    pub power: f64,
    /// Level relative to the fundamental, dB.
    pub ratio_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarmonicReport {
    pub fundamental_hz: f64,
    pub fundamental_power: f64,
    /// Orders 2..=k_max below Nyquist.
    pub harmonics: Vec<HarmonicLevel>,
}

impl HarmonicReport {
    /// Strongest harmonic relative to the fundamental.
    pub fn max_ratio_db(&self) -> Option<f64> {
        self.harmonics
            .iter()
            .map(|h| h.ratio_db)
            .fold(None, |m, r| Some(m.map_or(r, |m: f64| m.max(r))))
    }

    pub fn count_above(&self, threshold_db: f64) -> usize {
        self.harmonics.iter().filter(|h| h.ratio_db > threshold_db).count()
    }
}

/// Power at integer multiples of `fundamental_hz`, each summed over the
/// nearest spectral bin and its two neighbours, relative to the fundamental.
pub fn harmonic_ratio(
    stream: &SampleFrame,
    fundamental_hz: f64,
    k_max: u32,
    config: PsdConfig,
) -> Result<HarmonicReport, MetricsError> {
    let s = welch_psd(stream, config)?;
    if !(fundamental_hz >= 2.0 * s.bin_width) {
        return Err(MetricsError::Config(format!(
            "{fundamental_hz} Hz is not resolvable with {:.3} Hz bins",
            s.bin_width
        )));
    }
    let nyquist = stream.sample_rate() as f64 / 2.0;
    let power_at = |f: f64| s.neighborhood_power(s.nearest_bin(f), 1);
    let fundamental_power = power_at(fundamental_hz);
    let harmonics = (2..=k_max)
        .map(|k| (k, k as f64 * fundamental_hz))
        .filter(|&(_, f)| f < nyquist - s.bin_width)
        .map(|(order, freq_hz)| {
            let power = power_at(freq_hz);
            HarmonicLevel {
                order,
                freq_hz,
                power,
                ratio_db: 10.0 * (power.max(1e-300) / fundamental_power.max(1e-300)).log10(),
            }
        })
        .collect();
    Ok(HarmonicReport {
        fundamental_hz,
        fundamental_power,
        harmonics,
    })
}
