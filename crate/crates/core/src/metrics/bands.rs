use serde::Serialize;

use super::psd::{welch_psd, PsdConfig, SpectrumEstimate};
use super::spl::REFERENCE_DB;
use super::MetricsError;
use crate::signal::SampleFrame;

/// Nominal third-octave centres from 10 Hz upward; index 20 is 1 kHz.
const NOMINAL: [f64; 37] = [
    10.0, 12.5, 16.0, 20.0, 25.0, 31.5, 40.0, 50.0, 63.0, 80.0, 100.0, 125.0, 160.0, 200.0, 250.0,
    315.0, 400.0, 500.0, 630.0, 800.0, 1000.0, 1250.0, 1600.0, 2000.0, 2500.0, 3150.0, 4000.0,
    5000.0, 6300.0, 8000.0, 10000.0, 12500.0, 16000.0, 20000.0, 25000.0, 31500.0, 40000.0,
];
const ONE_KHZ_INDEX: i32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThirdOctaveBand {
    pub nominal_hz: f64,
    /// Exact base-2 midband frequency `1000 * 2^(k/3)`.
    pub center_hz: f64,
    pub lower_hz: f64,
    pub upper_hz: f64,
}

/// Bands with nominal centres in `[min_nominal, max_nominal]`.
pub fn third_octave_bands(min_nominal: f64, max_nominal: f64) -> Vec<ThirdOctaveBand> {
    NOMINAL
        .iter()
        .enumerate()
        .filter(|(_, &n)| n >= min_nominal && n <= max_nominal)
        .map(|(i, &n)| {
            let center = 1000.0 * 2f64.powf((i as i32 - ONE_KHZ_INDEX) as f64 / 3.0);
            ThirdOctaveBand {
                nominal_hz: n,
                center_hz: center,
                lower_hz: center * 2f64.powf(-1.0 / 6.0),
                upper_hz: center * 2f64.powf(1.0 / 6.0),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandLevel {
    pub band: ThirdOctaveBand,
    pub power: f64,
    pub bins: usize,
}

/// Band powers from a spectrum; bands narrower than a bin have `bins == 0`.
pub fn band_levels(spectrum: &SpectrumEstimate, bands: &[ThirdOctaveBand]) -> Vec<BandLevel> {
    bands
        .iter()
        .map(|b| {
            let (power, bins) = spectrum.band_power(b.lower_hz, b.upper_hz);
            BandLevel {
                band: *b,
                power,
                bins,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandReduction {
    pub nominal_hz: f64,
    pub center_hz: f64,
    pub off_db: f64,
    pub on_db: f64,
    /// `off_db - on_db`; positive is quieter with control.
    pub reduction_db: f64,
    /// False when the band contains no spectral bin.
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThirdOctaveReport {
    pub bands: Vec<BandReduction>,
}

impl ThirdOctaveReport {
    /// Arithmetic mean of the valid band reductions with nominal centres in
    /// `[lo, hi]`.
    pub fn mean_reduction(&self, lo: f64, hi: f64) -> Option<f64> {
        let sel: Vec<f64> = self
            .bands
            .iter()
            .filter(|b| b.valid && b.nominal_hz >= lo && b.nominal_hz <= hi)
            .map(|b| b.reduction_db)
            .collect();
        (!sel.is_empty()).then(|| sel.iter().sum::<f64>() / sel.len() as f64)
    }

    pub fn band(&self, nominal_hz: f64) -> Option<&BandReduction> {
        self.bands.iter().find(|b| b.nominal_hz == nominal_hz)
    }
}

fn band_db(power: f64) -> f64 {
    10.0 * power.max(1e-30).log10() + REFERENCE_DB
}

/// Third-octave levels with and without control, 31.5-200 Hz.
pub fn third_octave_reduction(
    off: &SampleFrame,
    on: &SampleFrame,
    config: PsdConfig,
) -> Result<ThirdOctaveReport, MetricsError> {
    third_octave_reduction_in(off, on, config, 31.5, 200.0)
}

pub fn third_octave_reduction_in(
    off: &SampleFrame,
    on: &SampleFrame,
    config: PsdConfig,
    min_nominal: f64,
    max_nominal: f64,
) -> Result<ThirdOctaveReport, MetricsError> {
    if off.frame_len() != on.frame_len() || off.sample_rate() != on.sample_rate() {
        return Err(MetricsError::LengthMismatch {
            off: off.frame_len(),
            on: on.frame_len(),
        });
    }
    let bands = third_octave_bands(min_nominal, max_nominal);
    let s_off = welch_psd(off, config)?;
    let s_on = welch_psd(on, config)?;
    let l_off = band_levels(&s_off, &bands);
    let l_on = band_levels(&s_on, &bands);
    let bands = l_off
        .iter()
        .zip(&l_on)
        .map(|(a, b)| {
            let valid = a.bins > 0;
            let off_db = band_db(a.power);
            let on_db = band_db(b.power);
            BandReduction {
                nominal_hz: a.band.nominal_hz,
                center_hz: a.band.center_hz,
                off_db,
                on_db,
                reduction_db: if valid { off_db - on_db } else { 0.0 },
                valid,
            }
        })
        .collect();
    Ok(ThirdOctaveReport { bands })
}
