use std::io::Write;

use serde::Serialize;

use super::{MetricsError, SpectrumEstimate, ThirdOctaveReport};

#[derive(Serialize)]
struct BandRow {
    band_center_hz: f64,
    off_db: f64,
    on_db: f64,
    reduction_db: f64,
}

#[derive(Serialize)]
struct SpectrumRow {
    freq_hz: f64,
    psd_db: f64,
}

/// CSV: band centre, off level, on level, reduction (all dB). Invalid bands
/// are omitted.
pub fn write_band_csv<W: Write>(report: &ThirdOctaveReport, out: W) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    for b in report.bands.iter().filter(|b| b.valid) {
        w.serialize(BandRow {
            band_center_hz: b.nominal_hz,
            off_db: b.off_db,
            on_db: b.on_db,
            reduction_db: b.reduction_db,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// CSV: frequency, PSD in dB re full scale squared per hertz.
pub fn write_spectrum_csv<W: Write>(s: &SpectrumEstimate, out: W) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    for (f, db) in s.freqs.iter().zip(s.psd_db()) {
        w.serialize(SpectrumRow {
            freq_hz: *f,
            psd_db: db,
        })?;
    }
    w.flush()?;
    Ok(())
}
