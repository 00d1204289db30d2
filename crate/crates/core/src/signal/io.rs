use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{SampleFrame, SignalError};

/// Writes samples as raw 32-bit little-endian floats, mono.
pub fn write_f32_le(path: &Path, frame: &SampleFrame) -> Result<(), SignalError> {
    let mut w = BufWriter::new(File::create(path)?);
    for &s in frame.samples() {
        w.write_all(&(s as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_f32_le(path: &Path, sample_rate: u32) -> Result<SampleFrame, SignalError> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() % 4 != 0 {
        return Err(SignalError::InvalidParameter(format!(
            "{} is not a whole number of f32 samples",
            path.display()
        )));
    }
    let samples = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    SampleFrame::new(samples, sample_rate)
}

/// Mono 32-bit float WAV for listening checks.
pub fn write_wav(path: &Path, frame: &SampleFrame) -> Result<(), SignalError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: frame.sample_rate(),
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    for &s in frame.samples() {
        w.write_sample(s as f32).map_err(wav_err)?;
    }
    w.finalize().map_err(wav_err)
}

fn wav_err(e: hound::Error) -> SignalError {
    match e {
        hound::Error::IoError(io) => SignalError::Io(io),
        other => SignalError::InvalidParameter(other.to_string()),
    }
}
