use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SampleFrame, SignalError};

/// One sinusoidal component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToneSpec {
    pub freq_hz: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

/// A component specified relative to a reference level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelativeTone {
    pub freq_hz: f64,
    pub level_db: f64,
}

/// Integer harmonic of the fundamental, relative level in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Harmonic {
    pub multiple: u32,
    pub level_db: f64,
}

fn default_genset_fundamental() -> f64 {
    77.0
}

fn default_genset_harmonics() -> Vec<Harmonic> {
    vec![
        Harmonic {
            multiple: 2,
            level_db: -10.0,
        },
        Harmonic {
            multiple: 3,
            level_db: -16.0,
        },
    ]
}

fn default_floor_db() -> f64 {
    -40.0
}

/// Description of a deterministic signal source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSpec {
    Tone {
        freq_hz: f64,
        amplitude: f64,
        #[serde(default)]
        phase_rad: f64,
    },
    MultiTone {
        tones: Vec<ToneSpec>,
    },
    WhiteNoise {
        amplitude: f64,
        seed: u64,
    },
    /// Engine-generator stand-in: a dominant fundamental, integer harmonics,
    /// optional extra low-frequency components and a white floor, all levels
    /// relative to the fundamental amplitude.
    Genset {
        #[serde(default = "default_genset_fundamental")]
        fundamental_hz: f64,
        amplitude: f64,
        #[serde(default = "default_genset_harmonics")]
        harmonics: Vec<Harmonic>,
        #[serde(default)]
        components: Vec<RelativeTone>,
        #[serde(default = "default_floor_db")]
        floor_db: f64,
        seed: u64,
    },
}

impl SignalSpec {
    pub fn tone(freq_hz: f64, amplitude: f64) -> Self {
        SignalSpec::Tone {
            freq_hz,
            amplitude,
            phase_rad: 0.0,
        }
    }

    pub fn white_noise(amplitude: f64, seed: u64) -> Self {
        SignalSpec::WhiteNoise { amplitude, seed }
    }

    pub fn genset(amplitude: f64, seed: u64) -> Self {
        SignalSpec::Genset {
            fundamental_hz: default_genset_fundamental(),
            amplitude,
            harmonics: default_genset_harmonics(),
            components: Vec::new(),
            floor_db: default_floor_db(),
            seed,
        }
    }

    /// Returns a copy with every amplitude multiplied by `gain`.
    pub fn scaled(&self, gain: f64) -> Self {
        let mut s = self.clone();
        match &mut s {
            SignalSpec::Tone { amplitude, .. }
            | SignalSpec::WhiteNoise { amplitude, .. }
            | SignalSpec::Genset { amplitude, .. } => *amplitude *= gain,
            SignalSpec::MultiTone { tones } => tones.iter_mut().for_each(|t| t.amplitude *= gain),
        }
        s
    }
}

#[derive(Debug, Clone)]
struct Sinusoid {
    // cycles per sample
    norm_freq: f64,
    amplitude: f64,
    phase: f64,
}

impl Sinusoid {
    #[inline]
    fn at(&self, n: u64) -> f64 {
        // Reduce the phase in cycles before scaling so long runs keep precision.
        let cycles = (self.norm_freq * n as f64).fract();
        self.amplitude * (2.0 * PI * cycles + self.phase).sin()
    }
}

/// Stateful sample producer for a [`SignalSpec`].
///
/// Noise is drawn from a ChaCha8 stream keyed by the seed, so identical
/// `(spec, sample_rate)` pairs yield bit-identical output on every platform.
#[derive(Debug, Clone)]
pub struct SignalGen {
    spec: SignalSpec,
    sample_rate: u32,
    tones: Vec<Sinusoid>,
    noise_amplitude: f64,
    rng: Option<ChaCha8Rng>,
    index: u64,
}

impl SignalGen {
    pub fn new(spec: SignalSpec, sample_rate: u32) -> Result<Self, SignalError> {
        if sample_rate == 0 {
            return Err(SignalError::ZeroSampleRate);
        }
        let fs = sample_rate as f64;
        let nyquist = fs / 2.0;
        let mut tones = Vec::new();
        let mut add = |freq: f64, amplitude: f64, phase: f64| -> Result<(), SignalError> {
            if !freq.is_finite() || freq < 0.0 || !amplitude.is_finite() {
                return Err(SignalError::InvalidParameter(format!(
                    "bad tone {freq} Hz / {amplitude}"
                )));
            }
            if freq >= nyquist {
                return Err(SignalError::Aliasing { freq, nyquist });
            }
            tones.push(Sinusoid {
                norm_freq: freq / fs,
                amplitude,
                phase,
            });
            Ok(())
        };
        let mut noise_amplitude = 0.0;
        let mut seed = None;
        match &spec {
            SignalSpec::Tone {
                freq_hz,
                amplitude,
                phase_rad,
            } => add(*freq_hz, *amplitude, *phase_rad)?,
            SignalSpec::MultiTone { tones: list } => {
                for t in list {
                    add(t.freq_hz, t.amplitude, t.phase_rad)?;
                }
            }
            SignalSpec::WhiteNoise { amplitude, seed: s } => {
                noise_amplitude = *amplitude;
                seed = Some(*s);
            }
            SignalSpec::Genset {
                fundamental_hz,
                amplitude,
                harmonics,
                components,
                floor_db,
                seed: s,
            } => {
                add(*fundamental_hz, *amplitude, 0.0)?;
                for h in harmonics {
                    add(
                        fundamental_hz * h.multiple as f64,
                        amplitude * db_to_amplitude(h.level_db),
                        0.0,
                    )?;
                }
                for c in components {
                    add(c.freq_hz, amplitude * db_to_amplitude(c.level_db), 0.0)?;
                }
                noise_amplitude = amplitude * db_to_amplitude(*floor_db);
                seed = Some(*s);
            }
        }
        if !noise_amplitude.is_finite() {
            return Err(SignalError::InvalidParameter("noise amplitude".into()));
        }
        Ok(Self {
            spec,
            sample_rate,
            tones,
            noise_amplitude,
            rng: seed.map(ChaCha8Rng::seed_from_u64),
            index: 0,
        })
    }

    pub fn spec(&self) -> &SignalSpec {
        &self.spec
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Number of samples produced so far.
    pub fn position(&self) -> u64 {
        self.index
    }

    #[inline]
    pub fn next_sample(&mut self) -> f64 {
        let n = self.index;
        self.index += 1;
        let mut v: f64 = self.tones.iter().map(|t| t.at(n)).sum();
        if let Some(rng) = self.rng.as_mut() {
            v += self.noise_amplitude * rng.gen_range(-1.0..1.0);
        }
        v
    }

    pub fn generate(&mut self, n_samples: usize) -> Result<SampleFrame, SignalError> {
        if n_samples == 0 {
            return Err(SignalError::EmptyFrame);
        }
        let v = (0..n_samples).map(|_| self.next_sample()).collect();
        SampleFrame::new(v, self.sample_rate)
    }
}

pub fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}
