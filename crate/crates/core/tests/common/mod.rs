#![allow(dead_code)]

use hush_core::adaptive::{Controller, ControllerParams, Mode};
use hush_core::metrics::{welch_psd, PsdConfig};
use hush_core::plant::{PathModel, Plant, SaturationModel};
use hush_core::signal::{FirFilter, SampleFrame, SignalSpec};

pub const FS: u32 = 8000;

#[derive(Default)]
pub struct Trace {
    pub e: Vec<f64>,
    pub d: Vec<f64>,
    pub y: Vec<f64>,
    pub dhat: Vec<f64>,
}

impl Trace {
    pub fn tail(v: &[f64], n: usize) -> SampleFrame {
        SampleFrame::new(v[v.len() - n..].to_vec(), FS).unwrap()
    }
}

pub fn path(delay: usize, gain: f64, fir: &[f64]) -> PathModel {
    PathModel {
        delay,
        gain,
        fir: fir.to_vec(),
    }
}

pub fn single_unit(signal: SignalSpec, primary: PathModel, secondary: PathModel, sat: SaturationModel) -> Plant {
    Plant::from_paths(vec![signal], vec![vec![primary]], vec![vec![secondary]], vec![sat], FS).unwrap()
}

/// Controller with the exact secondary path of unit 0.
pub fn matched_controller(plant: &Plant, params: ControllerParams, mode: Mode) -> Controller {
    let shat = FirFilter::new(plant.secondary_response(0, 0)).unwrap();
    Controller::with_secondary_path(params, mode, shat).unwrap()
}

/// Runs the loop for `n` samples. The feedforward reference is the raw
/// source sample.
pub fn run(plant: &mut Plant, c: &mut Controller, n: usize, trace: &mut Trace) {
    for _ in 0..n {
        let x = plant.begin_tick()[0];
        let y = c.output(x).unwrap();
        let s = plant.finish_tick(&[c.drive()]).unwrap();
        let (e, d) = (s.total[0], s.disturbance[0]);
        c.adapt(e).unwrap();
        trace.e.push(e);
        trace.d.push(d);
        trace.y.push(y);
        trace.dhat.push(c.disturbance_estimate());
    }
}

/// Power in the three bins around `f`.
pub fn tone_power(x: &SampleFrame, f: f64) -> f64 {
    let s = welch_psd(x, PsdConfig::default()).unwrap();
    s.neighborhood_power(s.nearest_bin(f), 1)
}

pub fn db(r: f64) -> f64 {
    10.0 * r.log10()
}
