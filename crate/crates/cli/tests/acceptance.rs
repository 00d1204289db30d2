//! Headless acceptance run: one PASS/FAIL line per criterion, non-zero exit
//! if any fails. Tolerances are pinned below.

mod common;

use std::time::{Duration, Instant};

use common::{bundled, config, tone_scenario, TcpClient};
use hush_cli::serve::{ServeOptions, ServeSession};
use hush_core::adaptive::{
    estimate_secondary_path, identification_step, mov_fxlms_update, penalty_factor, Algorithm,
    Controller, ControllerParams, Mode, StepMode,
};
use hush_core::metrics::{third_octave_reduction, PsdConfig};
use hush_core::plant::{global_power_reduction, simulated_global_reduction, PathModel, Plant, SaturationModel};
use hush_core::signal::{FirFilter, SampleFrame, SignalGen, SignalSpec};
use hush_control::{Command, ModeRequest, ParamUpdate, UnitState, UnitStateMachine};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

const FS: u32 = 8000;

const CONSTRAINT_SLACK: f64 = 1.1;
const HARMONIC_LIMIT_DB: f64 = -20.0;
const TONAL_BAND_MIN_DB: f64 = 10.0;
const GENSET_MIN_DB: f64 = 8.0;
const SPATIAL_TARGET_DB: f64 = 9.0;
const SPATIAL_TOL_DB: f64 = 0.5;
const ORACLE_REL_TOL: f64 = 1e-12;
const GRADIENT_REL_TOL: f64 = 1e-6;
const CAL_QUIET_DB: f64 = -30.0;
const CAL_NOISY_DB: f64 = -15.0;
const CAL_CONTROL_MIN_DB: f64 = 8.0;
const ACK_BUDGET: Duration = Duration::from_millis(200);

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(t: Instant, limit: Duration) -> (bool, String) {
    let e = t.elapsed();
    (e < limit, format!("{:.1} s of {} s", e.as_secs_f64(), limit.as_secs()))
}

/// Tonal feedforward run through a clipping amplifier at three disturbance
/// amplitudes: below, at and above what the clip level can cancel.
fn constraint_satisfaction() -> Outcome {
    let t = Instant::now();
    let (rho, clip) = (0.6, 1.0);
    let bound = CONSTRAINT_SLACK * rho * rho;
    let mut parts = Vec::new();
    let mut ok = true;
    for amp in [0.5, 1.0, 2.0] {
        for (algo, r) in [("mov_fxlms", Some(rho)), ("fxlms", None)] {
            let mut v = tone_scenario(0.005, r, Some(clip), 20.0);
            v["plant"]["sources"][0]["signal"]["amplitude"] = json!(amp);
            v["units"][0]["controller"]["algorithm"] = json!(algo);
            let (cfg, bytes) = config(&v);
            let s = hush_cli::simulate(&cfg, &bytes).map_err(|e| e.to_string())?.summary;
            let p = s.units[0].output_power;
            if r.is_some() {
                ok &= p <= bound && !s.faulted;
                parts.push(format!("mov a={amp} y2={p:.3}"));
            } else if amp > clip {
                ok &= p > bound || s.faulted;
                parts.push(format!("fxlms a={amp} y2={p:.3}"));
            }
        }
    }
    let (fast, time) = within(t, Duration::from_secs(60));
    check(ok && fast, format!("bound {bound:.3}; {}; {time}", parts.join(", ")))
}

fn tonal_harmonics() -> Outcome {
    let t = Instant::now();
    let (cfg, bytes) = bundled("tonal_saturation.json");
    let mov = hush_cli::simulate(&cfg, &bytes).map_err(|e| e.to_string())?.summary;
    let (cfg, bytes) = bundled("tonal_saturation_fxlms.json");
    let plain = hush_cli::simulate(&cfg, &bytes).map_err(|e| e.to_string())?.summary;
    let hm = mov.units[0].harmonics.as_ref().ok_or("no harmonic report")?;
    let hp = plain.units[0].harmonics.as_ref().ok_or("no harmonic report")?;
    let worst = hm.max_harmonic_db.unwrap_or(f64::NEG_INFINITY);
    let band = hm.fundamental_band_reduction_db.unwrap_or(f64::NAN);
    let (fast, time) = within(t, Duration::from_secs(60));
    check(
        worst <= HARMONIC_LIMIT_DB && band >= TONAL_BAND_MIN_DB && hp.harmonics_above_minus_20_db >= 1 && fast,
        format!(
            "mov worst {worst:.1} dB, 150 Hz band -{band:.1} dB; fxlms {} harmonics above -20 dB; {time}",
            hp.harmonics_above_minus_20_db
        ),
    )
}

fn genset() -> Outcome {
    let t = Instant::now();
    let (cfg, bytes) = bundled("genset_dual_unit.json");
    let s = hush_cli::simulate(&cfg, &bytes).map_err(|e| e.to_string())?.summary;
    let worst = s
        .mics
        .iter()
        .map(|m| m.band_mean_reduction_db.unwrap_or(f64::NEG_INFINITY))
        .fold(f64::INFINITY, f64::min);
    let monitors = s.mics.iter().filter(|m| m.kind == "monitor").count();
    let errors = s.mics.iter().filter(|m| m.kind == "error").count();
    let detail: Vec<String> = s.mics.iter().map(|m| format!("{} {:.1}", m.name, m.band_mean_reduction_db.unwrap_or(f64::NAN))).collect();
    let (fast, time) = within(t, Duration::from_secs(120));
    check(
        worst >= GENSET_MIN_DB && monitors == 3 && errors == 2 && !s.faulted && fast,
        format!("{} dB; {time}", detail.join(", ")),
    )
}

fn spatial() -> Outcome {
    let sim = -simulated_global_reduction(0.1, 343.0 / 100.0);
    let analytic = -global_power_reduction(0.1);
    check(
        (sim - SPATIAL_TARGET_DB).abs() <= SPATIAL_TOL_DB && (sim - analytic).abs() <= SPATIAL_TOL_DB,
        format!("d/lambda 0.1: simulated {sim:.2} dB, analytic {analytic:.2} dB"),
    )
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Penalty and update against plain re-derivations, then a full loop with
/// the penalty disabled against plain FxLMS.
fn unit_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_alpha: f64 = 0.0;
    let mut worst_update: f64 = 0.0;
    for _ in 0..1000 {
        let m = rng.gen_range(1..=16);
        let d: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let gs = 10f64.powf(rng.gen_range(-2.0..1.0));
        let rho = 10f64.powf(rng.gen_range(-2.0..0.5));
        let mean_sq = d.iter().map(|v| v * v).sum::<f64>() / m as f64;
        let oracle = (gs * ((mean_sq / gs).sqrt() / rho - 1.0)).max(0.0);
        let a = penalty_factor(&d, gs, rho).map_err(|e| e.to_string())?;
        if oracle > 1e-9 * gs {
            worst_alpha = worst_alpha.max(rel_err(a, oracle));
        } else if a > 1e-12 * gs {
            worst_alpha = f64::INFINITY;
        }

        let l = rng.gen_range(1..=12);
        let mut v = || -> Vec<f64> { (0..l).map(|_| rng.gen_range(-2.0..2.0)).collect() };
        let (w0, xf, x) = (v(), v(), v());
        let (mu, e, alpha, y) = (
            rng.gen_range(0.0..0.5),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(0.0..3.0),
            rng.gen_range(-2.0..2.0),
        );
        let mut w = w0.clone();
        mov_fxlms_update(&mut w, mu, e, &xf, alpha, y, &x);
        for i in 0..l {
            let (g, k) = (mu * e * xf[i], mu * alpha * y * x[i]);
            let err = (w[i] - (w0[i] + g - k)).abs() / (w0[i].abs() + g.abs() + k.abs()).max(1e-300);
            worst_update = worst_update.max(err);
        }
    }

    let identical = unpenalized_run_matches_fxlms();
    check(
        worst_alpha <= ORACLE_REL_TOL && worst_update <= ORACLE_REL_TOL && identical,
        format!(
            "penalty rel err {worst_alpha:.1e}, update rel err {worst_update:.1e}, alpha=0 bit-identical run {identical}"
        ),
    )
}

fn feedback_plant(signal: SignalSpec) -> Plant {
    Plant::from_paths(
        vec![signal],
        vec![vec![PathModel::pure(12, 0.9)]],
        vec![vec![PathModel { delay: 3, gain: 1.0, fir: vec![0.8, 0.2] }]],
        vec![SaturationModel::None],
        FS,
    )
    .unwrap()
}

fn unpenalized_run_matches_fxlms() -> bool {
    let params = |algorithm| ControllerParams {
        algorithm,
        mu: 0.002,
        rho: None,
        filter_len: 32,
        step: StepMode::Literal,
        ..Default::default()
    };
    let mut runs = [Algorithm::MovFxlms, Algorithm::Fxlms].map(|a| {
        let plant = feedback_plant(SignalSpec::genset(1.0, 4));
        let shat = FirFilter::new(plant.secondary_response(0, 0)).unwrap();
        let c = Controller::with_secondary_path(params(a), Mode::Feedback, shat).unwrap();
        (plant, c, Vec::new())
    });
    for _ in 0..10 * FS {
        for (plant, c, errs) in runs.iter_mut() {
            plant.begin_tick();
            c.output(0.0).unwrap();
            let e = plant.finish_tick(&[c.drive()]).unwrap().total[0];
            c.adapt(e).unwrap();
            errs.push(e);
        }
        if runs[0].1.alpha() != 0.0 || runs[0].1.weights() != runs[1].1.weights() {
            return false;
        }
    }
    runs[0].2 == runs[1].2 && runs[0].1.weights().iter().any(|&w| w != 0.0)
}

/// The update direction against a central-difference gradient of
/// `(d - w.x')^2 + alpha (w.x)^2`.
fn gradient_property() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let l = rng.gen_range(2..=10);
        let mut v = || -> Vec<f64> { (0..l).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let (w, xf, x) = (v(), v(), v());
        let d = rng.gen_range(-1.0..1.0);
        let alpha = rng.gen_range(0.0..2.0);
        let cost = |w: &[f64]| (d - dot(w, &xf)).powi(2) + alpha * dot(w, &x).powi(2);
        let mut stepped = w.clone();
        mov_fxlms_update(&mut stepped, 1.0, d - dot(&w, &xf), &xf, alpha, dot(&w, &x), &x);
        let h = 1e-5;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..l {
            let (mut p, mut m) = (w.clone(), w.clone());
            p[i] += h;
            m[i] -= h;
            let fd = -0.5 * (cost(&p) - cost(&m)) / (2.0 * h);
            num += (stepped[i] - w[i] - fd).powi(2);
            den += fd * fd;
        }
        worst = worst.max((num / den).sqrt());
    }
    check(worst < GRADIENT_REL_TOL, format!("worst relative error {worst:.1e} over 100 states"))
}

fn calibration() -> Outcome {
    const TRAIN_AMP: f64 = 0.5;
    let order = 8;
    let plant = |ambient: f64| {
        Plant::from_paths(
            vec![SignalSpec::tone(77.0, ambient)],
            vec![vec![PathModel::pure(10, 1.0)]],
            vec![vec![PathModel { delay: 0, gain: 1.0, fir: vec![0.9, 0.1] }]],
            vec![SaturationModel::None],
            FS,
        )
        .unwrap()
    };
    let identify = |p: &mut Plant, factor: f64| {
        let mut training = SignalGen::new(SignalSpec::white_noise(TRAIN_AMP, 99), FS).unwrap();
        let mu = identification_step(factor, order, TRAIN_AMP * TRAIN_AMP / 3.0);
        estimate_secondary_path(&mut p.probe(0), &mut training, 8 * FS as usize, order, mu)
    };
    let mut quiet = plant(0.0);
    let q = identify(&mut quiet, 0.01).map_err(|e| e.to_string())?.misalignment_db.unwrap_or(f64::NAN);

    // ambient tone power equal to the training power seen at the microphone
    let s_energy = 0.9f64 * 0.9 + 0.1 * 0.1;
    let amp = (2.0 * TRAIN_AMP * TRAIN_AMP / 3.0 * s_energy).sqrt();
    let mut noisy = plant(amp);
    let r = identify(&mut noisy, 0.002).map_err(|e| e.to_string())?;
    let n = r.misalignment_db.unwrap_or(f64::NAN);

    let params = ControllerParams { mu: 0.01, ..Default::default() };
    let mut c = Controller::with_secondary_path(params, Mode::Feedback, r.shat).map_err(|e| e.to_string())?;
    let (mut d, mut e) = (Vec::new(), Vec::new());
    for _ in 0..30 * FS {
        noisy.begin_tick();
        c.output(0.0).map_err(|e| e.to_string())?;
        let s = noisy.finish_tick(&[c.drive()]).map_err(|e| e.to_string())?;
        d.push(s.disturbance[0]);
        e.push(s.total[0]);
        c.adapt(s.total[0]).map_err(|e| e.to_string())?;
    }
    let tail = |v: &[f64]| SampleFrame::new(v[v.len() - 5 * FS as usize..].to_vec(), FS).unwrap();
    let rep = third_octave_reduction(&tail(&d), &tail(&e), PsdConfig::default()).map_err(|e| e.to_string())?;
    let band = rep.band(80.0).map(|b| b.reduction_db).unwrap_or(f64::NAN);
    check(
        q <= CAL_QUIET_DB && n <= CAL_NOISY_DB && band >= CAL_CONTROL_MIN_DB,
        format!("quiet {q:.1} dB, 0 dB SNR {n:.1} dB, then feedback 80 Hz band -{band:.1} dB"),
    )
}

fn enumerate(m: &UnitStateMachine, cmds: &[Command], calibrated: bool, depth: usize, count: &mut u64) -> bool {
    if depth == 0 {
        *count += 1;
        return true;
    }
    // commands plus the three asynchronous outcomes
    for k in 0..cmds.len() + 3 {
        let mut next = m.clone();
        let mut cal = calibrated;
        match k {
            k if k < cmds.len() => {
                let _ = next.apply(&cmds[k]);
            }
            k => {
                let ok = k == cmds.len();
                if k < cmds.len() + 2 {
                    if next.state() == UnitState::Calibrating {
                        cal = ok;
                    }
                    next.calibration_finished(ok);
                } else {
                    next.fault();
                }
            }
        }
        if next.state().is_running() && !(cal && next.is_calibrated()) {
            return false;
        }
        if !enumerate(&next, cmds, cal, depth - 1, count) {
            return false;
        }
    }
    true
}

fn control_plane_safety() -> Outcome {
    let cmds = [
        Command::Calibrate,
        Command::SetMode { mode: ModeRequest::Idle },
        Command::SetMode { mode: ModeRequest::Feedforward },
        Command::SetMode { mode: ModeRequest::Feedback },
        Command::SetParam { params: ParamUpdate { rho: Some(Some(0.2)), ..Default::default() } },
        Command::Reset,
        Command::GetState,
    ];
    let mut sequences = 0;
    let safe = enumerate(&UnitStateMachine::new(ControllerParams::default()), &cmds, false, 6, &mut sequences);

    // live session with no dashboard assets
    let (cfg, _) = bundled("serve_demo.json");
    let opts = ServeOptions {
        tcp: "127.0.0.1:0".parse().unwrap(),
        http: None,
        speed: 4.0,
        ..ServeOptions::default()
    };
    let session = ServeSession::start(&cfg, opts).map_err(|e| e.to_string())?;
    let mut c = TcpClient::connect(session.tcp_addr);
    c.subscribe(&["unit/#"]);
    let script = [
        json!({"cmd": "get_state"}),
        json!({"cmd": "set_mode", "mode": "feedback"}),
        json!({"cmd": "calibrate"}),
        json!({"cmd": "set_param", "params": {"rho": 0.3}}),
        json!({"cmd": "set_mode", "mode": "feedforward"}),
        json!({"cmd": "bogus"}),
        json!({"cmd": "reset"}),
    ];
    let mut slowest = Duration::ZERO;
    let mut answered = 0;
    for p in script.iter().cycle().take(35) {
        let t = Instant::now();
        let ack = c.command("1", p.clone());
        slowest = slowest.max(t.elapsed());
        answered += ack.get("ok").is_some() as usize;
    }
    session.stop().map_err(|e| e.to_string())?;
    check(
        safe && answered == 35 && slowest <= ACK_BUDGET,
        format!(
            "{sequences} six-step sequences safe {safe}; {answered}/35 commands answered, slowest {:.0} ms; no dashboard",
            slowest.as_secs_f64() * 1e3
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("constraint satisfaction", constraint_satisfaction),
        ("tonal saturation harmonics", tonal_harmonics),
        ("genset dual-unit reduction", genset),
        ("spatial rule at d/lambda 0.1", spatial),
        ("penalty and update oracles", unit_oracles),
        ("update is the surrogate gradient", gradient_property),
        ("secondary-path calibration", calibration),
        ("control-plane safety", control_plane_safety),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(d) => println!("PASS  {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL  {name}: {d}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
