mod common;

use std::time::Instant;

use common::bundled;

#[test]
fn genset_scenario_quiets_every_monitor_within_budget() {
    let (cfg, bytes) = bundled("genset_dual_unit.json");
    assert_eq!(cfg.units.len(), 2);
    assert_eq!(cfg.duration_s, 60.0);
    let t0 = Instant::now();
    let s = hush_cli::simulate(&cfg, &bytes).unwrap().summary;
    let wall = t0.elapsed().as_secs_f64();
    assert!(wall < 10.0, "60 s of two-unit simulation took {wall:.1} s");
    assert!(!s.faulted);
    let monitors: Vec<_> = s.mics.iter().filter(|m| m.kind == "monitor").collect();
    assert_eq!(monitors.len(), 3);
    for m in monitors {
        let mean = m.band_mean_reduction_db.unwrap();
        assert!(mean >= 8.0, "{}: {mean:.1} dB", m.name);
        let nominal: Vec<f64> = m.bands.iter().map(|b| b.nominal_hz).collect();
        assert_eq!(nominal, [31.5, 40.0, 50.0, 63.0, 80.0, 100.0, 125.0]);
    }
}
