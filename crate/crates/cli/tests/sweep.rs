mod common;

use std::fs;

use common::{config, scenario_path, tone_scenario};
use hush_cli::sweep::{load_grid, sweep, write_sweep_csv, RowKind, SweepGrid};
use hush_core::plant::global_power_reduction;
use serde_json::json;

fn grid() -> SweepGrid {
    SweepGrid {
        scenario: "unused.json".into(),
        mu: vec![],
        rho: vec![],
        filter_len: vec![],
        d_over_lambda: vec![],
        duration_s: None,
    }
}

#[test]
fn oversized_step_is_flagged_and_the_sweep_continues() {
    let mut v = tone_scenario(0.01, None, None, 4.0);
    v["units"][0]["controller"]["step"] = json!("literal");
    let (cfg, bytes) = config(&v);
    let rows = sweep(&SweepGrid { mu: vec![0.001, 50.0, 0.002], ..grid() }, &cfg, &bytes);
    let status: Vec<&str> = rows.iter().map(|r| r.status.as_str()).collect();
    assert_eq!(status, ["ok", "fault", "ok"]);
    assert!(rows[0].reduction_db.unwrap() > 10.0);
}

#[test]
fn spatial_rows_track_the_closed_form() {
    let (cfg, bytes) = config(&tone_scenario(0.01, None, None, 2.0));
    let g = SweepGrid { d_over_lambda: vec![0.05, 0.1, 0.2, 0.4], ..grid() };
    let rows: Vec<_> = sweep(&g, &cfg, &bytes).into_iter().filter(|r| r.kind == RowKind::Spatial).collect();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        let d = r.d_over_lambda.unwrap();
        // independent oracle: 1 - sinc^2(kd), as a positive reduction
        let kd = 2.0 * std::f64::consts::PI * d;
        let oracle = -10.0 * (1.0 - (kd.sin() / kd).powi(2)).log10();
        assert!((r.analytic_db.unwrap() - oracle).abs() < 1e-9);
        assert!((r.reduction_db.unwrap() - oracle).abs() < 0.5, "d/lambda {d}: {r:?}");
        assert!((-global_power_reduction(d) - oracle).abs() < 1e-9);
    }
    let at_tenth = rows.iter().find(|r| r.d_over_lambda == Some(0.1)).unwrap();
    assert!((at_tenth.reduction_db.unwrap() - 9.0).abs() <= 0.5);
}

#[test]
fn tighter_rho_never_lowers_the_residual() {
    let (cfg, bytes) = config(&tone_scenario(0.01, None, None, 8.0));
    let g = SweepGrid { rho: vec![None, Some(0.9), Some(0.6), Some(0.4), Some(0.25), Some(0.1)], ..grid() };
    let rows = sweep(&g, &cfg, &bytes);
    assert!(rows.iter().all(|r| r.status == "ok"), "{rows:?}");
    let residual: Vec<f64> = rows.iter().map(|r| r.residual_power.unwrap()).collect();
    for w in residual.windows(2) {
        assert!(w[1] >= w[0] * 0.98, "{residual:?}");
    }
    let power: Vec<f64> = rows.iter().map(|r| r.output_power.unwrap()).collect();
    for (r, p) in g.rho.iter().zip(&power) {
        if let Some(r) = r {
            assert!(*p <= 1.1 * r * r, "rho {r}: {p}");
        }
    }
}

#[test]
fn grid_files_resolve_relative_scenarios_and_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = fs::read(scenario_path("tonal_saturation.json")).unwrap();
    fs::write(dir.path().join("s.json"), scenario).unwrap();
    let grid_path = dir.path().join("grid.json");
    fs::write(&grid_path, r#"{"scenario": "s.json", "rho": [0.5], "d_over_lambda": [0.1], "duration_s": 4.0}"#).unwrap();
    let (g, cfg, bytes) = load_grid(&grid_path).unwrap();
    let rows = sweep(&g, &cfg, &bytes);
    let out = dir.path().join("sweep.csv");
    write_sweep_csv(&rows, &out).unwrap();
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "kind,mu,rho,filter_len,d_over_lambda,status,reduction_db,residual_power,output_power,alpha_mean,analytic_db"
    );
    assert!(lines.next().unwrap().starts_with("controller,0.005,0.5,32,,ok,"));
    assert!(lines.next().unwrap().starts_with("spatial,,,,0.1,ok,"));

    let status = common::hush().arg("sweep").arg(&grid_path).arg("--out").arg(dir.path().join("b.csv")).status().unwrap();
    assert!(status.success());
    assert_eq!(fs::read_to_string(dir.path().join("b.csv")).unwrap(), text);
}
