use approx_sensing::channel::InjectionPoint;
use approx_sensing::harness::synth::{gaussian_ecg, phantom_ecg};
use approx_sensing::harness::{
    noise_sweep_rows, run_pipeline, run_sweep, write_sweep_plots, ExperimentConfig, RecordSource,
    ReportRow, SynthKind, Trial, TruthSource,
};
use approx_sensing::metrics::{detect_rpeaks, snr_db};
use approx_sensing::Error;

/// PRD ceiling used by the acceptance suite's unrecoverability check.
const PRD_CEILING_PCT: f64 = 3.4;

/// Rows without their wall time, which is the only field allowed to vary.
fn timeless(mut r: ReportRow) -> ReportRow {
    r.wall_time_s = 0.0;
    r
}

fn phantom(duration_s: f64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.record.synthetic = SynthKind::Phantom;
    cfg.record.duration_s = duration_s;
    cfg.noise.variance = 0.0;
    cfg
}

#[test]
fn single_cell_grid_gives_one_row() {
    let mut cfg = phantom(3.0);
    cfg.sweep.models = vec!["lpaa2".into()];
    cfg.sweep.approx_pcts = vec![40.0];
    cfg.sweep.seeds = vec![9];
    let report = run_sweep(&cfg).unwrap();
    assert_eq!(report.rows.len(), 1);
    let row = &report.rows[0];
    assert_eq!(
        (row.model.as_str(), row.approx_pct, row.seed),
        ("lpaa2", 40.0, 9)
    );
    assert!(row.pareto && row.is_ok());
}

#[test]
fn exact_model_is_flat_across_pcts() {
    let mut cfg = phantom(3.0);
    cfg.noise.variance = 4e-4;
    cfg.sweep.models = vec!["exact".into()];
    cfg.sweep.approx_pcts = vec![0.0, 20.0, 40.0, 60.0, 80.0, 100.0];
    cfg.sweep.seeds = vec![1, 2];
    let report = run_sweep(&cfg).unwrap();
    for seed in [1, 2] {
        let rows: Vec<_> = report.rows.iter().filter(|r| r.seed == seed).collect();
        for r in &rows {
            assert_eq!(r.snr_db, rows[0].snr_db);
            assert_eq!(r.prd_pct, rows[0].prd_pct);
            assert_eq!((r.tp, r.fp, r.fn_), (rows[0].tp, rows[0].fp, rows[0].fn_));
            assert_eq!(r.energy_savings_pct, Some(0.0));
        }
    }
}

#[test]
fn every_lossy_model_is_unrecoverable_at_80_pct() {
    let cfg = phantom(10.0);
    let trial = Trial::prepare(&cfg).unwrap();
    for m in trial.library.lossy_models() {
        let row = trial.run(m.name(), 80.0, 1, &cfg.noise);
        let prd = row.prd_pct.unwrap();
        assert!(prd > PRD_CEILING_PCT, "{}: PRD {prd}", m.name());
    }
}

#[test]
fn zero_variance_sweep_equals_noiseless_run() {
    let mut cfg = phantom(3.0);
    let baseline = run_pipeline(&cfg).unwrap().remove(0);
    cfg.noise.variance = 1e-3;
    let rows = noise_sweep_rows(&cfg, &[0.0, 1e-3, 1e-3]).unwrap();
    assert_eq!(rows[0].1.snr_db, baseline.snr_db);
    assert_eq!(rows[0].1.prd_pct, baseline.prd_pct);
    assert_eq!(timeless(rows[1].1.clone()), timeless(rows[2].1.clone()));
    assert!(rows[1].1.snr_db < baseline.snr_db);
}

#[test]
fn accurate_path_keeps_every_detectable_peak() {
    let mut cfgs = vec![phantom(10.0)];
    let mut gauss = phantom(10.0);
    gauss.record.synthetic = SynthKind::Gaussian;
    cfgs.push(gauss);
    for mut cfg in cfgs {
        cfg.record.truth = TruthSource::Detector;
        let row = run_pipeline(&cfg).unwrap().remove(0);
        assert_eq!(row.ppr_pct, Some(100.0), "{:?}", cfg.record.synthetic);
        assert_eq!(row.der_pct, Some(0.0), "{:?}", cfg.record.synthetic);
    }
}

#[test]
fn csv_record_matches_synthetic_source() {
    let dir = tempfile::tempdir().unwrap();
    let rec = phantom_ecg(4.0, 360.0, 72.0, 0);
    let ann = rec.annotations.clone().unwrap();
    let mut text = String::from("value,flag\n");
    for (i, v) in rec.samples.iter().enumerate() {
        text.push_str(&format!(
            "{v:?},{}\n",
            u8::from(ann.binary_search(&i).is_ok())
        ));
    }
    let path = dir.path().join("rec.csv");
    std::fs::write(&path, text).unwrap();

    let synthetic = phantom(4.0);
    let mut from_csv = synthetic.clone();
    from_csv.record.source = RecordSource::Csv;
    from_csv.record.path = Some(path);
    let a = run_pipeline(&synthetic).unwrap();
    let b = run_pipeline(&from_csv).unwrap();
    assert_eq!(timeless(a[0].clone()), timeless(b[0].clone()));
}

#[test]
fn failing_cells_do_not_stop_the_sweep() {
    let mut cfg = phantom(2.0);
    // Input-side noise this large pushes samples outside Q4.33.
    cfg.noise.variance = 400.0;
    cfg.noise.injection_point = InjectionPoint::InputSignal;
    cfg.sweep.models = vec!["lpaa1".into(), "lpaa6".into()];
    cfg.sweep.approx_pcts = vec![0.0, 50.0];
    cfg.sweep.seeds = vec![1];
    let report = run_sweep(&cfg).unwrap();
    assert_eq!(report.rows.len(), 4);
    for r in &report.rows {
        let msg = r.error.as_deref().unwrap();
        assert!(msg.contains("frame 0"), "{msg}");
        assert!(!r.pareto && r.snr_db.is_none());
    }
}

#[test]
fn frame_errors_name_the_frame() {
    let mut cfg = phantom(2.0);
    cfg.noise.variance = 400.0;
    cfg.noise.injection_point = InjectionPoint::InputSignal;
    match run_pipeline(&cfg) {
        Err(Error::Frame { frame: 0, .. }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn sweep_plots_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = phantom(2.0);
    cfg.sweep.models = vec!["lpaa3".into(), "lpaa7".into()];
    cfg.sweep.approx_pcts = vec![0.0, 80.0];
    cfg.sweep.seeds = vec![1, 2, 3];
    let report = run_sweep(&cfg).unwrap();
    write_sweep_plots(&report, dir.path()).unwrap();
    for f in ["snr_vs_pct.svg", "energy_vs_pct.svg"] {
        let svg = std::fs::read_to_string(dir.path().join(f)).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2, "{f}");
    }
}

#[test]
fn record_too_short_for_a_frame() {
    let mut cfg = phantom(0.5);
    cfg.record.duration_s = 0.5;
    assert!(matches!(run_pipeline(&cfg), Err(Error::Input(_))));
}

#[test]
fn mit212_record_round_trip_through_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (rec, v5) = gaussian_ecg(6.0, 360.0, 70.0, 3);
    let dat = dir.path().join("r.dat");
    approx_sensing::harness::synth::write_mit212_record(&dat, &rec.samples, &v5).unwrap();
    let loaded = approx_sensing::harness::load_mit212(&dat, 0, rec.len(), 360.0).unwrap();
    // 11-bit storage at 200 adu/mV
    for (a, b) in rec.samples.iter().zip(&loaded.samples) {
        assert!((a - b).abs() <= 0.5 / 200.0 + 1e-12);
    }
    assert_eq!(
        detect_rpeaks(&loaded.samples, 360.0).len(),
        rec.annotations.unwrap().len()
    );

    let mut cfg = phantom(6.0);
    cfg.record.source = RecordSource::Mit212;
    cfg.record.path = Some(dat);
    cfg.record.n_samples = Some(loaded.len());
    let trial = Trial::prepare(&cfg).unwrap();
    let out = trial.run_detailed("exact", 0.0, 1, &cfg.noise).unwrap();
    let snr = snr_db(trial.reference(), &out.reconstruction).unwrap();
    assert_eq!(Some(snr), out.row.snr_db);
    assert_eq!(out.row.fn_, Some(0));
}
