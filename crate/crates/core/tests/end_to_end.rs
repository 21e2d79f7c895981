use splitflow::diagnostics::{audit_all_steps, default_audit};
use splitflow::models::reference_trajectory;
use splitflow::{make_model, solve, Partition, SchemeKind, SolverOptions, StudyTable};

fn defaults(name: &str) -> splitflow::ModelPreset {
    make_model(name, &serde_json::Value::Null).unwrap()
}

#[test]
fn split_tracks_the_split_limit() {
    let p = defaults("counterexample");
    let mut last = f64::INFINITY;
    for n in [16, 64, 256] {
        let grid = Partition::uniform(p.horizon, n).unwrap();
        let out = solve(&p.system, SchemeKind::Split, &grid, &p.u0, &SolverOptions::default()).unwrap();
        let err = grid
            .nodes()
            .iter()
            .map(|&t| (out.state_at(t) - reference_trajectory(&p, t).unwrap().split_limit).amax())
            .fold(0.0, f64::max);
        assert!(err <= 4.0 / n as f64, "N = {n}: {err}");
        assert!(err < last);
        last = err;
    }
}

#[test]
fn effective_run_matches_the_effective_reference() {
    let p = defaults("counterexample");
    let grid = Partition::uniform(p.horizon, 12).unwrap();
    let out = solve(&p.system, SchemeKind::Effective, &grid, &p.u0, &SolverOptions::default()).unwrap();
    for t in [0.0, 0.1, 0.25, 0.5, 0.75, 1.2] {
        let r = reference_trajectory(&p, t).unwrap().effective;
        assert!((out.state_at(t) - r).amax() < 1e-12, "t = {t}");
    }
}

#[test]
fn written_trajectories_parse_back() {
    let p = defaults("allen-cahn-1d");
    let grid = Partition::uniform(p.horizon, 4).unwrap();
    let opts = SolverOptions {
        inner_steps: 2,
        with_variational: true,
        ..Default::default()
    };
    let out = solve(&p.system, SchemeKind::Amm, &grid, &p.u0, &opts).unwrap();
    let dir = tempfile::tempdir().unwrap();
    out.write_dir(dir.path()).unwrap();
    for f in ["trajectory.csv", "u_const.csv", "u_delayed.csv", "xi.csv", "u_variational.csv", "stats.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let text = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let rows: Vec<Vec<f64>> = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), out.u_linear.samples().len());
    for (row, (i, s)) in rows.iter().zip(out.u_linear.samples().iter().enumerate()) {
        assert_eq!(row[0], out.u_linear.sample_time(i));
        for (a, b) in row[1..].iter().zip(s.iter()) {
            assert_eq!(a, b, "17 significant digits round-trip exactly");
        }
    }
    let stats: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("stats.json")).unwrap()).unwrap();
    assert_eq!(stats["scheme"], "amm");
    assert_eq!(stats["steps"], 4);
}

#[test]
fn every_packaged_model_passes_its_default_audit() {
    for (name, schemes) in [
        ("counterexample", vec![SchemeKind::Split, SchemeKind::Amm, SchemeKind::Effective]),
        ("allen-cahn-1d", vec![SchemeKind::Split, SchemeKind::Amm, SchemeKind::Effective]),
        ("visco-plasticity-1d", vec![SchemeKind::BlockSplit, SchemeKind::BlockAmm, SchemeKind::Effective]),
    ] {
        let p = defaults(name);
        for s in schemes {
            let out = solve(&p.system, s, &Partition::uniform(p.horizon, 16).unwrap(), &p.u0, &SolverOptions::default()).unwrap();
            for r in audit_all_steps(&out, &p.system, default_audit(&out).0) {
                assert!(r.passed, "{name} {}: {:?}", s.name(), r.anomalies);
            }
        }
    }
}

#[test]
fn study_table_serializes() {
    let p = defaults("counterexample");
    let t: StudyTable = splitflow::convergence_study(
        &p.system,
        &p.u0,
        p.horizon,
        SchemeKind::Split,
        &[8, 16],
        p.reference,
        &SolverOptions::default(),
        2,
    )
    .unwrap();
    let json: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 2);
    let csv = t.to_csv_string();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("n,max_step,sup_error"));
}
