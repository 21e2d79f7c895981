use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use splitflow::diagnostics::{
    audit_all_steps, decomposition, default_audit, DecompositionSummary, ZERO_THRESHOLD,
};
use splitflow::models::{dissipation_window, reference_paths};
use splitflow::potentials::qye_probe;
use splitflow::{
    convergence_study, remainder_term, solve, EdbReport, ModelName, ModelPreset, Partition, SchemeOutput, Vector,
    VERSION,
};

use crate::config::RunConfig;
use crate::Failure;

/// Writes `config.json` (the resolved config and library version) and
/// `VERSION` into `dir`.
pub fn write_echo(dir: &Path, cfg: &RunConfig) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)?;
    let doc = serde_json::json!({ "version": VERSION, "config": cfg });
    write_json(&dir.join("config.json"), &doc)?;
    std::fs::write(dir.join("VERSION"), format!("{VERSION}\n"))?;
    Ok(())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Io(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn numerical(dir: &Path, e: splitflow::Error) -> Failure {
    let f = Failure::from(e);
    if let Failure::Numerical(msg) = &f {
        let _ = write_json(&dir.join("failure.json"), &serde_json::json!({ "error": msg }));
    }
    f
}

#[derive(Serialize)]
struct EdbFile<'a> {
    version: &'static str,
    form: splitflow::AuditForm,
    source: splitflow::ForceSource,
    passed: bool,
    failures: usize,
    max_residual: f64,
    reports: &'a [EdbReport],
    qye: Option<QyeSummary>,
}

#[derive(Serialize)]
struct QyeSummary {
    c: f64,
    big_c: f64,
    samples: usize,
}

/// Key/value lines of the run summary, in output order.
struct Summary(Vec<(String, String)>);

impl Summary {
    fn push(&mut self, k: &str, v: impl ToString) {
        self.0.push((k.to_string(), v.to_string()));
    }

    fn opt(&mut self, k: &str, v: Option<f64>) {
        self.push(k, v.map(|x| format!("{x:.17}")).unwrap_or_else(|| "none".into()));
    }

    fn csv(&self) -> String {
        let mut s = String::from("key,value\n");
        for (k, v) in &self.0 {
            writeln!(s, "{k},{v}").expect("string write");
        }
        s
    }
}

fn audit(cfg: &RunConfig, preset: &ModelPreset, out: &SchemeOutput) -> Result<Vec<EdbReport>, Failure> {
    let sys = &preset.system;
    let (form, _) = default_audit(out);
    let mut reports = audit_all_steps(out, sys, form);
    if cfg.audits.remainder {
        for r in &mut reports {
            r.remainder = remainder_term(out, sys.energy(), r.interval).ok();
        }
    }
    if cfg.audits.decomposition && out.scheme != splitflow::SchemeKind::Effective {
        let d = decomposition(out, sys, None)?;
        if let Some(full) = reports.last_mut() {
            full.decomposition = Some(DecompositionSummary {
                defect: d.defect,
                value_gap: d.value_gap,
            });
        }
    }
    Ok(reports)
}

/// Fenchel-Young pairs `(U', -xi)` of the run, probed against the effective potential.
fn run_qye(preset: &ModelPreset, out: &SchemeOutput) -> Result<QyeSummary, Failure> {
    let d = out.u_linear.derivative()?;
    let pairs: Vec<(Vector, Vector)> = (0..out.grid.cells())
        .map(|c| (d.cell_value(c), -out.xi.cell_value(c)))
        .filter(|(v, x)| v.amax() > 0.0 && x.amax() > 0.0)
        .collect();
    if pairs.is_empty() {
        return Ok(QyeSummary {
            c: f64::NAN,
            big_c: 0.0,
            samples: 0,
        });
    }
    let fit = qye_probe(&preset.system.effective()?, &pairs, preset.system.energy().norm())?;
    Ok(QyeSummary {
        c: fit.c,
        big_c: fit.big_c,
        samples: fit.samples,
    })
}

fn label(cfg: &RunConfig, preset: &ModelPreset, tail: &str) -> String {
    let scheme = cfg.scheme.map(|s| s.name()).unwrap_or("default");
    format!("{}-{scheme}-{tail}", preset.name.name())
}

pub fn run(cfg: RunConfig) -> Result<(), Failure> {
    let (cfg, preset) = cfg.resolve()?;
    let scheme = cfg.scheme.expect("resolved");
    let partition = Partition::new(preset.horizon, &cfg.partition_spec())?;
    let dir = cfg.out_dir(&label(&cfg, &preset, &format!("N{}", partition.steps())));
    write_echo(&dir, &cfg)?;
    let out = solve(&preset.system, scheme, &partition, &preset.u0, &cfg.options()).map_err(|e| numerical(&dir, e))?;
    out.write_dir(&dir)?;

    let mut summary = Summary(Vec::new());
    summary.push("version", VERSION);
    summary.push("model", preset.name.name());
    summary.push("scheme", scheme.name());
    summary.push("steps", partition.steps());
    summary.push("horizon", preset.horizon);
    summary.push("inner_steps", cfg.inner_steps);
    summary.opt("time_to_zero", out.time_to_zero(ZERO_THRESHOLD));
    let terminal = out.terminal_state();
    summary.push("terminal_energy", format!("{:.17}", preset.system.energy().eval(preset.horizon, &terminal)?));
    summary.push("terminal_norm", format!("{:.17}", preset.system.energy().norm().norm(&terminal)));
    summary.push("prox_calls", out.stats.prox_calls);
    summary.push("max_prox_residual", format!("{:.3e}", out.stats.max_residual));
    if preset.name == ModelName::Counterexample {
        let (t1, t2) = dissipation_window(&preset)?;
        let paths = reference_paths(&preset, preset.horizon.max(1.0) * 10.0)?;
        let lim = paths
            .split_limit
            .iter()
            .find(|s| s.velocity.amax() == 0.0)
            .map(|s| s.t0);
        summary.opt("reference_time_to_zero_effective", Some(t2));
        summary.opt("reference_time_to_zero_split_limit", lim);
        summary.opt("window_start", Some(t1));
    }

    let mut failed = Vec::new();
    if cfg.audits.edb {
        let reports = audit(&cfg, &preset, &out)?;
        let failures: Vec<&EdbReport> = reports.iter().filter(|r| !r.passed).collect();
        let max_residual = reports.iter().map(|r| r.residual).fold(f64::NEG_INFINITY, f64::max);
        let (form, source) = default_audit(&out);
        let qye = if cfg.audits.qye { Some(run_qye(&preset, &out)?) } else { None };
        write_json(
            &dir.join("edb.json"),
            &EdbFile {
                version: VERSION,
                form,
                source,
                passed: failures.is_empty(),
                failures: failures.len(),
                max_residual,
                reports: &reports,
                qye,
            },
        )?;
        summary.push("edb_form", serde_json::to_value(form).expect("enum").as_str().unwrap_or(""));
        summary.push("edb_max_residual", format!("{max_residual:.3e}"));
        summary.push("edb_failures", failures.len());
        for f in failures {
            failed.push(format!(
                "EDB audit on [{}, {}]: {}",
                f.interval.0,
                f.interval.1,
                f.anomalies.join("; ")
            ));
        }
    }
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    let text = summary.csv();
    std::fs::write(dir.join("summary.csv"), &text)?;
    for (k, v) in &summary.0 {
        println!("{k:<36} {v}");
    }
    println!("{:<36} {}", "output", dir.display());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Audit(failed.join("\n")))
    }
}

pub fn study(cfg: RunConfig) -> Result<(), Failure> {
    let (cfg, preset) = cfg.resolve()?;
    let scheme = cfg.scheme.expect("resolved");
    let n_list = cfg.study.clone().expect("study list");
    let dir = cfg.out_dir(&label(&cfg, &preset, "study"));
    write_echo(&dir, &cfg)?;
    let table = convergence_study(
        &preset.system,
        &preset.u0,
        preset.horizon,
        scheme,
        &n_list,
        cfg.reference.expect("resolved"),
        &cfg.options(),
        cfg.jobs,
    )
    .map_err(|e| numerical(&dir, e))?;
    let rows = dir.join("rows");
    std::fs::create_dir_all(&rows)?;
    for r in &table.rows {
        write_json(&rows.join(format!("n_{}.json", r.n)), r)?;
    }
    std::fs::write(dir.join("study.csv"), table.to_csv_string())?;
    std::fs::write(dir.join("study.json"), table.to_json() + "\n")?;
    print!("{}", table.to_csv_string());
    println!("errors decrease: {}", table.errors_decrease());
    println!("output: {}", dir.display());
    let bad: Vec<String> = table
        .rows
        .iter()
        .filter(|r| !r.edb_passed)
        .map(|r| format!("EDB audit failed at N = {}", r.n))
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Failure::Audit(bad.join("\n")))
    }
}
