use serde::Serialize;
use splitflow::models::{grid_norm, qye_samples, witness_ratio, ModelParams};
use splitflow::potentials::qye_probe;
use splitflow::VERSION;

use crate::config::RunConfig;
use crate::run::{write_echo, write_json};
use crate::Failure;

/// Relative change of `c` between the two sample rounds that still counts as stable.
const STABILITY: f64 = 0.1;

#[derive(Serialize)]
struct Round {
    samples: usize,
    c: f64,
    big_c: f64,
}

#[derive(Serialize)]
struct Witness {
    n: usize,
    ratio: f64,
}

#[derive(Serialize)]
struct ProbeReport {
    version: &'static str,
    model: String,
    seed: u64,
    rounds: Vec<Round>,
    stable: bool,
    witness: Vec<Witness>,
    witness_drop: Option<f64>,
}

pub fn probe_qye(cfg: RunConfig) -> Result<(), Failure> {
    let (cfg, preset) = cfg.resolve()?;
    let dir = cfg.out_dir(&format!("{}-probe-qye", preset.name.name()));
    write_echo(&dir, &cfg)?;
    let r = preset.system.effective()?;
    let dim = preset.system.dim();
    let norm = match &preset.params {
        ModelParams::AllenCahn1d(p) => grid_norm(p.m),
        _ => preset.system.energy().norm().clone(),
    };
    let mut rounds = Vec::new();
    for count in [cfg.probe.samples, 2 * cfg.probe.samples] {
        let fit = qye_probe(&r, &qye_samples(dim, count, cfg.seed), &norm)?;
        rounds.push(Round {
            samples: count,
            c: fit.c,
            big_c: fit.big_c,
        });
    }
    let (c1, c2) = (rounds[0].c, rounds[1].c);
    let stable = c1 > 0.0 && c2 > 0.0 && (c1 - c2).abs() <= STABILITY * c1;

    let mut witness = Vec::new();
    if let ModelParams::AllenCahn1d(p) = &preset.params {
        for &n in &cfg.probe.witness_n {
            witness.push(Witness {
                n,
                ratio: witness_ratio(p.p, cfg.probe.witness_m, n, cfg.probe.witness_amplitude)?,
            });
        }
    }
    let witness_drop = match (witness.first(), witness.last()) {
        (Some(a), Some(b)) if witness.len() > 1 => Some(a.ratio / b.ratio),
        _ => None,
    };
    for r in &rounds {
        println!("samples {:>7}  c = {:.6e}  C = {:.6e}", r.samples, r.c, r.big_c);
    }
    println!("stable: {stable}");
    for w in &witness {
        println!("witness n = {:>4}  ratio = {:.6e}", w.n, w.ratio);
    }
    if let Some(d) = witness_drop {
        println!("witness drop: {d:.4}");
    }
    write_json(
        &dir.join("probe.json"),
        &ProbeReport {
            version: VERSION,
            model: preset.name.name().into(),
            seed: cfg.seed,
            rounds,
            stable,
            witness,
            witness_drop,
        },
    )?;
    println!("output: {}", dir.display());
    Ok(())
}
