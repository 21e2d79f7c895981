use approx::assert_abs_diff_eq;

use super::*;
use crate::energies::{stiffness, DoubleWell, Load};
use crate::partitions::{Partition, SamplingGrid};
use crate::solvers::{amm_solve, effective_solve, split_step_solve, SolverOptions, SolverStats};
use crate::{Matrix, Vector};

fn v(xs: &[f64]) -> Vector {
    Vector::from_vec(xs.to_vec())
}

fn counterexample() -> GradientSystem {
    GradientSystem::new(
        Energy::max_norm(),
        Potential::anisotropic_dual(v(&[1.0, 3.0])).unwrap(),
        Potential::anisotropic_dual(v(&[3.0, 1.0])).unwrap(),
    )
    .unwrap()
}

fn half_square_system() -> GradientSystem {
    let e = Energy::quadratic_block(
        Matrix::from_element(1, 1, 1.0),
        Matrix::zeros(0, 1),
        Matrix::zeros(0, 0),
        Load::zero(1),
        Load::zero(0),
    )
    .unwrap();
    let r = Potential::quadratic(Matrix::identity(1, 1)).unwrap();
    GradientSystem::new(e, r.clone(), r).unwrap()
}

fn allen_cahn(m: usize) -> GradientSystem {
    let h = 1.0 / (m + 1) as f64;
    let e = Energy::allen_cahn(m, h, DoubleWell::default(), Load::zero(m)).unwrap();
    GradientSystem::new(
        e,
        Potential::power_norm(2.0, Vector::from_element(m, h)).unwrap(),
        Potential::quadratic(stiffness(m, h)).unwrap(),
    )
    .unwrap()
}

fn ac_initial(m: usize) -> Vector {
    Vector::from_fn(m, |i, _| {
        let x = (i + 1) as f64 / (m + 1) as f64;
        0.8 * (std::f64::consts::PI * x).sin() + 0.3 * (3.0 * std::f64::consts::PI * x).sin()
    })
}

/// Smooth strictly convex block energy with time-dependent loads and two
/// different quadratic dissipations acting on the whole state.
fn singleton_system() -> GradientSystem {
    let h = Matrix::from_row_slice(3, 3, &[2.0, 0.5, 0.2, 0.5, 1.5, -0.3, 0.2, -0.3, 1.0]);
    let e = Energy::quadratic_block(
        h.view((0, 0), (2, 2)).into_owned(),
        h.view((2, 0), (1, 2)).into_owned(),
        h.view((2, 2), (1, 1)).into_owned(),
        Load::sinusoidal(v(&[1.0, -0.5]), 3.0, 0.0).unwrap(),
        Load::linear(v(&[0.2]), v(&[0.5])).unwrap(),
    )
    .unwrap()
    .with_shift(20.0);
    GradientSystem::new(
        e,
        Potential::quadratic(Matrix::from_diagonal(&v(&[1.0, 3.0, 0.5]))).unwrap(),
        Potential::quadratic(Matrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.0, 0.0, 0.0, 4.0])).unwrap(),
    )
    .unwrap()
}

fn opts(inner: usize) -> SolverOptions {
    SolverOptions {
        inner_steps: inner,
        ..SolverOptions::default()
    }
}

/// A hand-built split output on `[0, 1]` moving with constant rate `rate`.
fn synthetic_linear(rate: f64, steps: usize, inner: usize) -> SchemeOutput {
    let p = Partition::uniform(1.0, steps).unwrap();
    let grid = SamplingGrid::new(p, inner).unwrap();
    let nodes: Vec<Vector> = grid.times().iter().map(|t| v(&[rate * t])).collect();
    let cells = |f: &dyn Fn(usize) -> Vector, kind| SampledCurve::from_cells(grid.clone(), kind, v(&[0.0]), f).unwrap();
    SchemeOutput {
        scheme: SchemeKind::Split,
        options: opts(inner),
        u_const: cells(&|c| nodes[c + 1].clone(), InterpolantKind::PiecewiseConstant),
        u_delayed: cells(&|c| nodes[c].clone(), InterpolantKind::DelayedConstant),
        xi: cells(&|_| v(&[0.0]), InterpolantKind::PiecewiseConstant),
        u_linear: SampledCurve::new(grid.clone(), InterpolantKind::PiecewiseLinear, nodes.clone()).unwrap(),
        grid,
        u_variational: None,
        variational_nodes: None,
        xi_variational: None,
        segments: None,
        stats: SolverStats::default(),
        warnings: Vec::new(),
    }
}

#[test]
fn rate_term_examples() {
    let sys = half_square_system();
    let out = synthetic_linear(2.0, 4, 3);
    let r = rate_term(&out, &sys, (0.0, 1.0)).unwrap();
    assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(r.repetition.unwrap(), 1.0, epsilon = 1e-12);
    let still = synthetic_linear(0.0, 4, 3);
    assert_eq!(rate_term(&still, &sys, (0.0, 1.0)).unwrap().value, 0.0);
    assert_eq!(slope_term(&still, &sys, (0.0, 1.0), ForceSource::Discrete).unwrap().value, 0.0);
    assert!(rate_term(&out, &sys, (0.5, 1.5)).is_err());
    // off-node intervals skip the repetition form
    assert!(rate_term(&out, &sys, (0.1, 0.6)).unwrap().repetition.is_none());
}

#[test]
fn counterexample_rate_average_is_three_quarters() {
    let sys = counterexample();
    let p = Partition::uniform(1.5, 256).unwrap();
    let out = split_step_solve(&sys, &p, &v(&[2.0, 1.0]), &opts(2)).unwrap();
    let r = rate_term(&out, &sys, (0.25, 0.75)).unwrap();
    assert!((r.value / 0.5 - 0.75).abs() <= 1e-2, "average {}", r.value / 0.5);
    let eff = effective_solve(&sys, &p, &v(&[2.0, 1.0]), &opts(2)).unwrap();
    let re = rate_term(&eff, &sys, (0.25, 0.75)).unwrap();
    // effective diagonal rate: R_eff((2, 2)) = 4/8 + 4/8
    assert_abs_diff_eq!(re.value / 0.5, 1.0, epsilon = 1e-12);
}

#[test]
fn counterexample_first_regime_slope() {
    let sys = counterexample();
    let p = Partition::uniform(1.5, 64).unwrap();
    let out = split_step_solve(&sys, &p, &v(&[2.0, 1.0]), &opts(2)).unwrap();
    // on the first semi-interval only mechanism 1 acts, with xi = (1, 0)
    let (a, b) = p.semi_interval(0, crate::Half::Left);
    let s = slope_term(&out, &sys, (a, b), ForceSource::Discrete).unwrap();
    assert_abs_diff_eq!(s.value / (b - a), 1.0, epsilon = 1e-12);
}

#[test]
fn quadratic_sanity_step_terms() {
    let sys = half_square_system();
    let p = Partition::uniform(1.0, 1).unwrap();
    let out = amm_solve(&sys, &p, &v(&[1.0]), &opts(1)).unwrap();
    let rate = rate_term(&out, &sys, (0.0, 1.0)).unwrap().value;
    let slope = slope_term(&out, &sys, (0.0, 1.0), ForceSource::Discrete).unwrap().value;
    assert_abs_diff_eq!(rate, 5.0 / 32.0, epsilon = 1e-14);
    assert_abs_diff_eq!(slope, 5.0 / 32.0, epsilon = 1e-14);
    let rep = edb_audit_with(&out, &sys, (0.0, 1.0), AuditForm::Inequality, ForceSource::Discrete);
    // E(U) + h[R~ + R~*] = E(U_prev) - |dU|^2/2 for E = u^2/2
    assert_abs_diff_eq!(rep.residual, -(0.125 + 1.0 / 32.0), epsilon = 1e-14);
    assert!(rep.passed);
}

#[test]
fn exact_split_run_balances_per_interval() {
    let sys = counterexample();
    let p = Partition::uniform(1.5, 64).unwrap();
    let out = split_step_solve(&sys, &p, &v(&[2.0, 1.0]), &opts(2)).unwrap();
    for rep in audit_all_steps(&out, &sys, AuditForm::Balance) {
        assert!(rep.residual.abs() <= 1e-8, "{:?}", rep.interval);
        assert!(rep.passed, "{:?}", rep.anomalies);
        assert!(rep.fenchel_young_min >= -1e-10);
    }
    let off = edb_audit(&out, &sys, (0.3, 0.9), AuditForm::Balance);
    assert!(off.residual.abs() <= 1e-8);
    let eff = effective_solve(&sys, &p, &v(&[2.0, 1.0]), &opts(2)).unwrap();
    let rep = edb_audit(&eff, &sys, (0.0, 1.5), AuditForm::Balance);
    assert!(rep.residual.abs() <= 1e-8 && rep.passed);
}

#[test]
fn amm_allen_cahn_satisfies_discrete_inequality() {
    let sys = allen_cahn(8);
    let p = Partition::uniform(0.4, 8).unwrap();
    let o = SolverOptions {
        inner_steps: 4,
        with_variational: true,
        ..SolverOptions::default()
    };
    let out = amm_solve(&sys, &p, &ac_initial(8), &o).unwrap();
    let nodes = p.nodes().to_vec();
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            let rep = edb_audit(&out, &sys, (nodes[i], nodes[j]), AuditForm::Inequality);
            assert_eq!(rep.source, ForceSource::Variational);
            assert!(rep.passed, "{:?}: {:?}", rep.interval, rep.anomalies);
            let disc = edb_audit_with(&out, &sys, (nodes[i], nodes[j]), AuditForm::Inequality, ForceSource::Discrete);
            assert!(disc.passed, "{:?}", disc.anomalies);
            assert!(rep.rate_repetition_mismatch.unwrap() <= 1e-12);
            assert!(rep.slope_repetition_mismatch.unwrap() <= 1e-12);
        }
    }
    // the variational balance is an equality up to quadrature
    let full = edb_audit(&out, &sys, (0.0, 0.4), AuditForm::Inequality);
    let mut last = f64::INFINITY;
    for m in [4, 8, 16] {
        let o = SolverOptions {
            inner_steps: m,
            with_variational: true,
            ..SolverOptions::default()
        };
        let out = amm_solve(&sys, &p, &ac_initial(8), &o).unwrap();
        let f = edb_audit(&out, &sys, (0.0, 0.4), AuditForm::Inequality);
        assert!(f.residual.abs() <= 1.5 * f.quadrature_error);
        assert!(f.residual.abs() < 0.3 * last);
        last = f.residual.abs();
    }
    let dec = full.decomposition.unwrap();
    assert!(dec.value_gap >= -1e-10);
}

#[test]
fn stationary_audit_is_zero() {
    let sys = singleton_system();
    let e = Energy::quadratic_block(
        Matrix::identity(2, 2),
        Matrix::zeros(1, 2),
        Matrix::identity(1, 1),
        Load::zero(2),
        Load::zero(1),
    )
    .unwrap();
    let sys = GradientSystem::new(
        e,
        sys.potential(Mechanism::First).unwrap().clone(),
        sys.potential(Mechanism::Second).unwrap().clone(),
    )
    .unwrap();
    let p = Partition::uniform(1.0, 4).unwrap();
    let out = amm_solve(&sys, &p, &Vector::zeros(3), &opts(2)).unwrap();
    let rep = edb_audit(&out, &sys, (0.0, 1.0), AuditForm::Balance);
    for x in [rep.d_rate, rep.d_slope, rep.power_integral, rep.residual] {
        assert_eq!(x, 0.0);
    }
    assert_eq!(rep.energy_end - rep.energy_start, 0.0);
    assert!(rep.passed);
    let rem = remainder_term(&out, sys.energy(), (0.0, 1.0)).unwrap();
    assert_eq!(rem.value, 0.0);
    assert_eq!(rem.lambda_bound, 0.0);
}

#[test]
fn remainder_convex_and_semiconvex() {
    let sys = singleton_system();
    let p = Partition::uniform(1.0, 8).unwrap();
    let u0 = v(&[1.0, -1.0, 0.5]);
    let out = amm_solve(&sys, &p, &u0, &opts(2)).unwrap();
    let rem = remainder_term(&out, sys.energy(), (0.0, 1.0)).unwrap();
    assert_eq!(rem.lambda_bound, 0.0);
    assert!(rem.value <= 1e-12);

    let sys = allen_cahn(8);
    let u0 = ac_initial(8).map(|x| 1.5 * x);
    let mut last = f64::INFINITY;
    for n in [4, 8, 16, 32] {
        let p = Partition::uniform(0.4, n).unwrap();
        let out = amm_solve(&sys, &p, &u0, &opts(1)).unwrap();
        let rem = remainder_term(&out, sys.energy(), (0.0, 0.4)).unwrap();
        assert!(rem.lambda < 0.0);
        assert!(rem.value <= rem.lambda_bound + 1e-12);
        assert!(rem.value.abs() < last, "n = {n}: {} vs {last}", rem.value.abs());
        last = rem.value.abs();
    }
}

#[test]
fn remainder_needs_delayed_curve() {
    let sys = half_square_system();
    let mut out = synthetic_linear(1.0, 2, 1);
    out.u_delayed = out.u_const.clone();
    assert!(remainder_term(&out, sys.energy(), (0.0, 1.0)).is_err());
}

#[test]
fn decomposition_gap_and_defect() {
    let sys = singleton_system();
    let u0 = v(&[1.0, -1.0, 0.5]);
    let p = Partition::uniform(1.0, 8).unwrap();
    let out = amm_solve(&sys, &p, &u0, &opts(2)).unwrap();
    let dec = decomposition(&out, &sys, None).unwrap();
    assert!(dec.value_gap >= -1e-12);
    // V_1 + V_2 is the step difference quotient
    assert!(dec.defect <= 1e-12);
    let eff = effective_solve(&sys, &p, &u0, &opts(2)).unwrap();
    assert!(decomposition(&eff, &sys, None).is_err());
}

#[test]
fn singleton_study_converges() {
    let sys = singleton_system();
    let u0 = v(&[1.0, -1.0, 0.5]);
    for scheme in [SchemeKind::Split, SchemeKind::Amm] {
        let table = convergence_study(&sys, &u0, 1.0, scheme, &[8, 16, 32, 64], Reference::default(), &opts(2), 4).unwrap();
        assert!(table.errors_decrease(), "{}", table.to_csv_string());
        for row in &table.rows[1..] {
            assert!(row.order.unwrap() >= 0.5);
        }
        assert!(table.rows.windows(2).all(|w| w[1].defect < w[0].defect));
        assert!(table.rows.iter().all(|r| r.edb_passed));
        assert_eq!(table.reference_steps, 1024);
    }
}

#[test]
fn counterexample_study_does_not_converge() {
    let sys = counterexample();
    let u0 = v(&[2.0, 1.0]);
    let table = convergence_study(
        &sys,
        &u0,
        1.5,
        SchemeKind::Split,
        &[16, 32, 64, 128],
        Reference::ExactRegime,
        &opts(2),
        2,
    )
    .unwrap();
    assert_abs_diff_eq!(table.reference_time_to_zero.unwrap(), 0.75, epsilon = 1e-12);
    for row in &table.rows {
        assert!(row.sup_error > 0.2, "{}", table.to_csv_string());
        assert!((row.time_to_zero.unwrap() - 11.0 / 12.0).abs() <= 2.0 / row.n as f64);
    }
    let csv = table.to_csv_string();
    assert!(csv.starts_with("n,max_step,sup_error,order"));
    assert_eq!(csv.lines().count(), 5);
    let json: serde_json::Value = serde_json::from_str(&table.to_json()).unwrap();
    assert_eq!(json["scheme"], "split");
}

#[test]
fn study_input_errors() {
    let sys = counterexample();
    let u0 = v(&[2.0, 1.0]);
    let o = opts(1);
    assert!(convergence_study(&sys, &u0, 1.0, SchemeKind::Split, &[16, 8], Reference::default(), &o, 1).is_err());
    assert!(convergence_study(&sys, &u0, 1.0, SchemeKind::Split, &[], Reference::default(), &o, 1).is_err());
    assert!(convergence_study(&sys, &u0, 1.0, SchemeKind::Effective, &[8], Reference::default(), &o, 1).is_err());
    let ac = allen_cahn(4);
    assert!(convergence_study(&ac, &ac_initial(4), 0.2, SchemeKind::Amm, &[4], Reference::ExactRegime, &o, 1).is_err());
}

#[test]
fn audits_report_instead_of_failing() {
    let sys = half_square_system();
    let out = synthetic_linear(1.0, 2, 1);
    let rep = edb_audit(&out, &sys, (0.5, 3.0), AuditForm::Balance);
    assert!(!rep.passed);
    assert!(!rep.anomalies.is_empty());
    let rep = edb_audit_with(&out, &sys, (0.0, 1.0), AuditForm::Inequality, ForceSource::Variational);
    assert!(!rep.passed);
}

#[test]
fn nonsmooth_variational_audit_uses_the_envelope_identity() {
    let sys = counterexample();
    let opts = SolverOptions {
        with_variational: true,
        ..SolverOptions::default()
    };
    let out = amm_solve(&sys, &Partition::uniform(1.5, 32).unwrap(), &v(&[2.0, 1.0]), &opts).unwrap();
    let reports = audit_all_steps(&out, &sys, AuditForm::Inequality);
    assert!(reports.iter().all(|r| r.passed && r.source == ForceSource::Variational));
    assert!(reports.iter().all(|r| r.anomalies.is_empty()), "{:?}", reports.iter().find(|r| !r.anomalies.is_empty()));
    // the gap is pure quadrature: it shrinks as the inner grid is refined
    let gap = |m: usize| {
        let o = SolverOptions { inner_steps: m, ..opts.clone() };
        let out = amm_solve(&sys, &Partition::uniform(1.5, 8).unwrap(), &v(&[2.0, 1.0]), &o).unwrap();
        edb_audit(&out, &sys, (0.0, 1.5), AuditForm::Inequality).quadrature_error
    };
    assert!(gap(32) < gap(4));
}
