use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use super::prox::max_norm_prox;
use super::*;
use crate::energies::{stiffness, DoubleWell, Load};
use crate::partitions::{Half, Partition};
use crate::{Matrix, Vector, WeightedNorm};

fn v(xs: &[f64]) -> Vector {
    Vector::from_vec(xs.to_vec())
}

fn half_square() -> Energy {
    Energy::quadratic_block(
        Matrix::from_element(1, 1, 1.0),
        Matrix::zeros(0, 1),
        Matrix::zeros(0, 0),
        Load::zero(1),
        Load::zero(0),
    )
    .unwrap()
}

fn identity_quadratic() -> Potential {
    Potential::quadratic(Matrix::identity(1, 1)).unwrap()
}

fn counterexample() -> GradientSystem {
    GradientSystem::new(
        Energy::max_norm(),
        Potential::anisotropic_dual(v(&[1.0, 3.0])).unwrap(),
        Potential::anisotropic_dual(v(&[3.0, 1.0])).unwrap(),
    )
    .unwrap()
}

fn allen_cahn(m: usize, p: f64) -> GradientSystem {
    let h = 1.0 / (m + 1) as f64;
    let e = Energy::allen_cahn(m, h, DoubleWell::default(), Load::zero(m)).unwrap();
    let r1 = Potential::power_norm(p, Vector::from_element(m, h)).unwrap();
    let r2 = Potential::quadratic(stiffness(m, h)).unwrap();
    GradientSystem::new(e, r1, r2).unwrap()
}

fn ac_initial(m: usize) -> Vector {
    Vector::from_fn(m, |i, _| {
        let x = (i + 1) as f64 / (m + 1) as f64;
        0.8 * (std::f64::consts::PI * x).sin() + 0.3 * (3.0 * std::f64::consts::PI * x).sin()
    })
}

/// Quadratic block system with a quadratic y-dissipation and a
/// one-homogeneous-plus-quadratic z-dissipation.
fn block_system(sigma: f64, loaded: bool) -> GradientSystem {
    let (ny, nz) = (3, 2);
    let n = ny + nz;
    let l = Matrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 5) as f64 / 5.0 - 0.4);
    let h = &l * l.transpose() + Matrix::identity(n, n);
    let (f, g) = if loaded {
        (Load::constant(v(&[1.0, -0.5, 0.3])), Load::constant(v(&[0.4, -0.2])))
    } else {
        (Load::zero(ny), Load::zero(nz))
    };
    let e = Energy::quadratic_block(
        h.view((0, 0), (ny, ny)).into_owned(),
        h.view((ny, 0), (nz, ny)).into_owned(),
        h.view((ny, ny), (nz, nz)).into_owned(),
        f,
        g,
    )
    .unwrap();
    let ry = Potential::quadratic(Matrix::identity(ny, ny) * 0.5).unwrap();
    let rz = Potential::one_hom_plus_quad(sigma, 1.0, Vector::from_element(nz, 1.0)).unwrap();
    GradientSystem::block(e, ry, rz).unwrap()
}

fn opts(inner: usize) -> SolverOptions {
    SolverOptions {
        inner_steps: inner,
        ..SolverOptions::default()
    }
}

#[test]
fn prox_quadratic_examples() {
    let e = half_square();
    let r = identity_quadratic();
    let out = prox_step(&e, &r, 0.0, &v(&[1.0]), 1.0, 1e-12).unwrap();
    assert_abs_diff_eq!(out.u[0], 0.5, epsilon = 1e-12);
    assert_abs_diff_eq!(out.xi[0], 0.5, epsilon = 1e-12);
    let out = prox_step(&e, &r, 0.0, &v(&[0.0]), 1.0, 1e-12).unwrap();
    assert_eq!(out.u[0], 0.0);
    assert_eq!(out.xi[0], 0.0);
}

#[test]
fn prox_rejects_bad_input() {
    let e = half_square();
    let r = identity_quadratic();
    assert!(prox_step(&e, &r, 0.0, &v(&[1.0]), 0.0, 1e-12).is_err());
    assert!(prox_step(&e, &r, 0.0, &v(&[1.0, 2.0]), 1.0, 1e-12).is_err());
    let maxnorm = Energy::max_norm();
    let nonquad = Potential::power_norm(3.0, v(&[1.0, 1.0])).unwrap();
    assert!(matches!(
        prox_step(&maxnorm, &nonquad, 0.0, &v(&[1.0, 0.0]), 0.1, 1e-10),
        Err(crate::Error::Input(_))
    ));
}

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-12 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn prox_allen_cahn_matches_coordinate_descent() {
    let m = 3;
    let hm = 0.25;
    let e = Energy::allen_cahn(m, hm, DoubleWell::default(), Load::zero(m)).unwrap();
    let r = Potential::rescaled(Potential::power_norm(2.0, Vector::from_element(m, hm)).unwrap());
    let a = v(&[0.5, 0.5, 0.5]);
    let step = 0.1;
    let out = prox_step(&e, &r, 0.0, &a, step, 1e-12).unwrap();
    let phi = |u: &Vector| step * r.eval(&((u - &a) / step)).unwrap().value() + e.eval(0.0, u).unwrap();
    let mut x = a.clone();
    let mut prev = phi(&x);
    for _ in 0..500 {
        for i in 0..m {
            let xi = golden_min(
                |s| {
                    let mut y = x.clone();
                    y[i] = s;
                    phi(&y)
                },
                -3.0,
                3.0,
            );
            x[i] = xi;
        }
        let cur = phi(&x);
        assert!(cur <= prev + 1e-14, "coordinate descent must not increase the functional");
        if prev - cur < 1e-16 {
            break;
        }
        prev = cur;
    }
    for i in 0..m {
        assert_abs_diff_eq!(out.u[i], x[i], epsilon = 1e-4);
    }
    let g = e.gradient(0.0, &out.u).unwrap().unwrap();
    assert!((g - &out.xi).amax() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn max_norm_prox_beats_grid(
        a1 in -3.0f64..3.0, a2 in -3.0f64..3.0,
        al1 in 0.2f64..5.0, al2 in 0.2f64..5.0,
        h in 0.01f64..1.0,
    ) {
        let a = v(&[a1, a2]);
        let alpha = v(&[al1, al2]);
        let phi = |u: &Vector| {
            (u[0] - a1).powi(2) / (2.0 * h * al1) + (u[1] - a2).powi(2) / (2.0 * h * al2) + u[0].abs().max(u[1].abs())
        };
        let (u, xi) = max_norm_prox(&a, &alpha, h);
        let best = phi(&u);
        let n = 120;
        for i in 0..=n {
            for j in 0..=n {
                let g = v(&[-3.5 + 7.0 * i as f64 / n as f64, -3.5 + 7.0 * j as f64 / n as f64]);
                prop_assert!(best <= phi(&g) + 1e-12);
            }
        }
        let sub = Energy::max_norm().subdiff(0.0, &u).unwrap();
        prop_assert!(sub.contains(&xi, 1e-9), "force {xi:?} not in {sub:?}");
    }
}

#[test]
fn regime_velocities() {
    let sys = counterexample();
    let u0 = v(&[2.0, 1.0]);
    let o = opts(4);
    let first = substep_flow(&sys, Mechanism::First, (0.0, 0.1), &u0, &o).unwrap();
    let seg = &first.segments.as_ref().unwrap()[0];
    assert_eq!(seg.velocity, v(&[-2.0, 0.0]));
    let second = substep_flow(&sys, Mechanism::Second, (0.0, 0.1), &u0, &o).unwrap();
    assert_eq!(second.segments.as_ref().unwrap()[0].velocity, v(&[-6.0, 0.0]));
    let eff = effective_solve(&sys, &Partition::uniform(1.0, 4).unwrap(), &v(&[1.0, 1.0]), &o).unwrap();
    let seg = &eff.segments.as_ref().unwrap()[0];
    assert_eq!(seg.velocity, v(&[-2.0, -2.0]));
    assert_abs_diff_eq!(seg.xi[0], 0.5, epsilon = 1e-15);
}

#[test]
fn regime_path_classifies_and_rejects() {
    let alpha = v(&[2.0, 6.0]);
    assert!(regime::regime_path(&alpha, &v(&[f64::NAN, 0.0]), 0.0, 1.0, None).is_none());
    let segs = regime::regime_path(&alpha, &v(&[-1.0, 0.0]), 0.0, 1.0, None).unwrap();
    assert_eq!(segs[0].velocity, v(&[2.0, 0.0]));
    assert_abs_diff_eq!(segs[0].t1, 0.5, epsilon = 1e-15);
    assert_eq!(segs.last().unwrap().velocity, v(&[0.0, 0.0]));
    assert_eq!(path_state(&segs, 0.75).unwrap(), v(&[0.0, 0.0]));
}

#[test]
fn split_counterexample_alternates_then_slows_down() {
    let sys = counterexample();
    let p = Partition::uniform(1.5, 96).unwrap();
    let out = split_step_solve(&sys, &p, &v(&[2.0, 1.0]), &opts(4)).unwrap();
    let segs = out.segments.as_ref().unwrap();
    let diag_at = segs.iter().find(|s| s.xi[0] != 0.0 && s.xi[1] != 0.0).unwrap().t0;
    for s in segs.iter().filter(|s| s.t1 <= diag_at && !s.is_empty()) {
        let expect = match s.mechanism.unwrap() {
            Mechanism::First => -2.0,
            Mechanism::Second => -6.0,
        };
        assert_eq!(s.velocity, v(&[expect, 0.0]));
    }
    assert!((diag_at - 0.25).abs() <= 1.0 / 64.0);
    for s in segs.iter().filter(|s| s.t0 >= diag_at && s.velocity.amax() > 0.0) {
        assert_abs_diff_eq!(s.velocity.norm(), 1.5 * 2f64.sqrt(), epsilon = 1e-12);
    }
    let tz = out.time_to_zero(1e-12).unwrap();
    assert!((tz - 11.0 / 12.0).abs() <= 2.0 / 64.0, "time to zero {tz}");
    assert!(out.stats.exact_segments > 0);
    assert_eq!(out.stats.prox_calls, 0);
}

#[test]
fn effective_counterexample_regimes() {
    let sys = counterexample();
    let p = Partition::uniform(1.0, 64).unwrap();
    let out = effective_solve(&sys, &p, &v(&[2.0, 1.0]), &opts(4)).unwrap();
    let segs = out.segments.as_ref().unwrap();
    assert_abs_diff_eq!(segs[0].t1, 0.25, epsilon = 1e-15);
    assert_eq!(segs[1].velocity, v(&[-2.0, -2.0]));
    assert_abs_diff_eq!(out.time_to_zero(1e-12).unwrap(), 0.75, epsilon = 1e-12);
    assert_abs_diff_eq!(out.state_at(0.5).amax(), 0.5, epsilon = 1e-12);
}

#[test]
fn amm_quadratic_sanity_step() {
    let r = identity_quadratic();
    let sys = GradientSystem::new(half_square(), r.clone(), r).unwrap();
    let p = Partition::uniform(1.0, 1).unwrap();
    let out = amm_solve(&sys, &p, &v(&[1.0]), &opts(1)).unwrap();
    // grid oracle: u -> (u - a)^2 / 2 + u^2 / 2 at step 1e-6
    let oracle = |a: f64| {
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=3_000_000 {
            let u = -1.0 + i as f64 * 1e-6;
            let f = (u - a).powi(2) / 2.0 + u * u / 2.0;
            if f < best.0 {
                best = (f, u);
            }
        }
        best.1
    };
    let u1 = out.u_const.cell_value(0)[0];
    let u2 = out.u_const.cell_value(1)[0];
    assert_abs_diff_eq!(u1, 0.5, epsilon = 1e-12);
    assert_abs_diff_eq!(u2, 0.25, epsilon = 1e-12);
    assert_abs_diff_eq!(u1, oracle(1.0), epsilon = 2e-6);
    assert_abs_diff_eq!(u2, oracle(u1), epsilon = 2e-6);
}

#[test]
fn stationary_states_stay_put() {
    let e = Energy::quadratic_block(
        Matrix::identity(2, 2),
        Matrix::from_element(1, 2, 0.3),
        Matrix::from_element(1, 1, 2.0),
        Load::zero(2),
        Load::zero(1),
    )
    .unwrap();
    let sys = GradientSystem::new(
        e.clone(),
        Potential::quadratic(Matrix::identity(3, 3)).unwrap(),
        Potential::power_norm(1.5, Vector::from_element(3, 1.0)).unwrap(),
    )
    .unwrap();
    let p = Partition::uniform(1.0, 8).unwrap();
    let u0 = Vector::zeros(3);
    for out in [
        split_step_solve(&sys, &p, &u0, &opts(2)).unwrap(),
        amm_solve(&sys, &p, &u0, &opts(2)).unwrap(),
        effective_solve(&sys, &p, &u0, &opts(2)).unwrap(),
    ] {
        assert!(out.u_linear.samples().iter().all(|s| s.amax() == 0.0));
        assert!(out.xi.samples().iter().all(|s| s.amax() == 0.0));
    }
    let cx = counterexample();
    let out = amm_solve(&cx, &p, &v(&[0.0, 0.0]), &opts(2)).unwrap();
    assert!(out.u_linear.samples().iter().all(|s| s.amax() == 0.0));
}

#[test]
fn amm_tracks_split_on_counterexample() {
    let sys = counterexample();
    let n = 64;
    let p = Partition::uniform(1.5, n).unwrap();
    let u0 = v(&[2.0, 1.0]);
    let split = split_step_solve(&sys, &p, &u0, &opts(2)).unwrap();
    let amm = amm_solve(&sys, &p, &u0, &opts(2)).unwrap();
    let tau = 1.5 / n as f64;
    let dist = amm.sup_node_distance(&split, &WeightedNorm::euclidean(2));
    assert!(dist <= 10.0 * tau, "AMM vs split node distance {dist}");
    for c in 0..amm.grid.cells() {
        let (k, half, _) = amm.grid.cell_location(c);
        let (_, b) = p.semi_interval(k, half);
        let sub = sys.energy().subdiff(b, &amm.u_const.cell_value(c)).unwrap();
        assert!(sub.contains(&amm.xi.cell_value(c), 1e-9));
    }
}

#[test]
fn interpolants_agree_at_nodes_and_midpoints() {
    let sys = allen_cahn(6, 2.0);
    let p = Partition::uniform(0.5, 8).unwrap();
    let u0 = ac_initial(6);
    let norm = sys.energy().norm().clone();
    for out in [
        amm_solve(&sys, &p, &u0, &opts(3)).unwrap(),
        split_step_solve(&sys, &p, &u0, &opts(3)).unwrap(),
    ] {
        for k in 0..p.steps() {
            let mid = p.midpoint(k);
            let end = p.nodes()[k + 1];
            let cm = out.grid.cell_index(k, Half::Left, 2);
            let ce = out.grid.cell_index(k, Half::Right, 2);
            assert!(norm.norm(&(out.u_linear.value_at(mid) - out.u_const.cell_value(cm))) < 1e-14);
            assert!(norm.norm(&(out.u_linear.value_at(end) - out.u_const.cell_value(ce))) < 1e-14);
        }
        for c in 0..out.grid.cells() {
            let (k, half, _) = out.grid.cell_location(c);
            let t = if out.scheme == SchemeKind::Amm {
                p.semi_interval(k, half).1
            } else {
                out.grid.cell_bounds(c).1
            };
            let g = sys.energy().gradient(t, &out.u_const.cell_value(c)).unwrap().unwrap();
            assert!((g - out.xi.cell_value(c)).amax() < 1e-12);
        }
    }
}

#[test]
fn interpolant_consistency_under_refinement() {
    let sys = allen_cahn(6, 2.0);
    let u0 = ac_initial(6);
    let norm = sys.energy().norm().clone();
    let mut last = f64::INFINITY;
    for n in [4, 8, 16, 32] {
        let p = Partition::uniform(0.5, n).unwrap();
        let out = amm_solve(&sys, &p, &u0, &opts(1)).unwrap();
        let d = out.u_const.sup_distance(&out.u_delayed, &norm).unwrap();
        assert!(d < last, "sup distance {d} did not decrease from {last}");
        last = d;
    }
}

#[test]
fn energy_decreases_with_autonomous_loads() {
    let u0 = ac_initial(8);
    let p = Partition::uniform(0.4, 8).unwrap();
    for pw in [2.0, 3.0, 1.5] {
        let sys = allen_cahn(8, pw);
        let e = sys.energy();
        for out in [
            split_step_solve(&sys, &p, &u0, &opts(2)).unwrap(),
            amm_solve(&sys, &p, &u0, &opts(2)).unwrap(),
            effective_solve(&sys, &p, &u0, &opts(2)).unwrap(),
        ] {
            let energies: Vec<f64> = out
                .u_linear
                .samples()
                .iter()
                .step_by(2)
                .map(|u| e.eval(0.0, u).unwrap())
                .collect();
            for w in energies.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{:?} p={pw}: {} > {}", out.scheme, w[1], w[0]);
            }
        }
    }
}

#[test]
fn variational_interpolant_hits_iterates() {
    let sys = allen_cahn(5, 2.0);
    let p = Partition::uniform(0.3, 4).unwrap();
    let o = SolverOptions {
        inner_steps: 4,
        with_variational: true,
        ..SolverOptions::default()
    };
    let out = amm_solve(&sys, &p, &ac_initial(5), &o).unwrap();
    let nodes = out.variational_nodes.as_ref().unwrap();
    assert_eq!(nodes.len(), out.grid.cells() + 1);
    for k in 0..=p.steps() {
        let i = out.grid.node_index(k);
        assert!((nodes[i].clone() - out.u_linear.samples()[i].clone()).amax() < 1e-14);
    }
    let var = out.u_variational.as_ref().unwrap();
    assert_eq!(var.kind(), crate::InterpolantKind::Variational);
    let mid = out.grid.cell_midpoint(0);
    assert_abs_diff_eq!(var.sample_time(1), mid, epsilon = 1e-15);
}

#[test]
fn block_y_step_is_a_linear_solve() {
    let sys = block_system(0.5, true);
    let e = sys.energy();
    let u = v(&[0.2, -0.1, 0.4, 0.3, -0.2]);
    let h = 0.05;
    let r = sys.rescaled(Mechanism::First).unwrap();
    let out = prox_step(e, &r, 0.0, &u, h, 1e-12).unwrap();
    assert_eq!(out.u.rows(3, 2), u.rows(3, 2));
    // (A + D/h) y = D/h y_prev + f - B^T z with R~(v) = |v|^2/8, so D = I/4
    let EnergyKind::QuadraticBlock { a, b, f_load, .. } = e.kind() else { unreachable!() };
    let z = u.rows(3, 2).into_owned();
    let yp = u.rows(0, 3).into_owned();
    let lhs = a + Matrix::identity(3, 3) * (0.25 / h);
    let rhs = &yp * (0.25 / h) + f_load.value(0.0) - b.transpose() * z;
    let y = out.u.rows(0, 3).into_owned();
    assert!((lhs * y - rhs).amax() <= 1e-10);
}

#[test]
fn block_z_stays_inside_yield_surface() {
    let sys = block_system(1e3, true);
    let u = v(&[0.2, -0.1, 0.4, 0.3, -0.2]);
    let r = sys.rescaled(Mechanism::Second).unwrap();
    let out = prox_step(sys.energy(), &r, 0.0, &u, 0.05, 1e-12).unwrap();
    assert_eq!(out.u, u);
    let p = Partition::uniform(1.0, 16).unwrap();
    for mode in [BlockMode::Split, BlockMode::Amm] {
        let run = block_solve(&sys, &p, &u, mode, &opts(2)).unwrap();
        for s in run.u_linear.samples() {
            assert_eq!(s.rows(3, 2), u.rows(3, 2));
        }
    }
}

#[test]
fn block_energy_monotone_and_forces_masked() {
    let sys = block_system(0.2, false);
    let e = sys.energy();
    let u0 = v(&[1.0, -0.5, 0.7, 0.6, -0.9]);
    let p = Partition::uniform(1.0, 10).unwrap();
    for mode in [BlockMode::Split, BlockMode::Amm] {
        let run = block_solve(&sys, &p, &u0, mode, &opts(2)).unwrap();
        let en: Vec<f64> = run.u_linear.samples().iter().map(|u| e.eval(0.0, u).unwrap()).collect();
        for w in en.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        for c in 0..run.grid.cells() {
            let (_, half, _) = run.grid.cell_location(c);
            let xi = run.xi.cell_value(c);
            let frozen = match half {
                Half::Left => xi.rows(3, 2).amax(),
                Half::Right => xi.rows(0, 3).amax(),
            };
            assert_eq!(frozen, 0.0);
        }
    }
    let plain = GradientSystem::new(
        e.clone(),
        Potential::quadratic(Matrix::identity(5, 5)).unwrap(),
        Potential::quadratic(Matrix::identity(5, 5)).unwrap(),
    )
    .unwrap();
    assert!(block_solve(&plain, &p, &u0, BlockMode::Split, &opts(1)).is_err());
}

#[test]
fn block_effective_is_simultaneous_implicit_stepping() {
    let (ny, nz) = (3, 2);
    let base = block_system(0.2, true);
    let dz = Matrix::identity(nz, nz) * 2.0;
    let sys = GradientSystem::block(
        base.energy().clone(),
        Potential::quadratic(Matrix::identity(ny, ny) * 0.5).unwrap(),
        Potential::quadratic(dz).unwrap(),
    )
    .unwrap();
    let u0 = v(&[1.0, -0.5, 0.7, 0.6, -0.9]);
    let p = Partition::uniform(1.0, 5).unwrap();
    let out = effective_solve(&sys, &p, &u0, &opts(1)).unwrap();
    let e = sys.energy();
    let EnergyKind::QuadraticBlock { a, b, g, f_load, g_load } = e.kind() else { unreachable!() };
    let mut hmat = Matrix::zeros(5, 5);
    hmat.view_mut((0, 0), (3, 3)).copy_from(a);
    hmat.view_mut((3, 0), (2, 3)).copy_from(b);
    hmat.view_mut((0, 3), (3, 2)).copy_from(&b.transpose());
    hmat.view_mut((3, 3), (2, 2)).copy_from(g);
    let d = Matrix::from_diagonal(&v(&[0.5, 0.5, 0.5, 2.0, 2.0]));
    let mut u = u0.clone();
    for k in 1..=p.steps() {
        let t = p.nodes()[k];
        let tau = p.step_size(k - 1);
        let mut load = Vector::zeros(5);
        load.rows_mut(0, 3).copy_from(&f_load.value(t));
        load.rows_mut(3, 2).copy_from(&g_load.value(t));
        let lhs = &d / tau + &hmat;
        u = lhs.lu().solve(&(&d * &u / tau + load)).unwrap();
        assert!((out.u_linear.node_value(k) - &u).amax() < 1e-9);
    }
}

#[test]
fn power_control_recorded_for_loaded_runs() {
    let sys = block_system(0.2, true);
    let p = Partition::uniform(1.0, 4).unwrap();
    let out = amm_solve(&sys, &p, &Vector::zeros(5), &opts(1)).unwrap();
    assert_eq!(out.stats.power_constant, Some(0.0));
    assert_eq!(out.stats.steps.len(), 8);
    let m = 4;
    let h = 0.2;
    let load = Load::sinusoidal(Vector::from_element(m, 1.0), 2.0, 0.0).unwrap();
    let e = Energy::allen_cahn(m, h, DoubleWell::default(), load).unwrap().with_shift(5.0);
    let sys = GradientSystem::new(
        e,
        Potential::power_norm(2.0, Vector::from_element(m, h)).unwrap(),
        Potential::quadratic(stiffness(m, h)).unwrap(),
    )
    .unwrap();
    let out = amm_solve(&sys, &p, &Vector::from_element(m, 0.1), &opts(1)).unwrap();
    let c = out.stats.power_constant.expect("constant available");
    assert!(c > 0.0);
    assert_eq!(out.stats.power_violations, 0);
}

#[test]
fn substep_flow_input_checks() {
    let sys = counterexample();
    let o = opts(2);
    assert!(substep_flow(&sys, Mechanism::First, (0.5, 0.5), &v(&[1.0, 0.0]), &o).is_err());
    assert!(substep_flow(&sys, Mechanism::First, (0.0, 0.5), &v(&[1.0]), &o).is_err());
    let single = GradientSystem::single(half_square(), identity_quadratic()).unwrap();
    let flow = substep_flow(&single, Mechanism::First, (0.0, 1.0), &v(&[1.0]), &opts(100)).unwrap();
    // R~(v) = v^2 / 4 gives u' = -2u
    assert_abs_diff_eq!(flow.states[100][0], (-2.0f64).exp(), epsilon = 2e-2);
    assert!(substep_flow(&single, Mechanism::Second, (0.0, 1.0), &v(&[1.0]), &o).is_err());
    let bad = SolverOptions {
        inner_steps: 0,
        ..SolverOptions::default()
    };
    assert!(substep_flow(&single, Mechanism::First, (0.0, 1.0), &v(&[1.0]), &bad).is_err());
}

#[test]
fn scheme_names_round_trip() {
    for k in [
        SchemeKind::Split,
        SchemeKind::Amm,
        SchemeKind::BlockSplit,
        SchemeKind::BlockAmm,
        SchemeKind::Effective,
    ] {
        assert_eq!(SchemeKind::parse(k.name()).unwrap(), k);
    }
    assert!(SchemeKind::parse("euler").is_err());
}
