//! Packaged model problems with default parameters and, for the max-norm
//! counterexample, closed-form reference trajectories.


use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::Reference;
use crate::energies::{stiffness, DoubleWell, Load};
use crate::error::{Error, Result};
use crate::solvers::{regime_path_mean, GradientSystem, PathSegment, SchemeKind};
use crate::{Energy, Matrix, Potential, Vector, WeightedNorm};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    Counterexample,
    AllenCahn1d,
    ViscoPlasticity1d,
}

impl ModelName {
    pub const ALL: [ModelName; 3] = [ModelName::Counterexample, ModelName::AllenCahn1d, ModelName::ViscoPlasticity1d];

    pub fn name(self) -> &'static str {
        match self {
            ModelName::Counterexample => "counterexample",
            ModelName::AllenCahn1d => "allen-cahn-1d",
            ModelName::ViscoPlasticity1d => "visco-plasticity-1d",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::input(format!(
                    "unknown model '{s}' (expected counterexample, allen-cahn-1d or visco-plasticity-1d)"
                ))
            })
    }

    pub fn describe(self) -> &'static str {
        match self {
            ModelName::Counterexample => "max-norm energy in the plane with two anisotropic quadratic dissipations",
            ModelName::AllenCahn1d => "1-D Allen-Cahn equation, L^p dissipation split against an H^1 dissipation",
            ModelName::ViscoPlasticity1d => "1-D visco-elasto-plastic bar with staggered displacement and plastic strain",
        }
    }
}

/// Max-norm energy with `R_j*(xi) = (a_j xi_1^2 + b_j xi_2^2)/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterexampleParams {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
    pub u0: [f64; 2],
    pub horizon: f64,
}

impl Default for CounterexampleParams {
    fn default() -> Self {
        CounterexampleParams {
            a1: 1.0,
            b1: 3.0,
            a2: 3.0,
            b2: 1.0,
            u0: [2.0, 1.0],
            horizon: 1.5,
        }
    }
}

/// Allen-Cahn on `m` interior nodes of `(0, 1)`: `R_1 = |v|_p^p / p`,
/// `R_2 = |grad v|^2 / 2`, double well `depth/4 (r^2 - width^2)^2` and a
/// uniform load `amplitude sin(omega t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AllenCahnParams {
    pub m: usize,
    pub p: f64,
    pub depth: f64,
    pub width: f64,
    pub load_amplitude: f64,
    pub load_omega: f64,
    /// Initial state `a sin(pi x)`.
    pub initial_amplitude: f64,
    pub horizon: f64,
    /// Energy shift; derived from the load bound when absent.
    pub shift: Option<f64>,
}

impl Default for AllenCahnParams {
    fn default() -> Self {
        AllenCahnParams {
            m: 16,
            p: 2.0,
            depth: 1.0,
            width: 1.0,
            load_amplitude: 0.0,
            load_omega: 2.0 * std::f64::consts::PI,
            initial_amplitude: 0.8,
            horizon: 0.5,
            shift: None,
        }
    }
}

/// Bar `(0, 1)` with displacement on `m` interior nodes and plastic strain on
/// the `m + 1` elements. Energy `sum_e h [C/2 (eps_e - z_e)^2 + H/2 z_e^2] - h <f, y>`,
/// dissipations `D/2 |eps(y')|^2` and `h (sigma |z'|_1 + rho/2 |z'|^2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ViscoParams {
    pub m: usize,
    pub elastic: f64,
    pub hardening: f64,
    pub viscosity: f64,
    pub sigma_yield: f64,
    pub rho: f64,
    /// Uniform body force `amplitude sin(omega t)`.
    pub load_amplitude: f64,
    pub load_omega: f64,
    /// Initial displacement `a sin(pi x)`, zero plastic strain.
    pub initial_amplitude: f64,
    pub horizon: f64,
}

impl Default for ViscoParams {
    fn default() -> Self {
        ViscoParams {
            m: 8,
            elastic: 1.0,
            hardening: 0.5,
            viscosity: 0.1,
            sigma_yield: 0.2,
            rho: 1.0,
            load_amplitude: 1.0,
            load_omega: std::f64::consts::PI,
            initial_amplitude: 0.1,
            horizon: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ModelParams {
    Counterexample(CounterexampleParams),
    AllenCahn1d(AllenCahnParams),
    ViscoPlasticity1d(ViscoParams),
}

/// A configured model: system, initial state, horizon and study defaults.
#[derive(Clone, Debug)]
pub struct ModelPreset {
    pub name: ModelName,
    pub params: ModelParams,
    pub system: GradientSystem,
    pub u0: Vector,
    pub horizon: f64,
    pub recommended_steps: Vec<usize>,
    pub reference: Reference,
    pub default_scheme: SchemeKind,
}

fn merge<T: Serialize + for<'de> Deserialize<'de> + Default>(overrides: &serde_json::Value) -> Result<T> {
    let mut base = serde_json::to_value(T::default()).expect("serializable defaults");
    match overrides {
        serde_json::Value::Null => {}
        serde_json::Value::Object(map) => {
            let obj = base.as_object_mut().expect("object defaults");
            for (k, v) in map {
                obj.insert(k.clone(), v.clone());
            }
        }
        _ => return Err(Error::config("model overrides must be a JSON object")),
    }
    serde_json::from_value(base).map_err(|e| Error::config(format!("bad model override: {e}")))
}

fn positive(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::config(format!("{name} must be positive and finite, got {x}")));
    }
    Ok(())
}

/// Builds a preset from its name and a JSON object of parameter overrides.
pub fn make_model(name: &str, overrides: &serde_json::Value) -> Result<ModelPreset> {
    match ModelName::parse(name)? {
        ModelName::Counterexample => counterexample(merge(overrides)?),
        ModelName::AllenCahn1d => allen_cahn(merge(overrides)?),
        ModelName::ViscoPlasticity1d => visco_plasticity(merge(overrides)?),
    }
}

pub fn counterexample(p: CounterexampleParams) -> Result<ModelPreset> {
    for (n, x) in [("a1", p.a1), ("b1", p.b1), ("a2", p.a2), ("b2", p.b2), ("horizon", p.horizon)] {
        positive(n, x)?;
    }
    if !p.u0.iter().all(|x| x.is_finite()) {
        return Err(Error::config("u0 must be finite"));
    }
    let system = GradientSystem::new(
        Energy::max_norm(),
        Potential::anisotropic_dual(Vector::from_vec(vec![p.a1, p.b1]))?,
        Potential::anisotropic_dual(Vector::from_vec(vec![p.a2, p.b2]))?,
    )?;
    Ok(ModelPreset {
        name: ModelName::Counterexample,
        u0: Vector::from_vec(p.u0.to_vec()),
        horizon: p.horizon,
        params: ModelParams::Counterexample(p),
        system,
        recommended_steps: vec![16, 32, 64, 128, 256],
        reference: Reference::ExactRegime,
        default_scheme: SchemeKind::Split,
    })
}

/// `C_{W,1}, C_{W,2}, C_{W,3}` and the growth exponent of the double well:
/// `W'' >= -C1`, `W >= -C2`, `|W'(r)| <= C3 (1 + |r|^s)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WellConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub growth: f64,
}

pub fn well_constants(well: &DoubleWell) -> WellConstants {
    WellConstants {
        c1: well.semiconvexity(),
        c2: 0.0,
        c3: well.depth * (1.0 + well.width * well.width),
        growth: 3.0,
    }
}

/// Mesh size of the Allen-Cahn grid with `m` interior nodes.
pub fn mesh(m: usize) -> f64 {
    1.0 / (m + 1) as f64
}

pub fn allen_cahn(p: AllenCahnParams) -> Result<ModelPreset> {
    if p.m == 0 {
        return Err(Error::config("m must be at least 1"));
    }
    if !(p.p > 1.0 && p.p.is_finite()) {
        return Err(Error::config(format!("p must exceed 1, got {}", p.p)));
    }
    positive("depth", p.depth)?;
    positive("horizon", p.horizon)?;
    if !(p.width.is_finite() && p.load_amplitude.is_finite() && p.load_omega.is_finite()) {
        return Err(Error::config("well width and load parameters must be finite"));
    }
    if !p.initial_amplitude.is_finite() {
        return Err(Error::config("initial amplitude must be finite"));
    }
    let h = mesh(p.m);
    let well = DoubleWell {
        depth: p.depth,
        width: p.width,
    };
    let load = if p.load_amplitude == 0.0 {
        Load::zero(p.m)
    } else {
        Load::sinusoidal(Vector::from_element(p.m, p.load_amplitude), p.load_omega, 0.0)?
    };
    let shift = match p.shift {
        Some(s) if s.is_finite() => s,
        Some(s) => return Err(Error::config(format!("shift must be finite, got {s}"))),
        None if p.load_amplitude == 0.0 => 0.0,
        None => {
            // E >= m h min_r (W(r) - L |r|); shift so that E >= 1.
            let l = p.load_amplitude.abs();
            let top = 2.0 * (1.0 + p.width.abs() + (l / p.depth).cbrt());
            let lowest = (0..=20_000)
                .map(|i| {
                    let r = top * i as f64 / 20_000.0;
                    well.value(r) - l * r
                })
                .fold(f64::INFINITY, f64::min);
            1.0 - p.m as f64 * h * lowest.min(0.0) * 1.01
        }
    };
    let energy = Energy::allen_cahn(p.m, h, well, load)?.with_shift(shift);
    let system = GradientSystem::new(
        energy,
        Potential::power_norm(p.p, Vector::from_element(p.m, h))?,
        Potential::quadratic(stiffness(p.m, h))?,
    )?;
    let u0 = Vector::from_fn(p.m, |i, _| {
        let x = (i + 1) as f64 * h;
        let pi = std::f64::consts::PI;
        p.initial_amplitude * (pi * x).sin()
    });
    Ok(ModelPreset {
        name: ModelName::AllenCahn1d,
        u0,
        horizon: p.horizon,
        params: ModelParams::AllenCahn1d(p),
        system,
        recommended_steps: vec![8, 16, 32, 64],
        reference: Reference::default(),
        default_scheme: SchemeKind::Amm,
    })
}

pub fn visco_plasticity(p: ViscoParams) -> Result<ModelPreset> {
    if p.m == 0 {
        return Err(Error::config("m must be at least 1"));
    }
    for (n, x) in [
        ("elastic", p.elastic),
        ("hardening", p.hardening),
        ("viscosity", p.viscosity),
        ("rho", p.rho),
        ("horizon", p.horizon),
    ] {
        positive(n, x)?;
    }
    if !(p.sigma_yield > 0.0) {
        return Err(Error::config(format!("sigma_yield must be positive, got {}", p.sigma_yield)));
    }
    if !(p.load_amplitude.is_finite() && p.load_omega.is_finite() && p.initial_amplitude.is_finite()) {
        return Err(Error::config("load and initial parameters must be finite"));
    }
    let (ny, nz) = (p.m, p.m + 1);
    let h = mesh(p.m);
    let k = stiffness(ny, h);
    let a = &k * p.elastic;
    // eps_e = (y_e - y_{e-1}) / h on element e, with y_0 = y_{m+1} = 0
    let b = Matrix::from_fn(nz, ny, |e, i| {
        let mut x = 0.0;
        if i == e {
            x -= p.elastic;
        }
        if i + 1 == e {
            x += p.elastic;
        }
        x
    });
    let g = Matrix::identity(nz, nz) * (h * (p.elastic + p.hardening));
    let f_load = if p.load_amplitude == 0.0 {
        Load::zero(ny)
    } else {
        Load::sinusoidal(Vector::from_element(ny, h * p.load_amplitude), p.load_omega, 0.0)?
    };
    let mut energy = Energy::quadratic_block(a, b, g, f_load, Load::zero(nz))?;
    if p.load_amplitude != 0.0 {
        // E >= mu/2 |u|^2 - F|u| >= -F^2 / (2 mu); shift to keep the power bounded.
        let mu = energy_hessian_min(&energy);
        let f = (ny as f64).sqrt() * h * p.load_amplitude.abs();
        energy = energy.with_shift(1.0 + f * f / mu);
    }
    let sigma = if p.sigma_yield.is_finite() { p.sigma_yield } else { f64::MAX / 4.0 };
    let system = GradientSystem::block(
        energy,
        Potential::quadratic(&k * p.viscosity)?,
        Potential::one_hom_plus_quad(sigma, p.rho, Vector::from_element(nz, h))?,
    )?;
    let mut u0 = Vector::zeros(ny + nz);
    for i in 0..ny {
        u0[i] = p.initial_amplitude * (std::f64::consts::PI * (i + 1) as f64 * h).sin();
    }
    Ok(ModelPreset {
        name: ModelName::ViscoPlasticity1d,
        u0,
        horizon: p.horizon,
        params: ModelParams::ViscoPlasticity1d(p),
        system,
        recommended_steps: vec![8, 16, 32, 64],
        reference: Reference::default(),
        default_scheme: SchemeKind::BlockAmm,
    })
}

fn energy_hessian_min(e: &Energy) -> f64 {
    let h = e.hessian(&Vector::zeros(e.dim())).expect("quadratic energy");
    h.symmetric_eigen().eigenvalues.min()
}

/// Largest element stress `C |eps_e(y) - z_e|` (per unit length) of a
/// visco-plasticity state, to compare with the yield threshold.
pub fn element_stress(preset: &ModelPreset, u: &Vector) -> Result<f64> {
    let ModelParams::ViscoPlasticity1d(p) = &preset.params else {
        return Err(Error::input("element stress is defined for the visco-plasticity model only"));
    };
    let (ny, nz) = (p.m, p.m + 1);
    let h = mesh(p.m);
    let y = |i: isize| if i < 0 || i >= ny as isize { 0.0 } else { u[i as usize] };
    Ok((0..nz)
        .map(|e| {
            let eps = (y(e as isize) - y(e as isize - 1)) / h;
            (p.elastic * (eps - u[ny + e]) - p.hardening * u[ny + e]).abs()
        })
        .fold(0.0, f64::max))
}

/// Exact trajectories of the counterexample: the effective solution and the
/// limit of the split scheme, which moves with the mean of both mechanisms'
/// velocities.
#[derive(Clone, Debug)]
pub struct CounterexampleReference {
    pub effective: Vec<PathSegment>,
    pub split_limit: Vec<PathSegment>,
}

pub fn reference_paths(preset: &ModelPreset, horizon: f64) -> Result<CounterexampleReference> {
    let ModelParams::Counterexample(p) = &preset.params else {
        return Err(Error::input(format!(
            "no closed-form reference for model '{}'",
            preset.name.name()
        )));
    };
    let alpha1 = Vector::from_vec(vec![p.a1, p.b1]);
    let alpha2 = Vector::from_vec(vec![p.a2, p.b2]);
    let eff = &alpha1 + &alpha2;
    let u0 = Vector::from_vec(p.u0.to_vec());
    let fail = || Error::input("reference path needs a positive horizon");
    Ok(CounterexampleReference {
        effective: regime_path_mean(&[eff], &u0, 0.0, horizon, None).ok_or_else(fail)?,
        split_limit: regime_path_mean(&[alpha1 * 2.0, alpha2 * 2.0], &u0, 0.0, horizon, None).ok_or_else(fail)?,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceState {
    pub effective: Vector,
    pub split_limit: Vector,
}

/// States of both closed-form trajectories at time `t >= 0`.
pub fn reference_trajectory(preset: &ModelPreset, t: f64) -> Result<ReferenceState> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::input(format!("reference time must be finite and nonnegative, got {t}")));
    }
    let paths = reference_paths(preset, preset.horizon.max(t) + 1.0)?;
    Ok(ReferenceState {
        effective: crate::solvers::path_state(&paths.effective, t).expect("nonempty path"),
        split_limit: crate::solvers::path_state(&paths.split_limit, t).expect("nonempty path"),
    })
}

/// The window `(t1, t2)`: end of the first regime and the time the
/// effective solution reaches the origin.
pub fn dissipation_window(preset: &ModelPreset) -> Result<(f64, f64)> {
    let paths = reference_paths(preset, preset.horizon.max(1.0) * 10.0)?;
    let t1 = paths.effective[0].t1;
    let t2 = paths
        .effective
        .iter()
        .find(|s| s.velocity.amax() == 0.0)
        .map(|s| s.t0)
        .ok_or_else(|| Error::input("effective reference does not reach the origin"))?;
    Ok((t1, t2))
}

/// `1/(t - s) int_s^t R_eff(u')` along one of the closed-form paths.
pub fn path_rate_average(preset: &ModelPreset, path: &[PathSegment], (s, t): (f64, f64)) -> Result<f64> {
    if !(t > s) {
        return Err(Error::input("averaging window must have positive length"));
    }
    let r = preset.system.effective()?;
    let mut total = 0.0;
    for seg in path {
        let len = seg.t1.min(t) - seg.t0.max(s);
        if len > 0.0 {
            total += len * r.eval(&seg.velocity)?.value();
        }
    }
    Ok(total / (t - s))
}

/// Random rate/force pairs with log-uniform magnitudes in `[1e-2, 1e2]`.
pub fn qye_samples(dim: usize, count: usize, seed: u64) -> Vec<(Vector, Vector)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| {
        let d = Vector::from_iterator(dim, (0..dim).map(|_| rng.random_range(-1.0..1.0)));
        let scale = 10f64.powf(rng.random_range(-2.0..2.0));
        let n = d.norm().max(1e-12);
        d * (scale / n)
    };
    (0..count)
        .map(|_| {
            let v = draw(&mut rng);
            let xi = draw(&mut rng);
            (v, xi)
        })
        .collect()
}

/// The `L^2`-type norm `(h sum v_i^2)^(1/2)` of the Allen-Cahn grid.
pub fn grid_norm(m: usize) -> WeightedNorm {
    WeightedNorm::new(Vector::from_element(m, mesh(m))).expect("positive weights")
}

/// Young ratio `(R_eff(l_n v) + R_eff*(xi_n)) / (|l_n v|_p |xi_n|_p*)` along
/// the oscillating forces `xi_n(x) = n sin(n^(1 - p*/2) x)` on the
/// Allen-Cahn grid with `m` nodes, with `l_n = |xi_n|_p*^(p*/2)` and
/// `v = amplitude sin(pi x)`.
pub fn witness_ratio(p: f64, m: usize, n: usize, amplitude: f64) -> Result<f64> {
    if !(p > 1.0) || m == 0 || n == 0 || !(amplitude > 0.0) {
        return Err(Error::input("witness needs p > 1, m >= 1, n >= 1 and a positive amplitude"));
    }
    let h = mesh(m);
    let q = p / (p - 1.0);
    let r_eff = Potential::inf_convolution(
        Potential::power_norm(p, Vector::from_element(m, h))?,
        Potential::quadratic(stiffness(m, h))?,
    )?;
    let nf = n as f64;
    let freq = nf.powf(1.0 - q / 2.0);
    let xs = (1..=m).map(|i| i as f64 * h);
    let xi_f: Vec<f64> = xs.clone().map(|x| nf * (freq * x).sin()).collect();
    let xi = Vector::from_iterator(m, xi_f.iter().map(|f| h * f));
    let xi_norm = (h * xi_f.iter().map(|f| f.abs().powf(q)).sum::<f64>()).powf(1.0 / q);
    let lambda = xi_norm.powf(q / 2.0);
    let v = Vector::from_iterator(m, xs.map(|x| lambda * amplitude * (std::f64::consts::PI * x).sin()));
    let v_norm = (h * v.iter().map(|x| x.abs().powf(p)).sum::<f64>()).powf(1.0 / p);
    let young = r_eff.eval(&v)?.value() + r_eff.conjugate(&xi)?;
    Ok(young / (v_norm * xi_norm))
}
