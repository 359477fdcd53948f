//! Time integration of the truncated damped quintic wave equation.
//!
//! The semidiscrete system for coefficients `(u_k, v_k)` is
//!
//! `u_k' = v_k`,
//! `v_k' = -lambda_k^2 u_k - [Pi(u^5)]_k - E(t) v_k`,
//!
//! where `Pi` is the configured spectral projector (sharp truncation gives
//! the classical Galerkin system, smooth truncation the regularized one)
//! and `E(t)` is the configured energy functional of the solution itself.
//!
//! Stepping uses the symmetric Strang composition
//! `D(dt/2) K(dt/2) L(dt) K(dt/2) D(dt/2)` in which every substep is an
//! exact flow:
//!
//! - `L`: per-mode rotation, the exact flow of `u_tt = Delta u`;
//! - `K`: impulse `v -= dt * Pi(u^5)`, the exact flow of the frozen-u
//!   potential system;
//! - `D`: `v <- sigma v` with `sigma` from the closed-form solution of
//!   the scalar kinetic-energy flow `K' = -2K(P + K)` (potential `P`
//!   frozen), so the damping substep removes exactly `int E ||u_t||^2`.
//!
//! The only discretization error is operator noncommutativity, which is
//! second order and leaves the dissipation structure intact: sampled
//! energy is nonincreasing for damped runs, and the pointwise lower bound
//! `E(t) >= (1/E(0) + 2t)^{-1}` survives discretization exactly because
//! `K (P + K) <= E^2` holds along every damping substep.

use crate::diagnostics::EnergyTrace;
use crate::domain::{BoxDomain, ModeIndex, SpectralField};
use crate::error::{Error, Result};
use crate::multiplier::{apply_multiplier, MultiplierSpec};
use std::f64::consts::PI;
use std::sync::Arc;

/// Dynamical variable: displacement and velocity coefficients plus time.
#[derive(Debug, Clone)]
pub struct State {
    pub u: SpectralField,
    pub v: SpectralField,
    pub t: f64,
}

impl State {
    pub fn new(u: SpectralField, v: SpectralField, t: f64) -> Self {
        assert!(u.same_domain(&v), "state fields on different domains");
        State { u, v, t }
    }

    pub fn zero(domain: &Arc<BoxDomain>) -> Self {
        State {
            u: SpectralField::zeros(domain),
            v: SpectralField::zeros(domain),
            t: 0.0,
        }
    }

    pub fn domain(&self) -> &Arc<BoxDomain> {
        self.u.domain()
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Damping {
    /// Coefficient equal to the solution's own energy functional.
    EnergyCoefficient,
    /// No dissipation.
    None,
    /// Fixed scalar coefficient `c >= 0`.
    Constant(f64),
}

/// Model selection: nonlinearity, damping, projector, which energy enters
/// the damping coefficient, and the dealiasing padding.
#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub quintic: bool,
    pub damping: Damping,
    /// Projector applied to the quintic term (sharp = Galerkin system,
    /// smooth = regularized system).
    pub projector: MultiplierSpec,
    /// Whether the `(1/6)||u||_6^6` term enters the energy functional.
    /// Irrelevant (forced off) when the quintic is off. The default
    /// follows the regime: on with the quintic, off without it.
    pub potential_in_energy: bool,
    /// Oversampling factor for nonlinear evaluations; 3 makes the quintic
    /// projection and the L^6 quadrature exact.
    pub padding: usize,
}

impl ModelConfig {
    pub fn new(quintic: bool, damping: Damping, projector: MultiplierSpec) -> Self {
        ModelConfig {
            quintic,
            damping,
            projector,
            potential_in_energy: quintic,
            padding: 3,
        }
    }

    fn include_l6(&self) -> bool {
        self.quintic && self.potential_in_energy
    }
}

/// Fixed-step symmetric Strang scheme.
#[derive(Debug, Clone, Copy)]
pub struct StepScheme {
    pub dt: f64,
}

impl StepScheme {
    pub fn new(dt: f64) -> Self {
        assert!(dt > 0.0, "time step must be positive");
        StepScheme { dt }
    }

    /// Advisory resolution guard: substeps are exact rotations, so this is
    /// not a CFL limit, but splitting accuracy degrades past it.
    pub fn resolves(&self, domain: &BoxDomain) -> bool {
        self.dt * domain.lambda_max() < PI
    }
}

/// Total energy `E = (1/2)(||grad u||^2 + ||u_t||^2) + (1/6)||u||_6^6`,
/// the last term only when the quintic is on and configured to count.
pub fn total_energy(state: &State, config: &ModelConfig) -> f64 {
    potential_energy(&state.u, config) + kinetic_energy(&state.v)
}

pub fn kinetic_energy(v: &SpectralField) -> f64 {
    0.5 * v.l2_norm_sq()
}

/// Potential part of the configured energy functional.
pub fn potential_energy(u: &SpectralField, config: &ModelConfig) -> f64 {
    let mut p = 0.5 * u.h1_seminorm_sq();
    if config.include_l6() {
        let l6 = u
            .lp_norm(6.0, config.padding)
            .expect("padding validated at config construction");
        p += l6.powi(6) / 6.0;
    }
    p
}

/// Higher-order energy `E_1 = (1/2)(||grad u_t||^2 + ||Delta u||^2)`,
/// spectrally `(1/2)(sum lambda^2 v^2 + sum lambda^4 u^2)`.
pub fn higher_energy(state: &State) -> f64 {
    let lambda_sq = state.domain().lambda_sq();
    let grad_v: f64 = state
        .v
        .coeffs()
        .iter()
        .zip(lambda_sq)
        .map(|(c, l2)| l2 * c * c)
        .sum();
    let lap_u: f64 = state
        .u
        .coeffs()
        .iter()
        .zip(lambda_sq)
        .map(|(c, l2)| l2 * l2 * c * c)
        .sum();
    0.5 * (grad_v + lap_u)
}

/// Projected quintic term `Pi(u^5)`: padded pointwise fifth power,
/// projected back to the retained modes, then the spectral projector.
/// Alias-free for padding >= 3.
pub fn quintic_term(
    u: &SpectralField,
    projector: &MultiplierSpec,
    padding: usize,
) -> Result<SpectralField> {
    let phys = u.to_physical(padding)?;
    let fifth = phys.map(|x| x * x * x * x * x);
    Ok(apply_multiplier(projector, &fifth.to_spectral()?))
}

/// Exact flow of `u_tt = Delta u` over `dt`: per-mode rotation
/// `(u_k, v_k) -> (u_k cos + v_k sin/lambda, -lambda u_k sin + v_k cos)`.
/// Conserves `(1/2)(||grad u||^2 + ||v||^2)` exactly.
pub fn linear_substep(state: &State, dt: f64) -> State {
    let mut out = state.clone();
    rotate_in_place(&mut out, dt);
    out
}

fn rotate_in_place(state: &mut State, dt: f64) {
    let lambda_sq = state.u.domain().lambda_sq().to_vec();
    let u = state.u.coeffs_mut();
    // Split borrows: v belongs to another field.
    let v = state.v.coeffs_mut();
    for (i, &l2) in lambda_sq.iter().enumerate() {
        let lambda = l2.sqrt();
        let (s, c) = (lambda * dt).sin_cos();
        let (uk, vk) = (u[i], v[i]);
        u[i] = uk * c + vk * s / lambda;
        v[i] = -lambda * uk * s + vk * c;
    }
}

/// Quintic impulse `v <- v - dt Pi(u^5)`; `u` and `t` unchanged. Exact
/// flow of the frozen-u subsystem, which is linear in `v`.
pub fn kick_substep(state: &State, dt: f64, config: &ModelConfig) -> Result<State> {
    let mut out = state.clone();
    if config.quintic {
        let q = quintic_term(&state.u, &config.projector, config.padding)?;
        kick_in_place(&mut out, dt, &q);
    }
    Ok(out)
}

fn kick_in_place(state: &mut State, dt: f64, q: &SpectralField) {
    for (vk, qk) in state.v.coeffs_mut().iter_mut().zip(q.coeffs()) {
        *vk -= dt * qk;
    }
}

/// Closed-form solution at time `tau` of the scalar kinetic-energy flow
/// `k' = -2 k (p + k)`, `k(0) = k0`, for frozen potential `p >= 0`.
/// The `p = 0` case is the hyperbolic floor `k0 / (1 + 2 k0 tau)`.
pub fn damped_kinetic(p: f64, k0: f64, tau: f64) -> f64 {
    if k0 == 0.0 {
        return 0.0;
    }
    if p == 0.0 {
        return k0 / (1.0 + 2.0 * k0 * tau);
    }
    let decay = (-2.0 * p * tau).exp();
    p * k0 * decay / (p - k0 * (-2.0 * p * tau).exp_m1())
}

/// Damping substep: scales every mode of `v` by one scalar `sigma` chosen
/// so the kinetic energy follows its exact scalar flow over `dt` with `u`
/// frozen. Returns the new state; `sigma = 1` when `v = 0`.
pub fn damping_substep(state: &State, dt: f64, config: &ModelConfig) -> State {
    let p = potential_energy(&state.u, config);
    let mut out = state.clone();
    damp_in_place(&mut out, dt, p, &config.damping);
    out
}

/// Returns the energy removed by the substep.
fn damp_in_place(state: &mut State, dt: f64, potential: f64, damping: &Damping) -> f64 {
    let k0 = kinetic_energy(&state.v);
    if k0 == 0.0 {
        return 0.0;
    }
    let k1 = match damping {
        Damping::None => return 0.0,
        Damping::Constant(c) => {
            let sigma = (-c * dt).exp();
            k0 * sigma * sigma
        }
        Damping::EnergyCoefficient => damped_kinetic(potential, k0, dt),
    };
    let sigma = (k1 / k0).sqrt();
    for vk in state.v.coeffs_mut().iter_mut() {
        *vk *= sigma;
    }
    k0 - k1
}

/// Everything about the current `u` that the half-step substeps reuse:
/// the frozen potential and the projected quintic term.
struct Prepared {
    potential: f64,
    quintic: Option<SpectralField>,
}

fn prepare(u: &SpectralField, config: &ModelConfig) -> Result<Prepared> {
    let mut potential = 0.5 * u.h1_seminorm_sq();
    let quintic = if config.quintic {
        let phys = u.to_physical(config.padding)?;
        if config.potential_in_energy {
            let w = u.domain().quadrature_weight(config.padding);
            potential += w * phys.values().iter().map(|x| x.powi(6)).sum::<f64>() / 6.0;
        }
        let fifth = phys.map(|x| x * x * x * x * x);
        Some(apply_multiplier(&config.projector, &fifth.to_spectral()?))
    } else {
        None
    };
    Ok(Prepared { potential, quintic })
}

/// One Strang step `D(dt/2) K(dt/2) L(dt) K(dt/2) D(dt/2)`. Second order;
/// aborts on non-finite values.
pub fn step(state: &State, scheme: &StepScheme, config: &ModelConfig) -> Result<State> {
    let prep = prepare(&state.u, config)?;
    let mut out = state.clone();
    let mut diss = 0.0;
    step_in_place(&mut out, scheme, config, &prep, &mut diss)?;
    Ok(out)
}

fn step_in_place(
    state: &mut State,
    scheme: &StepScheme,
    config: &ModelConfig,
    prep_start: &Prepared,
    dissipated: &mut f64,
) -> Result<Prepared> {
    let half = 0.5 * scheme.dt;

    *dissipated += damp_in_place(state, half, prep_start.potential, &config.damping);
    if let Some(q) = &prep_start.quintic {
        kick_in_place(state, half, q);
    }
    rotate_in_place(state, scheme.dt);
    let prep_end = prepare(&state.u, config)?;
    if let Some(q) = &prep_end.quintic {
        kick_in_place(state, half, q);
    }
    *dissipated += damp_in_place(state, half, prep_end.potential, &config.damping);

    state.t += scheme.dt;
    if !state.is_finite() {
        return Err(Error::NonFinite {
            step: 0,
            t: state.t,
        });
    }
    Ok(prep_end)
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    pub t_final: f64,
    /// Diagnostics are recorded every this many steps (plus the endpoints).
    pub sample_stride: usize,
    /// Full state snapshots every this many steps, if requested.
    pub snapshot_stride: Option<usize>,
}

impl SimOptions {
    pub fn new(t_final: f64, sample_stride: usize) -> Self {
        assert!(t_final > 0.0, "final time must be positive");
        assert!(sample_stride > 0, "sample stride must be positive");
        SimOptions {
            t_final,
            sample_stride,
            snapshot_stride: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub trace: EnergyTrace,
    pub final_state: State,
    pub snapshots: Vec<State>,
    /// Relative change of the L^10 / L^12 quadratures when the padding is
    /// raised by one, measured once at the first nonzero sample.
    pub l10_pad_residual: Option<f64>,
    pub l12_pad_residual: Option<f64>,
    /// Set when `dt * lambda_max >= pi` (advisory, see `StepScheme`).
    pub stability_warning: bool,
}

/// Advances the state to `t_final`, recording diagnostics every
/// `sample_stride` steps. Deterministic: reductions are sequential and
/// the step count is `round(t_final / dt)`.
pub fn simulate(
    initial: &State,
    config: &ModelConfig,
    scheme: &StepScheme,
    opts: &SimOptions,
) -> Result<SimOutput> {
    let n_steps = (opts.t_final / scheme.dt).round().max(1.0) as usize;
    let stability_warning = !scheme.resolves(initial.domain());
    if stability_warning {
        log::warn!(
            "dt * lambda_max = {:.3} >= pi: splitting accuracy degrades",
            scheme.dt * initial.domain().lambda_max()
        );
    }

    let mut state = initial.clone();
    let mut trace = EnergyTrace::new();
    let mut snapshots = Vec::new();
    let mut diss_accum = 0.0;
    let mut pad_check: Option<(f64, f64)> = None;

    let e0 = total_energy(&state, config);
    let mut prep = prepare(&state.u, config)?;
    record_sample(
        &mut trace,
        &state,
        config,
        &prep,
        diss_accum,
        &mut pad_check,
    )?;
    if opts.snapshot_stride.is_some() {
        snapshots.push(state.clone());
    }

    for i in 1..=n_steps {
        prep = step_in_place(&mut state, scheme, config, &prep, &mut diss_accum).map_err(
            |e| match e {
                Error::NonFinite { t, .. } => Error::NonFinite { step: i, t },
                other => other,
            },
        )?;
        state.t = i as f64 * scheme.dt;

        let sample_due = i % opts.sample_stride == 0 || i == n_steps;
        if sample_due {
            record_sample(
                &mut trace,
                &state,
                config,
                &prep,
                diss_accum,
                &mut pad_check,
            )?;
            let e = *trace.energy().last().expect("just pushed");
            if !e.is_finite() {
                return Err(Error::NonFinite { step: i, t: state.t });
            }
            if e > 1.5 * e0 + 1e-9 {
                return Err(Error::Instability {
                    step: i,
                    t: state.t,
                    initial: e0,
                    energy: e,
                });
            }
        }
        if let Some(stride) = opts.snapshot_stride {
            if i % stride == 0 || i == n_steps {
                snapshots.push(state.clone());
            }
        }
    }

    Ok(SimOutput {
        trace,
        final_state: state,
        snapshots,
        l10_pad_residual: pad_check.map(|(a, _)| a),
        l12_pad_residual: pad_check.map(|(_, b)| b),
        stability_warning,
    })
}

fn record_sample(
    trace: &mut EnergyTrace,
    state: &State,
    config: &ModelConfig,
    prep: &Prepared,
    diss_accum: f64,
    pad_check: &mut Option<(f64, f64)>,
) -> Result<()> {
    let kinetic = kinetic_energy(&state.v);
    let e = prep.potential + kinetic;
    let e1 = higher_energy(state);
    let phys = state.u.to_physical(config.padding)?;
    let l10 = phys.lp_norm(10.0);
    let l12 = phys.lp_norm(12.0);

    if pad_check.is_none() && l10 > 0.0 {
        let finer = state.u.to_physical(config.padding + 1)?;
        let l10f = finer.lp_norm(10.0);
        let l12f = finer.lp_norm(12.0);
        *pad_check = Some((
            (l10 - l10f).abs() / l10f.max(f64::MIN_POSITIVE),
            (l12 - l12f).abs() / l12f.max(f64::MIN_POSITIVE),
        ));
    }

    let sm_defect = match &prep.quintic {
        Some(_) if config.quintic => {
            // <(Pi - I) u^5, u_t> within the retained modes: zero for a
            // sharp projector on band-limited runs, the energy-identity
            // defect of the smooth scheme otherwise.
            let fifth = phys.map(|x| x * x * x * x * x).to_spectral()?;
            let projected = apply_multiplier(&config.projector, &fifth);
            projected.sub(&fifth).inner(&state.v)
        }
        _ => 0.0,
    };

    trace.push(state.t, e, e1, 2.0 * kinetic, diss_accum, l10, l12, sm_defect);
    Ok(())
}

// ---------------------------------------------------------------------
// Single-mode oscillator with the same damping mechanism.
// ---------------------------------------------------------------------

/// Coefficients of the single-mode model `x'' + lambda x + d E(t) x' = 0`
/// with `E = (x'^2 + lambda x^2)/2`.
#[derive(Debug, Clone, Copy)]
pub struct BTParams {
    pub lambda: f64,
    pub d: f64,
}

impl BTParams {
    pub fn new(lambda: f64, d: f64) -> Self {
        assert!(lambda > 0.0, "lambda must be positive");
        assert!(d >= 0.0, "damping coefficient must be nonnegative");
        BTParams { lambda, d }
    }

    pub fn energy(&self, x: f64, xdot: f64) -> f64 {
        0.5 * (xdot * xdot + self.lambda * x * x)
    }
}

/// Sampled scalar trajectory of the single-mode model.
#[derive(Debug, Clone)]
pub struct ScalarTrajectory {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub xdot: Vec<f64>,
    pub energy: Vec<f64>,
}

/// Integrates the single-mode model with the same splitting
/// (`D(dt/2) L(dt) D(dt/2)`; both substeps exact). Energy nonincreasing.
pub fn single_mode_bt(
    params: &BTParams,
    x0: f64,
    xdot0: f64,
    dt: f64,
    t_final: f64,
    sample_stride: usize,
) -> ScalarTrajectory {
    assert!(dt > 0.0 && t_final > 0.0 && sample_stride > 0);
    let omega = params.lambda.sqrt();
    let n_steps = (t_final / dt).round().max(1.0) as usize;

    let mut x = x0;
    let mut v = xdot0;
    let mut out = ScalarTrajectory {
        times: vec![0.0],
        x: vec![x0],
        xdot: vec![xdot0],
        energy: vec![params.energy(x0, xdot0)],
    };

    let half = 0.5 * dt;
    let (s, c) = (omega * dt).sin_cos();
    let damp = |x: f64, v: &mut f64| {
        let k0 = 0.5 * *v * *v;
        if k0 == 0.0 || params.d == 0.0 {
            return;
        }
        let p = 0.5 * params.lambda * x * x;
        let k1 = damped_kinetic(p, k0, params.d * half);
        *v *= (k1 / k0).sqrt();
    };

    for i in 1..=n_steps {
        damp(x, &mut v);
        let (xi, vi) = (x, v);
        x = xi * c + vi * s / omega;
        v = -omega * xi * s + vi * c;
        damp(x, &mut v);

        if i % sample_stride == 0 || i == n_steps {
            let t = i as f64 * dt;
            out.times.push(t);
            out.x.push(x);
            out.xdot.push(v);
            out.energy.push(params.energy(x, v));
        }
    }
    out
}

/// Decay floor `(1/E0 + 2t)^{-1}` for the energy-coefficient prototype:
/// the energy can never fall below it.
pub fn linear_lower_bound(e0: f64, t: f64) -> Result<f64> {
    if !(e0 > 0.0) {
        return Err(Error::Degenerate(format!(
            "lower bound needs positive initial energy, got {e0}"
        )));
    }
    Ok(1.0 / (1.0 / e0 + 2.0 * t))
}

/// Two-sided envelope for the linear prototype:
/// `(4t + 1/E0)^{-1} <= E(t) <= ((t-1)^+ / mu + 1/E0)^{-1}`.
/// `mu` is a fitted constant, not a universal one.
pub fn linear_sandwich_bounds(e0: f64, mu: f64, t: f64) -> (f64, f64) {
    assert!(mu > 0.0, "mu must be positive");
    let lower = 1.0 / (4.0 * t + 1.0 / e0);
    let upper = 1.0 / ((t - 1.0).max(0.0) / mu + 1.0 / e0);
    (lower, upper)
}

// ---------------------------------------------------------------------
// Initial data constructors.
// ---------------------------------------------------------------------

/// Explicit mode list: `(index, u coefficient, v coefficient)` triples.
pub fn state_from_modes(
    domain: &Arc<BoxDomain>,
    modes: &[(ModeIndex, f64, f64)],
) -> Result<State> {
    let mut u = SpectralField::zeros(domain);
    let mut v = SpectralField::zeros(domain);
    for &(idx, cu, cv) in modes {
        let flat = domain.flat_index(idx)?;
        u.coeffs_mut()[flat] += cu;
        v.coeffs_mut()[flat] += cv;
    }
    Ok(State::new(u, v, 0.0))
}

/// Smooth compactly supported bump
/// `amplitude * prod_i psi((x_i - center_i)/width_i)`, `psi(t) =
/// exp(-1/(1-t^2))` inside `|t| < 1`, projected onto the basis. `v = 0`.
pub fn state_from_bump(
    domain: &Arc<BoxDomain>,
    center: &[f64],
    width: &[f64],
    amplitude: f64,
    padding: usize,
) -> Result<State> {
    assert_eq!(center.len(), domain.dim());
    assert_eq!(width.len(), domain.dim());
    let mut phys = SpectralField::zeros(domain).to_physical(padding)?;
    let d = domain.dim();
    let len = phys.values().len();
    for flat in 0..len {
        let mut val = amplitude;
        for axis in 0..d {
            let t = (phys.grid_coord(flat, axis) - center[axis]) / width[axis];
            val *= if t.abs() < 1.0 {
                (-1.0 / (1.0 - t * t)).exp()
            } else {
                0.0
            };
        }
        phys.values_mut()[flat] = val;
    }
    let u = phys.to_spectral()?;
    let v = SpectralField::zeros(domain);
    Ok(State::new(u, v, 0.0))
}

/// Seeded random band-limited data (modes with `lambda <= band`),
/// rescaled so the configured energy equals `target_e0` exactly. The
/// energy is strictly increasing in the amplitude, so a bisection on the
/// scale factor converges unconditionally.
pub fn state_from_random(
    domain: &Arc<BoxDomain>,
    band: f64,
    seed: u64,
    target_e0: f64,
    config: &ModelConfig,
) -> Result<State> {
    use crate::multiplier::random_field;
    let u = random_field(domain, seed, Some(band));
    let v = random_field(domain, seed.wrapping_add(0x9e37_79b9_7f4a_7c15), Some(band));
    let state = State::new(u, v, 0.0);
    rescale_to_energy(&state, target_e0, config)
}

/// Rescales `(u, v) -> (s u, s v)` so the configured energy hits
/// `target_e0`. Errors if the state is identically zero.
pub fn rescale_to_energy(state: &State, target_e0: f64, config: &ModelConfig) -> Result<State> {
    assert!(target_e0 >= 0.0);
    if target_e0 == 0.0 {
        return Ok(State::new(
            state.u.scaled(0.0),
            state.v.scaled(0.0),
            state.t,
        ));
    }
    let energy_at = |s: f64| -> f64 {
        let scaled = State::new(state.u.scaled(s), state.v.scaled(s), state.t);
        total_energy(&scaled, config)
    };
    let base = energy_at(1.0);
    if base == 0.0 {
        return Err(Error::Degenerate(
            "cannot rescale zero data to positive energy".into(),
        ));
    }
    // E(s) = s^2 Q + s^6 S: bracket then bisect.
    let mut hi = (target_e0 / base).sqrt().max(1e-8);
    while energy_at(hi) < target_e0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if energy_at(mid) < target_e0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    Ok(State::new(
        state.u.scaled(s),
        state.v.scaled(s),
        state.t,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::apply_laplacian;
    use approx::assert_relative_eq;

    fn domain_1d(n: usize) -> Arc<BoxDomain> {
        BoxDomain::unit_pi(1, n).unwrap()
    }

    fn keep_all(domain: &BoxDomain) -> MultiplierSpec {
        MultiplierSpec::sharp(domain.lambda_max() + 0.5).unwrap()
    }

    fn linear_damped(domain: &BoxDomain) -> ModelConfig {
        ModelConfig::new(false, Damping::EnergyCoefficient, keep_all(domain))
    }

    fn quintic_damped(domain: &BoxDomain) -> ModelConfig {
        ModelConfig::new(true, Damping::EnergyCoefficient, keep_all(domain))
    }

    #[test]
    fn total_energy_zero_state() {
        let d = domain_1d(8);
        let cfg = quintic_damped(&d);
        assert_eq!(total_energy(&State::zero(&d), &cfg), 0.0);
    }

    #[test]
    fn total_energy_closed_form_for_plain_sine() {
        // u = a sin x: E = a^2 pi/4 + a^6 (5 pi/16)/6.
        let d = domain_1d(8);
        let cfg = quintic_damped(&d);
        let a = 1.3;
        let c1 = a * (PI / 2.0).sqrt();
        let u = SpectralField::delta(&d, ModeIndex::one_d(1), c1).unwrap();
        let state = State::new(u, SpectralField::zeros(&d), 0.0);
        let expect = a * a * PI / 4.0 + a.powi(6) * (5.0 * PI / 16.0) / 6.0;
        assert_relative_eq!(total_energy(&state, &cfg), expect, max_relative = 1e-12);
        // Kinetic-only state: E = b^2/2 by Parseval.
        let b = 0.7;
        let v = SpectralField::delta(&d, ModeIndex::one_d(1), b).unwrap();
        let state = State::new(SpectralField::zeros(&d), v, 0.0);
        assert_relative_eq!(total_energy(&state, &cfg), b * b / 2.0);
    }

    #[test]
    fn quintic_off_never_counts_l6() {
        let d = domain_1d(8);
        let mut cfg = linear_damped(&d);
        cfg.potential_in_energy = true; // must be ignored
        let u = SpectralField::delta(&d, ModeIndex::one_d(1), 2.0).unwrap();
        let state = State::new(u.clone(), SpectralField::zeros(&d), 0.0);
        assert_relative_eq!(total_energy(&state, &cfg), 0.5 * u.h1_seminorm_sq());
    }

    #[test]
    fn higher_energy_single_mode_and_quadrature_oracle() {
        let d = domain_1d(16);
        let c = 0.9;
        let u = SpectralField::delta(&d, ModeIndex::one_d(3), c).unwrap();
        let state = State::new(u, SpectralField::zeros(&d), 0.0);
        // E1 = lambda^4 c^2 / 2 with lambda^2 = 9.
        assert_relative_eq!(higher_energy(&state), 81.0 * c * c / 2.0);
        assert_eq!(higher_energy(&State::zero(&d)), 0.0);

        // Random state against quadrature: ||Delta u||^2 via the grid,
        // ||grad v||^2 via <-Delta v, v> on the grid.
        let u = crate::multiplier::random_field(&d, 21, None);
        let v = crate::multiplier::random_field(&d, 22, None);
        let state = State::new(u.clone(), v.clone(), 0.0);
        let lap_u = apply_laplacian(&u).to_physical(2).unwrap();
        let lap_v_phys = apply_laplacian(&v).to_physical(2).unwrap();
        let v_phys = v.to_physical(2).unwrap();
        let quad = 0.5 * (lap_u.lp_norm(2.0).powi(2) + lap_v_phys.inner(&v_phys));
        assert_relative_eq!(higher_energy(&state), quad, max_relative = 1e-10);
    }

    #[test]
    fn quintic_term_of_plain_sine_matches_identity() {
        // sin^5 x = (10 sin x - 5 sin 3x + sin 5x)/16.
        let d = domain_1d(8);
        let u = SpectralField::delta(&d, ModeIndex::one_d(1), (PI / 2.0).sqrt()).unwrap();
        let q = quintic_term(&u, &keep_all(&d), 3).unwrap();
        let norm = (PI / 2.0).sqrt(); // basis-to-plain-sine factor
        let expect = [10.0 / 16.0, 0.0, -5.0 / 16.0, 0.0, 1.0 / 16.0];
        for (k, &e) in expect.iter().enumerate() {
            assert_relative_eq!(q.coeffs()[k], e * norm, epsilon = 1e-12);
        }
        for &c in &q.coeffs()[5..] {
            assert!(c.abs() < 1e-12);
        }
        // Padding above 3 agrees (already alias-free).
        let q4 = quintic_term(&u, &keep_all(&d), 4).unwrap();
        for (a, b) in q.coeffs().iter().zip(q4.coeffs()) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
        // Zero input and annihilating projector both give zero.
        let z = quintic_term(&SpectralField::zeros(&d), &keep_all(&d), 3).unwrap();
        assert!(z.coeffs().iter().all(|&c| c == 0.0));
        let killed = quintic_term(&u, &MultiplierSpec::sharp(0.5).unwrap(), 3).unwrap();
        assert!(killed.coeffs().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn rotation_trivia() {
        let d = domain_1d(8);
        let u = SpectralField::delta(&d, ModeIndex::one_d(2), 1.0).unwrap();
        let state = State::new(u, SpectralField::zeros(&d), 0.0);
        // dt = 0 is the identity.
        let same = linear_substep(&state, 0.0);
        assert_eq!(same.u.coeffs(), state.u.coeffs());
        // Full period of mode 2 (lambda = 2): back to start.
        let back = linear_substep(&state, PI);
        assert_relative_eq!(back.u.coeffs()[1], 1.0, epsilon = 1e-12);
        assert!(back.v.coeffs()[1].abs() < 1e-12);
        // Quarter period of mode 2: (1, 0) -> (0, -lambda).
        let quarter = linear_substep(&state, PI / 4.0);
        assert!(quarter.u.coeffs()[1].abs() < 1e-12);
        assert_relative_eq!(quarter.v.coeffs()[1], -2.0, epsilon = 1e-12);
    }

    #[test]
    fn rotation_conserves_wave_energy() {
        let d = domain_1d(16);
        let u = crate::multiplier::random_field(&d, 31, None);
        let v = crate::multiplier::random_field(&d, 32, None);
        let state = State::new(u, v, 0.0);
        let e_before = 0.5 * (state.u.h1_seminorm_sq() + state.v.l2_norm_sq());
        let after = linear_substep(&state, 0.37);
        let e_after = 0.5 * (after.u.h1_seminorm_sq() + after.v.l2_norm_sq());
        assert_relative_eq!(e_before, e_after, max_relative = 1e-13);
    }

    #[test]
    fn kick_matches_frozen_u_oracle() {
        let d = domain_1d(8);
        let cfg = quintic_damped(&d);
        let u = SpectralField::delta(&d, ModeIndex::one_d(1), 1.1).unwrap();
        let v = SpectralField::delta(&d, ModeIndex::one_d(2), -0.4).unwrap();
        let state = State::new(u.clone(), v.clone(), 0.0);
        let dt = 0.05;
        let kicked = kick_substep(&state, dt, &cfg).unwrap();
        // Frozen-u subsystem v' = -q is constant-slope: RK of any order
        // lands exactly on v - dt q.
        let q = quintic_term(&u, &cfg.projector, cfg.padding).unwrap();
        for i in 0..d.mode_count() {
            let k1 = -q.coeffs()[i];
            let rk4 = v.coeffs()[i] + dt / 6.0 * (k1 + 2.0 * k1 + 2.0 * k1 + k1);
            assert_relative_eq!(kicked.v.coeffs()[i], rk4, epsilon = 1e-15);
        }
        assert_eq!(kicked.u.coeffs(), state.u.coeffs());
        // dt = 0 and u = 0 are identities.
        let id = kick_substep(&state, 0.0, &cfg).unwrap();
        assert_eq!(id.v.coeffs(), state.v.coeffs());
        let rest = State::new(SpectralField::zeros(&d), v.clone(), 0.0);
        let id = kick_substep(&rest, dt, &cfg).unwrap();
        assert_eq!(id.v.coeffs(), rest.v.coeffs());
    }

    /// RK4 on the scalar flow k' = -2k(p+k), used as an independent check
    /// of the closed form.
    fn rk4_damped_kinetic(p: f64, k0: f64, tau: f64, steps: usize) -> f64 {
        let h = tau / steps as f64;
        let f = |k: f64| -2.0 * k * (p + k);
        let mut k = k0;
        for _ in 0..steps {
            let k1 = f(k);
            let k2 = f(k + 0.5 * h * k1);
            let k3 = f(k + 0.5 * h * k2);
            let k4 = f(k + h * k3);
            k += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        k
    }

    #[test]
    fn damping_scalar_flow_closed_form() {
        // p = 0 saturates the hyperbolic floor k0/(1 + 2 k0 t).
        assert_relative_eq!(damped_kinetic(0.0, 1.0, 0.3), 1.0 / 1.6, epsilon = 1e-15);
        // p = 1, k0 = 1, tau = 0.1 against an RK4 oracle.
        let closed = damped_kinetic(1.0, 1.0, 0.1);
        let oracle = rk4_damped_kinetic(1.0, 1.0, 0.1, 4000);
        assert_relative_eq!(closed, oracle, epsilon = 1e-12);
        // Logistic form sanity: p k0 e^{-2pt}/(p + k0 - k0 e^{-2pt}).
        let e = (-0.2f64).exp();
        assert_relative_eq!(closed, e / (2.0 - e), epsilon = 1e-14);
        // Degenerate rest state.
        assert_eq!(damped_kinetic(2.0, 0.0, 5.0), 0.0);
    }

    #[test]
    fn damping_substep_identity_on_rest_and_scalar_on_modes() {
        let d = domain_1d(8);
        let cfg = linear_damped(&d);
        let u = crate::multiplier::random_field(&d, 41, None);
        let rest = State::new(u.clone(), SpectralField::zeros(&d), 0.0);
        let out = damping_substep(&rest, 0.2, &cfg);
        assert_eq!(out.v.coeffs(), rest.v.coeffs());

        // Mode ratios of v are invariant: damping is a single scalar.
        let v = crate::multiplier::random_field(&d, 42, None);
        let state = State::new(u, v.clone(), 0.0);
        let out = damping_substep(&state, 0.2, &cfg);
        let sigma = out.v.coeffs()[0] / v.coeffs()[0];
        assert!(sigma > 0.0 && sigma < 1.0);
        for (a, b) in out.v.coeffs().iter().zip(v.coeffs()) {
            assert_relative_eq!(a / b, sigma, max_relative = 1e-12);
        }
    }

    #[test]
    fn step_identity_when_everything_is_off() {
        let d = domain_1d(8);
        let cfg = ModelConfig::new(false, Damping::None, keep_all(&d));
        let u = crate::multiplier::random_field(&d, 51, None);
        let v = crate::multiplier::random_field(&d, 52, None);
        let state = State::new(u, v, 0.0);
        // Zero rotation cannot be configured (dt > 0), so check that the
        // undamped linear step conserves E to round-off instead.
        let scheme = StepScheme::new(1e-3);
        let out = step(&state, &scheme, &cfg).unwrap();
        let e0 = total_energy(&state, &cfg);
        let e1 = total_energy(&out, &cfg);
        assert_relative_eq!(e0, e1, max_relative = 1e-12);
    }

    #[test]
    fn simulate_zero_data_gives_zero_trace() {
        let d = domain_1d(8);
        let cfg = quintic_damped(&d);
        let out = simulate(
            &State::zero(&d),
            &cfg,
            &StepScheme::new(1e-2),
            &SimOptions::new(1.0, 10),
        )
        .unwrap();
        assert!(out.trace.energy().iter().all(|&e| e == 0.0));
        assert!(out.final_state.u.coeffs().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn simulate_linear_damped_energy_is_monotone() {
        let d = domain_1d(16);
        let cfg = linear_damped(&d);
        let init = state_from_modes(&d, &[(ModeIndex::one_d(1), 1.0, 1.0)]).unwrap();
        let out = simulate(
            &init,
            &cfg,
            &StepScheme::new(1e-3),
            &SimOptions::new(5.0, 10),
        )
        .unwrap();
        let e = out.trace.energy();
        for w in e.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * e[0], "energy grew: {} -> {}", w[0], w[1]);
        }
        // BV structure: total variation equals the total drop exactly
        // (monotonicity), up to round-off.
        let tv: f64 = e.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        assert_relative_eq!(tv, e[0] - e[e.len() - 1], max_relative = 1e-10);
    }

    #[test]
    fn simulate_undamped_quintic_conserves_energy_to_dt_squared() {
        let d = domain_1d(8);
        let cfg = ModelConfig::new(true, Damping::None, keep_all(&d));
        let init = state_from_modes(&d, &[(ModeIndex::one_d(1), 0.8, 0.0)]).unwrap();
        let e0 = total_energy(&init, &cfg);
        let mut drifts = Vec::new();
        for dt in [2e-3, 1e-3] {
            let out = simulate(&init, &cfg, &StepScheme::new(dt), &SimOptions::new(2.0, 20))
                .unwrap();
            let drift = out
                .trace
                .energy()
                .iter()
                .map(|e| (e - e0).abs())
                .fold(0.0, f64::max);
            drifts.push(drift);
        }
        // Second order: halving dt shrinks the drift by about 4.
        let ratio = drifts[0] / drifts[1];
        assert!(
            (2.5..6.0).contains(&ratio),
            "drift ratio {ratio}, drifts {drifts:?}"
        );
    }

    #[test]
    fn sharp_projector_keeps_band_limited_runs_band_limited() {
        let d = domain_1d(16);
        let mut cfg = quintic_damped(&d);
        cfg.projector = MultiplierSpec::sharp(5.5).unwrap();
        let init = state_from_modes(&d, &[(ModeIndex::one_d(1), 0.9, 0.2)]).unwrap();
        let out = simulate(
            &init,
            &cfg,
            &StepScheme::new(1e-2),
            &SimOptions::new(1.0, 10),
        )
        .unwrap();
        for (i, &c) in out.final_state.u.coeffs().iter().enumerate() {
            if (i + 1) as f64 > 5.5 {
                assert_eq!(c, 0.0, "mode {} leaked", i + 1);
            }
        }
    }

    #[test]
    fn odd_symmetry_negates_trajectory_exactly() {
        let d = domain_1d(8);
        let cfg = quintic_damped(&d);
        let init = state_from_modes(&d, &[(ModeIndex::one_d(1), 0.7, -0.3)]).unwrap();
        let neg = State::new(init.u.scaled(-1.0), init.v.scaled(-1.0), 0.0);
        let scheme = StepScheme::new(1e-2);
        let opts = SimOptions::new(0.5, 5);
        let a = simulate(&init, &cfg, &scheme, &opts).unwrap();
        let b = simulate(&neg, &cfg, &scheme, &opts).unwrap();
        for (x, y) in a
            .final_state
            .u
            .coeffs()
            .iter()
            .zip(b.final_state.u.coeffs())
        {
            assert_eq!(*x, -*y);
        }
        for (x, y) in a
            .final_state
            .v
            .coeffs()
            .iter()
            .zip(b.final_state.v.coeffs())
        {
            assert_eq!(*x, -*y);
        }
    }

    #[test]
    fn identity_residual_shrinks_second_order() {
        let d = domain_1d(16);
        let cfg = linear_damped(&d);
        let init = state_from_modes(&d, &[(ModeIndex::one_d(1), 1.0, 1.0)]).unwrap();
        let mut residuals = Vec::new();
        for dt in [2e-3, 1e-3] {
            let out = simulate(&init, &cfg, &StepScheme::new(dt), &SimOptions::new(2.0, 1))
                .unwrap();
            residuals.push(crate::diagnostics::energy_identity_residual(&out.trace));
        }
        let ratio = residuals[0] / residuals[1];
        assert!(
            (3.0..5.0).contains(&ratio),
            "residual ratio {ratio}, residuals {residuals:?}"
        );
    }

    #[test]
    fn window_dissipation_agrees_with_accumulated_integral() {
        // D(t)^2 = E(t) - E(t+1) must match the dissipation-integral
        // difference over the window, up to interpolation error.
        let d = domain_1d(16);
        let cfg = linear_damped(&d);
        let init = state_from_modes(&d, &[(ModeIndex::one_d(1), 1.0, 1.0)]).unwrap();
        let out = simulate(
            &init,
            &cfg,
            &StepScheme::new(1e-3),
            &SimOptions::new(6.0, 1),
        )
        .unwrap();
        let trace = &out.trace;
        for t in [0.0, 1.0, 2.5, 4.0] {
            let window = crate::diagnostics::nakao_window(trace, t).unwrap();
            // diss_integral is sampled at trace times; interpolate.
            let interp = |tt: f64| {
                let times = trace.times();
                let col = trace.diss_integral();
                let i = times.partition_point(|&x| x < tt).min(times.len() - 1);
                if i == 0 {
                    return col[0];
                }
                let w = (tt - times[i - 1]) / (times[i] - times[i - 1]);
                col[i - 1] * (1.0 - w) + col[i] * w
            };
            let integral_diff = interp(t + 1.0) - interp(t);
            assert_relative_eq!(window, integral_diff, max_relative = 1e-6, epsilon = 1e-9);
            assert!(window >= 0.0);
        }
    }

    #[test]
    fn fitted_sandwich_upper_bound_dominates_linear_run() {
        let d = domain_1d(16);
        let cfg = linear_damped(&d);
        let init = state_from_modes(&d, &[(ModeIndex::one_d(1), 1.0, 1.0)]).unwrap();
        let out = simulate(
            &init,
            &cfg,
            &StepScheme::new(1e-3),
            &SimOptions::new(30.0, 20),
        )
        .unwrap();
        let trace = &out.trace;
        let mu = crate::diagnostics::fit_upper_mu(trace).unwrap();
        let e0 = trace.energy()[0];
        for (&t, &e) in trace.times().iter().zip(trace.energy()) {
            let (lower, upper) = linear_sandwich_bounds(e0, mu, t);
            assert!(e <= upper * (1.0 + 1e-12), "upper violated at t = {t}");
            assert!(e >= lower * (1.0 - 1e-12), "lower violated at t = {t}");
        }
    }

    #[test]
    fn bt_undamped_conserves_energy() {
        let params = BTParams::new(2.0, 0.0);
        let traj = single_mode_bt(&params, 1.0, 0.5, 1e-2, 100.0, 100);
        let e0 = traj.energy[0];
        for &e in &traj.energy {
            assert_relative_eq!(e, e0, max_relative = 1e-10);
        }
        // Rest stays at rest.
        let rest = single_mode_bt(&params, 0.0, 0.0, 1e-2, 1.0, 10);
        assert!(rest.energy.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn bt_damped_respects_hyperbolic_floor() {
        let params = BTParams::new(1.0, 1.0);
        let traj = single_mode_bt(&params, (2.0f64).sqrt() / 2.0 / 0.5, 0.0, 1e-3, 50.0, 100);
        // E0 comes out of the initial condition; the floor uses it.
        let e0 = traj.energy[0];
        for (&t, &e) in traj.times.iter().zip(&traj.energy) {
            let floor = linear_lower_bound(e0, t).unwrap();
            assert!(
                e >= floor * (1.0 - 1e-9),
                "floor violated at t={t}: {e} < {floor}"
            );
        }
    }

    #[test]
    fn lower_bound_and_sandwich_values() {
        assert_relative_eq!(linear_lower_bound(1.0, 0.0).unwrap(), 1.0);
        assert_relative_eq!(linear_lower_bound(1.0, 0.5).unwrap(), 0.5);
        assert_relative_eq!(linear_lower_bound(2.0, 1e6).unwrap(), 1.0 / (0.5 + 2e6));
        assert!(linear_lower_bound(0.0, 1.0).is_err());

        let (lo, hi) = linear_sandwich_bounds(1.5, 0.7, 0.0);
        assert_relative_eq!(lo, 1.5);
        assert_relative_eq!(hi, 1.5);
        let (lo, hi) = linear_sandwich_bounds(1.0, 0.7, 1.0);
        assert_relative_eq!(lo, 1.0 / 5.0);
        assert_relative_eq!(hi, 1.0);
    }

    #[test]
    fn rescale_hits_target_energy() {
        let d = domain_1d(8);
        let cfg = quintic_damped(&d);
        let state = state_from_random(&d, 4.0, 7, 1.0, &cfg).unwrap();
        assert_relative_eq!(total_energy(&state, &cfg), 1.0, max_relative = 1e-10);
        // Zero target zeroes the state; zero data cannot be rescaled up.
        let zeroed = rescale_to_energy(&state, 0.0, &cfg).unwrap();
        assert_eq!(total_energy(&zeroed, &cfg), 0.0);
        assert!(rescale_to_energy(&State::zero(&d), 1.0, &cfg).is_err());
    }

    #[test]
    fn bump_data_is_resolved_and_zero_velocity() {
        let d = domain_1d(32);
        let state = state_from_bump(&d, &[PI / 2.0], &[1.0], 1.0, 3).unwrap();
        assert!(state.v.coeffs().iter().all(|&c| c == 0.0));
        // Tail of the coefficient sequence is tiny for a smooth bump
        // (the exp(-1/(1-t^2)) profile decays like exp(-c sqrt(k))).
        let coeffs = state.u.coeffs();
        let head: f64 = coeffs[..8].iter().map(|c| c * c).sum();
        let tail: f64 = coeffs[24..].iter().map(|c| c * c).sum();
        assert!(tail < 1e-4 * head, "bump not resolved: tail {tail} head {head}");
    }

    #[test]
    fn instability_is_reported() {
        let d = domain_1d(8);
        let cfg = quintic_damped(&d);
        // Huge dt on large-amplitude data blows up the kick.
        let init = state_from_modes(&d, &[(ModeIndex::one_d(1), 30.0, 0.0)]).unwrap();
        let err = simulate(
            &init,
            &cfg,
            &StepScheme::new(2.0),
            &SimOptions::new(20.0, 1),
        )
        .unwrap_err();
        match err {
            Error::Instability { .. } | Error::NonFinite { .. } => {}
            other => panic!("expected instability, got {other}"),
        }
    }
}
