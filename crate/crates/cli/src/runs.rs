//! Subcommand implementations: configured simulation runs, Galerkin-level
//! convergence sweeps, the multiplier property suite, decay studies
//! against the closed-form bounds, windowed dissipation reports, and the
//! high-precision oracle check.

use crate::config::ExperimentConfig;
use crate::oracle::{max_deviation, ReferenceSystem};
use crate::output::{
    config_hash, fail, fail_from_core, write_json, write_table_csv, write_trace_csv, Failure,
    RunResult,
};
use anyhow::anyhow;
use btwave::diagnostics::{
    conservation_defect, constant_damping_residual, decay_fit, energy_identity_residual,
    fit_upper_mu, gronwall_check, nakao_report, regular_energy_rate_check, strichartz_norm,
    DecayFit, GronwallCheck, NakaoReport, StrichartzPair,
};
use btwave::domain::{BoxDomain, SpectralField};
use btwave::dynamics::{
    higher_energy, simulate, single_mode_bt, total_energy, BTParams, Damping, ModelConfig,
    SimOptions, SimOutput, State, StepScheme,
};
use btwave::multiplier::{
    self, apply_multiplier, commutation_defect, convergence_defect, l2_contraction_defect,
    lp_operator_ratio, regularization_ratio, MultiplierKind, MultiplierSpec,
};
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Slack for the discrete-dissipation check on sampled energies.
const MONOTONE_SLACK: f64 = 1e-12;
/// Relative slack for the closed-form decay floor.
const LOWER_BOUND_SLACK: f64 = 1e-6;

pub struct RunContext {
    pub cfg: ExperimentConfig,
    pub out_dir: PathBuf,
    pub hash: String,
    pub quiet: bool,
}

impl RunContext {
    pub fn new(cfg: ExperimentConfig, out_override: Option<PathBuf>, quiet: bool) -> Self {
        let out_dir = out_override.unwrap_or_else(|| cfg.out_dir.clone());
        let hash = config_hash(&cfg.raw_text, cfg.seed);
        RunContext {
            cfg,
            out_dir,
            hash,
            quiet,
        }
    }

    fn ensure_out_dir(&self) -> RunResult<()> {
        fs::create_dir_all(&self.out_dir)
            .map_err(|e| fail("io-error", anyhow!("creating {}: {e}", self.out_dir.display())))
    }

    fn info(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

fn build_parts(
    cfg: &ExperimentConfig,
) -> RunResult<(Arc<BoxDomain>, ModelConfig, StepScheme, State)> {
    let domain = cfg.domain().map_err(|e| fail("config-error", e))?;
    let model = cfg.model(&domain).map_err(|e| fail("config-error", e))?;
    let scheme = StepScheme::new(cfg.dt);
    let state = cfg
        .initial_state(&domain, &model)
        .map_err(|e| fail("config-error", e))?;
    Ok((domain, model, scheme, state))
}

fn run_simulation(
    model: &ModelConfig,
    scheme: &StepScheme,
    state: &State,
    t_final: f64,
    stride: usize,
) -> RunResult<SimOutput> {
    simulate(state, model, scheme, &SimOptions::new(t_final, stride)).map_err(fail_from_core)
}

/// Sampled energies must not increase (beyond slack) on damped runs with
/// a sharp projector; the smooth projector is exempt because its energy
/// identity carries the recorded defect instead.
fn check_monotone(model: &ModelConfig, out: &SimOutput) -> Option<(f64, f64)> {
    let e = out.trace.energy();
    if e.is_empty() {
        return None;
    }
    let slack = MONOTONE_SLACK * e[0].max(1.0);
    let mut worst: Option<(f64, f64)> = None;
    for (i, w) in e.windows(2).enumerate() {
        let rise = w[1] - w[0];
        if rise > slack {
            let t = out.trace.times()[i + 1];
            if worst.map_or(true, |(_, r)| rise > r) {
                worst = Some((t, rise));
            }
        }
    }
    let _ = model;
    worst
}

#[derive(Serialize)]
pub struct DomainSummary {
    pub dimension: usize,
    pub lengths: Vec<f64>,
    pub modes_per_axis: usize,
}

#[derive(Serialize)]
pub struct ModelSummary {
    pub quintic: bool,
    pub damping: String,
    pub projector: String,
    pub potential_in_energy: bool,
    pub padding: usize,
}

fn damping_label(d: &Damping) -> String {
    match d {
        Damping::EnergyCoefficient => "energy".into(),
        Damping::None => "none".into(),
        Damping::Constant(c) => format!("constant:{c}"),
    }
}

fn projector_label(spec: &MultiplierSpec) -> String {
    match spec.kind() {
        MultiplierKind::Sharp => format!("sharp:{}", spec.level()),
        MultiplierKind::Smooth => format!("smooth:{}", spec.level()),
    }
}

#[derive(Serialize)]
pub struct NakaoSummary {
    pub c1: f64,
    pub envelope_margin_min: f64,
    pub max_n_times_envelope: f64,
    pub windows: usize,
}

impl NakaoSummary {
    fn from_report(r: &NakaoReport) -> Self {
        NakaoSummary {
            c1: r.c1,
            envelope_margin_min: r.envelope_margin_min,
            max_n_times_envelope: r.max_n_times_envelope,
            windows: r.window_starts.len(),
        }
    }
}

#[derive(Serialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub seed: Option<u64>,
    pub domain: DomainSummary,
    pub model: ModelSummary,
    pub dt: f64,
    pub t_final: f64,
    pub samples: usize,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub initial_higher_energy: f64,
    pub final_higher_energy: f64,
    pub energy_identity_residual: f64,
    pub energy_monotone: bool,
    pub strichartz_l5l10: f64,
    pub strichartz_l4l12: f64,
    pub l10_pad_residual: Option<f64>,
    pub l12_pad_residual: Option<f64>,
    pub sm_defect_max: f64,
    pub gronwall: Option<GronwallCheck>,
    pub regular_energy_rate: Option<f64>,
    pub decay: Option<DecayFit>,
    pub nakao: Option<NakaoSummary>,
    pub stability_warning: bool,
}

pub fn summarize(
    ctx: &RunContext,
    model: &ModelConfig,
    state0: &State,
    out: &SimOutput,
) -> RunSummary {
    let cfg = &ctx.cfg;
    let trace = &out.trace;
    let whole = (trace.t_start(), trace.t_end());
    let damped = model.damping != Damping::None;

    let decay = if damped && trace.t_end() > 12.0 {
        decay_fit(trace, (10.0, trace.t_end())).ok()
    } else {
        None
    };
    let nakao = if damped && trace.t_end() - trace.t_start() >= 2.0 {
        nakao_report(trace).ok().map(|r| NakaoSummary::from_report(&r))
    } else {
        None
    };
    let e0 = total_energy(state0, model);

    RunSummary {
        config_hash: ctx.hash.clone(),
        seed: cfg.seed,
        domain: DomainSummary {
            dimension: cfg.dimension,
            lengths: cfg.lengths.clone(),
            modes_per_axis: cfg.modes,
        },
        model: ModelSummary {
            quintic: model.quintic,
            damping: damping_label(&model.damping),
            projector: projector_label(&model.projector),
            potential_in_energy: model.potential_in_energy,
            padding: model.padding,
        },
        dt: cfg.dt,
        t_final: cfg.t_final,
        samples: trace.len(),
        initial_energy: e0,
        final_energy: *trace.energy().last().unwrap_or(&0.0),
        initial_higher_energy: higher_energy(state0),
        final_higher_energy: *trace.higher_energy().last().unwrap_or(&0.0),
        energy_identity_residual: match model.damping {
            Damping::EnergyCoefficient => energy_identity_residual(trace),
            Damping::None => conservation_defect(trace),
            Damping::Constant(c) => constant_damping_residual(trace, c),
        },
        energy_monotone: check_monotone(model, out).is_none(),
        strichartz_l5l10: strichartz_norm(trace, StrichartzPair::L5L10, whole).unwrap_or(0.0),
        strichartz_l4l12: strichartz_norm(trace, StrichartzPair::L4L12, whole).unwrap_or(0.0),
        l10_pad_residual: out.l10_pad_residual,
        l12_pad_residual: out.l12_pad_residual,
        sm_defect_max: trace
            .sm_defect()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs())),
        gronwall: gronwall_check(trace).ok(),
        regular_energy_rate: regular_energy_rate_check(trace, e0).ok(),
        decay,
        nakao,
        stability_warning: out.stability_warning,
    }
}

/// `simulate` subcommand: one configured run, trace + summary on disk.
pub fn run_simulate(ctx: &RunContext) -> RunResult<RunSummary> {
    let (_domain, model, scheme, state) = build_parts(&ctx.cfg)?;
    ctx.ensure_out_dir()?;
    let started = std::time::Instant::now();
    let out = run_simulation(&model, &scheme, &state, ctx.cfg.t_final, ctx.cfg.sample_stride)?;
    let elapsed = started.elapsed().as_secs_f64();

    let summary = summarize(ctx, &model, &state, &out);
    write_trace_csv(&ctx.out_dir.join("trace.csv"), &out.trace, &ctx.hash)
        .map_err(|e| fail("io-error", e))?;
    write_json(&ctx.out_dir.join("summary.json"), &summary)
        .map_err(|e| fail("io-error", e))?;
    ctx.info(&format!(
        "simulate: {} samples to t = {}, E {} -> {}, wall {:.2}s",
        summary.samples, summary.t_final, summary.initial_energy, summary.final_energy, elapsed
    ));

    // Invariant gate: damped sharp-projector runs must dissipate.
    let damped = model.damping != Damping::None;
    let sharp = model.projector.kind() == MultiplierKind::Sharp;
    if damped && (sharp || !model.quintic) {
        if let Some((t, rise)) = check_monotone(&model, &out) {
            return Err(fail(
                "bound-violation",
                anyhow!("sampled energy rose by {rise:.3e} at t = {t} in a damped run"),
            ));
        }
    }
    Ok(summary)
}

// ---------------------------------------------------------------------
// sweep-m
// ---------------------------------------------------------------------

#[derive(Serialize)]
pub struct SweepRow {
    pub level: f64,
    pub final_energy: f64,
    pub strichartz_l5l10: f64,
    pub strichartz_l4l12: f64,
    /// Energy-norm distance of the final state to the next level's.
    pub diff_to_next: Option<f64>,
}

#[derive(Serialize)]
pub struct SweepReport {
    pub config_hash: String,
    pub levels: Vec<f64>,
    pub rows: Vec<SweepRow>,
}

fn energy_norm_diff(a: &State, b: &State) -> f64 {
    let du = a.u.sub(&b.u);
    let dv = a.v.sub(&b.v);
    (0.5 * (du.h1_seminorm_sq() + dv.l2_norm_sq())).sqrt()
}

/// `sweep-m` subcommand: common initial data projected to each level,
/// one run per level, adjacent differences in the energy norm at `T`.
pub fn run_sweep(ctx: &RunContext) -> RunResult<SweepReport> {
    let cfg = &ctx.cfg;
    if cfg.sweep_levels.len() < 1 {
        return Err(fail(
            "config-error",
            anyhow!("sweep-m needs a [sweep] section with levels"),
        ));
    }
    let mut levels = cfg.sweep_levels.clone();
    levels.sort_by(|a, b| a.partial_cmp(b).expect("finite levels"));
    let (_domain, base_model, scheme, base_state) = build_parts(cfg)?;
    ctx.ensure_out_dir()?;

    let mut finals: Vec<State> = Vec::new();
    let mut rows: Vec<SweepRow> = Vec::new();
    for &level in &levels {
        let projector = cfg
            .projector
            .at_level(level)
            .map_err(|e| fail("config-error", e))?;
        let mut model = base_model.clone();
        model.projector = projector;
        // Project the common data onto this level.
        let state = State::new(
            apply_multiplier(&projector, &base_state.u),
            apply_multiplier(&projector, &base_state.v),
            0.0,
        );
        let out = run_simulation(&model, &scheme, &state, cfg.t_final, cfg.sample_stride)?;
        let whole = (out.trace.t_start(), out.trace.t_end());
        rows.push(SweepRow {
            level,
            final_energy: *out.trace.energy().last().unwrap_or(&0.0),
            strichartz_l5l10: strichartz_norm(&out.trace, StrichartzPair::L5L10, whole)
                .unwrap_or(0.0),
            strichartz_l4l12: strichartz_norm(&out.trace, StrichartzPair::L4L12, whole)
                .unwrap_or(0.0),
            diff_to_next: None,
        });
        finals.push(out.final_state);
    }
    for i in 0..finals.len().saturating_sub(1) {
        rows[i].diff_to_next = Some(energy_norm_diff(&finals[i], &finals[i + 1]));
    }

    let report = SweepReport {
        config_hash: ctx.hash.clone(),
        levels: levels.clone(),
        rows,
    };
    let csv_rows: Vec<String> = report
        .rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{}",
                r.level,
                r.final_energy,
                r.strichartz_l5l10,
                r.strichartz_l4l12,
                r.diff_to_next.map_or(String::new(), |d| d.to_string())
            )
        })
        .collect();
    write_table_csv(
        &ctx.out_dir.join("sweep.csv"),
        &ctx.hash,
        "level,final_energy,strichartz_l5l10,strichartz_l4l12,diff_to_next",
        &csv_rows,
    )
    .map_err(|e| fail("io-error", e))?;
    write_json(&ctx.out_dir.join("sweep.json"), &report).map_err(|e| fail("io-error", e))?;
    for r in &report.rows {
        ctx.info(&format!(
            "sweep-m: level {} -> Y = {}, diff_to_next = {:?}",
            r.level, r.strichartz_l5l10, r.diff_to_next
        ));
    }
    Ok(report)
}

// ---------------------------------------------------------------------
// multiplier-test
// ---------------------------------------------------------------------

#[derive(Serialize)]
pub struct LevelValue {
    pub level: f64,
    pub value: f64,
}

#[derive(Serialize)]
pub struct RegularizationRow {
    pub s: f64,
    pub per_level: Vec<LevelValue>,
    /// max/min of the measured ratios across levels.
    pub spread: f64,
}

#[derive(Serialize)]
pub struct LpRatioRow {
    pub kind: String,
    pub level: f64,
    pub p: f64,
    pub ratio: f64,
}

#[derive(Serialize)]
pub struct MultiplierReport {
    pub config_hash: String,
    pub modes_per_axis: usize,
    pub levels: Vec<f64>,
    pub random_samples: usize,
    pub seed: u64,
    pub contraction_max: f64,
    pub contraction_pass: bool,
    pub commutation_rel_max: f64,
    pub commutation_pass: bool,
    pub sharp_idempotent_pass: bool,
    pub interpolation_pass: bool,
    pub convergence_defects: Vec<LevelValue>,
    pub convergence_nonincreasing: bool,
    pub convergence_reaches_zero_for_band_limited: bool,
    pub regularization: Vec<RegularizationRow>,
    pub regularization_stable_within_factor_two: bool,
    pub lp_ratios: Vec<LpRatioRow>,
}

/// `multiplier-test` subcommand: the measured operator property suite.
pub fn run_multiplier_suite(ctx: &RunContext) -> RunResult<MultiplierReport> {
    let cfg = &ctx.cfg;
    let domain = cfg.domain().map_err(|e| fail("config-error", e))?;
    let seed = cfg.seed.unwrap_or(0);
    ctx.ensure_out_dir()?;

    let mut levels = cfg.multiplier_levels.clone();
    levels.sort_by(|a, b| a.partial_cmp(b).expect("finite levels"));
    if levels.is_empty() {
        return Err(fail("config-error", anyhow!("multiplier levels are empty")));
    }

    // Sample set: seeded random fields plus every single mode (the
    // single-mode deltas make the regularization maxima sharp).
    let mut samples: Vec<SpectralField> = (0..cfg.multiplier_samples)
        .map(|i| multiplier::random_field(&domain, seed.wrapping_add(i as u64), None))
        .collect();
    for flat in 0..domain.mode_count() {
        let mut f = SpectralField::zeros(&domain);
        f.coeffs_mut()[flat] = 1.0;
        samples.push(f);
    }

    let mut contraction_max: f64 = 0.0;
    let mut commutation_rel_max: f64 = 0.0;
    let lap_scale = samples
        .iter()
        .map(|v| btwave::domain::apply_laplacian(v).l2_norm())
        .fold(0.0, f64::max);
    let mut sharp_idempotent_pass = true;
    let mut interpolation_pass = true;

    for &level in &levels {
        for spec in [
            MultiplierSpec::sharp(level).map_err(fail_from_core)?,
            MultiplierSpec::smooth(level).map_err(fail_from_core)?,
        ] {
            contraction_max = contraction_max.max(
                l2_contraction_defect(&spec, &samples).map_err(fail_from_core)?,
            );
            commutation_rel_max =
                commutation_rel_max.max(commutation_defect(&spec, &samples) / lap_scale);
        }
        // Sharp projection: applying twice equals applying once.
        let sharp = MultiplierSpec::sharp(level).map_err(fail_from_core)?;
        for v in &samples {
            let once = apply_multiplier(&sharp, v);
            if apply_multiplier(&sharp, &once).coeffs() != once.coeffs() {
                sharp_idempotent_pass = false;
            }
        }
        // Coefficientwise interpolation Sharp(m) <= Smooth(m) <= Sharp(2m).
        let smooth = MultiplierSpec::smooth(level).map_err(fail_from_core)?;
        let outer = MultiplierSpec::sharp(2.0 * level).map_err(fail_from_core)?;
        for &l2 in domain.lambda_sq() {
            let lambda = l2.sqrt();
            let w = smooth.weight(lambda);
            if !(sharp.weight(lambda) <= w && w <= outer.weight(lambda)) {
                interpolation_pass = false;
            }
        }
    }

    // Convergence on the reference field c_k = lambda_k^{-2}.
    let mut reference = SpectralField::zeros(&domain);
    {
        let lambda_sq = domain.lambda_sq().to_vec();
        for (c, l2) in reference.coeffs_mut().iter_mut().zip(lambda_sq) {
            *c = 1.0 / l2;
        }
    }
    let defects =
        convergence_defect(MultiplierKind::Smooth, &levels, &reference).map_err(fail_from_core)?;
    let convergence_defects: Vec<LevelValue> = levels
        .iter()
        .zip(&defects)
        .map(|(&level, &value)| LevelValue { level, value })
        .collect();
    let convergence_nonincreasing = defects.windows(2).all(|w| w[1] <= w[0] + 1e-15);
    // Band-limited input: exactly zero once the level covers the band.
    let band_limited = {
        let mut f = SpectralField::zeros(&domain);
        f.coeffs_mut()[0] = 1.0;
        f
    };
    let band_defects = convergence_defect(
        MultiplierKind::Smooth,
        &[domain.lambda_min().max(1.0)],
        &band_limited,
    )
    .map_err(fail_from_core)?;
    let convergence_reaches_zero_for_band_limited = band_defects[0] == 0.0;

    // Regularization gain ratios per H^s order across levels.
    let mut regularization = Vec::new();
    let mut regularization_stable = true;
    for &s in &cfg.multiplier_s_orders {
        let mut per_level = Vec::new();
        for &level in &levels {
            let spec = MultiplierSpec::smooth(level).map_err(fail_from_core)?;
            let value = regularization_ratio(&spec, s, &samples).map_err(fail_from_core)?;
            per_level.push(LevelValue { level, value });
        }
        let max = per_level.iter().map(|r| r.value).fold(f64::MIN, f64::max);
        let min = per_level.iter().map(|r| r.value).fold(f64::MAX, f64::min);
        let spread = max / min;
        if spread > 2.0 {
            regularization_stable = false;
        }
        regularization.push(RegularizationRow { s, per_level, spread });
    }

    // Empirical L^p operator ratios, tabulated for both kinds.
    let mut lp_ratios = Vec::new();
    for &level in &levels {
        for (kind, spec) in [
            ("sharp", MultiplierSpec::sharp(level).map_err(fail_from_core)?),
            ("smooth", MultiplierSpec::smooth(level).map_err(fail_from_core)?),
        ] {
            let ratio = lp_operator_ratio(
                &spec,
                cfg.multiplier_p,
                &domain,
                cfg.multiplier_samples.max(1),
                seed,
            )
            .map_err(fail_from_core)?;
            lp_ratios.push(LpRatioRow {
                kind: kind.into(),
                level,
                p: cfg.multiplier_p,
                ratio,
            });
        }
    }

    let report = MultiplierReport {
        config_hash: ctx.hash.clone(),
        modes_per_axis: cfg.modes,
        levels,
        random_samples: cfg.multiplier_samples,
        seed,
        contraction_max,
        contraction_pass: contraction_max <= 1.0 + 1e-12,
        commutation_rel_max,
        commutation_pass: commutation_rel_max <= 1e-12,
        sharp_idempotent_pass,
        interpolation_pass,
        convergence_defects,
        convergence_nonincreasing,
        convergence_reaches_zero_for_band_limited,
        regularization,
        regularization_stable_within_factor_two: regularization_stable,
        lp_ratios,
    };
    write_json(&ctx.out_dir.join("multiplier_report.json"), &report)
        .map_err(|e| fail("io-error", e))?;

    ctx.info(&format!(
        "multiplier-test: contraction {} ({}), commutation {} ({}), interpolation {}, reg stable {}",
        report.contraction_max,
        pass_str(report.contraction_pass),
        report.commutation_rel_max,
        pass_str(report.commutation_pass),
        pass_str(report.interpolation_pass),
        pass_str(report.regularization_stable_within_factor_two),
    ));

    if !(report.contraction_pass
        && report.commutation_pass
        && report.sharp_idempotent_pass
        && report.interpolation_pass)
    {
        return Err(fail(
            "bound-violation",
            anyhow!("a multiplier property check failed; see multiplier_report.json"),
        ));
    }
    Ok(report)
}

fn pass_str(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "FAIL"
    }
}

// ---------------------------------------------------------------------
// decay-study
// ---------------------------------------------------------------------

#[derive(Serialize)]
pub struct DecayRow {
    pub kind: String,
    pub e0: f64,
    pub alpha: Option<f64>,
    pub c0: Option<f64>,
    pub mu: Option<f64>,
    pub nakao_c1: Option<f64>,
    pub nakao_envelope_margin: Option<f64>,
    /// min over samples of E / lower_bound; must stay >= 1 - 1e-6 where
    /// the bound applies (single-mode and linear runs).
    pub lower_bound_min_ratio: f64,
    pub lower_bound_applies: bool,
    pub first_violation_t: Option<f64>,
}

#[derive(Serialize)]
pub struct DecayStudy {
    pub config_hash: String,
    pub rows: Vec<DecayRow>,
}

fn floor_check(times: &[f64], energy: &[f64], e0: f64) -> (f64, Option<f64>) {
    let mut min_ratio = f64::INFINITY;
    let mut first_violation = None;
    for (&t, &e) in times.iter().zip(energy) {
        let floor = 1.0 / (1.0 / e0 + 2.0 * t);
        let ratio = e / floor;
        if ratio < min_ratio {
            min_ratio = ratio;
        }
        if ratio < 1.0 - LOWER_BOUND_SLACK && first_violation.is_none() {
            first_violation = Some(t);
        }
    }
    (min_ratio, first_violation)
}

/// `decay-study` subcommand: measured traces against the closed-form
/// floor, the fitted sandwich upper bound, the dissipation-window
/// envelope, and the log-log decay exponent, across a family of initial
/// energies. The floor must hold for the single-mode and linear runs.
pub fn run_decay_study(ctx: &RunContext) -> RunResult<DecayStudy> {
    let cfg = &ctx.cfg;
    if cfg.damping == Damping::None {
        return Err(fail(
            "config-error",
            anyhow!("decay-study needs damping on"),
        ));
    }
    let (domain, model, scheme, _) = build_parts(cfg)?;
    ctx.ensure_out_dir()?;
    let mut rows: Vec<DecayRow> = Vec::new();

    for &e0 in &cfg.decay_e0_list {
        // Single-mode reference oscillator at the same initial energy.
        if cfg.decay_include_bt {
            let params = BTParams::new(cfg.bt_lambda, cfg.bt_d);
            let x0 = (2.0 * e0 / cfg.bt_lambda).sqrt();
            let traj = single_mode_bt(&params, x0, 0.0, cfg.dt, cfg.t_final, cfg.sample_stride);
            let (min_ratio, violation) = floor_check(&traj.times, &traj.energy, e0);
            let trace = btwave::diagnostics::EnergyTrace::from_energy_samples(
                &traj.times,
                &traj.energy,
            );
            let window = clamp_window(cfg.decay_fit_window, traj.times.last().copied());
            let fit = decay_fit(&trace, window).ok();
            let nakao = nakao_report(&trace).ok();
            rows.push(DecayRow {
                kind: "single-mode".into(),
                e0,
                alpha: fit.as_ref().map(|f| f.alpha),
                c0: fit.as_ref().map(|f| f.c0),
                mu: fit_upper_mu(&trace).ok(),
                nakao_c1: nakao.as_ref().map(|n| n.c1),
                nakao_envelope_margin: nakao.as_ref().map(|n| n.envelope_margin_min),
                lower_bound_min_ratio: min_ratio,
                lower_bound_applies: true,
                first_violation_t: violation,
            });
        }

        // The configured PDE rescaled to this initial energy.
        let state = ctx
            .cfg
            .initial_state_with_energy(&domain, &model, e0)
            .map_err(|e| fail("config-error", e))?;
        let out = run_simulation(&model, &scheme, &state, cfg.t_final, cfg.sample_stride)?;
        let trace = &out.trace;
        let (min_ratio, violation) = floor_check(trace.times(), trace.energy(), e0);
        let window = clamp_window(cfg.decay_fit_window, Some(trace.t_end()));
        let fit = decay_fit(trace, window).ok();
        let nakao = nakao_report(trace).ok();
        // The hyperbolic floor is a theorem only for the linear prototype
        // with energy-coefficient damping; elsewhere it is informational.
        let applies = !model.quintic && model.damping == Damping::EnergyCoefficient;
        rows.push(DecayRow {
            kind: if model.quintic { "quintic" } else { "linear" }.into(),
            e0,
            alpha: fit.as_ref().map(|f| f.alpha),
            c0: fit.as_ref().map(|f| f.c0),
            mu: fit_upper_mu(trace).ok(),
            nakao_c1: nakao.as_ref().map(|n| n.c1),
            nakao_envelope_margin: nakao.as_ref().map(|n| n.envelope_margin_min),
            lower_bound_min_ratio: min_ratio,
            lower_bound_applies: applies,
            first_violation_t: violation,
        });
        write_trace_csv(
            &ctx.out_dir.join(format!("decay_e0_{e0}.csv")),
            trace,
            &ctx.hash,
        )
        .map_err(|e| fail("io-error", e))?;
    }

    let study = DecayStudy {
        config_hash: ctx.hash.clone(),
        rows,
    };
    let csv_rows: Vec<String> = study
        .rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{},{},{}",
                r.kind,
                r.e0,
                opt(r.alpha),
                opt(r.c0),
                opt(r.mu),
                opt(r.nakao_c1),
                opt(r.nakao_envelope_margin),
                r.lower_bound_min_ratio,
                r.lower_bound_applies,
            )
        })
        .collect();
    write_table_csv(
        &ctx.out_dir.join("decay_study.csv"),
        &ctx.hash,
        "kind,e0,alpha,c0,mu,nakao_c1,nakao_envelope_margin,lower_bound_min_ratio,lower_bound_applies",
        &csv_rows,
    )
    .map_err(|e| fail("io-error", e))?;
    write_json(&ctx.out_dir.join("decay_study.json"), &study)
        .map_err(|e| fail("io-error", e))?;

    for r in &study.rows {
        ctx.info(&format!(
            "decay-study: {} E0 = {} -> alpha = {:?}, floor ratio {}",
            r.kind, r.e0, r.alpha, r.lower_bound_min_ratio
        ));
        if r.lower_bound_applies {
            if let Some(t) = r.first_violation_t {
                return Err(fail(
                    "bound-violation",
                    anyhow!(
                        "{} run with E0 = {} violated the decay floor at t = {t}",
                        r.kind,
                        r.e0
                    ),
                ));
            }
        }
    }
    Ok(study)
}

fn clamp_window(window: (f64, f64), t_end: Option<f64>) -> (f64, f64) {
    match t_end {
        Some(end) => (window.0.min(end / 2.0).max(f64::MIN_POSITIVE), window.1.min(end)),
        None => window,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

// ---------------------------------------------------------------------
// nakao
// ---------------------------------------------------------------------

#[derive(Serialize)]
pub struct NakaoOutput {
    pub config_hash: String,
    pub report: NakaoReport,
}

/// `nakao` subcommand: windowed dissipation table and envelope. Reuses a
/// `trace.csv` left in the output directory by `simulate` when its
/// embedded hash matches this config; a mismatched hash is reported and
/// the run is redone.
pub fn run_nakao(ctx: &RunContext) -> RunResult<NakaoOutput> {
    let (_domain, model, scheme, state) = build_parts(&ctx.cfg)?;
    if ctx.cfg.damping == Damping::None {
        return Err(fail("config-error", anyhow!("nakao needs damping on")));
    }
    ctx.ensure_out_dir()?;
    let trace_path = ctx.out_dir.join("trace.csv");
    let trace = if trace_path.exists() {
        match crate::output::verify_hash(&trace_path, &ctx.hash) {
            Ok(true) => {
                ctx.info("nakao: reusing trace.csv (config hash matches)");
                Some(crate::output::parse_trace_csv(&trace_path).map_err(|e| fail("io-error", e))?)
            }
            Ok(false) => {
                ctx.info("nakao: trace.csv was written by a different config; re-simulating");
                None
            }
            Err(e) => return Err(fail("io-error", e)),
        }
    } else {
        None
    };
    let trace = match trace {
        Some(t) => t,
        None => {
            run_simulation(&model, &scheme, &state, ctx.cfg.t_final, ctx.cfg.sample_stride)?.trace
        }
    };
    let report = nakao_report(&trace).map_err(fail_from_core)?;

    let csv_rows: Vec<String> = report
        .window_starts
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            format!(
                "{},{},{},{}",
                t, report.window_drops[i], report.window_sups[i], report.envelope[i]
            )
        })
        .collect();
    write_table_csv(
        &ctx.out_dir.join("nakao.csv"),
        &ctx.hash,
        "window_start,drop,sup_energy,envelope",
        &csv_rows,
    )
    .map_err(|e| fail("io-error", e))?;
    let output = NakaoOutput {
        config_hash: ctx.hash.clone(),
        report,
    };
    write_json(&ctx.out_dir.join("nakao.json"), &output).map_err(|e| fail("io-error", e))?;
    ctx.info(&format!(
        "nakao: C1 = {}, envelope margin {}, max n*env = {}",
        output.report.c1, output.report.envelope_margin_min, output.report.max_n_times_envelope
    ));
    if output.report.envelope_margin_min < -1e-9 * ctx_e0(&output) {
        return Err(fail(
            "bound-violation",
            anyhow!(
                "envelope fails to dominate the measured energy (margin {})",
                output.report.envelope_margin_min
            ),
        ));
    }
    Ok(output)
}

fn ctx_e0(out: &NakaoOutput) -> f64 {
    out.report.envelope.first().copied().unwrap_or(1.0).max(1e-30)
}

// ---------------------------------------------------------------------
// oracle-check
// ---------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct OracleReport {
    pub config_hash: String,
    pub modes: usize,
    pub dt: f64,
    pub t_final: f64,
    pub tolerance: f64,
    pub max_deviation: f64,
    pub pass: bool,
}

/// `oracle-check` subcommand: the split-step trajectory against the
/// adaptive reference on a small mode system.
pub fn run_oracle_check(ctx: &RunContext) -> RunResult<OracleReport> {
    let cfg = &ctx.cfg;
    let (domain, model, scheme, state) = build_parts(cfg)?;
    if cfg.dimension != 1 || cfg.modes > 4 {
        return Err(fail(
            "config-error",
            anyhow!("oracle-check needs a 1D domain with at most 4 modes"),
        ));
    }
    ctx.ensure_out_dir()?;

    let opts = SimOptions {
        t_final: cfg.t_final,
        sample_stride: cfg.sample_stride,
        snapshot_stride: Some(cfg.sample_stride),
    };
    let out = simulate(&state, &model, &scheme, &opts).map_err(fail_from_core)?;

    let system = ReferenceSystem::new(&domain, &model).map_err(|e| fail("config-error", e))?;
    let times: Vec<f64> = out.snapshots.iter().map(|s| s.t).collect();
    let reference = system
        .integrate(&state, &times, 1e-12)
        .map_err(|e| fail("degenerate", e))?;
    let deviation = max_deviation(&reference, &out.snapshots);

    let report = OracleReport {
        config_hash: ctx.hash.clone(),
        modes: cfg.modes,
        dt: cfg.dt,
        t_final: cfg.t_final,
        tolerance: cfg.oracle_tolerance,
        max_deviation: deviation,
        pass: deviation <= cfg.oracle_tolerance,
    };
    write_json(&ctx.out_dir.join("oracle.json"), &report).map_err(|e| fail("io-error", e))?;
    ctx.info(&format!(
        "oracle-check: max deviation {} vs tolerance {} -> {}",
        report.max_deviation,
        report.tolerance,
        pass_str(report.pass)
    ));
    if !report.pass {
        return Err(fail(
            "oracle-deviation",
            anyhow!(
                "split-step deviates from the reference by {} (tolerance {})",
                report.max_deviation,
                report.tolerance
            ),
        ));
    }
    Ok(report)
}

/// Shared by tests: loads a config file and builds a context.
pub fn context_from_path(
    path: &Path,
    out_override: Option<PathBuf>,
    seed_override: Option<u64>,
    quiet: bool,
) -> RunResult<RunContext> {
    let text = fs::read_to_string(path)
        .map_err(|e| fail("io-error", anyhow!("reading {}: {e}", path.display())))?;
    let mut cfg = crate::config::parse_config(&text).map_err(|e| fail("config-error", e))?;
    if let Some(seed) = seed_override {
        cfg.seed = Some(seed);
    }
    Ok(RunContext::new(cfg, out_override, quiet))
}

pub fn print_failure(f: &Failure) {
    eprintln!("error: {f}");
}
