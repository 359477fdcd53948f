//! Post-processing checks for simulation traces: the energy identity,
//! windowed dissipation analysis and its decay envelope, spacetime
//! (Strichartz) norms, decay-rate fits, the higher-energy growth bounds,
//! and the algebraic bootstrap helpers.
//!
//! Every quantity here is measured or fitted from a trace; none of the
//! existential constants are assumed.

use crate::error::{Error, Result};
use serde::Serialize;

/// Floor below which a unit window's dissipation is treated as degenerate
/// and excluded from constant estimation (relative to the initial energy):
/// the difference inequality is vacuous when the drop underflows.
pub const NAKAO_DEGENERATE_FLOOR: f64 = 1e-14;

/// Time-sampled diagnostics of one run. Columns are parallel to `times`.
#[derive(Debug, Clone, Default)]
pub struct EnergyTrace {
    times: Vec<f64>,
    energy: Vec<f64>,
    higher_energy: Vec<f64>,
    ut_l2sq: Vec<f64>,
    /// Energy removed by the damping substeps up to each sample
    /// (for energy-coefficient damping this is `int E ||u_t||^2` exactly).
    diss_integral: Vec<f64>,
    l10: Vec<f64>,
    l12: Vec<f64>,
    /// `<(Pi - I) u^5, u_t>` within the retained modes: the energy-identity
    /// defect of the smooth-projector scheme.
    sm_defect: Vec<f64>,
}

impl EnergyTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Synthetic trace carrying only times and energies (other columns
    /// zero); used by analysis of closed-form references.
    pub fn from_energy_samples(times: &[f64], energy: &[f64]) -> Self {
        assert_eq!(times.len(), energy.len());
        let mut trace = Self::new();
        for (&t, &e) in times.iter().zip(energy) {
            trace.push(t, e, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        }
        trace
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        t: f64,
        e: f64,
        e1: f64,
        ut_l2sq: f64,
        diss_integral: f64,
        l10: f64,
        l12: f64,
        sm_defect: f64,
    ) {
        if let Some(&last) = self.times.last() {
            assert!(t > last, "sample times must be strictly increasing");
        }
        for v in [t, e, e1, ut_l2sq, diss_integral, l10, l12, sm_defect] {
            assert!(v.is_finite(), "non-finite trace entry at t = {t}");
        }
        assert!(e >= 0.0, "negative energy at t = {t}");
        self.times.push(t);
        self.energy.push(e);
        self.higher_energy.push(e1);
        self.ut_l2sq.push(ut_l2sq);
        self.diss_integral.push(diss_integral);
        self.l10.push(l10);
        self.l12.push(l12);
        self.sm_defect.push(sm_defect);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn energy(&self) -> &[f64] {
        &self.energy
    }

    pub fn higher_energy(&self) -> &[f64] {
        &self.higher_energy
    }

    pub fn ut_l2sq(&self) -> &[f64] {
        &self.ut_l2sq
    }

    pub fn diss_integral(&self) -> &[f64] {
        &self.diss_integral
    }

    pub fn l10(&self) -> &[f64] {
        &self.l10
    }

    pub fn l12(&self) -> &[f64] {
        &self.l12
    }

    pub fn sm_defect(&self) -> &[f64] {
        &self.sm_defect
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("empty trace")
    }

    fn interp(&self, column: &[f64], t: f64) -> Result<f64> {
        if self.is_empty() || t < self.t_start() - 1e-12 || t > self.t_end() + 1e-12 {
            return Err(Error::WindowOutOfRange { start: t, end: t });
        }
        let i = match self
            .times
            .binary_search_by(|probe| probe.partial_cmp(&t).expect("finite times"))
        {
            Ok(i) => return Ok(column[i]),
            Err(i) => i,
        };
        if i == 0 {
            return Ok(column[0]);
        }
        if i == self.times.len() {
            return Ok(*column.last().expect("nonempty"));
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = (t - t0) / (t1 - t0);
        Ok(column[i - 1] * (1.0 - w) + column[i] * w)
    }

    /// Linear interpolation of the energy at time `t`.
    pub fn energy_at(&self, t: f64) -> Result<f64> {
        self.interp(&self.energy, t)
    }
}

/// Cumulative trapezoid of `values` along `times`.
fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..times.len() {
        acc += 0.5 * (values[i - 1] + values[i]) * (times[i] - times[i - 1]);
        out.push(acc);
    }
    out
}

fn trapezoid_between(times: &[f64], values: &[f64], a: f64, b: f64) -> f64 {
    // Integrate over [a, b] assuming a, b within the sample range; the
    // partial end cells use linear interpolation.
    assert!(b >= a);
    let mut acc = 0.0;
    for i in 1..times.len() {
        let (t0, t1) = (times[i - 1], times[i]);
        if t1 <= a || t0 >= b {
            continue;
        }
        let lo = t0.max(a);
        let hi = t1.min(b);
        let v_at = |t: f64| {
            let w = (t - t0) / (t1 - t0);
            values[i - 1] * (1.0 - w) + values[i] * w
        };
        acc += 0.5 * (v_at(lo) + v_at(hi)) * (hi - lo);
    }
    acc
}

/// Max over samples of `|E(t_i) - E(0) + int_0^{t_i} E ||u_t||^2 ds|`,
/// the integral taken as the trapezoid rule over the sampled integrand.
/// Second order in the sample spacing for traces of the split scheme.
/// The identity in this form belongs to energy-coefficient damping; see
/// [`conservation_defect`] and [`constant_damping_residual`] for the
/// other regimes.
pub fn energy_identity_residual(trace: &EnergyTrace) -> f64 {
    if trace.is_empty() {
        return 0.0;
    }
    let integrand: Vec<f64> = trace
        .energy
        .iter()
        .zip(&trace.ut_l2sq)
        .map(|(e, ut)| e * ut)
        .collect();
    let integral = cumulative_trapezoid(&trace.times, &integrand);
    let e0 = trace.energy[0];
    trace
        .energy
        .iter()
        .zip(&integral)
        .map(|(e, i)| (e - e0 + i).abs())
        .fold(0.0, f64::max)
}

/// Undamped identity: `max |E(t) - E(0)|`, the splitting error alone.
pub fn conservation_defect(trace: &EnergyTrace) -> f64 {
    if trace.is_empty() {
        return 0.0;
    }
    let e0 = trace.energy[0];
    trace.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max)
}

/// Constant-coefficient identity:
/// `max |E(t) - E(0) + c int_0^t ||u_t||^2 ds|`.
pub fn constant_damping_residual(trace: &EnergyTrace, c: f64) -> f64 {
    if trace.is_empty() {
        return 0.0;
    }
    let integral = cumulative_trapezoid(&trace.times, &trace.ut_l2sq);
    let e0 = trace.energy[0];
    trace
        .energy
        .iter()
        .zip(&integral)
        .map(|(e, i)| (e - e0 + c * i).abs())
        .fold(0.0, f64::max)
}

/// Dissipation over the unit window starting at `t`:
/// `D(t)^2 = E(t) - E(t+1)`, endpoints linearly interpolated.
pub fn nakao_window(trace: &EnergyTrace, t: f64) -> Result<f64> {
    if t + 1.0 > trace.t_end() + 1e-12 {
        return Err(Error::WindowOutOfRange {
            start: t,
            end: t + 1.0,
        });
    }
    Ok(trace.energy_at(t)? - trace.energy_at(t + 1.0)?)
}

fn window_sup(trace: &EnergyTrace, t: f64) -> Result<f64> {
    let mut sup = trace.energy_at(t)?.max(trace.energy_at(t + 1.0)?);
    for (ti, e) in trace.times.iter().zip(&trace.energy) {
        if *ti > t && *ti < t + 1.0 {
            sup = sup.max(*e);
        }
    }
    Ok(sup)
}

/// Largest `sup_{[t,t+1]} E^2 / (E(t) - E(t+1))` over all unit windows
/// anchored at sample times (and at the integer grid from the trace
/// start). Windows whose drop is below `NAKAO_DEGENERATE_FLOOR * E(0)`
/// are excluded; errors if every window is degenerate.
pub fn nakao_inequality_constant(trace: &EnergyTrace) -> Result<f64> {
    if trace.is_empty() || trace.t_end() - trace.t_start() < 1.0 {
        return Err(Error::Degenerate(
            "trace shorter than one unit window".into(),
        ));
    }
    let floor = NAKAO_DEGENERATE_FLOOR * trace.energy[0];
    let mut c1: f64 = 0.0;
    let mut usable = 0usize;

    let mut starts: Vec<f64> = trace
        .times
        .iter()
        .copied()
        .filter(|&t| t + 1.0 <= trace.t_end() + 1e-12)
        .collect();
    let mut n = 0.0;
    while trace.t_start() + n + 1.0 <= trace.t_end() + 1e-12 {
        starts.push(trace.t_start() + n);
        n += 1.0;
    }

    for t in starts {
        let drop = nakao_window(trace, t)?;
        if drop <= floor {
            continue;
        }
        usable += 1;
        let sup = window_sup(trace, t)?;
        c1 = c1.max(sup * sup / drop);
    }
    if usable == 0 {
        return Err(Error::Degenerate(
            "all unit windows have degenerate dissipation".into(),
        ));
    }
    Ok(c1)
}

/// Worst-case decay sequence consistent with the difference inequality
/// `sup^2 <= C1 (E(t) - E(t+1))`: starting from `e0`, each term is the
/// positive root of `x + x^2/C1 = previous`. Positive, decreasing, and
/// `O(1/n)`: `n * out[n]` tends to `C1` from below.
pub fn nakao_envelope(e0: f64, c1: f64, windows: usize) -> Result<Vec<f64>> {
    if e0 < 0.0 || !(c1 > 0.0) {
        return Err(Error::Degenerate(format!(
            "envelope needs e0 >= 0 and c1 > 0, got {e0}, {c1}"
        )));
    }
    let mut out = Vec::with_capacity(windows + 1);
    out.push(e0);
    let mut e = e0;
    for _ in 0..windows {
        // Stable form of (c1/2)(sqrt(1 + 4e/c1) - 1).
        e = 2.0 * e / (1.0 + (1.0 + 4.0 * e / c1).sqrt());
        out.push(e);
    }
    Ok(out)
}

/// Windowed dissipation report: the integer-grid unit windows, the fitted
/// constant, the decay envelope it implies, and the domination margin.
#[derive(Debug, Clone, Serialize)]
pub struct NakaoReport {
    pub window_starts: Vec<f64>,
    pub window_drops: Vec<f64>,
    pub window_sups: Vec<f64>,
    pub c1: f64,
    /// Worst-case envelope seeded at the first window point.
    pub envelope: Vec<f64>,
    /// `min_n (envelope[n] - E(t0 + n))`: nonnegative iff the envelope
    /// dominates the measured energy at every window point.
    pub envelope_margin_min: f64,
    /// `max_n n * envelope[n]`, the measurable form of the `O(1/t)` rate.
    pub max_n_times_envelope: f64,
}

pub fn nakao_report(trace: &EnergyTrace) -> Result<NakaoReport> {
    let c1 = nakao_inequality_constant(trace)?;
    let t0 = trace.t_start();
    let mut window_starts = Vec::new();
    let mut n = 0.0;
    while t0 + n + 1.0 <= trace.t_end() + 1e-12 {
        window_starts.push(t0 + n);
        n += 1.0;
    }
    let window_drops: Vec<f64> = window_starts
        .iter()
        .map(|&t| nakao_window(trace, t))
        .collect::<Result<_>>()?;
    let window_sups: Vec<f64> = window_starts
        .iter()
        .map(|&t| window_sup(trace, t))
        .collect::<Result<_>>()?;

    let envelope = nakao_envelope(trace.energy_at(t0)?, c1, window_starts.len())?;
    let mut margin = f64::INFINITY;
    let mut max_n_en: f64 = 0.0;
    for (i, &env) in envelope.iter().enumerate() {
        let measured = trace.energy_at(t0 + i as f64)?;
        margin = margin.min(env - measured);
        max_n_en = max_n_en.max(i as f64 * env);
    }
    Ok(NakaoReport {
        window_starts,
        window_drops,
        window_sups,
        c1,
        envelope,
        envelope_margin_min: margin,
        max_n_times_envelope: max_n_en,
    })
}

/// Spacetime norm pairs checked by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StrichartzPair {
    /// `L^5_t L^10_x`
    L5L10,
    /// `L^4_t L^12_x`
    L4L12,
}

impl StrichartzPair {
    pub fn q(&self) -> f64 {
        match self {
            StrichartzPair::L5L10 => 5.0,
            StrichartzPair::L4L12 => 4.0,
        }
    }
}

/// `( int_window ||u(t)||_r^q dt )^{1/q}` by the trapezoid rule over the
/// per-sample spatial norms recorded in the trace.
pub fn strichartz_norm(
    trace: &EnergyTrace,
    pair: StrichartzPair,
    window: (f64, f64),
) -> Result<f64> {
    let (a, b) = window;
    if trace.is_empty() || a < trace.t_start() - 1e-12 || b > trace.t_end() + 1e-12 || b < a {
        return Err(Error::WindowOutOfRange { start: a, end: b });
    }
    let q = pair.q();
    let column = match pair {
        StrichartzPair::L5L10 => &trace.l10,
        StrichartzPair::L4L12 => &trace.l12,
    };
    let powered: Vec<f64> = column.iter().map(|v| v.powf(q)).collect();
    Ok(trapezoid_between(&trace.times, &powered, a, b).powf(1.0 / q))
}

/// Both spacetime norms over one interval; `q`-th powers add over
/// disjoint intervals.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StrichartzAccumulator {
    pub t_start: f64,
    pub t_end: f64,
    pub l5l10: f64,
    pub l4l12: f64,
}

impl StrichartzAccumulator {
    pub fn over(trace: &EnergyTrace, window: (f64, f64)) -> Result<Self> {
        Ok(StrichartzAccumulator {
            t_start: window.0,
            t_end: window.1,
            l5l10: strichartz_norm(trace, StrichartzPair::L5L10, window)?,
            l4l12: strichartz_norm(trace, StrichartzPair::L4L12, window)?,
        })
    }

    /// Combines adjacent intervals by `q`-th-power additivity.
    pub fn join(&self, other: &StrichartzAccumulator) -> StrichartzAccumulator {
        StrichartzAccumulator {
            t_start: self.t_start.min(other.t_start),
            t_end: self.t_end.max(other.t_end),
            l5l10: (self.l5l10.powi(5) + other.l5l10.powi(5)).powf(0.2),
            l4l12: (self.l4l12.powi(4) + other.l4l12.powi(4)).powf(0.25),
        }
    }
}

/// Power-law fit `E ~ C0 t^alpha` on a window.
#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub window: (f64, f64),
    pub alpha: f64,
    pub c0: f64,
    /// RMS residual of the log-log regression.
    pub residual: f64,
    pub samples: usize,
}

/// Least-squares fit of `log E` against `log t` over the samples inside
/// the window. Errors on nonpositive energies in the window, on windows
/// reaching `t <= 0`, and on fewer than two samples.
pub fn decay_fit(trace: &EnergyTrace, window: (f64, f64)) -> Result<DecayFit> {
    let (a, b) = window;
    if !(a > 0.0) || b <= a {
        return Err(Error::WindowOutOfRange { start: a, end: b });
    }
    let mut lt = Vec::new();
    let mut le = Vec::new();
    for (&t, &e) in trace.times.iter().zip(&trace.energy) {
        if t < a || t > b {
            continue;
        }
        if e <= 0.0 {
            return Err(Error::Degenerate(format!(
                "nonpositive energy {e} at t = {t} inside the fit window"
            )));
        }
        lt.push(t.ln());
        le.push(e.ln());
    }
    let n = lt.len();
    if n < 2 {
        return Err(Error::Degenerate(format!(
            "fit window [{a}, {b}] contains {n} samples"
        )));
    }
    let nf = n as f64;
    let mx = lt.iter().sum::<f64>() / nf;
    let my = le.iter().sum::<f64>() / nf;
    let sxx: f64 = lt.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lt.iter().zip(&le).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("zero variance in log t".into()));
    }
    let alpha = sxy / sxx;
    let intercept = my - alpha * mx;
    let residual = (lt
        .iter()
        .zip(&le)
        .map(|(x, y)| {
            let r = y - (alpha * x + intercept);
            r * r
        })
        .sum::<f64>()
        / nf)
        .sqrt();
    Ok(DecayFit {
        window,
        alpha,
        c0: intercept.exp(),
        residual,
        samples: n,
    })
}

/// Outcome of the exponential-growth bound check
/// `E1(t) <= E1(0) exp(K int_0^t ||u||_12^4)`.
#[derive(Debug, Clone, Serialize)]
pub struct GronwallCheck {
    /// Smallest constant making the bound hold on every sample
    /// (`max log(E1/E1(0)) / int ||u||_12^4`); nonpositive when `E1`
    /// never exceeds its initial value.
    pub k: f64,
    /// `max_t (E1(t) - E1(0) exp(k * int))`: nonpositive by construction.
    pub max_violation: f64,
    /// Set when `E1` never grew, so any `K >= 0` works.
    pub trivially_satisfied: bool,
    pub samples_used: usize,
}

/// Denominator floor for the fitted Gronwall constant.
pub const GRONWALL_INTEGRAL_FLOOR: f64 = 1e-10;

pub fn gronwall_check(trace: &EnergyTrace) -> Result<GronwallCheck> {
    if trace.is_empty() || trace.higher_energy[0] <= 0.0 {
        return Err(Error::Degenerate(
            "gronwall check needs E1(0) > 0".into(),
        ));
    }
    let e1_0 = trace.higher_energy[0];
    let powered: Vec<f64> = trace.l12.iter().map(|v| v.powi(4)).collect();
    let integral = cumulative_trapezoid(&trace.times, &powered);

    let mut k = f64::NEG_INFINITY;
    let mut used = 0usize;
    for i in 1..trace.len() {
        if integral[i] <= GRONWALL_INTEGRAL_FLOOR {
            continue;
        }
        used += 1;
        k = k.max((trace.higher_energy[i] / e1_0).ln() / integral[i]);
    }
    if used == 0 {
        return Err(Error::Degenerate(
            "spacetime integral never exceeded the floor".into(),
        ));
    }
    let max_violation = trace
        .higher_energy
        .iter()
        .zip(&integral)
        .map(|(e1, i)| e1 - e1_0 * (k * i).exp())
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(GronwallCheck {
        k,
        max_violation,
        trivially_satisfied: k <= 0.0,
        samples_used: used,
    })
}

/// Smallest constant `c` with `dE1/dt <= c sqrt(E0) E1^{5/2}` along the
/// sampled trace (forward differences, `E1` at the left endpoint).
/// Zero when `E1` never grows.
pub fn regular_energy_rate_check(trace: &EnergyTrace, e0: f64) -> Result<f64> {
    if trace.len() < 2 {
        return Err(Error::Degenerate("rate check needs at least two samples".into()));
    }
    if !(e0 > 0.0) {
        return Err(Error::Degenerate(format!("rate check needs E0 > 0, got {e0}")));
    }
    let mut c: f64 = 0.0;
    for i in 1..trace.len() {
        let e1 = trace.higher_energy[i - 1];
        if e1 <= 0.0 {
            continue;
        }
        let slope = (trace.higher_energy[i] - e1) / (trace.times[i] - trace.times[i - 1]);
        if slope > 0.0 {
            c = c.max(slope / (e0.sqrt() * e1.powf(2.5)));
        }
    }
    Ok(c)
}

/// Outcome of the algebraic confinement analysis for `y <= A0 + C y^5`.
#[derive(Debug, Clone, Serialize)]
pub enum BootstrapTrap {
    /// `A0` is below the peak of `y - C y^5`: the smallest positive fixed
    /// point `ceiling` confines any continuous quantity starting at 0.
    Trap { threshold: f64, ceiling: f64 },
    /// `A0` reaches the peak; the inequality confines nothing.
    NoTrap { threshold: f64 },
}

/// Analyzes the trap for `y <= a0 + c y^5`: the usable threshold is the
/// local max of `f(y) = y - c y^5` at `y_peak = (1/(5c))^{1/4}`, namely
/// `f(y_peak) = (4/5) y_peak`. Below it, the ceiling is found by
/// bisection on `[0, y_peak]`.
pub fn bootstrap_trap(a0: f64, c: f64) -> Result<BootstrapTrap> {
    if !(c > 0.0) {
        return Err(Error::Degenerate(format!("trap analysis needs C > 0, got {c}")));
    }
    if a0 < 0.0 {
        return Err(Error::Degenerate(format!("trap analysis needs A0 >= 0, got {a0}")));
    }
    let y_peak = (1.0 / (5.0 * c)).powf(0.25);
    let threshold = 0.8 * y_peak;
    if a0 >= threshold {
        return Ok(BootstrapTrap::NoTrap { threshold });
    }
    if a0 == 0.0 {
        return Ok(BootstrapTrap::Trap {
            threshold,
            ceiling: 0.0,
        });
    }
    // h(y) = y - c y^5 - a0 is increasing on [0, y_peak] with a sign
    // change, so bisection converges to the smallest positive root of
    // y = a0 + c y^5.
    let h = |y: f64| y - c * y.powi(5) - a0;
    let (mut lo, mut hi) = (0.0, y_peak);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(BootstrapTrap::Trap {
        threshold,
        ceiling: 0.5 * (lo + hi),
    })
}

/// Greedy partition of the trace into slabs whose own spacetime increment
/// `(int ||u||_10^5)^{1/5}` stays below `delta` (the trajectory increment
/// stands in for the free evolution, which is not computable from the
/// trace). Errors if a single sample interval already exceeds the budget.
pub fn slab_partition(trace: &EnergyTrace, delta: f64) -> Result<Vec<(f64, f64)>> {
    if !(delta > 0.0) {
        return Err(Error::Degenerate(format!("slab budget must be positive, got {delta}")));
    }
    if trace.len() < 2 {
        return Ok(vec![(trace.t_start(), trace.t_end())]);
    }
    let budget = delta.powi(5);
    let powered: Vec<f64> = trace.l10.iter().map(|v| v.powi(5)).collect();

    let mut slabs = Vec::new();
    let mut slab_start = trace.times[0];
    let mut acc = 0.0;
    for i in 1..trace.len() {
        let inc =
            0.5 * (powered[i - 1] + powered[i]) * (trace.times[i] - trace.times[i - 1]);
        if inc >= budget {
            return Err(Error::Degenerate(format!(
                "sample interval [{}, {}] alone exceeds the slab budget",
                trace.times[i - 1],
                trace.times[i]
            )));
        }
        if acc + inc >= budget {
            slabs.push((slab_start, trace.times[i - 1]));
            slab_start = trace.times[i - 1];
            acc = inc;
        } else {
            acc += inc;
        }
    }
    slabs.push((slab_start, trace.t_end()));
    Ok(slabs)
}

/// Smallest `mu` making the upper sandwich bound
/// `E(t) <= ((t-1)^+/mu + 1/E(0))^{-1}` hold at every sample. Errors if
/// some sample past `t = 1` has not decayed below `E(0)`.
pub fn fit_upper_mu(trace: &EnergyTrace) -> Result<f64> {
    let e0 = trace.energy[0];
    let mut mu: f64 = 0.0;
    for (&t, &e) in trace.times.iter().zip(&trace.energy) {
        if t <= 1.0 {
            continue;
        }
        if e >= e0 {
            return Err(Error::Degenerate(format!(
                "no decay by t = {t}; upper bound has no finite mu"
            )));
        }
        mu = mu.max((t - 1.0) * e * e0 / (e0 - e));
    }
    if mu == 0.0 {
        return Err(Error::Degenerate(
            "trace has no samples past t = 1".into(),
        ));
    }
    Ok(mu)
}
