//! High-precision reference integrator for small 1D mode systems.
//!
//! Independent of the simulator's transform pipeline on purpose: the
//! quintic term is evaluated by exact trigonometric product expansion
//! (products of sines reduce to integer-harmonic sine/cosine series with
//! rational recombination), and time integration is adaptive
//! Dormand-Prince 5(4) at tight tolerance rather than operator splitting.
//! Agreement between the two paths validates both.

use anyhow::{bail, Result};
use btwave::domain::BoxDomain;
use btwave::dynamics::{Damping, ModelConfig, State};

/// Sine/cosine series with integer harmonics of `pi x / L`; index =
/// harmonic number. `sin[0]` is unused (sin 0 = 0), `cos[0]` is the
/// constant term.
#[derive(Debug, Clone)]
struct TrigSeries {
    sin: Vec<f64>,
    cos: Vec<f64>,
}

impl TrigSeries {
    fn from_sines(coeffs: &[f64]) -> Self {
        let mut sin = vec![0.0; coeffs.len() + 1];
        sin[1..].copy_from_slice(coeffs);
        TrigSeries {
            sin,
            cos: vec![0.0],
        }
    }

    fn add_sin(&mut self, harmonic: i64, value: f64) {
        if harmonic == 0 || value == 0.0 {
            return;
        }
        let (idx, sign) = if harmonic > 0 {
            (harmonic as usize, 1.0)
        } else {
            ((-harmonic) as usize, -1.0)
        };
        if self.sin.len() <= idx {
            self.sin.resize(idx + 1, 0.0);
        }
        self.sin[idx] += sign * value;
    }

    fn add_cos(&mut self, harmonic: i64, value: f64) {
        let idx = harmonic.unsigned_abs() as usize;
        if self.cos.len() <= idx {
            self.cos.resize(idx + 1, 0.0);
        }
        self.cos[idx] += value;
    }

    /// Product via the sin/cos product-to-sum identities.
    fn mul(&self, other: &TrigSeries) -> TrigSeries {
        let mut out = TrigSeries {
            sin: vec![0.0],
            cos: vec![0.0],
        };
        for (a, &va) in self.sin.iter().enumerate().filter(|(_, v)| **v != 0.0) {
            let a = a as i64;
            for (b, &vb) in other.sin.iter().enumerate().filter(|(_, v)| **v != 0.0) {
                let b = b as i64;
                // sin a sin b = (cos(a-b) - cos(a+b)) / 2
                out.add_cos(a - b, 0.5 * va * vb);
                out.add_cos(a + b, -0.5 * va * vb);
            }
            for (b, &vb) in other.cos.iter().enumerate().filter(|(_, v)| **v != 0.0) {
                let b = b as i64;
                // sin a cos b = (sin(a+b) + sin(a-b)) / 2
                out.add_sin(a + b, 0.5 * va * vb);
                out.add_sin(a - b, 0.5 * va * vb);
            }
        }
        for (a, &va) in self.cos.iter().enumerate().filter(|(_, v)| **v != 0.0) {
            let a = a as i64;
            for (b, &vb) in other.sin.iter().enumerate().filter(|(_, v)| **v != 0.0) {
                let b = b as i64;
                out.add_sin(a + b, 0.5 * va * vb);
                out.add_sin(b - a, 0.5 * va * vb);
            }
            for (b, &vb) in other.cos.iter().enumerate().filter(|(_, v)| **v != 0.0) {
                let b = b as i64;
                // cos a cos b = (cos(a-b) + cos(a+b)) / 2
                out.add_cos(a - b, 0.5 * va * vb);
                out.add_cos(a + b, 0.5 * va * vb);
            }
        }
        out
    }
}

/// The 1D reference system for `n` retained modes.
pub struct ReferenceSystem {
    n: usize,
    length: f64,
    lambda_sq: Vec<f64>,
    weights: Vec<f64>,
    quintic: bool,
    damping: Damping,
    include_l6: bool,
}

impl ReferenceSystem {
    pub fn new(domain: &BoxDomain, model: &ModelConfig) -> Result<Self> {
        if domain.dim() != 1 {
            bail!("reference integrator handles 1D domains only");
        }
        let n = domain.modes_per_axis();
        let lambda_sq = domain.lambda_sq().to_vec();
        let weights = lambda_sq
            .iter()
            .map(|l2| model.projector.weight(l2.sqrt()))
            .collect();
        Ok(ReferenceSystem {
            n,
            length: domain.lengths()[0],
            lambda_sq,
            weights,
            quintic: model.quintic,
            damping: model.damping,
            include_l6: model.quintic && model.potential_in_energy,
        })
    }

    /// Exact basis coefficients of `u^5` and the exact `int u^6`, from the
    /// trig expansion of `u = sum a_k sqrt(2/L) sin(k pi x/L)`.
    fn quintic_and_l6(&self, a: &[f64]) -> (Vec<f64>, f64) {
        let norm = (2.0 / self.length).sqrt();
        let scaled: Vec<f64> = a.iter().map(|c| c * norm).collect();
        let u = TrigSeries::from_sines(&scaled);
        let u2 = u.mul(&u);
        let u4 = u2.mul(&u2);
        let u5 = u4.mul(&u);
        // <u^5, phi_k> = sqrt(2/L) * (L/2) * s_k.
        let mut coeffs = vec![0.0; self.n];
        for (k, slot) in coeffs.iter_mut().enumerate() {
            let harmonic = k + 1;
            if harmonic < u5.sin.len() {
                *slot = norm * (self.length / 2.0) * u5.sin[harmonic];
            }
        }
        // int u^6 = L * constant term of the cosine series of u^6.
        let u6 = u4.mul(&u2);
        let l6 = self.length * u6.cos[0];
        (coeffs, l6)
    }

    pub fn energy(&self, y: &[f64]) -> f64 {
        let (a, b) = y.split_at(self.n);
        let quad = 0.5
            * (a.iter()
                .zip(&self.lambda_sq)
                .map(|(c, l2)| l2 * c * c)
                .sum::<f64>()
                + b.iter().map(|c| c * c).sum::<f64>());
        if self.include_l6 {
            let (_, l6) = self.quintic_and_l6(a);
            quad + l6 / 6.0
        } else {
            quad
        }
    }

    fn rhs(&self, y: &[f64], dy: &mut [f64]) {
        let (a, b) = y.split_at(self.n);
        let damping_coeff = match self.damping {
            Damping::None => 0.0,
            Damping::Constant(c) => c,
            Damping::EnergyCoefficient => self.energy(y),
        };
        let quintic = if self.quintic {
            let (q, _) = self.quintic_and_l6(a);
            Some(q)
        } else {
            None
        };
        for k in 0..self.n {
            dy[k] = b[k];
            let mut acc = -self.lambda_sq[k] * a[k] - damping_coeff * b[k];
            if let Some(q) = &quintic {
                acc -= self.weights[k] * q[k];
            }
            dy[self.n + k] = acc;
        }
    }

    /// Integrates from `state` to each requested time with adaptive
    /// Dormand-Prince 5(4) at `tol` (both absolute and relative).
    /// Returns the `(a, b)` vector at each time.
    pub fn integrate(&self, state: &State, times: &[f64], tol: f64) -> Result<Vec<Vec<f64>>> {
        let mut y: Vec<f64> = state
            .u
            .coeffs()
            .iter()
            .chain(state.v.coeffs())
            .copied()
            .collect();
        let mut t = state.t;
        let mut h: f64 = 1e-3;
        let mut out = Vec::with_capacity(times.len());
        for &target in times {
            if target < t - 1e-12 {
                bail!("reference times must be nondecreasing");
            }
            while t < target {
                h = h.min(target - t).max(1e-14);
                let (y_new, err) = self.dopri5_step(&y, h);
                let scale = tol + tol * norm_inf(&y).max(norm_inf(&y_new));
                let ratio = err / scale;
                if ratio <= 1.0 {
                    t += h;
                    y = y_new;
                }
                let factor = if ratio > 0.0 {
                    (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
                } else {
                    5.0
                };
                h *= factor;
                if h < 1e-13 {
                    bail!("reference integrator step size underflow at t = {t}");
                }
            }
            out.push(y.clone());
        }
        Ok(out)
    }

    fn dopri5_step(&self, y: &[f64], h: f64) -> (Vec<f64>, f64) {
        const A: [[f64; 6]; 6] = [
            [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
            [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
            [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
            [
                19372.0 / 6561.0,
                -25360.0 / 2187.0,
                64448.0 / 6561.0,
                -212.0 / 729.0,
                0.0,
                0.0,
            ],
            [
                9017.0 / 3168.0,
                -355.0 / 33.0,
                46732.0 / 5247.0,
                49.0 / 176.0,
                -5103.0 / 18656.0,
                0.0,
            ],
            [
                35.0 / 384.0,
                0.0,
                500.0 / 1113.0,
                125.0 / 192.0,
                -2187.0 / 6784.0,
                11.0 / 84.0,
            ],
        ];
        const B5: [f64; 7] = [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
            0.0,
        ];
        const B4: [f64; 7] = [
            5179.0 / 57600.0,
            0.0,
            7571.0 / 16695.0,
            393.0 / 640.0,
            -92097.0 / 339200.0,
            187.0 / 2100.0,
            1.0 / 40.0,
        ];

        let dim = y.len();
        let mut k = vec![vec![0.0; dim]; 7];
        self.rhs(y, &mut k[0]);
        let mut stage = vec![0.0; dim];
        for s in 1..7 {
            for (i, slot) in stage.iter_mut().enumerate() {
                let mut acc = 0.0;
                for j in 0..s {
                    acc += A[s - 1][j] * k[j][i];
                }
                *slot = y[i] + h * acc;
            }
            let mut ks = std::mem::take(&mut k[s]);
            self.rhs(&stage, &mut ks);
            k[s] = ks;
        }

        let mut y5 = vec![0.0; dim];
        let mut err: f64 = 0.0;
        for i in 0..dim {
            let mut acc5 = 0.0;
            let mut acc4 = 0.0;
            for s in 0..7 {
                acc5 += B5[s] * k[s][i];
                acc4 += B4[s] * k[s][i];
            }
            y5[i] = y[i] + h * acc5;
            err = err.max((h * (acc5 - acc4)).abs());
        }
        (y5, err)
    }
}

fn norm_inf(y: &[f64]) -> f64 {
    y.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Sup over sample times of the max coefficient deviation between the
/// split-step trajectory and the reference.
pub fn max_deviation(reference: &[Vec<f64>], states: &[State]) -> f64 {
    let mut worst: f64 = 0.0;
    for (y, s) in reference.iter().zip(states) {
        let n = s.u.coeffs().len();
        for (i, &c) in s.u.coeffs().iter().enumerate() {
            worst = worst.max((c - y[i]).abs());
        }
        for (i, &c) in s.v.coeffs().iter().enumerate() {
            worst = worst.max((c - y[n + i]).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use btwave::domain::{ModeIndex, SpectralField};
    use btwave::dynamics::{quintic_term, state_from_modes};
    use btwave::multiplier::MultiplierSpec;
    use std::f64::consts::PI;

    fn keep_all(domain: &BoxDomain) -> MultiplierSpec {
        MultiplierSpec::sharp(domain.lambda_max() + 0.5).unwrap()
    }

    #[test]
    fn trig_quintic_matches_transform_pipeline() {
        // Two independent exact routes to the projected quintic term.
        let domain = BoxDomain::unit_pi(1, 4).unwrap();
        let model = ModelConfig::new(true, Damping::EnergyCoefficient, keep_all(&domain));
        let sys = ReferenceSystem::new(&domain, &model).unwrap();
        let a = [0.31, -0.42, 0.11, 0.05];
        let (q_trig, l6_trig) = sys.quintic_and_l6(&a);

        let u = SpectralField::from_coeffs(&domain, a.to_vec());
        let q_dst = quintic_term(&u, &model.projector, 3).unwrap();
        for (x, y) in q_trig.iter().zip(q_dst.coeffs()) {
            assert!((x - y).abs() <= 1e-13, "quintic mismatch: {x} vs {y}");
        }
        let l6_dst = u.lp_norm(6.0, 3).unwrap().powi(6);
        assert!((l6_trig - l6_dst).abs() <= 1e-13 * l6_trig.abs().max(1.0));
    }

    #[test]
    fn sin_quintic_identity() {
        // u = sin x: u^5 = (10 sin x - 5 sin 3x + sin 5x)/16.
        let domain = BoxDomain::unit_pi(1, 8).unwrap();
        let model = ModelConfig::new(true, Damping::None, keep_all(&domain));
        let sys = ReferenceSystem::new(&domain, &model).unwrap();
        let mut a = vec![0.0; 8];
        a[0] = (PI / 2.0).sqrt(); // plain sin x
        let (q, l6) = sys.quintic_and_l6(&a);
        let norm = (PI / 2.0).sqrt();
        assert!((q[0] - 10.0 / 16.0 * norm).abs() < 1e-14);
        assert!((q[2] + 5.0 / 16.0 * norm).abs() < 1e-14);
        assert!((q[4] - 1.0 / 16.0 * norm).abs() < 1e-14);
        assert!((l6 - 5.0 * PI / 16.0).abs() < 1e-14);
    }

    #[test]
    fn dopri_reproduces_harmonic_oscillator() {
        let domain = BoxDomain::unit_pi(1, 4).unwrap();
        let model = ModelConfig::new(false, Damping::None, keep_all(&domain));
        let sys = ReferenceSystem::new(&domain, &model).unwrap();
        let state = state_from_modes(&domain, &[(ModeIndex::one_d(2), 1.0, 0.0)]).unwrap();
        let times: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let sols = sys.integrate(&state, &times, 1e-12).unwrap();
        for (&t, y) in times.iter().zip(&sols) {
            // Mode 2: u(t) = cos(2t), v(t) = -2 sin(2t).
            assert!((y[1] - (2.0 * t).cos()).abs() < 1e-9, "u at t={t}");
            assert!((y[5] + 2.0 * (2.0 * t).sin()).abs() < 1e-9, "v at t={t}");
        }
    }

    #[test]
    fn dopri_matches_closed_form_damping() {
        // Pure kinetic single mode with u = 0 stays at u ~ 0 only
        // briefly; instead check energy decay against the exact scalar
        // flow over a short horizon where u barely moves is not exact,
        // so use the full system invariant: energy is nonincreasing and
        // the lower bound holds.
        let domain = BoxDomain::unit_pi(1, 4).unwrap();
        let model = ModelConfig::new(false, Damping::EnergyCoefficient, keep_all(&domain));
        let sys = ReferenceSystem::new(&domain, &model).unwrap();
        let state = state_from_modes(&domain, &[(ModeIndex::one_d(1), 1.0, 1.0)]).unwrap();
        let y0: Vec<f64> = state
            .u
            .coeffs()
            .iter()
            .chain(state.v.coeffs())
            .copied()
            .collect();
        let e0 = sys.energy(&y0);
        let times: Vec<f64> = (1..=20).map(|i| i as f64 * 0.5).collect();
        let sols = sys.integrate(&state, &times, 1e-12).unwrap();
        let mut prev = e0;
        for (&t, y) in times.iter().zip(&sols) {
            let e = sys.energy(y);
            assert!(e <= prev * (1.0 + 1e-10));
            assert!(e >= (1.0 / e0 + 2.0 * t).recip() * (1.0 - 1e-9));
            prev = e;
        }
    }
}
