//! Sharp and smooth spectral cutoffs.
//!
//! Both act coefficientwise on the sine expansion: the sharp cutoff at
//! level `m` keeps modes with `lambda_k <= m` (the classical Galerkin
//! projector onto `V_m`), the smooth cutoff weighs mode `k` by
//! `chi(lambda_k / m)` with a fixed `C^inf` transition profile. The
//! functions below measure the operator properties that distinguish the
//! two: L^2 contraction, commutation with the Laplacian, the `m^s`
//! regularization gain, strong convergence to the identity, and empirical
//! L^p operator ratios on randomized fields.
//!
//! Sharp truncation is well behaved in L^2 but not in L^p, p != 2; the
//! smooth cutoff is the fix. At fixed resolution that breakdown is not
//! observable as unboundedness, so `lp_operator_ratio` only tabulates the
//! measured ratios for both kinds and makes no claim beyond them.

use crate::domain::{BoxDomain, SpectralField};
use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::sync::Arc;

/// Even smooth transition profile: 1 on |s| <= 1, 0 on |s| >= 2, glued by
/// the standard `exp(-1/t)` partition on 1 < |s| < 2. `C^inf`, exactly
/// compactly supported, monotone nonincreasing on [1, 2].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CutoffProfile;

impl CutoffProfile {
    pub fn eval(&self, s: f64) -> f64 {
        let a = s.abs();
        if a <= 1.0 {
            1.0
        } else if a >= 2.0 {
            0.0
        } else {
            let up = bump(2.0 - a);
            let down = bump(a - 1.0);
            up / (up + down)
        }
    }
}

fn bump(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultiplierKind {
    /// Indicator of `lambda_k <= m`: an orthogonal projection.
    Sharp,
    /// `chi(lambda_k / m)` with the smooth profile.
    Smooth,
}

/// A spectral cutoff at scale `m > 0`, compared against `lambda_k`
/// (not `lambda_k^2`). A sharp cutoff with `m` between two consecutive
/// eigenvalues is exactly the Galerkin projector of that dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierSpec {
    kind: MultiplierKind,
    level: f64,
    profile: CutoffProfile,
}

impl MultiplierSpec {
    pub fn sharp(level: f64) -> Result<Self> {
        Self::new(MultiplierKind::Sharp, level)
    }

    pub fn smooth(level: f64) -> Result<Self> {
        Self::new(MultiplierKind::Smooth, level)
    }

    fn new(kind: MultiplierKind, level: f64) -> Result<Self> {
        if !(level > 0.0) || !level.is_finite() {
            return Err(Error::BadLevel(level));
        }
        Ok(MultiplierSpec {
            kind,
            level,
            profile: CutoffProfile,
        })
    }

    pub fn kind(&self) -> MultiplierKind {
        self.kind
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    /// Weight applied to a mode with frequency `lambda` (= sqrt of the
    /// Laplacian eigenvalue). Always in [0, 1].
    pub fn weight(&self, lambda: f64) -> f64 {
        match self.kind {
            MultiplierKind::Sharp => {
                if lambda <= self.level {
                    1.0
                } else {
                    0.0
                }
            }
            MultiplierKind::Smooth => self.profile.eval(lambda / self.level),
        }
    }
}

/// Coefficientwise application: `c_k <- w(lambda_k) c_k`.
pub fn apply_multiplier(spec: &MultiplierSpec, f: &SpectralField) -> SpectralField {
    let mut out = f.clone();
    let lambda_sq = f.domain().lambda_sq();
    for (c, &l2) in out.coeffs_mut().iter_mut().zip(lambda_sq) {
        *c *= spec.weight(l2.sqrt());
    }
    out
}

/// Max over samples of `||S_m v||_2 / ||v||_2`. Errors on a zero sample.
pub fn l2_contraction_defect(spec: &MultiplierSpec, samples: &[SpectralField]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for v in samples {
        let denom = v.l2_norm();
        if denom == 0.0 {
            return Err(Error::Degenerate("zero sample in contraction check".into()));
        }
        worst = worst.max(apply_multiplier(spec, v).l2_norm() / denom);
    }
    Ok(worst)
}

/// Max over samples of `||(-Delta)(S_m v) - S_m((-Delta) v)||_2`.
pub fn commutation_defect(spec: &MultiplierSpec, samples: &[SpectralField]) -> f64 {
    use crate::domain::apply_laplacian;
    samples
        .iter()
        .map(|v| {
            let a = apply_laplacian(&apply_multiplier(spec, v));
            let b = apply_multiplier(spec, &apply_laplacian(v));
            a.sub(&b).l2_norm()
        })
        .fold(0.0, f64::max)
    }

/// Max over samples of `||S_m v||_{H^s} / (m^s ||v||_2)`; the H^s norm is
/// the spectral `sum (1+lambda^2)^s c^2`. Finite and bounded in `m` for
/// the smooth kind because the weight vanishes above `2m`.
pub fn regularization_ratio(
    spec: &MultiplierSpec,
    s: f64,
    samples: &[SpectralField],
) -> Result<f64> {
    assert!(s >= 0.0, "H^s order must be nonnegative");
    if spec.kind != MultiplierKind::Smooth {
        return Err(Error::Degenerate(
            "regularization ratio is defined for the smooth kind".into(),
        ));
    }
    let mut worst: f64 = 0.0;
    for v in samples {
        let denom = spec.level.powf(s) * v.l2_norm();
        if denom == 0.0 {
            return Err(Error::Degenerate("zero sample in regularization check".into()));
        }
        worst = worst.max(apply_multiplier(spec, v).hs_norm_sq(s).sqrt() / denom);
    }
    Ok(worst)
}

/// `||S_m v - v||_2` for each level of an increasing family. Reaches
/// exactly zero once `m` (sharp) or `2m` coverage (smooth: `m >=
/// lambda_max` of the band) swallows the band of `v`.
pub fn convergence_defect(
    kind: MultiplierKind,
    levels: &[f64],
    v: &SpectralField,
) -> Result<Vec<f64>> {
    levels
        .iter()
        .map(|&m| {
            let spec = MultiplierSpec::new(kind, m)?;
            Ok(apply_multiplier(&spec, v).sub(v).l2_norm())
        })
        .collect()
}

/// Empirical max of `||S_m v||_p / ||v||_p` over seeded random fields.
/// Norms are padded-grid quadratures (padding 3); numerator and
/// denominator share the rule, so the ratio is meaningful even where the
/// quadrature is approximate.
pub fn lp_operator_ratio(
    spec: &MultiplierSpec,
    p: f64,
    domain: &Arc<BoxDomain>,
    sample_count: usize,
    seed: u64,
) -> Result<f64> {
    assert!(p > 1.0 && p.is_finite(), "need 1 < p < inf");
    let padding = 3;
    let mut worst: f64 = 0.0;
    for i in 0..sample_count {
        let v = random_field(domain, seed.wrapping_add(i as u64), None);
        let denom = v.lp_norm(p, padding)?;
        if denom == 0.0 {
            continue;
        }
        worst = worst.max(apply_multiplier(spec, &v).lp_norm(p, padding)? / denom);
    }
    Ok(worst)
}

/// Seeded Gaussian field; `band` restricts to modes with `lambda <= band`.
/// Coefficients are damped by `1/lambda^2` so samples look like H^1 data.
pub fn random_field(domain: &Arc<BoxDomain>, seed: u64, band: Option<f64>) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = SpectralField::zeros(domain);
    let lambda_sq = domain.lambda_sq().to_vec();
    for (c, l2) in f.coeffs_mut().iter_mut().zip(lambda_sq) {
        let g: f64 = StandardNormal.sample(&mut rng);
        let keep = band.map_or(true, |b| l2.sqrt() <= b);
        if keep {
            *c = g / l2;
        }
    }
    f
}
