//! Rectangular-box Dirichlet spectral calculus.
//!
//! On a box `(0,L_1) x .. x (0,L_d)` the Dirichlet Laplacian is diagonal in
//! the product sine basis
//!
//! `phi_k(x) = prod_i sqrt(2/L_i) sin(k_i pi x_i / L_i)`,   `k_i >= 1`,
//!
//! with eigenvalue `lambda_k^2 = sum_i (k_i pi / L_i)^2`. The basis is
//! orthonormal in `L^2`, so every Parseval constant is 1: for a field with
//! coefficients `c_k`, `||f||_{L^2}^2 = sum_k c_k^2`.
//!
//! Physical-space evaluation lives on the interior tensor grid
//! `x_j = j L/(M+1)`, `j = 1..M`, with `M = padding * N` points per axis.
//! Boundary values are never stored: the sine representation vanishes on
//! the boundary structurally. The equal-weight quadrature rule
//! `int f ~ prod_i (L_i/(M_i+1)) * sum_j f(x_j)` integrates exactly every
//! sine polynomial that vanishes on the boundary with harmonics below
//! `2(M+1)` per axis, which is what makes padding 3 exact for quintic
//! products and sixth powers of band-limited fields.

use crate::error::{Error, Result};
use crate::transform::{self, Shape};
use std::f64::consts::PI;
use std::sync::Arc;

pub const MAX_DIM: usize = 3;

/// Multi-index of a sine mode. Axes beyond the domain dimension are held
/// at 1 and ignored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ModeIndex {
    k: [usize; MAX_DIM],
}

impl ModeIndex {
    pub fn new(components: &[usize]) -> Self {
        assert!(
            !components.is_empty() && components.len() <= MAX_DIM,
            "mode index needs 1 to 3 components"
        );
        let mut k = [1usize; MAX_DIM];
        k[..components.len()].copy_from_slice(components);
        ModeIndex { k }
    }

    pub fn one_d(k: usize) -> Self {
        Self::new(&[k])
    }

    pub fn component(&self, axis: usize) -> usize {
        self.k[axis]
    }

    pub fn components(&self, dim: usize) -> &[usize] {
        &self.k[..dim]
    }
}

/// Rectangular box with homogeneous Dirichlet conditions and a fixed
/// truncation of `modes_per_axis` sine modes per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lengths: Vec<f64>,
    modes_per_axis: usize,
    /// lambda_k^2 for every retained mode, in flat (row-major) order.
    lambda_sq: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lengths: &[f64], modes_per_axis: usize) -> Result<Arc<Self>> {
        if lengths.is_empty() || lengths.len() > MAX_DIM {
            return Err(Error::BadDimension(lengths.len()));
        }
        if let Some(&bad) = lengths.iter().find(|&&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::BadLength(bad));
        }
        if modes_per_axis < 4 {
            return Err(Error::TooFewModes(modes_per_axis));
        }
        let mut domain = BoxDomain {
            lengths: lengths.to_vec(),
            modes_per_axis,
            lambda_sq: Vec::new(),
        };
        domain.lambda_sq = domain.build_lambda_table();
        Ok(Arc::new(domain))
    }

    /// Cube `(0,pi)^d`, the default geometry (eigenvalues are then sums of
    /// squared integers).
    pub fn unit_pi(dim: usize, modes_per_axis: usize) -> Result<Arc<Self>> {
        BoxDomain::new(&vec![PI; dim], modes_per_axis)
    }

    pub fn dim(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn modes_per_axis(&self) -> usize {
        self.modes_per_axis
    }

    pub fn mode_count(&self) -> usize {
        self.modes_per_axis.pow(self.dim() as u32)
    }

    fn build_lambda_table(&self) -> Vec<f64> {
        let n = self.modes_per_axis;
        let d = self.dim();
        let per_axis: Vec<Vec<f64>> = (0..d)
            .map(|a| {
                (1..=n)
                    .map(|k| (k as f64 * PI / self.lengths[a]).powi(2))
                    .collect()
            })
            .collect();
        let mut table = vec![0.0; self.mode_count()];
        for (flat, slot) in table.iter_mut().enumerate() {
            let mut rem = flat;
            let mut sum = 0.0;
            for a in (0..d).rev() {
                sum += per_axis[a][rem % n];
                rem /= n;
            }
            *slot = sum;
        }
        table
    }

    /// lambda_k^2 = sum_i (k_i pi / L_i)^2.
    pub fn eigenvalue(&self, index: ModeIndex) -> Result<f64> {
        self.check_index(index)?;
        Ok(self
            .lengths
            .iter()
            .zip(index.components(self.dim()))
            .map(|(&l, &k)| (k as f64 * PI / l).powi(2))
            .sum())
    }

    /// Precomputed lambda_k^2 by flat coefficient position.
    pub fn lambda_sq(&self) -> &[f64] {
        &self.lambda_sq
    }

    pub fn lambda_max(&self) -> f64 {
        // Componentwise monotone, so the corner mode is the largest.
        self.lambda_sq[self.mode_count() - 1].sqrt()
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_sq[0].sqrt()
    }

    fn check_index(&self, index: ModeIndex) -> Result<()> {
        let n = self.modes_per_axis;
        let d = self.dim();
        if index.components(d).iter().any(|&k| k < 1 || k > n)
            || index.k[d..].iter().any(|&k| k != 1)
        {
            return Err(Error::ModeOutOfRange {
                index: index.k.to_vec(),
                modes: n,
            });
        }
        Ok(())
    }

    pub fn flat_index(&self, index: ModeIndex) -> Result<usize> {
        self.check_index(index)?;
        let n = self.modes_per_axis;
        Ok(index
            .components(self.dim())
            .iter()
            .fold(0, |acc, &k| acc * n + (k - 1)))
    }

    pub fn mode_indices(&self) -> impl Iterator<Item = ModeIndex> + '_ {
        let n = self.modes_per_axis;
        let d = self.dim();
        (0..self.mode_count()).map(move |flat| {
            let mut k = [1usize; MAX_DIM];
            let mut rem = flat;
            for a in (0..d).rev() {
                k[a] = rem % n + 1;
                rem /= n;
            }
            ModeIndex { k }
        })
    }

    fn coeff_shape(&self) -> Shape {
        let mut shape = [1usize; MAX_DIM];
        for a in 0..self.dim() {
            shape[a] = self.modes_per_axis;
        }
        shape
    }

    fn grid_shape(&self, padding: usize) -> Shape {
        let mut shape = [1usize; MAX_DIM];
        for a in 0..self.dim() {
            shape[a] = padding * self.modes_per_axis;
        }
        shape
    }

    /// Quadrature weight of the padded interior grid,
    /// `prod_i L_i / (M_i + 1)`.
    pub fn quadrature_weight(&self, padding: usize) -> f64 {
        let m = padding * self.modes_per_axis;
        self.lengths.iter().map(|&l| l / (m as f64 + 1.0)).product()
    }
}

/// Real coefficients over the retained sine modes, flat row-major layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    domain: Arc<BoxDomain>,
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn zeros(domain: &Arc<BoxDomain>) -> Self {
        SpectralField {
            domain: Arc::clone(domain),
            coeffs: vec![0.0; domain.mode_count()],
        }
    }

    pub fn from_coeffs(domain: &Arc<BoxDomain>, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), domain.mode_count(), "coefficient length");
        SpectralField {
            domain: Arc::clone(domain),
            coeffs,
        }
    }

    /// Single basis mode with the given coefficient.
    pub fn delta(domain: &Arc<BoxDomain>, index: ModeIndex, amplitude: f64) -> Result<Self> {
        let mut f = Self::zeros(domain);
        let flat = domain.flat_index(index)?;
        f.coeffs[flat] = amplitude;
        Ok(f)
    }

    pub fn domain(&self) -> &Arc<BoxDomain> {
        &self.domain
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn same_domain(&self, other: &SpectralField) -> bool {
        Arc::ptr_eq(&self.domain, &other.domain) || *self.domain == *other.domain
    }

    /// Parseval L2 norm, `sqrt(sum c_k^2)` (basis is orthonormal).
    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// `||grad f||^2 = sum lambda_k^2 c_k^2`.
    pub fn h1_seminorm_sq(&self) -> f64 {
        self.coeffs
            .iter()
            .zip(self.domain.lambda_sq())
            .map(|(c, l2)| l2 * c * c)
            .sum()
    }

    /// `sum (1 + lambda_k^2)^s c_k^2`, the spectral H^s norm squared.
    pub fn hs_norm_sq(&self, s: f64) -> f64 {
        self.coeffs
            .iter()
            .zip(self.domain.lambda_sq())
            .map(|(c, l2)| (1.0 + l2).powf(s) * c * c)
            .sum()
    }

    pub fn inner(&self, other: &SpectralField) -> f64 {
        assert!(self.same_domain(other), "inner product across domains");
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn scaled(&self, factor: f64) -> SpectralField {
        let mut out = self.clone();
        for c in &mut out.coeffs {
            *c *= factor;
        }
        out
    }

    pub fn add(&self, other: &SpectralField) -> SpectralField {
        assert!(self.same_domain(other), "field sum across domains");
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &SpectralField) -> SpectralField {
        assert!(self.same_domain(other), "field difference across domains");
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *a -= b;
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Evaluates the sine series on the padded interior grid. Exact for
    /// band-limited fields at every padding >= 1.
    pub fn to_physical(&self, padding: usize) -> Result<PhysicalField> {
        if padding < 1 {
            return Err(Error::BadPadding);
        }
        let n = self.domain.modes_per_axis();
        let m = padding * n;
        let mut data = self.coeffs.clone();
        let mut shape = self.domain.coeff_shape();
        for axis in 0..self.domain.dim() {
            let (next, next_shape) =
                transform::transform_axis(&data, &shape, axis, m, transform::synth_line);
            data = next;
            shape = next_shape;
        }
        let scale: f64 = self
            .domain
            .lengths()
            .iter()
            .map(|&l| (2.0 / l).sqrt())
            .product();
        for v in &mut data {
            *v *= scale;
        }
        Ok(PhysicalField {
            domain: Arc::clone(&self.domain),
            padding,
            values: data,
        })
    }

    /// Quadrature approximation of the L^p norm on the padded grid.
    ///
    /// Exact (up to round-off) whenever `|f|^p` is a sine polynomial of
    /// padded degree: p = 2 at any padding, p = 6 at padding >= 3 for
    /// band-limited f. For other p the error is controlled by padding.
    pub fn lp_norm(&self, p: f64, padding: usize) -> Result<f64> {
        assert!(p >= 1.0, "lp_norm needs p >= 1");
        let phys = self.to_physical(padding)?;
        Ok(phys.lp_norm(p))
    }
}

/// Samples on the interior tensor grid of `padding * N` points per axis.
/// Values on the box boundary are identically zero by construction and
/// never stored.
#[derive(Debug, Clone)]
pub struct PhysicalField {
    domain: Arc<BoxDomain>,
    padding: usize,
    values: Vec<f64>,
}

impl PhysicalField {
    pub fn domain(&self) -> &Arc<BoxDomain> {
        &self.domain
    }

    pub fn padding(&self) -> usize {
        self.padding
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Pointwise map, e.g. the quintic power.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> PhysicalField {
        let mut out = self.clone();
        for v in &mut out.values {
            *v = f(*v);
        }
        out
    }

    /// Coordinates of grid node `j` (flat row-major) on the given axis.
    pub fn grid_coord(&self, flat: usize, axis: usize) -> f64 {
        let d = self.domain.dim();
        let m = self.padding * self.domain.modes_per_axis();
        let mut rem = flat;
        let mut idx = 0;
        for a in (0..d).rev() {
            if a == axis {
                idx = rem % m;
            }
            rem /= m;
        }
        (idx as f64 + 1.0) * self.domain.lengths()[axis] / (m as f64 + 1.0)
    }

    /// L^2-orthogonal projection onto the retained modes, computed by the
    /// exact sine quadrature of the padded grid.
    pub fn to_spectral(&self) -> Result<SpectralField> {
        let n = self.domain.modes_per_axis();
        let m = self.padding * n;
        let expected = m.pow(self.domain.dim() as u32);
        if self.values.len() != expected {
            return Err(Error::ResolutionMismatch {
                got: self.values.len(),
                expected,
            });
        }
        let mut data = self.values.clone();
        let mut shape = self.domain.grid_shape(self.padding);
        for axis in 0..self.domain.dim() {
            let (next, next_shape) =
                transform::transform_axis(&data, &shape, axis, n, transform::analyze_line);
            data = next;
            shape = next_shape;
        }
        // Per axis: 2/(M+1) discrete orthogonality and 1/sqrt(2/L) basis factor.
        let scale: f64 = self
            .domain
            .lengths()
            .iter()
            .map(|&l| 2.0 / (m as f64 + 1.0) * (l / 2.0).sqrt())
            .product();
        for v in &mut data {
            *v *= scale;
        }
        Ok(SpectralField {
            domain: Arc::clone(&self.domain),
            coeffs: data,
        })
    }

    /// Quadrature of `int |f|^p` with the equal interior weights, then the
    /// 1/p root. Reduction order is sequential over the flat grid index.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let w = self.domain.quadrature_weight(self.padding);
        let sum: f64 = if p == 2.0 {
            self.values.iter().map(|v| v * v).sum()
        } else {
            self.values.iter().map(|v| v.abs().powf(p)).sum()
        };
        (w * sum).powf(1.0 / p)
    }

    /// Quadrature inner product of two grids at matching resolution.
    pub fn inner(&self, other: &PhysicalField) -> f64 {
        assert_eq!(self.values.len(), other.values.len(), "grid mismatch");
        let w = self.domain.quadrature_weight(self.padding);
        w * self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
    }
}

/// Applies the (positive) Dirichlet Laplacian spectrally: output
/// coefficients are `lambda_k^2 c_k`, i.e. the field `-Delta f`.
pub fn apply_laplacian(f: &SpectralField) -> SpectralField {
    let mut out = f.clone();
    for (c, &l2) in out.coeffs.iter_mut().zip(f.domain.lambda_sq()) {
        *c *= l2;
    }
    out
}
