//! Uniform periodic grid on `[a, b)` and the discrete Fourier machinery
//! shared by every solver.
//!
//! Storage follows the usual FFT layout (mode `l` at index `l mod M`); the
//! public API addresses modes by their signed index `l ∈ [−M/2, M/2)`.
//! Node `x_M` is the periodic image of `x_0` and is never stored.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::linalg::{spinor_norm_sqr, Spinor, C64, I, ZERO};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain1D {
    a: f64,
    b: f64,
    m: usize,
    h: f64,
}

impl Domain1D {
    pub fn new(a: f64, b: f64, m: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::InvalidDomain(format!("need finite a < b, got ({a}, {b})")));
        }
        if m < 4 || !m.is_multiple_of(2) {
            return Err(Error::InvalidDomain(format!("M must be even and >= 4, got {m}")));
        }
        Ok(Domain1D { a, b, m, h: (b - a) / m as f64 })
    }

    /// Builds the grid from a mesh size; `(b − a)/h` must be an even integer.
    pub fn with_mesh_size(a: f64, b: f64, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidDomain(format!("mesh size must be positive, got {h}")));
        }
        let ratio = (b - a) / h;
        let m = ratio.round();
        if (ratio - m).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidDomain(format!(
                "h = {h} does not divide the interval ({a}, {b})"
            )));
        }
        Domain1D::new(a, b, m as usize)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn node(&self, j: usize) -> f64 {
        self.a + j as f64 * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.m).map(|j| self.node(j)).collect()
    }

    /// Storage slot of signed mode `l`.
    pub fn mode_slot(&self, l: i64) -> Result<usize> {
        let half = (self.m / 2) as i64;
        if l < -half || l >= half {
            return Err(Error::ModeOutOfRange { l, m: self.m });
        }
        Ok(l.rem_euclid(self.m as i64) as usize)
    }

    /// Signed mode held in storage slot `k`.
    pub fn slot_mode(&self, k: usize) -> i64 {
        let half = self.m / 2;
        if k < half {
            k as i64
        } else {
            k as i64 - self.m as i64
        }
    }

    /// Coarse grids whose nodes are a subset of this grid's nodes.
    pub fn stride_to(&self, coarse: &Domain1D) -> Option<usize> {
        if coarse.a != self.a || coarse.b != self.b || coarse.m == 0 || !self.m.is_multiple_of(coarse.m) {
            return None;
        }
        Some(self.m / coarse.m)
    }
}

impl fmt::Display for Domain1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}) with M = {} (h = {})", self.a, self.b, self.m, self.h)
    }
}

/// Two-component field sampled at the `M` grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorGrid {
    domain: Domain1D,
    phi1: Vec<C64>,
    phi2: Vec<C64>,
}

impl SpinorGrid {
    pub fn new(domain: Domain1D, phi1: Vec<C64>, phi2: Vec<C64>) -> Result<Self> {
        if phi1.len() != domain.m() || phi2.len() != domain.m() {
            return Err(Error::MalformedField(format!(
                "expected {} nodes per component, got {} and {}",
                domain.m(),
                phi1.len(),
                phi2.len()
            )));
        }
        let grid = SpinorGrid { domain, phi1, phi2 };
        if !grid.is_finite() {
            return Err(Error::MalformedField("non-finite entries".into()));
        }
        Ok(grid)
    }

    pub fn zeros(domain: Domain1D) -> Self {
        SpinorGrid { domain, phi1: vec![ZERO; domain.m()], phi2: vec![ZERO; domain.m()] }
    }

    pub fn from_fn(domain: Domain1D, f: impl Fn(f64) -> Spinor) -> Self {
        let (phi1, phi2) = (0..domain.m()).map(|j| f(domain.node(j))).map(|v| (v[0], v[1])).unzip();
        SpinorGrid { domain, phi1, phi2 }
    }

    pub fn from_nodes(domain: Domain1D, nodes: &[Spinor]) -> Result<Self> {
        let (phi1, phi2) = nodes.iter().map(|v| (v[0], v[1])).unzip();
        SpinorGrid::new(domain, phi1, phi2)
    }

    pub fn domain(&self) -> &Domain1D {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.phi1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi1.is_empty()
    }

    pub fn node(&self, j: usize) -> Spinor {
        [self.phi1[j], self.phi2[j]]
    }

    pub fn set_node(&mut self, j: usize, v: Spinor) {
        self.phi1[j] = v[0];
        self.phi2[j] = v[1];
    }

    pub fn nodes(&self) -> impl Iterator<Item = Spinor> + '_ {
        self.phi1.iter().zip(&self.phi2).map(|(&p, &q)| [p, q])
    }

    pub fn components(&self) -> (&[C64], &[C64]) {
        (&self.phi1, &self.phi2)
    }

    pub fn components_mut(&mut self) -> (&mut [C64], &mut [C64]) {
        (&mut self.phi1, &mut self.phi2)
    }

    pub fn is_finite(&self) -> bool {
        self.phi1.iter().chain(&self.phi2).all(|z| z.is_finite())
    }

    /// Applies `f` to every node in place.
    pub fn map_nodes(&mut self, mut f: impl FnMut(usize, Spinor) -> Spinor) {
        for j in 0..self.phi1.len() {
            let v = f(j, [self.phi1[j], self.phi2[j]]);
            self.phi1[j] = v[0];
            self.phi2[j] = v[1];
        }
    }

    pub fn scaled(&self, s: C64) -> SpinorGrid {
        let mut out = self.clone();
        out.map_nodes(|_, v| [v[0] * s, v[1] * s]);
        out
    }

    /// `self + s·other`; both fields must live on the same grid.
    pub fn axpy(&self, s: C64, other: &SpinorGrid) -> SpinorGrid {
        debug_assert_eq!(self.domain, other.domain);
        let mut out = self.clone();
        out.map_nodes(|j, v| {
            let w = other.node(j);
            [v[0] + s * w[0], v[1] + s * w[1]]
        });
        out
    }

    /// Plain `Σ_j |Φ_j|²` without the mesh weight.
    pub fn sum_norm_sqr(&self) -> f64 {
        self.nodes().map(|v| spinor_norm_sqr(&v)).sum()
    }

    /// Restriction to a coarser nested grid by exact node striding.
    pub fn restrict_to(&self, coarse: &Domain1D) -> Result<SpinorGrid> {
        let stride = self.domain.stride_to(coarse).ok_or(Error::IncompatibleResolution {
            numeric: coarse.m(),
            reference: self.domain.m(),
        })?;
        Ok(SpinorGrid {
            domain: *coarse,
            phi1: self.phi1.iter().step_by(stride).copied().collect(),
            phi2: self.phi2.iter().step_by(stride).copied().collect(),
        })
    }
}

/// Discrete interpolation coefficients `Ũ_l`, one spinor per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    domain: Domain1D,
    c1: Vec<C64>,
    c2: Vec<C64>,
}

impl SpectrumGrid {
    pub fn zeros(domain: Domain1D) -> Self {
        SpectrumGrid { domain, c1: vec![ZERO; domain.m()], c2: vec![ZERO; domain.m()] }
    }

    pub fn domain(&self) -> &Domain1D {
        &self.domain
    }

    pub fn coefficient(&self, l: i64) -> Result<Spinor> {
        let k = self.domain.mode_slot(l)?;
        Ok([self.c1[k], self.c2[k]])
    }

    pub fn set_coefficient(&mut self, l: i64, v: Spinor) -> Result<()> {
        let k = self.domain.mode_slot(l)?;
        self.c1[k] = v[0];
        self.c2[k] = v[1];
        Ok(())
    }

    /// `(l, Ũ_l)` in storage order.
    pub fn modes(&self) -> impl Iterator<Item = (i64, Spinor)> + '_ {
        (0..self.c1.len()).map(move |k| (self.domain.slot_mode(k), [self.c1[k], self.c2[k]]))
    }

    pub fn sum_norm_sqr(&self) -> f64 {
        self.c1.iter().chain(&self.c2).map(|z| z.norm_sqr()).sum()
    }
}

/// Cached forward/inverse FFT plans for one grid size.
///
/// `forward` produces `Ũ_l = (1/M) Σ_j U_j e^{−2πijl/M}`; `backward` is the
/// unnormalised inverse, so the pair round-trips exactly up to roundoff.
pub struct FourierPlan {
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<C64>,
}

impl FourierPlan {
    pub fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        FourierPlan { m, fwd, inv, scratch: vec![ZERO; len] }
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn forward(&mut self, data: &mut [C64]) {
        self.fwd.process_with_scratch(data, &mut self.scratch);
        let inv_m = 1.0 / self.m as f64;
        data.iter_mut().for_each(|z| *z *= inv_m);
    }

    pub fn backward(&mut self, data: &mut [C64]) {
        self.inv.process_with_scratch(data, &mut self.scratch);
    }

    /// Transforms both components of a field in place into coefficient layout.
    pub fn forward_field(&mut self, field: &mut SpinorGrid) {
        let (p, q) = field.components_mut();
        self.forward(p);
        self.forward(q);
    }

    pub fn backward_field(&mut self, field: &mut SpinorGrid) {
        let (p, q) = field.components_mut();
        self.backward(p);
        self.backward(q);
    }
}

impl fmt::Debug for FourierPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FourierPlan").field("m", &self.m).finish()
    }
}

pub fn forward_transform(field: &SpinorGrid) -> SpectrumGrid {
    let mut plan = FourierPlan::new(field.domain.m());
    let mut c1 = field.phi1.clone();
    let mut c2 = field.phi2.clone();
    plan.forward(&mut c1);
    plan.forward(&mut c2);
    SpectrumGrid { domain: field.domain, c1, c2 }
}

pub fn backward_transform(spec: &SpectrumGrid) -> SpinorGrid {
    let mut plan = FourierPlan::new(spec.domain.m());
    let mut phi1 = spec.c1.clone();
    let mut phi2 = spec.c2.clone();
    plan.backward(&mut phi1);
    plan.backward(&mut phi2);
    SpinorGrid { domain: spec.domain, phi1, phi2 }
}

/// `μ_l = 2πl/(b − a)`
pub fn wavenumber(domain: &Domain1D, l: i64) -> Result<f64> {
    domain.mode_slot(l)?;
    Ok(2.0 * PI * l as f64 / domain.length())
}

/// Wavenumbers in storage order.
pub fn wavenumbers(domain: &Domain1D) -> Vec<f64> {
    (0..domain.m())
        .map(|k| 2.0 * PI * domain.slot_mode(k) as f64 / domain.length())
        .collect()
}

/// Derivative multipliers `iμ_l` in storage order, zero at the Nyquist mode.
pub(crate) fn derivative_symbols(domain: &Domain1D) -> Vec<C64> {
    let nyquist = domain.m() / 2;
    wavenumbers(domain)
        .into_iter()
        .enumerate()
        .map(|(k, mu)| if k == nyquist { ZERO } else { I * mu })
        .collect()
}

/// Componentwise derivative of the trigonometric interpolant.
pub fn spectral_derivative(field: &SpinorGrid) -> SpinorGrid {
    let mut plan = FourierPlan::new(field.domain.m());
    spectral_derivative_with(&mut plan, field)
}

pub(crate) fn spectral_derivative_with(plan: &mut FourierPlan, field: &SpinorGrid) -> SpinorGrid {
    let symbols = derivative_symbols(&field.domain);
    let mut out = field.clone();
    plan.forward_field(&mut out);
    let (p, q) = out.components_mut();
    for ((a, b), s) in p.iter_mut().zip(q.iter_mut()).zip(&symbols) {
        *a *= s;
        *b *= s;
    }
    plan.backward_field(&mut out);
    out
}
