//! Model parameters, potentials, the cubic nonlinearity and the per-mode
//! factorisation of the free Dirac symbol.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{sigma3_form, spinor_norm_sqr, Mat2, Spinor, C64, ZERO};
use crate::spectral_grid::{wavenumber, Domain1D};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub eps: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl ModelParams {
    pub fn new(eps: f64, lambda1: f64, lambda2: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidParameter(format!("eps must lie in (0, 1], got {eps}")));
        }
        if !(lambda1.is_finite() && lambda2.is_finite()) {
            return Err(Error::InvalidParameter("couplings must be finite".into()));
        }
        Ok(ModelParams { eps, lambda1, lambda2 })
    }

    pub fn linear(eps: f64) -> Result<Self> {
        ModelParams::new(eps, 0.0, 0.0)
    }

    pub fn is_linear(&self) -> bool {
        self.lambda1 == 0.0 && self.lambda2 == 0.0
    }
}

pub type ScalarField = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Electric potential `V(t, x)` and magnetic potential `A1(t, x)`.
#[derive(Clone)]
pub struct PotentialSpec {
    v: ScalarField,
    a1: ScalarField,
    time_independent: bool,
    constant_values: Option<(f64, f64)>,
    magnetic_free: bool,
    label: String,
}

impl PotentialSpec {
    pub fn zero() -> Self {
        PotentialSpec::constant(0.0, 0.0)
    }

    pub fn constant(v0: f64, a10: f64) -> Self {
        PotentialSpec {
            v: Arc::new(move |_, _| v0),
            a1: Arc::new(move |_, _| a10),
            time_independent: true,
            constant_values: Some((v0, a10)),
            magnetic_free: a10 == 0.0,
            label: format!("constant(V={v0}, A1={a10})"),
        }
    }

    /// Time-independent potentials given as functions of `x`.
    pub fn stationary<V, A>(v: V, a1: A) -> Self
    where
        V: Fn(f64) -> f64 + Send + Sync + 'static,
        A: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        PotentialSpec {
            v: Arc::new(move |_, x| v(x)),
            a1: Arc::new(move |_, x| a1(x)),
            time_independent: true,
            constant_values: None,
            magnetic_free: false,
            label: "stationary".into(),
        }
    }

    pub fn time_dependent<V, A>(v: V, a1: A) -> Self
    where
        V: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        A: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        PotentialSpec {
            v: Arc::new(v),
            a1: Arc::new(a1),
            time_independent: false,
            constant_values: None,
            magnetic_free: false,
            label: "time-dependent".into(),
        }
    }

    /// Declares `A1 ≡ 0`; the sampled values are replaced by zero.
    pub fn without_magnetic(mut self) -> Self {
        self.a1 = Arc::new(|_, _| 0.0);
        self.magnetic_free = true;
        if let Some((v0, _)) = self.constant_values {
            self.constant_values = Some((v0, 0.0));
        }
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn v(&self, t: f64, x: f64) -> f64 {
        (self.v)(t, x)
    }

    pub fn a1(&self, t: f64, x: f64) -> f64 {
        (self.a1)(t, x)
    }

    pub fn is_time_independent(&self) -> bool {
        self.time_independent
    }

    pub fn constant_values(&self) -> Option<(f64, f64)> {
        self.constant_values
    }

    pub fn is_magnetic_free(&self) -> bool {
        self.magnetic_free
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn sample_v(&self, domain: &Domain1D, t: f64) -> Vec<f64> {
        (0..domain.m()).map(|j| self.v(t, domain.node(j))).collect()
    }

    pub fn sample_a1(&self, domain: &Domain1D, t: f64) -> Vec<f64> {
        (0..domain.m()).map(|j| self.a1(t, domain.node(j))).collect()
    }
}

impl fmt::Debug for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialSpec")
            .field("label", &self.label)
            .field("time_independent", &self.time_independent)
            .field("constant_values", &self.constant_values)
            .field("magnetic_free", &self.magnetic_free)
            .finish()
    }
}

/// Diagonal of `F(φ)`: `(λ2ρ + λ1s, λ2ρ − λ1s)` with `s = φ*σ3φ`.
#[inline]
pub fn nonlinear_diag(phi: &Spinor, params: &ModelParams) -> (f64, f64) {
    let rho = spinor_norm_sqr(phi);
    let s = sigma3_form(phi);
    (params.lambda2 * rho + params.lambda1 * s, params.lambda2 * rho - params.lambda1 * s)
}

/// `F(φ) = λ1(φ*σ3φ)σ3 + λ2|φ|²I`
pub fn nonlinearity(phi: &Spinor, params: &ModelParams) -> Mat2 {
    let (p, m) = nonlinear_diag(phi, params);
    Mat2::real(p, 0.0, 0.0, m)
}

/// `G(φ) = (λ1/2)(φ*σ3φ)² + (λ2/2)|φ|⁴`
pub fn energy_density(phi: &Spinor, params: &ModelParams) -> f64 {
    let s = sigma3_form(phi);
    let rho = spinor_norm_sqr(phi);
    0.5 * params.lambda1 * s * s + 0.5 * params.lambda2 * rho * rho
}

/// `Γ = μεσ1 + σ3 = Q D Qᵀ` for one Fourier mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeFactorization {
    pub mu: f64,
    pub delta: f64,
    pub gamma: Mat2,
    pub q: Mat2,
    pub d: Mat2,
}

impl ModeFactorization {
    pub fn from_wavenumber(mu: f64, eps: f64) -> Self {
        let em = eps * mu;
        let delta = (1.0 + em * em).sqrt();
        let norm = (2.0 * delta * (1.0 + delta)).sqrt();
        let (c, s) = ((1.0 + delta) / norm, em / norm);
        ModeFactorization {
            mu,
            delta,
            gamma: Mat2::real(1.0, em, em, -1.0),
            q: Mat2::real(c, -s, s, c),
            d: Mat2::real(delta, 0.0, 0.0, -delta),
        }
    }

    /// `Γ⁻¹ = Γ/δ²`
    pub fn gamma_inv(&self) -> Mat2 {
        self.gamma.scale_re(1.0 / (self.delta * self.delta))
    }
}

pub fn mode_factorization(domain: &Domain1D, eps: f64, l: i64) -> Result<ModeFactorization> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidParameter(format!("eps must lie in (0, 1], got {eps}")));
    }
    Ok(ModeFactorization::from_wavenumber(wavenumber(domain, l)?, eps))
}

/// `e^{−isΓ/ε²} = Q diag(e^{−isδ/ε²}, e^{isδ/ε²}) Qᵀ`
pub fn free_mode_propagator(fact: &ModeFactorization, s: f64, eps: f64) -> Mat2 {
    let theta = s * fact.delta / (eps * eps);
    let phase = Mat2::diag(C64::from_polar(1.0, -theta), C64::from_polar(1.0, theta));
    fact.q * phase * fact.q.transpose()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

/// `ω = V⁰ + λ2|B|² ± (1/ε²)·sqrt([1 + ε²λ1(B*σ3B)]² + ε²|k − εA1⁰|²)`
pub fn dispersion_omega(k: f64, b: &Spinor, params: &ModelParams, v0: f64, a10: f64, branch: Branch) -> f64 {
    let eps2 = params.eps * params.eps;
    let mass = 1.0 + eps2 * params.lambda1 * sigma3_form(b);
    let kin = k - params.eps * a10;
    v0 + params.lambda2 * spinor_norm_sqr(b) + branch.sign() / eps2 * (mass * mass + eps2 * kin * kin).sqrt()
}

/// `B e^{i(kx − ωt)}`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWave {
    pub k: f64,
    pub omega: f64,
    pub b: Spinor,
}

impl PlaneWave {
    pub fn at(&self, t: f64, x: f64) -> Spinor {
        let phase = C64::from_polar(1.0, self.k * x - self.omega * t);
        [self.b[0] * phase, self.b[1] * phase]
    }

    /// `‖ωB − H(B)B‖`
    pub fn residual(&self, params: &ModelParams, v0: f64, a10: f64) -> f64 {
        let hb = plane_wave_matrix(self.k, &self.b, params, v0, a10).apply(&self.b);
        let r = [self.b[0] * self.omega - hb[0], self.b[1] * self.omega - hb[1]];
        spinor_norm_sqr(&r).sqrt()
    }
}

fn plane_wave_matrix(k: f64, b: &Spinor, params: &ModelParams, v0: f64, a10: f64) -> Mat2 {
    let eps = params.eps;
    let off = k / eps - a10;
    let (np, nm) = nonlinear_diag(b, params);
    let d = 1.0 / (eps * eps);
    Mat2::real(d + v0 + np, off, off, -d + v0 + nm)
}

/// Unit eigenvector of the real symmetric `[[p, c], [c, q]]` for the larger
/// (`Plus`) or smaller (`Minus`) eigenvalue.
fn symmetric_eigvec(p: f64, c: f64, q: f64, branch: Branch) -> [f64; 2] {
    let d = 0.5 * (p - q);
    let r = d.hypot(c);
    let (x, y) = if r == 0.0 {
        (1.0, 0.0)
    } else if d >= 0.0 {
        (d + r, c)
    } else {
        (c, r - d)
    };
    let n = x.hypot(y);
    let (x, y) = (x / n, y / n);
    match branch {
        Branch::Plus => [x, y],
        Branch::Minus => [-y, x],
    }
}

const PLANE_WAVE_MAX_ITER: usize = 200;
const PLANE_WAVE_TOL: f64 = 1e-10;

/// Self-consistent plane wave with `|B| = amplitude_scale`, by plain
/// fixed-point iteration on the branch eigenvector.
pub fn plane_wave_solution(
    k: f64,
    amplitude_scale: f64,
    params: &ModelParams,
    v0: f64,
    a10: f64,
    branch: Branch,
) -> Result<PlaneWave> {
    if !(amplitude_scale >= 0.0 && amplitude_scale.is_finite()) {
        return Err(Error::InvalidParameter(format!("amplitude must be finite and >= 0, got {amplitude_scale}")));
    }
    let mut b: Spinor = [ZERO, ZERO];
    let mut residual = f64::INFINITY;
    for _ in 0..PLANE_WAVE_MAX_ITER {
        let h = plane_wave_matrix(k, &b, params, v0, a10).0;
        let v = symmetric_eigvec(h[0][0].re, h[0][1].re, h[1][1].re, branch);
        b = [C64::new(amplitude_scale * v[0], 0.0), C64::new(amplitude_scale * v[1], 0.0)];
        let wave = PlaneWave { k, omega: dispersion_omega(k, &b, params, v0, a10, branch), b };
        residual = wave.residual(params, v0, a10);
        if residual <= PLANE_WAVE_TOL * amplitude_scale.max(f64::MIN_POSITIVE) || amplitude_scale == 0.0 {
            return Ok(wave);
        }
    }
    Err(Error::PlaneWaveNoConvergence { iterations: PLANE_WAVE_MAX_ITER, residual })
}
