//! Strang time-splitting Fourier pseudospectral stepper.
//!
//! One step is `free(τ/2) ∘ pointwise(τ) ∘ free(τ/2)`. The free flow is exact
//! per Fourier mode; the pointwise flow integrates `V − A1σ1 + F(Φ)` exactly
//! at every node, either in one piece (two-flow form) or as a nested Strang
//! sandwich of the potential and nonlinear sub-flows (three-flow form).

use std::f64::consts::FRAC_1_SQRT_2;

use crate::dirac_model::{free_mode_propagator, nonlinear_diag, ModeFactorization, ModelParams, PotentialSpec};
use crate::error::{Error, Result};
use crate::linalg::{Mat2, Spinor, C64};
use crate::observables::{step_count, Cadence, EnergyKind, RunTrace, TraceRecorder};
use crate::spectral_grid::{wavenumbers, Domain1D, FourierPlan, SpinorGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsfpVariant {
    TwoFlow,
    ThreeFlow,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    /// `τ·V(x)`; time-independent potentials only.
    Exact,
    Simpson,
}

/// Nesting of the three-flow sandwich.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SandwichOrder {
    /// potential(τ/2) ∘ nonlinear(τ) ∘ potential(τ/2)
    #[default]
    PotentialOuter,
    /// nonlinear(τ/2) ∘ potential(τ) ∘ nonlinear(τ/2)
    NonlinearOuter,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsfpConfig {
    pub tau: f64,
    pub variant: TsfpVariant,
    pub quadrature: Quadrature,
    pub sandwich: SandwichOrder,
}

impl TsfpConfig {
    /// `Auto` variant; exact potential integrals when the potentials allow it.
    pub fn new(tau: f64, potentials: &PotentialSpec) -> Self {
        let quadrature = if potentials.is_time_independent() { Quadrature::Exact } else { Quadrature::Simpson };
        TsfpConfig { tau, variant: TsfpVariant::Auto, quadrature, sandwich: SandwichOrder::default() }
    }

    pub fn with_variant(mut self, variant: TsfpVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_sandwich(mut self, sandwich: SandwichOrder) -> Self {
        self.sandwich = sandwich;
        self
    }

    pub fn with_quadrature(mut self, quadrature: Quadrature) -> Self {
        self.quadrature = quadrature;
        self
    }

    /// Concrete variant for this problem; never returns `Auto`.
    pub fn resolve_variant(&self, params: &ModelParams, potentials: &PotentialSpec) -> Result<TsfpVariant> {
        let two_ok = params.lambda1 == 0.0 || potentials.is_magnetic_free();
        match self.variant {
            TsfpVariant::Auto if two_ok => Ok(TsfpVariant::TwoFlow),
            TsfpVariant::Auto => Ok(TsfpVariant::ThreeFlow),
            TsfpVariant::TwoFlow if !two_ok => Err(Error::Config(
                "two-flow splitting needs lambda1 = 0 or a vanishing magnetic potential".into(),
            )),
            v => Ok(v),
        }
    }

    fn validate(&self, potentials: &PotentialSpec) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {}", self.tau)));
        }
        if self.quadrature == Quadrature::Exact && !potentials.is_time_independent() {
            return Err(Error::Config("exact potential integrals need time-independent potentials".into()));
        }
        Ok(())
    }
}

/// `(∫V dt, ∫A1 dt)` over `[t_n, t_n + τ]` at node `x`.
pub fn potential_time_integrals(t_n: f64, tau: f64, potentials: &PotentialSpec, x: f64, quadrature: Quadrature) -> Result<(f64, f64)> {
    match quadrature {
        Quadrature::Exact => {
            if !potentials.is_time_independent() {
                return Err(Error::Config("exact potential integrals need time-independent potentials".into()));
            }
            Ok((tau * potentials.v(t_n, x), tau * potentials.a1(t_n, x)))
        }
        Quadrature::Simpson => {
            let simpson = |f: &dyn Fn(f64) -> f64| tau / 6.0 * (f(t_n) + 4.0 * f(t_n + 0.5 * tau) + f(t_n + tau));
            Ok((simpson(&|t| potentials.v(t, x)), simpson(&|t| potentials.a1(t, x))))
        }
    }
}

/// Per-node factor `P e^{−iΛ} Pᵀ` with `Λ = diag(Λ₊, Λ₋)` and `P ∈ {I, P⁽⁰⁾}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointFlowFactor {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    /// `true` selects `P⁽⁰⁾ = [[1/√2, 1/√2], [−1/√2, 1/√2]]`.
    pub rotated: bool,
}

impl PointFlowFactor {
    pub fn p0() -> Mat2 {
        let s = FRAC_1_SQRT_2;
        Mat2::real(s, s, -s, s)
    }

    pub fn p(&self) -> Mat2 {
        if self.rotated {
            PointFlowFactor::p0()
        } else {
            Mat2::identity()
        }
    }

    pub fn matrix(&self) -> Mat2 {
        let e = Mat2::diag(C64::from_polar(1.0, -self.lambda_plus), C64::from_polar(1.0, -self.lambda_minus));
        self.p() * e * self.p().transpose()
    }

    #[inline]
    pub fn apply(&self, v: &Spinor) -> Spinor {
        let ep = C64::from_polar(1.0, -self.lambda_plus);
        let em = C64::from_polar(1.0, -self.lambda_minus);
        if self.rotated {
            // both 1/√2 factors folded into an exact ½
            let u1 = (v[0] - v[1]) * ep;
            let u2 = (v[0] + v[1]) * em;
            [(u1 + u2) * 0.5, (u2 - u1) * 0.5]
        } else {
            [v[0] * ep, v[1] * em]
        }
    }
}

/// Factor of the two-flow update at one node, from the densities of its input.
pub fn two_flow_factor(phi: &Spinor, v1: f64, a1: f64, tau: f64, params: &ModelParams) -> PointFlowFactor {
    let (np, nm) = nonlinear_diag(phi, params);
    if a1 == 0.0 {
        PointFlowFactor { lambda_plus: v1 + tau * np, lambda_minus: v1 + tau * nm, rotated: false }
    } else {
        // λ1 = 0 here, so np = nm = λ2ρ
        PointFlowFactor { lambda_plus: v1 + tau * np + a1, lambda_minus: v1 + tau * nm - a1, rotated: true }
    }
}

#[inline]
fn nonlinear_node(phi: &Spinor, duration: f64, params: &ModelParams) -> Spinor {
    let (np, nm) = nonlinear_diag(phi, params);
    PointFlowFactor { lambda_plus: duration * np, lambda_minus: duration * nm, rotated: false }.apply(phi)
}

/// `e^{−iθ(V1 − A1σ1)}` at one node.
#[inline]
fn potential_node(phi: &Spinor, v1: f64, a1: f64, theta: f64) -> Spinor {
    PointFlowFactor { lambda_plus: theta * (v1 + a1), lambda_minus: theta * (v1 - a1), rotated: a1 != 0.0 }.apply(phi)
}

#[inline]
fn three_flow_node(phi: &Spinor, v1: f64, a1: f64, tau: f64, params: &ModelParams, order: SandwichOrder) -> Spinor {
    match order {
        SandwichOrder::PotentialOuter => {
            let a = potential_node(phi, v1, a1, 0.5);
            let b = nonlinear_node(&a, tau, params);
            potential_node(&b, v1, a1, 0.5)
        }
        SandwichOrder::NonlinearOuter => {
            let a = nonlinear_node(phi, 0.5 * tau, params);
            let b = potential_node(&a, v1, a1, 1.0);
            nonlinear_node(&b, 0.5 * tau, params)
        }
    }
}

fn node_integrals(field: &SpinorGrid, t_n: f64, tau: f64, potentials: &PotentialSpec, quadrature: Quadrature) -> Result<Vec<(f64, f64)>> {
    let d = field.domain();
    (0..d.m()).map(|j| potential_time_integrals(t_n, tau, potentials, d.node(j), quadrature)).collect()
}

/// Two-flow pointwise update; requires `λ1 = 0` or `A1 ≡ 0`.
pub fn potential_flow_two(
    field: &SpinorGrid,
    t_n: f64,
    tau: f64,
    params: &ModelParams,
    potentials: &PotentialSpec,
    quadrature: Quadrature,
) -> Result<SpinorGrid> {
    let ints = node_integrals(field, t_n, tau, potentials, quadrature)?;
    if params.lambda1 != 0.0 && ints.iter().any(|&(_, a)| a != 0.0) {
        return Err(Error::Config("two-flow splitting needs lambda1 = 0 or a vanishing magnetic potential".into()));
    }
    let mut out = field.clone();
    out.map_nodes(|j, v| two_flow_factor(&v, ints[j].0, ints[j].1, tau, params).apply(&v));
    Ok(out)
}

/// Three-flow pointwise update: nested Strang composition of the nonlinear
/// and potential sub-flows.
pub fn potential_flow_three(
    field: &SpinorGrid,
    t_n: f64,
    tau: f64,
    params: &ModelParams,
    potentials: &PotentialSpec,
    quadrature: Quadrature,
    order: SandwichOrder,
) -> Result<SpinorGrid> {
    let ints = node_integrals(field, t_n, tau, potentials, quadrature)?;
    let mut out = field.clone();
    out.map_nodes(|j, v| three_flow_node(&v, ints[j].0, ints[j].1, tau, params, order));
    Ok(out)
}

/// Per-mode propagators `e^{−isΓ_l/ε²}` in storage order.
pub(crate) fn free_propagators(domain: &Domain1D, s: f64, eps: f64) -> Vec<Mat2> {
    wavenumbers(domain)
        .into_iter()
        .map(|mu| free_mode_propagator(&ModeFactorization::from_wavenumber(mu, eps), s, eps))
        .collect()
}

pub(crate) fn apply_mode_matrices(plan: &mut FourierPlan, field: &mut SpinorGrid, mats: &[Mat2]) {
    plan.forward_field(field);
    let (p, q) = field.components_mut();
    for ((a, b), m) in p.iter_mut().zip(q.iter_mut()).zip(mats) {
        let v = m.apply(&[*a, *b]);
        *a = v[0];
        *b = v[1];
    }
    plan.backward_field(field);
}

/// Exact free flow over `τ/2`.
pub fn free_half_step(field: &SpinorGrid, tau: f64, eps: f64) -> SpinorGrid {
    let mut plan = FourierPlan::new(field.domain().m());
    let mut out = field.clone();
    apply_mode_matrices(&mut plan, &mut out, &free_propagators(field.domain(), 0.5 * tau, eps));
    out
}

#[derive(Debug, Clone)]
pub struct TsfpState {
    pub field: SpinorGrid,
    pub step_index: usize,
    pub time: f64,
}

impl TsfpState {
    pub fn initial(field: SpinorGrid) -> Self {
        TsfpState { field, step_index: 0, time: 0.0 }
    }
}

/// Reusable stepper holding the FFT plan, the mode propagators and, for
/// time-independent potentials, the node integrals.
pub struct TsfpStepper {
    domain: Domain1D,
    params: ModelParams,
    potentials: PotentialSpec,
    config: TsfpConfig,
    variant: TsfpVariant,
    plan: FourierPlan,
    half: Vec<Mat2>,
    full: Vec<Mat2>,
    cached: Option<Vec<(f64, f64)>>,
}

impl TsfpStepper {
    pub fn new(domain: Domain1D, params: ModelParams, potentials: PotentialSpec, config: TsfpConfig) -> Result<Self> {
        config.validate(&potentials)?;
        let variant = config.resolve_variant(&params, &potentials)?;
        let cached = if potentials.is_time_independent() {
            let probe = SpinorGrid::zeros(domain);
            Some(node_integrals(&probe, 0.0, config.tau, &potentials, config.quadrature)?)
        } else {
            None
        };
        if variant == TsfpVariant::TwoFlow && params.lambda1 != 0.0 {
            if let Some(ints) = &cached {
                if ints.iter().any(|&(_, a)| a != 0.0) {
                    return Err(Error::Config(
                        "two-flow splitting needs lambda1 = 0 or a vanishing magnetic potential".into(),
                    ));
                }
            }
        }
        Ok(TsfpStepper {
            domain,
            params,
            half: free_propagators(&domain, 0.5 * config.tau, params.eps),
            full: free_propagators(&domain, config.tau, params.eps),
            plan: FourierPlan::new(domain.m()),
            potentials,
            config,
            variant,
            cached,
        })
    }

    pub fn variant(&self) -> TsfpVariant {
        self.variant
    }

    pub fn config(&self) -> &TsfpConfig {
        &self.config
    }

    fn pointwise(&mut self, field: &mut SpinorGrid, t_n: f64) -> Result<()> {
        let tau = self.config.tau;
        let owned;
        let ints = match &self.cached {
            Some(c) => c,
            None => {
                owned = node_integrals(field, t_n, tau, &self.potentials, self.config.quadrature)?;
                if self.variant == TsfpVariant::TwoFlow && self.params.lambda1 != 0.0 && owned.iter().any(|&(_, a)| a != 0.0) {
                    return Err(Error::Config(
                        "two-flow splitting needs lambda1 = 0 or a vanishing magnetic potential".into(),
                    ));
                }
                &owned
            }
        };
        let params = &self.params;
        let order = self.config.sandwich;
        match self.variant {
            TsfpVariant::ThreeFlow => field.map_nodes(|j, v| three_flow_node(&v, ints[j].0, ints[j].1, tau, params, order)),
            _ => field.map_nodes(|j, v| two_flow_factor(&v, ints[j].0, ints[j].1, tau, params).apply(&v)),
        }
        Ok(())
    }

    pub fn step(&mut self, state: &mut TsfpState) -> Result<()> {
        let t_n = state.step_index as f64 * self.config.tau;
        apply_mode_matrices(&mut self.plan, &mut state.field, &self.half);
        self.pointwise(&mut state.field, t_n)?;
        apply_mode_matrices(&mut self.plan, &mut state.field, &self.half);
        state.step_index += 1;
        state.time = state.step_index as f64 * self.config.tau;
        Ok(())
    }

    /// Runs to `t_final`, merging adjacent free half steps between recorded
    /// states into one full free step.
    pub fn run(&mut self, initial: &SpinorGrid, t_final: f64, cadence: Cadence) -> Result<RunTrace> {
        if initial.domain() != &self.domain {
            return Err(Error::MalformedField(format!("initial field lives on {}, stepper on {}", initial.domain(), self.domain)));
        }
        let n = step_count(t_final, self.config.tau)?;
        let tau = self.config.tau;
        let potentials = self.potentials.clone();
        let params = self.params;
        let mut rec = TraceRecorder::new(&params, &potentials, EnergyKind::Spectral, cadence, n);
        let mut field = initial.clone();
        rec.record(0, 0.0, &field);
        let mut open = false;
        for k in 0..n {
            let lead = if open { &self.full } else { &self.half };
            apply_mode_matrices(&mut self.plan, &mut field, lead);
            self.pointwise(&mut field, k as f64 * tau)?;
            if rec.wants(k + 1) {
                apply_mode_matrices(&mut self.plan, &mut field, &self.half);
                open = false;
                rec.record(k + 1, (k + 1) as f64 * tau, &field);
            } else {
                open = true;
            }
        }
        if open {
            apply_mode_matrices(&mut self.plan, &mut field, &self.half);
        }
        if !field.is_finite() {
            return Err(Error::MalformedField("TSFP produced non-finite values".into()));
        }
        Ok(rec.finish(field, n as f64 * tau))
    }
}

/// One Strang step.
pub fn tsfp_step(state: &TsfpState, params: &ModelParams, potentials: &PotentialSpec, config: &TsfpConfig) -> Result<TsfpState> {
    let mut stepper = TsfpStepper::new(*state.field.domain(), *params, potentials.clone(), *config)?;
    let mut next = state.clone();
    stepper.step(&mut next)?;
    Ok(next)
}

pub fn tsfp_run(
    initial: &SpinorGrid,
    t_final: f64,
    params: &ModelParams,
    potentials: &PotentialSpec,
    config: &TsfpConfig,
    cadence: Cadence,
) -> Result<RunTrace> {
    TsfpStepper::new(*initial.domain(), *params, potentials.clone(), *config)?.run(initial, t_final, cadence)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{spinor_norm_sqr, sigma3_form, I, ONE, ZERO};
    use crate::observables::discrete_mass;
    use crate::spectral_grid::{backward_transform, forward_transform, wavenumber, SpectrumGrid};
    use proptest::prelude::*;

    fn dom(m: usize) -> Domain1D {
        Domain1D::new(-16.0, 16.0, m).unwrap()
    }

    fn params(eps: f64, l1: f64, l2: f64) -> ModelParams {
        ModelParams::new(eps, l1, l2).unwrap()
    }

    fn gaussian(d: Domain1D) -> SpinorGrid {
        SpinorGrid::from_fn(d, |x| {
            [C64::new((-x * x / 2.0).exp(), 0.0), C64::new((-(x - 1.0) * (x - 1.0) / 2.0).exp(), 0.0)]
        })
    }

    fn benchmark_potentials() -> PotentialSpec {
        PotentialSpec::stationary(|x| (1.0 - x) / (1.0 + x * x), |x| (1.0 + x) * (1.0 + x) / (1.0 + x * x))
    }

    fn max_diff(a: &SpinorGrid, b: &SpinorGrid) -> f64 {
        a.nodes().zip(b.nodes()).map(|(u, v)| spinor_norm_sqr(&[u[0] - v[0], u[1] - v[1]]).sqrt()).fold(0.0, f64::max)
    }

    fn random_field(m: usize, v: &[f64]) -> SpinorGrid {
        let nodes: Vec<Spinor> = (0..m).map(|j| [C64::new(v[4 * j], v[4 * j + 1]), C64::new(v[4 * j + 2], v[4 * j + 3])]).collect();
        SpinorGrid::from_nodes(dom(m), &nodes).unwrap()
    }

    #[test]
    fn free_half_step_examples() {
        let f = gaussian(dom(64));
        assert!(max_diff(&free_half_step(&f, 0.0, 0.5), &f) < 1e-15);

        let d = dom(16);
        let mut s = SpectrumGrid::zeros(d);
        let (c1, c2) = (C64::new(0.3, 0.1), C64::new(-0.2, 0.7));
        s.set_coefficient(0, [c1, c2]).unwrap();
        let out = forward_transform(&free_half_step(&backward_transform(&s), 0.2, 0.5)).coefficient(0).unwrap();
        let th = 0.1 / 0.25;
        assert!((out[0] - C64::from_polar(1.0, -th) * c1).norm() < 1e-15);
        assert!((out[1] - C64::from_polar(1.0, th) * c2).norm() < 1e-15);

        let two = free_half_step(&free_half_step(&f, 0.1, 0.5), 0.1, 0.5);
        let one = free_half_step(&f, 0.2, 0.5);
        assert!(max_diff(&two, &one) < 1e-12);
        assert!((discrete_mass(&one) - discrete_mass(&f)).abs() < 1e-12 * discrete_mass(&f));
    }

    #[test]
    fn potential_time_integral_examples() {
        let p = PotentialSpec::stationary(|_| 0.0, |x| 2.0 * x);
        assert_eq!(potential_time_integrals(0.3, 0.1, &p, 1.5, Quadrature::Exact).unwrap(), (0.0, 0.1 * 3.0));
        let lin = PotentialSpec::time_dependent(|t, _| t, |_, _| 0.0);
        let (v, _) = potential_time_integrals(0.0, 1.0, &lin, 0.0, Quadrature::Simpson).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        let cubic = PotentialSpec::time_dependent(|t, _| t * t * t, |_, _| 0.0);
        let (v, _) = potential_time_integrals(0.0, 1.0, &cubic, 0.0, Quadrature::Simpson).unwrap();
        assert!((v - 0.25).abs() < 1e-15);
        let quartic = PotentialSpec::time_dependent(|t, _| t.powi(4), |_, _| 0.0);
        let (v, _) = potential_time_integrals(0.0, 1.0, &quartic, 0.0, Quadrature::Simpson).unwrap();
        assert!((v - 5.0 / 24.0).abs() < 1e-15);
        assert!((v - 0.2 - 1.0 / 120.0).abs() < 1e-15);
        assert!(matches!(potential_time_integrals(0.0, 1.0, &lin, 0.0, Quadrature::Exact), Err(Error::Config(_))));
    }

    #[test]
    fn potential_flow_two_examples() {
        let d = dom(16);
        let f = gaussian(d);
        let zero = PotentialSpec::zero();
        let out = potential_flow_two(&f, 0.0, 0.1, &params(1.0, 0.0, 0.0), &zero, Quadrature::Exact).unwrap();
        assert_eq!(out, f);

        let unit = SpinorGrid::from_fn(d, |_| [ONE, ZERO]);
        let tau = 0.37;
        let out = potential_flow_two(&unit, 0.0, tau, &params(1.0, 0.0, 1.0), &zero, Quadrature::Exact).unwrap();
        assert!(out.nodes().all(|v| (v[0] - C64::from_polar(1.0, -tau)).norm() < 1e-15 && v[1] == ZERO));
    }

    #[test]
    fn two_flow_with_soler_and_magnetic_is_rejected() {
        let d = dom(16);
        let p = params(1.0, -1.0, 0.0);
        let pot = benchmark_potentials();
        assert!(potential_flow_two(&gaussian(d), 0.0, 0.1, &p, &pot, Quadrature::Exact).is_err());
        let cfg = TsfpConfig::new(0.1, &pot).with_variant(TsfpVariant::TwoFlow);
        assert!(TsfpStepper::new(d, p, pot.clone(), cfg).is_err());
        assert_eq!(TsfpConfig::new(0.1, &pot).resolve_variant(&p, &pot).unwrap(), TsfpVariant::ThreeFlow);
        let free = pot.clone().without_magnetic();
        assert_eq!(TsfpConfig::new(0.1, &free).resolve_variant(&p, &free).unwrap(), TsfpVariant::TwoFlow);
        assert_eq!(TsfpConfig::new(0.1, &pot).resolve_variant(&params(1.0, 0.0, 2.0), &pot).unwrap(), TsfpVariant::TwoFlow);
    }

    #[test]
    fn three_flow_degenerates_to_two_flow() {
        let d = dom(64);
        let f = gaussian(d);
        let pot = benchmark_potentials();
        let lin = params(0.5, 0.0, 0.0);
        let two = potential_flow_two(&f, 0.0, 0.2, &lin, &pot, Quadrature::Exact).unwrap();
        for order in [SandwichOrder::PotentialOuter, SandwichOrder::NonlinearOuter] {
            let three = potential_flow_three(&f, 0.0, 0.2, &lin, &pot, Quadrature::Exact, order).unwrap();
            assert!(max_diff(&two, &three) < 1e-14);
        }
        let nomag = pot.clone().without_magnetic();
        let soler = params(0.5, -1.0, 0.7);
        let two = potential_flow_two(&f, 0.0, 0.2, &soler, &nomag, Quadrature::Exact).unwrap();
        for order in [SandwichOrder::PotentialOuter, SandwichOrder::NonlinearOuter] {
            let three = potential_flow_three(&f, 0.0, 0.2, &soler, &nomag, Quadrature::Exact, order).unwrap();
            assert!(max_diff(&two, &three) < 1e-13);
        }
    }

    #[test]
    fn zero_model_step_is_exact_free_flow() {
        let d = dom(64);
        let f = gaussian(d);
        let p = params(0.5, 0.0, 0.0);
        let zero = PotentialSpec::zero();
        let cfg = TsfpConfig::new(0.05, &zero);
        let trace = tsfp_run(&f, 1.0, &p, &zero, &cfg, Cadence::endpoints()).unwrap();
        // exact solution: each mode rotated by e^{−iTΓ/ε²}
        let exact = {
            let mut plan = FourierPlan::new(64);
            let mut g = f.clone();
            apply_mode_matrices(&mut plan, &mut g, &free_propagators(&d, 1.0, 0.5));
            g
        };
        assert!(max_diff(&trace.final_field, &exact) < 1e-11);
    }

    #[test]
    fn fused_run_matches_stepwise() {
        let d = dom(64);
        let f = gaussian(d);
        let p = params(1.0, -1.0, 0.0);
        let pot = benchmark_potentials();
        let cfg = TsfpConfig::new(0.1, &pot);
        let fused = tsfp_run(&f, 1.0, &p, &pot, &cfg, Cadence::endpoints()).unwrap();
        let mut st = TsfpState::initial(f.clone());
        let mut stepper = TsfpStepper::new(d, p, pot.clone(), cfg).unwrap();
        for _ in 0..10 {
            stepper.step(&mut st).unwrap();
        }
        assert_eq!(st.step_index, 10);
        assert!((st.time - 1.0).abs() < 1e-15);
        assert!(max_diff(&fused.final_field, &st.field) < 1e-13);
        let every = tsfp_run(&f, 1.0, &p, &pot, &cfg, Cadence::every(3)).unwrap();
        assert_eq!(every.samples.len(), 5);
        assert!(max_diff(&every.final_field, &st.field) < 1e-13);
        let one = tsfp_step(&TsfpState::initial(f.clone()), &p, &pot, &cfg).unwrap();
        assert_eq!(one.step_index, 1);
    }

    #[test]
    fn time_dependent_potentials_use_simpson() {
        let d = dom(64);
        let pot = PotentialSpec::time_dependent(|t, x| (1.0 + t) / (1.0 + x * x), |t, x| t * x / (1.0 + x * x));
        let cfg = TsfpConfig::new(0.05, &pot);
        assert_eq!(cfg.quadrature, Quadrature::Simpson);
        assert!(TsfpStepper::new(d, params(1.0, -1.0, 0.0), pot.clone(), cfg.with_quadrature(Quadrature::Exact)).is_err());
        let trace = tsfp_run(&gaussian(d), 1.0, &params(1.0, -1.0, 0.0), &pot, &cfg, Cadence::every(1)).unwrap();
        assert!(trace.max_relative_mass_drift() < 1e-12);
        assert!(trace.samples.iter().all(|s| s.energy.is_none()));
    }

    #[test]
    fn second_order_in_time_on_plane_wave_free_problem() {
        // λ2 plane wave at k = μ_1 with a potential: compare against small-τ run
        let d = dom(64);
        let p = params(1.0, 0.0, 0.5);
        let pot = PotentialSpec::stationary(|x| 0.3 * (x * std::f64::consts::PI / 16.0).cos(), |_| 0.0);
        let k = wavenumber(&d, 1).unwrap();
        let init = SpinorGrid::from_fn(d, |x| [C64::from_polar(0.8, k * x), I * 0.3]);
        let run = |tau: f64| tsfp_run(&init, 1.0, &p, &pot, &TsfpConfig::new(tau, &pot), Cadence::endpoints()).unwrap().final_field;
        let reference = run(1e-4);
        let e1 = max_diff(&run(0.1), &reference);
        let e2 = max_diff(&run(0.05), &reference);
        assert!(((e1 / e2).log2() - 2.0).abs() < 0.15, "{e1} {e2}");
    }

    proptest! {
        #[test]
        fn pointwise_flows_preserve_node_invariants(v in prop::collection::vec(-2.0f64..2.0, 64), tau in 0.0f64..0.5, l1 in -2.0f64..2.0, l2 in -2.0f64..2.0, outer in any::<bool>()) {
            let f = random_field(16, &v);
            let pot = benchmark_potentials();
            let p = params(0.5, l1, l2);
            let order = if outer { SandwichOrder::PotentialOuter } else { SandwichOrder::NonlinearOuter };
            let out = potential_flow_three(&f, 0.0, tau, &p, &pot, Quadrature::Exact, order).unwrap();
            for (a, b) in f.nodes().zip(out.nodes()) {
                prop_assert!((spinor_norm_sqr(&a) - spinor_norm_sqr(&b)).abs() < 1e-13 * spinor_norm_sqr(&a).max(1.0));
                // the nonlinear sub-flow alone keeps both ρ and Φ*σ3Φ
                let n = nonlinear_node(&a, tau, &p);
                prop_assert!((sigma3_form(&a) - sigma3_form(&n)).abs() < 1e-13 * spinor_norm_sqr(&a).max(1.0));
                prop_assert!((spinor_norm_sqr(&a) - spinor_norm_sqr(&n)).abs() < 1e-13 * spinor_norm_sqr(&a).max(1.0));
            }
            let nomag = pot.clone().without_magnetic();
            let two = potential_flow_two(&f, 0.0, tau, &p, &nomag, Quadrature::Exact).unwrap();
            for (a, b) in f.nodes().zip(two.nodes()) {
                prop_assert!((spinor_norm_sqr(&a) - spinor_norm_sqr(&b)).abs() < 1e-13 * spinor_norm_sqr(&a).max(1.0));
            }
        }

        #[test]
        fn point_factors_are_unitary(lp in -50.0f64..50.0, lm in -50.0f64..50.0, rotated in any::<bool>()) {
            let f = PointFlowFactor { lambda_plus: lp, lambda_minus: lm, rotated };
            let m = f.matrix();
            prop_assert!((m.adjoint() * m).max_abs_diff(Mat2::identity()) < 1e-14);
            let v = [C64::new(0.3, -0.2), C64::new(1.1, 0.4)];
            let (a, b) = (m.apply(&v), f.apply(&v));
            prop_assert!((a[0] - b[0]).norm() < 1e-14 && (a[1] - b[1]).norm() < 1e-14);
        }

        #[test]
        fn step_conserves_mass(v in prop::collection::vec(-1.0f64..1.0, 256), eps in prop::sample::select(vec![1.0, 0.25, 0.1])) {
            let f = random_field(64, &v);
            let pot = benchmark_potentials();
            let p = params(eps, -1.0, 0.5);
            let cfg = TsfpConfig::new(0.01, &pot);
            let trace = tsfp_run(&f, 0.1, &p, &pot, &cfg, Cadence::every(1)).unwrap();
            prop_assert!(trace.max_relative_mass_drift() < 1e-12);
        }
    }
}
