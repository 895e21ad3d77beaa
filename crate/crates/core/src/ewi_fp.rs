//! Exponential wave integrator with Fourier pseudospectral discretisation.
//!
//! The free flow is integrated exactly per mode; the source
//! `G = (V − A1σ1 + F(Φ))Φ` is handled by a Gautschi-type rule that is
//! linear in time over each step (rectangle rule on the first step).

use crate::dirac_model::{free_mode_propagator, nonlinear_diag, ModeFactorization, ModelParams, PotentialSpec};
use crate::error::{Error, Result};
use crate::linalg::{Mat2, Spinor, I};
use crate::observables::{step_count, Cadence, EnergyKind, RunTrace, TraceRecorder};
use crate::spectral_grid::{wavenumbers, Domain1D, FourierPlan, SpinorGrid};

/// Per-mode matrices in storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct EwiMatrices {
    pub tau: f64,
    pub prop: Vec<Mat2>,
    pub q1: Vec<Mat2>,
    pub q2: Vec<Mat2>,
}

impl EwiMatrices {
    pub fn new(domain: &Domain1D, eps: f64, tau: f64) -> Self {
        let eps2 = eps * eps;
        let n = domain.m();
        let (mut prop, mut q1, mut q2) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for mu in wavenumbers(domain) {
            let f = ModeFactorization::from_wavenumber(mu, eps);
            let e = free_mode_propagator(&f, tau, eps);
            let ginv = f.gamma_inv();
            let one_minus = Mat2::identity() - e;
            prop.push(e);
            q1.push((ginv * one_minus).scale(-I * eps2));
            q2.push(ginv.scale(-I * eps2 * tau) + one_minus.scale_re(eps2 * eps2 / (f.delta * f.delta)));
        }
        EwiMatrices { tau, prop, q1, q2 }
    }

    pub fn len(&self) -> usize {
        self.prop.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prop.is_empty()
    }
}

/// `G = (V(t)I − A1(t)σ1 + F(Φ))Φ` at every node.
pub fn g_term(field: &SpinorGrid, t: f64, params: &ModelParams, potentials: &PotentialSpec) -> SpinorGrid {
    let d = *field.domain();
    let mut out = field.clone();
    out.map_nodes(|j, v| {
        let x = d.node(j);
        g_node(&v, potentials.v(t, x), potentials.a1(t, x), params)
    });
    out
}

#[inline]
fn g_node(v: &Spinor, vj: f64, aj: f64, params: &ModelParams) -> Spinor {
    let (np, nm) = nonlinear_diag(v, params);
    [v[0] * (vj + np) - v[1] * aj, v[1] * (vj + nm) - v[0] * aj]
}

#[derive(Debug, Clone)]
pub struct EwiState {
    pub field: SpinorGrid,
    /// `G(Φ^{n−1})`, present from step 1 on.
    pub prev_g: Option<SpinorGrid>,
    pub step_index: usize,
    pub time: f64,
}

impl EwiState {
    pub fn initial(field: SpinorGrid) -> Self {
        EwiState { field, prev_g: None, step_index: 0, time: 0.0 }
    }
}

/// Reusable stepper; the field is kept in coefficient space between steps.
pub struct EwiStepper {
    domain: Domain1D,
    params: ModelParams,
    potentials: PotentialSpec,
    mats: EwiMatrices,
    plan: FourierPlan,
    cached: Option<(Vec<f64>, Vec<f64>)>,
}

impl EwiStepper {
    pub fn new(domain: Domain1D, params: ModelParams, potentials: PotentialSpec, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
        }
        let cached = potentials
            .is_time_independent()
            .then(|| (potentials.sample_v(&domain, 0.0), potentials.sample_a1(&domain, 0.0)));
        Ok(EwiStepper {
            mats: EwiMatrices::new(&domain, params.eps, tau),
            plan: FourierPlan::new(domain.m()),
            domain,
            params,
            potentials,
            cached,
        })
    }

    pub fn matrices(&self) -> &EwiMatrices {
        &self.mats
    }

    /// `G(Φ)` at time `t`, transformed to coefficient space.
    fn g_hat(&mut self, phys: &SpinorGrid, t: f64) -> SpinorGrid {
        let mut g = phys.clone();
        let params = self.params;
        match &self.cached {
            Some((v, a)) => g.map_nodes(|j, u| g_node(&u, v[j], a[j], &params)),
            None => {
                let (d, pot) = (self.domain, &self.potentials);
                g.map_nodes(|j, u| {
                    let x = d.node(j);
                    g_node(&u, pot.v(t, x), pot.a1(t, x), &params)
                })
            }
        }
        self.plan.forward_field(&mut g);
        g
    }

    /// One update in coefficient space. `g_prev` is `None` on the first step.
    fn advance(&self, c: &mut SpinorGrid, g_now: &SpinorGrid, g_prev: Option<&SpinorGrid>) {
        let inv_tau = 1.0 / self.mats.tau;
        let (gn1, gn2) = g_now.components();
        let prev = g_prev.map(|g| g.components());
        let (c1, c2) = c.components_mut();
        for k in 0..c1.len() {
            let gn = [gn1[k], gn2[k]];
            let mut out = self.mats.prop[k].apply(&[c1[k], c2[k]]);
            let a = self.mats.q1[k].apply(&gn);
            out = [out[0] - I * a[0], out[1] - I * a[1]];
            if let Some((p1, p2)) = prev {
                let dg = [(gn[0] - p1[k]) * inv_tau, (gn[1] - p2[k]) * inv_tau];
                let b = self.mats.q2[k].apply(&dg);
                out = [out[0] - I * b[0], out[1] - I * b[1]];
            }
            c1[k] = out[0];
            c2[k] = out[1];
        }
    }

    fn step_state(&mut self, state: &EwiState, first: bool) -> Result<EwiState> {
        if first != (state.step_index == 0) || first == state.prev_g.is_some() {
            return Err(Error::InvalidParameter(format!(
                "EWI state at step {} {} a previous source term",
                state.step_index,
                if state.prev_g.is_some() { "carries" } else { "lacks" }
            )));
        }
        let tau = self.mats.tau;
        let t_n = state.step_index as f64 * tau;
        let g_now = self.g_hat(&state.field, t_n);
        let g_prev = state.prev_g.as_ref().map(|g| {
            let mut h = g.clone();
            self.plan.forward_field(&mut h);
            h
        });
        let mut c = state.field.clone();
        self.plan.forward_field(&mut c);
        self.advance(&mut c, &g_now, g_prev.as_ref());
        self.plan.backward_field(&mut c);
        let mut g_phys = g_now;
        self.plan.backward_field(&mut g_phys);
        Ok(EwiState { field: c, prev_g: Some(g_phys), step_index: state.step_index + 1, time: (state.step_index + 1) as f64 * tau })
    }

    pub fn first_step(&mut self, state: &EwiState) -> Result<EwiState> {
        self.step_state(state, true)
    }

    pub fn step(&mut self, state: &EwiState) -> Result<EwiState> {
        self.step_state(state, false)
    }

    pub fn run(&mut self, initial: &SpinorGrid, t_final: f64, cadence: Cadence) -> Result<RunTrace> {
        if initial.domain() != &self.domain {
            return Err(Error::MalformedField(format!("initial field lives on {}, stepper on {}", initial.domain(), self.domain)));
        }
        let tau = self.mats.tau;
        let n = step_count(t_final, tau)?;
        let (params, potentials) = (self.params, self.potentials.clone());
        let mut rec = TraceRecorder::new(&params, &potentials, EnergyKind::Spectral, cadence, n);
        rec.record(0, 0.0, initial);
        let mut phys = initial.clone();
        let mut c = initial.clone();
        self.plan.forward_field(&mut c);
        let mut g_prev: Option<SpinorGrid> = None;
        for k in 0..n {
            let g_now = self.g_hat(&phys, k as f64 * tau);
            self.advance(&mut c, &g_now, g_prev.as_ref());
            g_prev = Some(g_now);
            phys.clone_from(&c);
            self.plan.backward_field(&mut phys);
            rec.record(k + 1, (k + 1) as f64 * tau, &phys);
        }
        if !phys.is_finite() {
            return Err(Error::MalformedField("EWI-FP produced non-finite values".into()));
        }
        Ok(rec.finish(phys, n as f64 * tau))
    }
}

pub fn ewi_first_step(state: &EwiState, params: &ModelParams, potentials: &PotentialSpec, tau: f64) -> Result<EwiState> {
    EwiStepper::new(*state.field.domain(), *params, potentials.clone(), tau)?.first_step(state)
}

pub fn ewi_step(state: &EwiState, params: &ModelParams, potentials: &PotentialSpec, tau: f64) -> Result<EwiState> {
    EwiStepper::new(*state.field.domain(), *params, potentials.clone(), tau)?.step(state)
}

pub fn ewi_run(
    initial: &SpinorGrid,
    t_final: f64,
    params: &ModelParams,
    potentials: &PotentialSpec,
    tau: f64,
    cadence: Cadence,
) -> Result<RunTrace> {
    EwiStepper::new(*initial.domain(), *params, potentials.clone(), tau)?.run(initial, t_final, cadence)
}
