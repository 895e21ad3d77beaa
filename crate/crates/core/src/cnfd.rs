//! Conservative Crank–Nicolson finite difference stepper.
//!
//! Each step solves `(I + iτ/2·H)Φ^{n+1} = (I − iτ/2·H)Φ^n` where `H` uses the
//! centred difference, potentials at `t_n + τ/2` and the averaged
//! nonlinearity `½[F(Φ^n) + F(Φ^{n+1})]`. The nonlinearity is resolved by
//! Picard iteration; every iterate is an exact solve of the periodic
//! block-tridiagonal system.

use crate::cyclic::CyclicBlockTridiag;
use crate::dirac_model::{nonlinear_diag, ModelParams, PotentialSpec};
use crate::error::{Error, Result};
use crate::linalg::{spinor_norm_sqr, Mat2, Spinor, C64};
use crate::observables::{step_count, Cadence, EnergyKind, RunTrace, TraceRecorder};
use crate::spectral_grid::{Domain1D, SpinorGrid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CnfdConfig {
    pub tau: f64,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
}

impl CnfdConfig {
    pub fn new(tau: f64) -> Self {
        CnfdConfig { tau, picard_tol: 1e-12, picard_max_iter: 100 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.picard_tol > 0.0) || self.picard_max_iter == 0 {
            return Err(Error::InvalidParameter("Picard tolerance must be > 0 and iterations >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CnfdState {
    pub field: SpinorGrid,
    pub step_index: usize,
    pub time: f64,
}

impl CnfdState {
    pub fn initial(field: SpinorGrid) -> Self {
        CnfdState { field, step_index: 0, time: 0.0 }
    }
}

/// Statistics of the last implicit solve.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PicardReport {
    pub iterations: usize,
    pub last_update: f64,
}

pub struct CnfdStepper {
    domain: Domain1D,
    params: ModelParams,
    potentials: PotentialSpec,
    config: CnfdConfig,
    system: CyclicBlockTridiag,
    cached: Option<(Vec<f64>, Vec<f64>)>,
    last: PicardReport,
}

fn l2h(h: f64, a: &[Spinor], b: &[Spinor]) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(u, v)| spinor_norm_sqr(&[u[0] - v[0], u[1] - v[1]])).sum();
    (h * s).sqrt()
}

impl CnfdStepper {
    pub fn new(domain: Domain1D, params: ModelParams, potentials: PotentialSpec, config: CnfdConfig) -> Result<Self> {
        config.validate()?;
        let m = domain.m();
        let c = config.tau / (4.0 * params.eps * domain.h());
        let s1 = Mat2::sigma1().scale_re(c);
        let system = CyclicBlockTridiag::new(vec![-s1; m], vec![Mat2::identity(); m], vec![s1; m])?;
        let cached = potentials
            .is_time_independent()
            .then(|| (potentials.sample_v(&domain, 0.0), potentials.sample_a1(&domain, 0.0)));
        Ok(CnfdStepper { domain, params, potentials, config, system, cached, last: PicardReport::default() })
    }

    pub fn last_report(&self) -> PicardReport {
        self.last
    }

    fn potentials_at(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        match &self.cached {
            Some((v, a)) => (v.clone(), a.clone()),
            None => (self.potentials.sample_v(&self.domain, t), self.potentials.sample_a1(&self.domain, t)),
        }
    }

    /// Fills the block diagonal `I + (iτ/2)(σ3/ε² + V − A1σ1 + F̄)` for
    /// averaged nonlinearity diagonals `fbar`.
    fn assemble(&mut self, v: &[f64], a: &[f64], fbar: &[(f64, f64)]) {
        let half = 0.5 * self.config.tau;
        let inv_eps2 = 1.0 / (self.params.eps * self.params.eps);
        for (j, blk) in self.system.diag.iter_mut().enumerate() {
            let b11 = inv_eps2 + v[j] + fbar[j].0;
            let b22 = -inv_eps2 + v[j] + fbar[j].1;
            *blk = Mat2::new(C64::new(1.0, half * b11), C64::new(0.0, -half * a[j]), C64::new(0.0, -half * a[j]), C64::new(1.0, half * b22));
        }
    }

    /// `(2I − A)Φ^n` for the currently assembled matrix `A`.
    fn rhs(&self, phi: &[Spinor]) -> Vec<Spinor> {
        let ap = self.system.apply(phi);
        phi.iter().zip(ap).map(|(p, q)| [p[0] * 2.0 - q[0], p[1] * 2.0 - q[1]]).collect()
    }

    pub fn step(&mut self, state: &CnfdState) -> Result<CnfdState> {
        if state.field.domain() != &self.domain {
            return Err(Error::MalformedField(format!("field lives on {}, stepper on {}", state.field.domain(), self.domain)));
        }
        let tau = self.config.tau;
        let h = self.domain.h();
        let t_half = (state.step_index as f64 + 0.5) * tau;
        let (v, a) = self.potentials_at(t_half);
        let old: Vec<Spinor> = state.field.nodes().collect();
        let f_old: Vec<(f64, f64)> = old.iter().map(|p| nonlinear_diag(p, &self.params)).collect();

        let mut x = old.clone();
        let mut report = PicardReport { iterations: 0, last_update: f64::INFINITY };
        let linear = self.params.is_linear();
        for k in 1..=self.config.picard_max_iter {
            let fbar: Vec<(f64, f64)> = x
                .iter()
                .zip(&f_old)
                .map(|(p, fo)| {
                    let fx = nonlinear_diag(p, &self.params);
                    (0.5 * (fo.0 + fx.0), 0.5 * (fo.1 + fx.1))
                })
                .collect();
            self.assemble(&v, &a, &fbar);
            let next = self.system.solve(&self.rhs(&old))?;
            let update = l2h(h, &next, &x);
            x = next;
            report = PicardReport { iterations: k, last_update: update };
            if linear || update <= self.config.picard_tol {
                break;
            }
        }
        self.last = report;
        if !(report.last_update <= self.config.picard_tol) && !linear {
            return Err(Error::PicardDivergence { iterations: report.iterations, residual: report.last_update });
        }
        Ok(CnfdState {
            field: SpinorGrid::from_nodes(self.domain, &x)?,
            step_index: state.step_index + 1,
            time: (state.step_index + 1) as f64 * tau,
        })
    }

    /// `‖(I + iτ/2·H)Φ^{n+1} − (I − iτ/2·H)Φ^n‖_{l²}` with `H` built from both levels.
    pub fn residual(&mut self, prev: &CnfdState, next: &SpinorGrid) -> f64 {
        let t_half = (prev.step_index as f64 + 0.5) * self.config.tau;
        let (v, a) = self.potentials_at(t_half);
        let old: Vec<Spinor> = prev.field.nodes().collect();
        let new: Vec<Spinor> = next.nodes().collect();
        let fbar: Vec<(f64, f64)> = old
            .iter()
            .zip(&new)
            .map(|(p, q)| {
                let (fp, fq) = (nonlinear_diag(p, &self.params), nonlinear_diag(q, &self.params));
                (0.5 * (fp.0 + fq.0), 0.5 * (fp.1 + fq.1))
            })
            .collect();
        self.assemble(&v, &a, &fbar);
        let lhs = self.system.apply(&new);
        let rhs = self.rhs(&old);
        l2h(self.domain.h(), &lhs, &rhs)
    }

    pub fn run(&mut self, initial: &SpinorGrid, t_final: f64, cadence: Cadence) -> Result<RunTrace> {
        let n = step_count(t_final, self.config.tau)?;
        let (params, potentials) = (self.params, self.potentials.clone());
        let mut rec = TraceRecorder::new(&params, &potentials, EnergyKind::FiniteDifference, cadence, n);
        let mut state = CnfdState::initial(initial.clone());
        rec.record(0, 0.0, &state.field);
        for _ in 0..n {
            state = self.step(&state)?;
            rec.record(state.step_index, state.time, &state.field);
        }
        Ok(rec.finish(state.field, n as f64 * self.config.tau))
    }
}

pub fn cnfd_step(state: &CnfdState, params: &ModelParams, potentials: &PotentialSpec, config: &CnfdConfig) -> Result<CnfdState> {
    CnfdStepper::new(*state.field.domain(), *params, potentials.clone(), *config)?.step(state)
}

pub fn cnfd_run(
    initial: &SpinorGrid,
    t_final: f64,
    params: &ModelParams,
    potentials: &PotentialSpec,
    config: &CnfdConfig,
    cadence: Cadence,
) -> Result<RunTrace> {
    CnfdStepper::new(*initial.domain(), *params, potentials.clone(), *config)?.run(initial, t_final, cadence)
}
