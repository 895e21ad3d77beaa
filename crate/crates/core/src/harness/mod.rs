//! Benchmark problems, cached reference solutions and convergence studies.

mod presets;
mod reference;
mod study;

pub use presets::{table_plans, Scale, TableName};
pub use reference::{
    certify_reference, decode_reference, encode_reference, make_reference, read_reference, write_reference,
    CertifiedReference, Provenance, ReferenceCache, ReferenceHeader, ReferenceSolution, ReferenceSpec, FORMAT_VERSION,
    MAGIC,
};
pub use study::{
    diagonal_study, observed_order, run_plan, spatial_study, temporal_study, Axis, CellPlan, ConvergenceTable, ErrorMeasure,
    StudyContext, StudyPlan, TableCell, FLOOR_FACTOR,
};

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::cnfd::{cnfd_run, CnfdConfig};
use crate::dirac_model::{plane_wave_solution, Branch, ModelParams, PlaneWave, PotentialSpec};
use crate::error::{Error, Result};
use crate::ewi_fp::ewi_run;
use crate::linalg::{Spinor, C64, ZERO};
use crate::observables::{step_count, Cadence, RunTrace};
use crate::spectral_grid::{Domain1D, SpinorGrid};
use crate::tsfp::{tsfp_run, TsfpConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolverId {
    Cnfd,
    EwiFp,
    Tsfp,
}

impl SolverId {
    pub const ALL: [SolverId; 3] = [SolverId::Cnfd, SolverId::EwiFp, SolverId::Tsfp];

    pub fn as_str(self) -> &'static str {
        match self {
            SolverId::Cnfd => "cnfd",
            SolverId::EwiFp => "ewi-fp",
            SolverId::Tsfp => "tsfp",
        }
    }
}

impl fmt::Display for SolverId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cnfd" => Ok(SolverId::Cnfd),
            "ewi-fp" | "ewi_fp" | "ewifp" | "ewi" => Ok(SolverId::EwiFp),
            "tsfp" => Ok(SolverId::Tsfp),
            other => Err(Error::Config(format!("unknown solver '{other}' (expected cnfd, ewi-fp or tsfp)"))),
        }
    }
}

pub type InitialData = Arc<dyn Fn(f64) -> Spinor + Send + Sync>;

/// Domain, couplings, potentials, initial data and final time of one run.
#[derive(Clone)]
pub struct BenchmarkProblem {
    pub a: f64,
    pub b: f64,
    pub params: ModelParams,
    pub potentials: PotentialSpec,
    pub initial: InitialData,
    pub t_final: f64,
    pub label: String,
}

impl fmt::Debug for BenchmarkProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BenchmarkProblem")
            .field("label", &self.label)
            .field("domain", &(self.a, self.b))
            .field("params", &self.params)
            .field("potentials", &self.potentials)
            .field("t_final", &self.t_final)
            .finish()
    }
}

const PROBE_POINTS: usize = 64;

impl BenchmarkProblem {
    /// Gaussian pair on (−16, 16) with `V = (1 − x)/(1 + x²)`,
    /// `A1 = (1 + x)²/(1 + x²)`, `λ1 = −1`, `λ2 = 0`, `T = 2`.
    pub fn benchmark(eps: f64) -> Result<Self> {
        let params = ModelParams::new(eps, -1.0, 0.0)?;
        let potentials = PotentialSpec::stationary(|x| (1.0 - x) / (1.0 + x * x), |x| (1.0 + x) * (1.0 + x) / (1.0 + x * x))
            .with_label("benchmark");
        let initial: InitialData = Arc::new(|x: f64| {
            [C64::new((-x * x / 2.0).exp(), 0.0), C64::new((-(x - 1.0) * (x - 1.0) / 2.0).exp(), 0.0)]
        });
        Ok(BenchmarkProblem { a: -16.0, b: 16.0, params, potentials, initial, t_final: 2.0, label: "benchmark".into() })
    }

    /// Plane wave `B e^{i(kx − ωt)}` on (0, 2π) with constant potentials and `λ1 = 0`.
    pub fn plane_wave(k: f64, eps: f64, lambda2: f64, branch: Branch, amplitude: f64, t_final: f64) -> Result<(Self, PlaneWave)> {
        let (a, b) = (0.0, 2.0 * std::f64::consts::PI);
        if (k - k.round()).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("wavenumber {k} is not periodic on (0, 2π)")));
        }
        let params = ModelParams::new(eps, 0.0, lambda2)?;
        let wave = plane_wave_solution(k, amplitude, &params, 0.0, 0.0, branch)?;
        let problem = BenchmarkProblem {
            a,
            b,
            params,
            potentials: PotentialSpec::zero(),
            initial: Arc::new(move |x| wave.at(0.0, x)),
            t_final,
            label: format!("plane-wave k={k} {branch:?}"),
        };
        Ok((problem, wave))
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        let mut p = self.clone();
        p.params = ModelParams::new(eps, self.params.lambda1, self.params.lambda2)?;
        Ok(p)
    }

    pub fn with_couplings(&self, lambda1: f64, lambda2: f64) -> Result<Self> {
        let mut p = self.clone();
        p.params = ModelParams::new(self.params.eps, lambda1, lambda2)?;
        Ok(p)
    }

    pub fn with_final_time(&self, t_final: f64) -> Result<Self> {
        if !(t_final >= 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidParameter(format!("T must be finite and >= 0, got {t_final}")));
        }
        let mut p = self.clone();
        p.t_final = t_final;
        Ok(p)
    }

    pub fn with_zero_initial(&self) -> Self {
        let mut p = self.clone();
        p.initial = Arc::new(|_| [ZERO, ZERO]);
        p.label = format!("{} (zero data)", self.label);
        p
    }

    pub fn domain(&self, m: usize) -> Result<Domain1D> {
        Domain1D::new(self.a, self.b, m)
    }

    /// Grid with `M = (b − a)/h`, rejecting mesh sizes that do not divide the domain.
    pub fn domain_for_h(&self, h: f64) -> Result<Domain1D> {
        Domain1D::with_mesh_size(self.a, self.b, h)
    }

    pub fn initial_field(&self, domain: &Domain1D) -> SpinorGrid {
        let init = self.initial.clone();
        SpinorGrid::from_fn(*domain, move |x| init(x))
    }

    /// SHA-256 over the parameters and samples of `V`, `A1`, `Φ0` at fixed probes.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for v in [self.a, self.b, self.params.eps, self.params.lambda1, self.params.lambda2, self.t_final] {
            hasher.update(v.to_le_bytes());
        }
        let times = [0.0, 0.5 * self.t_final, self.t_final];
        for j in 0..PROBE_POINTS {
            let x = self.a + (self.b - self.a) * (j as f64 + 0.25) / PROBE_POINTS as f64;
            for &t in &times {
                hasher.update(self.potentials.v(t, x).to_le_bytes());
                hasher.update(self.potentials.a1(t, x).to_le_bytes());
            }
            for c in (self.initial)(x) {
                hasher.update(c.re.to_le_bytes());
                hasher.update(c.im.to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }
}

/// Checks that `T/τ` is an integer and the solver supports the problem, without running.
pub fn validate_run(problem: &BenchmarkProblem, solver: SolverId, m: usize, tau: f64) -> Result<()> {
    problem.domain(m)?;
    step_count(problem.t_final, tau)?;
    if solver == SolverId::Tsfp {
        TsfpConfig::new(tau, &problem.potentials).resolve_variant(&problem.params, &problem.potentials)?;
    }
    Ok(())
}

/// Runs `solver` on `problem` with `M` nodes and step `τ` up to `T`.
pub fn run_solver(problem: &BenchmarkProblem, solver: SolverId, m: usize, tau: f64, cadence: Cadence) -> Result<RunTrace> {
    validate_run(problem, solver, m, tau)?;
    let domain = problem.domain(m)?;
    let initial = problem.initial_field(&domain);
    let (params, pot, t) = (&problem.params, &problem.potentials, problem.t_final);
    match solver {
        SolverId::Cnfd => cnfd_run(&initial, t, params, pot, &CnfdConfig::new(tau), cadence),
        SolverId::EwiFp => ewi_run(&initial, t, params, pot, tau, cadence),
        SolverId::Tsfp => tsfp_run(&initial, t, params, pot, &TsfpConfig::new(tau, pot), cadence),
    }
}
