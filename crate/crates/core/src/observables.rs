//! Densities, current, mass, energies and the error functionals used by the
//! convergence studies. All integrals are periodic rectangle sums `hΣ`.

use std::io::Write;

use crate::dirac_model::{energy_density, ModelParams, PotentialSpec};
use crate::error::{Error, Result};
use crate::linalg::{inner, sigma1_form, sigma3_form, spinor_norm_sqr, Mat2, Spinor, C64, ZERO};
use crate::spectral_grid::{spectral_derivative, SpinorGrid};

pub fn density(field: &SpinorGrid) -> Vec<f64> {
    field.nodes().map(|v| spinor_norm_sqr(&v)).collect()
}

/// `ρ_c = |φ_c|²` for `c ∈ {1, 2}`.
pub fn component_density(field: &SpinorGrid, component: usize) -> Result<Vec<f64>> {
    let (p, q) = field.components();
    match component {
        1 => Ok(p.iter().map(|z| z.norm_sqr()).collect()),
        2 => Ok(q.iter().map(|z| z.norm_sqr()).collect()),
        c => Err(Error::InvalidParameter(format!("component must be 1 or 2, got {c}"))),
    }
}

/// `J = (1/ε) Φ*σ1Φ`
pub fn current(field: &SpinorGrid, eps: f64) -> Vec<f64> {
    field.nodes().map(|v| sigma1_form(&v) / eps).collect()
}

/// `‖Φ‖²_{l²} = hΣ|Φ_j|²`
pub fn discrete_mass(field: &SpinorGrid) -> f64 {
    field.domain().h() * field.sum_norm_sqr()
}

pub fn max_amplitude(field: &SpinorGrid) -> f64 {
    field.nodes().map(|v| spinor_norm_sqr(&v).sqrt()).fold(0.0, f64::max)
}

fn energy_with_derivative(field: &SpinorGrid, dphi: &[Spinor], params: &ModelParams, potentials: &PotentialSpec) -> Result<f64> {
    if !potentials.is_time_independent() {
        return Err(Error::Config("energy is only defined for time-independent potentials".into()));
    }
    let d = field.domain();
    let eps = params.eps;
    let s1 = Mat2::sigma1();
    let mut kinetic = ZERO;
    let mut rest = 0.0;
    let mut scale = 0.0;
    for (j, v) in field.nodes().enumerate() {
        let x = d.node(j);
        kinetic += inner(&v, &s1.apply(&dphi[j])) * C64::new(0.0, -1.0 / eps);
        let rho = spinor_norm_sqr(&v);
        rest += sigma3_form(&v) / (eps * eps) + potentials.v(0.0, x) * rho - potentials.a1(0.0, x) * sigma1_form(&v)
            + energy_density(&v, params);
        scale += rho;
    }
    let scale = scale * (1.0 / (eps * eps) + 1.0);
    debug_assert!(
        kinetic.im.abs() <= 1e-10 * scale.max(1.0),
        "kinetic energy has imaginary residue {}",
        kinetic.im
    );
    Ok(d.h() * (kinetic.re + rest))
}

/// Energy with the centred difference `δ_xΦ_j = (Φ_{j+1} − Φ_{j−1})/(2h)`.
pub fn discrete_energy_fd(field: &SpinorGrid, params: &ModelParams, potentials: &PotentialSpec) -> Result<f64> {
    let m = field.len();
    let inv = 1.0 / (2.0 * field.domain().h());
    let dphi: Vec<Spinor> = (0..m)
        .map(|j| {
            let (a, b) = (field.node((j + 1) % m), field.node((j + m - 1) % m));
            [(a[0] - b[0]) * inv, (a[1] - b[1]) * inv]
        })
        .collect();
    energy_with_derivative(field, &dphi, params, potentials)
}

/// Energy with the spectral derivative of the trigonometric interpolant.
pub fn discrete_energy_sp(field: &SpinorGrid, params: &ModelParams, potentials: &PotentialSpec) -> Result<f64> {
    let dphi: Vec<Spinor> = spectral_derivative(field).nodes().collect();
    energy_with_derivative(field, &dphi, params, potentials)
}

fn restricted(numeric: &SpinorGrid, reference: &SpinorGrid) -> Result<SpinorGrid> {
    reference.restrict_to(numeric.domain())
}

/// `e = sqrt(hΣ|Φ_j − Φ_ref(x_j)|²)` on the numeric grid.
pub fn l2_error(numeric: &SpinorGrid, reference: &SpinorGrid) -> Result<f64> {
    let r = restricted(numeric, reference)?;
    let sum: f64 = numeric
        .nodes()
        .zip(r.nodes())
        .map(|(a, b)| spinor_norm_sqr(&[a[0] - b[0], a[1] - b[1]]))
        .sum();
    Ok((numeric.domain().h() * sum).sqrt())
}

pub fn l1_density_error(numeric: &SpinorGrid, reference: &SpinorGrid) -> Result<f64> {
    let r = restricted(numeric, reference)?;
    let sum: f64 = density(numeric).iter().zip(density(&r)).map(|(a, b)| (a - b).abs()).sum();
    Ok(numeric.domain().h() * sum)
}

pub fn l1_current_error(numeric: &SpinorGrid, reference: &SpinorGrid, eps: f64) -> Result<f64> {
    let r = restricted(numeric, reference)?;
    let sum: f64 = current(numeric, eps).iter().zip(current(&r, eps)).map(|(a, b)| (a - b).abs()).sum();
    Ok(numeric.domain().h() * sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyKind {
    FiniteDifference,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservableSample {
    pub time: f64,
    pub mass: f64,
    /// `None` when the potentials depend on time.
    pub energy: Option<f64>,
    pub max_amp: f64,
}

impl ObservableSample {
    pub fn measure(time: f64, field: &SpinorGrid, params: &ModelParams, potentials: &PotentialSpec, kind: EnergyKind) -> Self {
        let energy = match kind {
            EnergyKind::FiniteDifference => discrete_energy_fd(field, params, potentials),
            EnergyKind::Spectral => discrete_energy_sp(field, params, potentials),
        }
        .ok();
        ObservableSample { time, mass: discrete_mass(field), energy, max_amp: max_amplitude(field) }
    }
}

/// How often a run records observables and field snapshots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cadence {
    /// Record every `every` steps; 0 records only the initial and final states.
    pub every: usize,
    pub snapshots: bool,
}

impl Cadence {
    pub fn endpoints() -> Self {
        Cadence { every: 0, snapshots: false }
    }

    pub fn every(n: usize) -> Self {
        Cadence { every: n, snapshots: false }
    }

    pub fn records(&self, step: usize, total: usize) -> bool {
        step == 0 || step == total || (self.every > 0 && step.is_multiple_of(self.every))
    }
}

impl Default for Cadence {
    fn default() -> Self {
        Cadence::endpoints()
    }
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub samples: Vec<ObservableSample>,
    pub snapshots: Vec<(f64, SpinorGrid)>,
    pub final_field: SpinorGrid,
    pub final_time: f64,
    pub steps: usize,
}

impl RunTrace {
    pub fn max_relative_mass_drift(&self) -> f64 {
        let m0 = self.samples.first().map_or(0.0, |s| s.mass);
        if m0 == 0.0 {
            return 0.0;
        }
        self.samples.iter().map(|s| ((s.mass - m0) / m0).abs()).fold(0.0, f64::max)
    }

    pub fn max_relative_energy_drift(&self) -> Option<f64> {
        let e0 = self.samples.first()?.energy?;
        let mut worst = 0.0f64;
        for s in &self.samples {
            let e = s.energy?;
            worst = worst.max(((e - e0) / e0.abs().max(f64::MIN_POSITIVE)).abs());
        }
        Some(worst)
    }

    /// `time,mass,energy,max_amp`
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,mass,energy,max_amp")?;
        for s in &self.samples {
            let energy = s.energy.map_or_else(|| "nan".to_string(), |e| format!("{e:.5e}"));
            writeln!(w, "{:.5e},{:.5e},{},{:.5e}", s.time, s.mass, energy, s.max_amp)?;
        }
        Ok(())
    }
}

/// Incremental builder used by the solver run loops.
pub(crate) struct TraceRecorder<'a> {
    params: &'a ModelParams,
    potentials: &'a PotentialSpec,
    kind: EnergyKind,
    cadence: Cadence,
    total: usize,
    samples: Vec<ObservableSample>,
    snapshots: Vec<(f64, SpinorGrid)>,
}

impl<'a> TraceRecorder<'a> {
    pub(crate) fn new(params: &'a ModelParams, potentials: &'a PotentialSpec, kind: EnergyKind, cadence: Cadence, total: usize) -> Self {
        TraceRecorder { params, potentials, kind, cadence, total, samples: Vec::new(), snapshots: Vec::new() }
    }

    pub(crate) fn wants(&self, step: usize) -> bool {
        self.cadence.records(step, self.total)
    }

    pub(crate) fn record(&mut self, step: usize, time: f64, field: &SpinorGrid) {
        if !self.wants(step) {
            return;
        }
        self.samples.push(ObservableSample::measure(time, field, self.params, self.potentials, self.kind));
        if self.cadence.snapshots {
            self.snapshots.push((time, field.clone()));
        }
    }

    pub(crate) fn finish(self, final_field: SpinorGrid, final_time: f64) -> RunTrace {
        RunTrace { samples: self.samples, snapshots: self.snapshots, final_field, final_time, steps: self.total }
    }
}

/// Number of steps `T/τ`, rejecting non-integer ratios beyond 1e−9 relative.
pub fn step_count(t_final: f64, tau: f64) -> Result<usize> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidParameter(format!("T must be finite and >= 0, got {t_final}")));
    }
    let ratio = t_final / tau;
    let n = ratio.round();
    if (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::NonIntegerStepCount { t_final, tau, ratio });
    }
    Ok(n as usize)
}
