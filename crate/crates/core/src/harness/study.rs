//! Convergence studies over `(ε, h, τ)` grids.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use super::reference::{certify_reference, CertifiedReference, Provenance, ReferenceCache, ReferenceSpec};
use super::{run_solver, validate_run, BenchmarkProblem, SolverId};
use crate::error::{Error, Result};
use crate::observables::{l1_current_error, l1_density_error, l2_error, Cadence};
use crate::spectral_grid::SpinorGrid;

/// Cells whose error is below this multiple of the certified reference error
/// are flagged as sitting at the reference floor.
pub const FLOOR_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Space,
    Time,
    EpsDiagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMeasure {
    /// `sqrt(h Σ |Φ − Φ_ref|²)`
    L2,
    /// `h Σ |ρ − ρ_ref|`
    DensityL1,
    /// `h Σ |J − J_ref|`
    CurrentL1,
}

impl ErrorMeasure {
    pub fn suffix(self) -> &'static str {
        match self {
            ErrorMeasure::L2 => "",
            ErrorMeasure::DensityL1 => "/rho",
            ErrorMeasure::CurrentL1 => "/J",
        }
    }

    pub fn eval(self, numeric: &SpinorGrid, reference: &SpinorGrid, eps: f64) -> Result<f64> {
        match self {
            ErrorMeasure::L2 => l2_error(numeric, reference),
            ErrorMeasure::DensityL1 => l1_density_error(numeric, reference),
            ErrorMeasure::CurrentL1 => l1_current_error(numeric, reference, eps),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellPlan {
    pub eps: f64,
    pub m: usize,
    pub tau: f64,
    pub reference: ReferenceSpec,
}

/// Rows of cells; observed orders run along each row with ratio `ratio`.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyPlan {
    pub solver: SolverId,
    pub axis: Axis,
    pub measure: ErrorMeasure,
    pub ratio: f64,
    pub rows: Vec<Vec<CellPlan>>,
}

impl StudyPlan {
    /// One row per ε, one column per `M`, all at step `tau`.
    pub fn spatial(solver: SolverId, eps: &[f64], ms: &[usize], tau: f64, reference: ReferenceSpec) -> Self {
        let rows = eps
            .iter()
            .map(|&e| ms.iter().map(|&m| CellPlan { eps: e, m, tau, reference }).collect())
            .collect();
        StudyPlan { solver, axis: Axis::Space, measure: ErrorMeasure::L2, ratio: ratio_of(ms.iter().map(|&m| 1.0 / m as f64)), rows }
    }

    /// One row per ε, one column per τ, all on `M` nodes; `reference` is per row.
    pub fn temporal(solver: SolverId, eps: &[f64], taus: &[f64], m: usize, reference: &[ReferenceSpec]) -> Self {
        let rows = eps
            .iter()
            .zip(reference)
            .map(|(&e, &r)| taus.iter().map(|&tau| CellPlan { eps: e, m, tau, reference: r }).collect())
            .collect();
        StudyPlan { solver, axis: Axis::Time, measure: ErrorMeasure::L2, ratio: ratio_of(taus.iter().copied()), rows }
    }

    /// Single row `ε_k = ε0/2^k`, `τ_k = τ0/2^{pk}`, `k < count`.
    pub fn diagonal(solver: SolverId, eps0: f64, tau0: f64, p: u32, count: usize, m: usize, reference: &[ReferenceSpec]) -> Self {
        let row = (0..count)
            .zip(reference)
            .map(|(k, &r)| CellPlan { eps: eps0 / 2f64.powi(k as i32), m, tau: tau0 / 2f64.powi((p as usize * k) as i32), reference: r })
            .collect();
        StudyPlan { solver, axis: Axis::EpsDiagonal, measure: ErrorMeasure::L2, ratio: 2f64.powi(p as i32), rows: vec![row] }
    }

    pub fn with_measure(mut self, measure: ErrorMeasure) -> Self {
        self.measure = measure;
        self
    }

    pub fn retain_rows(mut self, keep: impl Fn(f64) -> bool) -> Self {
        self.rows.retain(|r| r.first().is_some_and(|c| keep(c.eps)));
        self
    }

    pub fn truncate_cols(mut self, n: usize) -> Self {
        for r in &mut self.rows {
            r.truncate(n);
        }
        self
    }

    pub fn label(&self) -> String {
        format!("{}{}", self.solver, self.measure.suffix())
    }
}

fn ratio_of(mut steps: impl Iterator<Item = f64>) -> f64 {
    match (steps.next(), steps.next()) {
        (Some(a), Some(b)) if b > 0.0 => a / b,
        _ => 2.0,
    }
}

/// `log_r(e_{k−1}/e_k)`
pub fn observed_order(errors: &[f64], r: f64) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).ln() / r.ln()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableCell {
    pub eps: f64,
    pub h: f64,
    pub tau: f64,
    pub error: f64,
    pub reference_error: f64,
    pub floor: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub label: String,
    pub axis: Axis,
    pub measure: ErrorMeasure,
    pub ratio: f64,
    pub rows: Vec<Vec<TableCell>>,
}

impl ConvergenceTable {
    pub const CSV_HEADER: &'static str = "solver,eps,h,tau,error,order";

    pub fn row_eps(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.first().map(|c| c.eps)).collect()
    }

    pub fn errors(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.iter().map(|c| c.error).collect()).collect()
    }

    /// Orders along each row; `orders[i][k]` pairs columns `k` and `k+1`.
    pub fn orders(&self) -> Vec<Vec<f64>> {
        self.errors().iter().map(|e| observed_order(e, self.ratio)).collect()
    }

    pub fn row(&self, eps: f64) -> Option<&[TableCell]> {
        self.rows.iter().find(|r| r.first().is_some_and(|c| (c.eps - eps).abs() <= 1e-12 * eps)).map(|r| r.as_slice())
    }

    pub fn write_rows<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (row, orders) in self.rows.iter().zip(self.orders()) {
            for (k, c) in row.iter().enumerate() {
                let order = if c.floor {
                    "floor".to_string()
                } else if k == 0 {
                    String::new()
                } else {
                    format!("{:.5e}", orders[k - 1])
                };
                writeln!(w, "{},{:.5e},{:.5e},{:.5e},{:.5e},{}", self.label, c.eps, c.h, c.tau, c.error, order)?;
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        self.write_rows(w)
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

/// Cache, worker count and in-memory reference memo shared by studies.
pub struct StudyContext {
    cache: Option<ReferenceCache>,
    pool: rayon::ThreadPool,
    memo: Mutex<HashMap<String, Slot>>,
}

type Slot = Arc<Mutex<Option<Arc<CertifiedReference>>>>;

impl StudyContext {
    pub fn new(cache: Option<ReferenceCache>, jobs: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        Ok(StudyContext { cache, pool, memo: Mutex::new(HashMap::new()) })
    }

    pub fn cache(&self) -> Option<&ReferenceCache> {
        self.cache.as_ref()
    }

    /// Certified reference, computed at most once per context even under concurrent requests.
    pub fn reference(&self, problem: &BenchmarkProblem, spec: &ReferenceSpec) -> Result<Arc<CertifiedReference>> {
        let key = Provenance::new(problem, spec).file_name();
        let slot = self.memo.lock().expect("memo lock").entry(key).or_default().clone();
        let mut guard = slot.lock().expect("slot lock");
        if let Some(r) = guard.as_ref() {
            return Ok(r.clone());
        }
        let r = Arc::new(certify_reference(problem, spec, self.cache.as_ref())?);
        *guard = Some(r.clone());
        Ok(r)
    }
}

/// Runs every cell of `plan` against its certified reference.
pub fn run_plan(ctx: &StudyContext, problem: &BenchmarkProblem, plan: &StudyPlan) -> Result<ConvergenceTable> {
    let cells: Vec<(usize, CellPlan)> =
        plan.rows.iter().enumerate().flat_map(|(i, r)| r.iter().map(move |c| (i, *c))).collect();
    // everything is validated before the first solver step
    for (_, c) in &cells {
        let p = problem.with_eps(c.eps)?;
        validate_run(&p, plan.solver, c.m, c.tau)?;
        validate_run(&p, c.reference.solver, c.reference.m, c.reference.tau)?;
        validate_run(&p, c.reference.solver, c.reference.m, 2.0 * c.reference.tau)?;
        if c.reference.m % c.m != 0 {
            return Err(Error::IncompatibleResolution { numeric: c.m, reference: c.reference.m });
        }
    }

    let mut distinct: Vec<(f64, ReferenceSpec)> = Vec::new();
    for (_, c) in &cells {
        if !distinct.iter().any(|(e, r)| *e == c.eps && r == &c.reference) {
            distinct.push((c.eps, c.reference));
        }
    }
    ctx.pool.install(|| {
        distinct.par_iter().map(|(e, r)| ctx.reference(&problem.with_eps(*e)?, r).map(|_| ())).collect::<Result<Vec<_>>>()
    })?;

    let measured: Vec<TableCell> = ctx.pool.install(|| {
        cells
            .par_iter()
            .map(|(_, c)| {
                let p = problem.with_eps(c.eps)?;
                let reference = ctx.reference(&p, &c.reference)?;
                let trace = run_solver(&p, plan.solver, c.m, c.tau, Cadence::endpoints())?;
                let error = plan.measure.eval(&trace.final_field, &reference.reference.field, c.eps)?;
                let reference_error = reference.estimate(|a, b| plan.measure.eval(a, b, c.eps))?;
                Ok(TableCell {
                    eps: c.eps,
                    h: (p.b - p.a) / c.m as f64,
                    tau: c.tau,
                    error,
                    reference_error,
                    floor: error < FLOOR_FACTOR * reference_error,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut rows: Vec<Vec<TableCell>> = vec![Vec::new(); plan.rows.len()];
    for ((i, _), cell) in cells.iter().zip(measured) {
        rows[*i].push(cell);
    }
    Ok(ConvergenceTable { label: plan.label(), axis: plan.axis, measure: plan.measure, ratio: plan.ratio, rows })
}

pub fn spatial_study(
    ctx: &StudyContext,
    problem: &BenchmarkProblem,
    solver: SolverId,
    eps: &[f64],
    hs: &[f64],
    tau: f64,
    reference: ReferenceSpec,
) -> Result<ConvergenceTable> {
    let ms = hs.iter().map(|&h| problem.domain_for_h(h).map(|d| d.m())).collect::<Result<Vec<_>>>()?;
    run_plan(ctx, problem, &StudyPlan::spatial(solver, eps, &ms, tau, reference))
}

pub fn temporal_study(
    ctx: &StudyContext,
    problem: &BenchmarkProblem,
    solver: SolverId,
    eps: &[f64],
    taus: &[f64],
    h_e: f64,
    reference: ReferenceSpec,
) -> Result<ConvergenceTable> {
    let m = problem.domain_for_h(h_e)?.m();
    run_plan(ctx, problem, &StudyPlan::temporal(solver, eps, taus, m, &vec![reference; eps.len()]))
}

#[allow(clippy::too_many_arguments)]
pub fn diagonal_study(
    ctx: &StudyContext,
    problem: &BenchmarkProblem,
    solver: SolverId,
    eps0: f64,
    tau0: f64,
    p: u32,
    count: usize,
    h_e: f64,
    reference: ReferenceSpec,
) -> Result<ConvergenceTable> {
    if !(p == 2 || p == 3) {
        return Err(Error::InvalidParameter(format!("diagonal scaling exponent must be 2 or 3, got {p}")));
    }
    let m = problem.domain_for_h(h_e)?.m();
    run_plan(ctx, problem, &StudyPlan::diagonal(solver, eps0, tau0, p, count, m, &vec![reference; count]))
}
