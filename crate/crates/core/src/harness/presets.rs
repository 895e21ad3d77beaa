//! Study plans for the benchmark tables at desk and full scale.

use std::fmt;
use std::str::FromStr;

use super::reference::ReferenceSpec;
use super::study::{ErrorMeasure, StudyPlan};
use super::SolverId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableName {
    T1,
    T2,
    T3,
    T4,
    T5,
    T7,
    T8,
}

impl TableName {
    pub const ALL: [TableName; 7] =
        [TableName::T1, TableName::T2, TableName::T3, TableName::T4, TableName::T5, TableName::T7, TableName::T8];
}

impl fmt::Display for TableName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TableName::T1 => "t1",
            TableName::T2 => "t2",
            TableName::T3 => "t3",
            TableName::T4 => "t4",
            TableName::T5 => "t5",
            TableName::T7 => "t7",
            TableName::T8 => "t8",
        };
        f.write_str(s)
    }
}

impl FromStr for TableName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TableName::ALL
            .into_iter()
            .find(|t| t.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown table '{s}' (expected one of t1 t2 t3 t4 t5 t7 t8)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scale {
    #[default]
    Desk,
    PaperExact,
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Desk => "desk",
            Scale::PaperExact => "paper-exact",
        })
    }
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "desk" => Ok(Scale::Desk),
            "paper-exact" | "paper_exact" | "full" => Ok(Scale::PaperExact),
            other => Err(Error::Config(format!("unknown scale '{other}' (expected desk or paper-exact)"))),
        }
    }
}

/// Nodes on the benchmark interval of length 32 for mesh size `h`.
fn nodes(h: f64) -> usize {
    (32.0 / h).round() as usize
}

fn eps_rows(n: usize) -> Vec<f64> {
    (0..n).map(|k| 0.5f64.powi(k as i32)).collect()
}

fn geometric(x0: f64, r: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| x0 / r.powi(k as i32)).collect()
}

/// Resolutions and reference steps for one scale.
struct Settings {
    /// Temporal studies for the spectral methods and their TSFP reference.
    spectral_m: usize,
    spectral_ref_tau: f64,
    /// CNFD temporal studies: grid and reference.
    cnfd_m: usize,
    cnfd_ref: ReferenceSpec,
    /// CNFD spatial studies: run step and TSFP reference.
    cnfd_space_tau: f64,
    cnfd_space_ref: ReferenceSpec,
    /// TSFP spatial studies: run step.
    tsfp_space_tau: f64,
    /// Rows per table (ε0 down to ε0/2^{n−1}).
    rows_t1: usize,
    rows_temporal: usize,
    cols_t3: usize,
    diagonal_len: usize,
}

fn settings(scale: Scale) -> Settings {
    match scale {
        Scale::Desk => Settings {
            spectral_m: 512,
            spectral_ref_tau: 1e-5,
            cnfd_m: 512,
            cnfd_ref: ReferenceSpec::new(SolverId::Cnfd, 512, 0.1 / 8192.0),
            cnfd_space_tau: 1e-4,
            cnfd_space_ref: ReferenceSpec::tsfp(4096, 1e-4),
            tsfp_space_tau: 1e-5,
            rows_t1: 2,
            rows_temporal: 4,
            cols_t3: 4,
            diagonal_len: 4,
        },
        Scale::PaperExact => Settings {
            spectral_m: 512,
            spectral_ref_tau: 1e-7,
            cnfd_m: nodes(1.0 / 4096.0),
            cnfd_ref: ReferenceSpec::tsfp(nodes(1.0 / 4096.0), 1e-7),
            cnfd_space_tau: 1e-6,
            cnfd_space_ref: ReferenceSpec::tsfp(nodes(1.0 / 4096.0), 1e-7),
            tsfp_space_tau: 1e-6,
            rows_t1: 5,
            rows_temporal: 6,
            cols_t3: 5,
            diagonal_len: 5,
        },
    }
}

/// Plans reproducing table `name`; several plans share one CSV.
pub fn table_plans(name: TableName, scale: Scale) -> Vec<StudyPlan> {
    let s = settings(scale);
    let tsfp_ref = ReferenceSpec::tsfp(s.spectral_m, s.spectral_ref_tau);
    let temporal_rows = eps_rows(s.rows_temporal);
    let spectral_refs = vec![tsfp_ref; temporal_rows.len()];
    match name {
        TableName::T1 => {
            let ms: Vec<usize> = geometric(1.0 / 8.0, 2.0, 5).into_iter().map(nodes).collect();
            vec![StudyPlan::spatial(SolverId::Cnfd, &eps_rows(s.rows_t1), &ms, s.cnfd_space_tau, s.cnfd_space_ref)]
        }
        TableName::T2 => {
            let ms: Vec<usize> = geometric(2.0, 2.0, 5).into_iter().map(nodes).collect();
            let reference = ReferenceSpec::tsfp(s.spectral_m, s.spectral_ref_tau.min(s.tsfp_space_tau));
            vec![StudyPlan::spatial(SolverId::Tsfp, &temporal_rows, &ms, s.tsfp_space_tau, reference)]
        }
        TableName::T3 => {
            let rows = eps_rows(s.rows_t1);
            let refs = vec![s.cnfd_ref; rows.len()];
            vec![StudyPlan::temporal(SolverId::Cnfd, &rows, &geometric(0.1, 8.0, s.cols_t3), s.cnfd_m, &refs)]
        }
        TableName::T4 => {
            vec![StudyPlan::temporal(SolverId::EwiFp, &temporal_rows, &geometric(0.1, 4.0, 6), s.spectral_m, &spectral_refs)]
        }
        TableName::T5 => {
            vec![StudyPlan::temporal(SolverId::Tsfp, &temporal_rows, &geometric(0.4, 4.0, 6), s.spectral_m, &spectral_refs)]
        }
        TableName::T7 => {
            let n = s.diagonal_len;
            vec![
                StudyPlan::diagonal(SolverId::Cnfd, 1.0, 0.1, 3, n, s.cnfd_m, &vec![s.cnfd_ref; n]),
                StudyPlan::diagonal(SolverId::EwiFp, 1.0, 0.1, 2, n, s.spectral_m, &vec![tsfp_ref; n]),
                StudyPlan::diagonal(SolverId::Tsfp, 1.0, 0.1, 2, n, s.spectral_m, &vec![tsfp_ref; n]),
            ]
        }
        TableName::T8 => {
            let base = StudyPlan::temporal(SolverId::Tsfp, &temporal_rows, &geometric(0.4, 4.0, 7), s.spectral_m, &spectral_refs);
            vec![base.clone().with_measure(ErrorMeasure::DensityL1), base.with_measure(ErrorMeasure::CurrentL1)]
        }
    }
}
