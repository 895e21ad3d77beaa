//! Reference solutions: binary format, on-disk cache and self-consistency checks.
//!
//! File layout: `NLDE1`, then little-endian `u32` version, `u64` M, `f64` a,
//! b, eps, time, then `4M` f64 values node-major (Re φ1, Im φ1, Re φ2, Im φ2)
//! and a 32-byte SHA-256 of everything before it.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{run_solver, BenchmarkProblem, SolverId};
use crate::error::{Error, Result};
use crate::linalg::{Spinor, C64};
use crate::observables::Cadence;
use crate::spectral_grid::{Domain1D, SpinorGrid};

pub const MAGIC: &[u8; 5] = b"NLDE1";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 5 + 4 + 8 + 4 * 8;
const HASH_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceHeader {
    pub version: u32,
    pub m: usize,
    pub a: f64,
    pub b: f64,
    pub eps: f64,
    pub time: f64,
}

pub fn encode_reference(field: &SpinorGrid, eps: f64, time: f64) -> Vec<u8> {
    let d = field.domain();
    let mut buf = Vec::with_capacity(HEADER_LEN + 32 * d.m() + HASH_LEN);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(d.m() as u64).to_le_bytes());
    for v in [d.a(), d.b(), eps, time] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for p in field.nodes() {
        for v in [p[0].re, p[0].im, p[1].re, p[1].im] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    buf
}

fn f64_at(bytes: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(bytes[at..at + 8].try_into().expect("8-byte slice"))
}

pub fn decode_reference(bytes: &[u8], path: &Path) -> Result<(ReferenceHeader, SpinorGrid)> {
    let bad = |reason: String| Error::ReferenceFormat { path: path.to_path_buf(), reason };
    if bytes.len() < HEADER_LEN + HASH_LEN || &bytes[..5] != MAGIC {
        return Err(bad("missing NLDE1 magic or truncated header".into()));
    }
    let version = u32::from_le_bytes(bytes[5..9].try_into().expect("4-byte slice"));
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let m = u64::from_le_bytes(bytes[9..17].try_into().expect("8-byte slice")) as usize;
    let expected = m.checked_mul(32).and_then(|p| p.checked_add(HEADER_LEN + HASH_LEN));
    if expected != Some(bytes.len()) {
        return Err(bad(format!("length {} does not match M = {m}", bytes.len())));
    }
    let body = &bytes[..bytes.len() - HASH_LEN];
    if Sha256::digest(body).as_slice() != &bytes[bytes.len() - HASH_LEN..] {
        return Err(bad("content hash mismatch".into()));
    }
    let header = ReferenceHeader {
        version,
        m,
        a: f64_at(bytes, 17),
        b: f64_at(bytes, 25),
        eps: f64_at(bytes, 33),
        time: f64_at(bytes, 41),
    };
    let domain = Domain1D::new(header.a, header.b, m).map_err(|e| bad(e.to_string()))?;
    let nodes: Vec<Spinor> = (0..m)
        .map(|j| {
            let at = HEADER_LEN + 32 * j;
            [C64::new(f64_at(bytes, at), f64_at(bytes, at + 8)), C64::new(f64_at(bytes, at + 16), f64_at(bytes, at + 24))]
        })
        .collect();
    Ok((header, SpinorGrid::from_nodes(domain, &nodes)?))
}

/// Writes atomically: temporary file in the target directory, then rename.
pub fn write_reference(path: &Path, field: &SpinorGrid, eps: f64, time: f64) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(&encode_reference(field, eps, time))?;
    tmp.as_file().sync_all()?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(fs::Permissions::from_mode(0o644))?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn read_reference(path: &Path) -> Result<(ReferenceHeader, SpinorGrid)> {
    decode_reference(&fs::read(path)?, path)
}

/// How a reference is computed: solver, grid and time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSpec {
    pub solver: SolverId,
    pub m: usize,
    pub tau: f64,
}

impl ReferenceSpec {
    pub fn new(solver: SolverId, m: usize, tau: f64) -> Self {
        ReferenceSpec { solver, m, tau }
    }

    pub fn tsfp(m: usize, tau: f64) -> Self {
        ReferenceSpec::new(SolverId::Tsfp, m, tau)
    }

    /// Same reference with twice the step, used for certification.
    pub fn coarsened(&self) -> Self {
        ReferenceSpec { tau: 2.0 * self.tau, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub solver: SolverId,
    pub m: usize,
    pub h: f64,
    pub tau: f64,
    pub eps: f64,
    pub problem_hash: String,
}

impl Provenance {
    pub fn new(problem: &BenchmarkProblem, spec: &ReferenceSpec) -> Self {
        Provenance {
            solver: spec.solver,
            m: spec.m,
            h: (problem.b - problem.a) / spec.m as f64,
            tau: spec.tau,
            eps: problem.params.eps,
            problem_hash: problem.hash(),
        }
    }

    pub fn file_name(&self) -> String {
        format!("{}_eps{:.6e}_M{}_tau{:.6e}_{}.nlde", self.solver, self.eps, self.m, self.tau, &self.problem_hash[..16])
    }
}

#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub field: SpinorGrid,
    pub time: f64,
    pub provenance: Provenance,
}

impl ReferenceSolution {
    pub fn matches(&self, problem: &BenchmarkProblem) -> bool {
        self.provenance.problem_hash == problem.hash()
    }
}

/// Directory of reference files named by provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceCache {
    dir: PathBuf,
}

impl ReferenceCache {
    pub const ENV: &'static str = "NLDE_CACHE";
    pub const DEFAULT_DIR: &'static str = "./nlde-cache";

    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ReferenceCache { dir: dir.into() }
    }

    /// Explicit directory, else `$NLDE_CACHE`, else `./nlde-cache`.
    pub fn resolve(explicit: Option<PathBuf>) -> Self {
        let dir = explicit
            .or_else(|| std::env::var_os(Self::ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(Self::DEFAULT_DIR));
        ReferenceCache::new(dir)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, prov: &Provenance) -> PathBuf {
        self.dir.join(prov.file_name())
    }

    /// Cached field if present; a file whose header disagrees with the provenance is an error.
    pub fn load(&self, prov: &Provenance, problem: &BenchmarkProblem) -> Result<Option<SpinorGrid>> {
        let path = self.path_for(prov);
        if !path.exists() {
            return Ok(None);
        }
        let (header, field) = read_reference(&path)?;
        let consistent = header.m == prov.m
            && header.a == problem.a
            && header.b == problem.b
            && header.eps == prov.eps
            && header.time == problem.t_final;
        if !consistent {
            return Err(Error::ReferenceFormat { path, reason: "header does not match the requested provenance".into() });
        }
        Ok(Some(field))
    }

    pub fn store(&self, prov: &Provenance, field: &SpinorGrid, time: f64) -> Result<PathBuf> {
        let path = self.path_for(prov);
        write_reference(&path, field, prov.eps, time)?;
        Ok(path)
    }
}

/// Runs (or loads) the reference described by `spec`.
pub fn make_reference(problem: &BenchmarkProblem, spec: &ReferenceSpec, cache: Option<&ReferenceCache>) -> Result<ReferenceSolution> {
    let provenance = Provenance::new(problem, spec);
    if let Some(field) = cache.map(|c| c.load(&provenance, problem)).transpose()?.flatten() {
        return Ok(ReferenceSolution { field, time: problem.t_final, provenance });
    }
    let trace = run_solver(problem, spec.solver, spec.m, spec.tau, Cadence::endpoints())?;
    if let Some(c) = cache {
        c.store(&provenance, &trace.final_field, problem.t_final)?;
    }
    Ok(ReferenceSolution { field: trace.final_field, time: problem.t_final, provenance })
}

/// Reference plus its companion at `2τ_e`; for a second-order method the
/// reference error is about a third of their distance.
#[derive(Debug, Clone)]
pub struct CertifiedReference {
    pub reference: ReferenceSolution,
    pub companion: ReferenceSolution,
}

impl CertifiedReference {
    /// `measure(reference, companion) / 3`
    pub fn estimate(&self, measure: impl Fn(&SpinorGrid, &SpinorGrid) -> Result<f64>) -> Result<f64> {
        Ok(measure(&self.reference.field, &self.companion.field)? / 3.0)
    }

    pub fn l2_estimate(&self) -> f64 {
        self.estimate(crate::observables::l2_error).expect("companion shares the reference grid")
    }
}

pub fn certify_reference(problem: &BenchmarkProblem, spec: &ReferenceSpec, cache: Option<&ReferenceCache>) -> Result<CertifiedReference> {
    let reference = make_reference(problem, spec, cache)?;
    let companion = make_reference(problem, &spec.coarsened(), cache)?;
    Ok(CertifiedReference { reference, companion })
}
