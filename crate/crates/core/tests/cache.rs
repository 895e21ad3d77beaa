use std::fs;

use nlde::harness::{
    certify_reference, make_reference, read_reference, run_plan, BenchmarkProblem, Provenance, ReferenceCache, ReferenceSpec,
    SolverId, StudyContext, StudyPlan,
};
use nlde::observables::l2_error;
use nlde::Error;

fn small_problem() -> BenchmarkProblem {
    BenchmarkProblem::benchmark(1.0).unwrap().with_final_time(0.5).unwrap()
}

#[test]
fn repeated_reference_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cache = ReferenceCache::new(dir.path());
    let p = small_problem();
    let spec = ReferenceSpec::tsfp(64, 0.01);
    let a = make_reference(&p, &spec, Some(&cache)).unwrap();
    let path = cache.path_for(&a.provenance);
    let bytes = fs::read(&path).unwrap();
    fs::remove_file(&path).unwrap();
    let b = make_reference(&p, &spec, Some(&cache)).unwrap();
    assert_eq!(fs::read(&path).unwrap(), bytes);
    assert_eq!(a.field, b.field);
    // cache hit returns the stored field
    let c = make_reference(&p, &spec, Some(&cache)).unwrap();
    assert_eq!(c.field, a.field);
    assert!(c.matches(&p) && !c.matches(&p.with_eps(0.5).unwrap()));
}

#[test]
fn corrupted_cache_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cache = ReferenceCache::new(dir.path());
    let p = small_problem();
    let spec = ReferenceSpec::tsfp(32, 0.05);
    let r = make_reference(&p, &spec, Some(&cache)).unwrap();
    let path = cache.path_for(&r.provenance);
    let mut bytes = fs::read(&path).unwrap();
    bytes[100] ^= 0xff;
    fs::write(&path, bytes).unwrap();
    assert!(matches!(make_reference(&p, &spec, Some(&cache)), Err(Error::ReferenceFormat { .. })));
}

#[test]
fn provenance_names_distinguish_inputs() {
    let p = small_problem();
    let a = Provenance::new(&p, &ReferenceSpec::tsfp(64, 0.01)).file_name();
    for other in [
        Provenance::new(&p, &ReferenceSpec::tsfp(128, 0.01)),
        Provenance::new(&p, &ReferenceSpec::tsfp(64, 0.005)),
        Provenance::new(&p, &ReferenceSpec::new(SolverId::Cnfd, 64, 0.01)),
        Provenance::new(&p.with_eps(0.5).unwrap(), &ReferenceSpec::tsfp(64, 0.01)),
    ] {
        assert_ne!(other.file_name(), a);
    }
}

#[test]
fn richardson_self_consistency() {
    let p = small_problem();
    let m = 128;
    let diff = |tau: f64| {
        let a = make_reference(&p, &ReferenceSpec::tsfp(m, tau), None).unwrap();
        let b = make_reference(&p, &ReferenceSpec::tsfp(m, tau / 2.0), None).unwrap();
        l2_error(&a.field, &b.field).unwrap()
    };
    let (d1, d2) = (diff(0.01), diff(0.005));
    assert!(d1 < 1.0 * 0.01 * 0.01, "{d1:.3e}");
    assert!((d1 / d2 - 4.0).abs() < 0.2);
    let cert = certify_reference(&p, &ReferenceSpec::tsfp(m, 0.005), None).unwrap();
    assert!((cert.l2_estimate() - d1 / 3.0).abs() < 1e-15);
}

#[test]
fn study_against_own_reference_is_zero_and_floored() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = StudyContext::new(Some(ReferenceCache::new(dir.path())), 2).unwrap();
    let p = small_problem();
    let r = ReferenceSpec::tsfp(64, 0.005);
    let plan = StudyPlan::temporal(SolverId::Tsfp, &[1.0], &[0.05, 0.01, 0.005], 64, &[r]);
    let t = run_plan(&ctx, &p, &plan).unwrap();
    let row = &t.rows[0];
    assert_eq!(row[2].error, 0.0);
    assert!(row[2].floor && !row[0].floor);
    // same table with one worker, from the cache
    let ctx1 = StudyContext::new(Some(ReferenceCache::new(dir.path())), 1).unwrap();
    assert_eq!(run_plan(&ctx1, &p, &plan).unwrap().to_csv(), t.to_csv());
    let (h, _) = read_reference(&ReferenceCache::new(dir.path()).path_for(&Provenance::new(&p, &r))).unwrap();
    assert_eq!(h.m, 64);
}

#[test]
fn incompatible_grids_fail_before_running() {
    let ctx = StudyContext::new(None, 1).unwrap();
    let p = small_problem();
    let plan = StudyPlan::spatial(SolverId::Tsfp, &[1.0], &[48], 0.01, ReferenceSpec::tsfp(64, 0.01));
    assert!(matches!(run_plan(&ctx, &p, &plan), Err(Error::IncompatibleResolution { .. })));
}
