//! The twelve acceptance criteria at their stated sample sizes and tolerances,
//! one test each. `-- --nocapture --test-threads 1` prints the summary lines
//! in order; failing checks print value, target and margin either way.

use std::time::Instant;

use tessforest::rng::RngStream;
use tessforest::tessellation::PartitionKind;
use tessforest::verify::*;

const SEED: u64 = 20240601;

fn criterion(
    k: u64,
    name: &str,
    run: impl FnOnce(&VerifyConfig, &RngStream) -> Result<Vec<Check>>,
) {
    let cfg = VerifyConfig::default();
    let t = Instant::now();
    let checks = match run(&cfg, &RngStream::new(SEED).derive(k)) {
        Ok(checks) => checks,
        Err(e) => {
            println!("criterion {k:>2} FAIL: {name} (error: {e})");
            panic!("criterion {k} errored: {e}");
        }
    };
    let ok = checks.iter().all(|c| c.passed);
    println!(
        "criterion {k:>2} {}: {name} ({} checks, {:.1}s)",
        if ok { "PASS" } else { "FAIL" },
        checks.len(),
        t.elapsed().as_secs_f64()
    );
    for c in &checks {
        println!(
            "    {} {} value={:.6} target={:.6} margin={:.6} | {}",
            if c.passed { "ok  " } else { "FAIL" },
            c.name,
            c.value,
            c.target,
            c.margin,
            c.detail
        );
    }
    assert!(ok, "criterion {k} ({name}) failed");
}

#[test]
fn criterion_01_mondrian_cell_count() {
    criterion(1, "Mondrian cell count", |c, r| {
        Ok(vec![mondrian_count(c, r)?])
    });
}

#[test]
fn criterion_02_isotropic_cell_count() {
    criterion(2, "isotropic cell count", |c, r| {
        Ok(vec![isotropic_count(c, r)?])
    });
}

#[test]
fn criterion_03_zero_cell_scaling() {
    criterion(3, "zero-cell scaling", zero_cell_scaling);
}

#[test]
fn criterion_04_stit_pht_zero_cell_equality() {
    criterion(4, "STIT-PHT zero-cell equality", stit_pht_equality);
}

#[test]
fn criterion_05_iteration_property() {
    criterion(5, "iteration property", |c, r| {
        Ok(vec![markov_iteration(c, r)?])
    });
}

#[test]
fn criterion_06_zero_cell_centering() {
    criterion(6, "zero-cell centering", zero_cell_centering);
}

#[test]
fn criterion_07_rate_c0_stit() {
    criterion(7, "rate C0, STIT", |c, r| {
        Ok(vec![rate_c0(c, PartitionKind::Stit, r)?.0])
    });
}

#[test]
fn criterion_08_rate_c1_forest() {
    criterion(8, "rate C1 forest", rate_c1);
}

#[test]
fn criterion_09_rate_c0_pht() {
    criterion(9, "rate C0, PHT", |c, r| {
        Ok(vec![rate_c0(c, PartitionKind::Pht, r)?.0])
    });
}

#[test]
fn criterion_10_risk_decomposition() {
    criterion(10, "risk decomposition", |c, r| {
        Ok(vec![decomposition(c, r)?])
    });
}

#[test]
fn criterion_11_forest_dominance() {
    criterion(11, "forest dominance", |c, r| Ok(vec![jensen(c, r)?]));
}

#[test]
fn criterion_12_lp_and_geometry_properties() {
    criterion(12, "LP and geometry properties", property_suite);
}
