//! Cross-module checks that validate computed solutions and persisted
//! artifacts against independent constructions: an exact characteristic
//! integral identity for the evolution, a high-resolution Simpson oracle
//! for the weighted profile integrals, and a round-trip of the diagnostics
//! CSV against the in-memory rows.

use std::sync::Arc;

use wavemap_core::config::RunConfig;
use wavemap_core::diagnostics::DiagnosticsRecord;
use wavemap_core::estimates::sobolev_hardy;
use wavemap_core::grid::RadialGrid;
use wavemap_core::harness::{run_experiment, ExperimentReport};
use wavemap_core::manifold::TargetManifold;
use wavemap_core::solver::{evolve, init_state, EvolveOptions, InitialData};

// ─────────────── characteristic diamond identity ───────────────
//
// For any C² field, the four-corner alternating sum over a characteristic
// diamond equals the integral of the mixed null derivative over its
// interior. With χ = r Φ and the evolution equation, that derivative is
//
//     χ_uv = (−Φ_r + 4 r B(Φ)(Φ_u, Φ_v)) / 4,
//
// so a midpoint evaluation must match the corner sum to fourth order in
// the diamond radius. Nothing in the integrator enforces this relation;
// it holds only if the computed field actually solves the equation.

struct DiamondDefect {
    /// Corner sum minus the full midpoint source.
    with_source: f64,
    /// Same with the curvature term dropped — should be much worse on a
    /// curved target.
    without_curvature: f64,
}

fn diamond_defect(target: Arc<TargetManifold>, data: &InitialData, dr: f64) -> DiamondDefect {
    let grid = Arc::new(RadialGrid::new(dr, 6.0).unwrap());
    let state = init_state(data, grid.clone(), target.clone(), 1.3).unwrap();
    let dt = 0.5 * dr;
    let traj = evolve(
        state,
        1.25,
        dt,
        EvolveOptions { save_every: 1, ..Default::default() },
        &mut [],
    )
    .unwrap();

    // Diamond radius δ = 16 dr = 32 dt, centered at t = 1 and the node
    // nearest r = 2; every corner then lies exactly on the space-time grid.
    let delta = 16.0 * dr;
    let k_c = (1.0 / dt).round() as usize;
    let k_d = 32;
    let j_c = (2.0 / dr - 0.5).round() as usize;
    let j_d = 16;
    let r_c = grid.node(j_c);

    let corner = |k: usize, j: usize, c: usize| grid.node(j) * traj.snapshots[k].phi.node(j)[c];

    let center = &traj.snapshots[k_c];
    assert!((center.t - 1.0).abs() < 1e-12);
    let phi_r = center.phi_r();
    let p = center.phi.node(j_c);
    let pt = center.phi_t.node(j_c);
    let pr = phi_r.node(j_c);
    let n = p.len();
    // The finite-difference radial derivative carries an O(dr²) normal
    // component; project it out so the null derivatives are exactly tangent.
    let phi_u: Vec<f64> = (0..n).map(|c| 0.5 * (pt[c] - pr[c])).collect();
    let phi_v: Vec<f64> = (0..n).map(|c| 0.5 * (pt[c] + pr[c])).collect();
    let phi_u = target.tangent_project(p, &phi_u).unwrap();
    let phi_v = target.tangent_project(p, &phi_v).unwrap();
    let b = target.second_fundamental_form(p, &phi_u, &phi_v).unwrap();

    let mut with_source = 0.0_f64;
    let mut without_curvature = 0.0_f64;
    for c in 0..n {
        let corner_sum = corner(k_c + k_d, j_c, c) + corner(k_c - k_d, j_c, c)
            - corner(k_c, j_c + j_d, c)
            - corner(k_c, j_c - j_d, c);
        let area = 4.0 * delta * delta;
        let linear_part = -0.25 * pr[c];
        let full = linear_part + r_c * b[c];
        with_source = with_source.max((corner_sum - area * full).abs());
        without_curvature = without_curvature.max((corner_sum - area * linear_part).abs());
    }
    DiamondDefect { with_source, without_curvature }
}

#[test]
fn flat_diamond_corner_sum_matches_the_source_integral_at_fourth_order() {
    let target = Arc::new(TargetManifold::flat(2).unwrap());
    let data = InitialData::gaussian(0.4, 0.25, 1.2);
    let coarse = diamond_defect(target.clone(), &data, 0.015625);
    let fine = diamond_defect(target, &data, 0.0078125);
    assert!(coarse.with_source > 1e-12, "degenerate test: {}", coarse.with_source);
    let ratio = coarse.with_source / fine.with_source;
    assert!(
        ratio > 8.0,
        "expected ≈16× defect drop per halving, got {ratio} ({} → {})",
        coarse.with_source,
        fine.with_source
    );
}

#[test]
fn sphere_diamond_identity_needs_the_curvature_source() {
    let target = Arc::new(TargetManifold::unit_sphere(3).unwrap());
    let data = InitialData::gaussian(1.0, 0.25, 1.2);
    let coarse = diamond_defect(target.clone(), &data, 0.015625);
    let fine = diamond_defect(target, &data, 0.0078125);
    let ratio = coarse.with_source / fine.with_source;
    assert!(
        ratio > 8.0,
        "expected ≈16× defect drop per halving, got {ratio} ({} → {})",
        coarse.with_source,
        fine.with_source
    );
    assert!(
        fine.without_curvature > 10.0 * fine.with_source,
        "dropping the curvature term should break the identity: {} vs {}",
        fine.without_curvature,
        fine.with_source
    );
}

// ─────────────── Simpson oracle for weighted integrals ───────────────

/// Composite Simpson over [0, hi] with `n` (even) intervals.
fn simpson(f: impl Fn(f64) -> f64, hi: f64, n: usize) -> f64 {
    let h = hi / n as f64;
    let mut acc = f(0.0) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * h);
    }
    acc * h / 3.0
}

#[test]
fn weighted_profile_integrals_match_a_simpson_oracle() {
    let beta = 0.2;
    let dr = 2f64.powi(-9);
    let grid = RadialGrid::new(dr, 8.0).unwrap();
    let psi_fn = |r: f64| r * (-r * r).exp();
    let dpsi_fn = |r: f64| (1.0 - 2.0 * r * r) * (-r * r).exp();
    let psi: Vec<f64> = grid.nodes().iter().map(|&r| psi_fn(r)).collect();

    let report = sobolev_hardy(&grid, &psi, beta).unwrap();

    let n = 1 << 16;
    let lhs_oracle = simpson(|r| psi_fn(r).powi(4) * r.powf(beta), 8.0, n);
    // ψ ~ r at the origin, so the negatively weighted integrand extends
    // continuously by 0 there; dodge the 0·∞ float evaluation.
    let b1 = simpson(
        |r| if r == 0.0 { 0.0 } else { psi_fn(r).powi(2) * r.powf(-beta) },
        8.0,
        n,
    );
    let b2 = simpson(|r| psi_fn(r).powi(2) * r, 8.0, n);
    let b3 = simpson(|r| dpsi_fn(r).powi(2) * r, 8.0, n);
    let rhs_oracle = b1 * b2.powf(beta) * b3.powf(1.0 - beta);

    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    assert!(rel(report.lhs, lhs_oracle) < 5e-4, "lhs {} vs {}", report.lhs, lhs_oracle);
    assert!(rel(report.rhs, rhs_oracle) < 5e-4, "rhs {} vs {}", report.rhs, rhs_oracle);
    let ratio = report.ratio.unwrap();
    assert!(ratio > 0.0 && ratio < 1.0, "inequality ratio out of range: {ratio}");
}

// ─────────────── CSV round trip ───────────────

#[test]
fn persisted_series_round_trips_bitwise_and_rows_pass_invariants() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        r#"
[experiment]
kind = "run"
[output]
dir = "{}"
[grid]
dr = 0.0625
r_max = 8.0
[time]
t_end = 0.5
cfl = 0.5
[target]
kind = "sphere"
[data]
family = "ring"
amplitude = 0.2
width = 0.4
center = 2.0
"#,
        dir.path().display()
    );
    let config = RunConfig::from_toml_str(&text).unwrap();
    let rows = match run_experiment(&config).unwrap() {
        ExperimentReport::Run(rec) => rec.rows,
        other => panic!("expected run report, got {other:?}"),
    };
    assert!(rows.len() >= 3);

    let csv = std::fs::read_to_string(dir.path().join("series.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), DiagnosticsRecord::COLUMNS.join(","));

    let mut prev: Option<DiagnosticsRecord> = None;
    for (line, expected) in lines.zip(&rows) {
        let parsed: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let values = expected.values();
        assert_eq!(parsed.len(), values.len());
        for (a, b) in parsed.iter().zip(values.iter()) {
            assert_eq!(a.to_bits(), b.to_bits(), "CSV cell does not round-trip: {a} vs {b}");
        }
        assert_eq!(expected.invariant_defect(prev.as_ref()), None);
        prev = Some(*expected);
    }
}
