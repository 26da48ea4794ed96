//! Acceptance suite. Runs every criterion and prints one PASS/FAIL line per
//! criterion; exits nonzero if any fails.
//!
//! The long simulations (a 5000-step run, the delta sweep, the convergence
//! study and the 90x90 min-c run) take tens of minutes on one core. They run
//! on separate threads so more cores shorten the wall time.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestCaseError, TestRunner};

use chx_core::diagnostics::{discrete_energy, MASS_TOL};
use chx_core::experiments::commands::{Certificate, TIME_SERIES_FILE};
use chx_core::experiments::{cmd_convergence, cmd_min_c, cmd_run, cmd_sweep, RunConfig, SweepParam};
use chx_core::mesh::{build_mesh, l2_norm, lumped_weights, stiffness_matrix, FemSpace, PeriodicMesh};
use chx_core::physics::{
    convex_part, convex_part_prime, convex_part_second, mobility, mobility_matrix, Diffusivity, ModelParams,
};
use chx_core::stepper::{advance, assemble_step_system, initial_state, MuInit, NewtonSettings, SimState};

type Outcome = Result<String, String>;

fn config(name: &str) -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    RunConfig::load(&path).unwrap_or_else(|e| panic!("{e}"))
}

fn out_root() -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

fn check(ok: bool, what: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what.into())
    }
}

/// Runs `f` and turns a panic into an error message.
fn guarded<T>(f: impl FnOnce() -> Result<T, String>) -> Result<T, String> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(p) => Err(format!(
            "panicked: {}",
            p.downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default()
        )),
    }
}

fn log(msg: &str) {
    eprintln!("[acceptance] {msg}");
}

// ---------------------------------------------------------------------------
// long jobs

struct ConvergenceJob {
    rows: Vec<(f64, f64, Option<f64>, f64, Option<f64>)>,
    certificates: Vec<(String, Certificate)>,
}

fn convergence_job() -> Result<ConvergenceJob, String> {
    let mut cfg = config("convergence.toml");
    cfg.out = out_root().join("convergence");
    let s = cmd_convergence(&cfg).map_err(|e| e.to_string())?;
    let rows = s
        .table
        .rows
        .iter()
        .map(|r| (r.tau, r.error_phi, r.rate_phi, r.error_c, r.rate_c))
        .collect();
    let mut certificates = vec![("convergence reference".to_string(), s.reference)];
    for (r, c) in s.table.rows.iter().zip(s.runs) {
        certificates.push((format!("convergence tau={:e}", r.tau), c));
    }
    Ok(ConvergenceJob { rows, certificates })
}

struct LongRunJob {
    certificate: Certificate,
    /// `(time, phi_min, phi_max)` from the time series.
    phi_extrema: Vec<(f64, f64, f64)>,
}

fn long_run_job() -> Result<LongRunJob, String> {
    let mut cfg = config("phase_separation.toml");
    cfg.out = out_root().join("phase_separation");
    let s = cmd_run(&cfg).map_err(|e| e.to_string())?;
    let text = fs::read_to_string(cfg.out.join(TIME_SERIES_FILE)).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or("empty time series")?.split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or(format!("no column {name}"))
    };
    let (t, lo, hi) = (col("time")?, col("phi_min")?, col("phi_max")?);
    let mut phi_extrema = Vec::new();
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        phi_extrema.push((v[t], v[lo], v[hi]));
    }
    Ok(LongRunJob {
        certificate: s.certificate,
        phi_extrema,
    })
}

struct SweepJob {
    /// `(delta, certificate, failure)`
    runs: Vec<(f64, Certificate, Option<String>)>,
}

fn delta_sweep_job() -> Result<SweepJob, String> {
    let mut cfg = config("delta_sweep.toml");
    cfg.out = out_root().join("delta_sweep");
    let values = cfg.sweep_values.clone();
    let s = cmd_sweep(&cfg, SweepParam::Delta, &values).map_err(|e| e.to_string())?;
    Ok(SweepJob {
        runs: s
            .runs
            .into_iter()
            .map(|r| (r.value, r.certificate, r.failure))
            .collect(),
    })
}

struct MinCJob {
    cells: BTreeMap<(usize, u64), Option<f64>>,
    certificates: Vec<(String, Certificate)>,
    failures: Vec<String>,
}

fn min_c_job() -> Result<MinCJob, String> {
    let mut cfg = config("min_c.toml");
    cfg.out = out_root().join("min_c");
    let s = cmd_min_c(&cfg).map_err(|e| e.to_string())?;
    let cells = s.cells.iter().map(|c| ((c.mesh, c.time.to_bits()), c.min_c)).collect();
    let mut certificates = Vec::new();
    let mut failures = Vec::new();
    for (mesh, cert, failure) in s.runs {
        if let Some(f) = failure {
            failures.push(format!("M={mesh}: {f}"));
        }
        certificates.push((format!("min-c M={mesh}"), cert));
    }
    Ok(MinCJob {
        cells,
        certificates,
        failures,
    })
}

// ---------------------------------------------------------------------------
// criteria

fn criterion_1(job: &Result<ConvergenceJob, String>) -> Outcome {
    let job = job.as_ref().map_err(|e| format!("convergence study failed: {e}"))?;
    for (tau, ep, rp, ec, rc) in &job.rows {
        let rate = |r: &Option<f64>| r.map_or("-".into(), |v| format!("{v:.3}"));
        println!(
            "    tau {tau:<8e} err_phi {ep:.4e} rate {:>6}   err_c {ec:.4e} rate {:>6}",
            rate(rp),
            rate(rc)
        );
    }
    check(job.rows.len() == 6, format!("expected 6 rows, got {}", job.rows.len()))?;
    for w in job.rows.windows(2) {
        check(
            w[1].1 < w[0].1 && w[1].3 < w[0].3,
            format!("errors not decreasing from tau={:e} to tau={:e}", w[0].0, w[1].0),
        )?;
    }
    for row in &job.rows[3..] {
        for (name, rate) in [("phi", row.2), ("c", row.4)] {
            let r = rate.ok_or("missing rate")?;
            check(
                (0.8..=1.8).contains(&r),
                format!("{name} rate {r:.3} at tau={:e} outside [0.8, 1.8]", row.0),
            )?;
        }
    }
    Ok("errors decrease monotonically; three finest rates in [0.8, 1.8]".into())
}

fn criterion_2(certificates: &[(String, Certificate)], missing: &[String]) -> Outcome {
    check(
        missing.is_empty(),
        format!("runs without certificate: {}", missing.join("; ")),
    )?;
    let mut worst = f64::NEG_INFINITY;
    for (name, c) in certificates {
        check(
            c.min_dissipation >= 0.0,
            format!("{name}: negative dissipation {:.3e}", c.min_dissipation),
        )?;
        check(
            c.worst_energy_excess <= 0.0,
            format!(
                "{name}: energy inequality violated by {:.3e} beyond slack",
                c.worst_energy_excess
            ),
        )?;
        worst = worst.max(c.worst_energy_excess);
    }
    Ok(format!(
        "{} runs, worst E(n+1)-E(n)+D_m+D_g-slack = {worst:.3e}",
        certificates.len()
    ))
}

fn criterion_3(job: &Result<LongRunJob, String>) -> Outcome {
    let job = job.as_ref().map_err(|e| format!("5000-step run failed: {e}"))?;
    let c = &job.certificate;
    check(c.steps == 5000, format!("run took {} steps", c.steps))?;
    check(
        c.c_mass_drift <= MASS_TOL,
        format!("c mass drift {:.3e}", c.c_mass_drift),
    )?;
    check(
        c.combo_drift <= MASS_TOL,
        format!("phi+stab*mu drift {:.3e}", c.combo_drift),
    )?;
    Ok(format!(
        "5000 steps: c drift {:.3e}, phi+stab*mu drift {:.3e} (tol {MASS_TOL:e})",
        c.c_mass_drift, c.combo_drift
    ))
}

fn criterion_4(long: &Result<LongRunJob, String>, sweep: &Result<SweepJob, String>) -> Outcome {
    let long = long.as_ref().map_err(|e| format!("5000-step run failed: {e}"))?;
    let early: Vec<_> = long.phi_extrema.iter().filter(|r| r.0 <= 1.0 + 1e-12).collect();
    check(
        early.len() == 1001,
        format!("expected 1001 rows for t <= 1, got {}", early.len()),
    )?;
    let lo = early.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let hi = early.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
    check(
        lo > 0.0 && hi < 1.0,
        format!("delta=1e-3: phi in [{lo:e}, {hi:e}] for t <= 1"),
    )?;

    let sweep = sweep.as_ref().map_err(|e| format!("delta sweep failed: {e}"))?;
    let mut flagged = None;
    for (delta, c, failure) in &sweep.runs {
        println!(
            "    delta {delta:<6} phi in [{:.6e}, {:.6e}] energy nonincreasing: {}",
            c.phi_min,
            c.phi_max,
            c.energy_nonincreasing()
        );
        check(
            failure.is_none(),
            format!("delta={delta}: {}", failure.as_deref().unwrap_or("")),
        )?;
        check(c.energy_nonincreasing(), format!("delta={delta}: energy increased"))?;
        if *delta <= 1e-2 {
            check(
                c.phi_in_unit_interval(),
                format!("delta={delta}: phi in [{:e}, {:e}]", c.phi_min, c.phi_max),
            )?;
        }
        if *delta == 0.1 {
            flagged = Some(c.phi_max > 1.0);
        }
    }
    check(sweep.runs.iter().any(|r| r.0 == 0.0), "no delta = 0 run")?;
    check(flagged == Some(true), "delta = 0.1 did not push max phi above 1")?;
    Ok(format!(
        "delta=1e-3 phi in [{lo:.4e}, {hi:.4e}] for t <= 1; delta in {{0, 1e-3, 1e-2}} inside (0, 1); delta=0.1 exceeds 1 with decreasing energy"
    ))
}

fn criterion_5(job: &Result<MinCJob, String>) -> Outcome {
    let job = job.as_ref().map_err(|e| format!("min-c study failed: {e}"))?;
    let cell = |m: usize, t: f64| job.cells.get(&(m, t.to_bits())).copied().flatten();
    for t in [0.2, 0.4, 0.6] {
        let row: Vec<String> = [30, 60, 90]
            .iter()
            .map(|&m| cell(m, t).map_or("failed".into(), |v| format!("{v:>12.4e}")))
            .collect();
        println!("    t={t}  M=30 {}  M=60 {}  M=90 {}", row[0], row[1], row[2]);
    }
    check(job.failures.is_empty(), job.failures.join("; "))?;
    check(
        job.cells.len() == 9,
        format!("expected 9 cells, got {}", job.cells.len()),
    )?;
    let coarse = cell(30, 0.2).ok_or("missing M=30 t=0.2")?;
    let fine = cell(90, 0.2).ok_or("missing M=90 t=0.2")?;
    check(fine > coarse, format!("t=0.2: M=90 {fine:e} <= M=30 {coarse:e}"))?;
    let worst = job.cells.values().flatten().fold(f64::INFINITY, |a, &b| a.min(b));
    check(worst >= -1e-3, format!("min c {worst:e} below -1e-3"))?;
    Ok(format!(
        "t=0.2: M=90 {fine:.3e} > M=30 {coarse:.3e}; worst cell {worst:.3e}"
    ))
}

fn criterion_6() -> Outcome {
    let mut notes = Vec::new();
    fixed_points()?;
    notes.push("fixed points");
    jacobian_matches_differences()?;
    notes.push("Jacobian");
    mesh_oracles()?;
    notes.push("mesh");
    potential_and_mobility_properties()?;
    notes.push("potential/mobility");
    energy_oracle()?;
    notes.push("energy");
    Ok(notes.join(", "))
}

fn criterion_7() -> Outcome {
    let root = out_root().join("determinism");
    let _ = fs::remove_dir_all(&root);

    let mut cfg = RunConfig {
        mesh: 12,
        steps: Some(40),
        dump_every: 10,
        seed: 7,
        out: root.join("run_a"),
        ..RunConfig::default()
    };
    cmd_run(&cfg).map_err(|e| e.to_string())?;
    // second run from the resolved config written by the first
    let mut again = RunConfig::load(&cfg.out.join("resolved_config.toml")).map_err(|e| e.to_string())?;
    again.out = root.join("run_b");
    cmd_run(&again).map_err(|e| e.to_string())?;
    let mut files = compare_trees(&cfg.out, &again.out)?;

    cfg.steps = Some(10);
    cfg.dump_every = 0;
    cfg.out = root.join("sweep_a");
    cmd_sweep(&cfg, SweepParam::Tau, &[2e-3, 1e-3]).map_err(|e| e.to_string())?;
    cfg.out = root.join("sweep_b");
    cmd_sweep(&cfg, SweepParam::Tau, &[2e-3, 1e-3]).map_err(|e| e.to_string())?;
    files += compare_trees(&root.join("sweep_a"), &root.join("sweep_b"))?;

    let conv = |dir: &str| -> Result<(), String> {
        let c = RunConfig {
            mesh: 8,
            convergence_tmax: 0.008,
            reference_tau: 5e-4,
            convergence_taus: vec![4e-3, 2e-3, 1e-3],
            min_c_meshes: vec![6, 8],
            min_c_times: vec![0.004, 0.008],
            tau: 1e-3,
            out: root.join(dir),
            ..RunConfig::default()
        };
        cmd_convergence(&c).map_err(|e| e.to_string())?;
        cmd_min_c(&c).map(|_| ()).map_err(|e| e.to_string())
    };
    conv("tables_a")?;
    conv("tables_b")?;
    files += compare_trees(&root.join("tables_a"), &root.join("tables_b"))?;
    Ok(format!(
        "{files} CSV files byte-identical across repeated run, sweep, convergence and min-c"
    ))
}

/// Compares every CSV under `a` with its counterpart under `b`.
fn compare_trees(a: &Path, b: &Path) -> Result<usize, String> {
    let mut count = 0;
    let mut stack = vec![PathBuf::new()];
    while let Some(rel) = stack.pop() {
        for entry in fs::read_dir(a.join(&rel)).map_err(|e| e.to_string())? {
            let entry = entry.map_err(|e| e.to_string())?;
            let name = rel.join(entry.file_name());
            if entry.file_type().map_err(|e| e.to_string())?.is_dir() {
                stack.push(name);
            } else if name.extension().is_some_and(|x| x == "csv") {
                let x = fs::read(a.join(&name)).map_err(|e| e.to_string())?;
                let y = fs::read(b.join(&name)).map_err(|e| format!("{}: {e}", name.display()))?;
                check(x == y, format!("{} differs", name.display()))?;
                count += 1;
            }
        }
    }
    check(count > 0, "no CSV files compared")?;
    Ok(count)
}

// ---------------------------------------------------------------------------
// oracle checks

fn state(mesh: &PeriodicMesh, phi: Vec<f64>, c: Vec<f64>, mu: Vec<f64>) -> SimState {
    SimState::new(
        mesh.field(phi).unwrap(),
        mesh.field(c).unwrap(),
        mesh.field(mu).unwrap(),
    )
    .unwrap()
}

fn fixed_points() -> Result<(), String> {
    let mut runner = TestRunner::new(PropConfig {
        cases: 24,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let strategy = (
        0.05f64..0.95,
        -0.5f64..1.5,
        prop_oneof![Just(0.0), Just(1e-3), Just(0.05)],
        2usize..7,
    );
    runner
        .run(&strategy, |(phi0, c0, delta, m)| {
            let p = ModelParams {
                delta,
                cells_per_side: m,
                ..ModelParams::default()
            };
            let space = FemSpace::build(m, p.side_length).unwrap();
            let mesh = space.mesh();
            let s0 = initial_state(&space, mesh.constant(phi0), mesh.constant(c0), &p, MuInit::Consistent).unwrap();
            let s1 = advance(&s0, &p, &NewtonSettings::default()).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert_eq!(s1.phi.values(), s0.phi.values());
            prop_assert_eq!(s1.c.values(), s0.c.values());
            prop_assert_eq!(s1.mu.values(), s0.mu.values());
            Ok(())
        })
        .map_err(|e| format!("constant state not a fixed point: {e}"))
}

fn jacobian_matches_differences() -> Result<(), String> {
    let mut seed = 0x9e3779b97f4a7c15u64;
    let mut rand = move || {
        seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (seed >> 11) as f64 / (1u64 << 53) as f64
    };
    for delta in [0.0, 1e-3, 0.1] {
        let p = ModelParams {
            delta,
            cells_per_side: 2,
            tau: 1e-2,
            ..ModelParams::default()
        };
        let space = FemSpace::build(2, p.side_length).unwrap();
        let mesh = space.mesh();
        let n = mesh.node_count();
        let mut draw = |lo: f64, w: f64| (0..n).map(|_| lo + w * rand()).collect::<Vec<_>>();
        let old = state(mesh, draw(0.2, 0.6), draw(0.2, 0.5), draw(-1.0, 2.0));
        let x: Vec<f64> = [draw(0.25, 0.5), draw(0.2, 0.5), draw(-1.0, 2.0)].concat();
        let at = |x: &[f64]| state(mesh, x[..n].to_vec(), x[n..2 * n].to_vec(), x[2 * n..].to_vec());
        let settings = NewtonSettings::default();
        let (_, jac) = assemble_step_system(&space, &old, &at(&x), &p, &settings).map_err(|e| e.to_string())?;
        let dense = jac.to_dense();
        let h = 1e-6;
        for k in 0..3 * n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let (rp, _) = assemble_step_system(&space, &old, &at(&xp), &p, &settings).map_err(|e| e.to_string())?;
            let (rm, _) = assemble_step_system(&space, &old, &at(&xm), &p, &settings).map_err(|e| e.to_string())?;
            for i in 0..3 * n {
                let fd = (rp[i] - rm[i]) / (2.0 * h);
                let err = (fd - dense[i][k]).abs();
                check(
                    err <= 1e-6 * (1.0 + fd.abs()),
                    format!("delta={delta}: J[{i}][{k}] = {} vs difference {fd}", dense[i][k]),
                )?;
            }
        }
    }
    Ok(())
}

fn mesh_oracles() -> Result<(), String> {
    for m in [2usize, 3, 5, 8] {
        let l = 2.0 * std::f64::consts::PI;
        let mesh = build_mesh(m, l).map_err(|e| e.to_string())?;
        let n = m * m;
        // the P1 stiffness of this triangulation is the 5-point Laplacian
        let k = stiffness_matrix(&mesh).to_dense();
        for j in 0..m {
            for i in 0..m {
                let row = j * m + i;
                let mut expected = vec![0.0; n];
                expected[row] += 4.0;
                for (di, dj) in [(1, 0), (m - 1, 0), (0, 1), (0, m - 1)] {
                    expected[((j + dj) % m) * m + (i + di) % m] -= 1.0;
                }
                for col in 0..n {
                    check(
                        (k[row][col] - expected[col]).abs() <= 1e-13,
                        format!("M={m}: K[{row}][{col}] = {} vs {}", k[row][col], expected[col]),
                    )?;
                }
            }
        }
        let h = l / m as f64;
        let beta = lumped_weights(&mesh);
        check(
            beta.values().iter().all(|&b| (b - h * h).abs() <= 1e-14 * h * h),
            format!("M={m}: lumped weights"),
        )?;

        // consistent L2 norm against edge-midpoint quadrature, exact for quadratics
        let u: Vec<f64> = (0..n).map(|j| ((j * 7919) % 13) as f64 / 13.0 - 0.4).collect();
        let mut exact = 0.0;
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let v = tri.map(|j| u[j]);
            let mids = [(v[0] + v[1]) / 2.0, (v[1] + v[2]) / 2.0, (v[2] + v[0]) / 2.0];
            exact += mesh.area(t) / 3.0 * mids.iter().map(|x| x * x).sum::<f64>();
        }
        let got = l2_norm(&mesh, &mesh.field(u).unwrap()).map_err(|e| e.to_string())?;
        check(
            (got - exact.sqrt()).abs() <= 1e-12 * exact.sqrt(),
            format!("M={m}: L2 norm {got} vs {}", exact.sqrt()),
        )?;
    }
    Ok(())
}

fn potential_and_mobility_properties() -> Result<(), String> {
    let mut runner = TestRunner::new(PropConfig {
        cases: 2000,
        failure_persistence: None,
        ..PropConfig::default()
    });
    runner
        .run(&(-1.0f64..2.0, 1e-4f64..0.25), |(phi, delta)| {
            // F1,delta' = f1,delta by central differences
            let h = 1e-6;
            let fd = (convex_part(phi + h, delta).unwrap() - convex_part(phi - h, delta).unwrap()) / (2.0 * h);
            let f = convex_part_prime(phi, delta).unwrap();
            prop_assert!((fd - f).abs() <= 1e-6 * (1.0 + f.abs()), "F' {} vs f {}", fd, f);
            prop_assert!(convex_part_second(phi, delta).unwrap() >= 4.0 - 1e-12);
            Ok(())
        })
        .map_err(|e| format!("regularized potential: {e}"))?;
    runner
        .run(&(1e-6f64..1.0 - 1e-6), |phi| {
            let f2 = convex_part_second(phi, 0.0).unwrap();
            prop_assert!(f2 >= 4.0 - 1e-12);
            Ok(())
        })
        .map_err(|e| format!("unregularized potential: {e}"))?;
    runner
        .run(&(-0.5f64..1.5, -2.0f64..3.0), |(phi, c)| {
            let mm = mobility_matrix(phi, c, Diffusivity::Quadratic);
            let det = mm[0][0] * mm[1][1] - mm[0][1] * mm[1][0];
            let expected = mobility(phi) * c * c;
            prop_assert!((det - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
            prop_assert!(mm[0][1] == mm[1][0]);
            prop_assert!(mm[0][0] >= 0.0 && mm[1][1] >= 0.0 && det >= -1e-15);
            Ok(())
        })
        .map_err(|e| format!("mobility: {e}"))
}

fn energy_oracle() -> Result<(), String> {
    // constant phi = 1/2, c = mu = 0: only the potential contributes
    let p = ModelParams {
        cells_per_side: 10,
        ..ModelParams::default()
    };
    let space = FemSpace::build(10, p.side_length).unwrap();
    let mesh = space.mesh();
    let s = state(mesh, vec![0.5; 100], vec![0.0; 100], vec![0.0; 100]);
    let e = discrete_energy(&space, &s, &p).map_err(|e| e.to_string())?.total;
    let f_half = 0.5f64.ln() + p.theta0 / 8.0;
    let expected = p.side_length * p.side_length * f_half / p.eps;
    check(
        (e - expected).abs() <= 1e-12 * expected.abs(),
        format!("energy {e} vs {expected}"),
    )
}

// ---------------------------------------------------------------------------

fn timed<T>(start: Instant, name: &str, job: fn() -> Result<T, String>) -> Result<T, String> {
    let r = guarded(job);
    log(&format!("{name} finished after {:.0} s", start.elapsed().as_secs_f64()));
    r
}

fn main() {
    let start = Instant::now();
    let _ = fs::remove_dir_all(out_root());
    let (conv, long, sweep, minc, c6, c7) = std::thread::scope(|s| {
        let conv = s.spawn(|| timed(start, "convergence study", convergence_job));
        let long = s.spawn(|| timed(start, "5000-step run", long_run_job));
        let sweep = s.spawn(|| timed(start, "delta sweep", delta_sweep_job));
        let minc = s.spawn(|| timed(start, "min-c study", min_c_job));
        let c6 = guarded(criterion_6);
        let c7 = guarded(criterion_7);
        log(&format!(
            "oracle and determinism checks finished after {:.0} s",
            start.elapsed().as_secs_f64()
        ));
        (
            conv.join().unwrap(),
            long.join().unwrap(),
            sweep.join().unwrap(),
            minc.join().unwrap(),
            c6,
            c7,
        )
    });

    let mut certificates = Vec::new();
    let mut missing = Vec::new();
    match &conv {
        Ok(j) => certificates.extend(j.certificates.iter().cloned()),
        Err(e) => missing.push(format!("convergence: {e}")),
    }
    match &long {
        Ok(j) => certificates.push(("5000-step run".into(), j.certificate.clone())),
        Err(e) => missing.push(format!("5000-step run: {e}")),
    }
    match &sweep {
        Ok(j) => certificates.extend(
            j.runs
                .iter()
                .map(|(d, c, _)| (format!("delta sweep delta={d}"), c.clone())),
        ),
        Err(e) => missing.push(format!("delta sweep: {e}")),
    }
    match &minc {
        Ok(j) => certificates.extend(j.certificates.iter().cloned()),
        Err(e) => missing.push(format!("min-c: {e}")),
    }

    let criteria: Vec<(&str, Box<dyn FnOnce() -> Outcome + '_>)> = vec![
        ("1 temporal convergence", Box::new(|| criterion_1(&conv))),
        ("2 energy stability", Box::new(|| criterion_2(&certificates, &missing))),
        ("3 mass conservation", Box::new(|| criterion_3(&long))),
        ("4 physical bounds", Box::new(|| criterion_4(&long, &sweep))),
        ("5 min-c refinement trend", Box::new(|| criterion_5(&minc))),
        ("6 fixed points and oracles", Box::new(|| c6)),
        ("7 determinism", Box::new(|| c7)),
    ];
    let total = criteria.len();
    let mut failed = 0;
    for (name, f) in criteria {
        match guarded(f) {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.0} s",
        total - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
