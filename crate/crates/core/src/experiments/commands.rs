//! The four experiment drivers behind the command-line subcommands.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::diagnostics::{
    convergence_rates, discrete_energy, dissipation, energy_slack, extrema, masses, RateTable, MASS_TOL,
};
use crate::error::{Error, Result};
use crate::mesh::{l2_error, FemSpace};
use crate::physics::ModelParams;
use crate::stepper::{initial_state, SimState, Stepper};

use super::config::{steps_to, RunConfig, SweepParam};
use super::initial::gen_initial;
use super::output::{
    fmt_f64, write_field_csv, write_rate_table, write_table, write_vtk, TimeSeriesRow, TimeSeriesWriter,
};

pub const TIME_SERIES_FILE: &str = "timeseries.csv";
pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const MIN_C_FILE: &str = "min_c.csv";

/// Structure-preservation audit of one run, accumulated step by step.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub steps: usize,
    pub initial_energy: f64,
    pub final_energy: f64,
    /// Largest `Eⁿ⁺¹ − Eⁿ + D_m + D_g − slack(Eⁿ)`; nonpositive when the
    /// discrete energy inequality holds at every step.
    pub worst_energy_excess: f64,
    /// Largest `Eⁿ⁺¹ − Eⁿ − slack(Eⁿ)`.
    pub worst_energy_increase: f64,
    pub min_dissipation: f64,
    /// Largest `|(cⁿ,1)_h − (c⁰,1)_h| / (1 + |(c⁰,1)_h|)`.
    pub c_mass_drift: f64,
    /// Same for `(φⁿ + στ²μⁿ, 1)_h`.
    pub combo_drift: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub c_min: f64,
    pub c_max: f64,
    pub newton_iterations: usize,
}

impl Certificate {
    pub fn energy_inequality_holds(&self) -> bool {
        self.worst_energy_excess <= 0.0 && self.min_dissipation >= 0.0
    }

    pub fn energy_nonincreasing(&self) -> bool {
        self.worst_energy_increase <= 0.0
    }

    pub fn mass_conserved(&self) -> bool {
        self.c_mass_drift <= MASS_TOL && self.combo_drift <= MASS_TOL
    }

    pub fn phi_in_unit_interval(&self) -> bool {
        self.phi_min > 0.0 && self.phi_max < 1.0
    }

    pub fn passed(&self) -> bool {
        self.energy_inequality_holds() && self.mass_conserved() && self.phi_in_unit_interval()
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = |ok: bool| if ok { "ok" } else { "FAIL" };
        writeln!(f, "certificate after {} steps", self.steps)?;
        writeln!(
            f,
            "  energy {:.10e} -> {:.10e}, inequality excess {:.3e}: {}",
            self.initial_energy,
            self.final_energy,
            self.worst_energy_excess,
            mark(self.energy_inequality_holds())
        )?;
        writeln!(
            f,
            "  mass drift c {:.3e}, phi+stab*mu {:.3e} (tol {:.0e}): {}",
            self.c_mass_drift,
            self.combo_drift,
            MASS_TOL,
            mark(self.mass_conserved())
        )?;
        writeln!(
            f,
            "  phi in [{:.6e}, {:.6e}], inside (0, 1): {}",
            self.phi_min,
            self.phi_max,
            mark(self.phi_in_unit_interval())
        )?;
        write!(
            f,
            "  c in [{:.6e}, {:.6e}], Newton iterations {}",
            self.c_min, self.c_max, self.newton_iterations
        )
    }
}

/// Where a simulation writes its files.
#[derive(Debug, Clone)]
pub struct RunOutputs {
    pub dir: PathBuf,
    pub diag_every: usize,
    /// 0 dumps only the first and last state.
    pub dump_every: usize,
}

/// Result of [`simulate`]: the audit of the steps taken, the last state
/// reached and the solver failure that stopped the run early, if any.
#[derive(Debug)]
pub struct RunOutcome {
    pub certificate: Certificate,
    pub final_state: SimState,
    pub failure: Option<Error>,
}

impl RunOutcome {
    pub fn into_result(self) -> Result<(Certificate, SimState)> {
        match self.failure {
            Some(e) => Err(e),
            None => Ok((self.certificate, self.final_state)),
        }
    }
}

fn dump_fields(dir: &Path, space: &FemSpace, state: &SimState) -> Result<()> {
    let stem = format!("fields_{:06}", state.step);
    write_vtk(&dir.join(format!("{stem}.vtk")), space.mesh(), state)?;
    write_field_csv(&dir.join(format!("{stem}.csv")), space.mesh(), state)
}

/// Runs `n_steps` steps from `initial`, auditing every step and calling
/// `visit` on every state including the initial one. Solver failures end
/// the run and are returned inside the outcome; I/O errors are returned
/// directly.
pub fn simulate(
    params: ModelParams,
    settings: crate::stepper::NewtonSettings,
    initial: SimState,
    n_steps: usize,
    outputs: Option<&RunOutputs>,
    mut visit: impl FnMut(&SimState),
) -> Result<RunOutcome> {
    let mut stepper = Stepper::new(params, settings)?;
    let space = stepper.space().clone();
    let p = params;

    let report0 = discrete_energy(&space, &initial, &p)?;
    let (c0, combo0) = masses(&space, &initial, &p)?;
    let x0 = extrema(&initial);
    let mut cert = Certificate {
        steps: 0,
        initial_energy: report0.total,
        final_energy: report0.total,
        worst_energy_excess: f64::NEG_INFINITY,
        worst_energy_increase: f64::NEG_INFINITY,
        min_dissipation: f64::INFINITY,
        c_mass_drift: 0.0,
        combo_drift: 0.0,
        phi_min: x0.phi_min,
        phi_max: x0.phi_max,
        c_min: x0.c_min,
        c_max: x0.c_max,
        newton_iterations: 0,
    };

    let mut series = match outputs {
        Some(o) => {
            std::fs::create_dir_all(&o.dir).map_err(|e| Error::io(&o.dir, e))?;
            let mut w = TimeSeriesWriter::create(&o.dir.join(TIME_SERIES_FILE))?;
            w.write(&TimeSeriesRow {
                step: 0,
                time: initial.time,
                energy: report0,
                c_mass: c0,
                phi_mu_combo: combo0,
                extrema: x0,
                newton_iters: 0,
            })?;
            dump_fields(&o.dir, &space, &initial)?;
            Some(w)
        }
        None => None,
    };
    visit(&initial);

    let mut energy = report0.total;
    let mut state = initial;
    let mut failure = None;
    for k in 1..=n_steps {
        let (next, stats) = match stepper.advance(&state) {
            Ok(v) => v,
            Err(e) => {
                failure = Some(Error::AtStep {
                    step: state.step + 1,
                    source: Box::new(e),
                });
                break;
            }
        };
        let diss = dissipation(&space, &state, &next, &p)?;
        let report = discrete_energy(&space, &next, &p)?.with_dissipation(diss);
        let (cm, combo) = masses(&space, &next, &p)?;
        let x = extrema(&next);

        let slack = energy_slack(energy);
        cert.worst_energy_excess = cert
            .worst_energy_excess
            .max(report.total - energy + diss.0 + diss.1 - slack);
        cert.worst_energy_increase = cert.worst_energy_increase.max(report.total - energy - slack);
        cert.min_dissipation = cert.min_dissipation.min(diss.0.min(diss.1));
        cert.c_mass_drift = cert.c_mass_drift.max((cm - c0).abs() / (1.0 + c0.abs()));
        cert.combo_drift = cert.combo_drift.max((combo - combo0).abs() / (1.0 + combo0.abs()));
        cert.phi_min = cert.phi_min.min(x.phi_min);
        cert.phi_max = cert.phi_max.max(x.phi_max);
        cert.c_min = cert.c_min.min(x.c_min);
        cert.c_max = cert.c_max.max(x.c_max);
        cert.newton_iterations += stats.iterations;
        cert.steps = k;
        cert.final_energy = report.total;
        energy = report.total;

        if let (Some(w), Some(o)) = (series.as_mut(), outputs) {
            let last = k == n_steps;
            if k % o.diag_every == 0 || last {
                w.write(&TimeSeriesRow {
                    step: next.step,
                    time: next.time,
                    energy: report,
                    c_mass: cm,
                    phi_mu_combo: combo,
                    extrema: x,
                    newton_iters: stats.iterations,
                })?;
            }
            if last || (o.dump_every > 0 && k % o.dump_every == 0) {
                dump_fields(&o.dir, &space, &next)?;
            }
        }
        visit(&next);
        state = next;
    }
    if let Some(w) = series {
        w.finish()?;
    }
    if let (Some(o), Some(_)) = (outputs, &failure) {
        // keep the last good state for inspection
        dump_fields(&o.dir, &space, &state)?;
    }
    Ok(RunOutcome {
        certificate: cert,
        final_state: state,
        failure,
    })
}

/// Seeded initial state of `cfg` on the mesh of `params`.
pub fn initial_for(cfg: &RunConfig, params: &ModelParams) -> Result<SimState> {
    let space = FemSpace::build(params.cells_per_side, params.side_length)?;
    let (phi, c) = gen_initial(space.mesh(), &cfg.initial(), cfg.seed)?;
    initial_state(&space, phi, c, params, cfg.mu_init)
}

fn outputs_of(cfg: &RunConfig, dir: PathBuf) -> RunOutputs {
    RunOutputs {
        dir,
        diag_every: cfg.diag_every,
        dump_every: cfg.dump_every,
    }
}

/// Maps `f` over `items` on up to `available_parallelism` threads; results
/// keep the input order.
fn par_map<T: Send, R: Send>(items: Vec<T>, f: impl Fn(T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(items.len());
    if workers <= 1 {
        return items.into_iter().map(f).collect();
    }
    let n = items.len();
    let queue: Vec<Mutex<Option<T>>> = items.into_iter().map(|t| Mutex::new(Some(t))).collect();
    let results: Vec<Mutex<Option<R>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let item = queue[i].lock().expect("queue lock").take().expect("item taken once");
                let r = f(item);
                *results[i].lock().expect("result lock") = Some(r);
            });
        }
    });
    results
        .into_iter()
        .map(|m| m.into_inner().expect("result lock").expect("every item mapped"))
        .collect()
}

#[derive(Debug)]
pub struct RunSummary {
    pub certificate: Certificate,
    pub final_state: SimState,
    pub out_dir: PathBuf,
}

/// `run`: one simulation with time series, field dumps and a certificate.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    cfg.write_resolved(&cfg.out)?;
    let p = cfg.model_params();
    let initial = initial_for(cfg, &p)?;
    let outputs = outputs_of(cfg, cfg.out.clone());
    let outcome = simulate(p, cfg.newton(), initial, cfg.n_steps()?, Some(&outputs), |_| {})?;
    let (certificate, final_state) = outcome.into_result()?;
    Ok(RunSummary {
        certificate,
        final_state,
        out_dir: cfg.out.clone(),
    })
}

#[derive(Debug)]
pub struct ConvergenceSummary {
    pub table: RateTable,
    pub reference: Certificate,
    /// Certificates of the coarse runs, in table order.
    pub runs: Vec<Certificate>,
}

/// `convergence`: errors at a common end time against a fine-step
/// reference, all runs sharing one seeded initial datum.
pub fn cmd_convergence(cfg: &RunConfig) -> Result<ConvergenceSummary> {
    cfg.validate()?;
    cfg.write_resolved(&cfg.out)?;
    let t = cfg.convergence_tmax;
    let mut taus: Vec<f64> = Vec::new();
    for &tau in &cfg.convergence_taus {
        // a run at the reference step would only reproduce the reference
        if tau != cfg.reference_tau {
            taus.push(tau);
        }
    }
    let mut jobs = vec![(cfg.reference_tau, steps_to(t, cfg.reference_tau, "convergence_tmax")?)];
    for &tau in &taus {
        jobs.push((tau, steps_to(t, tau, "convergence_tmax")?));
    }
    let base = cfg.model_params();
    let initial = initial_for(cfg, &base)?;
    let space = FemSpace::build(base.cells_per_side, base.side_length)?;

    let outcomes = par_map(jobs, |(tau, n)| {
        let p = ModelParams { tau, ..base };
        simulate(p, cfg.newton(), initial.clone(), n, None, |_| {})
    });
    let mut outcomes = outcomes.into_iter();
    let (reference, ref_state) = outcomes.next().expect("reference job")?.into_result()?;

    let mut rows = Vec::new();
    let mut runs = Vec::new();
    let mut failure = None;
    for (tau, outcome) in taus.iter().zip(outcomes) {
        match outcome?.into_result() {
            Ok((cert, state)) => {
                let ep = l2_error(space.mesh(), &state.phi, &ref_state.phi)?;
                let ec = l2_error(space.mesh(), &state.c, &ref_state.c)?;
                rows.push((*tau, ep, ec));
                runs.push(cert);
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    let table = if rows.len() >= 2 {
        convergence_rates(&rows)?
    } else {
        RateTable {
            rows: rows
                .iter()
                .map(|&(tau, ep, ec)| crate::diagnostics::RateRow {
                    tau,
                    error_phi: ep,
                    rate_phi: None,
                    error_c: ec,
                    rate_c: None,
                })
                .collect(),
        }
    };
    write_rate_table(&cfg.out.join(CONVERGENCE_FILE), &table)?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(ConvergenceSummary { table, reference, runs })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinCCell {
    pub mesh: usize,
    pub time: f64,
    /// `None` when the run failed before reaching `time`.
    pub min_c: Option<f64>,
}

#[derive(Debug)]
pub struct MinCSummary {
    pub cells: Vec<MinCCell>,
    /// Per mesh: the certificate of the steps taken and the failure, if any.
    pub runs: Vec<(usize, Certificate, Option<String>)>,
}

impl MinCSummary {
    pub fn cell(&self, mesh: usize, time: f64) -> Option<&MinCCell> {
        self.cells.iter().find(|c| c.mesh == mesh && c.time == time)
    }

    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.2.is_some()).count()
    }
}

/// `min-c`: minimum of `c` over the nodes at several times on several meshes.
pub fn cmd_min_c(cfg: &RunConfig) -> Result<MinCSummary> {
    cfg.validate()?;
    cfg.write_resolved(&cfg.out)?;
    let mut marks = Vec::new();
    for &t in &cfg.min_c_times {
        marks.push((t, steps_to(t, cfg.tau, "min_c_times entry")?));
    }
    let n_steps = marks.iter().map(|m| m.1).max().unwrap_or(0);
    let jobs: Vec<usize> = cfg.min_c_meshes.clone();
    let results = par_map(
        jobs,
        |mesh| -> Result<(usize, Vec<MinCCell>, Certificate, Option<String>)> {
            let p = ModelParams {
                cells_per_side: mesh,
                ..cfg.model_params()
            };
            let initial = initial_for(cfg, &p)?;
            let mut found: Vec<Option<f64>> = vec![None; marks.len()];
            let outcome = simulate(p, cfg.newton(), initial, n_steps, None, |s| {
                for (slot, &(_, step)) in found.iter_mut().zip(&marks) {
                    if s.step == step {
                        *slot = Some(s.c.min());
                    }
                }
            })?;
            let cells = marks
                .iter()
                .zip(found)
                .map(|(&(time, _), min_c)| MinCCell { mesh, time, min_c })
                .collect();
            Ok((mesh, cells, outcome.certificate, outcome.failure.map(|e| e.to_string())))
        },
    );

    let mut cells = Vec::new();
    let mut runs = Vec::new();
    for r in results {
        let (mesh, c, cert, failure) = r?;
        cells.extend(c);
        runs.push((mesh, cert, failure));
    }
    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![
                c.mesh.to_string(),
                fmt_f64(c.time),
                c.min_c.map(fmt_f64).unwrap_or_default(),
                if c.min_c.is_some() { "ok" } else { "failed" }.to_string(),
            ]
        })
        .collect();
    write_table(&cfg.out.join(MIN_C_FILE), &["mesh", "time", "min_c", "status"], &rows)?;
    Ok(MinCSummary { cells, runs })
}

#[derive(Debug)]
pub struct SweepRun {
    pub value: f64,
    pub dir: PathBuf,
    pub certificate: Certificate,
    pub failure: Option<String>,
}

impl SweepRun {
    /// `φ` reached or left the unit interval at some step.
    pub fn left_unit_interval(&self) -> bool {
        !self.certificate.phi_in_unit_interval()
    }
}

#[derive(Debug)]
pub struct SweepSummary {
    pub param: SweepParam,
    pub runs: Vec<SweepRun>,
}

impl SweepSummary {
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.failure.is_some()).count()
    }
}

pub fn sweep_file(param: SweepParam) -> String {
    format!("sweep_{}.csv", param.name())
}

/// `sweep`: one run per value of `param`, all from the same seed. Runs are
/// independent; a failing run is recorded and the others continue.
pub fn cmd_sweep(cfg: &RunConfig, param: SweepParam, values: &[f64]) -> Result<SweepSummary> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let mut members = Vec::new();
    for (k, &v) in values.iter().enumerate() {
        let mut member = param.apply(cfg, v);
        member.out = cfg.out.join(format!("{}_{k:02}", param.name()));
        member.sweep_param = None;
        member.sweep_values = Vec::new();
        member.validate()?;
        members.push(member);
    }
    let mut resolved = cfg.clone();
    resolved.sweep_param = Some(param);
    resolved.sweep_values = values.to_vec();
    resolved.write_resolved(&cfg.out)?;

    let results = par_map(members, |member| -> Result<SweepRun> {
        member.write_resolved(&member.out)?;
        let p = member.model_params();
        let value = match param {
            SweepParam::Tau => member.tau,
            SweepParam::Delta => member.delta,
            SweepParam::Theta0 => member.theta0,
        };
        let initial = initial_for(&member, &p)?;
        let outputs = outputs_of(&member, member.out.clone());
        let outcome = simulate(p, member.newton(), initial, member.n_steps()?, Some(&outputs), |_| {})?;
        Ok(SweepRun {
            value,
            dir: member.out.clone(),
            certificate: outcome.certificate,
            failure: outcome.failure.map(|e| e.to_string()),
        })
    });
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;

    let yes_no = |b: bool| if b { "yes" } else { "no" }.to_string();
    let rows: Vec<Vec<String>> = runs
        .iter()
        .map(|r| {
            let c = &r.certificate;
            vec![
                fmt_f64(r.value),
                r.dir
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                match &r.failure {
                    None => "ok".to_string(),
                    Some(msg) => format!("\"failed: {}\"", msg.replace('"', "'")),
                },
                c.steps.to_string(),
                yes_no(c.energy_nonincreasing()),
                yes_no(c.energy_inequality_holds()),
                fmt_f64(c.phi_min),
                fmt_f64(c.phi_max),
                yes_no(r.left_unit_interval()),
                fmt_f64(c.c_mass_drift),
            ]
        })
        .collect();
    write_table(
        &cfg.out.join(sweep_file(param)),
        &[
            "value",
            "run",
            "status",
            "steps",
            "energy_nonincreasing",
            "energy_inequality",
            "phi_min",
            "phi_max",
            "phi_left_unit_interval",
            "c_mass_drift",
        ],
        &rows,
    )?;
    Ok(SweepSummary { param, runs })
}
