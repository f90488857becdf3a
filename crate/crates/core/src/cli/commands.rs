//! Subcommand bodies. Every config check runs before any computation.

use std::path::Path;

use serde::Serialize;

use crate::conservative::{self, periodicity_scan, PotentialProfile, ScanSummary, DEFAULT_SCAN_H_MAX};
use crate::integrator::{integrate, Channel, EventRecord, StepStats, VectorField};
use crate::invariants::{rrr_invariant, DriftReport, Evaluator};
use crate::kinematics::CartState;
use crate::rescale::{integrate_tau, verify_rrr_equivalence, ResidualReport, TauRaySystem};
use crate::superposition::{consistent_initial_state, verify_superposition};
use crate::systems::{SystemId, SystemSpec};

use super::config::ScenarioConfig;
use super::output::{sidecar, suffixed, write_json, write_text, Table};
use super::{plotdata, CliError, Figure};

pub const DEFAULT_SCAN_N: usize = 1000;
pub const DEFAULT_VERIFY_TOL: f64 = 1e-6;
/// Sample-by-sample bound on `|I_tau - I_RRR|`.
pub const INVARIANT_MATCH_TOL: f64 = 1e-10;

#[derive(Debug, Serialize)]
struct SimulateSummary<'a> {
    system: SystemId,
    samples: usize,
    drift: Vec<DriftReport>,
    events: &'a [EventRecord],
    stats: StepStats,
}

fn check_channels(id: SystemId, channels: &[Channel]) -> Result<(), CliError> {
    for ch in channels {
        let ok = id.is_emp() && matches!(ch, Channel::AccumT | Channel::Theta);
        if !ok {
            return Err(CliError::Config(format!(
                "channel {:?} is not available for {id}",
                ch.name()
            )));
        }
    }
    Ok(())
}

pub fn simulate(config: &Path, out: &Path) -> Result<String, CliError> {
    let cfg = ScenarioConfig::load(config)?;
    let spec = cfg.system_spec()?;
    let id = spec.id;
    let names = id.component_names();
    let y0 = cfg.initial_state(Some(id), names)?;
    let kinds = cfg.invariants(id)?;
    check_channels(id, &cfg.outputs.channels)?;
    let probes = cfg.probes(names)?;
    let icfg = cfg.integrator()?;
    let mut evaluators = kinds
        .iter()
        .map(|&k| Evaluator::new(&spec, k))
        .collect::<crate::Result<Vec<_>>>()
        .map_err(CliError::from_config)?;

    spec.check_state(&y0)?;
    for ev in &mut evaluators {
        ev.anchor(&y0)?;
    }
    let traj = integrate(&spec, 0.0, &y0, &icfg, &probes)?;

    let mut header: Vec<&str> = vec!["t"];
    header.extend_from_slice(names);
    header.push("gamma");
    header.extend(evaluators.iter().map(|e| e.name()));
    header.extend(traj.channels.iter().map(|(c, _)| c.column()));
    let mut table = Table::new(&header);
    let mut series = vec![Vec::with_capacity(traj.len()); evaluators.len()];
    for (i, (&t, y)) in traj.t.iter().zip(&traj.states).enumerate() {
        let mut row = Vec::with_capacity(header.len());
        row.push(t);
        row.extend_from_slice(y);
        row.push(spec.gamma(y)?);
        for (ev, s) in evaluators.iter().zip(&mut series) {
            let v = ev.value(t, y)?;
            s.push(v);
            row.push(v);
        }
        row.extend(traj.channels.iter().map(|(_, v)| v[i]));
        table.push(row);
    }
    let drift = evaluators
        .iter()
        .zip(&series)
        .map(|(ev, s)| DriftReport::from_series(ev.name(), &traj.t, s))
        .collect::<crate::Result<Vec<_>>>()?;

    write_text(out, &table.to_csv())?;
    let summary = SimulateSummary {
        system: id,
        samples: traj.len(),
        drift,
        events: &traj.events,
        stats: traj.stats,
    };
    write_json(&sidecar(out), &summary)?;
    let mut msg = format!("{id}: {} samples", traj.len());
    for d in &summary.drift {
        msg.push_str(&format!(", {} drift {:.3e}", d.name, d.max_rel));
    }
    Ok(msg)
}

fn optional_config(config: Option<&Path>) -> Result<ScenarioConfig, CliError> {
    match config {
        Some(p) => ScenarioConfig::load(p),
        None => Ok(ScenarioConfig::default()),
    }
}

fn points(cfg: &ScenarioConfig, default: usize) -> Result<usize, CliError> {
    match cfg.n {
        Some(0) => Err(CliError::Config("\"n\" must be at least 1".into())),
        Some(n) => Ok(n),
        None => Ok(default),
    }
}

pub fn plot_data(figure: Figure, config: Option<&Path>, out: &Path) -> Result<String, CliError> {
    let cfg = optional_config(config)?;
    let levels = cfg
        .levels
        .clone()
        .unwrap_or_else(|| plotdata::DEFAULT_LEVELS.to_vec());
    if let Some(h) = levels.iter().find(|h| !(**h >= 1.0 && h.is_finite())) {
        return Err(CliError::Config(format!("energy levels must be >= 1, got {h}")));
    }
    match figure {
        Figure::Fig1 => {
            let grid = plotdata::fig1_grid(plotdata::FIG1_NX, plotdata::FIG1_NV)?;
            let lv = plotdata::fig1_levels(&levels, points(&cfg, plotdata::LEVEL_POINTS)?)?;
            write_text(out, &grid.to_csv())?;
            let lpath = suffixed(out, "_levels");
            write_text(&lpath, &lv.to_csv())?;
            Ok(format!(
                "fig1: {} grid points, {} level points",
                grid.rows.len(),
                lv.rows.len()
            ))
        }
        Figure::Fig2 => {
            let t = plotdata::fig2(&levels, points(&cfg, plotdata::PROFILE_POINTS)?)?;
            write_text(out, &t.to_csv())?;
            Ok(format!("fig2: {} curves", levels.len()))
        }
        Figure::Fig3 => {
            let h = cfg.energy.unwrap_or(2.0);
            let j = if config.is_some() { cfg.params.j } else { 0.5 };
            let (t, profile) = plotdata::fig3(h, j, points(&cfg, plotdata::PROFILE_POINTS)?)
                .map_err(CliError::from_config)?;
            write_text(out, &t.to_csv())?;
            write_json(&sidecar(out), &profile)?;
            Ok(format!("fig3: H = {h}, J = {j}, rho* = {}", profile.equilibrium))
        }
        Figure::Fig4 => {
            let h_max = cfg.h_max.unwrap_or(DEFAULT_SCAN_H_MAX);
            let t =
                plotdata::fig4(h_max, points(&cfg, plotdata::FIG4_POINTS)?).map_err(CliError::from_config)?;
            write_text(out, &t.to_csv())?;
            Ok(format!(
                "fig4: F({h_max}) = {}",
                t.rows.last().map_or(f64::NAN, |r| r[1])
            ))
        }
    }
}

pub fn scan(
    config: Option<&Path>,
    n: Option<usize>,
    seed: Option<u64>,
    out: &Path,
) -> Result<String, CliError> {
    let cfg = optional_config(config)?;
    let n = n.or(cfg.n).unwrap_or(DEFAULT_SCAN_N);
    if n == 0 {
        return Err(CliError::Config("scan needs n >= 1".into()));
    }
    let seed = seed.or(cfg.seed).unwrap_or(0);
    let h_max = cfg.h_max.unwrap_or(DEFAULT_SCAN_H_MAX);
    if !(h_max > 1.0 && h_max.is_finite()) {
        return Err(CliError::Config(format!("h_max must exceed 1, got {h_max}")));
    }
    let result = periodicity_scan(n, seed, h_max)?;
    let mut table = Table::new(&["index", "rho", "v", "J", "H", "F", "satisfied"]);
    for s in &result.samples {
        table.push(vec![
            s.index as f64,
            s.rho,
            s.v,
            s.j,
            s.h,
            s.bound,
            f64::from(u8::from(s.satisfied)),
        ]);
    }
    write_text(out, &table.to_csv())?;
    let summary: &ScanSummary = &result.summary;
    write_json(&sidecar(out), summary)?;
    Ok(format!(
        "scan: {}/{} satisfy J^2 < F(H) (fraction {})",
        summary.satisfied, summary.n, summary.fraction
    ))
}

#[derive(Debug, Serialize)]
struct SuperposeSummary {
    delta: f64,
    j: f64,
    samples: usize,
    max_deviation: f64,
    invariant_deviation: f64,
    tolerance: f64,
    passed: bool,
}

fn tolerance(flag: Option<f64>, cfg: &ScenarioConfig) -> Result<f64, CliError> {
    let tol = flag.or(cfg.tolerance).unwrap_or(DEFAULT_VERIFY_TOL);
    if tol > 0.0 && tol.is_finite() {
        Ok(tol)
    } else {
        Err(CliError::Config(format!("tolerance must be positive, got {tol}")))
    }
}

/// `(x, vx, rho, rhodot)` from the config; missing `x`, `vx` are derived
/// from the phase.
fn superposition_state(cfg: &ScenarioConfig, spec: &SystemSpec, delta: f64) -> Result<Vec<f64>, CliError> {
    let (rho, rhodot, given) = match (&cfg.initial, &cfg.initial_polar) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "give either \"initial\" or \"initial_polar\", not both".into(),
            ))
        }
        (Some(map), None) => {
            if let Some(k) = map
                .keys()
                .find(|k| !["x", "vx", "rho", "rhodot"].contains(&k.as_str()))
            {
                return Err(CliError::Config(format!("unknown state component {k:?}")));
            }
            let get = |k: &str| {
                map.get(k)
                    .copied()
                    .ok_or_else(|| CliError::Config(format!("missing state component {k:?}")))
            };
            let given = match (map.get("x"), map.get("vx")) {
                (Some(&x), Some(&vx)) => Some((x, vx)),
                (None, None) => None,
                _ => return Err(CliError::Config("give both \"x\" and \"vx\" or neither".into())),
            };
            (get("rho")?, get("rhodot")?, given)
        }
        (None, Some(p)) => (p.rho, p.rhodot, None),
        (None, None) => return Err(CliError::Config("missing \"initial\" state".into())),
    };
    let derived = consistent_initial_state(spec, rho, rhodot, delta)?;
    let (x, vx) = given.unwrap_or((derived.x, derived.vx));
    Ok(vec![x, vx, rho, rhodot])
}

pub fn superpose(config: &Path, out: &Path, tol: Option<f64>) -> Result<String, CliError> {
    let cfg = ScenarioConfig::load(config)?;
    let spec = cfg.system_spec()?;
    if !spec.id.is_emp() {
        return Err(CliError::Config(format!(
            "superpose needs REL_EMP, got {}",
            spec.id
        )));
    }
    if !(spec.params.j > 0.0) {
        return Err(CliError::Config(format!(
            "superposition needs J > 0, got {}",
            spec.params.j
        )));
    }
    let delta = cfg.delta.unwrap_or(0.0);
    if !delta.is_finite() {
        return Err(CliError::Config("\"delta\" must be finite".into()));
    }
    let tol = tolerance(tol, &cfg)?;
    let icfg = cfg.integrator()?;
    let init = superposition_state(&cfg, &spec, delta)?;
    spec.check_state(&init)?;

    let r = verify_superposition(&spec, &init, delta, &icfg)?;
    let mut table = Table::new(&["t", "x_ref", "x_reconstructed", "deviation"]);
    for ((t, a), b) in r.t.iter().zip(&r.x_reference).zip(&r.x_reconstructed) {
        table.push(vec![*t, *a, *b, (a - b).abs()]);
    }
    write_text(out, &table.to_csv())?;
    let passed = r.max_deviation <= tol && r.invariant_deviation <= tol;
    let summary = SuperposeSummary {
        delta,
        j: spec.params.j,
        samples: r.t.len(),
        max_deviation: r.max_deviation,
        invariant_deviation: r.invariant_deviation,
        tolerance: tol,
        passed,
    };
    write_json(&sidecar(out), &summary)?;
    let msg = format!(
        "superpose: max deviation {:.3e}, invariant deviation {:.3e} (tol {tol:e})",
        r.max_deviation, r.invariant_deviation
    );
    if passed {
        Ok(msg)
    } else {
        Err(CliError::Verification(msg))
    }
}

#[derive(Debug, Serialize)]
struct RescaleSummary {
    report: ResidualReport,
    tolerance: f64,
    invariant_tolerance: f64,
    passed: bool,
}

pub fn rescale_check(config: &Path, out: &Path, tol: Option<f64>) -> Result<String, CliError> {
    let cfg = ScenarioConfig::load(config)?;
    if let Some(id) = cfg.system.filter(|id| *id != SystemId::RelRr) {
        return Err(CliError::Config(format!(
            "rescale-check maps onto REL_RR, got {id}"
        )));
    }
    if cfg.kappa_sq.is_some() {
        return Err(CliError::Config(
            "rescale-check takes \"omega_sq\", not \"kappa_sq\"".into(),
        ));
    }
    let omega_sq = cfg
        .omega_sq
        .as_ref()
        .ok_or_else(|| CliError::Config("missing \"omega_sq\"".into()))?
        .to_freq("tau")?;
    cfg.params.validate().map_err(CliError::from_config)?;
    let sys = TauRaySystem::new(omega_sq, cfg.couplings()?, cfg.params.c).map_err(CliError::from_config)?;
    let init = cfg.initial_state(None, sys.component_names())?;
    let tol = tolerance(tol, &cfg)?;
    let icfg = cfg.integrator()?;

    let pair = integrate_tau(&sys, &init, &icfg)?;
    let report = verify_rrr_equivalence(&pair, &sys)?;
    let mut table = Table::new(&["t", "tau", "x", "y", "vx", "vy", "gamma", "I_RRR", "I_tau"]);
    for (k, (ts, tp)) in pair.t_states.iter().zip(&pair.tau_states_at_t).enumerate() {
        let s = CartState {
            t: pair.t[k],
            x: ts[0],
            y: ts[1],
            vx: ts[2],
            vy: ts[3],
        };
        let i_t = rrr_invariant(&s, &sys.couplings.f, &sys.couplings.g, sys.c)?;
        let i_tau = sys.invariant(tp)?;
        table.push(vec![
            pair.t[k],
            pair.tau_of_t[k],
            ts[0],
            ts[1],
            ts[2],
            ts[3],
            sys.gamma(tp[2], tp[3]),
            i_t,
            i_tau,
        ]);
    }
    write_text(out, &table.to_csv())?;
    let passed =
        report.max_residual < tol && report.max_invariant_mismatch < INVARIANT_MATCH_TOL && report.monotone;
    let msg = format!(
        "rescale-check: residual {:.3e} (tol {tol:e}), invariant mismatch {:.3e}",
        report.max_residual, report.max_invariant_mismatch
    );
    write_json(
        &sidecar(out),
        &RescaleSummary {
            report,
            tolerance: tol,
            invariant_tolerance: INVARIANT_MATCH_TOL,
            passed,
        },
    )?;
    if passed {
        Ok(msg)
    } else {
        Err(CliError::Verification(msg))
    }
}

pub fn analyze_potential(config: &Path, out: &Path) -> Result<String, CliError> {
    let cfg = ScenarioConfig::load(config)?;
    let h = cfg
        .energy
        .ok_or_else(|| CliError::Config("missing energy \"H\"".into()))?;
    let n = points(&cfg, plotdata::PROFILE_POINTS)?;
    let one_d = match cfg.system {
        None | Some(SystemId::RelEmp) => false,
        Some(SystemId::Rel1d) => true,
        Some(id) => return Err(CliError::Config(format!("no pseudo-potential for {id}"))),
    };
    let (profile, coordinate): (PotentialProfile, &str) = if one_d {
        (
            conservative::profile_1d(h, n).map_err(CliError::from_config)?,
            "x",
        )
    } else {
        (
            conservative::profile_rel_emp(h, cfg.params.j, n).map_err(CliError::from_config)?,
            "rho",
        )
    };
    write_text(out, &plotdata::profile_table(&profile, coordinate).to_csv())?;
    write_json(&sidecar(out), &profile)?;
    Ok(format!(
        "analyze-potential: return points ({}, {}), equilibrium {}",
        profile.return_points.0, profile.return_points.1, profile.equilibrium
    ))
}
