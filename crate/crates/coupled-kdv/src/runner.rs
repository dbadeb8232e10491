//! Experiment orchestration and persistence: dispatches a validated config
//! to the named experiment, writes JSONL records, plot-ready two-column TSV
//! curves, a fully-resolved config echo and a human-readable summary into a
//! per-run directory named by the config hash.
//!
//! All file writes happen from this single module; experiment internals may
//! parallelize but never touch the filesystem.

use crate::coeffs::{classify, invariant_weight};
use crate::config::{ExperimentKind, ResolvedRun, RunConfig};
use crate::dynamics::{
    evolve, lifespan_delta, ObserverSpec, DEFAULT_LIFESPAN_C0, DEFAULT_LIFESPAN_EXPONENT,
};
use crate::error::{Error, Result};
use crate::experiments::{
    acl_defect_scan, commutator_inequality_scan, commutator_scaling_fit, default_rho_grid,
    default_sigma_grid, default_xi_grid, picard_contraction_study, predicted_lower_bound_curve,
    radius_decay_experiment,
};
use crate::record::{RecordRow, RunRecord, RunStatus};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

/// Where a run landed and whether it finished cleanly. A failed run (for
/// example a detected blow-up) still leaves its partial artifacts on disk.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub success: bool,
    pub summary: String,
}

/// Default positive strip widths for the scanning experiments: 9 log-spaced
/// values covering two decades.
pub fn default_scan_sigmas() -> Vec<f64> {
    (0..9)
        .map(|i| 10f64.powf(-3.0 + 2.0 * i as f64 / 8.0))
        .collect()
}

pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    let resolved = config.resolve()?;
    let run_dir = resolved.config.output.dir.join(resolved.config.run_id()?);
    fs::create_dir_all(&run_dir)?;
    fs::write(
        run_dir.join("config.toml"),
        resolved.config.canonical_toml()?,
    )?;

    let class = classify(&resolved.coeffs);
    if resolved.config.output.enforce_admissibility
        && !class.admissible
        && resolved.config.experiment.kind != ExperimentKind::Classify
    {
        return Err(Error::Config(format!(
            "system is outside the admissible ranges (a2/a1 = {}, requires {}); \
             set output.enforce_admissibility = false to run anyway",
            class.ratio,
            class.required_constraints.join(", ")
        )));
    }

    let started = Instant::now();
    let mut summary = String::new();
    writeln!(
        summary,
        "experiment: {}",
        resolved.config.experiment.kind.name()
    )
    .unwrap();
    writeln!(
        summary,
        "system: a1 = {}, a2 = {}, c = [{}, {}, {}, {}]",
        resolved.coeffs.a1,
        resolved.coeffs.a2,
        resolved.coeffs.c11,
        resolved.coeffs.c12,
        resolved.coeffs.c21,
        resolved.coeffs.c22
    )
    .unwrap();
    writeln!(
        summary,
        "admissibility: {} (a2/a1 = {}, regime {:?}, requires {})",
        if class.admissible {
            "admissible"
        } else {
            "NOT admissible"
        },
        class.ratio,
        class.regime,
        class.required_constraints.join(", ")
    )
    .unwrap();

    let success = dispatch(&resolved, &run_dir, &mut summary)?;

    writeln!(
        summary,
        "wall-time: {:.3} s",
        started.elapsed().as_secs_f64()
    )
    .unwrap();
    fs::write(run_dir.join("summary.txt"), &summary)?;
    Ok(RunOutcome {
        run_dir,
        success,
        summary,
    })
}

fn dispatch(resolved: &ResolvedRun, run_dir: &Path, summary: &mut String) -> Result<bool> {
    let ex = &resolved.config.experiment;
    match ex.kind {
        ExperimentKind::Classify => {
            let class = classify(&resolved.coeffs);
            let eta = invariant_weight(&resolved.coeffs);
            writeln!(
                summary,
                "available estimates: {:?}",
                class.available_estimates
            )
            .unwrap();
            match eta {
                Some(eta) => writeln!(summary, "conserved weight: eta = {eta}").unwrap(),
                None => writeln!(summary, "conserved weight: none").unwrap(),
            }
            let report = json!({ "class": class, "eta": eta });
            fs::write(
                run_dir.join("classification.json"),
                serde_json::to_string_pretty(&report)?,
            )?;
            Ok(true)
        }

        ExperimentKind::Simulate => {
            let t_final = ex.t_final.ok_or_else(|| {
                Error::Config("experiment.t_final is required for simulate".into())
            })?;
            let observers = ObserverSpec {
                stride: ex.stride,
                gevrey_sigmas: ex.sigmas.clone().unwrap_or_default(),
                track_radius: ex.track_radius,
                noise_floor: ex.noise_floor,
            };
            let record = evolve(
                &resolved.state,
                &resolved.coeffs,
                &resolved.stepper,
                t_final,
                &observers,
            )?;
            write_record_jsonl(&run_dir.join("record.jsonl"), resolved, &record)?;
            write_tsv(
                &run_dir.join("pair_l2.tsv"),
                "t\tpair_l2",
                record.rows.iter().map(|r| (r.time, r.pair_l2)),
            )?;
            if let Some(eta) = invariant_weight(&resolved.coeffs) {
                write_tsv(
                    &run_dir.join("invariant.tsv"),
                    "t\tQ",
                    record.rows.iter().map(|r| (r.time, r.q_u + eta * r.q_v)),
                )?;
            }
            if ex.track_radius {
                write_tsv(
                    &run_dir.join("radius.tsv"),
                    "t\tsigma_hat",
                    record.rows.iter().filter_map(|r| {
                        let ru = r.radius_u.as_ref()?.sigma_hat;
                        let rv = r.radius_v.as_ref()?.sigma_hat;
                        Some((r.time, ru.min(rv)))
                    }),
                )?;
            }
            writeln!(summary, "status: {:?}", record.status).unwrap();
            writeln!(summary, "steps: {}", record.steps_taken).unwrap();
            if let Some(last) = record.rows.last() {
                writeln!(
                    summary,
                    "final: t = {}, pair L2 = {:.6e}",
                    last.time, last.pair_l2
                )
                .unwrap();
            }
            Ok(record.completed())
        }

        ExperimentKind::Radius => {
            let t_final = ex.t_final.unwrap_or(50.0);
            let result = radius_decay_experiment(
                &resolved.state,
                &resolved.coeffs,
                &resolved.stepper,
                t_final,
                ex.noise_floor,
                ex.epsilon_tolerance,
            )?;
            write_tsv(
                &run_dir.join("radius_measured.tsv"),
                "t\tsigma_hat",
                result.per_time_radii.iter().map(|(t, r)| (*t, r.sigma_hat)),
            )?;
            let norm0 = resolved.state.u_hat.l2_norm() + resolved.state.v_hat.l2_norm();
            let sigma0 = result.per_time_radii[0].1.sigma_hat;
            let times: Vec<f64> = result.per_time_radii.iter().map(|(t, _)| *t).collect();
            let c_b = result.c_hat.max(1e-12);
            let predicted = predicted_lower_bound_curve(
                norm0,
                sigma0,
                ex.rho,
                DEFAULT_LIFESPAN_C0,
                DEFAULT_LIFESPAN_EXPONENT,
                c_b,
                &times,
            );
            write_tsv(
                &run_dir.join("radius_predicted.tsv"),
                "t\tsigma_lower_bound",
                times.iter().copied().zip(predicted.iter().copied()),
            )?;
            fs::write(
                run_dir.join("decay_fit.json"),
                serde_json::to_string_pretty(&result)?,
            )?;
            writeln!(
                summary,
                "fitted decay: sigma_hat ~ {:.4e} * t^{:.4} over t in [{:.3}, {:.3}]",
                result.c_hat, result.exponent_hat, result.window.0, result.window.1
            )
            .unwrap();
            writeln!(
                summary,
                "decay-consistency verdict: {} (threshold exponent {:.4})",
                if result.consistent {
                    "consistent"
                } else {
                    "INCONSISTENT"
                },
                -4.0 / 3.0 - ex.epsilon_tolerance
            )
            .unwrap();
            Ok(result.consistent)
        }

        ExperimentKind::AclScan => {
            let mut sigmas = vec![0.0];
            sigmas.extend(ex.sigmas.clone().unwrap_or_else(default_scan_sigmas));
            sigmas.retain(|s| *s >= 0.0);
            sigmas.dedup();
            let result = acl_defect_scan(
                &resolved.state,
                &resolved.coeffs,
                &sigmas,
                ex.rho,
                &resolved.stepper,
            )?;
            write_record_jsonl(&run_dir.join("record.jsonl"), resolved, &result.record)?;
            write_tsv(
                &run_dir.join("defect.tsv"),
                "sigma\tdefect",
                result.defects.iter().copied(),
            )?;
            writeln!(summary, "lifespan surrogate delta = {:.6e}", result.delta).unwrap();
            match &result.exponent {
                Some(fit) => writeln!(
                    summary,
                    "defect exponent: {:.4} +/- {:.4} ({} points clipped)",
                    fit.slope, fit.slope_stderr, result.clipped
                )
                .unwrap(),
                None => writeln!(summary, "defect exponent: not fittable").unwrap(),
            }
            writeln!(
                summary,
                "fitted C_b = {:.6e} at rho = {}",
                result.c_b, result.rho
            )
            .unwrap();
            fs::write(
                run_dir.join("acl_scan.json"),
                serde_json::to_string_pretty(&result)?,
            )?;
            Ok(true)
        }

        ExperimentKind::CommutatorScan => {
            let sigmas = ex.sigmas.clone().unwrap_or_else(default_scan_sigmas);
            let result = commutator_scaling_fit(&resolved.state, &resolved.coeffs, &sigmas)?;
            for (name, term) in [("f1", &result.f1), ("f2", &result.f2)] {
                match term {
                    Some(scaling) => {
                        write_tsv(
                            &run_dir.join(format!("{name}_norm.tsv")),
                            "sigma\tl2_norm",
                            scaling.norms.iter().copied(),
                        )?;
                        writeln!(
                            summary,
                            "{name} scaling exponent: {:.4} +/- {:.4}",
                            scaling.fit.slope, scaling.fit.slope_stderr
                        )
                        .unwrap();
                    }
                    None => writeln!(summary, "{name}: identically zero, skipped").unwrap(),
                }
            }
            fs::write(
                run_dir.join("commutator_scan.json"),
                serde_json::to_string_pretty(&result)?,
            )?;
            Ok(true)
        }

        ExperimentKind::Picard => {
            let deltas = ex.deltas.clone().unwrap_or_else(|| {
                let norm0 = resolved.state.u_hat.l2_norm() + resolved.state.v_hat.l2_norm();
                let delta = lifespan_delta(norm0, DEFAULT_LIFESPAN_C0, DEFAULT_LIFESPAN_EXPONENT);
                [0.25, 0.5, 1.0, 2.0, 4.0]
                    .iter()
                    .map(|f| f * delta)
                    .collect()
            });
            let study = picard_contraction_study(
                &resolved.state,
                &resolved.coeffs,
                &deltas,
                ex.n_iters,
                ex.quadrature_nodes,
            )?;
            write_tsv(
                &run_dir.join("contraction.tsv"),
                "delta\tmax_ratio",
                study
                    .per_delta
                    .iter()
                    .filter_map(|d| d.max_ratio.map(|r| (d.delta, r))),
            )?;
            for d in &study.per_delta {
                writeln!(
                    summary,
                    "delta = {:.6e}: max ratio {}{}",
                    d.delta,
                    d.max_ratio.map_or("n/a".into(), |r| format!("{r:.4}")),
                    if d.failed { " (diverged)" } else { "" }
                )
                .unwrap();
            }
            match study.delta_star {
                Some(d) => writeln!(summary, "contraction lost at delta* = {d:.6e}").unwrap(),
                None => writeln!(summary, "contraction held over all tested deltas").unwrap(),
            }
            fs::write(
                run_dir.join("picard_study.json"),
                serde_json::to_string_pretty(&study)?,
            )?;
            Ok(!study.per_delta.is_empty() && !study.per_delta[0].failed)
        }

        ExperimentKind::InequalityScan => {
            let xi = default_xi_grid();
            let sigmas = ex.sigmas.clone().unwrap_or_else(default_sigma_grid);
            let rhos = default_rho_grid();
            let report = commutator_inequality_scan(&xi, &sigmas, &rhos);
            writeln!(
                summary,
                "max LHS/RHS ratio: {:.15} over {} tuples",
                report.max_ratio, report.tuples
            )
            .unwrap();
            if let Some(w) = &report.worst {
                writeln!(
                    summary,
                    "worst tuple: xi1 = {}, xi2 = {}, sigma = {}, rho = {}",
                    w.xi1, w.xi2, w.sigma, w.rho
                )
                .unwrap();
            }
            let holds = report.max_ratio <= 1.0 + 1e-12;
            writeln!(
                summary,
                "inequality verdict: {}",
                if holds { "holds" } else { "VIOLATED" }
            )
            .unwrap();
            fs::write(
                run_dir.join("inequality_scan.json"),
                serde_json::to_string_pretty(&report)?,
            )?;
            Ok(holds)
        }
    }
}

// ---------------------------------------------------------------------------
// Persistence formats
// ---------------------------------------------------------------------------

/// First line of every record file: run identity plus the (only) volatile
/// field, the timestamp. Everything after it is deterministic per config.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct JsonlMeta {
    experiment: String,
    run_id: String,
    seed: u64,
    timestamp: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum JsonlLine {
    Meta(JsonlMeta),
    Row(RecordRow<f64>),
    Status { status: RunStatus, steps_taken: u64 },
}

fn write_record_jsonl(path: &Path, resolved: &ResolvedRun, record: &RunRecord<f64>) -> Result<()> {
    let mut file = fs::File::create(path)?;
    let meta = JsonlLine::Meta(JsonlMeta {
        experiment: resolved.config.experiment.kind.name().into(),
        run_id: resolved.config.run_id()?,
        seed: resolved.config.output.seed,
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    });
    writeln!(file, "{}", serde_json::to_string(&meta)?)?;
    for row in &record.rows {
        writeln!(
            file,
            "{}",
            serde_json::to_string(&JsonlLine::Row(row.clone()))?
        )?;
    }
    let status = JsonlLine::Status {
        status: record.status.clone(),
        steps_taken: record.steps_taken,
    };
    writeln!(file, "{}", serde_json::to_string(&status)?)?;
    Ok(())
}

/// Read back a `record.jsonl`; wall-time is not persisted there (it lives in
/// the summary), so the returned record reports 0.
pub fn read_record_jsonl(path: &Path) -> Result<RunRecord<f64>> {
    let file = fs::File::open(path)?;
    let mut record = RunRecord::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<JsonlLine>(&line)? {
            JsonlLine::Meta(_) => {}
            JsonlLine::Row(row) => record.push_row(row)?,
            JsonlLine::Status {
                status,
                steps_taken,
            } => {
                record.status = status;
                record.steps_taken = steps_taken;
            }
        }
    }
    Ok(record)
}

fn write_tsv(path: &Path, header: &str, pairs: impl Iterator<Item = (f64, f64)>) -> Result<()> {
    let mut file = fs::File::create(path)?;
    writeln!(file, "# {header}")?;
    for (x, y) in pairs {
        writeln!(file, "{x:.17e}\t{y:.17e}")?;
    }
    Ok(())
}

/// Read back a two-column TSV curve written by this module.
pub fn read_tsv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let file = fs::File::open(path)?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut cols = trimmed.split('\t');
        let parse = |field: Option<&str>| -> Result<f64> {
            field
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Config(format!("malformed TSV line {}", lineno + 1)))
        };
        let x = parse(cols.next())?;
        let y = parse(cols.next())?;
        if cols.next().is_some() {
            return Err(Error::Config(format!(
                "trailing columns on TSV line {}",
                lineno + 1
            )));
        }
        out.push((x, y));
    }
    Ok(out)
}
