//! Executes scenarios and writes their outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use modulus_core::vaisala::{verify_corollary1, verify_theorem2};
use modulus_core::{p_modulus, DensityField, Error, VerificationReport};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::reference;
use crate::render::heatmap_svg;
use crate::report::{csv_text, flatten, grid_json, modulus_json, num, verification_json};
use crate::scenario::{Command, DensityKind, Output, Scenario};

pub const REPORT_SCHEMA: &str = "modulus-report/1";

/// Command-line settings applied on top of a scenario.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    /// Force fixed-order reductions.
    pub deterministic: bool,
    /// Worker threads; `None` keeps rayon's default.
    pub jobs: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub name: String,
    pub report: Value,
    pub passed: bool,
    /// One line per failed assertion, naming the residual.
    pub failures: Vec<String>,
    /// Rows of a sweep that stopped with an error.
    pub errors: Vec<String>,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    /// 0 when every assertion held, 1 when one failed, 2 when a sweep row
    /// stopped with an error.
    pub fn exit_code(&self) -> i32 {
        if !self.errors.is_empty() {
            2
        } else if self.passed {
            0
        } else {
            1
        }
    }
}

/// Runs `scenario` on a pool sized by `overrides.jobs` and writes the
/// requested outputs into `out`.
pub fn execute(mut scenario: Scenario, out: &Path, overrides: &Overrides) -> Result<Outcome> {
    if overrides.deterministic {
        scenario.solver.deterministic = true;
    }
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = overrides.jobs {
        builder = builder.num_threads(j);
    }
    let pool = builder.build().context("building the thread pool")?;
    pool.install(|| match scenario.command {
        Command::Sweep => run_sweep(&scenario, out),
        _ => run_single(&scenario, out),
    })
}

struct Computed {
    result: Value,
    image_grid: Option<Value>,
    mapping: Option<String>,
    passed: bool,
    failures: Vec<String>,
    density: Option<DensityField>,
}

fn check_failures(r: &VerificationReport) -> Vec<String> {
    r.intermediate_checks
        .iter()
        .filter(|(_, c)| !c.passed)
        .map(|(k, c)| format!("{k}: {:e} {} {:e} violated", c.value, c.relation, c.limit))
        .collect()
}

fn compute(s: &Scenario) -> Result<Computed> {
    let fam = s.build_family()?;
    let grid = s.build_source_grid()?;
    let reference = reference::source_modulus(s, s.p);
    let (report, failures) = match p_modulus(&fam, s.p, &grid, &s.solver) {
        Ok(r) => (r, Vec::new()),
        Err(Error::NotConverged { best }) => {
            let msg = format!(
                "relative_gap: {:e} > {:e} violated",
                best.relative_gap(),
                s.solver.tolerance
            );
            (*best, vec![msg])
        }
        Err(e) => return Err(e.into()),
    };
    let mut result = modulus_json(&report, reference);
    result["converged"] = json!(failures.is_empty());
    Ok(Computed {
        result,
        image_grid: None,
        mapping: None,
        passed: failures.is_empty(),
        failures,
        density: Some(report.extremal_density),
    })
}

fn verify(s: &Scenario) -> Result<Computed> {
    let fam = s.build_family()?;
    let f = s.build_mapping()?;
    let source = s.build_source_grid()?;
    let image = s.build_image_grid(&f, &source)?;
    let mut opts = s.verify_options();
    opts.lhs_reference = reference::image_modulus(s);
    let r = match s.command {
        Command::VerifyCorollary1 => verify_corollary1(&fam, &f, s.m, &source, &image, &opts)?,
        _ => {
            let d = s.density.as_ref().context("key `density`: missing")?;
            let rho = match d.kind {
                DensityKind::Extremal => {
                    let r = p_modulus(&fam, s.p, &source, &s.solver)
                        .context("solving for the extremal density")?;
                    r.extremal_density
                }
                DensityKind::Constant => {
                    DensityField::constant(source.clone(), d.value.unwrap_or(0.0))?
                }
            };
            verify_theorem2(&fam, &f, &rho, s.p, s.m, &image, &opts)?
        }
    };
    Ok(Computed {
        result: verification_json(&r),
        image_grid: Some(grid_json(&image)),
        mapping: Some(f.name().to_string()),
        passed: r.passed,
        failures: check_failures(&r),
        density: r.rho_tilde.as_ref().map(|t| t.image_field().clone()),
    })
}

fn base_report(s: &Scenario) -> Result<Value> {
    let fam_kind = s
        .build_family()
        .ok()
        .map(|f| (serde_json::to_value(f.kind()), f.len()));
    let family = match fam_kind {
        Some((Ok(kind), len)) => json!({ "kind": kind, "count": len }),
        _ => Value::Null,
    };
    Ok(json!({
        "schema": REPORT_SCHEMA,
        "name": s.name,
        "command": s.command.as_str(),
        "p": num(s.p),
        "m": s.m,
        "family": family,
        "source_grid": grid_json(&s.build_source_grid()?),
        "solver": {
            "tolerance": num(s.solver.tolerance),
            "deterministic": s.solver.deterministic,
            "execution": s.solver.execution,
        },
    }))
}

fn outputs(s: &Scenario) -> Vec<Output> {
    if s.outputs.is_empty() {
        vec![Output::Report]
    } else {
        s.outputs.clone()
    }
}

/// Runs a non-sweep scenario.
pub fn run_single(s: &Scenario, out: &Path) -> Result<Outcome> {
    let c = match s.command {
        Command::ComputeModulus => compute(s)?,
        Command::VerifyTheorem2 | Command::VerifyCorollary1 => verify(s)?,
        Command::Sweep => anyhow::bail!("nested sweep"),
    };
    let mut report = base_report(s)?;
    report["mapping"] = json!(c.mapping);
    report["image_grid"] = c.image_grid.unwrap_or(Value::Null);
    report["result"] = c.result;
    report["passed"] = json!(c.passed);
    report["failures"] = json!(c.failures);

    let mut files = Vec::new();
    let write = |ext: &str, text: &str, files: &mut Vec<PathBuf>| -> Result<()> {
        let path = out.join(format!("{}.{ext}", s.name));
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        files.push(path);
        Ok(())
    };
    for o in outputs(s) {
        match o {
            Output::Report => write(
                "json",
                &(serde_json::to_string_pretty(&report)? + "\n"),
                &mut files,
            )?,
            Output::Csv => write("csv", &csv_text(&[flatten(&report)])?, &mut files)?,
            Output::Heatmap => {
                let d = c.density.as_ref().context("no density to render")?;
                write("svg", &heatmap_svg(d, &s.name)?, &mut files)?;
            }
            Output::Grid => {
                let d = c.density.as_ref().context("no density to dump")?;
                write(
                    "grid",
                    &modulus_core::io::density_to_grid_text(d),
                    &mut files,
                )?;
            }
        }
    }
    Ok(Outcome {
        name: s.name.clone(),
        report,
        passed: c.passed,
        failures: c.failures,
        errors: Vec::new(),
        files,
    })
}

fn sweep_key(row: &Scenario) -> Value {
    let outer = row
        .family
        .annulus()
        .map(|(_, r)| num(r))
        .unwrap_or(Value::Null);
    json!({
        "name": row.name,
        "m": row.m,
        "p": num(row.p),
        "outer_radius": outer,
        "resolution": row.build_source_grid().ok().map(|g| g.resolution()[0]),
    })
}

/// Runs every row of a sweep on the current pool. A failing row is
/// recorded and the remaining rows still run.
pub fn run_sweep(s: &Scenario, out: &Path) -> Result<Outcome> {
    let rows = s.expand_sweep()?;
    let results: Vec<(Value, f64, std::result::Result<Outcome, String>)> = rows
        .par_iter()
        .map(|row| {
            let t = Instant::now();
            let r = run_single(row, out).map_err(|e| format!("{e:#}"));
            (sweep_key(row), t.elapsed().as_secs_f64(), r)
        })
        .collect();

    let mut json_rows = Vec::new();
    let mut csv_rows = Vec::new();
    let (mut failures, mut errors, mut files) = (Vec::new(), Vec::new(), Vec::new());
    for (key, secs, r) in results {
        let mut row = key.clone();
        let mut flat = flatten(&key);
        flat.insert("wall_time_s".into(), format!("{secs:.3}"));
        match r {
            Ok(o) => {
                row["passed"] = json!(o.passed);
                row["failures"] = json!(o.failures);
                row["result"] = o.report["result"].clone();
                for (k, v) in flatten(&o.report["result"]) {
                    flat.insert(format!("result.{k}"), v);
                }
                flat.insert("passed".into(), o.passed.to_string());
                failures.extend(o.failures.iter().map(|f| format!("{}: {f}", o.name)));
                files.extend(o.files);
            }
            Err(e) => {
                row["error"] = json!(e);
                flat.insert("error".into(), e.clone());
                errors.push(format!("{}: {e}", key["name"].as_str().unwrap_or_default()));
            }
        }
        json_rows.push(row);
        csv_rows.push(flat);
    }
    let passed = failures.is_empty() && errors.is_empty();
    let report = json!({
        "schema": REPORT_SCHEMA,
        "name": s.name,
        "command": "sweep",
        "row_command": s.sweep.as_ref().map(|w| w.command.as_str()),
        "rows": json_rows,
        "passed": passed,
    });
    let csv_path = out.join(format!("{}.csv", s.name));
    std::fs::write(&csv_path, csv_text(&csv_rows)?)
        .with_context(|| format!("writing {}", csv_path.display()))?;
    let json_path = out.join(format!("{}.json", s.name));
    std::fs::write(&json_path, serde_json::to_string_pretty(&report)? + "\n")
        .with_context(|| format!("writing {}", json_path.display()))?;
    files.push(csv_path);
    files.push(json_path);
    Ok(Outcome {
        name: s.name.clone(),
        report,
        passed,
        failures,
        errors,
        files,
    })
}
