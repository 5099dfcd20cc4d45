//! p-modulus of a finite curve family on a grid.
//!
//! The discrete problem is
//!
//! ```text
//!     minimize   Σ_c v ρ_c^p
//!     subject to (A ρ)_γ ≥ 1   for every curve γ,   ρ ≥ 0,
//! ```
//!
//! where `v` is the cell measure and row `A_γ` holds the interpolation
//! weights of the midpoint-rule line integral along `γ`, so that
//! `(A ρ)_γ` equals [`line_integral`]. For `p > 1` the Lagrangian is
//! minimised in closed form by `ρ_c = ((Aᵀλ)_c / (p v))^{1/(p−1)}`, which
//! leaves the smooth concave dual
//!
//! ```text
//!     g(λ) = Σ_γ λ_γ − (p−1) Σ_c v ρ_c(λ)^p,      ∇g = 1 − A ρ(λ).
//! ```
//!
//! The solver maximises `g` over `λ ≥ 0` restricted to an active set of
//! curves (accelerated projected gradient with backtracking and adaptive
//! restart), growing the active set with the most violated curves. Every
//! iterate yields a certified admissible density by rescaling with the
//! smallest line integral; its energy is an upper bound and `g` a lower
//! bound for the discrete modulus. `p = 1` is an LP; it is handled with a
//! small quadratic regulariser that is tightened until the LP gap closes.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::curves::{line_integral, Curve};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::family::CurveFamily;
use crate::grid::{DensityField, Grid, MAX_DIM};

pub use crate::family::family_union;

const STEP_GROWTH: f64 = 1.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Target relative duality gap `(upper − lower) / upper`.
    pub tolerance: f64,
    /// Cap on inner (gradient) steps over the whole solve.
    pub max_iterations: usize,
    /// Fixed-order reductions, so reports are bit-reproducible.
    pub deterministic: bool,
    /// Largest number of simultaneously active curve constraints.
    pub active_set_cap: Option<usize>,
    /// Curves added to the active set per outer round.
    pub constraint_batch: usize,
    /// First trial step of the backtracking search.
    pub initial_step: f64,
    pub execution: Execution,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-3,
            max_iterations: 100_000,
            deterministic: true,
            active_set_cap: None,
            constraint_batch: 128,
            initial_step: 1.0,
            execution: Execution::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModulusReport {
    /// Energy of the certified admissible density (an upper bound).
    pub value: f64,
    /// Dual lower bound.
    pub lower_bound: f64,
    pub extremal_density: DensityField,
    pub iterations: usize,
    pub outer_rounds: usize,
    pub active_constraints: usize,
    /// `max(0, 1 − min_γ ∫_γ ρ)` for the returned density.
    pub max_constraint_violation: f64,
    pub dual_gap_estimate: f64,
    pub p: f64,
    /// Set when some curve cannot be made to have line integral ≥ 1.
    pub empty_admissible_set: bool,
    /// Total curve length outside the grid box.
    pub out_of_domain_length: f64,
    pub warnings: Vec<String>,
}

impl ModulusReport {
    pub fn relative_gap(&self) -> f64 {
        if self.value == 0.0 || !self.value.is_finite() {
            0.0
        } else {
            self.dual_gap_estimate / self.value
        }
    }

    fn trivial(grid: &Grid, p: f64, value: f64) -> Self {
        ModulusReport {
            value,
            lower_bound: value,
            extremal_density: DensityField::zeros(grid.clone()),
            iterations: 0,
            outer_rounds: 0,
            active_constraints: 0,
            max_constraint_violation: 0.0,
            dual_gap_estimate: 0.0,
            p,
            empty_admissible_set: value.is_infinite(),
            out_of_domain_length: 0.0,
            warnings: Vec::new(),
        }
    }
}

/// `∫ ρ^p dm`.
pub fn energy(rho: &DensityField, p: f64) -> f64 {
    rho.energy(p)
}

/// Line-integral operator of a family on a grid: one sparse row per curve,
/// plus the transpose for `Aᵀλ`.
#[derive(Clone, Debug)]
pub struct ConstraintMatrix {
    row_ptr: Vec<usize>,
    row_cols: Vec<u32>,
    row_vals: Vec<f64>,
    col_ptr: Vec<usize>,
    col_rows: Vec<u32>,
    col_vals: Vec<f64>,
    out_of_domain: Vec<f64>,
    cells: usize,
}

fn curve_row(grid: &Grid, c: &Curve) -> (Vec<(u32, f64)>, f64) {
    let n = c.dim();
    let mut entries: Vec<(u32, f64)> = Vec::with_capacity(4 * c.len());
    let mut ood = 0.0;
    let mut mid = [0.0; MAX_DIM];
    for i in 0..c.len().saturating_sub(1) {
        let (a, b) = (c.point(i), c.point(i + 1));
        for k in 0..n {
            mid[k] = 0.5 * (a[k] + b[k]);
        }
        let len = c.segment_length(i);
        match grid.stencil(&mid[..n]) {
            Some(st) => entries.extend(st.iter().map(|&(j, w)| (j as u32, w * len))),
            None => ood += len,
        }
    }
    entries.sort_by_key(|e| e.0);
    let mut merged: Vec<(u32, f64)> = Vec::with_capacity(entries.len() / 4 + 1);
    for (j, w) in entries {
        match merged.last_mut() {
            Some(last) if last.0 == j => last.1 += w,
            _ => merged.push((j, w)),
        }
    }
    merged.retain(|e| e.1 > 0.0);
    (merged, ood)
}

impl ConstraintMatrix {
    pub fn assemble(fam: &CurveFamily, grid: &Grid, exec: Execution) -> Result<Self> {
        if fam.dim() != grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: grid.dim(),
                got: fam.dim(),
            });
        }
        let rows = exec.map(fam.len(), |i| curve_row(grid, &fam.curves()[i]));
        let cells = grid.cell_count();
        let nnz: usize = rows.iter().map(|r| r.0.len()).sum();
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut row_cols = Vec::with_capacity(nnz);
        let mut row_vals = Vec::with_capacity(nnz);
        let mut out_of_domain = Vec::with_capacity(rows.len());
        row_ptr.push(0);
        for (r, ood) in &rows {
            for &(j, w) in r {
                row_cols.push(j);
                row_vals.push(w);
            }
            row_ptr.push(row_cols.len());
            out_of_domain.push(*ood);
        }
        let mut col_ptr = vec![0usize; cells + 1];
        for &j in &row_cols {
            col_ptr[j as usize + 1] += 1;
        }
        for j in 0..cells {
            col_ptr[j + 1] += col_ptr[j];
        }
        let mut fill = col_ptr.clone();
        let mut col_rows = vec![0u32; nnz];
        let mut col_vals = vec![0.0; nnz];
        for i in 0..rows.len() {
            for k in row_ptr[i]..row_ptr[i + 1] {
                let j = row_cols[k] as usize;
                col_rows[fill[j]] = i as u32;
                col_vals[fill[j]] = row_vals[k];
                fill[j] += 1;
            }
        }
        Ok(ConstraintMatrix {
            row_ptr,
            row_cols,
            row_vals,
            col_ptr,
            col_rows,
            col_vals,
            out_of_domain,
            cells,
        })
    }

    pub fn rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn nnz(&self) -> usize {
        self.row_cols.len()
    }

    pub fn row_is_empty(&self, i: usize) -> bool {
        self.row_ptr[i] == self.row_ptr[i + 1]
    }

    pub fn out_of_domain_length(&self) -> f64 {
        self.out_of_domain.iter().sum()
    }

    /// `(A ρ)_i`.
    pub fn row_dot(&self, i: usize, rho: &[f64]) -> f64 {
        (self.row_ptr[i]..self.row_ptr[i + 1])
            .map(|k| self.row_vals[k] * rho[self.row_cols[k] as usize])
            .sum()
    }

    /// `(Aᵀ λ)_j`.
    pub fn col_dot(&self, j: usize, lambda: &[f64]) -> f64 {
        (self.col_ptr[j]..self.col_ptr[j + 1])
            .map(|k| self.col_vals[k] * lambda[self.col_rows[k] as usize])
            .sum()
    }

    pub fn apply(&self, rho: &[f64], exec: Execution) -> Vec<f64> {
        exec.map(self.rows(), |i| self.row_dot(i, rho))
    }

    pub fn apply_transpose(&self, lambda: &[f64], out: &mut [f64], exec: Execution) {
        exec.fill(out, |j| self.col_dot(j, lambda));
    }
}

/// Closed-form minimiser of the Lagrangian in `ρ` and the matching
/// conjugate term.
#[derive(Clone, Copy, Debug)]
enum Dual {
    /// `p > 1`.
    Power { p: f64, v: f64 },
    /// `p = 1` with regulariser `δ/2 · Σ v ρ²`.
    Linear { v: f64, delta: f64 },
}

impl Dual {
    #[inline]
    fn density(&self, a: f64) -> f64 {
        match *self {
            Dual::Power { p, v } => {
                if a <= 0.0 {
                    0.0
                } else if p == 2.0 {
                    a / (2.0 * v)
                } else {
                    (a / (p * v)).powf(1.0 / (p - 1.0))
                }
            }
            Dual::Linear { v, delta } => ((a - v) / (delta * v)).max(0.0),
        }
    }

    #[inline]
    fn conjugate(&self, rho: f64) -> f64 {
        match *self {
            Dual::Power { p, v } => {
                if p == 2.0 {
                    v * rho * rho
                } else {
                    (p - 1.0) * v * rho.powf(p)
                }
            }
            Dual::Linear { v, delta } => 0.5 * delta * v * rho * rho,
        }
    }
}

struct Solver<'a> {
    a: &'a ConstraintMatrix,
    grid: &'a Grid,
    dual: Dual,
    p: f64,
    v: f64,
    opts: &'a SolverOptions,
    exec: Execution,
}

/// Dual point evaluated: density, Aᵀλ, objective.
struct Eval {
    rho: Vec<f64>,
    aty: Vec<f64>,
    g: f64,
}

impl Solver<'_> {
    fn sum<F: Fn(usize) -> f64 + Sync + Send>(&self, n: usize, f: F) -> f64 {
        if self.opts.deterministic {
            self.exec.sum(n, f)
        } else {
            self.exec.sum_unordered(n, f)
        }
    }

    fn evaluate(&self, lambda: &[f64], active: &[usize], out: Option<Eval>) -> Eval {
        let cells = self.a.cells();
        let mut e = out.unwrap_or_else(|| Eval {
            rho: vec![0.0; cells],
            aty: vec![0.0; cells],
            g: 0.0,
        });
        self.a.apply_transpose(lambda, &mut e.aty, self.exec);
        let dual = self.dual;
        let aty = &e.aty;
        self.exec.fill(&mut e.rho, |j| dual.density(aty[j]));
        let rho = &e.rho;
        let conj = self.sum(cells, |j| dual.conjugate(rho[j]));
        let lin: f64 = active.iter().map(|&i| lambda[i]).sum();
        e.g = lin - conj;
        e
    }

    fn energy(&self, rho: &[f64]) -> f64 {
        let p = self.p;
        self.v
            * if p == 1.0 {
                self.sum(rho.len(), |j| rho[j])
            } else if p == 2.0 {
                self.sum(rho.len(), |j| rho[j] * rho[j])
            } else {
                self.sum(rho.len(), |j| rho[j].powf(p))
            }
    }

    /// Valid lower bound on the discrete modulus from a dual point.
    fn lower_bound(&self, e: &Eval, lambda: &[f64], active: &[usize]) -> f64 {
        match self.dual {
            Dual::Power { .. } => e.g,
            Dual::Linear { v, .. } => {
                let lin: f64 = active.iter().map(|&i| lambda[i]).sum();
                let worst = e.aty.iter().fold(0.0f64, |m, &a| m.max(a / v));
                lin / worst.max(1.0)
            }
        }
    }
}

/// Best primal point so far: raw density and its certified energy.
struct Incumbent {
    rho: Vec<f64>,
    upper: f64,
}

fn select_initial(n: usize, k: usize) -> Vec<usize> {
    let k = k.clamp(1, n);
    let mut v: Vec<usize> = (0..k).map(|i| i * n / k).collect();
    v.dedup();
    v
}

/// p-modulus of `fam` discretised on `grid`.
///
/// An empty family has modulus 0. A family with a curve that no density on
/// the grid can charge (a constant curve, or one entirely outside the box)
/// has an empty admissible set and modulus `+∞`.
pub fn p_modulus(
    fam: &CurveFamily,
    p: f64,
    grid: &Grid,
    opts: &SolverOptions,
) -> Result<ModulusReport> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("p must be ≥ 1, got {p}")));
    }
    if !(opts.tolerance > 0.0) {
        return Err(Error::InvalidArgument(
            "solver tolerance must be positive".into(),
        ));
    }
    if fam.is_empty() {
        return Ok(ModulusReport::trivial(grid, p, 0.0));
    }
    let exec = opts.execution;
    let a = ConstraintMatrix::assemble(fam, grid, exec)?;
    let ood = a.out_of_domain_length();
    if let Some(i) = (0..a.rows()).find(|&i| a.row_is_empty(i)) {
        let mut r = ModulusReport::trivial(grid, p, f64::INFINITY);
        r.out_of_domain_length = ood;
        r.warnings.push(format!(
            "curve {i} cannot be charged by any density on the grid"
        ));
        return Ok(r);
    }
    let v = grid.cell_measure();
    let mut warnings = Vec::new();
    let dual = if p == 1.0 {
        warnings.push(
            "p = 1: the extremal density need not be unique; only the value is meaningful"
                .to_string(),
        );
        let shortest = fam
            .curves()
            .iter()
            .map(Curve::total_length)
            .fold(f64::INFINITY, f64::min);
        Dual::Linear {
            v,
            delta: opts.tolerance * shortest,
        }
    } else {
        Dual::Power { p, v }
    };
    let mut solver = Solver {
        a: &a,
        grid,
        dual,
        p,
        v,
        opts,
        exec,
    };
    let mut report = solve(&mut solver, fam.len())?;
    report.out_of_domain_length = ood;
    report.warnings.extend(warnings);
    if ood > 0.0 {
        report
            .warnings
            .push(format!("{ood:e} of curve length lies outside the grid box"));
    }
    // certify with the curve-wise line integrals
    let worst = fam
        .curves()
        .iter()
        .map(|c| line_integral(&report.extremal_density, c))
        .fold(f64::INFINITY, f64::min);
    report.max_constraint_violation = (1.0 - worst).max(0.0);
    if report.relative_gap() > opts.tolerance {
        return Err(Error::NotConverged {
            best: Box::new(report),
        });
    }
    Ok(report)
}

fn solve(s: &mut Solver<'_>, n_rows: usize) -> Result<ModulusReport> {
    let opts = s.opts;
    let tol = opts.tolerance;
    let cap = opts.active_set_cap.unwrap_or(usize::MAX).max(1);
    let batch = opts.constraint_batch.max(1);
    let add_threshold = 1.0 - tol / (4.0 * s.p);

    let mut in_active = vec![false; n_rows];
    let mut active = select_initial(n_rows, batch.min(cap));
    for &i in &active {
        in_active[i] = true;
    }

    let mut lambda = vec![0.0; n_rows];
    let mut y = vec![0.0; n_rows];
    let mut t = 1.0f64;
    let mut step = opts.initial_step;
    let mut lower = f64::NEG_INFINITY;
    let mut best: Option<Incumbent> = None;
    let mut iterations = 0usize;
    let mut outer_rounds = 0usize;
    let mut inner_tol = tol / 2.0;
    let mut g_lambda = f64::NEG_INFINITY;
    let mut scratch: Option<Eval> = None;
    let mut trial: Option<Eval> = None;

    loop {
        outer_rounds += 1;
        // inner: restricted dual ascent
        let mut best_active_upper = f64::INFINITY;
        let mut best_active_rho: Option<Vec<f64>> = None;
        loop {
            if iterations >= opts.max_iterations {
                break;
            }
            iterations += 1;
            let ey = s.evaluate(&y, &active, scratch.take());
            // primal candidate from ρ(y)
            let ay: Vec<f64> = active.iter().map(|&i| s.a.row_dot(i, &ey.rho)).collect();
            let min_ay = ay.iter().copied().fold(f64::INFINITY, f64::min);
            if min_ay > 0.0 {
                let up = s.energy(&ey.rho) / min_ay.powf(s.p);
                if up < best_active_upper {
                    best_active_upper = up;
                    best_active_rho = Some(ey.rho.clone());
                }
            }
            lower = lower.max(s.lower_bound(&ey, &y, &active));
            let grad: Vec<f64> = ay.iter().map(|v| 1.0 - v).collect();

            // backtracking on the quadratic model
            let mut next = lambda.clone();
            let et = loop {
                let mut d2 = 0.0;
                let mut lin = 0.0;
                for (k, &i) in active.iter().enumerate() {
                    let ni = (y[i] + step * grad[k]).max(0.0);
                    next[i] = ni;
                    let d = ni - y[i];
                    d2 += d * d;
                    lin += grad[k] * d;
                }
                let et = s.evaluate(&next, &active, trial.take());
                if et.g >= ey.g + lin - d2 / (2.0 * step) || step < 1e-300 {
                    break et;
                }
                trial = Some(et);
                step *= 0.5;
            };
            lower = lower.max(s.lower_bound(&et, &next, &active));

            // momentum with function-value restart
            if et.g < g_lambda {
                t = 1.0;
                y.clone_from(&next);
            } else {
                let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                let beta = (t - 1.0) / t_next;
                for &i in &active {
                    y[i] = (next[i] + beta * (next[i] - lambda[i])).max(0.0);
                }
                t = t_next;
            }
            g_lambda = et.g;
            lambda = next;
            step *= STEP_GROWTH;
            scratch = Some(ey);
            trial = Some(et);

            if best_active_upper.is_finite()
                && (best_active_upper - lower) <= inner_tol * best_active_upper
            {
                break;
            }
        }

        // outer: certify against the full family
        let rho = match best_active_rho {
            Some(r) => r,
            None => {
                // no usable primal point yet
                if iterations >= opts.max_iterations {
                    return Err(Error::NotConverged {
                        best: Box::new(finish(
                            s,
                            &best,
                            lower,
                            iterations,
                            outer_rounds,
                            active.len(),
                        )),
                    });
                }
                continue;
            }
        };
        let full = s.a.apply(&rho, s.exec);
        let min_full = full.iter().copied().fold(f64::INFINITY, f64::min);
        let min_active = active
            .iter()
            .map(|&i| full[i])
            .fold(f64::INFINITY, f64::min);
        let upper_full = if min_full > 0.0 {
            s.energy(&rho) / min_full.powf(s.p)
        } else {
            f64::INFINITY
        };
        if upper_full.is_finite() && best.as_ref().is_none_or(|b| upper_full < b.upper) {
            best = Some(Incumbent {
                rho: rho.clone(),
                upper: upper_full,
            });
        }
        let incumbent_upper = best.as_ref().map_or(f64::INFINITY, |b| b.upper);
        if incumbent_upper.is_finite() && incumbent_upper - lower <= tol * incumbent_upper {
            break;
        }
        if iterations >= opts.max_iterations {
            return Err(Error::NotConverged {
                best: Box::new(finish(
                    s,
                    &best,
                    lower,
                    iterations,
                    outer_rounds,
                    active.len(),
                )),
            });
        }

        // grow the active set with the most violated curves
        let mut violated: Vec<(usize, f64)> = (0..n_rows)
            .filter(|&i| !in_active[i])
            .map(|i| (i, full[i] / min_active))
            .filter(|&(_, q)| q < add_threshold)
            .collect();
        violated.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let room = cap.saturating_sub(active.len());
        if violated.len() > room {
            // evict constraints that carry no multiplier
            let before = active.len();
            active.retain(|&i| {
                let keep = lambda[i] > 0.0;
                if !keep {
                    in_active[i] = false;
                    y[i] = 0.0;
                }
                keep
            });
            if active.len() == before && room == 0 {
                violated.clear();
            }
        }
        let room = cap.saturating_sub(active.len());
        let added = violated.len().min(batch).min(room);
        for &(i, _) in violated.iter().take(added) {
            active.push(i);
            in_active[i] = true;
        }
        active.sort_unstable();
        if added > 0 {
            t = 1.0;
            y.clone_from(&lambda);
            g_lambda = f64::NEG_INFINITY;
        } else {
            match &mut s.dual {
                // tighten the regulariser once the regularised problem is solved
                Dual::Linear { delta, .. } => *delta *= 0.25,
                Dual::Power { .. } => inner_tol *= 0.5,
            }
            if let Dual::Linear { .. } = s.dual {
                g_lambda = f64::NEG_INFINITY;
                t = 1.0;
                y.clone_from(&lambda);
            }
        }
    }
    Ok(finish(
        s,
        &best,
        lower,
        iterations,
        outer_rounds,
        active.len(),
    ))
}

fn finish(
    s: &Solver<'_>,
    best: &Option<Incumbent>,
    lower: f64,
    iterations: usize,
    outer_rounds: usize,
    active: usize,
) -> ModulusReport {
    let rho = match best {
        Some(b) => b.rho.clone(),
        None => vec![0.0; s.a.cells()],
    };
    let full = s.a.apply(&rho, s.exec);
    let min_full = full.iter().copied().fold(f64::INFINITY, f64::min);
    let (density, value) = if min_full > 0.0 {
        let d = DensityField::from_raw(s.grid.clone(), rho.iter().map(|r| r / min_full).collect());
        let e = d.energy_with(s.p, s.exec);
        (d, e)
    } else {
        (DensityField::zeros(s.grid.clone()), f64::INFINITY)
    };
    let lower = lower.max(0.0).min(value);
    ModulusReport {
        value,
        lower_bound: lower,
        extremal_density: density,
        iterations,
        outer_rounds,
        active_constraints: active,
        max_constraint_violation: 0.0,
        dual_gap_estimate: value - lower,
        p: s.p,
        empty_admissible_set: false,
        out_of_domain_length: 0.0,
        warnings: Vec::new(),
    }
}

/// Which classical family of an annulus `r < |x| < R`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnnulusFamily {
    /// Curves joining the two boundary spheres.
    Connecting,
    /// Closed curves separating the boundary circles (plane only).
    Separating,
}

/// Closed-form p-modulus of the annulus families in `ℝⁿ`.
///
/// Available: both planar families for every `p > 1` (and `p = 1` for the
/// separating one), and the connecting family for `p = n`.
pub fn analytic_annulus_modulus(
    kind: AnnulusFamily,
    inner: f64,
    outer: f64,
    p: f64,
    n: usize,
) -> Result<f64> {
    if !(inner > 0.0 && outer > inner && outer.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "annulus radii must satisfy 0 < r < R, got {inner}, {outer}"
        )));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("p must be ≥ 1, got {p}")));
    }
    let ln = (outer / inner).ln();
    match (kind, n) {
        (AnnulusFamily::Connecting, 2) if p > 1.0 => {
            let e = 1.0 - 1.0 / (p - 1.0);
            let radial = if e.abs() < 1e-12 {
                ln
            } else {
                (outer.powf(e) - inner.powf(e)) / e
            };
            Ok(TAU * radial.powf(1.0 - p))
        }
        (AnnulusFamily::Separating, 2) => {
            let e = 2.0 - p;
            let radial = if e.abs() < 1e-12 {
                ln
            } else {
                (outer.powf(e) - inner.powf(e)) / e
            };
            Ok(TAU.powf(1.0 - p) * radial)
        }
        (AnnulusFamily::Connecting, 3) if p == 3.0 => Ok(2.0 * TAU / (ln * ln)),
        _ => Err(Error::NotAvailable(format!(
            "no closed form for {kind:?} family with p = {p}, n = {n}"
        ))),
    }
}

/// Closed-form p-modulus of the curves crossing a `width × height`
/// rectangle horizontally.
pub fn analytic_rectangle_modulus(width: f64, height: f64, p: f64) -> Result<f64> {
    if !(width > 0.0 && height > 0.0 && p >= 1.0) {
        return Err(Error::InvalidArgument(
            "rectangle sides must be positive and p ≥ 1".into(),
        ));
    }
    Ok(height * width.powf(1.0 - p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::is_admissible;
    use std::f64::consts::PI;

    fn opts(tol: f64) -> SolverOptions {
        SolverOptions {
            tolerance: tol,
            ..SolverOptions::default()
        }
    }

    #[test]
    fn empty_family_is_zero() {
        let g = Grid::cube(2, -1.0, 1.0, 8).unwrap();
        let r = p_modulus(&CurveFamily::empty(2), 2.0, &g, &opts(1e-3)).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn constant_curve_gives_infinity() {
        let g = Grid::cube(2, -1.0, 1.0, 8).unwrap();
        let c =
            Curve::from_points(vec![0.0, 1.0], &[vec![0.1, 0.1], vec![0.1, 0.1]], false).unwrap();
        let fam = CurveFamily::custom(2, "point", vec![c]).unwrap();
        let r = p_modulus(&fam, 2.0, &g, &opts(1e-3)).unwrap();
        assert!(r.value.is_infinite());
        assert!(r.empty_admissible_set);
    }

    #[test]
    fn rejects_bad_p_and_dimension() {
        let g = Grid::cube(2, -1.0, 1.0, 8).unwrap();
        let fam = CurveFamily::segment_bundle(-0.5, 0.5, -0.5, 0.5, 4, 8).unwrap();
        assert!(p_modulus(&fam, 0.5, &g, &opts(1e-3)).is_err());
        let g3 = Grid::cube(3, -1.0, 1.0, 4).unwrap();
        assert!(matches!(
            p_modulus(&fam, 2.0, &g3, &opts(1e-3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn transpose_matches_rows() {
        let g = Grid::cube(2, -1.0, 1.0, 16).unwrap();
        let fam = CurveFamily::annulus_connecting(0.2, 0.9, 13, 40).unwrap();
        let a = ConstraintMatrix::assemble(&fam, &g, Execution::Sequential).unwrap();
        let rho: Vec<f64> = (0..a.cells())
            .map(|j| 1.0 + (j as f64 * 0.3).sin())
            .collect();
        let lambda: Vec<f64> = (0..a.rows()).map(|i| 0.5 + i as f64).collect();
        let ar = a.apply(&rho, Execution::Sequential);
        let mut atl = vec![0.0; a.cells()];
        a.apply_transpose(&lambda, &mut atl, Execution::Parallel);
        let lhs: f64 = ar.iter().zip(&lambda).map(|(x, y)| x * y).sum();
        let rhs: f64 = atl.iter().zip(&rho).map(|(x, y)| x * y).sum();
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs());
        let d = DensityField::new(g, rho).unwrap();
        for (i, c) in fam.curves().iter().enumerate() {
            assert!((ar[i] - line_integral(&d, c)).abs() < 1e-12 * ar[i]);
        }
    }

    #[test]
    fn square_bundle_matches_closed_form() {
        let g = Grid::cube(2, 0.0, 1.0, 64).unwrap();
        let fam = CurveFamily::segment_bundle(0.0, 1.0, 0.0, 1.0, 64, 65).unwrap();
        for p in [1.5, 2.0, 3.0] {
            let r = p_modulus(&fam, p, &g, &opts(1e-4)).unwrap();
            assert!((r.value - 1.0).abs() < 2e-3, "p={p} value={}", r.value);
            assert!(r.lower_bound <= r.value);
        }
    }

    #[test]
    fn p_one_value() {
        let g = Grid::cube(2, 0.0, 1.0, 32).unwrap();
        let fam = CurveFamily::segment_bundle(0.0, 1.0, 0.0, 1.0, 32, 33).unwrap();
        let r = p_modulus(&fam, 1.0, &g, &opts(1e-3)).unwrap();
        assert!((r.value - 1.0).abs() < 5e-3, "{}", r.value);
        assert!(!r.warnings.is_empty());
    }

    #[test]
    fn report_is_certified() {
        let g = Grid::cube(2, -1.02, 1.02, 64).unwrap();
        let fam = CurveFamily::annulus_connecting(0.3, 1.0, 90, 200).unwrap();
        let r = p_modulus(&fam, 2.0, &g, &opts(1e-3)).unwrap();
        assert!(r.relative_gap() <= 1e-3);
        assert!((r.value - r.extremal_density.energy(2.0)).abs() <= 1e-12 * r.value);
        let adm = is_admissible(&r.extremal_density, &fam, 0.0);
        assert!(adm.worst_slack >= -r.max_constraint_violation - 1e-15);
        assert!(r.max_constraint_violation < 1e-12);
    }

    #[test]
    fn annulus_connecting_close_to_closed_form() {
        let g = Grid::cube(2, -1.02, 1.02, 128).unwrap();
        let fam =
            CurveFamily::annulus_connecting(1.0 / std::f64::consts::E, 1.0, 360, 800).unwrap();
        let r = p_modulus(&fam, 2.0, &g, &opts(1e-3)).unwrap();
        assert!((r.value / (2.0 * PI) - 1.0).abs() < 0.03, "{}", r.value);
    }

    #[test]
    fn deterministic_across_modes() {
        let g = Grid::cube(2, -1.02, 1.02, 48).unwrap();
        let fam = CurveFamily::annulus_separating(0.3, 1.0, 40, 200).unwrap();
        let mut o = opts(1e-3);
        o.execution = Execution::Sequential;
        let a = p_modulus(&fam, 2.0, &g, &o).unwrap();
        o.execution = Execution::Parallel;
        let b = p_modulus(&fam, 2.0, &g, &o).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn iteration_cap_reports_best() {
        let g = Grid::cube(2, -1.02, 1.02, 48).unwrap();
        let fam = CurveFamily::annulus_separating(0.3, 1.0, 40, 200).unwrap();
        let o = SolverOptions {
            tolerance: 1e-9,
            max_iterations: 5,
            ..SolverOptions::default()
        };
        match p_modulus(&fam, 2.0, &g, &o) {
            Err(Error::NotConverged { best }) => {
                assert!(best.iterations <= 6);
                assert!(best.value.is_finite());
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn active_set_cap_is_respected() {
        let g = Grid::cube(2, 0.0, 1.0, 32).unwrap();
        let fam = CurveFamily::segment_bundle(0.0, 1.0, 0.0, 1.0, 200, 33).unwrap();
        let o = SolverOptions {
            active_set_cap: Some(64),
            constraint_batch: 16,
            ..opts(1e-3)
        };
        let r = p_modulus(&fam, 2.0, &g, &o).unwrap();
        assert!(r.active_constraints <= 64);
        assert!((r.value - 1.0).abs() < 5e-3);
    }

    #[test]
    fn analytic_values() {
        let e = std::f64::consts::E;
        let c = analytic_annulus_modulus(AnnulusFamily::Connecting, 1.0, e, 2.0, 2).unwrap();
        assert!((c - 2.0 * PI).abs() < 1e-12);
        let s = analytic_annulus_modulus(AnnulusFamily::Separating, 1.0, e, 2.0, 2).unwrap();
        assert!((s - 1.0 / (2.0 * PI)).abs() < 1e-12);
        // continuity in p through the logarithmic case
        let near =
            analytic_annulus_modulus(AnnulusFamily::Connecting, 1.0, e, 2.0 + 1e-7, 2).unwrap();
        assert!((near - c).abs() < 1e-5);
        let s1 = analytic_annulus_modulus(AnnulusFamily::Separating, 0.5, 2.0, 1.0, 2).unwrap();
        assert!((s1 - 1.5).abs() < 1e-12);
        let c3 = analytic_annulus_modulus(AnnulusFamily::Connecting, 1.0, e, 3.0, 3).unwrap();
        assert!((c3 - 4.0 * PI).abs() < 1e-12);
        assert!(matches!(
            analytic_annulus_modulus(AnnulusFamily::Separating, 1.0, 2.0, 3.0, 3),
            Err(Error::NotAvailable(_))
        ));
        assert_eq!(analytic_rectangle_modulus(2.0, 3.0, 2.0).unwrap(), 1.5);
    }
}
