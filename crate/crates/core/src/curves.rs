//! Sampled curves and the arc-length toolkit.
//!
//! A [`Curve`] is a polyline with a strictly increasing parameter per
//! sample. Continuum notions (length function, normal representation,
//! f-representation, line integrals) are realised on the polyline at the
//! resolution the caller sampled it with.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::family::CurveFamily;
use crate::grid::DensityField;

/// Closedness tolerance relative to the curve's extent.
pub const CLOSED_TOL: f64 = 1e-9;

/// A segment of the image curve shorter than this fraction of its total
/// length counts as stationary.
pub const STATIONARY_TOL: f64 = 1e-12;

/// On a stationary run of the image curve, the lifted curve may move at
/// most this fraction of its extent.
pub const LIFT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    dim: usize,
    params: Vec<f64>,
    /// Flat coordinates, `dim` per sample.
    points: Vec<f64>,
    closed: bool,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl Curve {
    pub fn new(dim: usize, params: Vec<f64>, points: Vec<f64>, closed: bool) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidCurve("dimension 0".into()));
        }
        if points.len() != params.len() * dim {
            return Err(Error::InvalidCurve(format!(
                "{} coordinates for {} parameters in dimension {dim}",
                points.len(),
                params.len()
            )));
        }
        if params.is_empty() {
            return Err(Error::InvalidCurve("no samples".into()));
        }
        if params.iter().chain(&points).any(|v| !v.is_finite()) {
            return Err(Error::InvalidCurve("non-finite sample".into()));
        }
        if let Some(i) = params.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidCurve(format!(
                "parameters not strictly increasing at index {}",
                i + 1
            )));
        }
        let c = Curve {
            dim,
            params,
            points,
            closed,
        };
        if closed {
            let gap = dist(c.point(0), c.point(c.len() - 1));
            if gap > CLOSED_TOL * c.extent() {
                return Err(Error::InvalidCurve(format!(
                    "flagged closed but endpoints are {gap:e} apart"
                )));
            }
        }
        Ok(c)
    }

    /// Builds a curve from point rows.
    pub fn from_points(params: Vec<f64>, points: &[Vec<f64>], closed: bool) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidCurve("ragged point rows".into()));
        }
        Curve::new(dim, params, points.concat(), closed)
    }

    /// Samples `f` at the given parameters.
    pub fn sample<F>(params: Vec<f64>, closed: bool, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Vec<f64>,
    {
        let rows: Vec<Vec<f64>> = params.iter().map(|&t| f(t)).collect();
        Curve::from_points(params, &rows, closed)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn points_flat(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    pub fn segment_length(&self, i: usize) -> f64 {
        dist(self.point(i), self.point(i + 1))
    }

    pub fn total_length(&self) -> f64 {
        (0..self.len().saturating_sub(1))
            .map(|i| self.segment_length(i))
            .sum()
    }

    /// Largest coordinate range over the axes (a lower bound for the diameter).
    pub fn extent(&self) -> f64 {
        (0..self.dim)
            .map(|a| {
                let (lo, hi) = self
                    .points()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                        (lo.min(p[a]), hi.max(p[a]))
                    });
                hi - lo
            })
            .fold(0.0, f64::max)
    }

    /// Exact diameter of the sample set (quadratic in the sample count).
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                d = d.max(dist(self.point(i), self.point(j)));
            }
        }
        d
    }

    /// Piecewise-linear evaluation; clamps outside the parameter range.
    pub fn point_at(&self, t: f64) -> Vec<f64> {
        let n = self.len();
        if t <= self.params[0] || n == 1 {
            return self.point(0).to_vec();
        }
        if t >= self.params[n - 1] {
            return self.point(n - 1).to_vec();
        }
        let k = self.params.partition_point(|&s| s <= t) - 1;
        let (t0, t1) = (self.params[k], self.params[k + 1]);
        let u = (t - t0) / (t1 - t0);
        self.point(k)
            .iter()
            .zip(self.point(k + 1))
            .map(|(a, b)| a + u * (b - a))
            .collect()
    }

    /// Pointwise image under `f`, keeping the parameter grid.
    pub fn map_points<F>(&self, f: F) -> Result<Curve>
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let rows: Vec<Vec<f64>> = self.points().map(f).collect();
        let dim = rows[0].len();
        let points = rows.concat();
        // closedness survives continuous maps up to rounding
        let mut c = Curve {
            dim,
            params: self.params.clone(),
            points,
            closed: false,
        };
        if self.closed {
            let n = c.len();
            let first = c.point(0).to_vec();
            c.points[(n - 1) * dim..].copy_from_slice(&first);
            c.closed = true;
        }
        Ok(c)
    }

    /// Restriction to parameters in `[a, b]`, with interpolated end samples.
    pub fn restrict(&self, a: f64, b: f64) -> Result<Curve> {
        if !(a < b) {
            return Err(Error::InvalidArgument(format!(
                "empty restriction [{a}, {b}]"
            )));
        }
        let mut params = vec![a];
        let mut rows = vec![self.point_at(a)];
        for (i, &t) in self.params.iter().enumerate() {
            if t > a && t < b {
                params.push(t);
                rows.push(self.point(i).to_vec());
            }
        }
        params.push(b);
        rows.push(self.point_at(b));
        Curve::from_points(params, &rows, false)
    }
}

/// Knots `(t_i, s_i)` of the length function `s_i = S(γ, [t_0, t_i])`.
#[derive(Clone, Debug, PartialEq)]
pub struct LengthFunction {
    params: Vec<f64>,
    lengths: Vec<f64>,
}

impl LengthFunction {
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.params
            .iter()
            .copied()
            .zip(self.lengths.iter().copied())
    }

    pub fn total(&self) -> f64 {
        *self.lengths.last().unwrap()
    }

    /// Linear interpolation between knots, clamped to the parameter range.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.params.len();
        if t <= self.params[0] {
            return 0.0;
        }
        if t >= self.params[n - 1] {
            return self.total();
        }
        let k = self.params.partition_point(|&s| s <= t) - 1;
        let u = (t - self.params[k]) / (self.params[k + 1] - self.params[k]);
        self.lengths[k] + u * (self.lengths[k + 1] - self.lengths[k])
    }
}

/// Arc-length parametrised curve on `[0, total_length]`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalCurve {
    curve: Curve,
    total_length: f64,
}

impl NormalCurve {
    pub fn curve(&self) -> &Curve {
        &self.curve
    }

    pub fn into_curve(self) -> Curve {
        self.curve
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn point_at(&self, s: f64) -> Vec<f64> {
        self.curve.point_at(s)
    }
}

fn require_nondegenerate(c: &Curve) -> Result<()> {
    if c.len() < 2 {
        return Err(Error::InvalidCurve(format!(
            "{} sample(s); need at least 2",
            c.len()
        )));
    }
    Ok(())
}

fn cumulative_lengths(c: &Curve) -> Vec<f64> {
    let mut out = Vec::with_capacity(c.len());
    let mut s = 0.0;
    out.push(0.0);
    for i in 0..c.len() - 1 {
        s += c.segment_length(i);
        out.push(s);
    }
    out
}

pub fn length_function(c: &Curve) -> Result<LengthFunction> {
    require_nondegenerate(c)?;
    Ok(LengthFunction {
        params: c.params.clone(),
        lengths: cumulative_lengths(c),
    })
}

/// Indices kept after collapsing stationary segments. The first sample is
/// always kept and the last sample always closes the list.
fn moving_knots(c: &Curve, lengths: &[f64]) -> Vec<usize> {
    let thr = STATIONARY_TOL * lengths[lengths.len() - 1];
    let mut keep = vec![0usize];
    for i in 1..c.len() {
        if c.segment_length(i - 1) > thr {
            keep.push(i);
        }
    }
    let last = c.len() - 1;
    if *keep.last().unwrap() != last {
        if keep.len() > 1 {
            *keep.last_mut().unwrap() = last;
        } else if lengths[last] > 0.0 {
            keep.push(last);
        }
    }
    keep
}

/// Reparametrises `c` by arc length. Stationary samples are collapsed so the
/// result has strictly increasing parameters; a constant curve becomes a
/// single point at `s = 0`.
pub fn normal_representation(c: &Curve) -> Result<NormalCurve> {
    require_nondegenerate(c)?;
    let lengths = cumulative_lengths(c);
    let keep = moving_knots(c, &lengths);
    let rows: Vec<&[f64]> = keep.iter().map(|&i| c.point(i)).collect();
    let mut params = Vec::with_capacity(rows.len());
    let mut s = 0.0;
    params.push(0.0);
    for w in rows.windows(2) {
        s += dist(w[0], w[1]);
        params.push(s);
    }
    let points: Vec<f64> = rows.concat();
    // recomputed on the kept samples, so the result is exactly unit speed
    let closed = c.closed && keep.len() > 1;
    let curve = Curve {
        dim: c.dim,
        params,
        points,
        closed,
    };
    Ok(NormalCurve {
        total_length: s,
        curve,
    })
}

/// Line integral together with the length that fell outside the grid box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineIntegral {
    pub value: f64,
    pub out_of_domain_length: f64,
}

/// `∫_γ ρ |dx|` by the midpoint rule with interpolated density; the density
/// is zero outside the grid box.
///
/// # Panics
/// If the curve and the grid have different dimensions.
pub fn line_integral_diag(rho: &DensityField, c: &Curve) -> LineIntegral {
    assert_eq!(
        c.dim(),
        rho.grid().dim(),
        "curve and grid dimensions differ"
    );
    let mut value = 0.0;
    let mut ood = 0.0;
    let mut mid = [0.0; crate::grid::MAX_DIM];
    for i in 0..c.len().saturating_sub(1) {
        let (a, b) = (c.point(i), c.point(i + 1));
        for k in 0..c.dim {
            mid[k] = 0.5 * (a[k] + b[k]);
        }
        let len = dist(a, b);
        match rho.grid().stencil(&mid[..c.dim]) {
            Some(st) => value += len * st.iter().map(|&(j, w)| w * rho.values()[j]).sum::<f64>(),
            None => ood += len,
        }
    }
    LineIntegral {
        value,
        out_of_domain_length: ood,
    }
}

pub fn line_integral(rho: &DensityField, c: &Curve) -> f64 {
    line_integral_diag(rho, c).value
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Admissibility {
    pub admissible: bool,
    /// `min_γ ∫_γ ρ − 1`; `+∞` for an empty family.
    pub worst_slack: f64,
    pub worst_index: Option<usize>,
}

pub fn is_admissible(rho: &DensityField, fam: &CurveFamily, tol: f64) -> Admissibility {
    is_admissible_with(rho, fam, tol, Execution::default())
}

pub fn is_admissible_with(
    rho: &DensityField,
    fam: &CurveFamily,
    tol: f64,
    exec: Execution,
) -> Admissibility {
    let integrals = exec.map(fam.len(), |i| line_integral(rho, &fam.curves()[i]));
    let worst = integrals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1));
    match worst {
        None => Admissibility {
            admissible: true,
            worst_slack: f64::INFINITY,
            worst_index: None,
        },
        Some((i, &v)) => Admissibility {
            admissible: v >= 1.0 - tol,
            worst_slack: v - 1.0,
            worst_index: Some(i),
        },
    }
}

/// Arc length of the part of `c` inside `set`, one midpoint test per segment.
pub fn intersection_length<P>(c: &Curve, set: P) -> f64
where
    P: Fn(&[f64]) -> bool,
{
    let mut mid = vec![0.0; c.dim];
    let mut total = 0.0;
    for i in 0..c.len().saturating_sub(1) {
        let (a, b) = (c.point(i), c.point(i + 1));
        for k in 0..c.dim {
            mid[k] = 0.5 * (a[k] + b[k]);
        }
        if set(&mid) {
            total += dist(a, b);
        }
    }
    total
}

/// The lift `α*` of `alpha` reparametrised by the length function of `beta`,
/// i.e. `α = α* ∘ l_β`. Both curves must share the parameter grid.
pub fn f_representation(alpha: &Curve, beta: &Curve) -> Result<Curve> {
    require_nondegenerate(beta)?;
    if alpha.len() != beta.len()
        || alpha
            .params
            .iter()
            .zip(&beta.params)
            .any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0))
    {
        return Err(Error::InvalidArgument(
            "alpha and beta must share the same parameter grid".into(),
        ));
    }
    let lengths = cumulative_lengths(beta);
    let total = lengths[lengths.len() - 1];
    let thr = STATIONARY_TOL * total;
    let lift_tol = LIFT_TOL * alpha.extent();
    let mut keep = vec![0usize];
    for i in 0..beta.len() - 1 {
        if beta.segment_length(i) <= thr {
            let moved = alpha.segment_length(i);
            if moved > lift_tol {
                return Err(Error::InconsistentLifting { segment: i, moved });
            }
        } else {
            keep.push(i + 1);
        }
    }
    let params: Vec<f64> = keep.iter().map(|&i| lengths[i]).collect();
    let points: Vec<f64> = keep
        .iter()
        .flat_map(|&i| alpha.point(i).iter().copied())
        .collect();
    let closed = alpha.closed && keep.len() > 1;
    let mut c = Curve {
        dim: alpha.dim,
        params,
        points,
        closed,
    };
    if closed {
        // the last kept sample may sit before the final stationary run
        let n = c.len();
        let first = c.point(0).to_vec();
        c.points[(n - 1) * c.dim..].copy_from_slice(&first);
    }
    Ok(c)
}
