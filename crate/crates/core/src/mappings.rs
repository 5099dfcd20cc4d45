//! Explicit mappings with derivatives, branch inverses and dilatation.
//!
//! Regularity hypotheses that cannot be decided from samples (Luzin N and
//! N⁻¹, absolute continuity of lifts, discreteness, openness, a.e.
//! differentiability) are carried as declared [`Attributes`], set by
//! construction for each catalog entry. The measure-zero bad set is an
//! explicit finite point set.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::curves::{f_representation, normal_representation, Curve, NormalCurve};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::grid::{Grid, MAX_DIM};
use crate::linalg::{min_stretch, Matrix, Vector};

/// Entries below this magnitude make `f′(x)` the zero matrix.
pub const ZERO_DERIVATIVE_TOL: f64 = 1e-14;

/// Largest winding multiple probed when deciding an exact winding count.
pub const MAX_WINDING: usize = 16;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attributes {
    pub differentiable_ae: bool,
    pub discrete: bool,
    pub open: bool,
    pub n_property: bool,
    pub n_inverse: bool,
    pub acp_inverse: bool,
}

impl Attributes {
    pub const ALL: Attributes = Attributes {
        differentiable_ae: true,
        discrete: true,
        open: true,
        n_property: true,
        n_inverse: true,
        acp_inverse: true,
    };

    pub fn all(&self) -> bool {
        *self == Attributes::ALL
    }
}

/// Working subdomain `D` of a mapping.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Domain {
    Everywhere,
    /// Closed shell `inner ≤ |x| ≤ outer` about the origin.
    Annulus {
        inner: f64,
        outer: f64,
    },
}

impl Domain {
    pub fn contains(&self, x: &[f64]) -> bool {
        match *self {
            Domain::Everywhere => true,
            Domain::Annulus { inner, outer } => {
                let r = norm(x);
                r >= inner && r <= outer
            }
        }
    }
}

/// Finite exceptional set `B₀`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExcludedSet {
    pub points: Vec<Vec<f64>>,
}

impl ExcludedSet {
    pub fn contains(&self, x: &[f64]) -> bool {
        self.points
            .iter()
            .any(|p| p.iter().zip(x).all(|(a, b)| a == b))
    }

    /// Whether any exceptional point lies in the closed box `[lo, hi]`.
    pub fn intersects_box(&self, lo: &[f64], hi: &[f64]) -> bool {
        self.points
            .iter()
            .any(|p| p.iter().enumerate().all(|(a, &v)| v >= lo[a] && v <= hi[a]))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MapKind {
    Linear(Matrix),
    /// Planar `z ↦ z^m`.
    Power(u32),
    /// `x ↦ |x|^{a−1} x` in R^n.
    RadialStretch {
        exponent: f64,
        dim: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct MappingSpec {
    name: String,
    kind: MapKind,
    domain: Domain,
    excluded: ExcludedSet,
    attributes: Attributes,
    winding_count: usize,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn cpow(re: f64, im: f64, m: u32) -> (f64, f64) {
    let (mut a, mut b) = (1.0, 0.0);
    for _ in 0..m {
        (a, b) = (a * re - b * im, a * im + b * re);
    }
    (a, b)
}

impl MappingSpec {
    /// A linear map. Nonsingular matrices are diffeomorphisms and get all
    /// regularity attributes; singular ones get none besides differentiability.
    pub fn linear(name: &str, matrix: Matrix) -> Self {
        let invertible = matrix.inverse().is_some();
        let attributes = if invertible {
            Attributes::ALL
        } else {
            Attributes {
                differentiable_ae: true,
                ..Attributes::default()
            }
        };
        MappingSpec {
            name: name.into(),
            kind: MapKind::Linear(matrix),
            domain: Domain::Everywhere,
            excluded: ExcludedSet::default(),
            attributes,
            winding_count: 1,
        }
    }

    pub fn identity(dim: usize) -> Self {
        MappingSpec::linear("identity", Matrix::identity(dim))
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let label: Vec<String> = d.iter().map(|v| format!("{v}")).collect();
        MappingSpec::linear(&format!("diag({})", label.join(",")), Matrix::diagonal(d))
    }

    /// Planar power map `z ↦ z^m`; winds small circles about 0 `m` times.
    pub fn power(m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument(
                "power map exponent must be ≥ 1".into(),
            ));
        }
        Ok(MappingSpec {
            name: format!("z^{m}"),
            kind: MapKind::Power(m),
            domain: Domain::Everywhere,
            excluded: ExcludedSet {
                points: vec![vec![0.0, 0.0]],
            },
            attributes: Attributes::ALL,
            winding_count: m as usize,
        })
    }

    pub fn radial_stretch(exponent: f64, dim: usize) -> Result<Self> {
        if !(exponent > 0.0 && exponent.is_finite()) {
            return Err(Error::InvalidArgument(
                "radial stretch exponent must be positive".into(),
            ));
        }
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidArgument(format!(
                "radial stretch dimension {dim} not in 2..=3"
            )));
        }
        Ok(MappingSpec {
            name: format!("radial-stretch(a={exponent},n={dim})"),
            kind: MapKind::RadialStretch { exponent, dim },
            domain: Domain::Everywhere,
            excluded: ExcludedSet {
                points: vec![vec![0.0; dim]],
            },
            attributes: Attributes::ALL,
            winding_count: 1,
        })
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn with_attributes(mut self, attributes: Attributes) -> Self {
        self.attributes = attributes;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn excluded(&self) -> &ExcludedSet {
        &self.excluded
    }

    pub fn attributes(&self) -> Attributes {
        self.attributes
    }

    pub fn winding_count(&self) -> usize {
        self.winding_count
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            MapKind::Linear(m) => m.dim(),
            MapKind::Power(_) => 2,
            MapKind::RadialStretch { dim, .. } => *dim,
        }
    }

    pub fn is_excluded(&self, x: &[f64]) -> bool {
        self.excluded.contains(x)
    }

    /// In the working domain and off the exceptional set.
    pub fn is_regular_point(&self, x: &[f64]) -> bool {
        self.domain.contains(x) && !self.excluded.contains(x)
    }

    pub fn eval(&self, x: &[f64]) -> Vector {
        match &self.kind {
            MapKind::Linear(m) => m.mul_vec(x),
            MapKind::Power(k) => {
                let (a, b) = cpow(x[0], x[1], *k);
                [a, b].into_iter().collect()
            }
            MapKind::RadialStretch { exponent, .. } => {
                let r = norm(x);
                let s = if r == 0.0 {
                    0.0
                } else {
                    r.powf(exponent - 1.0)
                };
                x.iter().map(|v| s * v).collect()
            }
        }
    }

    /// `f′(x)`.
    pub fn derivative(&self, x: &[f64]) -> Matrix {
        match &self.kind {
            MapKind::Linear(m) => *m,
            MapKind::Power(k) => {
                let (a, b) = cpow(x[0], x[1], k - 1);
                let (a, b) = (*k as f64 * a, *k as f64 * b);
                Matrix::from_rows(&[vec![a, -b], vec![b, a]]).unwrap()
            }
            MapKind::RadialStretch { exponent: a, dim } => {
                let r = norm(x);
                if r == 0.0 {
                    return if *a > 1.0 {
                        Matrix::zeros(*dim)
                    } else if *a == 1.0 {
                        Matrix::identity(*dim)
                    } else {
                        Matrix::identity(*dim).scale(f64::NAN)
                    };
                }
                let s = r.powf(a - 1.0);
                let mut m = Matrix::identity(*dim).scale(s);
                for i in 0..*dim {
                    for j in 0..*dim {
                        m.set(i, j, m.get(i, j) + s * (a - 1.0) * x[i] * x[j] / (r * r));
                    }
                }
                m
            }
        }
    }

    /// `J(x, f) = det f′(x)`, in closed form.
    pub fn jacobian(&self, x: &[f64]) -> f64 {
        match &self.kind {
            MapKind::Linear(m) => m.det(),
            MapKind::Power(k) => {
                let r = norm(x);
                let k = *k as f64;
                k * k * r.powf(2.0 * (k - 1.0))
            }
            MapKind::RadialStretch { exponent: a, dim } => {
                let r = norm(x);
                if r == 0.0 {
                    return if *a > 1.0 {
                        0.0
                    } else if *a == 1.0 {
                        1.0
                    } else {
                        f64::NAN
                    };
                }
                a * r.powf(*dim as f64 * (a - 1.0))
            }
        }
    }

    /// Number of explicit branch inverses.
    pub fn branch_count(&self) -> usize {
        match &self.kind {
            MapKind::Linear(m) => usize::from(m.inverse().is_some()),
            MapKind::Power(k) => *k as usize,
            MapKind::RadialStretch { .. } => 1,
        }
    }

    /// The `k`-th local inverse at `y`, or `None` where that branch is undefined.
    pub fn branch_inverse(&self, k: usize, y: &[f64]) -> Option<Vector> {
        if k >= self.branch_count() {
            return None;
        }
        match &self.kind {
            MapKind::Linear(m) => m.inverse().map(|inv| inv.mul_vec(y)),
            MapKind::Power(m) => {
                let r = y[0].hypot(y[1]);
                if r == 0.0 {
                    return None;
                }
                let m = *m as f64;
                let th = (y[1].atan2(y[0]) + TAU * k as f64) / m;
                let rho = r.powf(1.0 / m);
                Some([rho * th.cos(), rho * th.sin()].into_iter().collect())
            }
            MapKind::RadialStretch { exponent, .. } => {
                let r = norm(y);
                if r == 0.0 {
                    return None;
                }
                let s = r.powf(1.0 / exponent - 1.0);
                Some(y.iter().map(|v| s * v).collect())
            }
        }
    }

    /// `(branch, preimage)` for every branch defined at `y`.
    pub fn preimages(&self, y: &[f64]) -> Vec<(usize, Vector)> {
        (0..self.branch_count())
            .filter_map(|k| self.branch_inverse(k, y).map(|x| (k, x)))
            .collect()
    }

    /// The branch `k` whose inverse maps `f(x)` back to `x`, i.e. the part
    /// `B_k` of the source partition containing `x`.
    pub fn branch_of(&self, x: &[f64]) -> Option<usize> {
        if self.excluded.contains(x) {
            return None;
        }
        let y = self.eval(x);
        let scale = norm(x).max(1.0);
        (0..self.branch_count())
            .filter_map(|k| self.branch_inverse(k, &y).map(|g| (k, dist(&g, x))))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .filter(|&(_, d)| d <= 1e-8 * scale)
            .map(|(k, _)| k)
    }

    /// A box containing the image of `source`'s box intersected with the
    /// working domain, derived from the map's closed form.
    pub fn image_bounds(&self, source: &Grid) -> (Vec<f64>, Vec<f64>) {
        let n = source.dim();
        let corner_radius = {
            let far: Vec<f64> = (0..n)
                .map(|a| source.lo()[a].abs().max(source.hi()[a].abs()))
                .collect();
            norm(&far)
        };
        let radius = match self.domain {
            Domain::Annulus { outer, .. } => outer.min(corner_radius),
            Domain::Everywhere => corner_radius,
        };
        let sym = |r: f64| (vec![-r; n], vec![r; n]);
        match &self.kind {
            MapKind::Power(k) => sym(radius.powi(*k as i32)),
            MapKind::RadialStretch { exponent, .. } => sym(radius.powf(*exponent)),
            MapKind::Linear(m) => match self.domain {
                Domain::Annulus { .. } => {
                    let half: Vec<f64> = m.rows().iter().map(|row| radius * norm(row)).collect();
                    (half.iter().map(|h| -h).collect(), half)
                }
                Domain::Everywhere => {
                    let mut lo = vec![f64::INFINITY; n];
                    let mut hi = vec![f64::NEG_INFINITY; n];
                    for corner in 0..(1usize << n) {
                        let x: Vec<f64> = (0..n)
                            .map(|a| {
                                if (corner >> a) & 1 == 1 {
                                    source.hi()[a]
                                } else {
                                    source.lo()[a]
                                }
                            })
                            .collect();
                        let y = m.mul_vec(&x);
                        for a in 0..n {
                            lo[a] = lo[a].min(y[a]);
                            hi[a] = hi[a].max(y[a]);
                        }
                    }
                    (lo, hi)
                }
            },
        }
    }

    /// Image grid over [`image_bounds`](Self::image_bounds) with `resolution` cells per axis.
    pub fn image_grid(&self, source: &Grid, resolution: Vec<usize>) -> Result<Grid> {
        let (lo, hi) = self.image_bounds(source);
        Grid::new(lo, hi, resolution)
    }
}

/// The built-in mappings.
pub fn catalog() -> Vec<MappingSpec> {
    vec![
        MappingSpec::identity(2),
        MappingSpec::identity(3),
        MappingSpec::diagonal(&[2.0, 1.0]),
        MappingSpec::diagonal(&[1.0, 2.0]),
        MappingSpec::diagonal(&[0.5, 3.0]),
        MappingSpec::diagonal(&[2.0, 1.0, 0.5]),
        MappingSpec::power(2).unwrap(),
        MappingSpec::power(3).unwrap(),
        MappingSpec::power(4).unwrap(),
        MappingSpec::radial_stretch(3.0, 2).unwrap(),
        MappingSpec::radial_stretch(0.5, 2).unwrap(),
        MappingSpec::radial_stretch(2.0, 3).unwrap(),
    ]
}

/// The three-case inner dilatation of order `p` for a derivative `m` with
/// Jacobian `jac`: `|J|/l(m)^p` if `J ≠ 0`, `1` if `m = 0`, `+∞` otherwise.
pub fn dilatation_of(m: &Matrix, jac: f64, p: f64) -> f64 {
    if m.max_abs() < ZERO_DERIVATIVE_TOL {
        return 1.0;
    }
    if jac != 0.0 {
        let l = min_stretch(m);
        if l == 0.0 {
            return f64::INFINITY;
        }
        return jac.abs() / l.powf(p);
    }
    f64::INFINITY
}

/// `K_{I,p}(x, f)`.
pub fn inner_dilatation(f: &MappingSpec, x: &[f64], p: f64) -> f64 {
    dilatation_of(&f.derivative(x), f.jacobian(x), p)
}

/// Inner dilatation sampled at cell centres; `None` marks cells whose
/// centre is outside the working domain or whose box meets the
/// exceptional set.
#[derive(Clone, Debug)]
pub struct DilatationField {
    pub order: f64,
    pub grid: Grid,
    pub values: Vec<Option<f64>>,
    pub ess_sup: f64,
}

impl DilatationField {
    pub fn compute(f: &MappingSpec, p: f64, grid: &Grid, exec: Execution) -> Self {
        let values = exec.map(grid.cell_count(), |i| {
            let c = grid.cell_center(i);
            let (lo, hi) = grid.cell_bounds(i);
            if !f.domain.contains(&c) || f.excluded.intersects_box(&lo, &hi) {
                None
            } else {
                Some(inner_dilatation(f, &c, p))
            }
        });
        let ess_sup = values.iter().flatten().copied().fold(0.0, f64::max);
        DilatationField {
            order: p,
            grid: grid.clone(),
            values,
            ess_sup,
        }
    }
}

/// `K_{I,p}(f)` estimated as the maximum over non-excluded cell centres.
pub fn ess_sup_dilatation(f: &MappingSpec, p: f64, grid: &Grid) -> f64 {
    DilatationField::compute(f, p, grid, Execution::default()).ess_sup
}

/// Largest relative deviation between the declared derivative and central
/// differences at `x` (step `1e-6 · max(|x|, 1)`).
pub fn derivative_residual(f: &MappingSpec, x: &[f64]) -> f64 {
    let n = f.dim();
    let h = 1e-6 * norm(x).max(1.0);
    let d = f.derivative(x);
    let scale = d.max_abs().max(1e-300);
    let mut worst: f64 = 0.0;
    for j in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        let (fp, fm) = (f.eval(&xp), f.eval(&xm));
        for i in 0..n {
            let fd = (fp[i] - fm[i]) / (2.0 * h);
            worst = worst.max((fd - d.get(i, j)).abs() / scale);
        }
    }
    worst
}

/// Largest `|f(g_k(y)) − y| / max(|y|, 1)` over the branches defined at `y`.
pub fn branch_round_trip_residual(f: &MappingSpec, y: &[f64]) -> f64 {
    let scale = norm(y).max(1.0);
    f.preimages(y)
        .iter()
        .map(|(_, x)| dist(&f.eval(x), y) / scale)
        .fold(0.0, f64::max)
}

/// Image curve `β = f∘α`, its normal representation `β⁰`, and the
/// f-representation `α*` (parametrised by the arc length of `β`).
#[derive(Clone, Debug)]
pub struct Lift {
    pub beta: Curve,
    pub beta0: NormalCurve,
    pub alpha_star: Curve,
}

impl Lift {
    pub fn new(f: &MappingSpec, alpha: &Curve) -> Result<Self> {
        let beta = alpha.map_points(|x| f.eval(x).to_vec())?;
        let beta0 = normal_representation(&beta)?;
        let alpha_star = f_representation(alpha, &beta)?;
        Ok(Lift {
            beta,
            beta0,
            alpha_star,
        })
    }

    /// `c = l(β)`.
    pub fn length(&self) -> f64 {
        self.beta0.total_length()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindingReport {
    pub m: usize,
    /// Length `c` of the image curve.
    pub image_length: f64,
    /// Period `h = c/m`.
    pub period: f64,
    /// Whether the defining conditions hold for `m` itself.
    pub literal: bool,
    /// Largest `|β⁰(t+jh) − β⁰(t)|` over the sampled `t`, relative to the
    /// extent of `β`.
    pub period_residual: f64,
    /// Smallest pairwise distance between the lifted points
    /// `α*(t+jh)`, `j = 0..m−1`, relative to the extent of `α`.
    pub min_lift_separation: f64,
    /// Smallest multiple `k·m ≤ MAX_WINDING`, `k ≥ 2`, for which the
    /// conditions also hold.
    pub higher_multiple: Option<usize>,
    pub samples: usize,
}

/// Number of sampled `t ∈ (0, h)` in the winding test.
pub const WINDING_SAMPLES: usize = 64;

struct PeriodCheck {
    ok: bool,
    period_residual: f64,
    min_sep: f64,
}

fn check_period(lift: &Lift, m: usize, tol: f64, beta_ext: f64, alpha_ext: f64) -> PeriodCheck {
    if m == 1 {
        return PeriodCheck {
            ok: true,
            period_residual: 0.0,
            min_sep: f64::INFINITY,
        };
    }
    let h = lift.length() / m as f64;
    let mut res: f64 = 0.0;
    let mut sep = f64::INFINITY;
    for i in 0..WINDING_SAMPLES {
        let t = h * (i as f64 + 0.5) / WINDING_SAMPLES as f64;
        let b0 = lift.beta0.point_at(t);
        let lifted: Vec<Vec<f64>> = (0..m)
            .map(|j| lift.alpha_star.point_at(t + j as f64 * h))
            .collect();
        for j in 1..m {
            res = res.max(dist(&lift.beta0.point_at(t + j as f64 * h), &b0));
        }
        for a in 0..m {
            for b in a + 1..m {
                sep = sep.min(dist(&lifted[a], &lifted[b]));
            }
        }
    }
    let period_residual = res / beta_ext.max(1e-300);
    let min_sep = sep / alpha_ext.max(1e-300);
    PeriodCheck {
        ok: period_residual <= tol && min_sep > tol,
        period_residual,
        min_sep,
    }
}

/// Whether `f` winds the closed curve `alpha` exactly `m` times around
/// itself.
///
/// With `h = c/m`, the test samples `t ∈ (0, h)` and requires
/// `β⁰(t+jh) = β⁰(t)` (within `tol` times the extent of `β`) and pairwise
/// distinct lifts `α*(t+jh)` (separated by more than `tol` times the extent
/// of `α`). `m = 1` satisfies these conditions vacuously; the returned flag
/// additionally requires that no multiple `k·m` satisfies them, so that a
/// doubly wound curve is not accepted as winding once. The bare conditions
/// are reported as [`WindingReport::literal`].
pub fn winds_m_times(
    f: &MappingSpec,
    alpha: &Curve,
    m: usize,
    tol: f64,
) -> Result<(bool, WindingReport)> {
    if !alpha.is_closed() {
        return Err(Error::Precondition(
            "winding test needs a closed curve".into(),
        ));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("winding count must be ≥ 1".into()));
    }
    let lift = Lift::new(f, alpha)?;
    winds_lift(&lift, alpha, m, tol)
}

pub(crate) fn winds_lift(
    lift: &Lift,
    alpha: &Curve,
    m: usize,
    tol: f64,
) -> Result<(bool, WindingReport)> {
    let beta_ext = lift.beta.extent();
    let alpha_ext = alpha.extent();
    let base = check_period(lift, m, tol, beta_ext, alpha_ext);
    let higher_multiple = if base.ok {
        (2..)
            .map(|k| k * m)
            .take_while(|&km| km <= MAX_WINDING)
            .find(|&km| check_period(lift, km, tol, beta_ext, alpha_ext).ok)
    } else {
        None
    };
    let report = WindingReport {
        m,
        image_length: lift.length(),
        period: lift.length() / m as f64,
        literal: base.ok,
        period_residual: base.period_residual,
        min_lift_separation: base.min_sep,
        higher_multiple,
        samples: WINDING_SAMPLES,
    };
    Ok((base.ok && higher_multiple.is_none(), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn circle(r: f64, n: usize) -> Curve {
        let fam = crate::family::CurveFamily::annulus_separating(r * 0.5, r * 1.5, 1, n).unwrap();
        fam.curves()[0].clone()
    }

    #[test]
    fn dilatation_hand_values() {
        let id = MappingSpec::identity(2);
        for p in [1.0, 2.0, 3.5] {
            assert_eq!(inner_dilatation(&id, &[0.3, -0.2], p), 1.0);
        }
        let sing = MappingSpec::diagonal(&[1.0, 0.0]);
        assert_eq!(inner_dilatation(&sing, &[0.5, 0.5], 2.0), f64::INFINITY);

        let sq = MappingSpec::power(2).unwrap();
        let r = 0.8_f64;
        let x = [r * 0.6, r * 0.8];
        assert_relative_eq!(inner_dilatation(&sq, &x, 2.0), 1.0, max_relative = 1e-12);
        for p in [1.0, 1.5, 3.0] {
            let expect = 2f64.powf(2.0 - p) * r.powf(2.0 - p);
            assert_relative_eq!(inner_dilatation(&sq, &x, p), expect, max_relative = 1e-12);
        }

        let st = MappingSpec::radial_stretch(3.0, 2).unwrap();
        assert_relative_eq!(
            inner_dilatation(&st, &[0.4, -1.3], 2.0),
            3.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn zero_derivative_gives_one() {
        // a > 1: f′(0) = 0
        let st = MappingSpec::radial_stretch(2.0, 2).unwrap();
        assert_eq!(inner_dilatation(&st, &[0.0, 0.0], 2.0), 1.0);
        assert_eq!(dilatation_of(&Matrix::zeros(3), 0.0, 3.0), 1.0);
    }

    #[test]
    fn ess_sup_examples() {
        let g = Grid::cube(2, -1.0, 1.0, 32).unwrap();
        assert_relative_eq!(ess_sup_dilatation(&MappingSpec::identity(2), 2.0, &g), 1.0);
        assert_relative_eq!(
            ess_sup_dilatation(&MappingSpec::diagonal(&[2.0, 1.0]), 2.0, &g),
            2.0
        );
        let ann = Grid::cube(2, -2.8, 2.8, 64).unwrap();
        let sq = MappingSpec::power(2).unwrap().with_domain(Domain::Annulus {
            inner: 1.0,
            outer: 2.7,
        });
        assert_relative_eq!(
            ess_sup_dilatation(&sq, 2.0, &ann),
            1.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn excluded_cells_skipped_in_field() {
        let g = Grid::cube(2, -1.0, 1.0, 4).unwrap();
        let f = DilatationField::compute(
            &MappingSpec::power(2).unwrap(),
            2.0,
            &g,
            Execution::Sequential,
        );
        // the origin is a corner shared by the four central cells
        assert_eq!(f.values.iter().filter(|v| v.is_none()).count(), 4);
    }

    #[test]
    fn catalog_contents() {
        let cat = catalog();
        let sq = cat.iter().find(|m| m.name() == "z^2").unwrap();
        assert_eq!(sq.winding_count(), 2);
        assert!(cat.iter().all(|m| m.attributes().all()));
        assert!(cat
            .iter()
            .any(|m| matches!(m.kind(), MapKind::RadialStretch { dim: 3, .. })));
    }

    #[test]
    fn catalog_derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for f in catalog() {
            for _ in 0..200 {
                let x: Vec<f64> = (0..f.dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
                if norm(&x) < 0.05 {
                    continue;
                }
                let r = derivative_residual(&f, &x);
                assert!(r <= 1e-5, "{}: residual {r:e} at {x:?}", f.name());
                let j = f.jacobian(&x);
                let d = f.derivative(&x).det();
                assert!(
                    (j - d).abs() <= 1e-9 * j.abs().max(1e-300),
                    "{}: J={j} det={d}",
                    f.name()
                );
            }
        }
    }

    #[test]
    fn catalog_branch_inverses_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for f in catalog() {
            for _ in 0..1000 {
                let y: Vec<f64> = (0..f.dim()).map(|_| rng.gen_range(-3.0..3.0)).collect();
                assert!(branch_round_trip_residual(&f, &y) <= 1e-9, "{}", f.name());
            }
        }
    }

    #[test]
    fn power_branches_partition_plane() {
        let f = MappingSpec::power(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut seen = [0usize; 3];
        for _ in 0..3000 {
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            seen[f.branch_of(&x).unwrap()] += 1;
        }
        assert!(seen.iter().all(|&c| c > 800));
        assert_eq!(f.branch_of(&[0.0, 0.0]), None);
        assert_eq!(f.preimages(&[0.0, 0.0]).len(), 0);
    }

    #[test]
    fn image_bounds_examples() {
        let g = Grid::cube(2, 0.0, 1.0, 8).unwrap();
        let (lo, hi) = MappingSpec::diagonal(&[2.0, 1.0]).image_bounds(&g);
        assert_eq!((lo, hi), (vec![0.0, 0.0], vec![2.0, 1.0]));
        let a = Grid::cube(2, -3.0, 3.0, 8).unwrap();
        let f = MappingSpec::power(3).unwrap().with_domain(Domain::Annulus {
            inner: 1.0,
            outer: 2.0,
        });
        assert_eq!(f.image_bounds(&a).1, vec![8.0, 8.0]);
    }

    #[test]
    fn winding_of_power_maps() {
        let alpha = circle(0.9, 2001);
        for m in 1..=3u32 {
            let f = MappingSpec::power(m).unwrap();
            for k in 1..=3usize {
                let (ok, rep) = winds_m_times(&f, &alpha, k, 1e-3).unwrap();
                assert_eq!(ok, k == m as usize, "z^{m} with m'={k}: {rep:?}");
            }
        }
        let id = MappingSpec::identity(2);
        assert!(winds_m_times(&id, &alpha, 1, 1e-3).unwrap().0);
    }

    #[test]
    fn literal_condition_is_vacuous_for_one() {
        let (ok, rep) =
            winds_m_times(&MappingSpec::power(2).unwrap(), &circle(1.0, 801), 1, 1e-3).unwrap();
        assert!(rep.literal);
        assert_eq!(rep.higher_multiple, Some(2));
        assert!(!ok);
    }

    #[test]
    fn winding_needs_closed_curve() {
        let seg = Curve::new(2, vec![0.0, 1.0], vec![1.0, 0.0, 2.0, 0.0], false).unwrap();
        assert!(matches!(
            winds_m_times(&MappingSpec::power(2).unwrap(), &seg, 2, 1e-3),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn lifted_points_are_antipodal_for_square() {
        let (ok, rep) =
            winds_m_times(&MappingSpec::power(2).unwrap(), &circle(1.0, 2001), 2, 1e-3).unwrap();
        assert!(ok);
        // antipodes of a unit circle: distance 2 relative to extent 2
        assert!((rep.min_lift_separation - 1.0).abs() < 1e-3);
        assert!(rep.period_residual < 1e-5);
    }
}
