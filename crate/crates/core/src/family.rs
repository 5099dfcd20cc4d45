//! Finite, explicitly sampled curve families.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::curves::Curve;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum FamilyKind {
    /// Rays joining the boundary circles of a planar annulus.
    RadialConnecting,
    /// Concentric circles separating the boundary circles of an annulus.
    SeparatingCircles,
    /// Parallel horizontal segments crossing a rectangle.
    SegmentBundle,
    Custom {
        name: String,
    },
    /// Pointwise image of another family under a named mapping.
    Image {
        source: Box<FamilyKind>,
        mapping: String,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurveFamily {
    dim: usize,
    curves: Vec<Curve>,
    kind: FamilyKind,
    params: BTreeMap<String, f64>,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

fn closed_circle(center: [f64; 2], r: f64, samples: usize) -> Result<Curve> {
    let ts = linspace(0.0, TAU, samples);
    let mut pts: Vec<Vec<f64>> = ts
        .iter()
        .map(|t| vec![center[0] + r * t.cos(), center[1] + r * t.sin()])
        .collect();
    let first = pts[0].clone();
    *pts.last_mut().unwrap() = first;
    Curve::from_points(ts, &pts, true)
}

impl CurveFamily {
    pub fn new(
        dim: usize,
        curves: Vec<Curve>,
        kind: FamilyKind,
        params: BTreeMap<String, f64>,
    ) -> Result<Self> {
        if let Some(c) = curves.iter().find(|c| c.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: c.dim(),
            });
        }
        Ok(CurveFamily {
            dim,
            curves,
            kind,
            params,
        })
    }

    pub fn empty(dim: usize) -> Self {
        CurveFamily {
            dim,
            curves: Vec::new(),
            kind: FamilyKind::Custom {
                name: "empty".into(),
            },
            params: BTreeMap::new(),
        }
    }

    pub fn custom(dim: usize, name: &str, curves: Vec<Curve>) -> Result<Self> {
        CurveFamily::new(
            dim,
            curves,
            FamilyKind::Custom { name: name.into() },
            BTreeMap::new(),
        )
    }

    /// `rays` radial segments from radius `inner` to `outer` about the origin,
    /// at equally spaced angles, each sampled at `samples` radii.
    pub fn annulus_connecting(inner: f64, outer: f64, rays: usize, samples: usize) -> Result<Self> {
        check_annulus(inner, outer, samples)?;
        let radii = linspace(inner, outer, samples);
        let curves = (0..rays)
            .map(|k| {
                let th = TAU * k as f64 / rays as f64;
                let (s, c) = th.sin_cos();
                Curve::sample(radii.clone(), false, |r| vec![r * c, r * s])
            })
            .collect::<Result<Vec<_>>>()?;
        let params = BTreeMap::from([
            ("inner_radius".to_string(), inner),
            ("outer_radius".to_string(), outer),
            ("count".to_string(), rays as f64),
            ("samples".to_string(), samples as f64),
        ]);
        CurveFamily::new(2, curves, FamilyKind::RadialConnecting, params)
    }

    /// `circles` closed circles about the origin with radii at the midpoints
    /// of `circles` equal sub-intervals of `(inner, outer)`.
    pub fn annulus_separating(
        inner: f64,
        outer: f64,
        circles: usize,
        samples: usize,
    ) -> Result<Self> {
        check_annulus(inner, outer, samples)?;
        let dr = (outer - inner) / circles as f64;
        let curves = (0..circles)
            .map(|k| closed_circle([0.0, 0.0], inner + (k as f64 + 0.5) * dr, samples))
            .collect::<Result<Vec<_>>>()?;
        let params = BTreeMap::from([
            ("inner_radius".to_string(), inner),
            ("outer_radius".to_string(), outer),
            ("count".to_string(), circles as f64),
            ("samples".to_string(), samples as f64),
        ]);
        CurveFamily::new(2, curves, FamilyKind::SeparatingCircles, params)
    }

    /// `count` horizontal segments from `x0` to `x1` at heights equally spaced
    /// (cell midpoints) in `(y0, y1)`.
    pub fn segment_bundle(
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
        count: usize,
        samples: usize,
    ) -> Result<Self> {
        if !(x0 < x1 && y0 < y1) {
            return Err(Error::InvalidArgument(
                "segment bundle needs x0 < x1 and y0 < y1".into(),
            ));
        }
        if samples < 2 {
            return Err(Error::InvalidArgument(
                "need at least 2 samples per curve".into(),
            ));
        }
        let xs = linspace(x0, x1, samples);
        let dy = (y1 - y0) / count as f64;
        let curves = (0..count)
            .map(|k| {
                let y = y0 + (k as f64 + 0.5) * dy;
                Curve::sample(xs.clone(), false, |x| vec![x, y])
            })
            .collect::<Result<Vec<_>>>()?;
        let params = BTreeMap::from([
            ("x0".to_string(), x0),
            ("x1".to_string(), x1),
            ("y0".to_string(), y0),
            ("y1".to_string(), y1),
            ("count".to_string(), count as f64),
            ("samples".to_string(), samples as f64),
        ]);
        CurveFamily::new(2, curves, FamilyKind::SegmentBundle, params)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn curves(&self) -> &[Curve] {
        &self.curves
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }

    /// The curves at `indices`, as a custom family.
    pub fn subfamily(&self, indices: &[usize]) -> CurveFamily {
        CurveFamily {
            dim: self.dim,
            curves: indices.iter().map(|&i| self.curves[i].clone()).collect(),
            kind: FamilyKind::Custom {
                name: "subfamily".into(),
            },
            params: BTreeMap::new(),
        }
    }

    /// Every curve dilated about the origin by `factor`.
    pub fn dilated(&self, factor: f64) -> Result<CurveFamily> {
        let curves = self
            .curves
            .iter()
            .map(|c| c.map_points(|p| p.iter().map(|v| v * factor).collect()))
            .collect::<Result<Vec<_>>>()?;
        Ok(CurveFamily {
            dim: self.dim,
            curves,
            kind: self.kind.clone(),
            params: self.params.clone(),
        })
    }
}

fn check_annulus(inner: f64, outer: f64, samples: usize) -> Result<()> {
    if !(inner > 0.0 && inner < outer && outer.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "annulus radii must satisfy 0 < r < R, got r={inner}, R={outer}"
        )));
    }
    if samples < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 samples per curve".into(),
        ));
    }
    Ok(())
}

/// Concatenation of two families in the same ambient dimension. The result
/// keeps the first family's kind when the second is empty (and vice versa)
/// and is tagged as a custom union otherwise.
pub fn family_union(a: &CurveFamily, b: &CurveFamily) -> Result<CurveFamily> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            got: b.dim,
        });
    }
    if b.is_empty() {
        return Ok(a.clone());
    }
    if a.is_empty() {
        return Ok(b.clone());
    }
    let mut params = a.params.clone();
    for (k, v) in &b.params {
        params.entry(format!("b.{k}")).or_insert(*v);
    }
    let mut curves = a.curves.clone();
    curves.extend(b.curves.iter().cloned());
    Ok(CurveFamily {
        dim: a.dim,
        curves,
        kind: FamilyKind::Custom {
            name: "union".into(),
        },
        params,
    })
}
