//! Curve and family exchange files (JSON) and flat grid density dumps.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::curves::Curve;
use crate::error::{Error, Result};
use crate::family::{CurveFamily, FamilyKind};
use crate::grid::DensityField;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub params: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub closed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyMetadata {
    #[serde(flatten)]
    pub kind: FamilyKind,
    #[serde(default)]
    pub generator_params: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyFile {
    pub dim: usize,
    pub metadata: FamilyMetadata,
    pub curves: Vec<CurveRecord>,
}

impl From<&Curve> for CurveRecord {
    fn from(c: &Curve) -> Self {
        CurveRecord {
            params: c.params().to_vec(),
            points: c.points().map(<[f64]>::to_vec).collect(),
            closed: c.is_closed(),
        }
    }
}

impl TryFrom<&CurveRecord> for Curve {
    type Error = Error;

    fn try_from(r: &CurveRecord) -> Result<Curve> {
        Curve::from_points(r.params.clone(), &r.points, r.closed)
    }
}

impl From<&CurveFamily> for FamilyFile {
    fn from(f: &CurveFamily) -> Self {
        FamilyFile {
            dim: f.dim(),
            metadata: FamilyMetadata {
                kind: f.kind().clone(),
                generator_params: f.params().clone(),
            },
            curves: f.curves().iter().map(CurveRecord::from).collect(),
        }
    }
}

impl TryFrom<&FamilyFile> for CurveFamily {
    type Error = Error;

    fn try_from(f: &FamilyFile) -> Result<CurveFamily> {
        let curves = f
            .curves
            .iter()
            .map(Curve::try_from)
            .collect::<Result<Vec<_>>>()?;
        CurveFamily::new(
            f.dim,
            curves,
            f.metadata.kind.clone(),
            f.metadata.generator_params.clone(),
        )
    }
}

pub fn read_family(path: &Path) -> Result<CurveFamily> {
    let text = std::fs::read_to_string(path)?;
    let file: FamilyFile = serde_json::from_str(&text)?;
    CurveFamily::try_from(&file)
}

pub fn write_family(path: &Path, fam: &CurveFamily) -> Result<()> {
    let text = serde_json::to_string(&FamilyFile::from(fam))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Flat text dump: `#`-prefixed header with dimension, box and resolution,
/// then one value per line in row-major order (last axis fastest).
pub fn density_to_grid_text(rho: &DensityField) -> String {
    let g = rho.grid();
    let join = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:e}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut out = String::new();
    writeln!(out, "# dim {}", g.dim()).unwrap();
    writeln!(out, "# lo {}", join(g.lo())).unwrap();
    writeln!(out, "# hi {}", join(g.hi())).unwrap();
    let res: Vec<String> = g.resolution().iter().map(usize::to_string).collect();
    writeln!(out, "# resolution {}", res.join(" ")).unwrap();
    for v in rho.values() {
        writeln!(out, "{v:e}").unwrap();
    }
    out
}

pub fn density_from_grid_text(text: &str) -> Result<DensityField> {
    let mut lo = None;
    let mut hi = None;
    let mut res = None;
    let mut values = Vec::new();
    let bad = |line: usize, msg: &str| {
        Error::InvalidArgument(format!("grid file line {}: {msg}", line + 1))
    };
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(h) = line.strip_prefix('#') {
            let mut it = h.split_whitespace();
            let key = it.next().unwrap_or("");
            let rest: Vec<&str> = it.collect();
            let floats = || {
                rest.iter()
                    .map(|s| s.parse::<f64>().map_err(|_| bad(ln, "bad number")))
                    .collect::<Result<Vec<f64>>>()
            };
            match key {
                "dim" => {}
                "lo" => lo = Some(floats()?),
                "hi" => hi = Some(floats()?),
                "resolution" => {
                    res = Some(
                        rest.iter()
                            .map(|s| s.parse::<usize>().map_err(|_| bad(ln, "bad resolution")))
                            .collect::<Result<Vec<usize>>>()?,
                    )
                }
                _ => return Err(bad(ln, "unknown header key")),
            }
        } else {
            values.push(line.parse::<f64>().map_err(|_| bad(ln, "bad value"))?);
        }
    }
    let missing = |k: &str| Error::InvalidArgument(format!("grid file missing `{k}` header"));
    let grid = crate::grid::Grid::new(
        lo.ok_or_else(|| missing("lo"))?,
        hi.ok_or_else(|| missing("hi"))?,
        res.ok_or_else(|| missing("resolution"))?,
    )?;
    DensityField::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Execution;
    use crate::grid::Grid;

    #[test]
    fn family_file_round_trip() {
        let f = CurveFamily::annulus_separating(1.0, 2.0, 3, 9).unwrap();
        let text = serde_json::to_string(&FamilyFile::from(&f)).unwrap();
        assert!(text.contains("\"kind\":\"separating-circles\""));
        let back: FamilyFile = serde_json::from_str(&text).unwrap();
        assert_eq!(CurveFamily::try_from(&back).unwrap(), f);
    }

    #[test]
    fn grid_text_round_trip() {
        let g = Grid::new(vec![-1.0, 0.0], vec![1.0, 0.5], vec![3, 4]).unwrap();
        let rho =
            DensityField::from_fn(g, Execution::Sequential, |x| x[0].abs() + x[1] / 3.0).unwrap();
        let text = density_to_grid_text(&rho);
        assert!(text.starts_with("# dim 2\n"));
        assert_eq!(density_from_grid_text(&text).unwrap(), rho);
    }
}
