//! Scenario files: one TOML document per experiment.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use modulus_core::linalg::Matrix;
use modulus_core::mappings::Domain;
use modulus_core::{CurveFamily, Grid, MappingSpec, SolverOptions, VerifyOptions};
use serde::Deserialize;

pub const SCHEMA: &str = "modulus-scenario/1";
const DEFAULT_RESOLUTION: usize = 256;
/// Margin around annulus boxes, relative to the outer radius.
const BOX_MARGIN: f64 = 1.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    ComputeModulus,
    VerifyTheorem2,
    VerifyCorollary1,
    Sweep,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::ComputeModulus => "compute-modulus",
            Command::VerifyTheorem2 => "verify-theorem2",
            Command::VerifyCorollary1 => "verify-corollary1",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Output {
    Report,
    Csv,
    Heatmap,
    Grid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapKindConfig {
    Identity,
    Diagonal,
    Linear,
    Power,
    RadialStretch,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnulusConfig {
    pub inner: f64,
    pub outer: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingConfig {
    pub kind: MapKindConfig,
    /// Integer exponent of `z^m`, or the radial exponent.
    pub exponent: Option<f64>,
    pub diagonal: Option<Vec<f64>>,
    pub matrix: Option<Vec<Vec<f64>>>,
    pub dim: Option<usize>,
    pub domain: Option<AnnulusConfig>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilyConfig {
    RadialConnecting {
        inner_radius: f64,
        outer_radius: f64,
        count: usize,
        samples: usize,
    },
    SeparatingCircles {
        inner_radius: f64,
        outer_radius: f64,
        count: usize,
        samples: usize,
    },
    SegmentBundle {
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
        count: usize,
        samples: usize,
    },
    /// A family file written by `modulus_core::io::write_family`.
    File {
        path: PathBuf,
    },
    Empty {
        dim: usize,
    },
}

impl FamilyConfig {
    pub fn dim(&self) -> Option<usize> {
        match self {
            FamilyConfig::File { .. } => None,
            FamilyConfig::Empty { dim } => Some(*dim),
            _ => Some(2),
        }
    }

    pub fn annulus(&self) -> Option<(f64, f64)> {
        match *self {
            FamilyConfig::RadialConnecting {
                inner_radius,
                outer_radius,
                ..
            }
            | FamilyConfig::SeparatingCircles {
                inner_radius,
                outer_radius,
                ..
            } => Some((inner_radius, outer_radius)),
            _ => None,
        }
    }

    fn set_outer_radius(&mut self, r: f64) -> Result<()> {
        match self {
            FamilyConfig::RadialConnecting { outer_radius, .. }
            | FamilyConfig::SeparatingCircles { outer_radius, .. } => {
                *outer_radius = r;
                Ok(())
            }
            _ => bail!("sweep key `outer_radius` needs an annulus family"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityKind {
    /// The solver's extremal density for the source family.
    Extremal,
    Constant,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    pub kind: DensityKind,
    pub value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Resolution {
    Uniform(usize),
    PerAxis(Vec<usize>),
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lo: Option<Vec<f64>>,
    pub hi: Option<Vec<f64>>,
    pub resolution: Option<Resolution>,
}

impl GridConfig {
    fn resolution(&self, dim: usize) -> Vec<usize> {
        match &self.resolution {
            None => vec![DEFAULT_RESOLUTION; dim],
            Some(Resolution::Uniform(r)) => vec![*r; dim],
            Some(Resolution::PerAxis(v)) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub refine: bool,
    pub quadrature: usize,
    pub check_curves: usize,
    pub holder_samples: usize,
    pub winding_tol: f64,
    pub change_of_variables_tol: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        let d = VerifyOptions::default();
        VerifyConfig {
            refine: d.refine,
            quadrature: d.quadrature,
            check_curves: d.check_curves,
            holder_samples: d.holder_samples,
            winding_tol: d.winding_tol,
            change_of_variables_tol: d.change_of_variables_tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Command run for every row.
    pub command: Command,
    pub m: Option<Vec<usize>>,
    pub p: Option<Vec<f64>>,
    pub outer_radius: Option<Vec<f64>>,
    pub resolution: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: String,
    pub name: String,
    pub command: Command,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default)]
    pub outputs: Vec<Output>,
    pub mapping: Option<MappingConfig>,
    pub family: FamilyConfig,
    pub density: Option<DensityConfig>,
    #[serde(default)]
    pub source_grid: GridConfig,
    #[serde(default)]
    pub image_grid: GridConfig,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub verify: VerifyConfig,
    pub sweep: Option<SweepConfig>,
    /// Directory the scenario was read from; relative paths resolve here.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_p() -> f64 {
    2.0
}

fn default_m() -> usize {
    1
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario =
            toml::from_str(text).map_err(|e| anyhow::anyhow!("malformed scenario: {e}"))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut s = Self::from_toml(&text).with_context(|| format!("in {}", path.display()))?;
        s.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(s)
    }

    /// Checks the command-specific keys and value ranges.
    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            bail!(
                "key `schema`: expected \"{SCHEMA}\", got \"{}\"",
                self.schema
            );
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            bail!("key `name`: must be a non-empty file-name-safe string");
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            bail!("key `p`: must be ≥ 1, got {}", self.p);
        }
        if self.m < 1 {
            bail!("key `m`: must be ≥ 1");
        }
        match &self.family {
            FamilyConfig::RadialConnecting {
                inner_radius,
                outer_radius,
                count,
                samples,
            }
            | FamilyConfig::SeparatingCircles {
                inner_radius,
                outer_radius,
                count,
                samples,
            } => {
                if !(*inner_radius > 0.0 && inner_radius < outer_radius && outer_radius.is_finite())
                {
                    bail!(
                        "key `family.inner_radius`/`family.outer_radius`: must satisfy 0 < r < R"
                    );
                }
                if *count == 0 || *samples < 2 {
                    bail!("key `family.count`/`family.samples`: need count ≥ 1 and samples ≥ 2");
                }
            }
            FamilyConfig::SegmentBundle {
                x0,
                x1,
                y0,
                y1,
                count,
                samples,
            } => {
                if !(x0 < x1 && y0 < y1) {
                    bail!("key `family.x0`..`family.y1`: need x0 < x1 and y0 < y1");
                }
                if *count == 0 || *samples < 2 {
                    bail!("key `family.count`/`family.samples`: need count ≥ 1 and samples ≥ 2");
                }
            }
            FamilyConfig::Empty { dim } if !(2..=3).contains(dim) => {
                bail!("key `family.dim`: must be 2 or 3")
            }
            _ => {}
        }
        let needs_mapping = matches!(
            self.command,
            Command::VerifyTheorem2 | Command::VerifyCorollary1
        ) || self
            .sweep
            .as_ref()
            .is_some_and(|s| s.command != Command::ComputeModulus);
        if needs_mapping && self.mapping.is_none() {
            bail!(
                "key `mapping`: required by command `{}`",
                self.command.as_str()
            );
        }
        if let Some(m) = &self.mapping {
            validate_mapping(m)?;
        }
        if self.command == Command::VerifyTheorem2 && self.density.is_none() {
            bail!("key `density`: required by command `verify-theorem2`");
        }
        if let Some(d) = &self.density {
            if d.kind == DensityKind::Constant
                && !d.value.is_some_and(|v| v >= 0.0 && v.is_finite())
            {
                bail!("key `density.value`: a constant density needs a finite value ≥ 0");
            }
        }
        match (&self.sweep, self.command) {
            (None, Command::Sweep) => bail!("key `sweep`: required by command `sweep`"),
            (Some(s), Command::Sweep) => {
                if s.command == Command::Sweep {
                    bail!("key `sweep.command`: must not itself be `sweep`");
                }
                if s.command == Command::VerifyTheorem2 && self.density.is_none() {
                    bail!("key `density`: required by sweep command `verify-theorem2`");
                }
                if s.m.as_ref().is_some_and(|v| v.contains(&0)) {
                    bail!("key `sweep.m`: entries must be ≥ 1");
                }
                if s.p.as_ref().is_some_and(|v| v.iter().any(|p| !(*p >= 1.0))) {
                    bail!("key `sweep.p`: entries must be ≥ 1");
                }
                if s.resolution
                    .as_ref()
                    .is_some_and(|v| v.iter().any(|r| *r < 2))
                {
                    bail!("key `sweep.resolution`: entries must be ≥ 2");
                }
            }
            (Some(_), _) => bail!("key `sweep`: only allowed with command `sweep`"),
            _ => {}
        }
        if !(self.solver.tolerance > 0.0) {
            bail!("key `solver.tolerance`: must be positive");
        }
        Ok(())
    }

    pub fn build_family(&self) -> Result<CurveFamily> {
        let fam = match &self.family {
            FamilyConfig::RadialConnecting {
                inner_radius,
                outer_radius,
                count,
                samples,
            } => CurveFamily::annulus_connecting(*inner_radius, *outer_radius, *count, *samples)?,
            FamilyConfig::SeparatingCircles {
                inner_radius,
                outer_radius,
                count,
                samples,
            } => CurveFamily::annulus_separating(*inner_radius, *outer_radius, *count, *samples)?,
            FamilyConfig::SegmentBundle {
                x0,
                x1,
                y0,
                y1,
                count,
                samples,
            } => CurveFamily::segment_bundle(*x0, *x1, *y0, *y1, *count, *samples)?,
            FamilyConfig::File { path } => {
                let p = if path.is_absolute() {
                    path.clone()
                } else {
                    self.base_dir.join(path)
                };
                modulus_core::io::read_family(&p)
                    .with_context(|| format!("key `family.path`: {}", p.display()))?
            }
            FamilyConfig::Empty { dim } => CurveFamily::empty(*dim),
        };
        Ok(fam)
    }

    pub fn build_mapping(&self) -> Result<MappingSpec> {
        let cfg = self.mapping.as_ref().context("key `mapping`: missing")?;
        let f = match cfg.kind {
            MapKindConfig::Identity => MappingSpec::identity(cfg.dim.unwrap_or(2)),
            MapKindConfig::Diagonal => {
                MappingSpec::diagonal(cfg.diagonal.as_deref().unwrap_or_default())
            }
            MapKindConfig::Linear => {
                let rows = cfg
                    .matrix
                    .as_ref()
                    .context("key `mapping.matrix`: missing")?;
                MappingSpec::linear(
                    "linear",
                    Matrix::from_rows(rows).context("key `mapping.matrix`")?,
                )
            }
            MapKindConfig::Power => MappingSpec::power(cfg.exponent.unwrap_or(2.0) as u32)?,
            MapKindConfig::RadialStretch => {
                MappingSpec::radial_stretch(cfg.exponent.unwrap_or(1.0), cfg.dim.unwrap_or(2))?
            }
        };
        Ok(match &cfg.domain {
            Some(a) => f.with_domain(Domain::Annulus {
                inner: a.inner,
                outer: a.outer,
            }),
            None => f,
        })
    }

    fn dim(&self) -> usize {
        self.family
            .dim()
            .or_else(|| self.source_grid.lo.as_ref().map(Vec::len))
            .or_else(|| self.mapping.as_ref().and_then(|m| m.dim))
            .unwrap_or(2)
    }

    /// The source grid; the box defaults to the family's natural box.
    pub fn build_source_grid(&self) -> Result<Grid> {
        let dim = self.dim();
        let res = self.source_grid.resolution(dim);
        let (lo, hi) = match (&self.source_grid.lo, &self.source_grid.hi) {
            (Some(lo), Some(hi)) => (lo.clone(), hi.clone()),
            (None, None) => match &self.family {
                FamilyConfig::RadialConnecting { outer_radius, .. }
                | FamilyConfig::SeparatingCircles { outer_radius, .. } => {
                    let r = BOX_MARGIN * outer_radius;
                    (vec![-r; dim], vec![r; dim])
                }
                FamilyConfig::SegmentBundle { x0, x1, y0, y1, .. } => {
                    (vec![*x0, *y0], vec![*x1, *y1])
                }
                FamilyConfig::Empty { dim } => (vec![-1.0; *dim], vec![1.0; *dim]),
                FamilyConfig::File { .. } => {
                    bail!("key `source_grid.lo`/`source_grid.hi`: required for a family file")
                }
            },
            _ => bail!("key `source_grid`: give both `lo` and `hi` or neither"),
        };
        Grid::new(lo, hi, res).context("key `source_grid`")
    }

    /// The image grid; the box defaults to the image of the source box.
    pub fn build_image_grid(&self, f: &MappingSpec, source: &Grid) -> Result<Grid> {
        let res = self.image_grid.resolution(source.dim());
        let (lo, hi) = match (&self.image_grid.lo, &self.image_grid.hi) {
            (Some(lo), Some(hi)) => (lo.clone(), hi.clone()),
            (None, None) => {
                let (lo, hi) = f.image_bounds(source);
                match self.mapping.as_ref().map(|m| m.kind) {
                    // images of annuli touch the box otherwise
                    Some(MapKindConfig::Power | MapKindConfig::RadialStretch) => (
                        lo.iter().map(|v| v * BOX_MARGIN).collect(),
                        hi.iter().map(|v| v * BOX_MARGIN).collect(),
                    ),
                    _ => (lo, hi),
                }
            }
            _ => bail!("key `image_grid`: give both `lo` and `hi` or neither"),
        };
        Grid::new(lo, hi, res).context("key `image_grid`")
    }

    pub fn verify_options(&self) -> VerifyOptions {
        let v = &self.verify;
        VerifyOptions {
            solver: self.solver.clone(),
            refine: v.refine,
            quadrature: v.quadrature,
            check_curves: v.check_curves,
            holder_samples: v.holder_samples,
            winding_tol: v.winding_tol,
            change_of_variables_tol: v.change_of_variables_tol,
            lhs_reference: None,
        }
    }

    /// One scenario per combination of the sweep ranges, in row-major order
    /// (m, then p, then outer radius, then resolution).
    pub fn expand_sweep(&self) -> Result<Vec<Scenario>> {
        let sw = self.sweep.as_ref().context("key `sweep`: missing")?;
        let ms = sw.m.clone().unwrap_or_else(|| vec![self.m]);
        let ps = sw.p.clone().unwrap_or_else(|| vec![self.p]);
        let rs: Vec<Option<f64>> = sw
            .outer_radius
            .as_ref()
            .map_or(vec![None], |v| v.iter().copied().map(Some).collect());
        let res: Vec<Option<usize>> = sw
            .resolution
            .as_ref()
            .map_or(vec![None], |v| v.iter().copied().map(Some).collect());
        let mut rows = Vec::new();
        for &m in &ms {
            for &p in &ps {
                for &r in &rs {
                    for &n in &res {
                        let mut s = self.clone();
                        s.command = sw.command;
                        s.sweep = None;
                        s.m = m;
                        s.p = p;
                        s.name = format!("{}-{}", self.name, rows.len());
                        if sw.m.is_some() {
                            if let Some(mc) = s
                                .mapping
                                .as_mut()
                                .filter(|mc| mc.kind == MapKindConfig::Power)
                            {
                                // z^m winds every circle m times
                                mc.exponent = Some(m as f64);
                            }
                        }
                        if let Some(r) = r {
                            s.family.set_outer_radius(r)?;
                            if let Some(d) = s.mapping.as_mut().and_then(|mc| mc.domain.as_mut()) {
                                d.outer = r;
                            }
                        }
                        if let Some(n) = n {
                            s.source_grid.resolution = Some(Resolution::Uniform(n));
                            s.image_grid.resolution = Some(Resolution::Uniform(n));
                        }
                        s.validate()
                            .with_context(|| format!("sweep row {}", rows.len()))?;
                        rows.push(s);
                    }
                }
            }
        }
        Ok(rows)
    }
}

fn validate_mapping(m: &MappingConfig) -> Result<()> {
    match m.kind {
        MapKindConfig::Power => {
            let e = m.exponent.unwrap_or(2.0);
            if !(e >= 1.0 && e.fract() == 0.0 && e <= 64.0) {
                bail!("key `mapping.exponent`: z^m needs an integer exponent in 1..=64, got {e}");
            }
        }
        MapKindConfig::RadialStretch => {
            if !m.exponent.is_some_and(|a| a > 0.0 && a.is_finite()) {
                bail!("key `mapping.exponent`: radial stretch needs a positive exponent");
            }
        }
        MapKindConfig::Diagonal => {
            let d = m
                .diagonal
                .as_ref()
                .context("key `mapping.diagonal`: required for a diagonal map")?;
            if !(2..=3).contains(&d.len()) {
                bail!("key `mapping.diagonal`: needs 2 or 3 entries");
            }
        }
        MapKindConfig::Linear => {
            let rows = m
                .matrix
                .as_ref()
                .context("key `mapping.matrix`: required for a linear map")?;
            if !(2..=3).contains(&rows.len()) || rows.iter().any(|r| r.len() != rows.len()) {
                bail!("key `mapping.matrix`: must be square of size 2 or 3");
            }
        }
        MapKindConfig::Identity => {}
    }
    if let Some(d) = &m.domain {
        if !(d.inner > 0.0 && d.inner < d.outer) {
            bail!("key `mapping.domain`: must satisfy 0 < inner < outer");
        }
    }
    Ok(())
}
