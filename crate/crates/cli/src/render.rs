//! SVG heatmaps of planar densities.

use std::fmt::Write as _;

use anyhow::{bail, Result};
use modulus_core::DensityField;

/// Viridis anchor colours at 0, 0.25, 0.5, 0.75 and 1, interpolated
/// linearly in RGB.
const ANCHORS: [[f64; 3]; 5] = [
    [68.0, 1.0, 84.0],
    [59.0, 82.0, 139.0],
    [33.0, 145.0, 140.0],
    [94.0, 201.0, 98.0],
    [253.0, 231.0, 37.0],
];

/// Number of distinct colours; values are binned before run-length merging.
const LEVELS: usize = 256;
const TARGET_PX: f64 = 512.0;
const TICKS: usize = 5;

pub fn colormap(t: f64) -> [u8; 3] {
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    let x = t * (ANCHORS.len() - 1) as f64;
    let i = (x.floor() as usize).min(ANCHORS.len() - 2);
    let f = x - i as f64;
    let mut c = [0u8; 3];
    for k in 0..3 {
        c[k] = (ANCHORS[i][k] + f * (ANCHORS[i + 1][k] - ANCHORS[i][k])).round() as u8;
    }
    c
}

fn hex(c: [u8; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Renders a 2-D density with `y` pointing up, plus a colour bar labelled
/// with the data range. The root element carries `data-min`/`data-max`.
pub fn heatmap_svg(rho: &DensityField, title: &str) -> Result<String> {
    let g = rho.grid();
    if g.dim() != 2 {
        bail!("heatmap needs a 2-D density, got dimension {}", g.dim());
    }
    let (nx, ny) = (g.resolution()[0], g.resolution()[1]);
    let (lo, hi) = (rho.min(), rho.max());
    let span = if hi > lo { hi - lo } else { 1.0 };
    let level = |v: f64| (((v - lo) / span) * (LEVELS - 1) as f64).round() as usize;

    let unit = TARGET_PX / nx.max(ny) as f64;
    let bar_x = nx as f64 + 0.04 * nx as f64;
    let bar_w = 0.05 * nx as f64;
    let label_x = bar_x + bar_w + 0.02 * nx as f64;
    let font = 0.035 * ny as f64;
    let view_w = label_x + 0.25 * nx as f64;
    let view_h = ny as f64 + 2.0 * font;

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 {:.4} {view_w:.4} {view_h:.4}" shape-rendering="crispEdges" data-min="{lo:e}" data-max="{hi:e}">"#,
        view_w * unit,
        view_h * unit,
        -2.0 * font,
    )?;
    writeln!(s, r#"<title>{}</title>"#, escape(title))?;
    writeln!(
        s,
        r#"<text x="0" y="{:.4}" font-size="{font:.4}" font-family="sans-serif">{}</text>"#,
        -0.6 * font,
        escape(title)
    )?;
    for row in 0..ny {
        let j = ny - 1 - row;
        let mut i = 0;
        while i < nx {
            let l = level(rho.values()[i * ny + j]);
            let mut k = i + 1;
            while k < nx && level(rho.values()[k * ny + j]) == l {
                k += 1;
            }
            writeln!(
                s,
                r#"<rect x="{i}" y="{row}" width="{}" height="1" fill="{}"/>"#,
                k - i,
                hex(colormap(l as f64 / (LEVELS - 1) as f64))
            )?;
            i = k;
        }
    }
    let steps = 64;
    let step_h = ny as f64 / steps as f64;
    for b in 0..steps {
        let t = 1.0 - (b as f64 + 0.5) / steps as f64;
        writeln!(
            s,
            r#"<rect x="{bar_x:.4}" y="{:.4}" width="{bar_w:.4}" height="{:.4}" fill="{}"/>"#,
            b as f64 * step_h,
            step_h * 1.01,
            hex(colormap(t))
        )?;
    }
    for t in 0..TICKS {
        let frac = t as f64 / (TICKS - 1) as f64;
        let y = ny as f64 * (1.0 - frac);
        let v = lo + frac * (hi - lo);
        writeln!(
            s,
            r#"<text x="{label_x:.4}" y="{:.4}" font-size="{font:.4}" font-family="sans-serif" class="tick">{v:.4e}</text>"#,
            y + 0.35 * font
        )?;
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use modulus_core::Grid;

    #[test]
    fn colormap_ends() {
        assert_eq!(colormap(0.0), [68, 1, 84]);
        assert_eq!(colormap(1.0), [253, 231, 37]);
        assert_eq!(colormap(f64::NAN), colormap(0.0));
    }

    #[test]
    fn constant_field_is_one_rect_per_row() {
        let rho = DensityField::constant(Grid::cube(2, 0.0, 1.0, 10).unwrap(), 3.0).unwrap();
        let svg = heatmap_svg(&rho, "c").unwrap();
        // 10 rows plus 64 colour-bar steps
        assert_eq!(svg.matches("<rect").count(), 74);
        assert!(svg.contains(r#"data-min="3e0" data-max="3e0""#));
    }

    #[test]
    fn rejects_3d() {
        let rho = DensityField::zeros(Grid::cube(3, 0.0, 1.0, 2).unwrap());
        assert!(heatmap_svg(&rho, "x").is_err());
    }
}
