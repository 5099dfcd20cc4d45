//! Closed-form reference values for the built-in scenario shapes.

use modulus_core::modulus::{analytic_annulus_modulus, analytic_rectangle_modulus, AnnulusFamily};

use crate::scenario::{FamilyConfig, MapKindConfig, Scenario};

fn annulus_kind(f: &FamilyConfig) -> Option<(AnnulusFamily, f64, f64)> {
    match *f {
        FamilyConfig::RadialConnecting {
            inner_radius,
            outer_radius,
            ..
        } => Some((AnnulusFamily::Connecting, inner_radius, outer_radius)),
        FamilyConfig::SeparatingCircles {
            inner_radius,
            outer_radius,
            ..
        } => Some((AnnulusFamily::Separating, inner_radius, outer_radius)),
        _ => None,
    }
}

/// Modulus of the source family itself.
pub fn source_modulus(s: &Scenario, p: f64) -> Option<f64> {
    if let Some((kind, r, big_r)) = annulus_kind(&s.family) {
        return analytic_annulus_modulus(kind, r, big_r, p, 2).ok();
    }
    match s.family {
        FamilyConfig::SegmentBundle { x0, x1, y0, y1, .. } => {
            analytic_rectangle_modulus(x1 - x0, y1 - y0, p).ok()
        }
        _ => None,
    }
}

/// Modulus of the image family `f(Γ)`, when the map sends the family onto
/// another classical family.
pub fn image_modulus(s: &Scenario) -> Option<f64> {
    let p = s.p;
    let map = s.mapping.as_ref()?;
    match map.kind {
        MapKindConfig::Identity => source_modulus(s, p),
        MapKindConfig::Power | MapKindConfig::RadialStretch => {
            let (kind, r, big_r) = annulus_kind(&s.family)?;
            let a = map.exponent?;
            let m = analytic_annulus_modulus(kind, r.powf(a), big_r.powf(a), p, 2).ok()?;
            match (kind, map.kind) {
                // each circle is traversed `a` times
                (AnnulusFamily::Separating, MapKindConfig::Power) => Some(m * a.powf(-p)),
                _ => Some(m),
            }
        }
        MapKindConfig::Diagonal => {
            let d = map.diagonal.as_ref()?;
            match (s.family.clone(), d.as_slice()) {
                (FamilyConfig::SegmentBundle { x0, x1, y0, y1, .. }, [a, b]) => {
                    analytic_rectangle_modulus(a.abs() * (x1 - x0), b.abs() * (y1 - y0), p).ok()
                }
                _ => None,
            }
        }
        MapKindConfig::Linear => None,
    }
}
