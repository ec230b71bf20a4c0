//! Catalog of reference immersions: exactly parametrized surfaces used as
//! initial data, convergence references, and fixed points.
//!
//! Every constructor produces points that satisfy the model membership
//! identity to machine precision (the tests pin a 1e-12 relative defect).

use crate::error::{ConfigError, Error, Result};
use crate::spaceform::Ambient;
use crate::surface::{SurfaceGrid, Topology};

/// Names accepted by [`build`], in catalog order.
pub const CATALOG: [&str; 8] = [
    "round-sphere-r4",
    "geodesic-sphere-s4",
    "geodesic-sphere-h4",
    "totally-geodesic-s2",
    "clifford-torus-s4",
    "torus-h4",
    "ellipsoid-r4",
    "perturbed-sphere",
];

/// Optional parameters a preset may consume; unused entries are rejected by
/// the config layer, not here.
#[derive(Debug, Clone, Copy, Default)]
pub struct PresetParams {
    /// Sphere radius for the flat-model presets.
    pub radius: Option<f64>,
    /// Geodesic radius for the curved-model spheres.
    pub rho: Option<f64>,
    /// Relative amplitude of the perturbed sphere.
    pub eps: Option<f64>,
    /// Ellipsoid semi-axes.
    pub semi_axes: Option<[f64; 3]>,
}

fn invalid(msg: String) -> Error {
    Error::from(ConfigError::Invalid(msg))
}

/// Build a catalog preset by name on the given model.
pub fn build(
    name: &str,
    model: Ambient,
    nu: usize,
    nv: usize,
    params: &PresetParams,
) -> Result<SurfaceGrid> {
    match name {
        "round-sphere-r4" => {
            require_model(name, &model, "r4")?;
            round_sphere_r4(params.radius.unwrap_or(1.0), nu, nv)
        }
        "geodesic-sphere-s4" => {
            let radius = require_model(name, &model, "s4")?;
            let rho = params.rho.ok_or_else(|| {
                invalid(format!("preset `{name}` needs a geodesic radius `rho`"))
            })?;
            geodesic_sphere_s4(radius, rho, nu, nv)
        }
        "geodesic-sphere-h4" => {
            let radius = require_model(name, &model, "h4")?;
            let rho = params.rho.ok_or_else(|| {
                invalid(format!("preset `{name}` needs a geodesic radius `rho`"))
            })?;
            geodesic_sphere_h4(radius, rho, nu, nv)
        }
        "totally-geodesic-s2" => {
            let radius = require_model(name, &model, "s4")?;
            totally_geodesic_s2(radius, nu, nv)
        }
        "clifford-torus-s4" => {
            let radius = require_model(name, &model, "s4")?;
            clifford_torus_s4(radius, nu, nv)
        }
        "torus-h4" => {
            let radius = require_model(name, &model, "h4")?;
            torus_h4(radius, nu, nv)
        }
        "ellipsoid-r4" => {
            require_model(name, &model, "r4")?;
            ellipsoid_r4(params.semi_axes.unwrap_or([1.0, 1.0, 1.2]), nu, nv)
        }
        "perturbed-sphere" => perturbed_sphere(model, params, nu, nv),
        _ => Err(invalid(format!(
            "unknown preset `{name}`; available: {}",
            CATALOG.join(", ")
        ))),
    }
}

fn require_model(name: &str, model: &Ambient, expected: &str) -> Result<f64> {
    let ok = matches!(
        (model, expected),
        (Ambient::R4, "r4") | (Ambient::S4 { .. }, "s4") | (Ambient::H4 { .. }, "h4")
    );
    if !ok {
        return Err(invalid(format!(
            "preset `{name}` requires the `{expected}` model (got {model:?})"
        )));
    }
    Ok(match model {
        Ambient::R4 => 1.0,
        Ambient::S4 { radius } | Ambient::H4 { radius } => *radius,
    })
}

fn positive(name: &str, value: f64) -> Result<f64> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(invalid(format!("`{name}` must be positive and finite (got {value})")));
    }
    Ok(value)
}

/// Round 2-sphere of the given radius inside a coordinate 3-plane of R^4.
pub fn round_sphere_r4(radius: f64, nu: usize, nv: usize) -> Result<SurfaceGrid> {
    let r = positive("radius", radius)?;
    SurfaceGrid::from_parametrization(Ambient::R4, Topology::LatLongSphere, nu, nv, |u, v| {
        [
            r * u.sin() * v.cos(),
            r * u.sin() * v.sin(),
            r * u.cos(),
            0.0,
            0.0,
        ]
    })
}

/// Geodesic 2-sphere of geodesic radius `rho` inside a totally geodesic
/// S^3 of S^4(R).
pub fn geodesic_sphere_s4(radius: f64, rho: f64, nu: usize, nv: usize) -> Result<SurfaceGrid> {
    let big_r = positive("model radius", radius)?;
    positive("rho", rho)?;
    if rho >= std::f64::consts::FRAC_PI_2 * big_r {
        return Err(invalid(format!(
            "geodesic radius rho = {rho} must stay below the equator pi*R/2 = {}",
            std::f64::consts::FRAC_PI_2 * big_r
        )));
    }
    let (s, c) = (rho / big_r).sin_cos();
    SurfaceGrid::from_parametrization(
        Ambient::S4 { radius: big_r },
        Topology::LatLongSphere,
        nu,
        nv,
        |u, v| {
            [
                big_r * s * u.sin() * v.cos(),
                big_r * s * u.sin() * v.sin(),
                big_r * s * u.cos(),
                0.0,
                big_r * c,
            ]
        },
    )
}

/// Geodesic 2-sphere of geodesic radius `rho` in hyperbolic space H^4(R),
/// centered on the hyperboloid vertex.
pub fn geodesic_sphere_h4(radius: f64, rho: f64, nu: usize, nv: usize) -> Result<SurfaceGrid> {
    let big_r = positive("model radius", radius)?;
    positive("rho", rho)?;
    let (s, c) = ((rho / big_r).sinh(), (rho / big_r).cosh());
    SurfaceGrid::from_parametrization(
        Ambient::H4 { radius: big_r },
        Topology::LatLongSphere,
        nu,
        nv,
        |u, v| {
            [
                big_r * c,
                big_r * s * u.sin() * v.cos(),
                big_r * s * u.sin() * v.sin(),
                big_r * s * u.cos(),
                0.0,
            ]
        },
    )
}

/// Totally geodesic S^2 (an equatorial 2-sphere) in S^4(R): a minimal fixed
/// point of the flow.
pub fn totally_geodesic_s2(radius: f64, nu: usize, nv: usize) -> Result<SurfaceGrid> {
    let r = positive("model radius", radius)?;
    SurfaceGrid::from_parametrization(
        Ambient::S4 { radius: r },
        Topology::LatLongSphere,
        nu,
        nv,
        |u, v| {
            [
                r * u.sin() * v.cos(),
                r * u.sin() * v.sin(),
                r * u.cos(),
                0.0,
                0.0,
            ]
        },
    )
}

/// Minimal Clifford torus S^1(R/sqrt2) x S^1(R/sqrt2) in S^4(R).
pub fn clifford_torus_s4(radius: f64, nu: usize, nv: usize) -> Result<SurfaceGrid> {
    let r = positive("model radius", radius)?;
    let q = r / std::f64::consts::SQRT_2;
    SurfaceGrid::from_parametrization(
        Ambient::S4 { radius: r },
        Topology::TorusPeriodic,
        nu,
        nv,
        |u, v| [q * u.cos(), q * u.sin(), q * v.cos(), q * v.sin(), 0.0],
    )
}

/// Flat torus in H^4(R): the Clifford torus of a geodesic sphere S^3(R)
/// placed at hyperboloid height cosh(rho) = sqrt(2) (where sinh(rho) = 1).
pub fn torus_h4(radius: f64, nu: usize, nv: usize) -> Result<SurfaceGrid> {
    let r = positive("model radius", radius)?;
    let q = r / std::f64::consts::SQRT_2;
    SurfaceGrid::from_parametrization(
        Ambient::H4 { radius: r },
        Topology::TorusPeriodic,
        nu,
        nv,
        |u, v| {
            [
                r * std::f64::consts::SQRT_2,
                q * u.cos(),
                q * u.sin(),
                q * v.cos(),
                q * v.sin(),
            ]
        },
    )
}

/// Ellipsoid with the given semi-axes inside a coordinate 3-plane of R^4.
pub fn ellipsoid_r4(semi_axes: [f64; 3], nu: usize, nv: usize) -> Result<SurfaceGrid> {
    for (i, &ax) in semi_axes.iter().enumerate() {
        positive(&format!("semi_axes[{i}]"), ax)?;
    }
    let [ax, ay, az] = semi_axes;
    SurfaceGrid::from_parametrization(Ambient::R4, Topology::LatLongSphere, nu, nv, |u, v| {
        [
            ax * u.sin() * v.cos(),
            ay * u.sin() * v.sin(),
            az * u.cos(),
            0.0,
            0.0,
        ]
    })
}

/// Fixed low-order perturbation profile: a zonal and a sectoral second
/// harmonic, Y(u, v) = 0.6 (3 cos^2 u - 1)/2 + 0.4 sin^2 u cos(2v).
pub fn perturbation_profile(u: f64, v: f64) -> f64 {
    let cu = u.cos();
    0.6 * (3.0 * cu * cu - 1.0) * 0.5 + 0.4 * u.sin().powi(2) * (2.0 * v).cos()
}

/// Perturbed geodesic sphere: radius profile r0 (1 + eps Y(u, v)) in the flat
/// model, geodesic radius profile rho0 (1 + eps Y) in the curved models.
/// Defaults: eps = 0.05; base radius 1.0 (flat), 0.8 (spherical),
/// 0.7 (hyperbolic).
pub fn perturbed_sphere(
    model: Ambient,
    params: &PresetParams,
    nu: usize,
    nv: usize,
) -> Result<SurfaceGrid> {
    let eps = params.eps.unwrap_or(0.05);
    if !eps.is_finite() || eps.abs() >= 0.5 {
        return Err(invalid(format!("perturbation amplitude eps = {eps} must satisfy |eps| < 0.5")));
    }
    match model {
        Ambient::R4 => {
            let r0 = positive("radius", params.radius.unwrap_or(1.0))?;
            SurfaceGrid::from_parametrization(model, Topology::LatLongSphere, nu, nv, |u, v| {
                let r = r0 * (1.0 + eps * perturbation_profile(u, v));
                [r * u.sin() * v.cos(), r * u.sin() * v.sin(), r * u.cos(), 0.0, 0.0]
            })
        }
        Ambient::S4 { radius } => {
            let big_r = positive("model radius", radius)?;
            let rho0 = positive("rho", params.rho.unwrap_or(0.8))?;
            if rho0 * (1.0 + eps.abs()) >= std::f64::consts::FRAC_PI_2 * big_r {
                return Err(invalid(format!(
                    "perturbed geodesic radius rho = {rho0} (amplitude {eps}) crosses the equator"
                )));
            }
            SurfaceGrid::from_parametrization(model, Topology::LatLongSphere, nu, nv, |u, v| {
                let rho = rho0 * (1.0 + eps * perturbation_profile(u, v));
                let (s, c) = (rho / big_r).sin_cos();
                [
                    big_r * s * u.sin() * v.cos(),
                    big_r * s * u.sin() * v.sin(),
                    big_r * s * u.cos(),
                    0.0,
                    big_r * c,
                ]
            })
        }
        Ambient::H4 { radius } => {
            let big_r = positive("model radius", radius)?;
            let rho0 = positive("rho", params.rho.unwrap_or(0.7))?;
            SurfaceGrid::from_parametrization(model, Topology::LatLongSphere, nu, nv, |u, v| {
                let rho = rho0 * (1.0 + eps * perturbation_profile(u, v));
                let (s, c) = ((rho / big_r).sinh(), (rho / big_r).cosh());
                [
                    big_r * c,
                    big_r * s * u.sin() * v.cos(),
                    big_r * s * u.sin() * v.sin(),
                    big_r * s * u.cos(),
                    0.0,
                ]
            })
        }
    }
}

/// Sphere with an out-of-3-plane graph component delta r sin^2(u) cos(2v):
/// the simplest grid surface whose normal bundle is genuinely curved
/// (nonzero signed normal curvature), used to exercise the normal-gradient
/// machinery. Not part of the named catalog.
pub fn twisted_sphere_r4(radius: f64, delta: f64, nu: usize, nv: usize) -> Result<SurfaceGrid> {
    let r = positive("radius", radius)?;
    if !delta.is_finite() || delta.abs() >= 0.5 {
        return Err(invalid(format!("twist amplitude delta = {delta} must satisfy |delta| < 0.5")));
    }
    SurfaceGrid::from_parametrization(Ambient::R4, Topology::LatLongSphere, nu, nv, |u, v| {
        [
            r * u.sin() * v.cos(),
            r * u.sin() * v.sin(),
            r * u.cos(),
            delta * r * u.sin().powi(2) * (2.0 * v).cos(),
            0.0,
        ]
    })
}
