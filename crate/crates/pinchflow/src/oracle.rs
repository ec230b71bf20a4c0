//! Closed-form evolution of concentric geodesic spheres under the mean
//! curvature flow, used as ground truth for the discrete solver.
//!
//! A geodesic 2-sphere stays a geodesic sphere; its radius obeys
//! d(rho)/dt = -|H| with |H| = 2/rho (flat), 2 cot(rho/R)/R (spherical,
//! radius understood per unit model radius), 2 coth(rho/R)/R (hyperbolic).
//! Integrating gives the closed forms below.

use crate::error::DomainError;
use serde::Serialize;

/// Exact radius evolution of a shrinking geodesic sphere.
#[derive(Debug, Clone, Copy, Serialize)]
pub enum SphereOde {
    /// Round sphere in flat 4-space: r(t)^2 = r0^2 - 4t.
    R4 { r0: f64 },
    /// Geodesic sphere in S^4(R): cos(rho/R) = cos(rho0/R) e^{2t/R^2}.
    S4 { radius: f64, rho0: f64 },
    /// Geodesic sphere in H^4(R): cosh(rho/R) = cosh(rho0/R) e^{-2t/R^2}.
    H4 { radius: f64, rho0: f64 },
}

impl SphereOde {
    pub fn validate(&self) -> Result<(), DomainError> {
        let bad = |msg: String| Err(DomainError::Invalid(msg));
        match *self {
            SphereOde::R4 { r0 } => {
                if !(r0 > 0.0) || !r0.is_finite() {
                    return bad(format!("initial radius r0 = {r0} must be positive"));
                }
            }
            SphereOde::S4 { radius, rho0 } => {
                if !(radius > 0.0) || !radius.is_finite() {
                    return bad(format!("model radius R = {radius} must be positive"));
                }
                if !(rho0 > 0.0) || rho0 >= std::f64::consts::FRAC_PI_2 * radius {
                    return bad(format!(
                        "initial geodesic radius rho0 = {rho0} must lie in (0, pi*R/2)"
                    ));
                }
            }
            SphereOde::H4 { radius, rho0 } => {
                if !(radius > 0.0) || !radius.is_finite() {
                    return bad(format!("model radius R = {radius} must be positive"));
                }
                if !(rho0 > 0.0) || !rho0.is_finite() {
                    return bad(format!("initial geodesic radius rho0 = {rho0} must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Exact extinction time.
    pub fn extinction(&self) -> f64 {
        match *self {
            SphereOde::R4 { r0 } => r0 * r0 / 4.0,
            SphereOde::S4 { radius, rho0 } => {
                0.5 * radius * radius * (1.0 / (rho0 / radius).cos()).ln()
            }
            SphereOde::H4 { radius, rho0 } => {
                0.5 * radius * radius * (rho0 / radius).cosh().ln()
            }
        }
    }

    /// Radius at time `t`; `None` at or past extinction (and for t < 0).
    pub fn radius_at(&self, t: f64) -> Option<f64> {
        if t < 0.0 || t >= self.extinction() {
            return None;
        }
        if t == 0.0 {
            // Return the initial radius exactly rather than through the
            // round trip of the closed form (acos of a cos loses an ulp).
            return Some(match *self {
                SphereOde::R4 { r0 } => r0,
                SphereOde::S4 { rho0, .. } | SphereOde::H4 { rho0, .. } => rho0,
            });
        }
        match *self {
            SphereOde::R4 { r0 } => Some((r0 * r0 - 4.0 * t).sqrt()),
            SphereOde::S4 { radius, rho0 } => {
                let c = (rho0 / radius).cos() * (2.0 * t / (radius * radius)).exp();
                if c >= 1.0 {
                    None
                } else {
                    Some(radius * c.acos())
                }
            }
            SphereOde::H4 { radius, rho0 } => {
                let c = (rho0 / radius).cosh() * (-2.0 * t / (radius * radius)).exp();
                if c <= 1.0 {
                    None
                } else {
                    Some(radius * c.acosh())
                }
            }
        }
    }

    /// Squared mean curvature |H|^2 at time `t`, from the radius.
    pub fn hsq_at(&self, t: f64) -> Option<f64> {
        let rho = self.radius_at(t)?;
        let h = match *self {
            SphereOde::R4 { .. } => 2.0 / rho,
            SphereOde::S4 { radius, .. } => 2.0 / ((rho / radius).tan() * radius),
            SphereOde::H4 { radius, .. } => 2.0 / ((rho / radius).tanh() * radius),
        };
        Some(h * h)
    }

    /// Uniform time samples (t_i, rho(t_i)) on [0, extinction), i < n.
    pub fn sample(&self, n: usize) -> Result<Vec<(f64, f64)>, DomainError> {
        self.validate()?;
        if n < 2 {
            return Err(DomainError::Invalid(format!("need at least 2 samples (got {n})")));
        }
        let ext = self.extinction();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let t = ext * i as f64 / n as f64;
            let rho = self
                .radius_at(t)
                .ok_or_else(|| DomainError::Invalid(format!("sample time {t} past extinction")))?;
            out.push((t, rho));
        }
        Ok(out)
    }
}
