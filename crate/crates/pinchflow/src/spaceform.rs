//! The three ambient model spaces: Euclidean 4-space, the round 4-sphere of
//! radius R embedded in R^5, and the hyperbolic 4-space of curvature -1/R^2
//! realized as the upper hyperboloid sheet in Minkowski R^{1,4}.
//!
//! Everything downstream works extrinsically: points are ambient vectors, the
//! model supplies the right inner product, tangent projection, retraction back
//! onto the model after an explicit step, and geodesic distance. The constant
//! sectional curvature enters the curvature formulas only through `kbar`.

use crate::error::GeometryError;
use crate::linalg::{self, V5};

/// Relative membership tolerance: a point belongs to the model if its defining
/// quadric is satisfied to `MEMBERSHIP_RTOL * R` in length units.
pub const MEMBERSHIP_RTOL: f64 = 1e-9;

/// Ambient space form of dimension 4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ambient {
    /// Flat R^4 (coordinates 0..4, slot 4 unused).
    R4,
    /// Round sphere of radius `radius` in R^5; curvature +1/R^2.
    S4 { radius: f64 },
    /// Upper hyperboloid sheet { <p,p> = -R^2, p0 > 0 } in Minkowski R^{1,4};
    /// curvature -1/R^2.
    H4 { radius: f64 },
}

impl Ambient {
    /// Number of ambient coordinates actually in use.
    pub fn dim(&self) -> usize {
        match self {
            Ambient::R4 => 4,
            Ambient::S4 { .. } | Ambient::H4 { .. } => 5,
        }
    }

    /// Constant sectional curvature of the model.
    pub fn kbar(&self) -> f64 {
        match self {
            Ambient::R4 => 0.0,
            Ambient::S4 { radius } => 1.0 / (radius * radius),
            Ambient::H4 { radius } => -1.0 / (radius * radius),
        }
    }

    /// Curvature radius; 1.0 for the flat model so tolerances stay scaled.
    pub fn radius(&self) -> f64 {
        match self {
            Ambient::R4 => 1.0,
            Ambient::S4 { radius } | Ambient::H4 { radius } => *radius,
        }
    }

    /// Ambient inner product: Euclidean except for the hyperboloid, which uses
    /// the Minkowski form of signature (-,+,+,+,+).
    #[inline]
    pub fn inner(&self, a: V5, b: V5) -> f64 {
        match self {
            Ambient::H4 { .. } => linalg::dot_minkowski(a, b),
            _ => linalg::dot(a, b),
        }
    }

    /// Signed defect of the model quadric at `p`, in length units (zero on the
    /// model). Used for membership checks and diagnostics.
    pub fn membership_defect(&self, p: V5) -> f64 {
        match self {
            Ambient::R4 => 0.0,
            Ambient::S4 { radius } => linalg::dot(p, p).sqrt() - radius,
            Ambient::H4 { radius } => {
                let q = -linalg::dot_minkowski(p, p);
                if q <= 0.0 || p[0] <= 0.0 {
                    f64::INFINITY
                } else {
                    q.sqrt() - radius
                }
            }
        }
    }

    /// Membership test at the documented tolerance `MEMBERSHIP_RTOL * R`.
    pub fn on_model(&self, p: V5) -> bool {
        self.membership_defect(p).abs() <= MEMBERSHIP_RTOL * self.radius()
    }

    /// Retract an ambient point back onto the model (identity for R^4,
    /// radial/Minkowski normalization otherwise). Fails if the point cannot be
    /// normalized (zero vector, or off the hyperboloid's timelike cone).
    pub fn retract(&self, p: V5) -> Result<V5, GeometryError> {
        match self {
            Ambient::R4 => Ok(p),
            Ambient::S4 { radius } => {
                let n = linalg::dot(p, p).sqrt();
                if !(n > 0.0) || !n.is_finite() {
                    return Err(GeometryError::NonFinite { what: "retraction", u: 0, v: 0 });
                }
                Ok(linalg::scale(p, radius / n))
            }
            Ambient::H4 { radius } => {
                let q = -linalg::dot_minkowski(p, p);
                if !(q > 0.0) || !q.is_finite() || p[0] <= 0.0 {
                    return Err(GeometryError::NonFinite { what: "retraction", u: 0, v: 0 });
                }
                Ok(linalg::scale(p, radius / q.sqrt()))
            }
        }
    }

    /// Orthogonal projection of an ambient vector `w` onto the tangent space
    /// of the model at `p` (identity for R^4). Self-adjoint and idempotent
    /// with respect to `inner`.
    #[inline]
    pub fn tangent_project(&self, p: V5, w: V5) -> V5 {
        match self {
            Ambient::R4 => w,
            Ambient::S4 { radius } => {
                let c = linalg::dot(w, p) / (radius * radius);
                linalg::axpy(w, -c, p)
            }
            Ambient::H4 { radius } => {
                // <p,p> = -R^2, so the projection is w + <w,p> p / R^2.
                let c = linalg::dot_minkowski(w, p) / (radius * radius);
                linalg::axpy(w, c, p)
            }
        }
    }

    /// Geodesic distance between two points of the model. Arguments are
    /// clamped into the domain of arccos/arccosh so that round-off near
    /// coincident or antipodal points cannot produce NaN.
    pub fn geodesic_distance(&self, p: V5, q: V5) -> f64 {
        match self {
            Ambient::R4 => {
                let d = linalg::sub(p, q);
                linalg::dot(d, d).sqrt()
            }
            Ambient::S4 { radius } => {
                let c = (linalg::dot(p, q) / (radius * radius)).clamp(-1.0, 1.0);
                radius * c.acos()
            }
            Ambient::H4 { radius } => {
                let c = (-linalg::dot_minkowski(p, q) / (radius * radius)).max(1.0);
                radius * c.acosh()
            }
        }
    }

    /// Squared chord length between two nearby model points: the ambient
    /// norm of the difference vector (Minkowski norm on the hyperboloid,
    /// where differences of nearby points are spacelike). Agrees with the
    /// squared geodesic distance to fourth order and is much cheaper, which
    /// is what the grid-spacing scan in the time-step controller needs.
    #[inline]
    pub fn chord_sq(&self, p: V5, q: V5) -> f64 {
        let d = linalg::sub(p, q);
        match self {
            Ambient::H4 { .. } => linalg::dot_minkowski(d, d),
            _ => linalg::dot(d, d),
        }
    }

    /// Characteristic inverse length of the model (1/R for the curved models,
    /// 1 for flat space); used to scale small tolerances such as `tol_H`.
    pub fn inverse_length_scale(&self) -> f64 {
        match self {
            Ambient::R4 => 1.0,
            Ambient::S4 { radius } | Ambient::H4 { radius } => 1.0 / radius,
        }
    }

    /// Complete a tangent 2-frame `(e1, e2)` at `p` to an orthonormal basis of
    /// the normal space of the surface inside the model's tangent space.
    ///
    /// Candidates are the fixed ambient axes, projected to the model tangent
    /// space and Gram-Schmidted against the surface frame and previously
    /// accepted normals, taken in deterministic axis order so that the signed
    /// normal curvature is reproducible run to run. Axes whose residual is too
    /// short are skipped; if the first pass cannot fill the frame, a second
    /// pass takes whatever residual is largest.
    pub fn normal_frame(
        &self,
        p: V5,
        e1: V5,
        e2: V5,
        site: (usize, usize),
    ) -> Result<(V5, V5), GeometryError> {
        const FIRST_PASS_MIN: f64 = 1e-3;
        const LAST_RESORT_MIN: f64 = 1e-10;
        let m = self.dim();
        let mut normals: [V5; 2] = [linalg::V5_ZERO; 2];
        let mut count = 0usize;

        let residual = |axis: usize, normals: &[V5; 2], count: usize| -> V5 {
            let mut w = linalg::V5_ZERO;
            w[axis] = 1.0;
            let mut w = self.tangent_project(p, w);
            w = linalg::axpy(w, -self.inner(w, e1), e1);
            w = linalg::axpy(w, -self.inner(w, e2), e2);
            for n in normals.iter().take(count) {
                w = linalg::axpy(w, -self.inner(w, *n), *n);
            }
            w
        };

        for axis in 0..m {
            if count == 2 {
                break;
            }
            let w = residual(axis, &normals, count);
            let n2 = self.inner(w, w);
            if n2 > FIRST_PASS_MIN * FIRST_PASS_MIN {
                normals[count] = linalg::scale(w, 1.0 / n2.sqrt());
                count += 1;
            }
        }
        while count < 2 {
            // Degenerate configuration: pick the best remaining axis residual.
            let mut best: Option<(f64, V5)> = None;
            for axis in 0..m {
                let w = residual(axis, &normals, count);
                let n2 = self.inner(w, w);
                if n2 > LAST_RESORT_MIN && best.as_ref().map_or(true, |(b, _)| n2 > *b) {
                    best = Some((n2, w));
                }
            }
            match best {
                Some((n2, w)) => {
                    normals[count] = linalg::scale(w, 1.0 / n2.sqrt());
                    count += 1;
                }
                None => {
                    return Err(GeometryError::FrameBreakdown { u: site.0, v: site.1 });
                }
            }
        }
        Ok((normals[0], normals[1]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PI: f64 = std::f64::consts::PI;

    #[test]
    fn kbar_matches_models() {
        assert_eq!(Ambient::R4.kbar(), 0.0);
        assert_eq!(Ambient::S4 { radius: 1.0 }.kbar(), 1.0);
        assert_eq!(Ambient::S4 { radius: 2.0 }.kbar(), 0.25);
        assert_eq!(Ambient::H4 { radius: 1.0 }.kbar(), -1.0);
    }

    #[test]
    fn sphere_distance_quarter_circle() {
        let s = Ambient::S4 { radius: 1.0 };
        let p = [1.0, 0.0, 0.0, 0.0, 0.0];
        let q = [0.0, 1.0, 0.0, 0.0, 0.0];
        assert!((s.geodesic_distance(p, q) - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn sphere_distance_clamps_near_antipodal() {
        let s = Ambient::S4 { radius: 1.0 };
        let p = [1.0, 0.0, 0.0, 0.0, 0.0];
        let q = [-1.0 - 1e-16, 1e-17, 0.0, 0.0, 0.0];
        let d = s.geodesic_distance(p, q);
        assert!(d.is_finite());
        assert!((d - PI).abs() < 1e-7);
    }

    #[test]
    fn hyperbolic_distance_unit_boost() {
        let h = Ambient::H4 { radius: 1.0 };
        let p = [1.0, 0.0, 0.0, 0.0, 0.0];
        let q = [1.0f64.cosh(), 1.0f64.sinh(), 0.0, 0.0, 0.0];
        assert!((h.geodesic_distance(p, q) - 1.0).abs() < 1e-14);
        assert_eq!(h.geodesic_distance(p, p), 0.0);
    }

    #[test]
    fn retraction_is_idempotent_and_lands_on_model() {
        let s = Ambient::S4 { radius: 2.0 };
        let p = s.retract([0.3, -1.1, 0.4, 2.0, 0.7]).unwrap();
        assert!(s.on_model(p));
        let p2 = s.retract(p).unwrap();
        for i in 0..5 {
            assert!((p[i] - p2[i]).abs() < 1e-15);
        }

        let h = Ambient::H4 { radius: 1.0 };
        let q = h.retract([2.0, 0.5, -0.3, 0.8, 0.1]).unwrap();
        assert!(h.on_model(q));
        assert!((linalg::dot_minkowski(q, q) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn retraction_rejects_spacelike_hyperboloid_input() {
        let h = Ambient::H4 { radius: 1.0 };
        assert!(h.retract([0.1, 5.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn tangent_projection_is_idempotent_and_kills_position() {
        for model in [
            Ambient::S4 { radius: 1.3 },
            Ambient::H4 { radius: 0.8 },
        ] {
            let p = model
                .retract(match model {
                    Ambient::H4 { .. } => [1.9, 0.4, -0.2, 0.6, 0.3],
                    _ => [0.9, 0.4, -0.2, 0.6, 0.3],
                })
                .unwrap();
            let w = [0.2, -0.7, 1.1, 0.05, -0.4];
            let t = model.tangent_project(p, w);
            assert!(model.inner(t, p).abs() < 1e-12);
            let tt = model.tangent_project(p, t);
            for i in 0..5 {
                assert!((t[i] - tt[i]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn tangent_projection_is_self_adjoint() {
        let model = Ambient::H4 { radius: 1.0 };
        let p = model.retract([1.5, 0.3, -0.9, 0.2, 0.4]).unwrap();
        let a = [0.3, 1.2, -0.5, 0.8, -0.1];
        let b = [-0.6, 0.2, 0.9, -0.3, 0.7];
        let lhs = model.inner(model.tangent_project(p, a), b);
        let rhs = model.inner(a, model.tangent_project(p, b));
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn normal_frame_is_orthonormal_and_deterministic() {
        let model = Ambient::S4 { radius: 1.0 };
        let p = model.retract([0.2, 0.4, 0.8, 0.1, 0.3]).unwrap();
        // Build some tangent 2-frame.
        let raw1 = model.tangent_project(p, [1.0, 0.0, 0.0, 0.0, 0.0]);
        let e1 = linalg::scale(raw1, 1.0 / model.inner(raw1, raw1).sqrt());
        let raw2 = model.tangent_project(p, [0.0, 1.0, 0.0, 0.0, 0.0]);
        let raw2 = linalg::axpy(raw2, -model.inner(raw2, e1), e1);
        let e2 = linalg::scale(raw2, 1.0 / model.inner(raw2, raw2).sqrt());

        let (n1, n2) = model.normal_frame(p, e1, e2, (0, 0)).unwrap();
        let (m1, m2) = model.normal_frame(p, e1, e2, (0, 0)).unwrap();
        for i in 0..5 {
            assert_eq!(n1[i], m1[i]);
            assert_eq!(n2[i], m2[i]);
        }
        assert!((model.inner(n1, n1) - 1.0).abs() < 1e-13);
        assert!((model.inner(n2, n2) - 1.0).abs() < 1e-13);
        assert!(model.inner(n1, n2).abs() < 1e-13);
        for e in [e1, e2] {
            assert!(model.inner(n1, e).abs() < 1e-13);
            assert!(model.inner(n2, e).abs() < 1e-13);
        }
        assert!(model.inner(n1, p).abs() < 1e-12);
        assert!(model.inner(n2, p).abs() < 1e-12);
    }

    #[test]
    fn membership_tolerance_scales_with_radius() {
        let s = Ambient::S4 { radius: 10.0 };
        let mut p = [10.0, 0.0, 0.0, 0.0, 0.0];
        assert!(s.on_model(p));
        p[0] = 10.0 + 5e-9 * 10.0;
        assert!(!s.on_model(p));
        p[0] = 10.0 + 5e-10 * 10.0;
        assert!(s.on_model(p));
    }

    #[test]
    fn chord_tracks_geodesic_distance_for_nearby_points() {
        let small = 1e-3;
        for model in [
            Ambient::R4,
            Ambient::S4 { radius: 1.0 },
            Ambient::H4 { radius: 1.0 },
        ] {
            // [1,0,0,0,0] lies on all three models (vertex of the
            // hyperboloid, pole of the unit sphere, ordinary flat point).
            let p = [1.0, 0.0, 0.0, 0.0, 0.0];
            // Walk a short tangent arc and retract.
            let step = [0.0, small, 0.0, 0.0, 0.0];
            let q = model.retract(linalg::add(p, step)).unwrap();
            let chord = model.chord_sq(p, q);
            assert!(chord > 0.0);
            let geo = model.geodesic_distance(p, q);
            // A chord of length d differs from the arc by d^3/24 at unit
            // curvature, so allow that cubic gap (plus slack) and nothing
            // coarser.
            let cubic = geo.powi(3) / 24.0;
            assert!(
                (chord.sqrt() - geo).abs() < 2.0 * cubic + 1e-15,
                "{model:?}: chord {} vs geodesic {geo}",
                chord.sqrt()
            );
        }
    }
}
