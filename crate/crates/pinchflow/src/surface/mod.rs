//! Discrete differential geometry on parametric surface grids.
//!
//! A surface is a structured grid of on-model ambient points with either
//! doubly periodic (torus) or latitude-longitude (sphere) chart topology.
//! All stencils are second-order central differences; on lat-long grids the
//! pole rows hold the exact pole point in every column and serve as regular
//! stencil data for their neighbor rows (the chart map is smooth up to the
//! pole along each meridian), while the two rows adjacent to each pole are
//! excluded from global diagnostics and their error is quantified by the
//! grid-convergence tests instead.

pub mod gradients;

use crate::error::{Error, GeometryError, Result};
use crate::linalg::{self, Sym2, V5};
use crate::pinching::{gauss_curvature, PinchingParams, PointShape};
use crate::reaction::adapted_decomposition;
use crate::spaceform::Ambient;
use serde::{Deserialize, Serialize};

/// Chart topology of the parameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Topology {
    /// Both parameters periodic: u, v in [0, 2pi).
    TorusPeriodic,
    /// u = polar angle in [0, pi] with pole rows at both extremes; v =
    /// longitude in [0, 2pi), periodic.
    LatLongSphere,
}

/// A time-stamped parametric grid of on-model ambient points.
#[derive(Debug, Clone)]
pub struct SurfaceGrid {
    pub model: Ambient,
    pub topology: Topology,
    pub nu: usize,
    pub nv: usize,
    pub du: f64,
    pub dv: f64,
    /// Row-major points, index = iu * nv + iv.
    pub points: Vec<V5>,
    /// Flow time stamp.
    pub t: f64,
}

/// Central-difference package of first and second parameter derivatives.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    pub fu: V5,
    pub fv: V5,
    pub fuu: V5,
    pub fuv: V5,
    pub fvv: V5,
}

impl SurfaceGrid {
    /// Build a grid by sampling a parametrization. For `LatLongSphere` the
    /// map must send u = 0 and u = pi to single points (poles); the pole rows
    /// are filled with the v = 0 value to keep them exactly constant.
    pub fn from_parametrization(
        model: Ambient,
        topology: Topology,
        nu: usize,
        nv: usize,
        f: impl Fn(f64, f64) -> V5,
    ) -> Result<SurfaceGrid> {
        if nu < 8 || nv < 8 {
            return Err(Error::from(crate::error::ConfigError::Invalid(format!(
                "grid dimensions must be at least 8x8 (got {nu}x{nv})"
            ))));
        }
        let (du, dv) = match topology {
            Topology::TorusPeriodic => (2.0 * std::f64::consts::PI / nu as f64, 2.0 * std::f64::consts::PI / nv as f64),
            Topology::LatLongSphere => (std::f64::consts::PI / (nu - 1) as f64, 2.0 * std::f64::consts::PI / nv as f64),
        };
        let mut points = Vec::with_capacity(nu * nv);
        for iu in 0..nu {
            let u = iu as f64 * du;
            let pole = matches!(topology, Topology::LatLongSphere) && (iu == 0 || iu == nu - 1);
            let row_value = f(u, 0.0);
            for iv in 0..nv {
                let p = if pole { row_value } else { f(u, iv as f64 * dv) };
                points.push(p);
            }
        }
        let grid = SurfaceGrid { model, topology, nu, nv, du, dv, points, t: 0.0 };
        grid.check_membership()?;
        Ok(grid)
    }

    /// Verify every point satisfies the model membership invariant.
    pub fn check_membership(&self) -> Result<()> {
        for iu in 0..self.nu {
            for iv in 0..self.nv {
                let p = self.point(iu, iv);
                if !p.iter().all(|x| x.is_finite()) {
                    return Err(GeometryError::NonFinite { what: "grid point", u: iu, v: iv }.into());
                }
                if !self.model.on_model(p) {
                    return Err(GeometryError::OffModel {
                        u: iu,
                        v: iv,
                        dist: self.model.membership_defect(p),
                        tol: 1e-9 * self.model.radius(),
                    }
                    .into());
                }
            }
        }
        Ok(())
    }

    /// Largest membership defect over the grid, in length units.
    pub fn max_membership_defect(&self) -> f64 {
        self.points
            .iter()
            .map(|&p| self.model.membership_defect(p))
            .fold(0.0, f64::max)
    }

    #[inline]
    pub fn idx(&self, iu: usize, iv: usize) -> usize {
        iu * self.nv + iv
    }

    #[inline]
    pub fn point(&self, iu: usize, iv: usize) -> V5 {
        self.points[self.idx(iu, iv)]
    }

    /// True when the row holds a single repeated pole point.
    #[inline]
    pub fn is_pole_row(&self, iu: usize) -> bool {
        matches!(self.topology, Topology::LatLongSphere) && (iu == 0 || iu == self.nu - 1)
    }

    /// Rows whose sites enter global min/max diagnostics: every row for a
    /// torus; lat-long grids exclude the pole rows and the two rows adjacent
    /// to each pole.
    pub fn diagnostic_rows(&self) -> std::ops::Range<usize> {
        match self.topology {
            Topology::TorusPeriodic => 0..self.nu,
            Topology::LatLongSphere => 3..self.nu - 3,
        }
    }

    /// Rows inside a fixed parameter band away from the poles: u in
    /// [pi/8, 7pi/8] for lat-long grids, every row for a torus.
    ///
    /// Chart-derivative stencils on a lat-long grid carry errors on the
    /// order of du^2 / sin^2(u), so at a fixed row index next to the pole
    /// the error does not shrink under refinement (u itself scales with
    /// du there). Convergence of derivative-based residuals is therefore
    /// measured over this fixed band, where the error is uniformly second
    /// order; algebraic site quantities stay on `diagnostic_rows`.
    pub fn interior_band_rows(&self) -> std::ops::Range<usize> {
        match self.topology {
            Topology::TorusPeriodic => 0..self.nu,
            Topology::LatLongSphere => {
                let span = (self.nu - 1) as f64; // u = iu * pi / (nu - 1)
                let lo = (span / 8.0).ceil() as usize;
                let hi = (span * 7.0 / 8.0).floor() as usize + 1;
                lo.max(1)..hi.min(self.nu - 1)
            }
        }
    }

    /// Rows with valid central stencils (all rows for a torus; all non-pole
    /// rows for lat-long, since the pole rows supply valid stencil data).
    pub fn stencil_rows(&self) -> std::ops::Range<usize> {
        match self.topology {
            Topology::TorusPeriodic => 0..self.nu,
            Topology::LatLongSphere => 1..self.nu - 1,
        }
    }

    #[inline]
    fn wrap_v(&self, iv: isize) -> usize {
        iv.rem_euclid(self.nv as isize) as usize
    }

    #[inline]
    fn u_index(&self, iu: isize) -> usize {
        match self.topology {
            Topology::TorusPeriodic => iu.rem_euclid(self.nu as isize) as usize,
            Topology::LatLongSphere => iu as usize, // caller keeps it in range
        }
    }

    /// Second-order central derivative stencil. `None` on pole rows.
    pub fn stencil(&self, iu: usize, iv: usize) -> Option<Stencil> {
        if self.is_pole_row(iu) {
            return None;
        }
        let i = iu as isize;
        let j = iv as isize;
        let up = self.point(self.u_index(i + 1), iv);
        let um = self.point(self.u_index(i - 1), iv);
        let vp = self.point(iu, self.wrap_v(j + 1));
        let vm = self.point(iu, self.wrap_v(j - 1));
        let upvp = self.point(self.u_index(i + 1), self.wrap_v(j + 1));
        let upvm = self.point(self.u_index(i + 1), self.wrap_v(j - 1));
        let umvp = self.point(self.u_index(i - 1), self.wrap_v(j + 1));
        let umvm = self.point(self.u_index(i - 1), self.wrap_v(j - 1));
        let c = self.point(iu, iv);

        let inv2du = 1.0 / (2.0 * self.du);
        let inv2dv = 1.0 / (2.0 * self.dv);
        let invdu2 = 1.0 / (self.du * self.du);
        let invdv2 = 1.0 / (self.dv * self.dv);
        let invdudv = 1.0 / (4.0 * self.du * self.dv);

        let mut s = Stencil {
            fu: [0.0; 5],
            fv: [0.0; 5],
            fuu: [0.0; 5],
            fuv: [0.0; 5],
            fvv: [0.0; 5],
        };
        for d in 0..5 {
            s.fu[d] = (up[d] - um[d]) * inv2du;
            s.fv[d] = (vp[d] - vm[d]) * inv2dv;
            s.fuu[d] = (up[d] - 2.0 * c[d] + um[d]) * invdu2;
            s.fvv[d] = (vp[d] - 2.0 * c[d] + vm[d]) * invdv2;
            s.fuv[d] = (upvp[d] - upvm[d] - umvp[d] + umvm[d]) * invdudv;
        }
        Some(s)
    }
}

/// Per-site geometric package: metric, frames, second fundamental form in the
/// orthonormal tangent frame, mean curvature, adapted scalars, curvatures.
#[derive(Debug, Clone, Copy)]
pub struct ShapeData {
    /// Induced metric in the coordinate basis (F_u, F_v).
    pub g: Sym2,
    pub det_g: f64,
    /// Orthonormal tangent frame.
    pub e1: V5,
    pub e2: V5,
    /// Orthonormal normal frame (within the model tangent space).
    pub nu3: V5,
    pub nu4: V5,
    /// Second fundamental form components in the (e1, e2) frame.
    pub h3: Sym2,
    pub h4: Sym2,
    /// Mean curvature vector (ambient coordinates) and its norm.
    pub h_vec: V5,
    pub h_norm: f64,
    /// Adapted-frame scalars; meaningful per the `adapted` flag.
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub adapted: bool,
    /// Signed normal curvature in the working-frame orientation.
    pub kperp: f64,
    pub asq: f64,
    pub aring_sq: f64,
    pub aring1_sq: f64,
    pub aring2_sq: f64,
    /// Extrinsic Gauss curvature Kbar + |H|^2/4 - |Å|^2/2.
    pub gauss_k: f64,
    /// |A|^2 - |H|^2/2 - 2|K_perp| (nonnegative up to rounding).
    pub ddvv: f64,
}

impl ShapeData {
    pub fn point_shape(&self) -> PointShape {
        PointShape {
            hsq: self.h_norm * self.h_norm,
            aring_sq: self.aring_sq,
            kperp: self.kperp,
        }
    }
}

/// Compute the full geometric package at one site. Errors carry the site.
pub fn fundamental_forms(surface: &SurfaceGrid, iu: usize, iv: usize) -> Result<ShapeData> {
    let st = surface
        .stencil(iu, iv)
        .ok_or(GeometryError::DegenerateMetric { u: iu, v: iv, det: 0.0 })?;
    shape_from_stencil(surface, &st, surface.point(iu, iv), iu, iv)
}

fn shape_from_stencil(
    surface: &SurfaceGrid,
    st: &Stencil,
    p: V5,
    iu: usize,
    iv: usize,
) -> Result<ShapeData> {
    let model = &surface.model;
    let g11 = model.inner(st.fu, st.fu);
    let g12 = model.inner(st.fu, st.fv);
    let g22 = model.inner(st.fv, st.fv);
    let det = g11 * g22 - g12 * g12;
    if !(det > 1e-12 * g11.abs().max(1e-300) * g22.abs().max(1e-300)) || g11 <= 0.0 {
        return Err(GeometryError::DegenerateMetric { u: iu, v: iv, det }.into());
    }

    // Orthonormal tangent frame by Gram-Schmidt seeded with F_u:
    //   e1 = F_u / sqrt(g11),  e2 = (F_v - (g12/g11) F_u) / sqrt(det/g11).
    let m11 = 1.0 / g11.sqrt();
    let e1 = linalg::scale(st.fu, m11);
    let w = linalg::axpy(st.fv, -g12 / g11, st.fu);
    let lw = (det / g11).sqrt();
    let e2 = linalg::scale(w, 1.0 / lw);
    // Basis-change rows: e1 = m11 F_u; e2 = m21 F_u + m22 F_v.
    let m22 = 1.0 / lw;
    let m21 = -(g12 / g11) * m22;

    let (nu3, nu4) = model.normal_frame(p, e1, e2, (iu, iv))?;

    // h_{ij,alpha} = <F_ij, nu_alpha>: the normal directions are orthogonal
    // to the position (model) and tangent components, so the raw second
    // parameter derivatives can be paired directly.
    let hc = |n: V5| -> Sym2 {
        Sym2 {
            m11: model.inner(st.fuu, n),
            m12: model.inner(st.fuv, n),
            m22: model.inner(st.fvv, n),
        }
    };
    let h3c = hc(nu3);
    let h4c = hc(nu4);

    // Transform to the orthonormal frame: h^e = M h_c M^T with rows of M as
    // above (lower-triangular).
    let to_e = |h: Sym2| -> Sym2 {
        let a11 = m11 * (m11 * h.m11);
        let a12 = m11 * (m21 * h.m11 + m22 * h.m12);
        let a22 = m21 * (m21 * h.m11 + m22 * h.m12) + m22 * (m21 * h.m12 + m22 * h.m22);
        Sym2 { m11: a11, m12: a12, m22: a22 }
    };
    let h3 = to_e(h3c);
    let h4 = to_e(h4c);

    let tr3 = h3.trace();
    let tr4 = h4.trace();
    let h_vec = linalg::axpy(linalg::scale(nu3, tr3), tr4, nu4);
    let h_norm = (tr3 * tr3 + tr4 * tr4).sqrt();
    if !h_norm.is_finite() {
        return Err(GeometryError::NonFinite { what: "mean curvature", u: iu, v: iv }.into());
    }

    // Signed normal curvature from the shape-operator commutator (exact,
    // frame-orientation dependent only): K_perp = 2 (p3 q4 - q3 p4) with
    // p = (h11 - h22)/2, q = h12 of the trace-free parts.
    let p3 = 0.5 * (h3.m11 - h3.m22);
    let q3 = h3.m12;
    let p4 = 0.5 * (h4.m11 - h4.m22);
    let q4 = h4.m12;
    let kperp = 2.0 * (p3 * q4 - q3 * p4);

    let tol_h = 1e-8 * model.inverse_length_scale();
    let adapted = h_norm >= tol_h;
    let dec = adapted_decomposition(h3, h4, tol_h);

    let aring1_sq = 2.0 * dec.a * dec.a;
    let aring2_sq = 2.0 * (dec.b * dec.b + dec.c * dec.c);
    let aring_sq = aring1_sq + aring2_sq;
    let asq = aring_sq + 0.5 * h_norm * h_norm;
    let point_shape = PointShape { hsq: h_norm * h_norm, aring_sq, kperp };

    Ok(ShapeData {
        g: Sym2 { m11: g11, m12: g12, m22: g22 },
        det_g: det,
        e1,
        e2,
        nu3,
        nu4,
        h3,
        h4,
        h_vec,
        h_norm,
        a: dec.a,
        b: dec.b,
        c: dec.c,
        adapted,
        kperp,
        asq,
        aring_sq,
        aring1_sq,
        aring2_sq,
        gauss_k: gauss_curvature(point_shape, model.kbar()),
        ddvv: point_shape.ddvv_margin(),
    })
}

/// Per-surface shape field: `None` exactly on pole rows.
pub fn compute_shape_field(surface: &SurfaceGrid) -> Result<Vec<Option<ShapeData>>> {
    let mut field = vec![None; surface.nu * surface.nv];
    for iu in surface.stencil_rows() {
        for iv in 0..surface.nv {
            field[surface.idx(iu, iv)] = Some(fundamental_forms(surface, iu, iv)?);
        }
    }
    Ok(field)
}

/// Extrinsic Gauss curvature from shape data (space-form Gauss equation).
pub fn gauss_curvature_extrinsic(shape: &ShapeData, kbar: f64) -> f64 {
    gauss_curvature(shape.point_shape(), kbar)
}

/// Intrinsic Gauss curvature from second differences of the induced metric
/// (Brioschi formula). Requires metric data on the full 3x3 site neighborhood;
/// `None` where the stencil leaves the grid (rows next to pole rows).
pub fn gauss_curvature_intrinsic(
    surface: &SurfaceGrid,
    field: &[Option<ShapeData>],
    iu: usize,
    iv: usize,
) -> Option<f64> {
    let g_at = |i: isize, j: isize| -> Option<Sym2> {
        let (iu, iv) = offset_site(surface, i, j)?;
        field[surface.idx(iu, iv)].map(|s| s.g)
    };
    let i = iu as isize;
    let j = iv as isize;
    let c = g_at(i, j)?;
    let up = g_at(i + 1, j)?;
    let um = g_at(i - 1, j)?;
    let vp = g_at(i, j + 1)?;
    let vm = g_at(i, j - 1)?;
    let upvp = g_at(i + 1, j + 1)?;
    let upvm = g_at(i + 1, j - 1)?;
    let umvp = g_at(i - 1, j + 1)?;
    let umvm = g_at(i - 1, j - 1)?;

    let inv2du = 1.0 / (2.0 * surface.du);
    let inv2dv = 1.0 / (2.0 * surface.dv);
    let invdu2 = 1.0 / (surface.du * surface.du);
    let invdv2 = 1.0 / (surface.dv * surface.dv);
    let invdudv = 1.0 / (4.0 * surface.du * surface.dv);

    let e = c.m11;
    let f = c.m12;
    let g = c.m22;
    let eu = (up.m11 - um.m11) * inv2du;
    let ev = (vp.m11 - vm.m11) * inv2dv;
    let fu = (up.m12 - um.m12) * inv2du;
    let fv = (vp.m12 - vm.m12) * inv2dv;
    let gu = (up.m22 - um.m22) * inv2du;
    let gv = (vp.m22 - vm.m22) * inv2dv;
    let evv = (vp.m11 - 2.0 * e + vm.m11) * invdv2;
    let guu = (up.m22 - 2.0 * g + um.m22) * invdu2;
    let fuv = (upvp.m12 - upvm.m12 - umvp.m12 + umvm.m12) * invdudv;

    let det3 = |m: [[f64; 3]; 3]| -> f64 {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let m1 = [
        [-0.5 * evv + fuv - 0.5 * guu, 0.5 * eu, fu - 0.5 * ev],
        [fv - 0.5 * gu, e, f],
        [0.5 * gv, f, g],
    ];
    let m2 = [[0.0, 0.5 * ev, 0.5 * gu], [0.5 * ev, e, f], [0.5 * gu, f, g]];
    let den = e * g - f * f;
    Some((det3(m1) - det3(m2)) / (den * den))
}

pub(crate) fn offset_site(surface: &SurfaceGrid, i: isize, j: isize) -> Option<(usize, usize)> {
    let iv = j.rem_euclid(surface.nv as isize) as usize;
    let iu = match surface.topology {
        Topology::TorusPeriodic => i.rem_euclid(surface.nu as isize) as usize,
        Topology::LatLongSphere => {
            if i < 0 || i >= surface.nu as isize {
                return None;
            }
            i as usize
        }
    };
    Some((iu, iv))
}

/// DDVV residual |A|^2 - |H|^2/2 - 2|K_perp| of a shape package.
pub fn ddvv_residual(shape: &ShapeData) -> f64 {
    shape.ddvv
}

/// Total area by metric quadrature (pole rows carry zero metric weight and
/// are skipped).
pub fn area(surface: &SurfaceGrid, field: &[Option<ShapeData>]) -> f64 {
    let mut sum = 0.0;
    for iu in 0..surface.nu {
        for iv in 0..surface.nv {
            if let Some(s) = &field[surface.idx(iu, iv)] {
                sum += s.det_g.sqrt();
            }
        }
    }
    sum * surface.du * surface.dv
}

/// Extrinsic diameter: max pairwise ambient geodesic distance over a
/// deterministic subsample of grid points.
pub fn diameter(surface: &SurfaceGrid) -> f64 {
    let stride_u = (surface.nu / 24).max(1);
    let stride_v = (surface.nv / 24).max(1);
    let mut pts: Vec<V5> = Vec::new();
    for iu in (0..surface.nu).step_by(stride_u) {
        for iv in (0..surface.nv).step_by(stride_v) {
            pts.push(surface.point(iu, iv));
        }
    }
    let mut best = 0.0f64;
    for (n, &x) in pts.iter().enumerate() {
        for &y in pts.iter().skip(n + 1) {
            let d = surface.model.geodesic_distance(x, y);
            if d > best {
                best = d;
            }
        }
    }
    best
}

/// Global diagnostics over the included rows.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub t: f64,
    pub q_max: f64,
    pub q_min: f64,
    /// Max of the decay functional (monitor weighting), with the number of
    /// sites where its denominator precondition failed.
    pub f_max: f64,
    pub f_undefined: u64,
    pub h_min: f64,
    pub h_max: f64,
    /// Plain site average of |H| over the included rows (used to anchor the
    /// round-point threshold to the initial curvature scale).
    pub h_mean: f64,
    pub asq_max: f64,
    /// Max of |Å|^2/|H|^2 over sites with |H| above the adapted-frame cutoff.
    pub ratio_max: f64,
    pub ddvv_min: f64,
    pub area: f64,
    pub diameter: f64,
    /// L^p norms of the decay functional for the configured p list.
    pub lp_f: Vec<(f64, f64)>,
}

/// Assemble the global diagnostics record; `sigma` and `p_list` configure the
/// decay functional. Gradient-based identity residuals are computed
/// separately (see the `gradients` submodule).
pub fn global_diagnostics(
    surface: &SurfaceGrid,
    field: &[Option<ShapeData>],
    params: &PinchingParams,
    sigma: f64,
    p_list: &[f64],
) -> Result<Diagnostics> {
    let monitor = params.monitor();
    let tol_h = 1e-8 * surface.model.inverse_length_scale();
    let mut d = Diagnostics {
        t: surface.t,
        q_max: f64::NEG_INFINITY,
        q_min: f64::INFINITY,
        f_max: f64::NEG_INFINITY,
        f_undefined: 0,
        h_min: f64::INFINITY,
        h_max: f64::NEG_INFINITY,
        h_mean: 0.0,
        asq_max: f64::NEG_INFINITY,
        ratio_max: f64::NEG_INFINITY,
        ddvv_min: f64::INFINITY,
        area: area(surface, field),
        diameter: diameter(surface),
        lp_f: Vec::new(),
    };
    // The L^p quadrature accumulates integral(f^p dmu) over included rows.
    let mut lp_acc: Vec<f64> = vec![0.0; p_list.len()];
    let mut h_sum = 0.0;
    let mut h_count = 0u64;

    for iu in surface.diagnostic_rows() {
        for iv in 0..surface.nv {
            let Some(s) = &field[surface.idx(iu, iv)] else { continue };
            let ps = s.point_shape();
            let q = params.q_value(ps);
            d.q_max = d.q_max.max(q);
            d.q_min = d.q_min.min(q);
            d.h_min = d.h_min.min(s.h_norm);
            d.h_max = d.h_max.max(s.h_norm);
            h_sum += s.h_norm;
            h_count += 1;
            d.asq_max = d.asq_max.max(s.asq);
            d.ddvv_min = d.ddvv_min.min(s.ddvv);
            if s.h_norm >= tol_h {
                d.ratio_max = d.ratio_max.max(s.aring_sq / (s.h_norm * s.h_norm));
            }
            match monitor.f_sigma(ps, sigma, tol_h) {
                Some(f) => {
                    d.f_max = d.f_max.max(f);
                    let w = s.det_g.sqrt() * surface.du * surface.dv;
                    for (acc, &p) in lp_acc.iter_mut().zip(p_list) {
                        *acc += f.abs().powf(p) * w;
                    }
                }
                None => d.f_undefined += 1,
            }
        }
    }
    d.lp_f = p_list
        .iter()
        .zip(&lp_acc)
        .map(|(&p, &acc)| (p, acc.powf(1.0 / p)))
        .collect();
    if h_count > 0 {
        d.h_mean = h_sum / h_count as f64;
    }
    if d.q_max == f64::NEG_INFINITY {
        return Err(Error::Numerical {
            step: 0,
            message: "diagnostics found no included sites".into(),
        });
    }
    Ok(d)
}

/// L^p norm of a per-site scalar field via metric quadrature:
/// (integral of field^p dmu)^(1/p).
pub fn lp_norm(
    surface: &SurfaceGrid,
    field: &[Option<ShapeData>],
    values: &[f64],
    p: f64,
) -> Result<f64> {
    if p < 1.0 {
        return Err(crate::error::DomainError::Invalid(format!("p must be >= 1 (got {p})")).into());
    }
    let integer_p = p.fract() == 0.0;
    let mut acc = 0.0;
    for iu in 0..surface.nu {
        for iv in 0..surface.nv {
            let idx = surface.idx(iu, iv);
            let Some(s) = &field[idx] else { continue };
            let v = values[idx];
            if v < 0.0 && !integer_p {
                return Err(crate::error::DomainError::Invalid(
                    "negative field values need integer p".into(),
                )
                .into());
            }
            acc += v.abs().powf(p) * s.det_g.sqrt();
        }
    }
    Ok((acc * surface.du * surface.dv).powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn unit_sphere(nu: usize, nv: usize) -> SurfaceGrid {
        presets::round_sphere_r4(1.0, nu, nv).unwrap()
    }

    #[test]
    fn sphere_shape_matches_closed_form() {
        let g = unit_sphere(64, 32);
        let field = compute_shape_field(&g).unwrap();
        for iu in g.diagnostic_rows() {
            for iv in 0..g.nv {
                let s = field[g.idx(iu, iv)].as_ref().unwrap();
                assert!((s.h_norm - 2.0).abs() < 0.02, "|H| = {} at ({iu},{iv})", s.h_norm);
                assert!(s.aring_sq <= 1e-3, "traceless norm {} at ({iu},{iv})", s.aring_sq);
                assert!(s.kperp.abs() <= 1e-6);
                assert!((s.gauss_k - 1.0).abs() < 0.03);
                assert!(s.ddvv >= 0.0);
            }
        }
    }

    #[test]
    fn sphere_h_error_shrinks_at_second_order() {
        let mut errs = Vec::new();
        for &(nu, nv) in &[(32usize, 16usize), (64, 32), (128, 64)] {
            let g = unit_sphere(nu, nv);
            let field = compute_shape_field(&g).unwrap();
            let mut worst = 0.0f64;
            for iu in g.diagnostic_rows() {
                for iv in 0..g.nv {
                    let s = field[g.idx(iu, iv)].as_ref().unwrap();
                    worst = worst.max((s.h_norm - 2.0).abs());
                }
            }
            errs.push(worst);
        }
        let order1 = (errs[0] / errs[1]).log2();
        let order2 = (errs[1] / errs[2]).log2();
        assert!(order1 > 1.8 && order2 > 1.8, "orders {order1} {order2}");
    }

    #[test]
    fn clifford_torus_is_discretely_minimal() {
        let g = presets::clifford_torus_s4(1.0, 64, 64).unwrap();
        let field = compute_shape_field(&g).unwrap();
        for iu in 0..g.nu {
            for iv in 0..g.nv {
                let s = field[g.idx(iu, iv)].as_ref().unwrap();
                // Trigonometric stencils make the discrete H vanish exactly.
                assert!(s.h_norm < 1e-12, "|H| = {}", s.h_norm);
                assert!((s.asq - 2.0).abs() < 0.02, "|A|^2 = {}", s.asq);
                assert!(!s.adapted);
                assert!(s.kperp.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hyperbolic_torus_matches_curvature_identity() {
        let g = presets::torus_h4(1.0, 64, 64).unwrap();
        let field = compute_shape_field(&g).unwrap();
        let s = field[g.idx(7, 11)].as_ref().unwrap();
        assert!((s.h_norm * s.h_norm - 8.0).abs() < 0.2, "|H|^2 = {}", s.h_norm * s.h_norm);
        assert!((s.asq - (s.h_norm * s.h_norm - 2.0)).abs() < 0.05, "|A|^2 = {}", s.asq);
    }

    #[test]
    fn hyperbolic_torus_identity_tightens_under_refinement() {
        let mut errs = Vec::new();
        for &n in &[32usize, 64] {
            let g = presets::torus_h4(1.0, n, n).unwrap();
            let field = compute_shape_field(&g).unwrap();
            let mut worst = 0.0f64;
            for s in field.iter().flatten() {
                worst = worst.max((s.asq - (s.h_norm * s.h_norm - 2.0)).abs());
            }
            errs.push(worst);
        }
        assert!(errs[1] < errs[0] / 3.0, "errors {errs:?}");
    }

    #[test]
    fn adapted_scalars_reconstruct_shape() {
        let g = presets::ellipsoid_r4([1.0, 1.0, 1.2], 48, 24).unwrap();
        let field = compute_shape_field(&g).unwrap();
        for iu in g.diagnostic_rows() {
            for iv in 0..g.nv {
                let s = field[g.idx(iu, iv)].as_ref().unwrap();
                assert!(s.adapted);
                // |Å|^2 decomposition identity.
                assert!(
                    (s.aring_sq - (s.asq - 0.5 * s.h_norm * s.h_norm)).abs() < 1e-10
                );
                // Reassemble and re-decompose: invariants must agree.
                let shape = crate::reaction::AdaptedShape::new(s.h_norm, s.a, s.b, s.c);
                let (h3, h4) = shape.matrices();
                let re = crate::reaction::adapted_decomposition(h3, h4, 1e-8);
                assert!((re.a - s.a).abs() < 1e-10);
                assert!((re.kperp().abs() - s.kperp.abs()).abs() < 1e-9);
                assert!(s.ddvv >= -1e-12);
            }
        }
    }

    #[test]
    fn sphere_area_and_diameter() {
        let g = unit_sphere(64, 32);
        let field = compute_shape_field(&g).unwrap();
        let a = area(&g, &field);
        assert!((a - 4.0 * std::f64::consts::PI).abs() < 0.04 * std::f64::consts::PI, "area {a}");
        let d = diameter(&g);
        assert!((d - 2.0).abs() < 0.02, "diameter {d}");
    }

    #[test]
    fn geodesic_sphere_s4_diagnostics() {
        // rho = pi/4 in S^4(1): |H| = 2 cot(pi/4) = 2, umbilic, Q(0.7) = -1.6.
        let g = presets::geodesic_sphere_s4(1.0, std::f64::consts::FRAC_PI_4, 64, 32).unwrap();
        let field = compute_shape_field(&g).unwrap();
        let params = PinchingParams::new(0.7, 1.0).unwrap();
        let d = global_diagnostics(&g, &field, &params, 0.05, &[2.0]).unwrap();
        assert!((d.q_max + 1.6).abs() < 0.05, "Q_max = {}", d.q_max);
        assert!((d.h_max - 2.0).abs() < 0.02);
        assert!(d.ratio_max < 1e-3);
    }

    #[test]
    fn clifford_q_is_positive() {
        let g = presets::clifford_torus_s4(1.0, 64, 64).unwrap();
        let field = compute_shape_field(&g).unwrap();
        let params = PinchingParams::new(0.7, 1.0).unwrap();
        let d = global_diagnostics(&g, &field, &params, 0.05, &[2.0]).unwrap();
        assert!((d.q_min - 1.2).abs() < 0.05, "Q_min = {}", d.q_min);
    }

    #[test]
    fn intrinsic_and_extrinsic_curvature_agree_on_sphere() {
        let g = unit_sphere(64, 32);
        let field = compute_shape_field(&g).unwrap();
        for iu in g.interior_band_rows() {
            for iv in (0..g.nv).step_by(5) {
                let ki = gauss_curvature_intrinsic(&g, &field, iu, iv).unwrap();
                let s = field[g.idx(iu, iv)].as_ref().unwrap();
                assert!((ki - 1.0).abs() < 0.02, "K_int = {ki} at ({iu},{iv})");
                assert!((ki - s.gauss_k).abs() < 0.025);
            }
        }
    }

    #[test]
    fn flat_torus_chart_has_zero_intrinsic_curvature() {
        let g = presets::clifford_torus_s4(1.0, 32, 32).unwrap();
        let field = compute_shape_field(&g).unwrap();
        let ki = gauss_curvature_intrinsic(&g, &field, 5, 9).unwrap();
        assert!(ki.abs() < 1e-10, "K_int = {ki}");
    }

    #[test]
    fn lp_norm_reference_values() {
        let g = unit_sphere(48, 24);
        let field = compute_shape_field(&g).unwrap();
        let ones = vec![1.0; g.nu * g.nv];
        let l2 = lp_norm(&g, &field, &ones, 2.0).unwrap();
        assert!((l2 - (4.0 * std::f64::consts::PI).sqrt()).abs() < 0.02 * l2);
        let l1 = lp_norm(&g, &field, &ones, 1.0).unwrap();
        let a = area(&g, &field);
        assert!((l1 - a).abs() < 1e-12 * a);
        let zeros = vec![0.0; g.nu * g.nv];
        assert_eq!(lp_norm(&g, &field, &zeros, 2.0).unwrap(), 0.0);
        let mut neg = ones.clone();
        neg[g.idx(10, 3)] = -1.0;
        assert!(lp_norm(&g, &field, &neg, 1.5).is_err());
        assert!(lp_norm(&g, &field, &neg, 2.0).is_ok());
    }

    #[test]
    fn frame_gauge_invariance_of_reported_scalars() {
        // Rotating the normal frame must leave all reported scalars intact.
        let g = presets::ellipsoid_r4([1.0, 1.0, 1.2], 32, 16).unwrap();
        let field = compute_shape_field(&g).unwrap();
        let (iu, iv) = (9, 4);
        let s = field[g.idx(iu, iv)].as_ref().unwrap();
        let phi = 0.83_f64;
        let (cp, sp) = (phi.cos(), phi.sin());
        // Rotate (nu3, nu4) and recompute the derived scalars directly.
        let st = g.stencil(iu, iv).unwrap();
        let n3 = linalg::axpy(linalg::scale(s.nu3, cp), sp, s.nu4);
        let n4 = linalg::axpy(linalg::scale(s.nu4, cp), -sp, s.nu3);
        let hc = |n: V5| Sym2 {
            m11: g.model.inner(st.fuu, n),
            m12: g.model.inner(st.fuv, n),
            m22: g.model.inner(st.fvv, n),
        };
        let h3c = hc(n3);
        let h4c = hc(n4);
        // Norms assembled in the coordinate frame with the inverse metric.
        let gi = s.g.inverse();
        let tr = |h: Sym2| gi.m11 * h.m11 + 2.0 * gi.m12 * h.m12 + gi.m22 * h.m22;
        let hn = (tr(h3c).powi(2) + tr(h4c).powi(2)).sqrt();
        assert!((hn - s.h_norm).abs() < 1e-10);
    }
}
