//! Covariant derivatives of the second fundamental form and the discrete
//! identity residuals built from them.
//!
//! All differencing happens on ambient-vector fields: a normal-bundle-valued
//! field is differenced with flat central differences and then projected onto
//! the normal space at the central site. For the models used here the
//! ambient connection correction is proportional to the position vector and
//! dies under that projection, so the projected flat derivative IS the normal
//! connection to second order, with no frame gauge entering at all. Frames
//! appear only in the final read-out of tensor components at the central
//! site, which is gauge-covariant by construction.

use super::{offset_site, ShapeData, SurfaceGrid};
use crate::linalg::{self, V5};
use crate::tensor::SymmetricGradientTensor;

/// Per-site gradient package. The tensor holds the totally symmetrized
/// orthonormal-frame components of nabla A (exactly symmetric in the
/// continuum by the Codazzi relations; `codazzi_asym` reports the squared
/// norm of the discretely removed asymmetry).
#[derive(Debug, Clone, Copy)]
pub struct GradientData {
    pub tensor: SymmetricGradientTensor,
    pub codazzi_asym: f64,
    /// |nabla A|^2 from the unsymmetrized components.
    pub grad_a_sq: f64,
    /// |nabla H|^2 (normal connection).
    pub grad_h_sq: f64,
    /// |nabla Å|^2 = |nabla A|^2 - |nabla H|^2 / 2, clamped at zero.
    pub grad_aring_sq: f64,
    /// |nabla K_perp| from orientation-aligned differencing of the signed
    /// normal curvature field.
    pub grad_kperp: f64,
}

struct Context<'a> {
    surface: &'a SurfaceGrid,
    shapes: &'a [Option<ShapeData>],
    /// Ambient normal-projected second-derivative fields A_uu, A_uv, A_vv in
    /// the coordinate basis; zero vectors where no shape data exists.
    a_fields: [Vec<V5>; 3],
}

impl<'a> Context<'a> {
    fn new(surface: &'a SurfaceGrid, shapes: &'a [Option<ShapeData>]) -> Context<'a> {
        let n = surface.nu * surface.nv;
        let mut a_fields = [vec![linalg::V5_ZERO; n], vec![linalg::V5_ZERO; n], vec![linalg::V5_ZERO; n]];
        for iu in surface.stencil_rows() {
            for iv in 0..surface.nv {
                let idx = surface.idx(iu, iv);
                let Some(s) = &shapes[idx] else { continue };
                let Some(st) = surface.stencil(iu, iv) else { continue };
                for (slot, f2) in [st.fuu, st.fuv, st.fvv].iter().enumerate() {
                    let c3 = surface.model.inner(*f2, s.nu3);
                    let c4 = surface.model.inner(*f2, s.nu4);
                    a_fields[slot][idx] =
                        linalg::axpy(linalg::scale(s.nu3, c3), c4, s.nu4);
                }
            }
        }
        Context { surface, shapes, a_fields }
    }

    fn shape_at(&self, i: isize, j: isize) -> Option<&ShapeData> {
        let (iu, iv) = offset_site(self.surface, i, j)?;
        self.shapes[self.surface.idx(iu, iv)].as_ref()
    }

    fn a_at(&self, slot: usize, i: isize, j: isize) -> Option<V5> {
        let (iu, iv) = offset_site(self.surface, i, j)?;
        let idx = self.surface.idx(iu, iv);
        self.shapes[idx].as_ref()?;
        Some(self.a_fields[slot][idx])
    }
}

/// Project an ambient vector onto the normal space spanned by the site's
/// orthonormal normal frame.
fn project_normal(surface: &SurfaceGrid, s: &ShapeData, w: V5) -> V5 {
    let c3 = surface.model.inner(w, s.nu3);
    let c4 = surface.model.inner(w, s.nu4);
    linalg::axpy(linalg::scale(s.nu3, c3), c4, s.nu4)
}

/// Christoffel symbols Gamma[m][k][l] of the induced metric from central
/// differences of the coordinate-basis metric field.
fn christoffels(ctx: &Context, iu: usize, iv: usize) -> Option<[[[f64; 2]; 2]; 2]> {
    let i = iu as isize;
    let j = iv as isize;
    let c = ctx.shape_at(i, j)?;
    let up = ctx.shape_at(i + 1, j)?;
    let um = ctx.shape_at(i - 1, j)?;
    let vp = ctx.shape_at(i, j + 1)?;
    let vm = ctx.shape_at(i, j - 1)?;
    let inv2du = 1.0 / (2.0 * ctx.surface.du);
    let inv2dv = 1.0 / (2.0 * ctx.surface.dv);

    // dg[k][a][b]: derivative along coordinate k of metric entry (a, b).
    let entry = |s: &ShapeData, a: usize, b: usize| match (a, b) {
        (0, 0) => s.g.m11,
        (1, 1) => s.g.m22,
        _ => s.g.m12,
    };
    let mut dg = [[[0.0f64; 2]; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            dg[0][a][b] = (entry(up, a, b) - entry(um, a, b)) * inv2du;
            dg[1][a][b] = (entry(vp, a, b) - entry(vm, a, b)) * inv2dv;
        }
    }
    let gi = c.g.inverse();
    let gim = [[gi.m11, gi.m12], [gi.m12, gi.m22]];
    let mut gam = [[[0.0f64; 2]; 2]; 2];
    for m in 0..2 {
        for k in 0..2 {
            for l in 0..2 {
                let mut sum = 0.0;
                for n in 0..2 {
                    sum += gim[m][n] * 0.5 * (dg[k][n][l] + dg[l][n][k] - dg[n][k][l]);
                }
                gam[m][k][l] = sum;
            }
        }
    }
    Some(gam)
}

/// Basis-change rows M with e1 = M[0][0] F_u and e2 = M[1][0] F_u + M[1][1] F_v.
fn frame_rows(s: &ShapeData) -> [[f64; 2]; 2] {
    let g11 = s.g.m11;
    let g12 = s.g.m12;
    let m11 = 1.0 / g11.sqrt();
    let m22 = 1.0 / (s.det_g / g11).sqrt();
    let m21 = -(g12 / g11) * m22;
    [[m11, 0.0], [m21, m22]]
}

const PAIR_SLOT: [[usize; 2]; 2] = [[0, 1], [1, 2]];

struct SiteGradient {
    data: GradientData,
}

/// Covariant gradient of A, H and the signed normal curvature at one site.
/// `None` where a required neighbor has no shape data.
fn site_gradient(ctx: &Context, iu: usize, iv: usize) -> Option<SiteGradient> {
    let surface = ctx.surface;
    let i = iu as isize;
    let j = iv as isize;
    let s = ctx.shape_at(i, j)?;
    let gam = christoffels(ctx, iu, iv)?;
    let inv2 = [1.0 / (2.0 * surface.du), 1.0 / (2.0 * surface.dv)];

    // nabla_k A_(lm) = P_N(D_k A_lm) - Gamma^n_{kl} A_(nm) - Gamma^n_{km} A_(ln).
    let a_ctr = |l: usize, m: usize| ctx.a_fields[PAIR_SLOT[l][m]][surface.idx(iu, iv)];
    let mut nabla = [[linalg::V5_ZERO; 3]; 2];
    for k in 0..2 {
        let (dp, dm) = if k == 0 { ((i + 1, j), (i - 1, j)) } else { ((i, j + 1), (i, j - 1)) };
        for (slot, &(l, m)) in SLOT_PAIR.iter().enumerate() {
            let ap = ctx.a_at(slot, dp.0, dp.1)?;
            let am = ctx.a_at(slot, dm.0, dm.1)?;
            let d = linalg::scale(linalg::sub(ap, am), inv2[k]);
            let mut v = project_normal(surface, s, d);
            for n in 0..2 {
                v = linalg::axpy(v, -gam[n][k][l], a_ctr(n, m));
                v = linalg::axpy(v, -gam[n][k][m], a_ctr(l, n));
            }
            nabla[k][slot] = v;
        }
    }

    // Orthonormal-frame components C[q][l][m][alpha] and the derived norms.
    let rows = frame_rows(s);
    let mut comp = [[[[0.0f64; 2]; 2]; 2]; 2];
    for q in 0..2 {
        for l in 0..2 {
            for m in 0..2 {
                let mut v = linalg::V5_ZERO;
                for kk in 0..2 {
                    for ll in 0..2 {
                        for mm in 0..2 {
                            let w = rows[q][kk] * rows[l][ll] * rows[m][mm];
                            if w != 0.0 {
                                v = linalg::axpy(v, w, nabla[kk][PAIR_SLOT[ll][mm]]);
                            }
                        }
                    }
                }
                comp[q][l][m][0] = surface.model.inner(v, s.nu3);
                comp[q][l][m][1] = surface.model.inner(v, s.nu4);
            }
        }
    }
    let mut grad_a_sq = 0.0;
    for q in 0..2 {
        for l in 0..2 {
            for m in 0..2 {
                for al in 0..2 {
                    grad_a_sq += comp[q][l][m][al] * comp[q][l][m][al];
                }
            }
        }
    }

    // Total symmetrization over the three tangent slots.
    let mut sym = [[[[0.0f64; 2]; 2]; 2]; 2];
    let mut asym = 0.0;
    for q in 0..2 {
        for l in 0..2 {
            for m in 0..2 {
                for al in 0..2 {
                    let v = (comp[q][l][m][al] + comp[l][q][m][al] + comp[m][l][q][al]) / 3.0;
                    sym[q][l][m][al] = v;
                    let d = comp[q][l][m][al] - v;
                    asym += d * d;
                }
            }
        }
    }
    let pick = |al: usize| -> [f64; 4] {
        [sym[0][0][0][al], sym[0][0][1][al], sym[0][1][1][al], sym[1][1][1][al]]
    };
    let tensor = SymmetricGradientTensor::new(pick(0), pick(1));

    // |nabla H|^2 from the normal connection applied to the H field.
    let mut w_coord = [linalg::V5_ZERO; 2];
    for k in 0..2 {
        let (dp, dm) = if k == 0 { ((i + 1, j), (i - 1, j)) } else { ((i, j + 1), (i, j - 1)) };
        let hp = ctx.shape_at(dp.0, dp.1)?.h_vec;
        let hm = ctx.shape_at(dm.0, dm.1)?.h_vec;
        w_coord[k] = project_normal(surface, s, linalg::scale(linalg::sub(hp, hm), inv2[k]));
    }
    let mut grad_h_sq = 0.0;
    for q in 0..2 {
        let wq = linalg::axpy(
            linalg::scale(w_coord[0], rows[q][0]),
            rows[q][1],
            w_coord[1],
        );
        let c3 = surface.model.inner(wq, s.nu3);
        let c4 = surface.model.inner(wq, s.nu4);
        grad_h_sq += c3 * c3 + c4 * c4;
    }

    // |nabla K_perp| with normal-frame orientation alignment: the signed
    // field is only defined up to the orientation of each site's working
    // frame, so a neighbor whose frame is improperly rotated relative to the
    // center contributes with flipped sign.
    let orient = |n: &ShapeData| -> f64 {
        let g11 = surface.model.inner(s.nu3, n.nu3);
        let g12 = surface.model.inner(s.nu3, n.nu4);
        let g21 = surface.model.inner(s.nu4, n.nu3);
        let g22 = surface.model.inner(s.nu4, n.nu4);
        if g11 * g22 - g12 * g21 < 0.0 {
            -1.0
        } else {
            1.0
        }
    };
    let mut dk = [0.0f64; 2];
    for k in 0..2 {
        let (dp, dm) = if k == 0 { ((i + 1, j), (i - 1, j)) } else { ((i, j + 1), (i, j - 1)) };
        let np = ctx.shape_at(dp.0, dp.1)?;
        let nm = ctx.shape_at(dm.0, dm.1)?;
        dk[k] = (orient(np) * np.kperp - orient(nm) * nm.kperp) * inv2[k];
    }
    let gi = s.g.inverse();
    let grad_kperp_sq = gi.m11 * dk[0] * dk[0] + 2.0 * gi.m12 * dk[0] * dk[1] + gi.m22 * dk[1] * dk[1];

    let data = GradientData {
        tensor,
        codazzi_asym: asym,
        grad_a_sq,
        grad_h_sq,
        grad_aring_sq: (grad_a_sq - 0.5 * grad_h_sq).max(0.0),
        grad_kperp: grad_kperp_sq.max(0.0).sqrt(),
    };
    Some(SiteGradient { data })
}

const SLOT_PAIR: [(usize, usize); 3] = [(0, 0), (0, 1), (1, 1)];

/// Gradient data per site; `None` where stencil neighbors lack shape data
/// (the two rows nearest each pole and the pole rows themselves).
pub fn compute_gradient_field(
    surface: &SurfaceGrid,
    shapes: &[Option<ShapeData>],
) -> Vec<Option<GradientData>> {
    let ctx = Context::new(surface, shapes);
    let mut out = vec![None; surface.nu * surface.nv];
    for iu in 0..surface.nu {
        for iv in 0..surface.nv {
            out[surface.idx(iu, iv)] = site_gradient(&ctx, iu, iv).map(|s| s.data);
        }
    }
    out
}

/// Residual of the second-derivative trace identity
///
///   1/2 Lap |A|^2 - <A, Hess H> - |nabla A|^2 - 2 K |Å|^2 + 2 K_perp^2,
///
/// per site, where Hess is the normal-bundle Hessian and K the extrinsic
/// Gauss curvature. Converges to zero at second order on smooth surfaces.
pub fn simons_residual_field(
    surface: &SurfaceGrid,
    shapes: &[Option<ShapeData>],
) -> Vec<Option<f64>> {
    let ctx = Context::new(surface, shapes);
    let n = surface.nu * surface.nv;

    // First pass: normal-connection derivative of H as an ambient field.
    let mut w_field: Vec<Option<[V5; 2]>> = vec![None; n];
    let mut grad_a_sq: Vec<Option<f64>> = vec![None; n];
    for iu in 0..surface.nu {
        for iv in 0..surface.nv {
            let i = iu as isize;
            let j = iv as isize;
            let Some(s) = ctx.shape_at(i, j) else { continue };
            let inv2 = [1.0 / (2.0 * surface.du), 1.0 / (2.0 * surface.dv)];
            let mut w = [linalg::V5_ZERO; 2];
            let mut ok = true;
            for k in 0..2 {
                let (dp, dm) = if k == 0 { ((i + 1, j), (i - 1, j)) } else { ((i, j + 1), (i, j - 1)) };
                match (ctx.shape_at(dp.0, dp.1), ctx.shape_at(dm.0, dm.1)) {
                    (Some(p), Some(m)) => {
                        w[k] = project_normal(
                            surface,
                            s,
                            linalg::scale(linalg::sub(p.h_vec, m.h_vec), inv2[k]),
                        );
                    }
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                let idx = surface.idx(iu, iv);
                w_field[idx] = Some(w);
                grad_a_sq[idx] = site_gradient(&ctx, iu, iv).map(|sg| sg.data.grad_a_sq);
            }
        }
    }

    let w_at = |i: isize, j: isize| -> Option<[V5; 2]> {
        let (iu, iv) = offset_site(surface, i, j)?;
        w_field[surface.idx(iu, iv)]
    };
    let asq_at = |i: isize, j: isize| -> Option<f64> {
        let (iu, iv) = offset_site(surface, i, j)?;
        ctx.shapes[surface.idx(iu, iv)].as_ref().map(|s| s.asq)
    };

    let mut out = vec![None; n];
    for iu in 0..surface.nu {
        for iv in 0..surface.nv {
            let i = iu as isize;
            let j = iv as isize;
            let idx = surface.idx(iu, iv);
            let Some(s) = ctx.shape_at(i, j) else { continue };
            let Some(gam) = christoffels(&ctx, iu, iv) else { continue };
            let Some(ga) = grad_a_sq[idx] else { continue };
            let Some(w_ctr) = w_field[idx] else { continue };
            let inv2 = [1.0 / (2.0 * surface.du), 1.0 / (2.0 * surface.dv)];

            // Normal-bundle Hessian of H: nabla_k W_l - Gamma^m_{kl} W_m.
            let mut hess = [[linalg::V5_ZERO; 2]; 2];
            let mut ok = true;
            'outer: for k in 0..2 {
                let (dp, dm) = if k == 0 { ((i + 1, j), (i - 1, j)) } else { ((i, j + 1), (i, j - 1)) };
                let (wp, wm) = match (w_at(dp.0, dp.1), w_at(dm.0, dm.1)) {
                    (Some(p), Some(m)) => (p, m),
                    _ => {
                        ok = false;
                        break 'outer;
                    }
                };
                for l in 0..2 {
                    let d = linalg::scale(linalg::sub(wp[l], wm[l]), inv2[k]);
                    let mut v = project_normal(surface, s, d);
                    for m in 0..2 {
                        v = linalg::axpy(v, -gam[m][k][l], w_ctr[m]);
                    }
                    hess[k][l] = v;
                }
            }
            if !ok {
                continue;
            }

            // <A, Hess H> with both tensors in the coordinate basis.
            let gi = s.g.inverse();
            let gim = [[gi.m11, gi.m12], [gi.m12, gi.m22]];
            let a_ctr = |l: usize, m: usize| ctx.a_fields[PAIR_SLOT[l][m]][idx];
            let mut inner_ah = 0.0;
            for ii in 0..2 {
                for jj in 0..2 {
                    for k in 0..2 {
                        for l in 0..2 {
                            inner_ah += gim[ii][k]
                                * gim[jj][l]
                                * surface.model.inner(a_ctr(ii, jj), hess[k][l]);
                        }
                    }
                }
            }

            // Laplace-Beltrami of the scalar |A|^2.
            let (sc, sup, sum_, svp, svm) = match (
                asq_at(i, j),
                asq_at(i + 1, j),
                asq_at(i - 1, j),
                asq_at(i, j + 1),
                asq_at(i, j - 1),
            ) {
                (Some(a), Some(b), Some(c), Some(d), Some(e)) => (a, b, c, d, e),
                _ => continue,
            };
            let (supp, summ, svpp, svmm) = match (
                asq_at(i + 1, j + 1),
                asq_at(i - 1, j - 1),
                asq_at(i + 1, j - 1),
                asq_at(i - 1, j + 1),
            ) {
                (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
                _ => continue,
            };
            let du = surface.du;
            let dv = surface.dv;
            let s_u = (sup - sum_) / (2.0 * du);
            let s_v = (svp - svm) / (2.0 * dv);
            let s_uu = (sup - 2.0 * sc + sum_) / (du * du);
            let s_vv = (svp - 2.0 * sc + svm) / (dv * dv);
            let s_uv = (supp - svpp - svmm + summ) / (4.0 * du * dv);
            let hess_s = [[s_uu, s_uv], [s_uv, s_vv]];
            let ds = [s_u, s_v];
            let mut lap = 0.0;
            for k in 0..2 {
                for l in 0..2 {
                    let mut v = hess_s[k][l];
                    for m in 0..2 {
                        v -= gam[m][k][l] * ds[m];
                    }
                    lap += gim[k][l] * v;
                }
            }

            let residual = 0.5 * lap - inner_ah - ga - 2.0 * s.gauss_k * s.aring_sq
                + 2.0 * s.kperp * s.kperp;
            out[idx] = Some(residual);
        }
    }
    out
}

/// Difference between the extrinsic Gauss curvature (from the Gauss
/// equation) and the intrinsic one (Brioschi formula on the induced metric).
pub fn gauss_residual_field(
    surface: &SurfaceGrid,
    shapes: &[Option<ShapeData>],
) -> Vec<Option<f64>> {
    let mut out = vec![None; surface.nu * surface.nv];
    for iu in 0..surface.nu {
        for iv in 0..surface.nv {
            let idx = surface.idx(iu, iv);
            let Some(s) = &shapes[idx] else { continue };
            if let Some(ki) = super::gauss_curvature_intrinsic(surface, shapes, iu, iv) {
                out[idx] = Some(s.gauss_k - ki);
            }
        }
    }
    out
}

/// Max absolute identity residuals over the fixed interior band
/// (`interior_band_rows`), where derivative stencils are uniformly second
/// order and the maxima therefore converge under refinement.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct IdentityResiduals {
    pub max_gauss: f64,
    pub max_simons: f64,
}

pub fn identity_residual_maxima(
    surface: &SurfaceGrid,
    shapes: &[Option<ShapeData>],
) -> IdentityResiduals {
    let simons = simons_residual_field(surface, shapes);
    let gauss = gauss_residual_field(surface, shapes);
    let mut out = IdentityResiduals { max_gauss: 0.0, max_simons: 0.0 };
    for iu in surface.interior_band_rows() {
        for iv in 0..surface.nv {
            let idx = surface.idx(iu, iv);
            if let Some(r) = gauss[idx] {
                out.max_gauss = out.max_gauss.max(r.abs());
            }
            if let Some(r) = simons[idx] {
                out.max_simons = out.max_simons.max(r.abs());
            }
        }
    }
    out
}
