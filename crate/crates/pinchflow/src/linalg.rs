//! Tiny fixed-size linear algebra used by the geometry kernels.
//!
//! Ambient points live in at most 5 coordinates (Euclidean 4-space, the round
//! sphere in R^5, or the hyperboloid in Minkowski R^{1,4}). Rather than drag a
//! generic matrix library through the hot per-site loops, everything is a
//! `[f64; 5]` with the active dimension tracked by the caller; unused trailing
//! coordinates stay exactly zero.

/// Ambient vector: up to 5 coordinates, zero-padded.
pub type V5 = [f64; 5];

pub const V5_ZERO: V5 = [0.0; 5];

#[inline]
pub fn add(a: V5, b: V5) -> V5 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3], a[4] + b[4]]
}

#[inline]
pub fn sub(a: V5, b: V5) -> V5 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3], a[4] - b[4]]
}

#[inline]
pub fn scale(a: V5, s: f64) -> V5 {
    [a[0] * s, a[1] * s, a[2] * s, a[3] * s, a[4] * s]
}

/// a + s*b, the workhorse of the stencil code.
#[inline]
pub fn axpy(a: V5, s: f64, b: V5) -> V5 {
    [
        a[0] + s * b[0],
        a[1] + s * b[1],
        a[2] + s * b[2],
        a[3] + s * b[3],
        a[4] + s * b[4],
    ]
}

/// Euclidean dot product on all 5 slots (safe because unused slots are zero).
#[inline]
pub fn dot(a: V5, b: V5) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3] + a[4] * b[4]
}

/// Minkowski product with signature (-,+,+,+,+), used by the hyperboloid model.
#[inline]
pub fn dot_minkowski(a: V5, b: V5) -> f64 {
    -a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3] + a[4] * b[4]
}

/// Symmetric 2x2 matrix as (m11, m12, m22).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2 {
    pub m11: f64,
    pub m12: f64,
    pub m22: f64,
}

impl Sym2 {
    #[inline]
    pub fn det(self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m12
    }

    #[inline]
    pub fn trace(self) -> f64 {
        self.m11 + self.m22
    }

    /// Inverse; caller checks `det` against degeneracy first.
    #[inline]
    pub fn inverse(self) -> Sym2 {
        let d = self.det();
        Sym2 {
            m11: self.m22 / d,
            m12: -self.m12 / d,
            m22: self.m11 / d,
        }
    }
}

/// 2x2 rotation/reflection used for frame alignment; row-major.
#[derive(Debug, Clone, Copy)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    #[inline]
    pub fn det(self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    /// Nearest orthogonal matrix (polar factor) of a nonsingular 2x2 matrix.
    ///
    /// For M with positive determinant this is the closed-form planar polar
    /// factor; for negative determinant the same formula applied to the
    /// reflected matrix yields the orthogonal factor with determinant -1.
    pub fn polar_orthogonal(self) -> Mat2 {
        let det = self.det();
        if det >= 0.0 {
            // R = (M + adj(M)^T-ish trick): for 2x2, M + [[d,-c],[-b,a]]
            // normalized has the same polar factor as M.
            let p = self.a + self.d;
            let q = self.b - self.c;
            let n = (p * p + q * q).sqrt();
            if n < 1e-300 {
                return Mat2 { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };
            }
            Mat2 {
                a: p / n,
                b: q / n,
                c: -q / n,
                d: p / n,
            }
        } else {
            // Factor out a reflection, take the rotation polar factor, put the
            // reflection back.
            let refl = Mat2 { a: self.a, b: -self.b, c: self.c, d: -self.d };
            let rot = refl.polar_orthogonal();
            Mat2 { a: rot.a, b: -rot.b, c: rot.c, d: -rot.d }
        }
    }

    /// Apply to a 2-vector.
    #[inline]
    pub fn apply(self, x: f64, y: f64) -> (f64, f64) {
        (self.a * x + self.b * y, self.c * x + self.d * y)
    }
}
