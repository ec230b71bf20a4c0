//! Reaction-term certification for the pinching quantity.
//!
//! At a point where the pinching quantity Q touches zero from below, the
//! parabolic maximum principle reduces preservation of Q < 0 to a sign
//! condition on the zeroth-order "reaction" part of dQ/dt. In an adapted
//! frame the second fundamental form of a surface with |H| = h is
//!
//!     A_3 = [[h/2 + a, 0], [0, h/2 - a]],   A_4 = [[b, c], [c, -b]],
//!
//! so the whole algebra reduces to polynomials in (h, a, b, c). This module
//! evaluates the raw reaction, its closed-form decomposition into five
//! curvature-cone terms plus ambient corrections, and runs seeded sampling
//! scans over the constraint variety (Q = 0) to certify nonpositivity.
//!
//! Two assembly conventions are provided. `StandardAB` uses the reaction
//! terms that follow from the structure equations and is the default: its
//! first term carries coefficient 1 on the sum of squared Gram entries (this
//! is pinned by the shrinking-sphere ODE, d|A|^2/dt = 2|A|^4 for umbilic data
//! in flat space) and its normal-curvature source is |K_perp|(|A|^2+2|Å|^2),
//! which makes the five-term decomposition an exact identity. `LegacyAB`
//! keeps the variant formulas seen in circulation (factor 2 on the Gram sum,
//! an extra -2b^2 in the normal-curvature source) for side-by-side study.

use crate::linalg::Sym2;
use crate::pinching::PinchingParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Reaction-term assembly convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Convention {
    /// Structure-equation-consistent assembly (default, certified).
    #[default]
    StandardAB,
    /// Legacy assembly variant: factor 2 on the Gram-square sum in R1 and a
    /// -2b^2 correction inside R3. Kept for side-by-side comparison.
    LegacyAB,
}

impl std::str::FromStr for Convention {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard-ab" | "StandardAB" | "standard_ab" => Ok(Convention::StandardAB),
            "legacy-ab" | "LegacyAB" | "legacy_ab" => Ok(Convention::LegacyAB),
            other => Err(format!(
                "unknown convention `{other}` (expected standard-ab or legacy-ab)"
            )),
        }
    }
}

/// Second fundamental form in an adapted orthonormal frame: the first normal
/// direction is aligned with H (when H is nonzero), the tangent frame
/// diagonalizes the first component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdaptedShape {
    /// Mean curvature magnitude h = |H| >= 0.
    pub h: f64,
    /// Trace-free diagonal of the H-aligned component.
    pub a: f64,
    /// Diagonal part of the second normal component.
    pub b: f64,
    /// Off-diagonal part of the second normal component.
    pub c: f64,
}

impl AdaptedShape {
    pub fn new(h: f64, a: f64, b: f64, c: f64) -> Self {
        AdaptedShape { h, a, b, c }
    }

    /// |Å|^2 = 2(a^2 + b^2 + c^2).
    #[inline]
    pub fn aring_sq(&self) -> f64 {
        2.0 * (self.a * self.a + self.b * self.b + self.c * self.c)
    }

    /// |Å_1|^2 = 2 a^2, the trace-free part of the H-aligned component.
    #[inline]
    pub fn aring1_sq(&self) -> f64 {
        2.0 * self.a * self.a
    }

    /// |Å_2|^2 = 2 b^2 + 2 c^2.
    #[inline]
    pub fn aring2_sq(&self) -> f64 {
        2.0 * (self.b * self.b + self.c * self.c)
    }

    /// Signed normal curvature K_perp = 2 a c.
    #[inline]
    pub fn kperp(&self) -> f64 {
        2.0 * self.a * self.c
    }

    /// |A|^2 = h^2/2 + |Å|^2.
    #[inline]
    pub fn asq(&self) -> f64 {
        0.5 * self.h * self.h + self.aring_sq()
    }

    /// Reassemble the two normal components as symmetric 2x2 matrices.
    pub fn matrices(&self) -> (Sym2, Sym2) {
        (
            Sym2 { m11: 0.5 * self.h + self.a, m12: 0.0, m22: 0.5 * self.h - self.a },
            Sym2 { m11: self.b, m12: self.c, m22: -self.b },
        )
    }
}

/// Decompose a pair of symmetric shape components (given in an arbitrary
/// orthonormal tangent/normal frame) into adapted parameters.
///
/// The normal frame is rotated so its first leg aligns with the mean
/// curvature vector (skipped when |H| <= tol_h, in which case the given order
/// is kept), then the tangent frame is rotated to diagonalize the first
/// component. Signs are normalized to a >= 0 and, when a > 0, c >= 0 (else
/// b >= 0); |K_perp| and all norms are invariant under these choices.
pub fn adapted_decomposition(h3: Sym2, h4: Sym2, tol_h: f64) -> AdaptedShape {
    let t3 = h3.trace();
    let t4 = h4.trace();
    let h = (t3 * t3 + t4 * t4).sqrt();

    // Rotate the normal frame so the first component carries the whole trace.
    let (m3, m4) = if h > tol_h {
        let (c, s) = (t3 / h, t4 / h);
        (
            Sym2 {
                m11: c * h3.m11 + s * h4.m11,
                m12: c * h3.m12 + s * h4.m12,
                m22: c * h3.m22 + s * h4.m22,
            },
            Sym2 {
                m11: -s * h3.m11 + c * h4.m11,
                m12: -s * h3.m12 + c * h4.m12,
                m22: -s * h3.m22 + c * h4.m22,
            },
        )
    } else {
        (h3, h4)
    };

    // Rotate the tangent frame by phi to kill the off-diagonal of m3. The
    // trace-free parts transform with angle 2*phi.
    let p = 0.5 * (m3.m11 - m3.m22);
    let q = m3.m12;
    let r = (p * p + q * q).sqrt();
    let (cos2, sin2) = if r > 0.0 { (p / r, q / r) } else { (1.0, 0.0) };
    let a = r;
    // m4 trace-free components in the rotated frame.
    let pb = 0.5 * (m4.m11 - m4.m22);
    let qb = m4.m12;
    let mut b = cos2 * pb + sin2 * qb;
    let mut c = -sin2 * pb + cos2 * qb;
    // Sign normalization: flipping the second normal leg negates (b, c).
    if c < 0.0 || (c == 0.0 && b < 0.0) {
        b = -b;
        c = -c;
    }
    AdaptedShape { h, a, b, c }
}

/// The three reaction sources, see module docs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReactionTerms {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

/// Evaluate R1, R2, R3 for a shape under a convention.
pub fn reaction_terms(s: AdaptedShape, convention: Convention) -> ReactionTerms {
    let hsq = s.h * s.h;
    let g33 = 0.5 * hsq + 2.0 * s.a * s.a; // <A_3, A_3>
    let g34 = 2.0 * s.a * s.b; // <A_3, A_4>
    let g44 = 2.0 * (s.b * s.b + s.c * s.c); // <A_4, A_4>
    let kperp = s.kperp();
    let rm_perp_sq = 4.0 * kperp * kperp;

    let gram_sq = g33 * g33 + 2.0 * g34 * g34 + g44 * g44;
    let r1 = match convention {
        Convention::StandardAB => gram_sq + rm_perp_sq,
        Convention::LegacyAB => 2.0 * gram_sq + rm_perp_sq,
    };
    let r2 = hsq * g33;
    let r3 = match convention {
        Convention::StandardAB => kperp.abs() * (s.asq() + 2.0 * s.aring_sq()),
        Convention::LegacyAB => {
            kperp.abs() * (s.asq() + 2.0 * s.aring_sq() - 2.0 * s.b * s.b)
        }
    };
    ReactionTerms { r1, r2, r3 }
}

/// Raw reaction of dQ/dt at a point:
///
///   2 R1 - 2k R2 + 2 gamma R3
///     + 4 Kbar |H|^2 - 4 Kbar |A|^2 - 4 k Kbar |H|^2 - 8 gamma Kbar |K_perp|.
pub fn reaction_raw(s: AdaptedShape, params: &PinchingParams, convention: Convention) -> f64 {
    let t = reaction_terms(s, convention);
    let hsq = s.h * s.h;
    let kbar = params.kbar;
    2.0 * t.r1 - 2.0 * params.k * t.r2 + 2.0 * params.gamma * t.r3
        + 4.0 * kbar * hsq
        - 4.0 * kbar * s.asq()
        - 4.0 * params.k * kbar * hsq
        - 8.0 * params.gamma * kbar * s.kperp().abs()
}

/// Squared mean curvature forced by the touching condition Q = 0:
///
///   (k - 1/2) |H|^2 = |Å|^2 + 2 gamma |K_perp| - beta Kbar.
///
/// Returns `None` when the right-hand side is negative (the trace-free data
/// cannot sit on the pinching boundary for this ambient).
pub fn hsq_from_constraint(a: f64, b: f64, c: f64, params: &PinchingParams) -> Option<f64> {
    let s = AdaptedShape::new(0.0, a, b, c);
    let rhs = s.aring_sq() + 2.0 * params.gamma * s.kperp().abs() - params.beta * params.kbar;
    if rhs < 0.0 {
        None
    } else {
        Some(rhs / params.alpha())
    }
}

/// Closed-form decomposition of the constrained reaction. With
/// x = |Å_1|^2, y = |Å_2|^2, z = |K_perp| and 1/alpha = 1/(k - 1/2):
///
///   T1 = (2 - 1/alpha) 4 a^2 b^2
///   T2 = (2 - 1/alpha) gamma z x
///   T3 = (6 - 3/alpha) gamma z y
///   T4 = (2 - 1/alpha) y^2
///   T5 = (6 - (1 + 2 gamma^2)/alpha) z^2
///   C1 = 2 x beta + (2|Å|^2 beta - x beta + 3 gamma z beta)/alpha
///        - 8 |Å|^2 - 16 gamma z
///   C2 = -(beta^2/alpha - 4 beta)
///
/// and the total is T1+...+T5 + C1*Kbar + C2*Kbar^2. Under the `StandardAB`
/// convention this agrees with `reaction_raw` at the constrained |H|^2 as an
/// exact polynomial identity for every ambient curvature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decomposition {
    pub t: [f64; 5],
    pub c1: f64,
    pub c2: f64,
    pub kbar: f64,
}

impl Decomposition {
    pub fn total(&self) -> f64 {
        self.t.iter().sum::<f64>() + self.c1 * self.kbar + self.c2 * self.kbar * self.kbar
    }
}

/// Evaluate the decomposition for trace-free data (a, b, c) on the pinching
/// boundary.
pub fn decomposition(a: f64, b: f64, c: f64, params: &PinchingParams) -> Decomposition {
    let s = AdaptedShape::new(0.0, a, b, c);
    let x = s.aring1_sq();
    let y = s.aring2_sq();
    let z = s.kperp().abs();
    let aring = x + y;
    let inv_alpha = 1.0 / params.alpha();
    let g = params.gamma;
    let beta = params.beta;

    let t1 = (2.0 - inv_alpha) * 4.0 * a * a * b * b;
    let t2 = (2.0 - inv_alpha) * g * z * x;
    let t3 = (6.0 - 3.0 * inv_alpha) * g * z * y;
    let t4 = (2.0 - inv_alpha) * y * y;
    let t5 = (6.0 - (1.0 + 2.0 * g * g) * inv_alpha) * z * z;
    let c1 = 2.0 * x * beta + (2.0 * aring * beta - x * beta + 3.0 * g * z * beta) * inv_alpha
        - 8.0 * aring
        - 16.0 * g * z;
    let c2 = -(beta * beta * inv_alpha - 4.0 * beta);

    Decomposition { t: [t1, t2, t3, t4, t5], c1, c2, kbar: params.kbar }
}

/// Residual of the Gram-square bound 2 R1 <= 3 |A|^4 (nonnegative when the
/// bound holds): returns 3|A|^4 - 2 R1.
pub fn gram_bound_residual(s: AdaptedShape, convention: Convention) -> f64 {
    let t = reaction_terms(s, convention);
    let asq = s.asq();
    3.0 * asq * asq - 2.0 * t.r1
}

/// One admissible sampled configuration, reported with its constrained |H|^2
/// and raw reaction value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanSample {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub hsq: f64,
    pub reaction: f64,
}

/// Outcome of a reaction certification scan.
#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub k: f64,
    pub kbar: f64,
    pub beta: f64,
    pub gamma: f64,
    pub convention: Convention,
    pub tolerance: f64,
    /// Number of (a, b, c) triples drawn.
    pub samples: u64,
    /// Number of (triple, scale) evaluations attempted.
    pub evaluations: u64,
    /// Evaluations admitted by the touching constraint (hsq >= 0).
    pub admissible: u64,
    /// Largest raw reaction over admissible evaluations.
    pub max_reaction: f64,
    /// Configuration achieving the maximum.
    pub argmax: Option<ScanSample>,
    /// Largest relative discrepancy between the raw assembly and the
    /// five-term decomposition (meaningful under `StandardAB`).
    pub max_discrepancy: f64,
    /// Admissible configurations whose reaction exceeds the tolerance
    /// (capped; `violation_count` holds the full tally).
    pub violations: Vec<ScanSample>,
    pub violation_count: u64,
}

impl ScanReport {
    pub fn certified(&self) -> bool {
        self.violation_count == 0 && self.max_reaction <= self.tolerance
    }
}

/// Configuration of a certification scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanConfig {
    pub k: f64,
    pub kbar: f64,
    pub samples: u64,
    pub seed: u64,
    /// Scale set for ambient-curved scans; ignored for Kbar = 0, where
    /// degree-4 homogeneity lets samples be normalized to |Å|^2 = 1.
    pub scales: Vec<f64>,
    pub convention: Convention,
    pub tolerance: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            k: 0.7,
            kbar: 0.0,
            samples: 1_000_000,
            seed: 42,
            scales: vec![0.1, 1.0, 10.0],
            convention: Convention::StandardAB,
            tolerance: 1e-10,
        }
    }
}

const SCAN_CHUNK: u64 = 1 << 16;
const MAX_STORED_VIOLATIONS: usize = 16;

/// Run a seeded certification scan of the constrained reaction.
///
/// Sampling is deterministic for a given configuration: triples are drawn
/// from per-chunk ChaCha substreams (stream index = chunk index), and chunk
/// results are merged in order, so reports are bit-for-bit reproducible.
/// Ties in the argmax are broken toward the lexicographically smaller
/// (a, b, c) triple.
pub fn scan_reaction(cfg: &ScanConfig) -> Result<ScanReport, crate::error::DomainError> {
    let params = PinchingParams::new(cfg.k, cfg.kbar)?;
    let flat = cfg.kbar == 0.0;
    let scales: &[f64] = if flat { &[1.0] } else { &cfg.scales };
    if scales.is_empty() {
        return Err(crate::error::DomainError::Invalid(
            "scan scale set must not be empty".into(),
        ));
    }

    let mut report = ScanReport {
        k: cfg.k,
        kbar: cfg.kbar,
        beta: params.beta,
        gamma: params.gamma,
        convention: cfg.convention,
        tolerance: cfg.tolerance,
        samples: cfg.samples,
        evaluations: 0,
        admissible: 0,
        max_reaction: f64::NEG_INFINITY,
        argmax: None,
        max_discrepancy: 0.0,
        violations: Vec::new(),
        violation_count: 0,
    };

    let chunks = cfg.samples.div_ceil(SCAN_CHUNK);
    for chunk in 0..chunks {
        let lo = chunk * SCAN_CHUNK;
        let hi = (lo + SCAN_CHUNK).min(cfg.samples);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(chunk + 1);
        for _ in lo..hi {
            // Box-Muller-free: sample from the unit cube re-centered; the scan
            // only needs direction coverage, but normal marginals reach the
            // anisotropic corners of the cone faster, so use them.
            let (mut a, mut b, mut c) = normal_triple(&mut rng);
            if flat {
                let aring = 2.0 * (a * a + b * b + c * c);
                if aring < 1e-24 {
                    report.evaluations += 1;
                    continue;
                }
                let inv = (1.0 / aring).sqrt();
                a *= inv;
                b *= inv;
                c *= inv;
            }
            for &scale in scales {
                report.evaluations += 1;
                let (sa, sb, sc) = (a * scale, b * scale, c * scale);
                let Some(hsq) = hsq_from_constraint(sa, sb, sc, &params) else {
                    continue;
                };
                report.admissible += 1;
                let shape = AdaptedShape::new(hsq.sqrt(), sa, sb, sc);
                let raw = reaction_raw(shape, &params, cfg.convention);
                let dec = decomposition(sa, sb, sc, &params).total();
                let rel = (dec - raw).abs() / raw.abs().max(1.0);
                if rel > report.max_discrepancy {
                    report.max_discrepancy = rel;
                }
                let sample = ScanSample { a: sa, b: sb, c: sc, hsq, reaction: raw };
                let better = match report.argmax {
                    None => true,
                    Some(cur) => {
                        raw > cur.reaction
                            || (raw == cur.reaction
                                && (sa, sb, sc) < (cur.a, cur.b, cur.c))
                    }
                };
                if better {
                    report.max_reaction = raw;
                    report.argmax = Some(sample);
                }
                if raw > cfg.tolerance {
                    report.violation_count += 1;
                    if report.violations.len() < MAX_STORED_VIOLATIONS {
                        report.violations.push(sample);
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Three standard normal variates via Box-Muller (deterministic given rng).
fn normal_triple<R: Rng>(rng: &mut R) -> (f64, f64, f64) {
    let mut pairs = [0.0f64; 4];
    for i in 0..2 {
        let u1: f64 = rng.gen::<f64>().max(1e-300);
        let u2: f64 = rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        let th = 2.0 * std::f64::consts::PI * u2;
        pairs[2 * i] = r * th.cos();
        pairs[2 * i + 1] = r * th.sin();
    }
    (pairs[0], pairs[1], pairs[2])
}
