//! Run configuration: documented TOML schema, defaults, validation, echo.
//!
//! One TOML file drives every subcommand; each section configures one part
//! of the pipeline and may be omitted entirely, in which case documented
//! defaults apply. Unknown keys anywhere are rejected with the offending key
//! named in the error. The effective configuration (defaults applied)
//! serializes back to TOML via [`RunConfig::echo`], and re-parsing that echo
//! reproduces the configuration exactly; drivers embed it in their summaries
//! so every output records the settings that produced it.
//!
//! ```toml
//! [ambient]
//! kind = "s4"        # "r4" | "s4" | "h4"
//! kbar = 1.0         # sectional curvature; sign must match the kind
//!
//! [surface]
//! preset = "geodesic-sphere-s4"
//! nu = 64
//! nv = 32
//! rho = 0.7
//!
//! [pinching]
//! k = 0.7
//! sigma = 0.05
//! p_list = [2.0]
//!
//! [flow]
//! c_cfl = 0.2
//! ```

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, Error, Result};
use crate::flow::FlowConfig;
use crate::oracle::SphereOde;
use crate::pinching::PinchingParams;
use crate::presets::{self, PresetParams, CATALOG};
use crate::reaction::{Convention, ScanConfig};
use crate::spaceform::Ambient;
use crate::surface::SurfaceGrid;

fn invalid(msg: String) -> Error {
    Error::from(ConfigError::Invalid(msg))
}

/// Complete configuration of a run: one section per pipeline stage.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub ambient: AmbientSection,
    pub surface: SurfaceSection,
    pub pinching: PinchingSection,
    pub flow: FlowConfig,
    pub scan: ScanSection,
    pub tensor: TensorSection,
    pub oracle: OracleSection,
    pub check: CheckSection,
    pub output: OutputSection,
}

/// `[ambient]`: which model space the surface lives in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmbientSection {
    /// Model kind: `"r4"`, `"s4"`, or `"h4"`.
    pub kind: String,
    /// Ambient sectional curvature; must be 0 for `r4`, positive for `s4`,
    /// negative for `h4`. The model radius is `1/sqrt(|kbar|)`.
    pub kbar: f64,
}

impl Default for AmbientSection {
    fn default() -> Self {
        AmbientSection { kind: "r4".to_owned(), kbar: 0.0 }
    }
}

impl AmbientSection {
    /// Resolve to a concrete model, checking kind/curvature consistency.
    pub fn model(&self) -> Result<Ambient> {
        let kbar = self.kbar;
        if !kbar.is_finite() {
            return Err(invalid(format!("[ambient] kbar must be finite (got {kbar})")));
        }
        match self.kind.as_str() {
            "r4" => {
                if kbar != 0.0 {
                    return Err(invalid(format!(
                        "[ambient] kind `r4` requires kbar = 0 (got {kbar})"
                    )));
                }
                Ok(Ambient::R4)
            }
            "s4" => {
                if !(kbar > 0.0) {
                    return Err(invalid(format!(
                        "[ambient] kind `s4` requires kbar > 0 (got {kbar})"
                    )));
                }
                Ok(Ambient::S4 { radius: 1.0 / kbar.sqrt() })
            }
            "h4" => {
                if !(kbar < 0.0) {
                    return Err(invalid(format!(
                        "[ambient] kind `h4` requires kbar < 0 (got {kbar})"
                    )));
                }
                Ok(Ambient::H4 { radius: 1.0 / (-kbar).sqrt() })
            }
            other => Err(invalid(format!(
                "[ambient] kind must be one of r4, s4, h4 (got `{other}`)"
            ))),
        }
    }
}

/// `[surface]`: initial immersion, chosen from the preset catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceSection {
    /// Preset name; required by `simulate` and `check`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Grid sites along u (minimum 8).
    pub nu: usize,
    /// Grid sites along v (minimum 8).
    pub nv: usize,
    /// Sphere/torus radius parameter, where the preset takes one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Geodesic radius for curved-model spheres.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    /// Relative amplitude for the perturbed sphere.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Semi-axes for the ellipsoid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub semi_axes: Option<[f64; 3]>,
}

impl Default for SurfaceSection {
    fn default() -> Self {
        SurfaceSection {
            preset: None,
            nu: 64,
            nv: 32,
            radius: None,
            rho: None,
            eps: None,
            semi_axes: None,
        }
    }
}

impl SurfaceSection {
    fn params(&self) -> PresetParams {
        PresetParams {
            radius: self.radius,
            rho: self.rho,
            eps: self.eps,
            semi_axes: self.semi_axes,
        }
    }

    /// Build the configured preset on the given model.
    pub fn build(&self, model: Ambient) -> Result<SurfaceGrid> {
        let name = self.preset.as_deref().ok_or_else(|| {
            invalid(format!(
                "[surface] preset is required; available: {}",
                CATALOG.join(", ")
            ))
        })?;
        presets::build(name, model, self.nu, self.nv, &self.params())
    }

    fn validate(&self) -> Result<()> {
        if self.nu < 8 || self.nv < 8 {
            return Err(invalid(format!(
                "[surface] grid must be at least 8x8 (got {}x{})",
                self.nu, self.nv
            )));
        }
        if let Some(name) = self.preset.as_deref() {
            if !CATALOG.contains(&name) {
                return Err(invalid(format!(
                    "[surface] unknown preset `{name}`; available: {}",
                    CATALOG.join(", ")
                )));
            }
        }
        for (key, value) in [("radius", self.radius), ("rho", self.rho), ("eps", self.eps)] {
            if let Some(v) = value {
                if !v.is_finite() {
                    return Err(invalid(format!("[surface] {key} must be finite (got {v})")));
                }
            }
        }
        Ok(())
    }
}

/// `[pinching]`: the pinching cone and the derived monitor quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PinchingSection {
    /// Pinching ratio; must lie in (1/2, 29/40].
    pub k: f64,
    /// Relaxation exponent of the decay functional f_sigma.
    pub sigma: f64,
    /// Exponents for the L^p norms of f_sigma recorded per time step.
    pub p_list: Vec<f64>,
    /// Override for the torsion weight gamma (default is derived from k).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Override for the ambient-term weight beta (default 4/3).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

impl Default for PinchingSection {
    fn default() -> Self {
        PinchingSection {
            k: 0.7,
            sigma: 0.05,
            p_list: vec![2.0],
            gamma: None,
            beta: None,
        }
    }
}

impl PinchingSection {
    /// Resolve to concrete coefficients for the given ambient curvature.
    pub fn params(&self, kbar: f64) -> Result<PinchingParams> {
        let mut params = PinchingParams::new(self.k, kbar)
            .map_err(|e| invalid(format!("[pinching] {e}")))?;
        if let Some(gamma) = self.gamma {
            params = params.with_gamma(gamma);
        }
        if let Some(beta) = self.beta {
            params = params.with_beta(beta);
        }
        Ok(params)
    }

    fn validate(&self) -> Result<()> {
        // Range-check k through the same gate the params constructor uses.
        self.params(0.0)?;
        if !(self.sigma >= 0.0 && self.sigma < 1.0) {
            return Err(invalid(format!(
                "[pinching] sigma must lie in [0, 1) (got {})",
                self.sigma
            )));
        }
        if self.p_list.is_empty() {
            return Err(invalid("[pinching] p_list must not be empty".to_owned()));
        }
        for &p in &self.p_list {
            if !(p >= 1.0) || !p.is_finite() {
                return Err(invalid(format!(
                    "[pinching] p_list entries must be finite and >= 1 (got {p})"
                )));
            }
        }
        for (key, value) in [("gamma", self.gamma), ("beta", self.beta)] {
            if let Some(v) = value {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(invalid(format!(
                        "[pinching] {key} override must be positive and finite (got {v})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `[scan]`: Monte Carlo certification of reaction-term negativity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    /// Pinching ratio for the scan; defaults to `[pinching] k`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    /// Ambient curvature for the scan; defaults to `[ambient] kbar`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kbar: Option<f64>,
    /// Number of random boundary samples.
    pub samples: u64,
    /// RNG seed (the `--seed` flag overrides it).
    pub seed: u64,
    /// Curvature-scale sweep used when kbar is nonzero.
    pub scales: Vec<f64>,
    /// Reaction assembly convention: `"standard-ab"` or `"legacy-ab"`.
    pub convention: String,
    /// Negativity margin the scan certifies against.
    pub tolerance: f64,
}

impl Default for ScanSection {
    fn default() -> Self {
        let base = ScanConfig::default();
        ScanSection {
            k: None,
            kbar: None,
            samples: base.samples,
            seed: base.seed,
            scales: base.scales,
            convention: "standard-ab".to_owned(),
            tolerance: base.tolerance,
        }
    }
}

impl ScanSection {
    /// Resolve to a concrete scan configuration. `fallback_k` and
    /// `fallback_kbar` fill the optional fields; `seed` (from the command
    /// line) replaces the section seed when present.
    pub fn scan_config(
        &self,
        fallback_k: f64,
        fallback_kbar: f64,
        seed: Option<u64>,
    ) -> Result<ScanConfig> {
        let convention = Convention::from_str(&self.convention)
            .map_err(|e| invalid(format!("[scan] {e}")))?;
        Ok(ScanConfig {
            k: self.k.unwrap_or(fallback_k),
            kbar: self.kbar.unwrap_or(fallback_kbar),
            samples: self.samples,
            seed: seed.unwrap_or(self.seed),
            scales: self.scales.clone(),
            convention,
            tolerance: self.tolerance,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(invalid("[scan] samples must be at least 1".to_owned()));
        }
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return Err(invalid(format!(
                "[scan] tolerance must be positive and finite (got {})",
                self.tolerance
            )));
        }
        if self.scales.is_empty() {
            return Err(invalid("[scan] scales must not be empty".to_owned()));
        }
        for &s in &self.scales {
            if !(s > 0.0) || !s.is_finite() {
                return Err(invalid(format!(
                    "[scan] scales entries must be positive and finite (got {s})"
                )));
            }
        }
        Convention::from_str(&self.convention).map_err(|e| invalid(format!("[scan] {e}")))?;
        if let Some(kbar) = self.kbar {
            if !kbar.is_finite() {
                return Err(invalid(format!("[scan] kbar must be finite (got {kbar})")));
            }
        }
        // A k override is range-checked when the scan runs; check it here too
        // so a bad config fails fast.
        if let Some(k) = self.k {
            PinchingParams::new(k, 0.0).map_err(|e| invalid(format!("[scan] {e}")))?;
        }
        Ok(())
    }
}

/// `[tensor]`: randomized verification of the gradient-tensor inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TensorSection {
    /// Number of random tensors per inequality.
    pub samples: u64,
    /// Local refinement iterations around the running minimizer.
    pub refine: u32,
    /// RNG seed (the `--seed` flag overrides it).
    pub seed: u64,
}

impl Default for TensorSection {
    fn default() -> Self {
        TensorSection { samples: 1_000_000, refine: 40, seed: 7 }
    }
}

impl TensorSection {
    fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(invalid("[tensor] samples must be at least 1".to_owned()));
        }
        Ok(())
    }
}

/// `[oracle]`: closed-form shrinking-sphere reference curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    /// Initial radius for the flat model (default 1).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    /// Initial geodesic radius for the curved models
    /// (default 0.7 x model radius on s4, 0.5 x model radius on h4).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho0: Option<f64>,
    /// Number of uniform time samples on [0, extinction).
    pub samples: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection { r0: None, rho0: None, samples: 200 }
    }
}

impl OracleSection {
    /// Resolve to the exact ODE for the given model.
    pub fn ode(&self, model: Ambient) -> Result<SphereOde> {
        let ode = match model {
            Ambient::R4 => {
                if self.rho0.is_some() {
                    return Err(invalid(
                        "[oracle] rho0 only applies to the curved models; use r0 on r4"
                            .to_owned(),
                    ));
                }
                SphereOde::R4 { r0: self.r0.unwrap_or(1.0) }
            }
            Ambient::S4 { radius } => {
                if self.r0.is_some() {
                    return Err(invalid(
                        "[oracle] r0 only applies to the flat model; use rho0 on s4".to_owned(),
                    ));
                }
                SphereOde::S4 { radius, rho0: self.rho0.unwrap_or(0.7 * radius) }
            }
            Ambient::H4 { radius } => {
                if self.r0.is_some() {
                    return Err(invalid(
                        "[oracle] r0 only applies to the flat model; use rho0 on h4".to_owned(),
                    ));
                }
                SphereOde::H4 { radius, rho0: self.rho0.unwrap_or(0.5 * radius) }
            }
        };
        ode.validate().map_err(|e| invalid(format!("[oracle] {e}")))?;
        Ok(ode)
    }

    fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(invalid(format!(
                "[oracle] samples must be at least 2 (got {})",
                self.samples
            )));
        }
        for (key, value) in [("r0", self.r0), ("rho0", self.rho0)] {
            if let Some(v) = value {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(invalid(format!(
                        "[oracle] {key} must be positive and finite (got {v})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `[check]`: static certification of the initial surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSection {
    /// Violation tolerance for the pointwise normal-curvature inequality.
    pub ddvv_tol: f64,
    /// When true, `check` fails (exit 1) unless the surface starts strictly
    /// inside the pinched cone (Q < 0 everywhere).
    pub require_pinched: bool,
}

impl Default for CheckSection {
    fn default() -> Self {
        CheckSection { ddvv_tol: 1e-8, require_pinched: false }
    }
}

impl CheckSection {
    fn validate(&self) -> Result<()> {
        if !(self.ddvv_tol >= 0.0) || !self.ddvv_tol.is_finite() {
            return Err(invalid(format!(
                "[check] ddvv_tol must be finite and non-negative (got {})",
                self.ddvv_tol
            )));
        }
        Ok(())
    }
}

/// `[output]`: where and what the drivers write.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Output directory (the `--out` flag overrides it; default `out`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    /// Also dump the initial and final grids as point CSV files.
    pub points: bool,
    /// Dump an intermediate point CSV every N diagnostic records.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points_every: Option<u64>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: None, points: false, points_every: None }
    }
}

impl OutputSection {
    fn validate(&self) -> Result<()> {
        if self.points_every == Some(0) {
            return Err(invalid("[output] points_every must be at least 1".to_owned()));
        }
        Ok(())
    }
}

impl RunConfig {
    /// Parse a TOML document. `origin` labels the source in error messages
    /// (a file path, or something like `"<inline>"`).
    pub fn parse(text: &str, origin: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_owned(),
            message: e.message().to_owned(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read and parse a config file.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        RunConfig::parse(&text, &path.display().to_string())
    }

    /// Cross-field validation; every section checks its own ranges and the
    /// ambient/pinching pair is checked for joint consistency.
    pub fn validate(&self) -> Result<()> {
        let model = self.ambient.model()?;
        self.surface.validate()?;
        self.pinching.validate()?;
        self.pinching.params(model.kbar())?;
        self.flow.validate().map_err(|e| invalid(format!("[flow] {e}")))?;
        self.scan.validate()?;
        self.tensor.validate()?;
        self.oracle.validate()?;
        self.check.validate()?;
        self.output.validate()?;
        Ok(())
    }

    /// Serialize the effective configuration back to TOML. Parsing the echo
    /// reproduces `self` exactly.
    pub fn echo(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| invalid(format!("cannot serialize configuration: {e}")))
    }

    /// The resolved ambient model.
    pub fn model(&self) -> Result<Ambient> {
        self.ambient.model()
    }

    /// The resolved pinching coefficients.
    pub fn pinching_params(&self) -> Result<PinchingParams> {
        let model = self.ambient.model()?;
        self.pinching.params(model.kbar())
    }

    /// Build the configured initial surface.
    pub fn build_surface(&self) -> Result<SurfaceGrid> {
        let model = self.ambient.model()?;
        self.surface.build(model)
    }

    /// The resolved reaction-scan configuration.
    pub fn scan_config(&self, seed: Option<u64>) -> Result<ScanConfig> {
        self.scan.scan_config(self.pinching.k, self.ambient.kbar, seed)
    }

    /// The resolved shrinking-sphere ODE.
    pub fn oracle_ode(&self) -> Result<SphereOde> {
        let model = self.ambient.model()?;
        self.oracle.ode(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_yields_the_documented_defaults() {
        let cfg = RunConfig::parse("", "<inline>").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.ambient.model().unwrap(), Ambient::R4);
        assert_eq!(cfg.surface.nu, 64);
        assert_eq!(cfg.surface.nv, 32);
        assert_eq!(cfg.pinching.k, 0.7);
        assert_eq!(cfg.pinching.sigma, 0.05);
        assert_eq!(cfg.pinching.p_list, vec![2.0]);
        assert_eq!(cfg.scan.samples, 1_000_000);
        assert_eq!(cfg.scan.seed, 42);
        assert_eq!(cfg.scan.scales, vec![0.1, 1.0, 10.0]);
        assert_eq!(cfg.scan.tolerance, 1e-10);
        assert_eq!(cfg.tensor.samples, 1_000_000);
        assert_eq!(cfg.oracle.samples, 200);
        assert!(!cfg.check.require_pinched);
    }

    #[test]
    fn unknown_keys_are_rejected_with_the_key_named() {
        let err = RunConfig::parse("[pinching]\nkk = 0.7\n", "<inline>").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("kk"), "error should name the unknown key: {msg}");
        assert_eq!(err.exit_code(), 2);

        let err = RunConfig::parse("[flowx]\nc_cfl = 0.2\n", "<inline>").unwrap_err();
        assert!(err.to_string().contains("flowx"), "got: {err}");
    }

    #[test]
    fn out_of_range_pinching_ratio_is_a_config_error() {
        let err = RunConfig::parse("[pinching]\nk = 0.9\n", "<inline>").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("outside (1/2, 29/40]"), "got: {msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn ambient_kind_and_curvature_must_agree() {
        let ok = RunConfig::parse("[ambient]\nkind = \"s4\"\nkbar = 4.0\n", "<inline>").unwrap();
        assert_eq!(ok.ambient.model().unwrap(), Ambient::S4 { radius: 0.5 });

        let ok = RunConfig::parse("[ambient]\nkind = \"h4\"\nkbar = -1.0\n", "<inline>").unwrap();
        assert_eq!(ok.ambient.model().unwrap(), Ambient::H4 { radius: 1.0 });

        for (doc, needle) in [
            ("[ambient]\nkind = \"s4\"\n", "kbar > 0"),
            ("[ambient]\nkind = \"r4\"\nkbar = 1.0\n", "kbar = 0"),
            ("[ambient]\nkind = \"e4\"\nkbar = 0.0\n", "one of r4, s4, h4"),
        ] {
            let err = RunConfig::parse(doc, "<inline>").unwrap_err();
            assert!(err.to_string().contains(needle), "{doc:?} -> {err}");
            assert_eq!(err.exit_code(), 2);
        }
    }

    #[test]
    fn echo_round_trips_exactly() {
        let doc = r#"
            [ambient]
            kind = "s4"
            kbar = 1.0

            [surface]
            preset = "perturbed-sphere"
            nu = 48
            nv = 24
            rho = 0.7
            eps = 0.05

            [pinching]
            k = 0.725
            sigma = 0.1
            p_list = [2.0, 4.0]

            [flow]
            c_cfl = 0.15
            max_time = 0.5
            tangential_smoothing = 0.1

            [scan]
            samples = 1000
            convention = "legacy-ab"

            [output]
            dir = "runs/demo"
            points = true
        "#;
        let cfg = RunConfig::parse(doc, "<inline>").unwrap();
        let echo = cfg.echo().unwrap();
        let reparsed = RunConfig::parse(&echo, "<echo>").unwrap();
        assert_eq!(cfg, reparsed);

        // The default config echoes and round-trips too (infinite max_time
        // included).
        let base = RunConfig::default();
        let echo = base.echo().unwrap();
        assert_eq!(RunConfig::parse(&echo, "<echo>").unwrap(), base);
    }

    #[test]
    fn scan_section_inherits_pinching_and_ambient_values() {
        let doc = "[ambient]\nkind = \"s4\"\nkbar = 1.0\n[pinching]\nk = 0.6\n";
        let cfg = RunConfig::parse(doc, "<inline>").unwrap();
        let scan = cfg.scan_config(None).unwrap();
        assert_eq!(scan.k, 0.6);
        assert_eq!(scan.kbar, 1.0);
        assert_eq!(scan.seed, 42);
        assert_eq!(scan.convention, Convention::StandardAB);

        // Explicit section values and the seed flag win.
        let doc = "[pinching]\nk = 0.6\n[scan]\nk = 0.7\nkbar = -1.0\nseed = 5\n";
        let cfg = RunConfig::parse(doc, "<inline>").unwrap();
        let scan = cfg.scan_config(Some(11)).unwrap();
        assert_eq!(scan.k, 0.7);
        assert_eq!(scan.kbar, -1.0);
        assert_eq!(scan.seed, 11);
    }

    #[test]
    fn surface_section_builds_catalog_presets() {
        let doc = "[ambient]\nkind = \"s4\"\nkbar = 1.0\n\
                   [surface]\npreset = \"clifford-torus-s4\"\nnu = 16\nnv = 16\n";
        let cfg = RunConfig::parse(doc, "<inline>").unwrap();
        let surface = cfg.build_surface().unwrap();
        assert_eq!((surface.nu, surface.nv), (16, 16));

        // Missing preset is an error that lists the catalog.
        let err = RunConfig::default().build_surface().unwrap_err();
        assert!(err.to_string().contains("clifford-torus-s4"), "got: {err}");

        // Unknown preset is rejected at validation time.
        let err = RunConfig::parse("[surface]\npreset = \"moebius\"\n", "<inline>").unwrap_err();
        assert!(err.to_string().contains("moebius"), "got: {err}");
    }

    #[test]
    fn oracle_section_resolves_per_model() {
        let cfg = RunConfig::parse("[ambient]\nkind = \"s4\"\nkbar = 1.0\n", "<inline>").unwrap();
        match cfg.oracle_ode().unwrap() {
            SphereOde::S4 { radius, rho0 } => {
                assert_eq!(radius, 1.0);
                assert_eq!(rho0, 0.7);
            }
            other => panic!("expected an s4 oracle, got {other:?}"),
        }

        let err = RunConfig::parse("[oracle]\nrho0 = 0.7\n", "<inline>")
            .unwrap()
            .oracle_ode()
            .unwrap_err();
        assert!(err.to_string().contains("rho0"), "got: {err}");

        match RunConfig::default().oracle_ode().unwrap() {
            SphereOde::R4 { r0 } => assert_eq!(r0, 1.0),
            other => panic!("expected an r4 oracle, got {other:?}"),
        }
    }

    #[test]
    fn pinching_overrides_reach_the_params() {
        let doc = "[pinching]\nk = 0.7\ngamma = 0.05\nbeta = 1.0\n";
        let cfg = RunConfig::parse(doc, "<inline>").unwrap();
        let params = cfg.pinching_params().unwrap();
        assert_eq!(params.gamma, 0.05);
        assert_eq!(params.beta, 1.0);
    }
}
