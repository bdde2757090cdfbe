//! Experiment configuration: a JSON key tree with documented defaults,
//! dotted-path overrides and key-naming validation.
//!
//! Every block and key is optional; an empty object `{}` is the baseline
//! problem. See `configs/README.md` for the reference.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use nullctl::hum::{CgOptions, Target};
use nullctl::mesh::{ControlRegion, DiscreteLaplacian, SpatialMesh};
use nullctl::pde::{
    random_smooth_field, Coefficient, CoefficientSet, Hypothesis, NewtonOptions, NonlinearSpec, Nonlinearity,
    Placement, TimeGrid,
};
use nullctl::weights::{build_alpha0, ShapeExponents, WeightConfig, WeightParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A configuration problem, always naming the offending key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(key: &str, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        key: key.to_string(),
        message: message.into(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub dim: usize,
    pub extents: Vec<f64>,
    /// Interior nodes per axis.
    pub counts: Vec<usize>,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            extents: vec![1.0],
            counts: vec![100],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RegionConfig {
    /// One `[lo, hi]` interval per axis.
    pub omega: Vec<[f64; 2]>,
    pub omega0: Vec<[f64; 2]>,
}

impl Default for RegionConfig {
    fn default() -> Self {
        Self {
            omega: vec![[0.2, 0.5]],
            omega0: vec![[0.3, 0.4]],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    pub t_final: f64,
    pub steps: usize,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            t_final: 0.5,
            steps: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisName {
    General,
    CConst,
    BConst,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CoefficientConfig {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    /// When positive, `a` becomes `a + ` a random smooth field of this
    /// amplitude drawn from `seed`.
    pub a_random_amplitude: f64,
    pub hypothesis: HypothesisName,
}

impl Default for CoefficientConfig {
    fn default() -> Self {
        Self {
            a: 0.0,
            b: 1.0,
            c: 1.0,
            d: 0.0,
            a_random_amplitude: 0.0,
            hypothesis: HypothesisName::General,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearityKind {
    Zero,
    Linear,
    Sin,
    Arctan,
    Tanh,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityEntry {
    pub kind: NonlinearityKind,
    /// Slope for `linear`, amplitude otherwise.
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl NonlinearityEntry {
    pub fn build(&self) -> Nonlinearity<f64> {
        let scale = self.scale;
        match self.kind {
            NonlinearityKind::Zero => Nonlinearity::Zero,
            NonlinearityKind::Linear => Nonlinearity::Linear { slope: scale },
            NonlinearityKind::Sin => Nonlinearity::Sin { scale },
            NonlinearityKind::Arctan => Nonlinearity::Arctan { scale },
            NonlinearityKind::Tanh => Nonlinearity::Tanh { scale },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct NonlinearityConfig {
    pub big_f: NonlinearityEntry,
    pub small_f: NonlinearityEntry,
    pub b: f64,
    pub d: f64,
}

impl Default for NonlinearityConfig {
    fn default() -> Self {
        Self {
            big_f: NonlinearityEntry {
                kind: NonlinearityKind::Sin,
                scale: 1.0,
            },
            small_f: NonlinearityEntry {
                kind: NonlinearityKind::Linear,
                scale: 1.0,
            },
            b: 1.0,
            d: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsConfig {
    pub lambda: f64,
    pub sigma: f64,
    /// Carleman parameter; `null` selects `σ(T + T²)`.
    pub s: Option<f64>,
    /// `K` in the control weight `ρ(t) = exp(-2K/(T-t))`.
    pub big_k: f64,
    pub k_margin: f64,
    /// `[p, q]` per axis; `null` centres each profile in `ω₀`.
    pub exponents: Option<Vec<[f64; 2]>>,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        Self {
            lambda: 2.0,
            sigma: 1.0,
            s: None,
            big_k: 1.0,
            k_margin: 0.1,
            exponents: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum PlacementName {
    InParabolic,
    InElliptic,
}

impl PlacementName {
    pub fn build(self) -> Placement {
        match self {
            PlacementName::InParabolic => Placement::InParabolic,
            PlacementName::InElliptic => Placement::InElliptic,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct HumConfig {
    /// Terminal penalty weight.
    pub penalty: f64,
    /// Strictly decreasing list for `penalty-sweep`.
    pub penalty_list: Vec<f64>,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub placement: PlacementName,
    /// Mass on the `z` row (0 is the elliptic system).
    pub eps: f64,
    /// Finite-difference directions for the dual gradient check.
    pub gradient_directions: usize,
}

impl Default for HumConfig {
    fn default() -> Self {
        Self {
            penalty: 1e-6,
            penalty_list: vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8],
            cg_tol: 1e-10,
            cg_max_iter: 500,
            placement: PlacementName::InParabolic,
            eps: 0.0,
            gradient_directions: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RelaxationConfig {
    /// Strictly decreasing positive masses for `eps-sweep`.
    pub eps_list: Vec<f64>,
    /// Use the `nonlinearity` block through the fixed point.
    pub semilinear: bool,
}

impl Default for RelaxationConfig {
    fn default() -> Self {
        Self {
            eps_list: vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 1e-4],
            semilinear: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FixedPointConfig {
    pub theta: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// `null` disables the retry.
    pub fallback_theta: Option<f64>,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            theta: 1.0,
            tol: 1e-6,
            max_iter: 30,
            fallback_theta: Some(0.5),
            newton_tol: 1e-10,
            newton_max_iter: 25,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Zero,
    /// `Π sin(πx/L)`
    Sin,
    /// `Π sin(2πx/L)`
    Sin2,
    /// `Π x(L-x)/L²`, scaled to peak 1/4.
    Bump,
}

impl Profile {
    pub fn sample(self, mesh: &SpatialMesh<f64>, amplitude: f64) -> Vec<f64> {
        let pi = std::f64::consts::PI;
        let ext = mesh.extents().to_vec();
        let dim = mesh.dim();
        mesh.sample(|x| {
            let f = |a: usize| {
                let xi = x[a] / ext[a];
                match self {
                    Profile::Zero => 0.0,
                    Profile::Sin => (pi * xi).sin(),
                    Profile::Sin2 => (2.0 * pi * xi).sin(),
                    Profile::Bump => xi * (1.0 - xi),
                }
            };
            amplitude * (0..dim).map(f).product::<f64>()
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub y0: Profile,
    pub y0_amplitude: f64,
    /// Used when the `z` row carries a mass.
    pub z0: Profile,
    pub z0_amplitude: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            y0: Profile::Sin,
            y0_amplitude: 1.0,
            z0: Profile::Sin,
            z0_amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ForwardConfig {
    /// Amplitude of a random control on `ω` (0 disables it).
    pub control_amplitude: f64,
    /// Solve with the `nonlinearity` block instead of `coefficients`.
    pub nonlinear: bool,
    /// Terminal datum `φ(T)` for `solve-adjoint`.
    pub terminal: Profile,
}

impl Default for ForwardConfig {
    fn default() -> Self {
        Self {
            control_amplitude: 0.0,
            nonlinear: false,
            terminal: Profile::Sin,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ObservationName {
    Phi,
    Psi,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ObservabilityConfig {
    pub samples: usize,
    pub variant: ObservationName,
}

impl Default for ObservabilityConfig {
    fn default() -> Self {
        Self {
            samples: 64,
            variant: ObservationName::Phi,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GalerkinConfig {
    /// Increasing truncation orders.
    pub modes: Vec<usize>,
    pub control_amplitude: f64,
}

impl Default for GalerkinConfig {
    fn default() -> Self {
        Self {
            modes: vec![4, 8, 16, 32],
            control_amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub mesh: MeshConfig,
    pub region: RegionConfig,
    pub time: TimeConfig,
    pub coefficients: CoefficientConfig,
    pub nonlinearity: NonlinearityConfig,
    pub weights: WeightsConfig,
    pub hum: HumConfig,
    pub relaxation: RelaxationConfig,
    pub fixed_point: FixedPointConfig,
    pub initial: InitialConfig,
    pub forward: ForwardConfig,
    pub observability: ObservabilityConfig,
    pub galerkin: GalerkinConfig,
    pub seed: u64,
    /// Run directory; relative paths resolve against the working directory.
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mesh: MeshConfig::default(),
            region: RegionConfig::default(),
            time: TimeConfig::default(),
            coefficients: CoefficientConfig::default(),
            nonlinearity: NonlinearityConfig::default(),
            weights: WeightsConfig::default(),
            hum: HumConfig::default(),
            relaxation: RelaxationConfig::default(),
            fixed_point: FixedPointConfig::default(),
            initial: InitialConfig::default(),
            forward: ForwardConfig::default(),
            observability: ObservabilityConfig::default(),
            galerkin: GalerkinConfig::default(),
            seed: 42,
            output: PathBuf::from("out"),
        }
    }
}

/// Sets `path` (dotted) inside `root` to `raw`, parsed as JSON when
/// possible and as a string otherwise. Missing objects are created.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), ConfigError> {
    let Some((path, raw)) = assignment.split_once('=') else {
        return err(assignment, "override must look like key.path=value");
    };
    let path = path.trim();
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return err(path, "empty segment in override key");
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let mut node = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        let prefix = segments[..=i].join(".");
        if !node.is_object() {
            if node.is_null() {
                *node = Value::Object(Default::default());
            } else {
                return err(&prefix, "cannot descend into a non-object value");
            }
        }
        let map = node.as_object_mut().expect("object checked above");
        if i + 1 == segments.len() {
            map.insert(seg.to_string(), value);
            return Ok(());
        }
        node = map.entry(seg.to_string()).or_insert(Value::Null);
    }
    unreachable!("loop returns on the last segment")
}

impl ExperimentConfig {
    /// Parses a JSON tree, applies overrides, fills defaults and validates.
    pub fn from_value(mut root: Value, overrides: &[String]) -> Result<Self, ConfigError> {
        if !root.is_object() {
            return err("<root>", "config must be a JSON object");
        }
        for o in overrides {
            apply_override(&mut root, o)?;
        }
        let cfg: Self = serde_path_to_error::deserialize(root).map_err(|e| {
            let key = e.path().to_string();
            ConfigError {
                key: if key == "." { "<root>".into() } else { key },
                message: e.into_inner().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let root: Value = serde_json::from_str(text).map_err(|e| ConfigError {
            key: "<root>".into(),
            message: format!("malformed JSON: {e}"),
        })?;
        Self::from_value(root, overrides)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            key: "--config".into(),
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text, overrides)
    }

    /// Canonical JSON with every default filled in.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of [`canonical_json`](Self::canonical_json) with `output`
    /// cleared, hex encoded; moving a run elsewhere keeps its hash.
    pub fn hash(&self) -> String {
        let located = Self {
            output: PathBuf::new(),
            ..self.clone()
        };
        let digest = Sha256::digest(located.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.mesh;
        if !(m.dim == 1 || m.dim == 2) {
            return err("mesh.dim", format!("must be 1 or 2, got {}", m.dim));
        }
        if m.extents.len() != m.dim {
            return err("mesh.extents", format!("needs {} entries", m.dim));
        }
        if m.extents.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return err("mesh.extents", "entries must be positive");
        }
        if m.counts.len() != m.dim {
            return err("mesh.counts", format!("needs {} entries", m.dim));
        }
        if m.counts.iter().any(|&c| c < 3) {
            return err("mesh.counts", "need at least 3 interior nodes per axis");
        }
        for (key, list) in [("region.omega", &self.region.omega), ("region.omega0", &self.region.omega0)] {
            if list.len() != m.dim {
                return err(key, format!("needs one interval per axis ({})", m.dim));
            }
            for (a, iv) in list.iter().enumerate() {
                if !(iv[0] < iv[1] && iv[0] >= 0.0 && iv[1] <= m.extents[a]) {
                    return err(key, format!("interval {iv:?} on axis {a} is not inside (0, {})", m.extents[a]));
                }
            }
        }
        if !(self.time.t_final > 0.0 && self.time.t_final.is_finite()) {
            return err("time.t_final", "must be positive");
        }
        if self.time.steps < 2 {
            return err("time.steps", "need at least 2 steps");
        }
        for (key, v) in [
            ("coefficients.a", self.coefficients.a),
            ("coefficients.b", self.coefficients.b),
            ("coefficients.c", self.coefficients.c),
            ("coefficients.d", self.coefficients.d),
            ("nonlinearity.b", self.nonlinearity.b),
            ("nonlinearity.d", self.nonlinearity.d),
            ("nonlinearity.big_f.scale", self.nonlinearity.big_f.scale),
            ("nonlinearity.small_f.scale", self.nonlinearity.small_f.scale),
            ("initial.y0_amplitude", self.initial.y0_amplitude),
            ("initial.z0_amplitude", self.initial.z0_amplitude),
            ("forward.control_amplitude", self.forward.control_amplitude),
            ("galerkin.control_amplitude", self.galerkin.control_amplitude),
        ] {
            if !v.is_finite() {
                return err(key, "must be finite");
            }
        }
        if !(self.coefficients.a_random_amplitude >= 0.0) {
            return err("coefficients.a_random_amplitude", "must be >= 0");
        }
        let w = &self.weights;
        if !(w.lambda >= 0.0) {
            return err("weights.lambda", "must be >= 0");
        }
        if !(w.sigma > 0.0) {
            return err("weights.sigma", "must be > 0");
        }
        if !(w.big_k > 0.0) {
            return err("weights.big_k", "must be > 0");
        }
        if !(w.k_margin > 0.0) {
            return err("weights.k_margin", "must be > 0");
        }
        if let Some(e) = &w.exponents {
            if e.len() != m.dim {
                return err("weights.exponents", "needs one [p, q] pair per axis");
            }
        }
        let h = &self.hum;
        if !(h.penalty > 0.0) {
            return err("hum.penalty", "must be > 0");
        }
        if h.penalty_list.iter().any(|&p| !(p > 0.0)) || h.penalty_list.windows(2).any(|w| !(w[1] < w[0])) {
            return err("hum.penalty_list", "must be positive and strictly decreasing");
        }
        if !(h.cg_tol > 0.0) {
            return err("hum.cg_tol", "must be > 0");
        }
        if h.cg_max_iter == 0 {
            return err("hum.cg_max_iter", "must be >= 1");
        }
        if !(h.eps >= 0.0 && h.eps.is_finite()) {
            return err("hum.eps", "must be >= 0");
        }
        let r = &self.relaxation;
        if r.eps_list.iter().any(|&e| !(e > 0.0)) || r.eps_list.windows(2).any(|w| !(w[1] < w[0])) {
            return err("relaxation.eps_list", "must be positive and strictly decreasing");
        }
        let f = &self.fixed_point;
        for (key, th) in [("fixed_point.theta", Some(f.theta)), ("fixed_point.fallback_theta", f.fallback_theta)] {
            if let Some(th) = th {
                if !(th > 0.0 && th <= 1.0) {
                    return err(key, format!("must lie in (0, 1], got {th}"));
                }
            }
        }
        if !(f.tol > 0.0) {
            return err("fixed_point.tol", "must be > 0");
        }
        if f.max_iter == 0 {
            return err("fixed_point.max_iter", "must be >= 1");
        }
        if !(f.newton_tol > 0.0) {
            return err("fixed_point.newton_tol", "must be > 0");
        }
        if self.observability.samples == 0 {
            return err("observability.samples", "must be >= 1");
        }
        let g = &self.galerkin.modes;
        if g.is_empty() || g.windows(2).any(|w| w[1] <= w[0]) || g[0] == 0 {
            return err("galerkin.modes", "must be a non-empty increasing list of positive orders");
        }
        let dof: usize = m.counts.iter().product();
        if g.last().copied().unwrap_or(0) > dof {
            return err("galerkin.modes", format!("orders cannot exceed the {dof} mesh nodes"));
        }
        Ok(())
    }

    pub fn mesh(&self) -> nullctl::Result<SpatialMesh<f64>> {
        SpatialMesh::new(self.mesh.dim, &self.mesh.extents, &self.mesh.counts)
    }

    pub fn laplacian(&self, mesh: &SpatialMesh<f64>) -> nullctl::Result<DiscreteLaplacian<f64>> {
        DiscreteLaplacian::assemble(mesh)
    }

    pub fn region(&self, mesh: &SpatialMesh<f64>) -> nullctl::Result<ControlRegion<f64>> {
        let iv = |l: &[[f64; 2]]| l.iter().map(|p| (p[0], p[1])).collect::<Vec<_>>();
        ControlRegion::new(mesh, &iv(&self.region.omega), &iv(&self.region.omega0))
    }

    pub fn grid(&self) -> nullctl::Result<TimeGrid<f64>> {
        TimeGrid::new(self.time.t_final, self.time.steps)
    }

    pub fn coefficients(&self, mesh: &SpatialMesh<f64>, grid: &TimeGrid<f64>) -> CoefficientSet<f64> {
        let c = &self.coefficients;
        let hypothesis = match c.hypothesis {
            HypothesisName::General => Hypothesis::General,
            HypothesisName::CConst => Hypothesis::CConst,
            HypothesisName::BConst => Hypothesis::BConst,
        };
        let mut set = CoefficientSet::constant(c.a, c.b, c.c, c.d, hypothesis);
        if c.a_random_amplitude > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            let field = random_smooth_field(mesh, grid, &mut rng, c.a_random_amplitude);
            set.a = Coefficient::SpaceTime(field.map(|v| v + c.a));
        }
        set
    }

    pub fn nonlinear_spec(&self) -> NonlinearSpec<f64> {
        let n = &self.nonlinearity;
        NonlinearSpec {
            big_f: n.big_f.build(),
            small_f: n.small_f.build(),
            b: n.b,
            d: n.d,
        }
    }

    pub fn y0(&self, mesh: &SpatialMesh<f64>) -> Vec<f64> {
        self.initial.y0.sample(mesh, self.initial.y0_amplitude)
    }

    pub fn z0(&self, mesh: &SpatialMesh<f64>) -> Vec<f64> {
        self.initial.z0.sample(mesh, self.initial.z0_amplitude)
    }

    pub fn cg(&self) -> CgOptions<f64> {
        CgOptions {
            tol: self.hum.cg_tol,
            max_iter: self.hum.cg_max_iter,
        }
    }

    pub fn target(&self) -> Target {
        if self.hum.eps > 0.0 {
            Target::YZ
        } else {
            Target::Y
        }
    }

    pub fn newton(&self) -> NewtonOptions<f64> {
        NewtonOptions {
            tol: self.fixed_point.newton_tol,
            max_iter: self.fixed_point.newton_max_iter,
            guess_offset: 0.0,
        }
    }

    pub fn weight_params(&self, mesh: &SpatialMesh<f64>, region: &ControlRegion<f64>) -> nullctl::Result<WeightParams<f64>> {
        let w = &self.weights;
        let exps: Vec<ShapeExponents<f64>> = match &w.exponents {
            Some(list) => list.iter().map(|e| ShapeExponents { p: e[0], q: e[1] }).collect(),
            None => region
                .omega0()
                .iter()
                .zip(mesh.extents())
                .map(|(&(lo, hi), &len)| ShapeExponents::centered_at(0.5 * (lo + hi) / len))
                .collect::<nullctl::Result<_>>()?,
        };
        let alpha0 = build_alpha0(mesh, region, &exps)?;
        WeightParams::new(
            alpha0,
            self.time.t_final,
            &WeightConfig {
                lambda: w.lambda,
                sigma: w.sigma,
                s: w.s,
                k_margin: w.k_margin,
                big_k: w.big_k,
            },
        )
    }
}
