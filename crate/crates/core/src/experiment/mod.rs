//! Experiment configuration and the synth / recover / report pipeline behind
//! the command-line tool.

pub mod fixtures;
pub mod verify;

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Admissibility, Error, Result};
use crate::forward::{
    add_noise, measure_grid, sha256_hex, AnalyticJets, Backend, JetProvider, KGrid, MeasurementSet, Model, ModelConfig,
    SampledJets,
};
use crate::motion::{Motion, MotionSpec, TimeGrid, Trajectory};
use crate::phantom::{
    dt_pointset_certificate, generate_asymmetric_pointset, pb_pointset_certificate, BlobProfile, Phantom, Placement,
};
use crate::recovery::{
    dt_phi_profile, pb_phi_profile, recover_trajectory, Ambiguity, Branch, RecoveryResult, SolverConfig,
};
use crate::so3::sigma_velocity;

pub use verify::{verify, Check, Scope, VerifyReport};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;
pub const RESULT_FORMAT_VERSION: u32 = 1;

pub const PHANTOM_FILE: &str = "phantom.json";
pub const TRAJECTORY_FILE: &str = "trajectory.json";
pub const MEASUREMENT_FILE: &str = "measurements.bin";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RESULT_FILE: &str = "result.json";
pub const STEPS_FILE: &str = "steps.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const PROFILE_FILE: &str = "phi_profile.csv";
pub const TIMING_FILE: &str = "timing.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PhantomSpec {
    /// Blob phantom on a seeded asymmetric point set.
    Generated {
        points: usize,
        placement: Placement,
        profile: BlobProfile,
        support_radius: f64,
    },
    /// A phantom document; relative paths resolve against the config file.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionConfig {
    #[serde(flatten)]
    pub grid: TimeGrid,
    pub spec: MotionSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    Json,
    Csv,
}

fn default_formats() -> Vec<ReportFormat> {
    vec![ReportFormat::Json, ReportFormat::Csv]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub name: String,
    pub seed: u64,
    pub model: ModelConfig,
    pub phantom: PhantomSpec,
    pub motion: MotionConfig,
    /// Cartesian frequency grid of the stored measurements.
    pub measurement: KGrid,
    #[serde(default)]
    pub solver: Option<SolverConfig>,
    #[serde(default)]
    pub noise_level: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub report_formats: Vec<ReportFormat>,
    /// Directory of the config file, for resolving relative paths.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Smallest point set the determinant certificates are built for.
pub const MIN_POINTS: usize = 8;

fn too_few(n: usize) -> Error {
    Error::not_admissible(
        Admissibility::TooFewPoints,
        format!("need at least {MIN_POINTS} points, got {n}"),
    )
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let (line, col) = e.span().map_or((0, 0), |s| line_col(text, s.start));
            Error::Schema(format!("line {line} column {col}: {}", e.message()))
        })?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        ExperimentConfig::from_toml(&text, &base).map_err(|e| match e {
            Error::Schema(m) => Error::Schema(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "schema_version {} (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let schema = |e: Error| Error::Schema(e.to_string());
        self.model.validate().map_err(schema)?;
        self.motion.grid.validate().map_err(schema)?;
        self.motion.spec.validate().map_err(schema)?;
        if let Some(s) = &self.solver {
            s.validate().map_err(schema)?;
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return Err(Error::Schema("noise_level must be nonnegative".into()));
        }
        let g = self.measurement;
        if g.n < 8 || !(g.extent > 0.0) {
            return Err(Error::Schema("measurement grid needs n ≥ 8 and positive extent".into()));
        }
        let reach = match self.model.model {
            Model::Dt { k0 } => crate::forward::DT_BAND_FRACTION * k0,
            Model::Pb => self.model.lambda_max,
        };
        if reach + 3.0 * g.spacing() > g.extent {
            return Err(Error::Schema(format!(
                "measurement extent {} does not cover radial lines of length {reach} plus the interpolation stencil",
                g.extent
            )));
        }
        if let Model::Dt { k0 } = self.model.model {
            if reach + 3.0 * std::f64::consts::SQRT_2 * g.spacing() >= k0 {
                return Err(Error::Schema(format!(
                    "measurement spacing {:.3} lets interpolation stencils leave the band |k| < {k0}",
                    g.spacing()
                )));
            }
        }
        if let PhantomSpec::File { path } = &self.phantom {
            let p = self.base_dir.join(path);
            if !p.exists() {
                return Err(Error::Schema(format!("phantom file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn solver_config(&self, backend: RecoveryBackend) -> SolverConfig {
        self.solver.unwrap_or(match backend {
            RecoveryBackend::Analytic => SolverConfig::analytic(),
            RecoveryBackend::Sampled => SolverConfig::finite_difference(),
        })
    }

    pub fn output_dir(&self) -> PathBuf {
        match &self.output_dir {
            Some(p) if p.is_absolute() => p.clone(),
            Some(p) => self.base_dir.join(p),
            None => PathBuf::from("out").join(&self.name),
        }
    }

    /// The backend implied by the model config when none is requested.
    pub fn default_backend(&self) -> RecoveryBackend {
        match self.model.backend {
            Backend::Analytic => RecoveryBackend::Analytic,
            Backend::FiniteDifference { .. } => RecoveryBackend::Sampled,
        }
    }

    /// Deterministic phantom, with its admissibility checked for the model.
    pub fn build_phantom(&self) -> Result<Phantom> {
        let ph = match &self.phantom {
            PhantomSpec::Generated {
                points,
                placement,
                profile,
                support_radius,
            } => {
                if *points < MIN_POINTS {
                    return Err(too_few(*points));
                }
                let set = generate_asymmetric_pointset(*points, self.seed, *placement)?;
                Phantom::balanced(set, *profile, *support_radius)?
            }
            PhantomSpec::File { path } => Phantom::load(&self.base_dir.join(path))?,
        };
        if ph.points.len() < MIN_POINTS {
            return Err(too_few(ph.points.len()));
        }
        let cert = match self.model.model {
            Model::Dt { .. } => dt_pointset_certificate(&ph.points)?,
            Model::Pb => pb_pointset_certificate(&ph.points)?,
        };
        if !cert.passed {
            let kind = match self.model.model {
                Model::Dt { .. } => Admissibility::DtCertificate,
                Model::Pb => Admissibility::PbCertificate,
            };
            return Err(Error::not_admissible(
                kind,
                format!("violating tuple {:?}", cert.violation),
            ));
        }
        Ok(ph)
    }

    pub fn build_motion(&self) -> Result<Motion> {
        Motion::new(self.motion.spec.clone(), self.motion.grid)
    }
}

/// Where recovery takes its jets from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecoveryBackend {
    /// Chain-rule jets from the phantom and motion regenerated from the config.
    Analytic,
    /// Interpolated jets from the stored measurement grid.
    Sampled,
}

impl RecoveryBackend {
    pub fn name(self) -> &'static str {
        match self {
            RecoveryBackend::Analytic => "analytic",
            RecoveryBackend::Sampled => "fd",
        }
    }
}

/// Write through a `.partial` sibling renamed into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    let partial = path.with_file_name(name);
    std::fs::write(&partial, bytes).map_err(|e| Error::io(&partial, e))?;
    std::fs::rename(&partial, path).map_err(|e| Error::io(path, e))
}

/// Pretty JSON with a trailing newline, as written to every artifact.
pub fn to_json_string<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn json<T: Serialize>(v: &T) -> Vec<u8> {
    to_json_string(v).into_bytes()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub name: String,
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub seed: u64,
    pub model: String,
    pub artifacts: Vec<Artifact>,
}

/// Serialized phantom and trajectory exactly as written by `synth`.
fn truth_documents(ph: &Phantom, motion: &Motion) -> (Vec<u8>, Vec<u8>) {
    (ph.to_json().into_bytes(), json(&motion.trajectory))
}

/// Generate phantom, trajectory and measurements into `out`.
pub fn synth(cfg: &ExperimentConfig, out: &Path) -> Result<Manifest> {
    let ph = cfg.build_phantom()?;
    let motion = cfg.build_motion()?;
    let (ph_doc, traj_doc) = truth_documents(&ph, &motion);
    let mut ms = measure_grid(&ph, &motion, &cfg.model, cfg.measurement)?;
    if cfg.noise_level > 0.0 {
        ms = add_noise(&ms, cfg.noise_level, cfg.seed)?;
    }
    ms.header.phantom_sha256 = Some(sha256_hex(&ph_doc));
    ms.header.trajectory_sha256 = Some(sha256_hex(&traj_doc));
    let ms_bytes = ms.to_bytes();

    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut artifacts = Vec::new();
    for (name, file, bytes) in [
        ("phantom", PHANTOM_FILE, &ph_doc),
        ("trajectory", TRAJECTORY_FILE, &traj_doc),
        ("measurements", MEASUREMENT_FILE, &ms_bytes),
    ] {
        write_atomic(&out.join(file), bytes)?;
        artifacts.push(Artifact {
            name: name.into(),
            file: file.into(),
            sha256: sha256_hex(bytes),
        });
    }
    let manifest = Manifest {
        name: cfg.name.clone(),
        seed: cfg.seed,
        model: cfg.model.model.name().into(),
        artifacts,
    };
    write_atomic(&out.join(MANIFEST_FILE), &json(&manifest))?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub experiment: String,
    pub seed: u64,
    pub backend: RecoveryBackend,
    pub phantom_sha256: Option<String>,
    pub trajectory_sha256: Option<String>,
    pub payload_sha256: String,
    pub convention: String,
}

/// Everything `report` needs to rebuild the per-step and summary reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub format_version: u32,
    pub provenance: Provenance,
    pub result: RecoveryResult,
    /// True `ω` on the grid, when the experiment is synthetic.
    pub reference_omega: Option<Vec<Vector3<f64>>>,
}

impl ResultDocument {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: ResultDocument = serde_json::from_str(&text).map_err(|e| {
            Error::Schema(format!(
                "{} line {} column {}: {e}",
                path.display(),
                e.line(),
                e.column()
            ))
        })?;
        if doc.format_version != RESULT_FORMAT_VERSION {
            return Err(Error::Schema(format!("result format version {}", doc.format_version)));
        }
        Ok(doc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub step: usize,
    pub t: f64,
    pub omega_hat: [f64; 3],
    /// `‖ω̂ − ω‖` against the matched branch of the reference.
    pub omega_error: Option<f64>,
    pub residual: f64,
    pub ambiguity: Ambiguity,
    pub condition: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub steps: usize,
    pub flagged_steps: usize,
    pub max_omega_error: Option<f64>,
    pub mean_omega_error: Option<f64>,
    pub max_residual: f64,
    pub equivalence_distance: Option<f64>,
    pub branch: Option<Branch>,
}

impl Summary {
    /// Summary statistics from per-step rows.
    pub fn from_rows(rows: &[StepRow], equivalence_distance: Option<f64>, branch: Option<Branch>) -> Summary {
        let errs: Option<Vec<f64>> = rows.iter().map(|r| r.omega_error).collect();
        let errs = errs.filter(|e| !e.is_empty());
        Summary {
            steps: rows.len(),
            flagged_steps: rows.iter().filter(|r| !r.ambiguity.is_unique()).count(),
            max_omega_error: errs.as_ref().map(|e| e.iter().cloned().fold(0.0, f64::max)),
            mean_omega_error: errs.as_ref().map(|e| e.iter().sum::<f64>() / e.len() as f64),
            max_residual: rows.iter().map(|r| r.residual).fold(0.0, f64::max),
            equivalence_distance,
            branch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub rows: Vec<StepRow>,
    pub summary: Summary,
    pub provenance: Provenance,
}

impl ReportRecord {
    pub fn from_document(doc: &ResultDocument) -> ReportRecord {
        let res = &doc.result;
        let sigma = res.branch == Some(Branch::Sigma);
        let rows: Vec<StepRow> = res
            .estimates
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let omega_error = doc.reference_omega.as_ref().and_then(|w| w.get(i)).map(|w| {
                    let w = if sigma { sigma_velocity(w) } else { *w };
                    (e.omega_hat - w).norm()
                });
                StepRow {
                    step: i,
                    t: res.times[i],
                    omega_hat: [e.omega_hat.x, e.omega_hat.y, e.omega_hat.z],
                    omega_error,
                    residual: e.residual,
                    ambiguity: e.ambiguity,
                    condition: e.condition,
                    ratio: e.ratio,
                }
            })
            .collect();
        let summary = Summary::from_rows(&rows, res.equivalence_distance, res.branch);
        ReportRecord {
            rows,
            summary,
            provenance: doc.provenance.clone(),
        }
    }

    pub const CSV_HEADER: &'static str =
        "step,t,omega_hat_x,omega_hat_y,omega_hat_z,omega_error,residual,ambiguity,condition,ratio";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let err = r.omega_error.map(|e| format!("{e:e}")).unwrap_or_default();
            s.push_str(&format!(
                "{},{},{:e},{:e},{:e},{},{:e},{},{:e},{:e}\n",
                r.step,
                r.t,
                r.omega_hat[0],
                r.omega_hat[1],
                r.omega_hat[2],
                err,
                r.residual,
                r.ambiguity.name(),
                r.condition,
                r.ratio
            ));
        }
        s
    }

    /// Write the summary and per-step files requested by `formats`.
    pub fn write(&self, out: &Path, formats: &[ReportFormat]) -> Result<()> {
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        if formats.contains(&ReportFormat::Json) {
            let doc = serde_json::json!({ "summary": self.summary, "provenance": self.provenance });
            write_atomic(&out.join(SUMMARY_FILE), &json(&doc))?;
        }
        if formats.contains(&ReportFormat::Csv) {
            write_atomic(&out.join(STEPS_FILE), self.to_csv().as_bytes())?;
        }
        Ok(())
    }
}

/// Outcome of `recover`.
#[derive(Debug, Clone)]
pub struct RecoverOutcome {
    pub document: ResultDocument,
    pub report: ReportRecord,
    pub runtime_seconds: f64,
}

impl RecoverOutcome {
    pub fn is_unique(&self) -> bool {
        self.document.result.is_unique()
    }
}

/// Check that a measurement set belongs to the configured experiment.
fn check_header(cfg: &ExperimentConfig, ms: &MeasurementSet, ph_doc: &[u8], traj_doc: &[u8]) -> Result<()> {
    if ms.header.model != cfg.model.model {
        return Err(Error::Mismatch(format!(
            "measurement model {:?} differs from config model {:?}",
            ms.header.model, cfg.model.model
        )));
    }
    let times = cfg.motion.grid.times();
    if ms.header.times.len() != times.len() || ms.header.times.iter().zip(&times).any(|(a, b)| (a - b).abs() > 1e-12) {
        return Err(Error::Mismatch("measurement time grid differs from config".into()));
    }
    if ms.header.phantom_sha256.as_deref() != Some(sha256_hex(ph_doc).as_str()) {
        return Err(Error::Mismatch(
            "phantom hash differs from the regenerated phantom".into(),
        ));
    }
    if ms.header.trajectory_sha256.as_deref() != Some(sha256_hex(traj_doc).as_str()) {
        return Err(Error::Mismatch(
            "trajectory hash differs from the regenerated motion".into(),
        ));
    }
    Ok(())
}

/// Recover the motion and write result, reports and `φ` profiles into `out`.
pub fn recover(
    cfg: &ExperimentConfig,
    measurements: &Path,
    backend: RecoveryBackend,
    out: &Path,
) -> Result<RecoverOutcome> {
    let ms = MeasurementSet::load(measurements)?;
    let ph = cfg.build_phantom()?;
    let motion = cfg.build_motion()?;
    let (ph_doc, traj_doc) = truth_documents(&ph, &motion);
    check_header(cfg, &ms, &ph_doc, &traj_doc)?;
    let solver = cfg.solver_config(backend);
    let analytic_cfg = ModelConfig {
        backend: Backend::Analytic,
        ..cfg.model
    };
    let jets: Box<dyn JetProvider + '_> = match backend {
        RecoveryBackend::Analytic => Box::new(AnalyticJets::new(&ph, &motion, analytic_cfg)?),
        RecoveryBackend::Sampled => Box::new(SampledJets::new(&ms, cfg.model)?),
    };
    let start = std::time::Instant::now();
    let result = recover_trajectory(jets.as_ref(), &solver, Some(&motion.trajectory))?;
    let runtime_seconds = start.elapsed().as_secs_f64();

    let document = ResultDocument {
        format_version: RESULT_FORMAT_VERSION,
        provenance: Provenance {
            experiment: cfg.name.clone(),
            seed: cfg.seed,
            backend,
            phantom_sha256: ms.header.phantom_sha256.clone(),
            trajectory_sha256: ms.header.trajectory_sha256.clone(),
            payload_sha256: ms.header.payload_sha256.clone(),
            convention: ms.header.convention.clone(),
        },
        result,
        reference_omega: Some(motion.trajectory.omega.clone()),
    };
    let report = ReportRecord::from_document(&document);

    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_atomic(&out.join(RESULT_FILE), &json(&document))?;
    report.write(out, &cfg.report_formats)?;
    write_atomic(
        &out.join(PROFILE_FILE),
        phi_profiles(jets.as_ref(), &solver)?.as_bytes(),
    )?;
    write_atomic(
        &out.join(TIMING_FILE),
        &json(&serde_json::json!({ "recover_seconds": runtime_seconds })),
    )?;
    Ok(RecoverOutcome {
        document,
        report,
        runtime_seconds,
    })
}

/// Residual-vs-azimuth curves at the first, middle and last step.
fn phi_profiles(jets: &dyn JetProvider, solver: &SolverConfig) -> Result<String> {
    let n = jets.times().len();
    let mut s = String::from("step,phi,residual\n");
    for i in [0, n / 2, n - 1] {
        let prof = match jets.config().model {
            Model::Dt { .. } => dt_phi_profile(jets, i, solver)?,
            Model::Pb => pb_phi_profile(jets, i, solver)?,
        };
        for (phi, r) in prof {
            s.push_str(&format!("{i},{phi},{r:e}\n"));
        }
    }
    Ok(s)
}

/// Rebuild the reports of a stored result.
pub fn report(result: &Path, out: &Path, formats: &[ReportFormat]) -> Result<ReportRecord> {
    let doc = ResultDocument::load(result)?;
    let rec = ReportRecord::from_document(&doc);
    rec.write(out, formats)?;
    Ok(rec)
}

/// Size the global worker pool; only the first call has an effect.
pub fn configure_threads(n: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))
}

/// Reference trajectory of a synthetic experiment, for library users.
pub fn reference_trajectory(cfg: &ExperimentConfig) -> Result<Trajectory> {
    Ok(cfg.build_motion()?.trajectory)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
schema_version = 1
name = "small"
seed = 3

[model]
radial_samples = 12
lambda_max = 0.0
model = { kind = "dt", k0 = 10.0 }
backend = { kind = "analytic" }

[phantom]
kind = "generated"
points = 8
placement = { kind = "ball", radius = 0.5 }
profile = { kind = "gaussian", sigma = 0.08 }
support_radius = 1.0

[motion]
t_start = 0.0
t_end = 0.2
n_steps = 10
spec = { kind = "analytic-omega", omega = [{ poly = [0.6] }, { poly = [0.3] }, { poly = [1.0] }] }

[measurement]
n = 96
extent = 9.9
"#;

    #[test]
    fn parses_and_validates() {
        let cfg = ExperimentConfig::from_toml(SMALL, Path::new(".")).unwrap();
        assert_eq!(cfg.motion.grid.n_steps, 10);
        assert_eq!(cfg.report_formats, default_formats());
    }

    #[test]
    fn schema_errors_carry_the_line() {
        let bad = SMALL.replace("seed = 3", "seed = \"three\"");
        match ExperimentConfig::from_toml(&bad, Path::new(".")) {
            Err(Error::Schema(m)) => assert!(m.starts_with("line 4"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn short_grid_extent_is_rejected() {
        let bad = SMALL.replace("extent = 9.9", "extent = 9.0");
        assert!(matches!(
            ExperimentConfig::from_toml(&bad, Path::new(".")),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn too_few_points_for_dt() {
        let cfg = ExperimentConfig::from_toml(&SMALL.replace("points = 8", "points = 7"), Path::new(".")).unwrap();
        match cfg.build_phantom() {
            Err(Error::NotAdmissible { kind, .. }) => assert_eq!(kind, Admissibility::TooFewPoints),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn summary_matches_rows() {
        let row = |i: usize, e: f64| StepRow {
            step: i,
            t: i as f64,
            omega_hat: [0.0; 3],
            omega_error: Some(e),
            residual: e,
            ambiguity: Ambiguity::Unique,
            condition: 1.0,
            ratio: 100.0,
        };
        let s = Summary::from_rows(&[row(0, 1.0), row(1, 3.0)], None, None);
        assert_eq!(s.max_omega_error, Some(3.0));
        assert_eq!(s.mean_omega_error, Some(2.0));
        assert_eq!(s.flagged_steps, 0);
    }
}
