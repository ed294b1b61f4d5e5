//! Command implementations behind the `nfr` binary.
//!
//! Every command that writes files also writes a TOML run manifest with the
//! fully resolved configuration, SHA-256 digests of inputs and outputs, the
//! toolkit version and the seed. When a command fails, the files it already
//! wrote are removed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::eval::{chamfer_metric, euclidean_recall, geodesic_error, uniform_thresholds, EvalReport};
use crate::features::{load_features, save_basis};
use crate::fmaps::{check_prop1, PointMap, Prop1Options};
use crate::geometry::io::{load_index_list, provenance_path, save_index_list};
use crate::geometry::primitives::permuted;
use crate::geometry::{
    center_and_orient, geodesic_matrix, load_cloud, load_mesh, sample_views, save_cloud, save_mesh,
    Mesh, PointCloud, PointSet, ViewSampling,
};
use crate::geometry::icosahedron_directions;
use crate::registration::{
    register_with, spectral_target_features, FeatureInputs, FeatureKind, Prepared, RegistrationConfig,
    RegistrationResult,
};
use crate::defgraph::default_node_count;
use crate::spectral::{eigenbasis, Embedding};
use crate::{Error, Mat3, Result, Vec3};

/// Exit status for malformed input, missing files or invalid configuration.
pub const EXIT_INPUT: i32 = 2;
/// Exit status when the correspondence filter rejects every pair.
pub const EXIT_NO_CORRESPONDENCES: i32 = 3;
/// Exit status when the energy becomes non-finite.
pub const EXIT_NON_FINITE: i32 = 4;
/// Exit status for any other failure.
pub const EXIT_OTHER: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "nfr", version, about = "Non-rigid registration of meshes to full or partial point clouds")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "NFR_THREADS")]
    pub threads: Option<usize>,
    /// Seed for every stochastic choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Log verbosity; repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute a Laplacian eigenbasis and write it as an NFRM file.
    Embed(EmbedArgs),
    /// Deform a source mesh onto a target point cloud.
    Register(RegisterArgs),
    /// Map cloud A to cloud B by registering a template mesh to both.
    Match(MatchArgs),
    /// Render partial point clouds of a mesh from icosahedron views.
    PartialSample(PartialSampleArgs),
    /// Evaluate maps and point sets against ground truth.
    Eval(EvalArgs),
    /// Check that the full-shape functional map stays optimal on subsets.
    Prop1Check(Prop1Args),
}

#[derive(Debug, Args, Serialize)]
pub struct EmbedArgs {
    /// Input mesh (.off or .ply).
    #[arg(long)]
    pub mesh: PathBuf,
    /// Number of eigenpairs.
    #[arg(long, default_value_t = crate::spectral::DEFAULT_K)]
    pub k: usize,
    /// Output NFRM file.
    #[arg(long)]
    pub out: PathBuf,
}

/// Settings shared by `register` and `match`.
#[derive(Debug, Args, Serialize)]
pub struct ConfigArgs {
    /// TOML registration config; unset keys take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. `--set tau=0.1` or `--set stage2.arap=0.5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Use the one-sided Chamfer term for partial targets.
    #[arg(long)]
    pub partial: bool,
    /// Leave both shapes in their input frames instead of centring them.
    #[arg(long)]
    pub no_align: bool,
    /// Row-major source orientation undone before registration (9 comma-separated numbers).
    #[arg(long, value_delimiter = ',', value_name = "R00,R01,...,R22")]
    pub source_rotation: Option<Vec<f64>>,
    /// Row-major target orientation undone before registration (9 comma-separated numbers).
    #[arg(long, value_delimiter = ',', value_name = "R00,R01,...,R22")]
    pub target_rotation: Option<Vec<f64>>,
}

#[derive(Debug, Args, Serialize)]
pub struct RegisterArgs {
    /// Source mesh to deform (.off or .ply).
    #[arg(long)]
    pub source: PathBuf,
    /// Target point cloud (.xyz, .ply or .off).
    #[arg(long)]
    pub target: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Mesh the target was sampled from; required for spectral features.
    #[arg(long)]
    pub target_mesh: Option<PathBuf>,
    /// External target features (NFRM); selects the external provider.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// External source features (NFRM), used with `--features`.
    #[arg(long)]
    pub source_features: Option<PathBuf>,
    /// Ground-truth target→source map; reports the geodesic error.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Extension of the deformed mesh file.
    #[arg(long, default_value = "off")]
    pub mesh_format: String,
}

#[derive(Debug, Args, Serialize)]
pub struct MatchArgs {
    /// First point cloud.
    #[arg(long)]
    pub a: PathBuf,
    /// Second point cloud.
    #[arg(long)]
    pub b: PathBuf,
    /// Template mesh registered to both clouds.
    #[arg(long)]
    pub template: PathBuf,
    /// Output file: for every point of A, an index into B.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct PartialSampleArgs {
    /// Mesh to sample.
    #[arg(long)]
    pub mesh: PathBuf,
    /// Number of icosahedron views (at most 12).
    #[arg(long, default_value_t = 12)]
    pub views: usize,
    /// Cap on points per view.
    #[arg(long)]
    pub points_per_view: Option<usize>,
    /// Pixel grid resolution per view.
    #[arg(long, default_value_t = 256)]
    pub resolution: usize,
    /// Random sub-pixel ray offsets.
    #[arg(long)]
    pub jitter: bool,
    /// Replace ray hits by their nearest mesh vertices.
    #[arg(long)]
    pub snap: bool,
    /// Output directory for `view_NN.xyz` files and provenance sidecars.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// Source mesh for geodesic errors.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Predicted target→source map.
    #[arg(long, requires_all = ["mesh", "gt"])]
    pub pred: Option<PathBuf>,
    /// Ground-truth target→source map.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Largest geodesic-curve threshold (normalized units).
    #[arg(long, default_value_t = 0.25)]
    pub curve_max: f64,
    /// Number of curve thresholds from 0 to `--curve-max`.
    #[arg(long, default_value_t = 26)]
    pub curve_points: usize,
    /// Write the geodesic error curve as CSV.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    /// Matched point positions for Euclidean recall.
    #[arg(long, requires = "gt_points")]
    pub pred_points: Option<PathBuf>,
    /// Ground-truth point positions for Euclidean recall.
    #[arg(long)]
    pub gt_points: Option<PathBuf>,
    /// Recall thresholds in model units.
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.10])]
    pub thresholds: Vec<f64>,
    /// First point set for the Chamfer metric.
    #[arg(long, requires = "chamfer_b")]
    pub chamfer_a: Option<PathBuf>,
    /// Second point set for the Chamfer metric.
    #[arg(long)]
    pub chamfer_b: Option<PathBuf>,
    /// Also write the report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct Prop1Args {
    /// Source mesh.
    #[arg(long)]
    pub mesh: PathBuf,
    /// Target mesh; a seeded vertex permutation of `--mesh` when omitted.
    #[arg(long, requires = "map")]
    pub target: Option<PathBuf>,
    /// Ground-truth target→source map for `--target`.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Number of eigenpairs.
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    /// Subset sizes as fractions of the target.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.5, 0.9])]
    pub fractions: Vec<f64>,
    /// Random subsets per fraction.
    #[arg(long, default_value_t = 3)]
    pub trials: usize,
    /// Also write the report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Maps an error to the process exit status.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NoCorrespondences { .. } => EXIT_NO_CORRESPONDENCES,
        Error::NonFiniteEnergy { .. } => EXIT_NON_FINITE,
        Error::ConvergenceFailure(_) | Error::RankDeficient { .. } | Error::SingularSystem(_) => EXIT_OTHER,
        _ => EXIT_INPUT,
    }
}

/// Runs a parsed command line, printing results to stdout. Returns the exit
/// status.
pub fn run(cli: Cli) -> i32 {
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let mut session = Session::new(&cli);
    let result = match &cli.command {
        Command::Embed(a) => session.embed(a),
        Command::Register(a) => session.register(a),
        Command::Match(a) => session.match_clouds(a),
        Command::PartialSample(a) => session.partial_sample(a),
        Command::Eval(a) => session.eval(a),
        Command::Prop1Check(a) => session.prop1(a),
    };
    match result.and_then(|text| session.finish().map(|_| text)) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            session.discard();
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[derive(Debug, Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

/// Record of one invocation.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    command: String,
    version: String,
    seed: u64,
    arguments: toml::Table,
    config: Option<toml::Table>,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

/// Tracks inputs and written files of one command.
struct Session {
    seed: u64,
    manifest_path: Option<PathBuf>,
    manifest: RunManifest,
    written: Vec<PathBuf>,
}

fn digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn to_table<T: Serialize>(v: &T) -> Result<toml::Table> {
    toml::Table::try_from(v).map_err(|e| Error::InvalidConfig(e.to_string()))
}

impl Session {
    fn new(cli: &Cli) -> Self {
        let command = match &cli.command {
            Command::Embed(_) => "embed",
            Command::Register(_) => "register",
            Command::Match(_) => "match",
            Command::PartialSample(_) => "partial-sample",
            Command::Eval(_) => "eval",
            Command::Prop1Check(_) => "prop1-check",
        };
        let arguments = match &cli.command {
            Command::Embed(a) => to_table(a),
            Command::Register(a) => to_table(a),
            Command::Match(a) => to_table(a),
            Command::PartialSample(a) => to_table(a),
            Command::Eval(a) => to_table(a),
            Command::Prop1Check(a) => to_table(a),
        }
        .unwrap_or_default();
        Self {
            seed: cli.seed,
            manifest_path: None,
            manifest: RunManifest {
                command: command.into(),
                version: env!("CARGO_PKG_VERSION").into(),
                seed: cli.seed,
                arguments,
                config: None,
                inputs: Vec::new(),
                outputs: Vec::new(),
            },
            written: Vec::new(),
        }
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        let sha256 = digest(path)?;
        self.manifest.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256,
        });
        Ok(())
    }

    fn load_mesh(&mut self, path: &Path) -> Result<Mesh> {
        self.input(path)?;
        load_mesh(path)
    }

    fn load_cloud(&mut self, path: &Path) -> Result<PointCloud> {
        self.input(path)?;
        let side = provenance_path(path);
        if side.exists() {
            self.input(&side)?;
        }
        load_cloud(path)
    }

    fn load_indices(&mut self, path: &Path) -> Result<Vec<usize>> {
        self.input(path)?;
        load_index_list(path)
    }

    /// Registers a file about to be written, so it is removed on failure.
    fn output(&mut self, path: &Path) {
        self.written.push(path.to_path_buf());
    }

    fn create_dir(&mut self, dir: &Path) -> Result<()> {
        if !dir.exists() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            self.output(dir);
        }
        Ok(())
    }

    fn write_text(&mut self, path: &Path, text: &str) -> Result<()> {
        self.output(path);
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Writes the manifest and records output digests.
    fn finish(&mut self) -> Result<()> {
        let Some(path) = self.manifest_path.clone() else {
            return Ok(());
        };
        for p in &self.written {
            if p.is_file() {
                self.manifest.outputs.push(FileDigest {
                    path: p.display().to_string(),
                    sha256: digest(p)?,
                });
            }
        }
        let text = toml::to_string(&self.manifest).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        self.write_text(&path, &text)
    }

    /// Removes everything written so far, files before directories.
    fn discard(&mut self) {
        for p in self.written.iter().rev() {
            let _ = if p.is_dir() { fs::remove_dir(p) } else { fs::remove_file(p) };
        }
        self.written.clear();
    }

    fn embed(&mut self, a: &EmbedArgs) -> Result<String> {
        let mesh = self.load_mesh(&a.mesh)?;
        let basis = eigenbasis(&mesh, a.k)?;
        self.output(&a.out);
        save_basis(&basis, &a.out)?;
        self.manifest_path = Some(sibling(&a.out, "manifest.toml"));
        let mut s = String::new();
        writeln!(s, "k={}", basis.k()).unwrap();
        for (i, mu) in basis.eigenvalues().iter().enumerate() {
            writeln!(s, "mu[{i}]={mu:e}").unwrap();
        }
        Ok(s)
    }

    fn resolve_config(&mut self, a: &ConfigArgs, source: &Mesh) -> Result<RegistrationConfig> {
        let mut table = match &a.config {
            Some(p) => {
                self.input(p)?;
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                text.parse::<toml::Table>().map_err(|e| Error::Parse(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in &a.overrides {
            apply_override(&mut table, o)?;
        }
        let mut config = RegistrationConfig::from_table(table)?;
        if a.partial {
            config.partial = true;
        }
        config
            .node_count
            .get_or_insert_with(|| default_node_count(source.vertex_count()));
        config.validate()?;
        self.manifest.config = Some(to_table(&config)?);
        Ok(config)
    }

    fn register(&mut self, a: &RegisterArgs) -> Result<String> {
        let source = self.load_mesh(&a.source)?;
        let target = self.load_cloud(&a.target)?;
        let mut config = self.resolve_config(&a.config, &source)?;
        if a.features.is_some() {
            config.features = FeatureKind::External;
            self.manifest.config = Some(to_table(&config)?);
        }
        let mut frames = Frames::new(&a.config)?;
        let (src, tgt) = frames.align(&source, &target)?;
        let features = self.feature_inputs(&config, a, &source, &target)?;
        let prepared = Prepared::new(&src, &config)?;
        let res = register_with(&src, &tgt, &config, &features, &prepared)?;

        self.create_dir(&a.out)?;
        let deformed = frames.restore_target(&res.vertices);
        let mesh = source.with_vertices(deformed)?;
        let mesh_path = a.out.join(format!("deformed.{}", a.mesh_format));
        self.output(&mesh_path);
        save_mesh(&mesh, &mesh_path)?;
        self.write_indices(&a.out.join("map_st.txt"), &res.pi_st)?;
        self.write_indices(&a.out.join("map_ts.txt"), &res.pi_ts)?;

        let chamfer = chamfer_metric(&res.vertices, tgt.points())?;
        let one_sided = crate::eval::one_sided(tgt.points(), &res.vertices).1;
        let diag = tgt.bbox_diagonal();
        let mut log = String::new();
        for r in &res.log {
            writeln!(log, "{r}").unwrap();
        }
        let mut summary = String::new();
        writeln!(summary, "iterations={}", res.log.last().map_or(0, |r| r.iteration)).unwrap();
        writeln!(summary, "stage_one_iterations={}", res.stage_one_iterations).unwrap();
        if let Some(r) = res.log.last() {
            writeln!(summary, "final_energy={:e}", r.energy.total).unwrap();
        }
        writeln!(summary, "chamfer={:e}", chamfer.unsquared()).unwrap();
        writeln!(summary, "chamfer_target_to_source={one_sided:e}").unwrap();
        writeln!(summary, "target_bbox_diagonal={diag:e}").unwrap();
        writeln!(summary, "chamfer_over_diagonal={:e}", chamfer.unsquared() / diag).unwrap();
        if let Some(gt) = &a.gt {
            let truth = self.load_indices(gt)?;
            let err = geodesic_error(&res.pi_ts, &truth, &geodesic_matrix(&source), source.total_area())?;
            writeln!(summary, "geodesic_error={}", err.mean * 100.0).unwrap();
        }
        log.push_str(&summary);
        self.write_text(&a.out.join("log.txt"), &log)?;
        self.manifest_path = Some(a.out.join("manifest.toml"));
        Ok(summary)
    }

    fn write_indices(&mut self, path: &Path, idx: &[usize]) -> Result<()> {
        self.output(path);
        save_index_list(idx, path)
    }

    fn feature_inputs(
        &mut self,
        config: &RegistrationConfig,
        a: &RegisterArgs,
        source: &Mesh,
        target: &PointCloud,
    ) -> Result<FeatureInputs> {
        match config.features {
            FeatureKind::Coordinates => Ok(FeatureInputs::default()),
            FeatureKind::Spectral => {
                let path = a.target_mesh.as_ref().ok_or_else(|| {
                    Error::InvalidConfig("spectral features need --target-mesh".into())
                })?;
                let mesh = self.load_mesh(path)?;
                if target.provenance().is_none() && target.len() != mesh.vertex_count() {
                    return Err(Error::MissingProvenance);
                }
                let f = spectral_target_features(&mesh, target.provenance(), config.spectral_k, config.spectral_scales)?;
                Ok(FeatureInputs {
                    source: None,
                    target: Some(f),
                })
            }
            FeatureKind::External => {
                let (Some(tp), Some(sp)) = (&a.features, &a.source_features) else {
                    return Err(Error::InvalidConfig(
                        "external features need --features and --source-features".into(),
                    ));
                };
                self.input(tp)?;
                self.input(sp)?;
                Ok(FeatureInputs {
                    target: Some(load_features(tp, target.len())?),
                    source: Some(load_features(sp, source.vertex_count())?),
                })
            }
        }
    }

    fn match_clouds(&mut self, a: &MatchArgs) -> Result<String> {
        let template = self.load_mesh(&a.template)?;
        let ca = self.load_cloud(&a.a)?;
        let cb = self.load_cloud(&a.b)?;
        let config = self.resolve_config(&a.config, &template)?;
        if config.features != FeatureKind::Coordinates {
            return Err(Error::InvalidConfig("match supports coordinate features only".into()));
        }
        let mut frames = Frames::new(&a.config)?;
        let (src, ta) = frames.align(&template, &ca)?;
        let (_, tb) = frames.align(&template, &cb)?;
        let prepared = Prepared::new(&src, &config)?;
        let none = FeatureInputs::default();
        let ra: RegistrationResult = register_with(&src, &ta, &config, &none, &prepared)?;
        let rb = register_with(&src, &tb, &config, &none, &prepared)?;
        let map = compose(&ra.pi_ts, &rb.pi_st);
        if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
            self.create_dir(dir)?;
        }
        self.write_indices(&a.out, &map)?;
        self.manifest_path = Some(sibling(&a.out, "manifest.toml"));
        Ok(format!("points={}\n", map.len()))
    }

    fn partial_sample(&mut self, a: &PartialSampleArgs) -> Result<String> {
        let mesh = self.load_mesh(&a.mesh)?;
        let mut directions = icosahedron_directions();
        if a.views == 0 || a.views > directions.len() {
            return Err(Error::InvalidConfig(format!("views must be in 1..=12, got {}", a.views)));
        }
        directions.truncate(a.views);
        let cfg = ViewSampling {
            directions,
            resolution: a.resolution,
            points_per_view: a.points_per_view.unwrap_or(usize::MAX),
            snap_to_vertices: a.snap,
            jitter: a.jitter,
            seed: self.seed,
        };
        let views = sample_views(&mesh, &cfg)?;
        self.create_dir(&a.out)?;
        let mut s = String::new();
        for (i, v) in views.iter().enumerate() {
            let path = a.out.join(format!("view_{i:02}.xyz"));
            self.output(&path);
            self.output(&provenance_path(&path));
            save_cloud(v, &path)?;
            writeln!(s, "view_{i:02}={}", v.len()).unwrap();
        }
        self.manifest_path = Some(a.out.join("manifest.toml"));
        Ok(s)
    }

    fn eval(&mut self, a: &EvalArgs) -> Result<String> {
        let mut report = EvalReport::default();
        if let (Some(pred), Some(gt), Some(mesh)) = (&a.pred, &a.gt, &a.mesh) {
            let mesh = self.load_mesh(mesh)?;
            let pred = self.load_indices(pred)?;
            let truth = self.load_indices(gt)?;
            let err = geodesic_error(&pred, &truth, &geodesic_matrix(&mesh), mesh.total_area())?;
            report.curve = err.curve(&uniform_thresholds(a.curve_max, a.curve_points));
            report.geodesic = Some(err);
        }
        if let (Some(p), Some(g)) = (&a.pred_points, &a.gt_points) {
            let p = self.load_cloud(p)?;
            let g = self.load_cloud(g)?;
            report.recall = Some(euclidean_recall(p.points(), g.points(), &a.thresholds)?);
        }
        if let (Some(x), Some(y)) = (&a.chamfer_a, &a.chamfer_b) {
            let x = self.load_cloud(x)?;
            let y = self.load_cloud(y)?;
            report.chamfer = Some(chamfer_metric(x.points(), y.points())?);
        }
        if report == EvalReport::default() {
            return Err(Error::InvalidConfig(
                "nothing to evaluate: give --pred/--gt/--mesh, --pred-points/--gt-points or --chamfer-a/--chamfer-b".into(),
            ));
        }
        let text = report.to_key_values(100.0);
        if let Some(path) = &a.curve {
            self.write_text(path, &report.curve_csv(100.0))?;
        }
        if let Some(path) = &a.out {
            self.write_text(path, &text)?;
            self.manifest_path = Some(sibling(path, "manifest.toml"));
        }
        Ok(text)
    }

    fn prop1(&mut self, a: &Prop1Args) -> Result<String> {
        let source = self.load_mesh(&a.mesh)?;
        let (target, map) = match (&a.target, &a.map) {
            (Some(t), Some(m)) => {
                let t = self.load_mesh(t)?;
                let map = self.load_indices(m)?;
                (t, map)
            }
            _ => permuted(&source, self.seed),
        };
        if map.len() != target.vertex_count() {
            return Err(Error::CountMismatch {
                expected: target.vertex_count(),
                found: map.len(),
            });
        }
        let pi = PointMap::hard(map, source.vertex_count())?;
        let n = target.vertex_count();
        let sizes: Vec<usize> = a
            .fractions
            .iter()
            .map(|f| ((f * n as f64).round() as usize).clamp(1, n))
            .collect();
        let opts = Prop1Options {
            k: a.k,
            trials: a.trials,
            seed: self.seed,
        };
        let report = check_prop1(&source, &target, &pi, &sizes, &opts)?;
        let mut s = String::new();
        writeln!(s, "off_diagonal_ratio={:e}", report.off_diagonal_ratio()).unwrap();
        writeln!(s, "diagonal_deviation={:e}", report.diagonal_deviation()).unwrap();
        for t in &report.trials {
            writeln!(
                s,
                "subset={} residual_full_map={:e} residual_optimum={:e} gap={:e}",
                t.subset_size,
                t.residual_full_map,
                t.residual_optimum,
                t.gap()
            )
            .unwrap();
        }
        writeln!(s, "max_gap={:e}", report.max_gap()).unwrap();
        if let Some(path) = &a.out {
            self.write_text(path, &s)?;
            self.manifest_path = Some(sibling(path, "manifest.toml"));
        }
        Ok(s)
    }
}

/// `<path>.<suffix>`, next to an output file.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    s.into()
}

/// `b ∘ a`: for every point of A, the point of B reached through the
/// template.
pub fn compose(a_to_template: &[usize], template_to_b: &[usize]) -> Vec<usize> {
    a_to_template.iter().map(|&s| template_to_b[s]).collect()
}

/// Sets `key = value` in a TOML table; dotted keys address nested tables
/// and values that do not parse as TOML are taken as strings.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::InvalidConfig(format!("override '{assignment}' is not KEY=VALUE")))?;
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, path) = parts.split_last().expect("split yields one part");
    let mut cur = table;
    for p in path {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::InvalidConfig(format!("'{p}' is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Pre-alignment of source and target and its inverse on the target side.
struct Frames {
    align: bool,
    source_rotation: Mat3,
    target_rotation: Mat3,
    target_center: Vec3,
}

fn parse_rotation(v: &Option<Vec<f64>>) -> Result<Mat3> {
    match v {
        None => Ok(Mat3::identity()),
        Some(r) if r.len() == 9 => Ok(Mat3::from_row_slice(r)),
        Some(r) => Err(Error::InvalidConfig(format!("a rotation needs 9 numbers, got {}", r.len()))),
    }
}

impl Frames {
    fn new(a: &ConfigArgs) -> Result<Self> {
        Ok(Self {
            align: !a.no_align,
            source_rotation: parse_rotation(&a.source_rotation)?,
            target_rotation: parse_rotation(&a.target_rotation)?,
            target_center: Vec3::zeros(),
        })
    }

    fn align(&mut self, source: &Mesh, target: &PointCloud) -> Result<(Mesh, PointCloud)> {
        if !self.align {
            return Ok((source.clone(), target.clone()));
        }
        self.target_center = target.centroid();
        Ok((
            center_and_orient(source, &self.source_rotation)?,
            center_and_orient(target, &self.target_rotation)?,
        ))
    }

    /// Maps points from the aligned frame back to the target's input frame.
    fn restore_target(&self, pts: &[Vec3]) -> Vec<Vec3> {
        if !self.align {
            return pts.to_vec();
        }
        pts.iter().map(|p| self.target_rotation * p + self.target_center).collect()
    }
}
