use std::fmt;
use std::sync::Arc;

use super::energy::{bijectivity_filter, EnergyContext, EnergyTerms, EnergyWeights, Pair};
use super::optimize::{OptimizerConfig, StepSolver};
use crate::defgraph::{build_graph, default_node_count, DeformationGraph, GraphParams, DEFAULT_SMOOTHNESS};
use crate::features::{coordinate_features, spectral_descriptor, FeatureMatrix, DEFAULT_SCALES};
use crate::fmaps::{pointmap_from_features, MapMode};
use crate::geometry::{geodesic_matrix, nearest_indices, GeodesicMatrix, Mesh, PointCloud, PointSet};
use crate::spectral::{eigenbasis, SpectralBasis, TruncatedBasis, DEFAULT_K};
use crate::{Error, Result, Vec3};

/// Which features drive the first stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    #[default]
    Coordinates,
    /// Heat-kernel descriptors; the source side is recomputed on the
    /// deformed source at every refresh.
    Spectral,
    /// Fixed matrices supplied by the caller.
    External,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistrationConfig {
    pub stage1: EnergyWeights,
    pub stage2: EnergyWeights,
    /// Iterations between correspondence refreshes.
    pub refresh_period: usize,
    /// Bijectivity threshold as a fraction of `√(source area)`.
    pub tau: f64,
    /// Iteration cap per stage.
    pub max_iterations: usize,
    /// A stage ends when the energy right after a refresh is not lower than
    /// the energy after the previous refresh by at least this fraction.
    pub tolerance: f64,
    /// One-sided Chamfer term for partial targets.
    pub partial: bool,
    pub features: FeatureKind,
    /// Rotation-smoothness weight inside the ARAP term.
    pub smoothness: f64,
    /// Deformation-graph size; `⌊N/2⌋` when unset.
    pub node_count: Option<usize>,
    pub spectral_k: usize,
    pub spectral_scales: usize,
    pub optimizer: OptimizerConfig,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        Self {
            stage1: EnergyWeights { corr: 1.0, cd: 0.1, arap: 5.0 },
            stage2: EnergyWeights { corr: 1.0, cd: 1.0, arap: 1.0 },
            refresh_period: 100,
            tau: 0.05,
            max_iterations: 1500,
            tolerance: 1e-5,
            partial: false,
            features: FeatureKind::Coordinates,
            smoothness: DEFAULT_SMOOTHNESS,
            node_count: None,
            spectral_k: DEFAULT_K,
            spectral_scales: DEFAULT_SCALES,
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl RegistrationConfig {
    /// Settings from a TOML table. Missing keys, including single fields of
    /// nested tables, keep their defaults.
    pub fn from_table(overlay: toml::Table) -> Result<Self> {
        let mut table = toml::Table::try_from(Self::default()).expect("default config serializes");
        merge_tables(&mut table, overlay);
        table.try_into().map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))
    }

    /// [`RegistrationConfig::from_table`] on TOML text.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table = text.parse::<toml::Table>().map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Self::from_table(table)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        for (name, w) in [("stage1", &self.stage1), ("stage2", &self.stage2)] {
            if !(w.corr >= 0.0 && w.cd >= 0.0 && w.arap >= 0.0) {
                return bad(format!("{name} weights must be nonnegative"));
            }
        }
        if self.refresh_period == 0 {
            return bad("refresh_period must be at least 1".into());
        }
        if !(self.tau > 0.0) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.smoothness >= 0.0) {
            return bad("smoothness must be nonnegative".into());
        }
        if !(self.tolerance >= 0.0) {
            return bad("tolerance must be nonnegative".into());
        }
        if self.spectral_k == 0 || self.spectral_scales == 0 {
            return bad("spectral_k and spectral_scales must be positive".into());
        }
        Ok(())
    }
}

fn merge_tables(base: &mut toml::Table, overlay: toml::Table) {
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge_tables(b, o),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

/// Feature matrices the configured provider needs from the caller.
#[derive(Debug, Clone, Default)]
pub struct FeatureInputs {
    /// Source features (external provider only).
    pub source: Option<FeatureMatrix>,
    /// Target features (spectral and external providers).
    pub target: Option<FeatureMatrix>,
}

/// Heat-kernel descriptors for a target cloud sampled from `mesh`: rows of
/// the mesh descriptors selected by `provenance`, or all vertices.
pub fn spectral_target_features(
    mesh: &Mesh,
    provenance: Option<&[usize]>,
    k: usize,
    scales: usize,
) -> Result<FeatureMatrix> {
    let basis = Arc::new(eigenbasis(mesh, k)?);
    Ok(match provenance {
        Some(sel) => spectral_descriptor(&TruncatedBasis::new(basis, sel.to_vec())?, scales),
        None => spectral_descriptor(basis.as_ref(), scales),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    One,
    Two,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::One => "I",
            Stage::Two => "II",
        })
    }
}

/// One line of the run log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub iteration: usize,
    pub stage: Stage,
    pub energy: EnergyTerms,
    pub kept_pairs: usize,
    /// True on the first record after a correspondence refresh.
    pub refresh: bool,
}

impl fmt::Display for LogRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = &self.energy;
        write!(
            f,
            "iter={} stage={} E_total={:e} E_corr={:e} E_cd={:e} E_arap={:e} kept={}{}",
            self.iteration,
            self.stage,
            e.total,
            e.corr,
            e.cd,
            e.arap,
            self.kept_pairs,
            if self.refresh { " refresh" } else { "" }
        )
    }
}

/// Mutable optimizer state of one registration.
#[derive(Debug, Clone)]
pub struct RegistrationState {
    pub iteration: usize,
    pub stage: Stage,
    pub params: GraphParams,
    pub vertices: Vec<Vec3>,
    pub pairs: Vec<Pair>,
    pub history: Vec<LogRecord>,
}

#[derive(Debug, Clone)]
pub struct RegistrationResult {
    /// Deformed source vertices.
    pub vertices: Vec<Vec3>,
    pub params: GraphParams,
    pub graph: Arc<DeformationGraph>,
    /// Nearest target point of every deformed source vertex.
    pub pi_st: Vec<usize>,
    /// Nearest deformed source vertex of every target point.
    pub pi_ts: Vec<usize>,
    pub log: Vec<LogRecord>,
    pub stage_one_iterations: usize,
}

impl RegistrationResult {
    pub fn deformed_mesh(&self, source: &Mesh) -> Result<Mesh> {
        source.with_vertices(self.vertices.clone())
    }
}

/// Source-side data reusable across registrations of the same mesh.
pub struct Prepared {
    pub graph: Arc<DeformationGraph>,
    pub geodesics: Arc<GeodesicMatrix>,
}

impl Prepared {
    pub fn new(source: &Mesh, config: &RegistrationConfig) -> Result<Self> {
        let nodes = config.node_count.unwrap_or_else(|| default_node_count(source.vertex_count()));
        Ok(Self {
            graph: Arc::new(build_graph(source, nodes)?),
            geodesics: Arc::new(geodesic_matrix(source)),
        })
    }
}

/// Deforms `source` onto `target`. Both are expected to be pre-aligned.
pub fn register(
    source: &Mesh,
    target: &PointCloud,
    config: &RegistrationConfig,
    features: &FeatureInputs,
) -> Result<RegistrationResult> {
    let prepared = Prepared::new(source, config)?;
    register_with(source, target, config, features, &prepared)
}

struct Run<'a> {
    source: &'a Mesh,
    target: &'a [Vec3],
    config: &'a RegistrationConfig,
    features: &'a FeatureInputs,
    prepared: &'a Prepared,
}

pub fn register_with(
    source: &Mesh,
    target: &PointCloud,
    config: &RegistrationConfig,
    features: &FeatureInputs,
    prepared: &Prepared,
) -> Result<RegistrationResult> {
    config.validate()?;
    match config.features {
        FeatureKind::Coordinates => {}
        FeatureKind::Spectral => check_rows(features.target.as_ref(), target.len(), "target")?,
        FeatureKind::External => {
            check_rows(features.target.as_ref(), target.len(), "target")?;
            check_rows(features.source.as_ref(), source.vertex_count(), "source")?;
        }
    }
    if prepared.graph.vertex_count() != source.vertex_count() || prepared.geodesics.len() != source.vertex_count() {
        return Err(Error::DimensionMismatch("prepared data belongs to another mesh".into()));
    }
    let run = Run {
        source,
        target: target.points(),
        config,
        features,
        prepared,
    };
    run.execute()
}

fn check_rows(f: Option<&FeatureMatrix>, n: usize, side: &str) -> Result<()> {
    match f {
        None => Err(Error::InvalidConfig(format!("{side} features are required for this provider"))),
        Some(f) if f.rows() != n => Err(Error::CountMismatch { expected: n, found: f.rows() }),
        Some(_) => Ok(()),
    }
}

/// Outcome of one refresh window.
struct Window {
    /// Energy right after the refresh.
    start: f64,
    /// Optimizer iterations taken.
    used: usize,
    /// True when no acceptable step was found.
    stalled: bool,
}

impl Run<'_> {
    fn execute(&self) -> Result<RegistrationResult> {
        let graph = &self.prepared.graph;
        let rest = self.source.vertices();
        let mut state = RegistrationState {
            iteration: 0,
            stage: Stage::One,
            params: GraphParams::identity(graph.node_count()),
            vertices: rest.to_vec(),
            pairs: Vec::new(),
            history: Vec::new(),
        };
        // The normal matrix changes little between refreshes, so its
        // factorization is kept until a step is rejected.
        let mut solver: Option<StepSolver> = None;
        let mut energy_scale = None;
        let mut stage_iterations = 0;
        let mut stage_one_iterations = 0;
        let mut previous_start: Option<f64> = None;
        loop {
            state.vertices = graph.apply(&state.params, rest)?;
            state.pairs = self.refresh_pairs(&state)?;
            if state.pairs.is_empty() {
                return Err(Error::NoCorrespondences { iteration: state.iteration });
            }
            let budget = self
                .config
                .refresh_period
                .min(self.config.max_iterations.saturating_sub(stage_iterations));
            let window = self.window(&mut state, &mut solver, &mut energy_scale, budget)?;
            stage_iterations += window.used;
            // Converged once refreshing the pairs no longer lowers the
            // energy by the tolerance, compared at consecutive refreshes.
            let settled = previous_start
                .is_some_and(|p| window.start > p - self.config.tolerance * p.abs());
            previous_start = Some(window.start);
            if window.stalled || settled || stage_iterations >= self.config.max_iterations {
                match state.stage {
                    Stage::One => {
                        log::info!("stage I finished after {stage_iterations} iterations");
                        stage_one_iterations = stage_iterations;
                        state.stage = Stage::Two;
                        solver = None;
                        stage_iterations = 0;
                        previous_start = None;
                    }
                    Stage::Two => break,
                }
            }
        }
        let vertices = graph.apply(&state.params, rest)?;
        let pi_st = nearest_indices(self.target, &vertices);
        let pi_ts = nearest_indices(&vertices, self.target);
        Ok(RegistrationResult {
            vertices,
            params: state.params,
            graph: Arc::clone(graph),
            pi_st,
            pi_ts,
            log: state.history,
            stage_one_iterations,
        })
    }

    fn weights(&self, stage: Stage) -> EnergyWeights {
        match stage {
            Stage::One => self.config.stage1,
            Stage::Two => self.config.stage2,
        }
    }

    /// Hard maps in both directions for the current stage, then the
    /// bijectivity filter.
    fn refresh_pairs(&self, state: &RegistrationState) -> Result<Vec<Pair>> {
        let (fs, ft) = match (state.stage, self.config.features) {
            (Stage::Two, _) | (Stage::One, FeatureKind::Coordinates) => {
                let t = PointCloud::new(self.target.to_vec())?;
                let s = PointCloud::new(state.vertices.clone())?;
                (coordinate_features(&s), coordinate_features(&t))
            }
            (Stage::One, FeatureKind::Spectral) => {
                (self.deformed_descriptors(&state.vertices)?, self.features.target.clone().unwrap())
            }
            (Stage::One, FeatureKind::External) => {
                (self.features.source.clone().unwrap(), self.features.target.clone().unwrap())
            }
        };
        let pi_st = pointmap_from_features(&ft, &fs, MapMode::Hard)?;
        let pi_ts = pointmap_from_features(&fs, &ft, MapMode::Hard)?;
        bijectivity_filter(
            pi_st.as_hard().unwrap(),
            pi_ts.as_hard().unwrap(),
            &self.prepared.geodesics,
            self.config.tau,
            self.source.total_area(),
        )
    }

    fn deformed_descriptors(&self, vertices: &[Vec3]) -> Result<FeatureMatrix> {
        let k = self.config.spectral_k.min(self.source.vertex_count() - 1);
        let basis: SpectralBasis = match self.source.with_vertices(vertices.to_vec()) {
            Ok(m) => eigenbasis(&m, k)?,
            Err(e) => {
                log::warn!("deformed source is degenerate ({e}); using rest-pose descriptors");
                eigenbasis(self.source, k)?
            }
        };
        Ok(spectral_descriptor(&basis, self.config.spectral_scales))
    }

    /// Up to `budget` optimizer iterations with the current pairs fixed.
    fn window(
        &self,
        state: &mut RegistrationState,
        solver: &mut Option<StepSolver>,
        energy_scale: &mut Option<f64>,
        budget: usize,
    ) -> Result<Window> {
        let ctx = EnergyContext {
            graph: &self.prepared.graph,
            rest: self.source.vertices(),
            target: self.target,
            pairs: &state.pairs,
            weights: self.weights(state.stage),
            smoothness: self.config.smoothness,
            partial: self.config.partial,
        };
        let opt = &self.config.optimizer;
        let (mut terms, grad) = ctx.evaluate(&state.params, true)?;
        if !terms.total.is_finite() {
            return Err(Error::NonFiniteEnergy { iteration: state.iteration });
        }
        let start = terms.total;
        let scale = *energy_scale.get_or_insert(start);
        let solver = solver.get_or_insert_with(|| StepSolver::new(opt, scale));
        let mut gradient = grad.expect("gradient requested").to_flat();
        state.history.push(LogRecord {
            iteration: state.iteration,
            stage: state.stage,
            energy: terms,
            kept_pairs: state.pairs.len(),
            refresh: true,
        });
        let mut used = 0;
        let mut stalled = false;
        while used < budget {
            let Some(step) = solver.step(&ctx, &state.params, &terms, &gradient, opt)? else {
                stalled = used == 0;
                break;
            };
            let decrease = terms.total - step.terms.total;
            state.params = step.params;
            terms = step.terms;
            gradient = step.gradient;
            used += 1;
            state.iteration += 1;
            state.history.push(LogRecord {
                iteration: state.iteration,
                stage: state.stage,
                energy: terms,
                kept_pairs: state.pairs.len(),
                refresh: false,
            });
            if decrease <= opt.step_tolerance * terms.total.abs() {
                break;
            }
        }
        Ok(Window { start, used, stalled })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;
    use crate::Mat3;
    use nalgebra::Rotation3;

    fn diagonal(points: &[Vec3]) -> f64 {
        PointCloud::new(points.to_vec()).unwrap().bbox_diagonal()
    }

    fn rigid_copy(mesh: &Mesh) -> (Mat3, Vec3, PointCloud) {
        let r = *Rotation3::from_axis_angle(&Vec3::z_axis(), 20f64.to_radians()).matrix();
        let t = Vec3::new(0.3, -0.2, 0.1);
        let pts = mesh.vertices().iter().map(|p| r * p + t).collect();
        (r, t, PointCloud::new(pts).unwrap())
    }

    #[test]
    fn self_registration_is_exact() {
        let m = primitives::elongated(2);
        let target = PointCloud::from_mesh(&m);
        let res = register(&m, &target, &RegistrationConfig::default(), &FeatureInputs::default()).unwrap();
        let diag = m.bbox_diagonal();
        for (a, b) in res.vertices.iter().zip(m.vertices()) {
            assert!((a - b).norm() < 1e-4 * diag);
        }
        let identity: Vec<usize> = (0..m.vertex_count()).collect();
        assert_eq!(res.pi_st, identity);
        assert_eq!(res.pi_ts, identity);
    }

    #[test]
    fn result_vertices_come_from_the_parameters() {
        let m = primitives::elongated(2);
        let (_, _, target) = rigid_copy(&m);
        let res = register(&m, &target, &RegistrationConfig::default(), &FeatureInputs::default()).unwrap();
        let again = res.graph.apply(&res.params, m.vertices()).unwrap();
        for (a, b) in again.iter().zip(&res.vertices) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn energy_never_rises_between_refreshes() {
        let m = primitives::elongated(2);
        let bent = m.with_vertices(primitives::bend(m.vertices(), 0.05)).unwrap();
        let target = PointCloud::from_mesh(&bent);
        let config = RegistrationConfig {
            refresh_period: 7,
            ..Default::default()
        };
        let res = register(&m, &target, &config, &FeatureInputs::default()).unwrap();
        assert!(res.log.len() > 3);
        for w in res.log.windows(2) {
            if !w[1].refresh {
                assert!(w[1].energy.total <= w[0].energy.total, "{} -> {}", w[0], w[1]);
            }
        }
        assert!(res.log.iter().all(|r| r.energy.total.is_finite()));
    }

    #[test]
    fn stiff_regularizer_gives_the_rigid_fit() {
        let m = primitives::elongated(2);
        let (r, t, target) = rigid_copy(&m);
        let stiff = EnergyWeights { corr: 1.0, cd: 1.0, arap: 1e9 };
        let config = RegistrationConfig {
            stage1: stiff,
            stage2: stiff,
            ..Default::default()
        };
        let res = register(&m, &target, &config, &FeatureInputs::default()).unwrap();
        let diag = diagonal(target.points());
        for (a, p) in res.vertices.iter().zip(m.vertices()) {
            assert!((a - (r * p + t)).norm() < 1e-3 * diag, "{} {}", (a - (r * p + t)).norm() / diag, res.log.iter().map(|l| l.to_string()).collect::<Vec<_>>().join("\n"));
        }
    }

    #[test]
    fn provider_inputs_are_checked() {
        let m = primitives::elongated(1);
        let target = PointCloud::from_mesh(&m);
        let spectral = RegistrationConfig {
            features: FeatureKind::Spectral,
            ..Default::default()
        };
        assert!(matches!(
            register(&m, &target, &spectral, &FeatureInputs::default()),
            Err(Error::InvalidConfig(_))
        ));
        let short = FeatureMatrix::from_values(nalgebra::DMatrix::zeros(3, 2)).unwrap();
        let inputs = FeatureInputs {
            source: None,
            target: Some(short),
        };
        assert!(matches!(
            register(&m, &target, &spectral, &inputs),
            Err(Error::CountMismatch { expected: 42, found: 3 })
        ));
        let bad = RegistrationConfig {
            tau: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            register(&m, &target, &bad, &FeatureInputs::default()),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn config_round_trips_through_toml() {
        let c = RegistrationConfig {
            partial: true,
            features: FeatureKind::Spectral,
            node_count: Some(50),
            ..Default::default()
        };
        let text = toml::to_string(&c).unwrap();
        assert_eq!(toml::from_str::<RegistrationConfig>(&text).unwrap(), c);
        assert!(toml::from_str::<RegistrationConfig>("bogus = 1").is_err());
        let partial: RegistrationConfig = toml::from_str("tau = 0.1\n[stage2]\ncorr = 2.0\ncd = 1.0\narap = 0.5").unwrap();
        assert_eq!(partial.tau, 0.1);
        assert_eq!(partial.stage2.arap, 0.5);
        assert_eq!(partial.refresh_period, 100);

        let merged = RegistrationConfig::from_toml_str("[stage2]\narap = 0.25\n[optimizer]").unwrap();
        assert_eq!(merged.stage2.arap, 0.25);
        assert_eq!(merged.stage2.corr, RegistrationConfig::default().stage2.corr);
        assert_eq!(merged.optimizer, RegistrationConfig::default().optimizer);
        assert!(RegistrationConfig::from_toml_str("[stage2]\nbogus = 1").is_err());
    }
}
