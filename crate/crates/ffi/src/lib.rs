//! C ABI for the registration toolkit.
//!
//! Objects are opaque handles created by `nfr_*_new` / `nfr_*_load` /
//! `nfr_register` and released with the matching `nfr_*_free`. Every fallible
//! function returns an [`NfrStatus`]; on failure the message is available
//! from [`nfr_last_error`] on the same thread until the next failing call.
//! Panics are caught at the boundary and reported as [`NfrStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nfr_core::geometry::{load_cloud, load_mesh, Mesh, PointCloud, PointSet};
use nfr_core::registration::{
    register, spectral_target_features, FeatureInputs, FeatureKind, RegistrationConfig, RegistrationResult,
};
use nfr_core::{Error, Vec3};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NfrStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// Malformed input data, configuration or buffer size.
    InvalidInput = 2,
    /// A file could not be read or parsed.
    Io = 3,
    /// The correspondence filter rejected every pair.
    NoCorrespondences = 4,
    /// The energy became NaN or infinite.
    NonFiniteEnergy = 5,
    /// A linear solve or eigensolve failed.
    Numerical = 6,
    /// The library panicked; this is a bug.
    Panic = 7,
}

/// Triangle mesh.
pub struct NfrMesh(Mesh);

/// Point cloud, optionally with per-point source-vertex indices.
pub struct NfrCloud(PointCloud);

/// Registration settings.
pub struct NfrConfig(RegistrationConfig);

/// Output of one registration.
pub struct NfrResult(RegistrationResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> NfrStatus {
    match e {
        Error::Io { .. } | Error::Parse(_) => NfrStatus::Io,
        Error::NoCorrespondences { .. } => NfrStatus::NoCorrespondences,
        Error::NonFiniteEnergy { .. } => NfrStatus::NonFiniteEnergy,
        Error::ConvergenceFailure(_) | Error::RankDeficient { .. } | Error::SingularSystem(_) => NfrStatus::Numerical,
        _ => NfrStatus::InvalidInput,
    }
}

enum Failure {
    Null(&'static str),
    Invalid(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

/// Runs `f`, converting errors and panics into a status and a stored message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NfrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NfrStatus::Ok,
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("argument `{name}` is null"));
            NfrStatus::NullArgument
        }
        Ok(Err(Failure::Invalid(m))) => {
            set_error(m);
            NfrStatus::InvalidInput
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let m = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {m}"));
            NfrStatus::Panic
        }
    }
}

unsafe fn non_null<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn utf8_path<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    let s = CStr::from_ptr(non_null(p, "path")?);
    s.to_str().map_err(|_| Failure::Invalid("path is not valid UTF-8".into()))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Errors from in-memory data are input errors whatever their core kind.
fn invalid(e: Error) -> Failure {
    Failure::Invalid(e.to_string())
}

fn points(xyz: &[f64]) -> Vec<Vec3> {
    xyz.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect()
}

unsafe fn copy_out<T: Copy>(src: &[T], dst: *mut T, capacity: usize) -> Result<(), Failure> {
    if capacity < src.len() {
        return Err(Failure::Invalid(format!("buffer holds {capacity} entries, {} needed", src.len())));
    }
    if !src.is_empty() {
        if dst.is_null() {
            return Err(Failure::Null("buffer"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    }
    Ok(())
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nfr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn nfr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ------------------------------------------------------------------ meshes

/// Builds a mesh from `vertex_count` xyz triples and `face_count` index
/// triples.
///
/// # Safety
/// `vertices` must point to `3 * vertex_count` doubles and `faces` to
/// `3 * face_count` indices; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nfr_mesh_new(
    vertices: *const f64,
    vertex_count: usize,
    faces: *const u32,
    face_count: usize,
    out: *mut *mut NfrMesh,
) -> NfrStatus {
    guard(|| {
        let v = slice(vertices, 3 * vertex_count, "vertices")?;
        let f = slice(faces, 3 * face_count, "faces")?;
        let faces = f.chunks_exact(3).map(|c| [c[0] as usize, c[1] as usize, c[2] as usize]).collect();
        store(out, NfrMesh(Mesh::new(points(v), faces).map_err(invalid)?))
    })
}

/// Reads an OFF or PLY mesh.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nfr_mesh_load(path: *const c_char, out: *mut *mut NfrMesh) -> NfrStatus {
    guard(|| store(out, NfrMesh(load_mesh(utf8_path(path)?)?)))
}

/// Number of vertices, or 0 for a null handle.
///
/// # Safety
/// `mesh` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nfr_mesh_vertex_count(mesh: *const NfrMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.vertex_count())
}

/// Releases a mesh. Null is ignored.
///
/// # Safety
/// `mesh` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nfr_mesh_free(mesh: *mut NfrMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

// ------------------------------------------------------------------ clouds

/// Builds a cloud from `count` xyz triples. `provenance` may be null; when
/// given it holds `count` distinct vertex indices into a mesh with
/// `parent_vertex_count` vertices.
///
/// # Safety
/// `xyz` must point to `3 * count` doubles, `provenance` to `count` indices
/// or be null; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nfr_cloud_new(
    xyz: *const f64,
    count: usize,
    provenance: *const u32,
    parent_vertex_count: usize,
    out: *mut *mut NfrCloud,
) -> NfrStatus {
    guard(|| {
        let p = points(slice(xyz, 3 * count, "xyz")?);
        let cloud = if provenance.is_null() {
            PointCloud::new(p).map_err(invalid)?
        } else {
            let idx = slice(provenance, count, "provenance")?.iter().map(|&i| i as usize).collect();
            PointCloud::with_provenance(p, idx, parent_vertex_count).map_err(invalid)?
        };
        store(out, NfrCloud(cloud))
    })
}

/// Reads an XYZ, PLY or OFF point cloud, with its provenance sidecar if
/// present.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nfr_cloud_load(path: *const c_char, out: *mut *mut NfrCloud) -> NfrStatus {
    guard(|| store(out, NfrCloud(load_cloud(utf8_path(path)?)?)))
}

/// Number of points, or 0 for a null handle.
///
/// # Safety
/// `cloud` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nfr_cloud_len(cloud: *const NfrCloud) -> usize {
    cloud.as_ref().map_or(0, |c| c.0.len())
}

/// Releases a cloud. Null is ignored.
///
/// # Safety
/// `cloud` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nfr_cloud_free(cloud: *mut NfrCloud) {
    if !cloud.is_null() {
        drop(Box::from_raw(cloud));
    }
}

// ------------------------------------------------------------------ config

/// Default registration settings.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nfr_config_default(out: *mut *mut NfrConfig) -> NfrStatus {
    guard(|| store(out, NfrConfig(RegistrationConfig::default())))
}

/// Settings from a TOML document; omitted keys keep their defaults.
///
/// # Safety
/// `toml` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nfr_config_from_toml(toml: *const c_char, out: *mut *mut NfrConfig) -> NfrStatus {
    guard(|| {
        let text = CStr::from_ptr(non_null(toml, "toml")?)
            .to_str()
            .map_err(|_| Failure::Invalid("config is not valid UTF-8".into()))?;
        let config = RegistrationConfig::from_toml_str(text)?;
        config.validate()?;
        store(out, NfrConfig(config))
    })
}

/// Releases a config. Null is ignored.
///
/// # Safety
/// `config` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nfr_config_free(config: *mut NfrConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

// ------------------------------------------------------------ registration

/// Deforms `source` onto `target`; both must already share a frame.
///
/// `config` may be null for the defaults. With spectral features,
/// `target_mesh` is the mesh the cloud was sampled from (the cloud's
/// provenance selects its rows); otherwise it may be null. External feature
/// matrices are not available through this interface.
///
/// # Safety
/// Handles must be live or null where allowed; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nfr_register(
    source: *const NfrMesh,
    target: *const NfrCloud,
    config: *const NfrConfig,
    target_mesh: *const NfrMesh,
    out: *mut *mut NfrResult,
) -> NfrStatus {
    guard(|| {
        let source = &non_null(source, "source")?.0;
        let target = &non_null(target, "target")?.0;
        let default = RegistrationConfig::default();
        let config = config.as_ref().map_or(&default, |c| &c.0);
        let features = match config.features {
            FeatureKind::Coordinates => FeatureInputs::default(),
            FeatureKind::Spectral => {
                let mesh = &non_null(target_mesh, "target_mesh")?.0;
                FeatureInputs {
                    source: None,
                    target: Some(spectral_target_features(
                        mesh,
                        target.provenance(),
                        config.spectral_k,
                        config.spectral_scales,
                    )?),
                }
            }
            FeatureKind::External => {
                return Err(Failure::Invalid("external features are not supported over the C interface".into()))
            }
        };
        store(out, NfrResult(register(source, target, config, &features)?))
    })
}

/// Number of deformed vertices (the source vertex count).
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nfr_result_vertex_count(result: *const NfrResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.vertices.len())
}

/// Number of target points.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nfr_result_target_count(result: *const NfrResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.pi_ts.len())
}

/// Total iterations over both stages.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nfr_result_iterations(result: *const NfrResult) -> usize {
    result.as_ref().and_then(|r| r.0.log.last()).map_or(0, |l| l.iteration)
}

/// Total energy of the final iterate, or NaN for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nfr_result_final_energy(result: *const NfrResult) -> f64 {
    result.as_ref().and_then(|r| r.0.log.last()).map_or(f64::NAN, |l| l.energy.total)
}

/// Copies the deformed vertices as xyz triples into `xyz`, which holds
/// `capacity` doubles (at least `3 * nfr_result_vertex_count`).
///
/// # Safety
/// `result` must be live; `xyz` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn nfr_result_copy_vertices(result: *const NfrResult, xyz: *mut f64, capacity: usize) -> NfrStatus {
    guard(|| {
        let r = &non_null(result, "result")?.0;
        let flat: Vec<f64> = r.vertices.iter().flat_map(|p| [p.x, p.y, p.z]).collect();
        copy_out(&flat, xyz, capacity)
    })
}

/// Copies the source-to-target map (nearest target point of every deformed
/// vertex), `nfr_result_vertex_count` entries.
///
/// # Safety
/// `result` must be live; `map` must hold `capacity` entries.
#[no_mangle]
pub unsafe extern "C" fn nfr_result_copy_map_st(result: *const NfrResult, map: *mut usize, capacity: usize) -> NfrStatus {
    guard(|| copy_out(&non_null(result, "result")?.0.pi_st, map, capacity))
}

/// Copies the target-to-source map (nearest deformed vertex of every target
/// point), `nfr_result_target_count` entries.
///
/// # Safety
/// `result` must be live; `map` must hold `capacity` entries.
#[no_mangle]
pub unsafe extern "C" fn nfr_result_copy_map_ts(result: *const NfrResult, map: *mut usize, capacity: usize) -> NfrStatus {
    guard(|| copy_out(&non_null(result, "result")?.0.pi_ts, map, capacity))
}

/// Releases a result. Null is ignored.
///
/// # Safety
/// `result` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nfr_result_free(result: *mut NfrResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}
