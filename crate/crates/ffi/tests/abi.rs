//! Exercises the C interface through its exported symbols.

use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use nfr_core::geometry::{primitives, save_mesh, Mesh};
use nfr_ffi::*;

fn last_error() -> String {
    let p = nfr_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn flat(m: &Mesh) -> (Vec<f64>, Vec<u32>) {
    let v = m.vertices().iter().flat_map(|p| [p.x, p.y, p.z]).collect();
    let f = m.faces().iter().flat_map(|f| f.map(|i| i as u32)).collect();
    (v, f)
}

#[test]
fn self_registration_round_trip() {
    let m = primitives::elongated(2);
    let n = m.vertex_count();
    let (v, f) = flat(&m);
    unsafe {
        let mut mesh = ptr::null_mut();
        assert_eq!(nfr_mesh_new(v.as_ptr(), n, f.as_ptr(), m.face_count(), &mut mesh), NfrStatus::Ok);
        assert_eq!(nfr_mesh_vertex_count(mesh), n);
        let mut cloud = ptr::null_mut();
        assert_eq!(nfr_cloud_new(v.as_ptr(), n, ptr::null(), 0, &mut cloud), NfrStatus::Ok);
        assert_eq!(nfr_cloud_len(cloud), n);

        let mut result = ptr::null_mut();
        assert_eq!(nfr_register(mesh, cloud, ptr::null(), ptr::null(), &mut result), NfrStatus::Ok, "{}", last_error());
        assert_eq!(nfr_result_vertex_count(result), n);
        assert_eq!(nfr_result_target_count(result), n);
        assert!(nfr_result_iterations(result) > 0);
        assert!(nfr_result_final_energy(result).is_finite());

        let mut out = vec![0.0; 3 * n];
        assert_eq!(nfr_result_copy_vertices(result, out.as_mut_ptr(), out.len()), NfrStatus::Ok);
        let worst = out.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-4, "{worst}");
        let mut map = vec![0usize; n];
        assert_eq!(nfr_result_copy_map_ts(result, map.as_mut_ptr(), n), NfrStatus::Ok);
        assert_eq!(map, (0..n).collect::<Vec<_>>());
        assert_eq!(nfr_result_copy_map_st(result, map.as_mut_ptr(), n), NfrStatus::Ok);
        assert_eq!(map, (0..n).collect::<Vec<_>>());

        assert_eq!(nfr_result_copy_map_st(result, map.as_mut_ptr(), n - 1), NfrStatus::InvalidInput);
        assert!(last_error().contains("buffer"));

        nfr_result_free(result);
        nfr_cloud_free(cloud);
        nfr_mesh_free(mesh);
    }
}

#[test]
fn errors_are_reported_with_messages() {
    unsafe {
        let mut mesh = ptr::null_mut();
        let missing = CString::new("/nonexistent/shape.off").unwrap();
        assert_eq!(nfr_mesh_load(missing.as_ptr(), &mut mesh), NfrStatus::Io);
        assert!(mesh.is_null());
        assert!(last_error().contains("nonexistent"));

        assert_eq!(nfr_mesh_load(ptr::null(), &mut mesh), NfrStatus::NullArgument);
        assert!(last_error().contains("path"));

        let v = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        let bad_face = [0u32, 1, 7];
        assert_eq!(nfr_mesh_new(v.as_ptr(), 3, bad_face.as_ptr(), 1, &mut mesh), NfrStatus::InvalidInput);

        let mut config = ptr::null_mut();
        let toml = CString::new("tau = -1.0").unwrap();
        assert_eq!(nfr_config_from_toml(toml.as_ptr(), &mut config), NfrStatus::InvalidInput);
        assert!(last_error().contains("tau"));
        let toml = CString::new("unknown_key = 3").unwrap();
        assert_eq!(nfr_config_from_toml(toml.as_ptr(), &mut config), NfrStatus::InvalidInput);

        let mut result = ptr::null_mut();
        assert_eq!(nfr_register(ptr::null(), ptr::null(), ptr::null(), ptr::null(), &mut result), NfrStatus::NullArgument);

        nfr_mesh_free(ptr::null_mut());
        nfr_cloud_free(ptr::null_mut());
        nfr_config_free(ptr::null_mut());
        nfr_result_free(ptr::null_mut());
        assert_eq!(nfr_mesh_vertex_count(ptr::null()), 0);
        assert!(nfr_result_final_energy(ptr::null()).is_nan());
    }
}

#[test]
fn spectral_features_need_the_target_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.off");
    let m = primitives::elongated(1);
    save_mesh(&m, &path).unwrap();
    let path = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        let mut mesh = ptr::null_mut();
        assert_eq!(nfr_mesh_load(path.as_ptr(), &mut mesh), NfrStatus::Ok);
        let mut cloud = ptr::null_mut();
        assert_eq!(nfr_cloud_load(path.as_ptr(), &mut cloud), NfrStatus::Ok);
        let mut config = ptr::null_mut();
        let toml = CString::new("features = \"spectral\"\nspectral_k = 10").unwrap();
        assert_eq!(nfr_config_from_toml(toml.as_ptr(), &mut config), NfrStatus::Ok, "{}", last_error());

        let mut result = ptr::null_mut();
        assert_eq!(nfr_register(mesh, cloud, config, ptr::null(), &mut result), NfrStatus::NullArgument);
        assert!(last_error().contains("target_mesh"));
        assert_eq!(nfr_register(mesh, cloud, config, mesh, &mut result), NfrStatus::Ok, "{}", last_error());
        let n = nfr_result_target_count(result);
        let mut map = vec![0usize; n];
        assert_eq!(nfr_result_copy_map_ts(result, map.as_mut_ptr(), n), NfrStatus::Ok);
        assert_eq!(map, (0..n).collect::<Vec<_>>());

        nfr_result_free(result);
        nfr_config_free(config);
        nfr_cloud_free(cloud);
        nfr_mesh_free(mesh);
    }
}

#[test]
fn version_is_the_package_version() {
    let v = unsafe { CStr::from_ptr(nfr_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c_and_cxx() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = include.join("nfr.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["nfr_register", "nfr_last_error", "nfr_result_copy_vertices", "NFR_STATUS_NO_CORRESPONDENCES"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"nfr.h\"\n\
         int main(void) {\n\
           NfrMesh *m = NULL;\n\
           NfrStatus s = nfr_mesh_load(\"x.off\", &m);\n\
           nfr_mesh_free(m);\n\
           return s == NFR_STATUS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    for (compiler, extra) in [("cc", &["-std=c99"][..]), ("c++", &["-x", "c++"][..])] {
        let status = Command::new(compiler)
            .args(extra)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-I"])
            .arg(&include)
            .arg(&src)
            .status();
        match status {
            Ok(s) => assert!(s.success(), "{compiler} rejected the header"),
            Err(e) => eprintln!("skipping {compiler}: {e}"),
        }
    }
}
