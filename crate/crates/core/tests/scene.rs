use std::fs;

use lapaware_core::scenarios;
use lapaware_core::scene::{load_scene, Role, SceneError, TissueClass};

const CUBE_OBJ: &str = "\
v -0.01 -0.01 -0.01
v 0.01 -0.01 -0.01
v 0.01 0.01 -0.01
v -0.01 0.01 -0.01
v -0.01 -0.01 0.01
v 0.01 -0.01 0.01
v 0.01 0.01 0.01
v -0.01 0.01 0.01
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
";

fn scene_with_obj(obj: &str) -> String {
    scenarios::MINIMAL.replace("{\"sphere\": {\"r\": 0.02}}", &format!("{{\"obj\": {obj:?}}}"))
}

#[test]
fn bundled_cholecystectomy_has_four_objects() {
    let s = scenarios::cholecystectomy();
    let classes: Vec<_> = s.objects.iter().map(|o| o.tissue_class).collect();
    assert_eq!(
        classes,
        [TissueClass::Gallbladder, TissueClass::CysticArtery, TissueClass::Stomach, TissueClass::Liver]
    );
    assert_eq!(s.object("stomach").unwrap().role, Role::Hazard);
    assert_eq!(s.trocars.len(), 2);
    assert_eq!(s.tools.len(), 2);
}

#[test]
fn obj_mesh_loads_relative_to_scene_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("meshes")).unwrap();
    fs::write(dir.path().join("meshes/cube.obj"), CUBE_OBJ).unwrap();
    fs::write(dir.path().join("scene.json"), scene_with_obj("meshes/cube.obj")).unwrap();
    let s = load_scene(dir.path().join("scene.json")).unwrap();
    assert_eq!(s.objects[0].mesh.triangles().len(), 12);
    assert!(s.objects[0].mesh.is_closed());
}

#[test]
fn missing_obj_error_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("scene.json"), scene_with_obj("nowhere/organ.obj")).unwrap();
    let err = load_scene(dir.path().join("scene.json")).unwrap_err();
    assert!(matches!(err, SceneError::Validation { .. }));
    let msg = err.to_string();
    assert!(msg.contains("nowhere/organ.obj"), "{msg}");
    assert!(msg.contains("objects[0].mesh"), "{msg}");
}

#[test]
fn missing_scene_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_scene(dir.path().join("absent.json")).unwrap_err();
    assert!(matches!(err, SceneError::Io { .. }));
    assert!(err.to_string().contains("absent.json"));
}

#[test]
fn hash_is_stable_and_tracks_mesh_content() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cube.obj"), CUBE_OBJ).unwrap();
    fs::write(dir.path().join("scene.json"), scene_with_obj("cube.obj")).unwrap();
    let path = dir.path().join("scene.json");
    let first = load_scene(&path).unwrap().hash();
    assert_eq!(first, load_scene(&path).unwrap().hash());
    fs::write(dir.path().join("cube.obj"), CUBE_OBJ.replace("v 0.01 0.01 0.01", "v 0.011 0.01 0.01")).unwrap();
    assert_ne!(first, load_scene(&path).unwrap().hash());
}

#[test]
fn hash_ignores_runtime_colors() {
    let mut s = scenarios::cholecystectomy();
    let h = s.hash();
    s.set_object_color("stomach", lapaware_core::scene::Rgb::RED).unwrap();
    assert_eq!(s.hash(), h);
    assert_ne!(h, scenarios::suturing().hash());
}

#[test]
fn obj_with_quads_is_rejected_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("quad.obj"), "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
    fs::write(dir.path().join("scene.json"), scene_with_obj("quad.obj")).unwrap();
    let msg = load_scene(dir.path().join("scene.json")).unwrap_err().to_string();
    assert!(msg.contains("line 5"), "{msg}");
}

#[test]
fn invalid_config_names_the_field() {
    let text = scenarios::MINIMAL.trim_end().trim_end_matches('}').to_owned() + ", \"config\": {\"filter_window\": 0}}";
    let err = lapaware_core::scene::Scene::from_json(&text, None).unwrap_err();
    assert!(err.to_string().contains("config.filter_window"), "{err}");
}
