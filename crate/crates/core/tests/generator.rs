use sceneflow_core::gen::*;
use sceneflow_core::io::parse_scene;
use sceneflow_core::render::{render_dataset, RenderOptions};
use sceneflow_core::verify::{verify_dataset, CheckSelection, Tolerances};

#[test]
fn hundred_seeds_per_preset_parse() {
    let catalog = Catalog::builtin();
    for preset in Preset::ALL {
        for seed in 0..100 {
            let params = GenParams { preset, seed, ..GenParams::default() };
            let text = generate_scene(&params, &catalog).unwrap();
            let scene = parse_scene(&text).unwrap_or_else(|e| panic!("{preset} seed {seed}: {e}"));
            assert_eq!(scene.meshes.iter().filter(|m| !m.is_static).count(), params.actors);
        }
    }
}

#[test]
fn same_seed_same_bytes() {
    let catalog = Catalog::builtin();
    let params = GenParams { seed: 42, actors: 6, frames: 5, ..GenParams::default() };
    assert_eq!(generate_scene(&params, &catalog).unwrap(), generate_scene(&params, &catalog).unwrap());
}

#[test]
fn catalog_order_does_not_matter() {
    let reversed = {
        let doc: serde_json::Value = serde_json::from_str(DEFAULT_CATALOG_TEXT).unwrap();
        let mut doc = doc;
        doc["assets"].as_array_mut().unwrap().reverse();
        doc.to_string()
    };
    let a = Catalog::builtin();
    let b = Catalog::load(&reversed).unwrap();
    assert_eq!(a, b);
    let params = GenParams { seed: 3, ..GenParams::default() };
    assert_eq!(generate_scene(&params, &a).unwrap(), generate_scene(&params, &b).unwrap());
}

const DEFAULT_CATALOG_TEXT: &str = catalog::DEFAULT_CATALOG;

#[test]
fn closure_with_verifier() {
    let catalog = Catalog::builtin();
    for preset in Preset::ALL {
        for seed in 0..10 {
            let params = GenParams {
                preset,
                seed,
                intrinsics: centered_intrinsics(160, 120, 125.0),
                ..GenParams::default()
            };
            let scene = build_scene(&params, &catalog).unwrap();
            let dir = tempfile::tempdir().unwrap();
            render_dataset(&scene, dir.path(), &RenderOptions::default()).unwrap();
            let report = verify_dataset(dir.path(), &CheckSelection::all(), &Tolerances::default());
            assert!(report.passed(), "{preset} seed {seed}\n{}", report.to_text());
        }
    }
}
