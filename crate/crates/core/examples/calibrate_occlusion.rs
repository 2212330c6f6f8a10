//! Grid search for the occlusion constant on a validation batch drawn with
//! the benchmark settings but a seed disjoint from any benchmark run.
//!
//! cargo run --release -p scenewire --example calibrate_occlusion [scenes] [seed]

use scenewire::inference::scene_seed;
use scenewire::io::{scene_id, synth_scene_inputs, ModuleConfigs};
use scenewire::likelihood::{calibrate_occlusion_constant, CalibrationCase, Model, ObjectView};
use scenewire::masks::generate_mask_catalog;
use scenewire::shape::{fit_shape_space, generate_exemplars};

fn main() -> scenewire::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(40);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0xca1b);
    let config = ModuleConfigs::benchmark();
    let ex = generate_exemplars(config.shape.exemplars, scene_seed(seed, "exemplars"));
    let space = fit_shape_space(&ex.exemplars, config.shape.rank)?;
    let catalog = generate_mask_catalog(&config.masks)?;
    let mut cases = Vec::new();
    for i in 0..n {
        let (scene, _, stack) = synth_scene_inputs(&config, &space, seed, &scene_id(i))?;
        let model = Model {
            space: &space,
            catalog: &catalog,
            camera: &scene.camera,
            stack: &stack,
            config: &config.inference.likelihood,
        };
        for o in &scene.objects {
            let view = ObjectView::new(&o.pose, &o.shape, &scene.ground_plane, &model)?;
            cases.push(CalibrationCase {
                view,
                truth: o.states.clone(),
            });
        }
    }
    let grid: Vec<f64> = (1..=40).map(|k| k as f64 * 0.05).collect();
    let cal = calibrate_occlusion_constant(&cases, &catalog, &grid)?;
    for (c, acc) in &cal.accuracy {
        println!("c = {c:.2}  accuracy {acc:.4}");
    }
    println!("best c = {:.2} over {} objects", cal.best, cases.len());
    Ok(())
}
