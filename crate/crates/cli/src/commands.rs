use std::path::Path;

use scenewire::evaluation::evaluate_dirs;
use scenewire::inference::{infer_scene, scene_seed, InferenceConfig, InferenceResult, SceneInputs, Variant};
use scenewire::io::{generate_project, load_json, save_json, write_atomic, Project, SceneDir};
use scenewire::likelihood::{explain_object, Model};
use scenewire::masks::{generate_mask_catalog, MaskCatalog};
use scenewire::render::{render_birdseye, render_mask_sheet, render_overlay, BirdseyeFrame};
use scenewire::shape::{fit_shape_space, generate_exemplars, ExemplarSet, ShapeSpace};

use crate::error::CliError;
use crate::settings::{Context, Preset};
use crate::{EvalArgs, ExplainArgs, FitShapeArgs, GenMasksArgs, InferArgs, RenderArgs, SynthArgs};

pub fn fit_shape(ctx: &Context, a: FitShapeArgs) -> Result<(), CliError> {
    let modules = ctx.modules_or(Preset::Default);
    let set: ExemplarSet = match (&a.exemplars, a.generate) {
        (Some(path), _) => load_json(path)?,
        (None, Some(n)) => generate_exemplars(n, scene_seed(ctx.seed(), "exemplars")),
        (None, None) => return Err(CliError::Usage("pass --exemplars or --generate".into())),
    };
    if let Some(path) = &a.save_exemplars {
        save_json(path, &set)?;
    }
    let rank = a.rank.unwrap_or(modules.shape.rank);
    let space = fit_shape_space(&set.exemplars, rank)?.with_part_names(set.part_names)?;
    save_json(&a.out, &space)?;
    println!(
        "rank {} over {} exemplars, residual rms {:.4} m",
        space.rank(),
        set.exemplars.len(),
        space.residual_rms
    );
    Ok(())
}

pub fn gen_masks(ctx: &Context, a: GenMasksArgs) -> Result<(), CliError> {
    let catalog = generate_mask_catalog(&ctx.modules_or(Preset::Default).masks)?;
    save_json(&a.out, &catalog)?;
    if let Some(svg) = &a.svg {
        let columns = (catalog.len() as f64).sqrt().ceil() as usize;
        write_atomic(svg, render_mask_sheet(&catalog, columns, 2.0).as_bytes())?;
    }
    println!("{} masks", catalog.len());
    Ok(())
}

pub fn synth(ctx: &Context, a: SynthArgs) -> Result<(), CliError> {
    if a.scenes == 0 {
        return Err(CliError::Usage("--scenes must be at least 1".into()));
    }
    let project = generate_project(&a.out_dir, ctx.seed(), ctx.modules_or(a.preset), a.scenes)?;
    let (scenes, cars, severe) = project.manifest.scene_ids.iter().try_fold((0, 0, 0), |(s, c, o), id| {
        let gt = project.scene_dir(id).load_scene()?;
        let severe = gt.objects.iter().filter(|o| o.occluded_count() > 3).count();
        Ok::<_, scenewire::Error>((s + 1, c + gt.objects.len(), o + severe))
    })?;
    println!("{scenes} scenes, {cars} cars, {severe} with more than 3 occluded parts");
    Ok(())
}

fn parse_variants(names: &[String]) -> Result<Vec<Variant>, CliError> {
    let mut out = Vec::new();
    for name in names {
        if name == "table" {
            out.extend(Variant::table());
        } else {
            out.push(
                name.parse()
                    .map_err(|e: scenewire::Error| CliError::Usage(e.to_string()))?,
            );
        }
    }
    out.dedup();
    Ok(out)
}

/// Shape space, catalog and inference settings a project provides.
struct Resources {
    space: ShapeSpace,
    catalog: MaskCatalog,
    inference: InferenceConfig,
}

impl Resources {
    fn load(ctx: &Context, project: &Project) -> Result<Self, CliError> {
        let modules = ctx.modules.as_ref().unwrap_or(&project.manifest.config);
        Ok(Self {
            space: project.load_space()?,
            catalog: project.load_catalog()?,
            inference: modules.inference.clone(),
        })
    }

    fn infer(&self, dir: &SceneDir, variant: Variant, seed: u64) -> Result<InferenceResult, CliError> {
        let gt = dir.load_scene()?;
        let dets = dir.load_detections()?;
        let stack = dir.load_stack()?;
        let inputs = SceneInputs {
            space: &self.space,
            catalog: &self.catalog,
            camera: &gt.camera,
            stack: &stack,
            cam_height: gt.ground_plane.cam_height,
        };
        let mut cfg = self.inference.clone();
        cfg.variant = variant;
        infer_scene(&dets, &inputs, &cfg, scene_seed(seed, &gt.id), &gt.id).map_err(CliError::Inference)
    }
}

pub fn infer(ctx: &Context, a: InferArgs) -> Result<(), CliError> {
    let variants = parse_variants(&a.variant)?;
    if let Some(scene_dir) = &a.scene_dir {
        let [variant] = variants[..] else {
            return Err(CliError::Usage("a single scene takes exactly one --variant".into()));
        };
        let out = a
            .out
            .as_ref()
            .ok_or_else(|| CliError::Usage("--out is required".into()))?;
        let project = ctx.project_near(scene_dir)?;
        let res = Resources::load(ctx, &project)?;
        let seed = ctx.seed.unwrap_or(project.manifest.seed);
        let r = res.infer(&SceneDir::new(scene_dir), variant, seed)?;
        save_json(out, &r)?;
        println!(
            "{} {}: {} objects, score {:.4}",
            r.scene_id,
            variant,
            r.objects.len(),
            r.scene.score
        );
        return Ok(());
    }
    let project = ctx.project()?;
    let res = Resources::load(ctx, project)?;
    let root = a.out_dir.clone().unwrap_or_else(|| project.results_dir());
    for id in &project.manifest.scene_ids {
        for &variant in &variants {
            let r = res.infer(&project.scene_dir(id), variant, ctx.seed())?;
            save_json(&root.join(variant.to_string()).join(format!("{id}.json")), &r)?;
        }
        log::info!("scene {id} done");
    }
    println!(
        "{} scenes x {} variants written under {}",
        project.manifest.scene_ids.len(),
        variants.len(),
        root.display()
    );
    Ok(())
}

pub fn eval(a: EvalArgs) -> Result<(), CliError> {
    let report = evaluate_dirs(&a.results_dir, &a.gt_dir)?;
    save_json(&a.out, &report)?;
    print!("{}", report.to_table());
    Ok(())
}

fn write_svg(path: &Path, svg: &str) -> Result<(), CliError> {
    Ok(write_atomic(path, svg.as_bytes())?)
}

pub fn render(ctx: &Context, a: RenderArgs) -> Result<(), CliError> {
    let project = ctx.project_near(&a.scene_dir)?;
    let space = project.load_space()?;
    let catalog = project.load_catalog()?;
    let gt = SceneDir::new(&a.scene_dir).load_scene()?;
    let result: InferenceResult = load_json(&a.result)?;
    write_svg(
        &a.out_dir.join("overlay.svg"),
        &render_overlay(&result, &gt.camera, &space, &catalog)?,
    )?;
    write_svg(
        &a.out_dir.join("birdseye.svg"),
        &render_birdseye(Some(&result), Some(&gt), &space, &BirdseyeFrame::default())?,
    )?;
    Ok(())
}

pub fn explain(ctx: &Context, a: ExplainArgs) -> Result<(), CliError> {
    let project = ctx.project_near(&a.scene_dir)?;
    let res = Resources::load(ctx, &project)?;
    let dir = SceneDir::new(&a.scene_dir);
    let gt = dir.load_scene()?;
    let stack = dir.load_stack()?;
    let result: InferenceResult = load_json(&a.result)?;
    let model = Model {
        space: &res.space,
        catalog: &res.catalog,
        camera: &gt.camera,
        stack: &stack,
        config: &res.inference.likelihood,
    };
    let mut objects = Vec::new();
    for (i, h) in result.scene.objects.iter().enumerate() {
        if a.object.is_some_and(|k| k != i) {
            continue;
        }
        let b = explain_object(h, &result.scene.ground_plane, &model)?;
        objects.push(serde_json::json!({ "object": i, "breakdown": b }));
    }
    if let Some(k) = a.object.filter(|_| objects.is_empty()) {
        return Err(CliError::Usage(format!("result has no object {k}")));
    }
    let doc = serde_json::json!({
        "scene_id": result.scene_id,
        "variant": result.variant,
        "scene_score": result.scene.score,
        "objects": objects,
    });
    let mut bytes = serde_json::to_vec_pretty(&doc).map_err(scenewire::Error::from)?;
    bytes.push(b'\n');
    match &a.out {
        Some(path) => write_atomic(path, &bytes)?,
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    Ok(())
}
