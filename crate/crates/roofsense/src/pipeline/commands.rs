//! One function per CLI subcommand.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use roofsense_core::fusion::{argmax, mean_softmax, IdRows};
use roofsense_core::geom::Polygon;
use roofsense_core::raster::{compute_ndsm, resample, Resampling};
use roofsense_core::rng::derive_seed;
use roofsense_core::split::{stratified_split, SplitParams};
use roofsense_core::synth::{synth_generate, synth_scene, SceneParams, SynthParams};
use roofsense_core::{patch, BuildingSample, Country, PixelGrid, RasterGrid, Split, Task};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::config::{RunConfig, Source, SynthMode};
use super::experiment::{evaluate, Evaluation, ModelPair};
use super::guard::LeakageGuard;
use super::report::{render_table, EvalSummary, METRICS_FILE};
use super::run::{CheckpointRef, RunLog, RunManifest};
use crate::io::dataset::{load_sample, manifest_hash, read_manifest, update_splits, write_dataset};
use crate::io::geojson::{classified_map, footprints_document, read_footprints, write_json, ClassifiedFeature, LabeledFootprint};
use crate::io::table::{cv_table_csv, read_labels};
use crate::io::{load_raster, save_raster};
use crate::models::checkpoint::{self, history_csv};
use crate::models::train::{train, Examples};
use crate::models::{Arch, BackboneSpec, DirectoryWeights, Modality, Model, Offline, WeightProvider};
use crate::{Error, Result};

pub const SCENE_RGB: &str = "rgb.tif";
pub const SCENE_DSM: &str = "dsm.tif";
pub const SCENE_DTM: &str = "dtm.tif";
pub const SCENE_FOOTPRINTS: &str = "footprints.geojson";

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn open_log(cfg: &RunConfig, name: &str, quiet: bool) -> Result<RunLog> {
    let log = RunLog::create(&cfg.run_dir(name), !cfg.deterministic)?;
    Ok(if quiet { log.quiet() } else { log })
}

/// `ndsm`: DSM minus DTM, written with the DSM's georeferencing.
pub fn cmd_ndsm(dsm: &Path, dtm: &Path, out: &Path, clamp_negative: bool) -> Result<RasterGrid> {
    let ndsm = compute_ndsm(&load_raster(dsm)?, &load_raster(dtm)?, clamp_negative)?;
    save_raster(out, &ndsm, false)?;
    Ok(ndsm)
}

/// `synth`: a rendered survey area, or ready-made patches.
pub fn cmd_synth(cfg: &RunConfig, quiet: bool) -> Result<Value> {
    let s = &cfg.data.synthetic;
    let dir = cfg.synth_dir();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut log = open_log(cfg, "synth", quiet)?;
    let seed = derive_seed(cfg.seed, "synth");
    let summary = match s.mode {
        SynthMode::Scene => {
            let params = SceneParams {
                n_buildings: s.n,
                task: cfg.task,
                seed,
                difficulty: s.difficulty,
                rgb_cell_size: s.rgb_cell_size,
                lidar_cell_size: s.lidar_cell_size,
                spacing: s.spacing,
                dominica_share: s.dominica_share,
                ..SceneParams::default()
            };
            let scene = synth_scene(&params)?;
            save_raster(dir.join(SCENE_RGB), &scene.rgb, true)?;
            save_raster(dir.join(SCENE_DSM), &scene.dsm, false)?;
            save_raster(dir.join(SCENE_DTM), &scene.dtm, false)?;
            let items: Vec<LabeledFootprint> = scene
                .buildings
                .iter()
                .map(|b| LabeledFootprint {
                    footprint: roofsense_core::geom::Footprint {
                        building_id: b.building_id.clone(),
                        polygon: b.polygon.clone(),
                        country: b.country,
                    },
                    roof_type: Some(b.roof_type),
                    roof_material: Some(b.roof_material),
                })
                .collect();
            write_json(dir.join(SCENE_FOOTPRINTS), &footprints_document(&items, Some(scene.rgb.crs_id())))?;
            json!({ "mode": "scene", "buildings": items.len(), "dir": dir })
        }
        SynthMode::Patches => {
            let params = SynthParams { side: s.side, difficulty: s.difficulty, dominica_share: s.dominica_share };
            let samples = synth_generate(s.n, cfg.task, seed, &params)?;
            write_dataset(&dir.join("patches"), &samples, &json!({ "generator": "synth_generate", "params": s }))?;
            json!({ "mode": "patches", "samples": samples.len(), "dir": dir.join("patches") })
        }
    };
    log.info("synth", summary.clone());
    let mut manifest = RunManifest::start("synth", cfg);
    manifest.outputs = summary.clone();
    manifest.write(&cfg.run_dir("synth"))?;
    Ok(summary)
}

fn raster_for<'a>(rasters: &'a [RasterGrid], poly: &Polygon) -> Option<&'a RasterGrid> {
    let b = poly.bbox();
    rasters.iter().find(|r| r.extent().intersects(&b))
}

fn crop(rasters: &[RasterGrid], poly: &Polygon, scale: f64) -> Result<Option<PixelGrid>> {
    match raster_for(rasters, poly) {
        None => Ok(None),
        Some(r) => match patch::extract_patch(r, poly, scale) {
            Ok(p) => Ok(Some(p)),
            Err(roofsense_core::Error::NoIntersection) => Ok(None),
            Err(e) => Err(e.into()),
        },
    }
}

/// File name and content hash, independent of where the file lives.
fn file_digest(path: &Path) -> Result<Value> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(json!({ "file": name, "sha256": hex::encode(Sha256::digest(&bytes)) }))
}

struct Inputs {
    rgb: Vec<RasterGrid>,
    ndsm: RasterGrid,
    footprints: Vec<LabeledFootprint>,
    provenance: Value,
}

fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let (rgb_paths, ndsm_path, dsm, dtm, footprints, labels) = match cfg.data.source {
        Source::Real => {
            cfg.check_inputs()?;
            let r = &cfg.data.real;
            (r.rgb.clone(), r.ndsm.clone(), r.dsm.clone(), r.dtm.clone(), r.footprints.clone().unwrap(), r.labels.clone())
        }
        Source::Synthetic => {
            let d = cfg.synth_dir();
            (vec![d.join(SCENE_RGB)], None, Some(d.join(SCENE_DSM)), Some(d.join(SCENE_DTM)), d.join(SCENE_FOOTPRINTS), None)
        }
    };
    let rgb = rgb_paths.iter().map(load_raster).collect::<Result<Vec<_>>>()?;
    let ndsm = match &ndsm_path {
        Some(p) => load_raster(p)?,
        None => compute_ndsm(
            &load_raster(dsm.as_ref().unwrap())?,
            &load_raster(dtm.as_ref().unwrap())?,
            cfg.extract.clamp_negative,
        )?,
    };
    let mut fps = read_footprints(&footprints)?;
    if let Some(path) = &labels {
        let table = read_labels(path)?;
        for f in &mut fps {
            if let Some(row) = table.get(&f.footprint.building_id) {
                f.roof_type = row.roof_type.or(f.roof_type);
                f.roof_material = row.roof_material.or(f.roof_material);
                if let Some(c) = row.country {
                    f.footprint.country = c;
                }
            }
        }
    }
    let digests = |paths: &[&PathBuf]| paths.iter().map(|p| file_digest(p)).collect::<Result<Vec<_>>>();
    let provenance = json!({
        "rgb": digests(&rgb_paths.iter().collect::<Vec<_>>())?,
        "ndsm": digests(&ndsm_path.iter().collect::<Vec<_>>())?,
        "dsm": digests(&dsm.iter().collect::<Vec<_>>())?,
        "dtm": digests(&dtm.iter().collect::<Vec<_>>())?,
        "clamp_negative": cfg.extract.clamp_negative,
        "footprints": file_digest(&footprints)?,
        "labels": digests(&labels.iter().collect::<Vec<_>>())?,
        "scale": cfg.extract.scale,
    });
    Ok(Inputs { rgb, ndsm, footprints: fps, provenance })
}

fn class_counts(samples: &[BuildingSample]) -> Value {
    let mut out = serde_json::Map::new();
    for task in [Task::RoofType, Task::RoofMaterial] {
        let mut counts: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
        for s in samples {
            if let Some(l) = s.label(task) {
                let name = task.schema().name(l).unwrap_or("?");
                *counts.entry(name).or_default().entry(s.country.as_str()).or_default() += 1;
            }
        }
        out.insert(task.as_str().into(), json!(counts));
    }
    Value::Object(out)
}

fn country_totals(samples: &[BuildingSample]) -> Value {
    let n = |c: Country| samples.iter().filter(|s| s.country == c).count();
    json!({
        "Dominica": n(Country::Dominica),
        "SaintLucia": n(Country::SaintLucia),
        "Other": n(Country::Other),
        "total": samples.len(),
    })
}

/// `extract`: crops paired patches for every footprint and packages them.
pub fn cmd_extract(cfg: &RunConfig, quiet: bool) -> Result<Value> {
    let mut log = open_log(cfg, "extract", quiet)?;
    let root = cfg.dataset_dir();
    let mut skipped = Vec::new();
    let (samples, provenance) = if cfg.data.source == Source::Synthetic && cfg.data.synthetic.mode == SynthMode::Patches {
        let src = cfg.synth_dir().join("patches");
        let entries = read_manifest(&src)?;
        let samples = entries.iter().map(|e| load_sample(&src, e)).collect::<Result<Vec<_>>>()?;
        (samples, json!({ "patches": manifest_hash(&src)? }))
    } else {
        let inputs = load_inputs(cfg)?;
        let mut samples = Vec::with_capacity(inputs.footprints.len());
        for f in &inputs.footprints {
            let poly = &f.footprint.polygon;
            let rgb = crop(&inputs.rgb, poly, cfg.extract.scale)?;
            let lidar = crop(std::slice::from_ref(&inputs.ndsm), poly, cfg.extract.scale)?;
            match (rgb, lidar) {
                (Some(rgb), Some(lidar)) => samples.push(BuildingSample {
                    building_id: f.footprint.building_id.clone(),
                    rgb,
                    lidar,
                    roof_type: f.roof_type,
                    roof_material: f.roof_material,
                    country: f.footprint.country,
                    split: Split::Unassigned,
                }),
                _ => {
                    log.warn("footprint_outside_raster", json!({ "building_id": f.footprint.building_id }));
                    skipped.push(f.footprint.building_id.clone());
                }
            }
        }
        (samples, inputs.provenance)
    };
    write_dataset(&root, &samples, &provenance)?;
    let summary = json!({
        "dataset": root,
        "manifest_sha256": manifest_hash(&root)?,
        "totals": country_totals(&samples),
        "classes": class_counts(&samples),
        "skipped": skipped.len(),
        "skipped_ids": skipped,
    });
    log.info("extract", json!({ "samples": samples.len(), "skipped": summary["skipped"] }));
    let run = cfg.run_dir("extract");
    write_json(run.join("extract_report.json"), &summary)?;
    let mut manifest = RunManifest::start("extract", cfg);
    manifest.dataset_hash = Some(manifest_hash(&root)?);
    manifest.outputs = summary.clone();
    manifest.write(&run)?;
    Ok(summary)
}

/// `split`: stratified train/test assignment written back to the manifest.
pub fn cmd_split(cfg: &RunConfig, quiet: bool) -> Result<Value> {
    let mut log = open_log(cfg, "split", quiet)?;
    let root = cfg.dataset_dir();
    let entries = read_manifest(&root)?;
    let labels = entries.iter().map(|e| e.label(cfg.task)).collect::<Result<Vec<_>>>()?;
    let countries: Vec<Country> = entries.iter().map(|e| e.country).collect();
    let params =
        SplitParams { train_frac: cfg.split.train_frac, seed: derive_seed(cfg.seed, "split"), region: cfg.split.region };
    let a = stratified_split(&labels, &countries, cfg.task, &params)?;
    let map: BTreeMap<String, Split> = entries.iter().zip(&a.splits).map(|(e, &s)| (e.building_id.clone(), s)).collect();
    update_splits(&root, &map)?;
    let counts: BTreeMap<&str, Value> = a
        .counts
        .iter()
        .enumerate()
        .map(|(k, c)| (cfg.task.schema().name(k).unwrap_or("?"), json!({ "train": c.train, "test": c.test })))
        .collect();
    let summary = json!({ "task": cfg.task.as_str(), "counts": counts, "region": cfg.split.region });
    log.info("split", summary.clone());
    let mut manifest = RunManifest::start("split", cfg);
    manifest.dataset_hash = Some(manifest_hash(&root)?);
    manifest.outputs = summary.clone();
    manifest.write(&cfg.run_dir("split"))?;
    Ok(summary)
}

/// Labelled samples of the given split, in manifest order.
pub fn labelled_split(root: &Path, task: Task, split: Split) -> Result<Vec<BuildingSample>> {
    let entries = read_manifest(root)?;
    let mut out = Vec::new();
    for e in entries.iter().filter(|e| e.split == split) {
        if e.label(task)?.is_some() {
            out.push(load_sample(root, e)?);
        }
    }
    Ok(out)
}

/// The backbone configured for `modality`.
pub fn backbone_spec(cfg: &RunConfig, modality: Modality) -> BackboneSpec {
    let arch = cfg.arch(modality);
    let (c, k) = (modality.channels(), cfg.task.num_classes());
    let mut spec = match arch {
        Arch::TinyTest => BackboneSpec::tiny(
            cfg.models.side.unwrap_or(arch.default_side()),
            cfg.models.embedding_dim.unwrap_or(arch.default_embedding()),
            c,
            k,
        ),
        _ => BackboneSpec::new(arch, c, k),
    };
    if let Some(p) = cfg.models.pretrained {
        spec.pretrained = p;
    }
    spec
}

/// Builds an untrained model with the configured seed and weight source.
pub fn build_model(cfg: &RunConfig, modality: Modality, train_patches: &[&PixelGrid]) -> Result<Model> {
    let spec = backbone_spec(cfg, modality);
    let provider: Box<dyn WeightProvider> = match DirectoryWeights::from_env() {
        Some(d) => Box::new(d),
        None => Box::new(Offline),
    };
    let mut model = Model::build(&spec, cfg.task, derive_seed(cfg.seed, &format!("init:{}", modality.as_str())), &*provider)?;
    if modality == Modality::Rgb && !spec.pretrained {
        model.norm.fit(train_patches);
    }
    Ok(model)
}

pub fn examples(samples: &[BuildingSample], task: Task, modality: Modality) -> Result<Examples> {
    Ok(Examples {
        ids: samples.iter().map(|s| s.building_id.clone()).collect(),
        patches: samples.iter().map(|s| modality.patch(s).clone()).collect(),
        labels: super::experiment::labels(samples, task)?,
    })
}

/// `train`: fits one backbone on the train split and writes a checkpoint.
pub fn cmd_train(cfg: &RunConfig, modality: Modality, resume: bool, quiet: bool) -> Result<PathBuf> {
    let root = cfg.dataset_dir();
    let data_hash = manifest_hash(&root)?;
    let samples = labelled_split(&root, cfg.task, Split::Train)?;
    if samples.is_empty() {
        return Err(Error::Invalid("no labelled training samples; run split first".into()));
    }
    let name = format!("train-{}", modality.as_str());
    let mut log = open_log(cfg, &name, quiet)?;
    let mut tcfg = cfg.train.clone();
    tcfg.seed = derive_seed(cfg.seed, &format!("train:{}", modality.as_str()));
    if !tcfg.plateau_reachable() {
        log.warn(
            "plateau_unreachable",
            json!({ "plateau_patience": tcfg.plateau_patience, "max_epochs": tcfg.max_epochs }),
        );
    }
    let dir = cfg.checkpoint_dir(modality);
    let (mut model, state) = if resume && dir.join(checkpoint::META_FILE).exists() {
        let (model, meta, state) = checkpoint::resume(&dir)?;
        if meta.spec != backbone_spec(cfg, modality) || meta.task != cfg.task {
            return Err(Error::Invalid(format!("checkpoint {} was made with a different model or task", dir.display())));
        }
        log.info("resume", json!({ "checkpoint": dir, "epochs_done": state.epochs_done }));
        (model, Some(state))
    } else {
        let refs: Vec<&PixelGrid> = samples.iter().map(|s| modality.patch(s)).collect();
        (build_model(cfg, modality, &refs)?, None)
    };
    if !model.init.comparable {
        log.warn(
            "pretrained_weights_missing",
            json!({ "arch": model.spec.arch.as_str(), "hint": crate::models::init::WEIGHTS_DIR_ENV }),
        );
    }
    let ex = examples(&samples, cfg.task, modality)?;
    let state = train(&mut model, &ex, None, &tcfg, state)?;
    for r in &state.history {
        log.info("epoch", json!(r));
    }
    let meta = checkpoint::save(&dir, &model, modality, &tcfg, &state, Some(data_hash.clone()))?;
    write_text(&dir.join("history.csv"), &history_csv(&state.history)?)?;
    let mut manifest = RunManifest::start(&name, cfg);
    manifest.dataset_hash = Some(data_hash);
    manifest.checkpoints.push(CheckpointRef { path: dir.clone(), weights_sha256: meta.weights_sha256 });
    manifest.outputs = json!({ "epochs_done": state.epochs_done, "history": dir.join("history.csv") });
    manifest.write(&cfg.run_dir(&name))?;
    Ok(dir)
}

/// Result directory name for the configured strategy.
pub fn fuse_eval_name(cfg: &RunConfig) -> String {
    let s = cfg.fusion.strategy;
    if s.uses_downstream() {
        format!("fuse-eval-{}-{}", s.as_str(), cfg.fusion.family.as_str())
    } else {
        format!("fuse-eval-{}", s.as_str())
    }
}

/// `fuse-eval`: fits the configured strategy on the train split and scores
/// it once on the test split.
pub fn cmd_fuse_eval(cfg: &RunConfig, quiet: bool) -> Result<(EvalSummary, PathBuf)> {
    let root = cfg.dataset_dir();
    let data_hash = manifest_hash(&root)?;
    let entries = read_manifest(&root)?;
    let labelled_test = entries.iter().filter(|e| e.split == Split::Test).filter(|e| matches!(e.label(cfg.task), Ok(Some(_))));
    if labelled_test.count() == 0 {
        return Err(Error::Invalid("test split is empty; nothing to evaluate".into()));
    }
    let strategy = cfg.fusion.strategy;
    let mut loaded = Vec::new();
    for &m in strategy.modalities() {
        let dir = cfg.checkpoint_dir(m);
        let (model, meta) = checkpoint::load(&dir)?;
        if meta.modality != m {
            return Err(Error::Invalid(format!("{} holds a {} model", dir.display(), meta.modality.as_str())));
        }
        loaded.push((m, model, meta, dir));
    }
    let name = fuse_eval_name(cfg);
    let run = cfg.run_dir(&name);
    let mut log = open_log(cfg, &name, quiet)?;
    for (m, _, meta, _) in &loaded {
        if meta.dataset_hash.as_deref() != Some(data_hash.as_str()) {
            log.warn("checkpoint_dataset_changed", json!({ "modality": m.as_str() }));
        }
    }
    let pair = ModelPair {
        rgb: loaded.iter().find(|l| l.0 == Modality::Rgb).map(|l| &l.1),
        lidar: loaded.iter().find(|l| l.0 == Modality::Lidar).map(|l| &l.1),
    };
    let train = labelled_split(&root, cfg.task, Split::Train)?;
    let test_ids: Vec<String> = entries.iter().filter(|e| e.split == Split::Test).map(|e| e.building_id.clone()).collect();
    let mut guard = LeakageGuard::new(test_ids);
    let eval = evaluate(
        strategy,
        cfg.fusion.family,
        cfg.task,
        cfg.seed,
        pair,
        &train,
        || labelled_split(&root, cfg.task, Split::Test),
        &mut guard,
    )?;
    guard.check()?;
    let summary = write_evaluation(&run, cfg, &eval, &guard)?;
    log.info(
        "fuse_eval",
        json!({
            "strategy": strategy.as_str(),
            "macro_f1": summary.metrics.macro_f1,
            "accuracy": summary.metrics.accuracy,
            "zero_division_classes": summary.metrics.zero_division_classes(),
        }),
    );
    let mut manifest = RunManifest::start("fuse-eval", cfg);
    manifest.dataset_hash = Some(data_hash);
    for (_, model, _, dir) in &loaded {
        manifest.checkpoints.push(CheckpointRef { path: dir.clone(), weights_sha256: model.weights_hash()? });
    }
    manifest.cv_table = eval.search.as_ref().map(|_| run.join("cv_table.csv"));
    manifest.metrics = Some(eval.metrics.clone());
    manifest.outputs = json!({ "metrics": run.join(METRICS_FILE), "report": run.join("report.txt") });
    manifest.write(&run)?;
    Ok((summary, run))
}

fn write_evaluation(run: &Path, cfg: &RunConfig, eval: &Evaluation, guard: &LeakageGuard) -> Result<EvalSummary> {
    fs::create_dir_all(run).map_err(|e| Error::io(run, e))?;
    let summary = EvalSummary::from_evaluation(eval);
    write_text(&run.join(METRICS_FILE), &serde_json::to_string_pretty(&summary)?)?;
    write_text(&run.join("report.txt"), &render_table(std::slice::from_ref(&summary)))?;
    write_text(&run.join("access_log.json"), &serde_json::to_string_pretty(&guard.events)?)?;
    let schema = cfg.task.schema();
    let mut preds = String::from("building_id,predicted_class\n");
    for (id, &p) in eval.test_ids.iter().zip(&eval.predictions) {
        preds.push_str(&format!("{id},{}\n", schema.name(p).unwrap_or("?")));
    }
    write_text(&run.join("predictions.csv"), &preds)?;
    if let Some(search) = &eval.search {
        write_text(&run.join("cv_table.csv"), &cv_table_csv(&search.table)?)?;
        let sidecar = json!({
            "task": cfg.task.as_str(),
            "classes": schema.classes(),
            "layout": eval.layout,
            "best": search.best,
            "classifier": search.classifier,
        });
        write_text(&run.join("classifier.json"), &serde_json::to_string_pretty(&sidecar)?)?;
    }
    Ok(summary)
}

/// Inputs of `predict-map`.
#[derive(Debug, Clone, Default)]
pub struct MapRequest {
    pub checkpoints: Vec<PathBuf>,
    pub rgb: Vec<PathBuf>,
    pub ndsm: Option<PathBuf>,
    pub dsm: Option<PathBuf>,
    pub dtm: Option<PathBuf>,
    pub footprints: PathBuf,
    pub out: PathBuf,
    pub scale: f64,
    /// Resample rasters to this cell size before cropping.
    pub cell_size: Option<f64>,
}

/// `predict-map`: classifies every footprint and writes a GeoJSON map.
/// Footprints outside every raster are classified from an all-zero patch.
pub fn cmd_predict_map(req: &MapRequest) -> Result<usize> {
    if req.checkpoints.is_empty() || req.checkpoints.len() > 2 {
        return Err(Error::Invalid("predict-map takes one or two checkpoints".into()));
    }
    let mut models = Vec::new();
    for dir in &req.checkpoints {
        let (model, meta) = checkpoint::load(dir)?;
        models.push((meta.modality, model));
    }
    if models.len() == 2 && (models[0].0 == models[1].0 || models[0].1.task != models[1].1.task) {
        return Err(Error::Invalid("two checkpoints must be one RGB and one LiDAR model for the same task".into()));
    }
    let task = models[0].1.task;
    let footprints = read_footprints(&req.footprints)?;
    let prep = |r: RasterGrid, method| -> Result<RasterGrid> {
        Ok(match req.cell_size {
            Some(cs) if (cs - r.cell_size()).abs() > 1e-12 => resample(&r, cs, method)?,
            _ => r,
        })
    };
    let mut probs: Vec<IdRows> = Vec::new();
    let mut crs = None;
    for (modality, model) in &models {
        let rasters: Vec<RasterGrid> = match modality {
            Modality::Rgb => req.rgb.iter().map(|p| prep(load_raster(p)?, Resampling::Bilinear)).collect::<Result<_>>()?,
            Modality::Lidar => vec![prep(
                match (&req.ndsm, &req.dsm, &req.dtm) {
                    (Some(p), _, _) => load_raster(p)?,
                    (None, Some(s), Some(t)) => compute_ndsm(&load_raster(s)?, &load_raster(t)?, true)?,
                    _ => return Err(Error::Invalid("a LiDAR checkpoint needs --ndsm or --dsm and --dtm".into())),
                },
                Resampling::Bilinear,
            )?],
        };
        if rasters.is_empty() {
            return Err(Error::Invalid(format!("no {} rasters given", modality.as_str())));
        }
        crs.get_or_insert_with(|| rasters[0].crs_id().to_string());
        let mut patches = Vec::with_capacity(footprints.len());
        for f in &footprints {
            let poly = &f.footprint.polygon;
            patches.push(match crop(&rasters, poly, req.scale)? {
                Some(p) => p,
                None => {
                    let (b, cs) = (poly.bbox(), rasters[0].cell_size());
                    let side = |m: f64| ((req.scale * m / cs).round() as usize).max(1);
                    PixelGrid::zeros(modality.channels(), side(b.height()), side(b.width()))
                }
            });
        }
        let ids = footprints.iter().map(|f| f.footprint.building_id.clone()).collect();
        probs.push(IdRows::new(ids, model.predict_softmax(&patches)?)?);
    }
    let p = if probs.len() == 2 { mean_softmax(&probs[0], &probs[1])? } else { probs.remove(0) };
    let schema = task.schema();
    let items: Vec<ClassifiedFeature> = footprints
        .iter()
        .zip(p.values.iter_rows())
        .map(|(f, row)| {
            let c = argmax(row);
            ClassifiedFeature {
                footprint: f.footprint.clone(),
                predicted_class: schema.name(c).unwrap_or("?").to_string(),
                confidence: row[c],
            }
        })
        .collect();
    let mut refs = Vec::new();
    for (m, model) in &models {
        refs.push(format!("{}:{}@{}", m.as_str(), model.spec.arch.as_str(), &model.weights_hash()?[..12]));
    }
    write_json(&req.out, &classified_map(&items, &refs.join("+"), crs.as_deref()))?;
    Ok(items.len())
}

/// `report`: the results table for one or more `fuse-eval` outputs.
pub fn cmd_report(paths: &[PathBuf]) -> Result<String> {
    let rows = paths.iter().map(|p| EvalSummary::read(p)).collect::<Result<Vec<_>>>()?;
    Ok(render_table(&rows))
}
