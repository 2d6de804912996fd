use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use visage_core::architectures::{
    build_deepvisage, build_mnist2d_with, ArchitectureSpec, CenterLossSpec, FeatureTap, LayerKind, Mnist2dConfig, Model,
};
use visage_core::data::{load_mnist, ImageDataset};
use visage_core::preprocess::{align_face, parse_landmark_manifest, to_grayscale, RgbImage, CANONICAL_LANDMARKS};
use visage_core::tensor_core::gradcheck::{standard_suite, SUITE_OPS};
use visage_core::tensor_core::{write_atomic, Checkpoint, NormMode, Tensor};
use visage_core::trainer::{accuracy, derive_rng, format_metrics_log, train as run_training};
use visage_core::verification::{
    angular_scatter, contiguous_folds, exhaustive_counts_at, exhaustive_histogram, extract_embeddings, kfold_accuracy,
    parse_embedding_manifest, parse_fold_file, parse_pair_list, rank_errors, read_embedding_store, roc_curve, roc_to_tsv,
    select_threshold, tar_at_far, write_embedding_manifest, write_embedding_store, EmbeddingStore, ManifestRow, Report,
    ScoreSet, ScoredPair,
};
use visage_core::{Error, Result};

use crate::config::{Arch, RunConfig};

const MODEL_INIT_STREAM: u64 = 1;
const EMBED_BATCH: usize = 32;

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    value.as_deref().ok_or_else(|| Error::Usage(format!("--{flag} is required")))
}

/// Layout file stored next to a checkpoint.
fn arch_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("arch")
}

fn with_classes(mut spec: ArchitectureSpec, classes: usize) -> ArchitectureSpec {
    spec.num_classes = classes;
    if let Some(head) = spec.layers.iter_mut().find(|l| l.kind == LayerKind::ClassifierHead) {
        head.width = classes;
    }
    spec
}

fn build_spec(config: &RunConfig, classes: usize) -> Result<ArchitectureSpec> {
    let center_loss = config.cl_on.then(CenterLossSpec::default);
    match config.arch {
        Arch::Mnist2d => Ok(with_classes(
            build_mnist2d_with(Mnist2dConfig { feature_norm: config.fn_on, center_loss, widths: config.widths }),
            classes,
        )),
        Arch::Deepvisage => {
            let mut spec = build_deepvisage(classes)?;
            if !config.fn_on {
                spec.layers.retain(|l| l.kind != LayerKind::FeatureNorm);
            }
            spec.center_loss = center_loss;
            Ok(spec)
        }
    }
}

/// Model described by the layout file beside `checkpoint`, or by the config
/// when there is none, with the checkpoint's weights.
fn load_model(config: &RunConfig, checkpoint: &Path) -> Result<Model<f32>> {
    let spec = match std::fs::read_to_string(arch_path(checkpoint)) {
        Ok(text) => text.parse::<ArchitectureSpec>()?,
        Err(_) => build_spec(config, config.num_classes)?,
    };
    let mut model = Model::new(spec, &mut derive_rng(config.seed, MODEL_INIT_STREAM))?;
    model.load_checkpoint(&Checkpoint::load(checkpoint)?)?;
    model.set_mode(NormMode::Eval);
    Ok(model)
}

fn load_train_set(config: &RunConfig) -> Result<ImageDataset> {
    let data = load_mnist(&config.data, "train")?;
    if config.train_limit > 0 && config.train_limit < data.len() {
        Ok(data.subset(&(0..config.train_limit).collect::<Vec<_>>()))
    } else {
        Ok(data)
    }
}

pub fn train(config: &RunConfig) -> Result<()> {
    if config.train.schedule.total_epochs == 0 {
        return Err(Error::Usage("nothing to train: epochs is 0".into()));
    }
    let data = load_train_set(config)?;
    let spec = build_spec(config, data.num_classes().max(2))?;
    let mut model = Model::new(spec.clone(), &mut derive_rng(config.seed, MODEL_INIT_STREAM))?;
    println!("epoch\tlr\ttrain_loss\tmonitor_acc");
    let outcome = run_training(&mut model, &data, &config.train, |m| {
        println!("{}\t{}\t{:.6}\t{:.6}", m.epoch, m.lr, m.train_loss, m.monitor_acc);
    })?;
    ensure_dir(&config.out)?;
    let checkpoint = config.out.join("model.dvck");
    model.to_checkpoint(true).save(&checkpoint)?;
    write_text(&arch_path(&checkpoint), &spec.to_text())?;
    write_text(&config.out.join("metrics.tsv"), &format_metrics_log(&outcome.metrics))?;
    if let Ok(test) = load_mnist(&config.data, "t10k") {
        if test.shape() == spec.input_shape {
            model.set_mode(NormMode::Eval);
            let idx: Vec<usize> = (0..test.len()).collect();
            let acc = accuracy(&mut model, &test, &idx, config.train.eval_batch)?;
            println!("test_accuracy\t{acc:.6}");
            write_text(&config.out.join("test.tsv"), &format!("metric\tvalue\ntest_accuracy\t{acc}\n"))?;
        }
    }
    eprintln!("wrote {}", checkpoint.display());
    Ok(())
}

pub fn gradcheck(config: &RunConfig) -> Result<u8> {
    if let Some(op) = &config.op {
        if !SUITE_OPS.iter().any(|o| o.contains(op.as_str())) {
            return Err(Error::Usage(format!("unknown operation {op:?}; known: {}", SUITE_OPS.join(", "))));
        }
    }
    let reports = standard_suite(config.seed, config.tolerance, config.op.as_deref())?;
    println!("op\tmax_rel_error\ttolerance\tresult");
    let mut failed = false;
    for r in &reports {
        let verdict = if r.passed() { "PASS" } else { "FAIL" };
        failed |= !r.passed();
        println!("{}\t{:.3e}\t{:e}\t{verdict}", r.op, r.worst(), r.tolerance);
        for g in &r.groups {
            println!("  {}\t{:.3e}\t{} elements", g.name, g.max_rel_error, g.elements);
        }
    }
    Ok(if failed { 3 } else { 0 })
}

fn load_rgb(path: &Path) -> Result<RgbImage> {
    let img = image::open(path).map_err(|e| Error::format("image", format!("{}: {e}", path.display())))?;
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    RgbImage::new(h as usize, w as usize, rgb.into_raw().into_iter().map(f32::from).collect())
}

/// Identity label of an image: its parent directory name.
fn identity_of(path: &Path) -> String {
    path.parent()
        .and_then(Path::file_name)
        .map(|n| n.to_string_lossy().into_owned())
        .filter(|n| !n.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

pub fn embed(config: &RunConfig) -> Result<()> {
    let checkpoint = required(&config.checkpoint, "checkpoint")?;
    let manifest_path = required(&config.manifest, "manifest")?;
    let mut model = load_model(config, checkpoint)?;
    if model.spec().input_shape != [1, 112, 96] {
        return Err(Error::Usage(format!("embed needs a 1x112x96 input model, checkpoint has {:?}", model.spec().input_shape)));
    }
    let records = parse_landmark_manifest(&std::fs::read_to_string(manifest_path)?)?;
    let root = config
        .image_root
        .clone()
        .unwrap_or_else(|| manifest_path.parent().map(Path::to_path_buf).unwrap_or_default());
    let mut faces = Vec::new();
    let mut rows = Vec::new();
    let mut provenance = String::from("row_index\timage_path\tprovenance\n");
    for rec in &records {
        let path = root.join(&rec.image_path);
        let face = load_rgb(&path).and_then(|rgb| align_face(&to_grayscale(&rgb), &rec.landmarks, &rec.bbox, &CANONICAL_LANDMARKS));
        match face {
            Ok(face) => {
                writeln!(provenance, "{}\t{}\t{}", rows.len(), rec.image_path.display(), face.provenance.as_str()).expect("String write");
                rows.push(ManifestRow { row: rows.len(), image_path: rec.image_path.clone(), identity: identity_of(&rec.image_path) });
                faces.push(face.pixels.into_data());
            }
            Err(e) => eprintln!("skipping {}: {e}", rec.image_path.display()),
        }
    }
    if faces.is_empty() {
        return Err(Error::format("landmark manifest", "no embeddings written"));
    }
    let mut values = Vec::new();
    let mut dim = 0;
    for chunk in faces.chunks(EMBED_BATCH) {
        let batch = Tensor::new(&[chunk.len(), 1, 112, 96], chunk.concat())?;
        for e in extract_embeddings(&mut model, &batch)? {
            dim = e.len();
            values.extend(e);
        }
    }
    ensure_dir(&config.out)?;
    let store_path = config.out.join("embeddings.dvem");
    write_embedding_store(&store_path, &EmbeddingStore::new(dim, values)?)?;
    write_text(&store_path.with_extension("manifest"), &write_embedding_manifest(&rows))?;
    write_text(&config.out.join("provenance.tsv"), &provenance)?;
    println!("embeddings\t{}\ndim\t{dim}\nskipped\t{}", rows.len(), records.len() - rows.len());
    Ok(())
}

pub fn eval(config: &RunConfig) -> Result<()> {
    let store_path = required(&config.store, "store")?;
    let store = read_embedding_store(store_path)?;
    let manifest = parse_embedding_manifest(&std::fs::read_to_string(store_path.with_extension("manifest"))?)?;
    if manifest.iter().any(|r| r.row >= store.count()) {
        return Err(Error::format("embedding manifest", "row index beyond the store"));
    }
    ensure_dir(&config.out)?;
    let mut report = Report::default();
    match &config.pairs {
        Some(pairs_path) => eval_pairs(config, &store, &manifest, pairs_path, &mut report)?,
        None => eval_exhaustive(config, &store, &manifest, &mut report)?,
    }
    let tsv = report.to_tsv();
    print!("{tsv}");
    write_text(&config.out.join("report.tsv"), &tsv)
}

fn eval_pairs(config: &RunConfig, store: &EmbeddingStore, manifest: &[ManifestRow], pairs_path: &Path, report: &mut Report) -> Result<()> {
    let by_path: HashMap<&Path, usize> = manifest.iter().map(|r| (r.image_path.as_path(), r.row)).collect();
    let pairs = parse_pair_list(&std::fs::read_to_string(pairs_path)?)?;
    let mut scored = Vec::with_capacity(pairs.len());
    for (i, p) in pairs.iter().enumerate() {
        let lookup = |path: &Path| {
            by_path.get(path).copied().ok_or_else(|| {
                Error::format("pair list", format!("pair {} ({}, {}): no embedding for {}", i + 1, p.a.display(), p.b.display(), path.display()))
            })
        };
        let (a, b) = (lookup(&p.a)?, lookup(&p.b)?);
        let score = visage_core::verification::cosine_similarity(store.row(a), store.row(b))?;
        scored.push(ScoredPair { score, genuine: p.genuine });
    }
    let scores = ScoreSet::new(scored)?;
    let folds = match &config.folds {
        Some(path) => parse_fold_file(&std::fs::read_to_string(path)?)?,
        None => contiguous_folds(scores.len(), config.kfolds)?,
    };
    report.push("pairs", scores.len());
    report.push("genuine", scores.genuine_count());
    report.push("impostor", scores.impostor_count());
    report.push_folds(&kfold_accuracy(&scores, &folds)?);
    let roc = roc_curve(&scores)?;
    for &t in &config.far_targets {
        report.push(format!("tar@far={t}"), tar_at_far(&roc, t));
    }
    write_text(&config.out.join("roc.tsv"), &roc_to_tsv(&roc))?;

    let threshold = select_threshold(&scores.pairs);
    let threshold = if threshold.is_finite() { threshold } else { 1.0 };
    let ranking = rank_errors(&scores, threshold)?;
    report.push("threshold", threshold);
    report.push("false_accepts", ranking.false_accepts.len());
    report.push("false_rejects", ranking.false_rejects.len());
    report.push("fa_fr_ratio", ranking.ratio().map_or("inf".to_string(), |r| r.to_string()));
    let mut errors = String::from("kind\trank\tscore\tpath_a\tpath_b\n");
    for (kind, list) in [("false_accept", &ranking.false_accepts), ("false_reject", &ranking.false_rejects)] {
        for (rank, r) in list.iter().enumerate() {
            let p = &pairs[r.index];
            writeln!(errors, "{kind}\t{}\t{}\t{}\t{}", rank + 1, r.score, p.a.display(), p.b.display()).expect("String write");
        }
    }
    write_text(&config.out.join("errors.tsv"), &errors)
}

fn eval_exhaustive(config: &RunConfig, store: &EmbeddingStore, manifest: &[ManifestRow], report: &mut Report) -> Result<()> {
    let mut ids: HashMap<&str, usize> = HashMap::new();
    let mut labels = vec![usize::MAX; store.count()];
    for r in manifest {
        let next = ids.len();
        labels[r.row] = *ids.entry(r.identity.as_str()).or_insert(next);
    }
    if labels.contains(&usize::MAX) {
        return Err(Error::format("embedding manifest", "some store rows have no manifest entry"));
    }
    let threads = config.threads();
    let hist = exhaustive_histogram(&store.rows, store.dim, &labels, threads)?;
    report.push("pairs", hist.total());
    report.push("genuine", hist.genuine_total());
    report.push("impostor", hist.impostor_total());
    let roc = hist.roc()?;
    let thresholds: Vec<f64> = config
        .far_targets
        .iter()
        .map(|&t| {
            roc.points
                .iter()
                .filter(|p| p.far <= t)
                .max_by(|a, b| a.tar.total_cmp(&b.tar))
                .map_or(f64::INFINITY, |p| p.threshold)
        })
        .collect();
    let exact = exhaustive_counts_at(&store.rows, store.dim, &labels, &thresholds, threads)?;
    for ((&t, &thr), &(g, i)) in config.far_targets.iter().zip(&thresholds).zip(&exact) {
        report.push(format!("tar@far={t}"), g as f64 / hist.genuine_total() as f64);
        report.push(format!("far_at_threshold@far={t}"), i as f64 / hist.impostor_total() as f64);
        report.push(format!("threshold@far={t}"), thr);
    }
    write_text(&config.out.join("roc.tsv"), &roc_to_tsv(&roc))
}

pub fn features2d(config: &RunConfig) -> Result<()> {
    let checkpoint = required(&config.checkpoint, "checkpoint")?;
    let mut model = load_model(config, checkpoint)?;
    if model.spec().feature_dim != 2 {
        return Err(Error::Usage(format!("features2d needs a 2-D feature layer, model has {}", model.spec().feature_dim)));
    }
    let test = load_mnist(&config.data, "t10k")?;
    let n = if config.limit > 0 { config.limit.min(test.len()) } else { test.len() };
    let idx: Vec<usize> = (0..n).collect();
    let mut features = Vec::with_capacity(n);
    for part in idx.chunks(config.train.eval_batch) {
        let (x, _) = test.batch(part);
        features.extend(model.features(&x, FeatureTap::PostNorm)?.rows().map(<[f32]>::to_vec));
    }
    let labels = &test.labels()[..n];
    let mut dump = String::new();
    for (f, l) in features.iter().zip(labels) {
        writeln!(dump, "{} {} {l}", f[0], f[1]).expect("String write");
    }
    ensure_dir(&config.out)?;
    write_text(&config.out.join("features2d.txt"), &dump)?;
    match angular_scatter(&features, labels) {
        Ok(s) => {
            let summary = format!("metric\tvalue\nbetween\t{}\nwithin\t{}\nratio\t{}\n", s.between, s.within, s.ratio);
            print!("{summary}");
            write_text(&config.out.join("scatter.tsv"), &summary)?;
        }
        Err(e) => eprintln!("no scatter summary: {e}"),
    }
    Ok(())
}
