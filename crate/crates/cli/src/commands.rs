use std::collections::{BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;

use periscope::binio::config_hash;
use periscope::corpus::{
    distance_group_radii, implied_annotation, load_image, load_manifest, load_normalized, normalize_image,
    save_gray_png, synth_corpus, write_manifest, NormalizationConfig, NormalizationMode, RadiusScope,
};
use periscope::deepfeat::{load_graph, randomize_weights, ExtractConfig, GraphHandle, LayerRef};
use periscope::handfeat::{self, BlockHistogramConfig, FeatureStore, KeypointStore, LbpMapping, SiftConfig};
use periscope::protocol::{enumerate_pairs, make_partition, read_pairs, write_pairs, PartitionFile, SplitRule};
use periscope::simeng::{score_pairs, Features, RatioDenominator, ScoringConfig, SiftRatioConfig};
use periscope::sweep::{
    best_layer, emit_report, run_sweep, transfer_matrix, LayerSweepResult, PartitionLabel, Report, SweepConfig, Target,
};
use periscope::verimetrics::{eer, error_curve, frr_at_far, percent, EerMethod};
use periscope::{NormalizedImage, PairList, SampleRecord, ScoreSet};

use crate::args::*;
use crate::fail::Failure;

/// Environment variable naming the directory tapped features spill to.
pub const CACHE_ENV: &str = "PERISCOPE_CACHE";

pub struct Ctx {
    pub workdir: PathBuf,
    pub seed: u64,
    pub workers: usize,
    pub dry_run: bool,
}

impl Ctx {
    pub fn new(global: &Global) -> Self {
        Self {
            workdir: global.workdir.clone(),
            seed: global.seed,
            workers: global.workers,
            dry_run: global.dry_run,
        }
    }

    fn path(&self, p: impl AsRef<Path>) -> PathBuf {
        self.workdir.join(p)
    }

    /// Runs `write` unless this is a dry run; parents are created first.
    fn write(&self, path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        if self.dry_run {
            eprintln!("dry run: would write {}", path.display());
            return Ok(());
        }
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        write(path).with_context(|| format!("writing {}", path.display()))
    }

    fn manifest_path(&self, explicit: &Option<PathBuf>) -> PathBuf {
        match explicit {
            Some(p) => self.path(p),
            None => {
                let normalized = self.path("normalized/manifest.csv");
                if normalized.exists() {
                    normalized
                } else {
                    self.path("corpus/manifest.csv")
                }
            }
        }
    }

    fn records(&self, explicit: &Option<PathBuf>) -> Result<Vec<SampleRecord>> {
        let path = self.manifest_path(explicit);
        let manifest = load_manifest(&path).with_context(|| format!("loading manifest {}", path.display()))?;
        if let Some(id) = manifest.missing_images.first() {
            return Err(Failure::input(format!(
                "{}: {} image(s) missing, first for sample `{id}`",
                path.display(),
                manifest.missing_images.len()
            ))
            .into());
        }
        Ok(manifest.records)
    }

    fn pairs_path(&self, partition: &str) -> PathBuf {
        self.path("pairs").join(format!("{partition}.pairs"))
    }

    /// The requested partitions, or every pair file under `pairs/`.
    fn partitions(&self, requested: &[String]) -> Result<Vec<String>> {
        if !requested.is_empty() {
            return Ok(requested.to_vec());
        }
        let dir = self.path("pairs");
        let mut found = BTreeSet::new();
        if let Ok(entries) = std::fs::read_dir(&dir) {
            for entry in entries {
                let path = entry?.path();
                if path.extension().is_some_and(|e| e == "pairs") {
                    if let Some(stem) = path.file_stem() {
                        found.insert(stem.to_string_lossy().into_owned());
                    }
                }
            }
        }
        if found.is_empty() {
            return Err(Failure::input(format!("no partitions under {}; run `partition` first", dir.display())).into());
        }
        Ok(found.into_iter().collect())
    }

    fn load_pairs(&self, partition: &str) -> Result<PairList> {
        let path = self.pairs_path(partition);
        let (pairs, _) = read_pairs(&path).with_context(|| format!("reading pairs {}", path.display()))?;
        Ok(pairs)
    }

    fn label(&self, partition: &str) -> Result<PartitionLabel> {
        let path = self.path("partitions").join(format!("{partition}.json"));
        let protocol = match std::fs::read_to_string(&path) {
            Ok(text) => {
                let file: PartitionFile =
                    serde_json::from_str(&text).with_context(|| format!("reading {}", path.display()))?;
                file.protocol.to_string()
            }
            Err(_) => String::new(),
        };
        Ok(PartitionLabel {
            id: partition.to_string(),
            protocol,
        })
    }

    fn scoring(&self, tile: usize) -> ScoringConfig {
        ScoringConfig {
            workers: self.workers,
            tile,
        }
    }
}

/// Normalized images for `ids`, in the order given.
fn images_for(records: &[SampleRecord], ids: &[String]) -> Result<Vec<NormalizedImage>> {
    let by_id: std::collections::HashMap<&str, &SampleRecord> =
        records.iter().map(|r| (r.sample_id.as_str(), r)).collect();
    let wanted = ids
        .iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Failure::input(format!("sample `{id}` is not in the manifest")))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(wanted
        .par_iter()
        .map(|r| load_normalized(r))
        .collect::<std::result::Result<_, _>>()?)
}

fn check_images(records: &[SampleRecord], ids: &[String]) -> Result<()> {
    let known: HashSet<&str> = records.iter().map(|r| r.sample_id.as_str()).collect();
    if let Some(id) = ids.iter().find(|id| !known.contains(id.as_str())) {
        return Err(Failure::input(format!("sample `{id}` is not in the manifest")).into());
    }
    Ok(())
}

fn require<'a, T>(value: &'a Option<T>, flag: &str, command: &str) -> Result<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| Failure::usage(format!("`{command}` needs --{flag}")).into())
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn synth(ctx: &Ctx, a: &SynthArgs) -> Result<()> {
    let corpus = synth_corpus(a.identities, a.per_id, a.noise, ctx.seed)?;
    let dir = ctx.path(&a.out);
    ctx.write(&dir.join("manifest.csv"), |_| {
        corpus.write(&dir)?;
        Ok(())
    })?;
    println!("{} samples of {} identities", corpus.records.len(), a.identities);
    Ok(())
}

pub fn normalize(ctx: &Ctx, a: &NormalizeArgs) -> Result<()> {
    let cfg = NormalizationConfig {
        target_sclera_radius: a.target_radius,
        crop_factor: a.crop_factor,
        output_side: a.side,
        mode: match a.mode {
            ModeArg::Full => NormalizationMode::Full,
            ModeArg::ResizeOnly => NormalizationMode::ResizeOnly,
        },
        ..Default::default()
    };
    cfg.validate()?;
    let path = match &a.manifest {
        Some(p) => ctx.path(p),
        None => ctx.path("corpus/manifest.csv"),
    };
    let mut records = ctx.records(&Some(path))?;
    if let Some(scope) = a.radius_scope {
        let scope = match scope {
            ScopeArg::Global => RadiusScope::Global,
            ScopeArg::PerSession => RadiusScope::PerSession,
        };
        // every image of a group is scaled by the same factor
        let radii = distance_group_radii(&records, scope);
        for r in &mut records {
            let key = (
                r.distance_group,
                (scope == RadiusScope::PerSession).then_some(r.session),
            );
            if let (Some(ann), Some(&mean)) = (r.sclera.as_mut(), radii.get(&key)) {
                ann.radius = mean;
            }
        }
    }
    if cfg.mode == NormalizationMode::Full {
        if let Some(r) = records.iter().find(|r| r.sclera.is_none()) {
            return Err(periscope::corpus::CorpusError::MissingAnnotation(r.sample_id.clone()).into());
        }
    }
    if ctx.dry_run {
        eprintln!(
            "dry run: would normalize {} images into {}",
            records.len(),
            ctx.path(&a.out).display()
        );
        return Ok(());
    }
    let out = ctx.path(&a.out);
    std::fs::create_dir_all(out.join("images"))?;
    let written: Vec<SampleRecord> = records
        .par_iter()
        .map(|r| -> Result<SampleRecord> {
            let image = normalize_image(r, &load_image(&r.image_path)?, &cfg)?;
            let image_path = out.join("images").join(format!("{}.png", sanitize(&r.sample_id)));
            save_gray_png(&image_path, &image.pixels)?;
            Ok(SampleRecord {
                image_path,
                sclera: (cfg.mode == NormalizationMode::Full).then(|| implied_annotation(&cfg)),
                ..r.clone()
            })
        })
        .collect::<Result<_>>()?;
    write_manifest(out.join("manifest.csv"), &written)?;
    println!("{} images at {}x{}", written.len(), a.side, a.side);
    Ok(())
}

pub fn partition(ctx: &Ctx, a: &PartitionArgs) -> Result<()> {
    let records = ctx.records(&a.manifest)?;
    let rule = match a.protocol {
        ProtocolArg::Complete => SplitRule::Complete,
        ProtocolArg::Cw => SplitRule::ClosedWorld {
            test_per_identity: a.test_per_identity,
        },
        ProtocolArg::Ow => {
            let identities = records.iter().map(|r| r.identity()).collect::<BTreeSet<_>>().len();
            SplitRule::OpenWorld {
                train_identities: a.train_identities.unwrap_or(identities / 2 / 2 * 2),
                keep_subjects_together: !a.split_subjects,
            }
        }
    };
    for spec in make_partition(&records, &rule)? {
        let id = spec.id();
        let pairs = enumerate_pairs(&spec);
        ctx.write(
            &ctx.path("partitions").join(format!("{id}.json")),
            |p| Ok(spec.save(p)?),
        )?;
        ctx.write(&ctx.pairs_path(&id), |p| Ok(write_pairs(p, &pairs, &id)?))?;
        let (g, i) = pairs.counts();
        println!(
            "{id}\tsamples={}\tidentities={}\tgenuine={g}\timpostor={i}",
            spec.len(),
            spec.identity_count
        );
    }
    Ok(())
}

fn block_config(h: &HandArgs) -> BlockHistogramConfig {
    BlockHistogramConfig {
        grid_rows: h.grid_rows,
        grid_cols: h.grid_cols,
        bins: h.bins,
        lbp_mapping: match h.lbp_mapping {
            MappingArg::Popcount => LbpMapping::Popcount,
            MappingArg::Raw => LbpMapping::Raw,
        },
    }
}

fn sift_config(h: &HandArgs) -> SiftConfig {
    SiftConfig {
        max_keypoints: h.max_keypoints,
        ..Default::default()
    }
}

enum Store {
    Dense(FeatureStore),
    Keypoints(KeypointStore),
}

impl Store {
    fn save(&self, path: &Path) -> Result<()> {
        match self {
            Store::Dense(s) => s.save(path)?,
            Store::Keypoints(s) => s.save(path)?,
        }
        Ok(())
    }

    fn load(path: &Path) -> Result<Self> {
        let store = if path.extension().is_some_and(|e| e == "kpts") {
            Store::Keypoints(KeypointStore::load(path)?)
        } else {
            Store::Dense(FeatureStore::load(path)?)
        };
        Ok(store)
    }
}

fn hand_features(descriptor: DescriptorArg, hand: &HandArgs, images: &[NormalizedImage]) -> Result<Store> {
    let block = block_config(hand);
    let store = match descriptor {
        DescriptorArg::Lbph | DescriptorArg::Hog => {
            let vectors = images
                .par_iter()
                .map(|img| match descriptor {
                    DescriptorArg::Lbph => handfeat::lbph(img, &block),
                    _ => handfeat::hog(img, &block),
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let mut store = FeatureStore::from_vectors(vectors, config_hash(&block))?;
            store.descriptor = descriptor.name().into();
            Store::Dense(store)
        }
        DescriptorArg::Sift => {
            let cfg = sift_config(hand);
            let sets = images.par_iter().map(|img| handfeat::sift_detect(img, &cfg)).collect();
            Store::Keypoints(KeypointStore::new(config_hash(&cfg), sets)?)
        }
        DescriptorArg::Deep => unreachable!("deep features come from a graph"),
    };
    Ok(store)
}

fn store_ext(descriptor: DescriptorArg) -> &'static str {
    if descriptor == DescriptorArg::Sift {
        "kpts"
    } else {
        "feat"
    }
}

pub fn extract(ctx: &Ctx, a: &ExtractArgs) -> Result<()> {
    let records = ctx.records(&a.manifest)?;
    let ids: Vec<String> = match &a.partition {
        Some(p) => ctx.load_pairs(p)?.sample_ids,
        None => records.iter().map(|r| r.sample_id.clone()).collect(),
    };
    check_images(&records, &ids)?;
    let (store, label) = if a.descriptor == DescriptorArg::Deep {
        let graph_path = ctx.path(require(&a.graph, "graph", "extract --descriptor deep")?);
        let layer: LayerRef = require(&a.layer, "layer", "extract --descriptor deep")?
            .parse()
            .map_err(|e| Failure::usage(format!("--layer: {e}")))?;
        let (graph, manifest) = load_graph(&graph_path)?;
        let info = manifest.layer(&layer)?.clone();
        let label = format!("{}__L{:03}", sanitize(graph.model_id()), info.index);
        if ctx.dry_run {
            eprintln!(
                "dry run: would write {}",
                ctx.path(format!("features/{label}.feat")).display()
            );
            return Ok(());
        }
        let images = images_for(&records, &ids)?;
        let cfg = ExtractConfig {
            batch_size: a.batch_size,
        };
        let vectors = graph.extract_tap(&layer, &images, &cfg)?;
        let store = FeatureStore::from_vectors(vectors, graph.weights_hash())?;
        (Store::Dense(store), label)
    } else {
        if ctx.dry_run {
            let ext = store_ext(a.descriptor);
            eprintln!(
                "dry run: would write {}",
                ctx.path(format!("features/{}.{ext}", a.descriptor.name())).display()
            );
            return Ok(());
        }
        let images = images_for(&records, &ids)?;
        (
            hand_features(a.descriptor, &a.hand, &images)?,
            a.descriptor.name().to_string(),
        )
    };
    let out = match &a.out {
        Some(p) => ctx.path(p),
        None => ctx
            .path("features")
            .join(format!("{label}.{}", store_ext(a.descriptor))),
    };
    ctx.write(&out, |p| store.save(p))?;
    println!("{} samples -> {}", ids.len(), out.display());
    Ok(())
}

pub fn score(ctx: &Ctx, a: &ScoreArgs) -> Result<()> {
    let partitions = ctx.partitions(&a.partition)?;
    let pair_lists = partitions
        .iter()
        .map(|p| ctx.load_pairs(p))
        .collect::<Result<Vec<_>>>()?;
    let (path, label) = match &a.features {
        Some(p) => {
            let path = ctx.path(p);
            let label = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            (path, label)
        }
        None => {
            if a.descriptor == DescriptorArg::Deep {
                return Err(Failure::usage("`score --descriptor deep` needs --features").into());
            }
            let name = a.descriptor.name();
            (
                ctx.path("features").join(format!("{name}.{}", store_ext(a.descriptor))),
                name.to_string(),
            )
        }
    };
    let store = if path.exists() || a.features.is_some() {
        Store::load(&path).with_context(|| format!("loading features {}", path.display()))?
    } else {
        // no stored features: extract the samples the pairs need
        let records = ctx.records(&a.manifest)?;
        let ids: Vec<String> = pair_lists
            .iter()
            .flat_map(|p| p.sample_ids.iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        check_images(&records, &ids)?;
        if ctx.dry_run {
            for p in &partitions {
                eprintln!(
                    "dry run: would write {}",
                    ctx.path(format!("scores/{p}__{label}.scores")).display()
                );
            }
            return Ok(());
        }
        log::info!("extracting {label} for {} samples", ids.len());
        hand_features(a.descriptor, &a.hand, &images_for(&records, &ids)?)?
    };
    let ratio = SiftRatioConfig {
        epsilon: a.sift_epsilon,
        denominator: RatioDenominator::Guarded,
    };
    let features = match &store {
        Store::Dense(s) => Features::Dense(s),
        Store::Keypoints(s) => Features::Keypoints(s, ratio),
    };
    for (partition, pairs) in partitions.iter().zip(&pair_lists) {
        let out = ctx
            .path("scores")
            .join(format!("{partition}__{}.scores", sanitize(&label)));
        if ctx.dry_run {
            eprintln!("dry run: would write {}", out.display());
            continue;
        }
        let scores = score_pairs(&features, pairs, partition, &ctx.scoring(a.tile))
            .with_context(|| format!("scoring {partition}"))?;
        ctx.write(&out, |p| Ok(scores.save(p)?))?;
        println!(
            "{partition}\tgenuine={}\timpostor={}\t{}",
            scores.genuine.len(),
            scores.impostor.len(),
            out.display()
        );
    }
    Ok(())
}

pub fn eval(ctx: &Ctx, a: &EvalArgs) -> Result<()> {
    let files: Vec<PathBuf> = if a.scores.is_empty() {
        let dir = ctx.path("scores");
        let mut found: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map(|entries| {
                entries
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|e| e == "scores"))
                    .collect()
            })
            .unwrap_or_default();
        found.sort();
        if found.is_empty() {
            return Err(Failure::input(format!("no score files under {}; run `score` first", dir.display())).into());
        }
        found
    } else {
        a.scores.iter().map(|p| ctx.path(p)).collect()
    };
    let method = match a.method {
        MethodArg::Interpolated => EerMethod::Interpolated,
        MethodArg::Midpoint => EerMethod::Midpoint,
    };
    let single = files.len() == 1;
    for path in &files {
        let set = ScoreSet::load(path).with_context(|| format!("loading scores {}", path.display()))?;
        let curve = error_curve(&set).with_context(|| format!("evaluating {}", path.display()))?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let result = eer(&curve, method);
        let prefix = if single { String::new() } else { format!("{stem}\t") };
        println!("{prefix}{}", percent(result.eer));
        for &target in &a.far {
            let frr = frr_at_far(&curve, target, false)?;
            println!("{prefix}frr@far={target}\t{}", percent(frr));
        }
        if a.curve {
            let out = ctx.path("curves").join(format!("{stem}.csv"));
            ctx.write(&out, |p| Ok(curve.save_csv(p)?))?;
        }
    }
    Ok(())
}

fn sweep_config(ctx: &Ctx, strategy: &str, batch_size: usize, layers_per_pass: usize) -> SweepConfig {
    SweepConfig {
        layers_per_pass,
        cache_dir: std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from),
        training_strategy: strategy.to_string(),
        extract: ExtractConfig { batch_size },
        scoring: ctx.scoring(ScoringConfig::default().tile),
        ..Default::default()
    }
}

fn sweep_result_path(ctx: &Ctx, graph: &GraphHandle, strategy: &str, partition: &str) -> PathBuf {
    ctx.path("sweeps").join(format!(
        "{}__{}__{}.json",
        sanitize(graph.model_id()),
        sanitize(strategy),
        sanitize(partition)
    ))
}

fn check_side(graph: &GraphHandle, images: &[NormalizedImage]) -> Result<()> {
    let [h, w, _] = graph.manifest().input_shape;
    if let Some(img) = images.iter().find(|i| i.pixels.dimensions() != (w as u32, h as u32)) {
        return Err(Failure::input(format!(
            "sample `{}` is {}x{} but the graph takes {w}x{h}; normalize with --side {w}",
            img.sample_id,
            img.pixels.width(),
            img.pixels.height()
        ))
        .into());
    }
    Ok(())
}

fn prepare_cache(ctx: &Ctx, cfg: &SweepConfig) -> Result<()> {
    if let Some(dir) = &cfg.cache_dir {
        if !ctx.dry_run {
            std::fs::create_dir_all(dir).with_context(|| format!("creating cache {}", dir.display()))?;
        }
    }
    Ok(())
}

pub fn sweep(ctx: &Ctx, a: &SweepArgs) -> Result<()> {
    let graph_path = ctx.path(require(&a.graph, "graph", "sweep")?);
    let (graph, _) = load_graph(&graph_path)?;
    let records = ctx.records(&a.manifest)?;
    let mut cfg = sweep_config(ctx, &a.strategy, a.batch_size, a.layers_per_pass);
    cfg.first = a.first;
    cfg.last = a.last;
    cfg.stride = a.stride;
    cfg.refine = a.refine;
    periscope::sweep::planned_layers(graph.manifest().total_layers(), &cfg)?;
    prepare_cache(ctx, &cfg)?;
    let mut results = Vec::new();
    for partition in ctx.partitions(&a.partition)? {
        let pairs = ctx.load_pairs(&partition)?;
        let label = ctx.label(&partition)?;
        let images = images_for(&records, &pairs.sample_ids)?;
        check_side(&graph, &images)?;
        let out = sweep_result_path(ctx, &graph, &a.strategy, &partition);
        if ctx.dry_run {
            eprintln!("dry run: would write {}", out.display());
            continue;
        }
        let result = run_sweep(&graph, &images, &pairs, &label, &cfg)?;
        let (best, rate) = best_layer(&result)?;
        let row = result
            .rows
            .iter()
            .find(|r| r.layer_index == best)
            .expect("best layer is a row");
        println!("{partition}\tlayer={best}\t{}\t{}", row.layer_name, percent(rate));
        ctx.write(&out, |p| write_json(p, &result))?;
        results.push(result);
    }
    if !results.is_empty() {
        let dir = ctx
            .path("reports")
            .join(format!("{}__{}", sanitize(graph.model_id()), sanitize(&a.strategy)));
        let report = Report {
            sweeps: results,
            transfer: Vec::new(),
        };
        ctx.write(&dir.join("report.json"), |_| {
            emit_report(&dir, &report).map(|_| ()).map_err(Into::into)
        })?;
    }
    Ok(())
}

pub fn transfer(ctx: &Ctx, a: &TransferArgs) -> Result<()> {
    let graph_path = ctx.path(require(&a.graph, "graph", "transfer")?);
    if a.selectors.is_empty() {
        return Err(Failure::usage("`transfer` needs --selectors").into());
    }
    let (graph, _) = load_graph(&graph_path)?;
    let records = ctx.records(&a.manifest)?;
    let selectors = a
        .selectors
        .iter()
        .map(|s| {
            let path = sweep_result_path(ctx, &graph, &a.strategy, s);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Failure::input(format!("{}: {e}; run `sweep --partition {s}` first", path.display())))?;
            let result: LayerSweepResult =
                serde_json::from_str(&text).with_context(|| format!("reading {}", path.display()))?;
            Ok(result)
        })
        .collect::<Result<Vec<_>>>()?;
    let names = ctx.partitions(&a.targets)?;
    let mut loaded = Vec::new();
    for name in &names {
        let pairs = ctx.load_pairs(name)?;
        let images = images_for(&records, &pairs.sample_ids)?;
        check_side(&graph, &images)?;
        loaded.push((ctx.label(name)?, pairs, images));
    }
    let dir = ctx.path("reports").join(format!(
        "{}__{}__transfer",
        sanitize(graph.model_id()),
        sanitize(&a.strategy)
    ));
    if ctx.dry_run {
        eprintln!("dry run: would write {}", dir.join("report.json").display());
        return Ok(());
    }
    let targets: Vec<Target<'_>> = loaded
        .iter()
        .map(|(label, pairs, images)| Target {
            label: label.clone(),
            pairs,
            images,
        })
        .collect();
    let cfg = sweep_config(ctx, &a.strategy, a.batch_size, 1);
    prepare_cache(ctx, &cfg)?;
    let cells = transfer_matrix(&selectors, &targets, &graph, &cfg)?;
    for c in &cells {
        println!(
            "{}\t{}\tlayer={}\t{}",
            c.selector,
            c.target,
            c.layer_index,
            percent(c.eer)
        );
    }
    let report = Report {
        sweeps: selectors,
        transfer: cells,
    };
    ctx.write(&dir.join("report.json"), |_| {
        emit_report(&dir, &report).map(|_| ()).map_err(Into::into)
    })?;
    Ok(())
}

pub fn randomize(ctx: &Ctx, a: &RandomizeArgs) -> Result<()> {
    let input = ctx.path(require(&a.graph, "graph", "randomize")?);
    let output = ctx.path(require(&a.out, "out", "randomize")?);
    if input == output {
        return Err(Failure::usage("--out must differ from --graph").into());
    }
    if ctx.dry_run {
        load_graph(&input)?;
        eprintln!("dry run: would write {}", output.display());
        return Ok(());
    }
    if let Some(parent) = output.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let manifest = randomize_weights(&input, &output, ctx.seed)?;
    println!(
        "{}\tlayers={}\t{}",
        manifest.model_id,
        manifest.total_layers(),
        output.display()
    );
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
