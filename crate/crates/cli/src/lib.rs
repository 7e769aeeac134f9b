//! Command-line workflows: infill backgrounds, compose and generate
//! training sets, train and evaluate networks, run replicated experiments
//! and serve the annotation store.

pub mod cache;
pub mod toy;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ctxaug_convnet::checkpoint::{load_checkpoint, save_checkpoint};
use ctxaug_convnet::{evaluate, run_experiment, train, Sample, TrainConfig};
use ctxaug_core::augment::AugmentPipeline;
use ctxaug_core::compose::{enumerate_pairs, BackgroundImage, BackgroundSetup, ForegroundLayer, SourceRef};
use ctxaug_core::dataset::{
    generate, load_labeled_images, load_masked_examples, read_manifest, schedule_epoch, GenerationItem, SourcePool,
};
use ctxaug_core::imaging::{decode_image, decode_mask, encode_image};
use ctxaug_core::inpaint::InpaintParams;
use ctxaug_core::MaskedExample;

use crate::cache::BackgroundCache;
use crate::toy::{run_toy_experiment, ToyExperiment};

#[derive(Debug, Parser)]
#[command(name = "ctxaug", version, about = "Context augmentation: infill, compose, generate, train")]
pub struct Cli {
    /// Master seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for training (1 = reference single-threaded mode).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Infill the masked region of every image and write the backgrounds.
    Infill(InfillArgs),
    /// Write every composite of one background setup.
    Compose(ComposeArgs),
    /// Generate an augmented training set with a manifest.
    Gen(GenArgs),
    /// Train a network and write weights, a per-epoch log and a run log.
    Train(TrainArgs),
    /// Report the accuracy of saved weights on a labeled set.
    Eval(EvalArgs),
    /// Train several replicates and report mean and standard deviation.
    Experiment(ExperimentArgs),
    /// Serve an annotation store over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct InpaintFlags {
    /// Odd patch side length.
    #[arg(long, default_value_t = 7)]
    pub patch_size: usize,
    /// Sweeps per pyramid level.
    #[arg(long, default_value_t = 5)]
    pub iters: usize,
    /// Pyramid levels.
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    /// Background cache directory (default: `.bg-cache` inside the source directory).
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Always recompute backgrounds.
    #[arg(long)]
    pub no_cache: bool,
}

impl InpaintFlags {
    fn params(&self, seed: u64) -> Result<InpaintParams> {
        let p = InpaintParams { patch_size: self.patch_size, iterations: self.iters, pyramid_levels: self.levels, rng_seed: seed, ..InpaintParams::default() };
        p.validate()?;
        Ok(p)
    }

    fn cache(&self, source_dir: &Path) -> BackgroundCache {
        match (&self.cache, self.no_cache) {
            (_, true) => BackgroundCache::disabled(),
            (Some(d), false) => BackgroundCache::new(d),
            (None, false) => BackgroundCache::new(source_dir.join(".bg-cache")),
        }
    }

    fn log(&self, log: &mut RunLog) {
        log.set("patch_size", self.patch_size);
        log.set("iters", self.iters);
        log.set("levels", self.levels);
    }
}

#[derive(Debug, Args)]
pub struct InfillArgs {
    /// Directory of `<id>.png` images.
    #[arg(long)]
    pub images: PathBuf,
    /// Directory of `<id>.png` masks; nonzero marks the region to fill.
    #[arg(long)]
    pub masks: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub inpaint: InpaintFlags,
}

#[derive(Debug, Args)]
pub struct ComposeArgs {
    /// only-bg | gray | mean | same-category | all
    #[arg(long)]
    pub setup: BackgroundSetup,
    /// Masked set (`images/`, `masks/`, `labels.tsv`) supplying foregrounds.
    #[arg(long)]
    pub fg: PathBuf,
    /// Masked set supplying infilled backgrounds (default: the foreground set).
    #[arg(long)]
    pub bg: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub inpaint: InpaintFlags,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub compose: ComposeArgs,
    /// Comma-separated augmentation ops, e.g. `hflip,seg-translate`.
    #[arg(long, default_value = "")]
    pub ops: String,
    /// Emit this many epochs. Same-category and all setups pair every
    /// foreground with one background per epoch; other setups repeat the plan.
    #[arg(long)]
    pub epochs: Option<u64>,
    /// Extra copy of the manifest (always written to `<out>/manifest.tsv`).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// `key = value` training config; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Labeled set: a generator output or `images/` + `labels.tsv`.
    #[arg(long, required_unless_present = "manifest")]
    pub data: Option<PathBuf>,
    /// Manifest whose paths are relative to its own directory.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Held-out set evaluated after every epoch.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of replicates.
    #[arg(long, default_value_t = 10)]
    pub replicates: usize,
    /// Training set (required unless --toy).
    #[arg(long, required_unless_present = "toy")]
    pub data: Option<PathBuf>,
    /// Test set (required unless --toy).
    #[arg(long, required_unless_present = "toy")]
    pub test: Option<PathBuf>,
    /// Run the procedural shapes-on-textures comparison instead.
    #[arg(long)]
    pub toy: bool,
    /// Directory for the run log.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long)]
    pub store: PathBuf,
}

/// Resolved configuration of one run, written as `<out>/run.log`. Holds
/// no timestamps or host details so repeated runs produce the same file.
#[derive(Debug, Default)]
pub struct RunLog {
    lines: Vec<(String, String)>,
}

impl RunLog {
    fn new(command: &str) -> Self {
        let mut log = RunLog::default();
        log.set("command", command);
        log
    }

    fn set(&mut self, key: &str, value: impl ToString) {
        self.lines.push((key.to_string(), value.to_string()));
    }

    fn path(&mut self, key: &str, value: &Path) {
        self.set(key, value.display());
    }

    pub fn render(&self) -> String {
        self.lines.iter().fold(String::new(), |mut s, (k, v)| {
            writeln!(s, "{k} = {v}").unwrap();
            s
        })
    }

    fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join("run.log");
        std::fs::write(&path, self.render()).with_context(|| format!("writing {}", path.display()))
    }
}

fn png_ids(dir: &Path) -> Result<Vec<String>> {
    let mut ids = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "png") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                ids.push(stem.to_string());
            }
        }
    }
    ids.sort();
    Ok(ids)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn infill_cmd(args: &InfillArgs, seed: u64) -> Result<()> {
    let params = args.inpaint.params(seed)?;
    let cache = args.inpaint.cache(&args.masks);
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut count = 0;
    for id in png_ids(&args.masks)? {
        let image = decode_image(&read(&args.images.join(format!("{id}.png")))?)?;
        let mask = decode_mask(&read(&args.masks.join(format!("{id}.png")))?)?;
        let bg = cache.background(&image, &mask, &params).with_context(|| format!("infilling {id}"))?;
        let path = args.out.join(format!("{id}.png"));
        std::fs::write(&path, encode_image(&bg)).with_context(|| format!("writing {}", path.display()))?;
        count += 1;
    }
    let mut log = RunLog::new("infill");
    log.path("images", &args.images);
    log.path("masks", &args.masks);
    log.set("seed", seed);
    args.inpaint.log(&mut log);
    log.set("count", count);
    log.write(&args.out)?;
    println!("infilled {count} images into {}", args.out.display());
    Ok(())
}

fn layers(examples: &[MaskedExample], cache: &BackgroundCache, params: &InpaintParams) -> Result<(Vec<ForegroundLayer>, Vec<BackgroundImage>)> {
    let mut fgs = Vec::with_capacity(examples.len());
    let mut bgs = Vec::with_capacity(examples.len());
    for ex in examples {
        ex.validate()?;
        let image = cache.background(&ex.image, &ex.mask, params).with_context(|| format!("infilling {}", ex.id))?;
        fgs.push(ForegroundLayer::new(ex.image.clone(), ex.mask.clone(), ex.label, ex.id.clone())?);
        bgs.push(BackgroundImage { image, label: ex.label, source_id: ex.id.clone() });
    }
    Ok((fgs, bgs))
}

/// Loads the sources of a compose/gen run. Backgrounds are only infilled
/// for setups that use them.
fn source_pool(args: &ComposeArgs, seed: u64) -> Result<SourcePool> {
    let params = args.inpaint.params(seed)?;
    let fg_examples = load_masked_examples(&args.fg).with_context(|| format!("loading {}", args.fg.display()))?;
    let bg_dir = args.bg.as_ref().unwrap_or(&args.fg);
    let needs_bg = matches!(
        args.setup,
        BackgroundSetup::OnlyBg | BackgroundSetup::SameCategoryBgWithFg | BackgroundSetup::AllCategoriesBgWithFg
    );
    let fgs = fg_examples
        .iter()
        .map(|ex| ForegroundLayer::new(ex.image.clone(), ex.mask.clone(), ex.label, ex.id.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    let bgs = if needs_bg {
        let bg_examples = if args.bg.is_some() { load_masked_examples(bg_dir)? } else { fg_examples };
        layers(&bg_examples, &args.inpaint.cache(bg_dir), &params)?.1
    } else {
        Vec::new()
    };
    Ok(SourcePool::new(fgs, bgs))
}

fn plan_items(setup: BackgroundSetup, pool: &SourcePool, epochs: Option<u64>, seed: u64) -> Result<Vec<GenerationItem>> {
    let (fgs, bgs): (Vec<SourceRef>, Vec<SourceRef>) = (pool.fg_refs(), pool.bg_refs());
    let plan = enumerate_pairs(setup, &fgs, &bgs)?;
    let full: Vec<GenerationItem> = plan
        .iter()
        .map(|it| GenerationItem { fg: it.fg.map(str::to_string), bg: it.bg.map(str::to_string), label: it.label })
        .collect();
    let Some(epochs) = epochs else { return Ok(full) };
    let mut items = Vec::new();
    for epoch in 0..epochs {
        match setup {
            BackgroundSetup::SameCategoryBgWithFg | BackgroundSetup::AllCategoriesBgWithFg => {
                let schedule = schedule_epoch(setup, &fgs, &bgs, seed, epoch)?;
                items.extend(schedule.pairs.into_iter().map(|(fg, bg, label)| GenerationItem { fg: Some(fg), bg: Some(bg), label }));
            }
            _ => items.extend(full.iter().cloned()),
        }
    }
    Ok(items)
}

fn compose_log(name: &str, args: &ComposeArgs, seed: u64) -> RunLog {
    let mut log = RunLog::new(name);
    log.set("setup", args.setup);
    log.path("fg", &args.fg);
    log.path("bg", args.bg.as_ref().unwrap_or(&args.fg));
    log.set("seed", seed);
    args.inpaint.log(&mut log);
    log
}

fn gen_cmd(name: &str, c: &ComposeArgs, ops: &str, epochs: Option<u64>, manifest: Option<&Path>, seed: u64) -> Result<()> {
    let pool = source_pool(c, seed)?;
    let pipeline = AugmentPipeline::parse(ops, seed)?;
    let items = plan_items(c.setup, &pool, epochs, seed)?;
    std::fs::create_dir_all(&c.out).with_context(|| format!("creating {}", c.out.display()))?;
    let entries = generate(c.setup, &items, &pool, &pipeline, &c.out)?;
    if let Some(m) = manifest {
        let from = c.out.join("manifest.tsv");
        std::fs::copy(&from, m).with_context(|| format!("copying manifest to {}", m.display()))?;
    }
    let mut log = compose_log(name, c, seed);
    log.set("ops", ops);
    log.set("epochs", epochs.map_or("plan".to_string(), |e| e.to_string()));
    log.set("count", entries.len());
    log.write(&c.out)?;
    println!("wrote {} images to {}", entries.len(), c.out.display());
    Ok(())
}

fn samples_from(items: Vec<(String, ctxaug_core::RawImage, ctxaug_core::CategoryLabel)>) -> Vec<Sample> {
    items.iter().map(|(_, img, l)| Sample::from_image(img, l.index())).collect()
}

fn load_samples(dir: &Path) -> Result<Vec<Sample>> {
    Ok(samples_from(load_labeled_images(dir).with_context(|| format!("loading {}", dir.display()))?))
}

fn load_manifest_samples(path: &Path) -> Result<Vec<Sample>> {
    let base = path.parent().unwrap_or(Path::new("."));
    read_manifest(path)?
        .iter()
        .map(|e| Ok(Sample::from_image(&decode_image(&read(&base.join(&e.path))?)?, e.label.index())))
        .collect()
}

fn input_shape(samples: &[Sample]) -> Result<[usize; 3]> {
    let first = samples.first().context("training set is empty")?;
    let [_, c, h, w] = first.input.shape();
    if samples.iter().any(|s| s.input.shape() != first.input.shape()) {
        bail!("training images differ in size");
    }
    Ok([c, h, w])
}

fn resolve_config(path: Option<&Path>, cli: &Cli) -> Result<TrainConfig> {
    let mut cfg = match path {
        Some(p) => TrainConfig::from_file(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    Ok(cfg)
}

fn train_cmd(args: &TrainArgs, cli: &Cli) -> Result<()> {
    let mut cfg = resolve_config(args.config.as_deref(), cli)?;
    if let Some(e) = args.epochs {
        cfg.epochs = e;
    }
    cfg.validate()?;
    let train_set = match (&args.manifest, &args.data) {
        (Some(m), _) => load_manifest_samples(m)?,
        (None, Some(d)) => load_samples(d)?,
        (None, None) => bail!("--data or --manifest is required"),
    };
    let test_set = args.test.as_deref().map(load_samples).transpose()?;
    let spec = cfg.network_spec(input_shape(&train_set)?)?;
    let (net, log) = train(spec, &train_set, test_set.as_deref(), &cfg)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    save_checkpoint(&net, &args.out.join("weights.bin"))?;
    let csv = args.out.join("train_log.csv");
    std::fs::write(&csv, log.to_csv()).with_context(|| format!("writing {}", csv.display()))?;
    let mut run = RunLog::new("train");
    if let Some(m) = &args.manifest {
        run.path("manifest", m);
    }
    if let Some(d) = &args.data {
        run.path("data", d);
    }
    if let Some(t) = &args.test {
        run.path("test", t);
    }
    run.set("samples", train_set.len());
    for line in cfg.to_text().lines() {
        if let Some((k, v)) = line.split_once(" = ") {
            run.set(k, v);
        }
    }
    run.set("network", net.spec.to_string());
    run.set("parameters", net.spec.parameter_count());
    run.write(&args.out)?;
    let last = log.epochs.last().expect("at least one epoch");
    println!("epoch {} loss {:.4} train accuracy {:.4}", last.epoch, last.loss, last.train_acc);
    if let Some(acc) = last.test_acc {
        println!("test accuracy {acc:.4}");
    }
    Ok(())
}

fn eval_cmd(args: &EvalArgs) -> Result<()> {
    let net = load_checkpoint(&args.weights)?;
    let acc = evaluate(&net, &load_samples(&args.data)?)?;
    println!("accuracy {acc:.4}");
    Ok(())
}

fn experiment_cmd(args: &ExperimentArgs, cli: &Cli) -> Result<()> {
    let mut log = RunLog::new("experiment");
    if args.toy {
        let mut exp = ToyExperiment::default();
        if let Some(p) = &args.config {
            exp.train.apply_text(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?;
        }
        if let Some(s) = cli.seed {
            exp.train.seed = s;
        }
        if let Some(t) = cli.threads {
            exp.train.threads = t;
        }
        exp.train.replicate_count = args.replicates;
        exp.train.validate()?;
        let out = run_toy_experiment(&exp)?;
        log.set("mode", "toy");
        for line in exp.train.to_text().lines() {
            if let Some((k, v)) = line.split_once(" = ") {
                log.set(k, v);
            }
        }
        log.set("original", &out.original);
        log.set("same_category", &out.same_category);
        println!("original        {}", out.original);
        println!("same-category   {}", out.same_category);
    } else {
        let mut cfg = resolve_config(args.config.as_deref(), cli)?;
        cfg.replicate_count = args.replicates;
        cfg.validate()?;
        let (data, test) = (args.data.as_ref().expect("clap requires it"), args.test.as_ref().expect("clap requires it"));
        let train_set = load_samples(data)?;
        let test_set = load_samples(test)?;
        let shape = input_shape(&train_set)?;
        let summary = run_experiment(&cfg, |c| {
            let (net, _) = train(c.network_spec(shape)?, &train_set, None, c)?;
            evaluate(&net, &test_set)
        })?;
        log.path("data", data);
        log.path("test", test);
        for line in cfg.to_text().lines() {
            if let Some((k, v)) = line.split_once(" = ") {
                log.set(k, v);
            }
        }
        let accs: Vec<String> = summary.accuracies.iter().map(|a| format!("{a:.4}")).collect();
        log.set("accuracies", accs.join(","));
        log.set("summary", &summary);
        println!("accuracy {summary}");
    }
    if let Some(out) = &args.out {
        log.write(out)?;
    }
    Ok(())
}

fn serve_cmd(args: &ServeArgs) -> Result<()> {
    let store = ctxaug_annotate::SessionStore::open(&args.store)?;
    let addr = std::net::SocketAddr::from(([127, 0, 0, 1], args.port));
    let rt = tokio::runtime::Runtime::new()?;
    println!("serving {} on http://{addr}", args.store.display());
    rt.block_on(ctxaug_annotate::serve(addr, store))?;
    Ok(())
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    if cli.threads == Some(0) {
        bail!("--threads must be at least 1");
    }
    match &cli.command {
        Command::Infill(a) => infill_cmd(a, seed),
        Command::Compose(a) => gen_cmd("compose", a, "", None, None, seed),
        Command::Gen(a) => gen_cmd("gen", &a.compose, &a.ops, a.epochs, a.manifest.as_deref(), seed),
        Command::Train(a) => train_cmd(a, cli),
        Command::Eval(a) => eval_cmd(a),
        Command::Experiment(a) => experiment_cmd(a, cli),
        Command::Serve(a) => serve_cmd(a),
    }
}
