//! `mvrecon` command-line front end.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 numerical failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mvrecon::evalkit::{evaluate, EvalConfig, EvalReport, GroundTruth};
use mvrecon::geometry::Camera;
use mvrecon::isoext::{read_obj, write_obj, Mesh};
use mvrecon::kvconfig::KvConfig;
use mvrecon::liftnet::NetConfig;
use mvrecon::synthdata::{generate_to_disk, psnr_by_view, format_stats, Dataset, DatasetConfig, ShapeFamily, TrainingSample};
use mvrecon::texmap::{export_obj, texture_mesh, TexConfig};
use mvrecon::trainer::{
    initial_checkpoint, reconstruct, run_ablation, train_until, AblationConfig, Checkpoint, EvalSet, Mode, TrainConfig, TrainData,
    TrainError,
};
use mvrecon::{exec, Array};

#[derive(Parser)]
#[command(name = "mvrecon", version, about = "Sparse-view mesh reconstruction from inconsistent multiview images")]
struct Cli {
    /// Worker threads; 1 runs sequentially and is bitwise reproducible, 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    GenData(GenArgs),
    /// Train a model.
    Train(TrainArgs),
    /// Reconstruct a mesh from one dataset shape's generated views.
    Reconstruct(ReconArgs),
    /// Texture a mesh from one dataset shape's images.
    Texture(TextureArgs),
    /// Score a mesh against ground truth.
    Eval(EvalArgs),
    /// Train and compare ablation modes.
    Ablate(AblateArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Output directory; must not exist or be empty.
    #[arg(long)]
    out: PathBuf,
    /// key = value file with dataset keys (train, eval, views, resolution, severity, seed, family).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training shapes.
    #[arg(long)]
    count: Option<usize>,
    /// Held-out shapes.
    #[arg(long)]
    eval: Option<usize>,
    /// Generated views per shape, besides the reference.
    #[arg(long)]
    views: Option<usize>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    severity: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// composite or sphere.
    #[arg(long)]
    family: Option<String>,
    /// Print the PSNR-by-view table of the generated data.
    #[arg(long)]
    stats: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset directory (or `dataset` in the config file).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory for the loss log and checkpoints.
    #[arg(long)]
    out: PathBuf,
    /// key = value training config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// A1, A2, A3, A4 or A5.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Network preset: desk or full.
    #[arg(long)]
    net: Option<String>,
    /// Continue from a checkpoint directory.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct ReconArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Shape id, e.g. eval_0000.
    #[arg(long)]
    shape: String,
    /// Generated view numbers to use (1-based, comma separated); default all.
    #[arg(long, value_delimiter = ',')]
    views: Option<Vec<usize>>,
    /// Output OBJ path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TextureArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    shape: String,
    /// Output OBJ path; MTL and PNG are written next to it.
    #[arg(long)]
    out: PathBuf,
    /// Atlas side in texels.
    #[arg(long, default_value_t = 1024)]
    size: usize,
    /// Blend radius in texels.
    #[arg(long, default_value_t = 2)]
    radius: usize,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// Ground-truth mesh.
    #[arg(long, conflicts_with_all = ["data", "shape"])]
    gt: Option<PathBuf>,
    /// Dataset holding the ground-truth shape.
    #[arg(long, requires = "shape")]
    data: Option<PathBuf>,
    #[arg(long)]
    shape: Option<String>,
    #[arg(long, default_value_t = 32)]
    views: usize,
    #[arg(long, default_value_t = 64)]
    resolution: usize,
    #[arg(long, default_value_t = 2048)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the report as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// key = value training config shared by every run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "A1,A3,A5")]
    modes: Vec<String>,
    /// Number of seeds (0..n).
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    #[arg(long)]
    steps: Option<usize>,
}

/// Input or usage problem detected by the front end.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(Usage(msg.into()))
}

fn read_kv(path: &Path) -> Result<KvConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    KvConfig::parse(&text).with_context(|| format!("in {}", path.display()))
}

fn print_resolved(kv: &KvConfig) {
    println!("# resolved config");
    for line in kv.to_text().lines() {
        println!("#   {line}");
    }
}

fn parse_mode(s: &str) -> Result<Mode> {
    s.parse().map_err(|_| usage(format!("unknown mode `{s}`; valid modes: A1, A2, A3, A4, A5")))
}

fn gen_data(a: &GenArgs) -> Result<()> {
    let mut cfg = DatasetConfig::default();
    if let Some(p) = &a.config {
        let kv = read_kv(p)?;
        kv.check_known(&["train", "eval", "views", "resolution", "severity", "seed", "family"])?;
        kv.read_into("train", &mut cfg.train)?;
        kv.read_into("eval", &mut cfg.eval)?;
        kv.read_into("views", &mut cfg.views)?;
        kv.read_into("resolution", &mut cfg.resolution)?;
        kv.read_into("severity", &mut cfg.severity)?;
        kv.read_into("seed", &mut cfg.seed)?;
        if let Some(f) = kv.get("family") {
            cfg.family = ShapeFamily::parse(f).ok_or_else(|| usage(format!("unknown family `{f}`")))?;
        }
    }
    if let Some(c) = a.count {
        if c == 0 {
            return Err(usage("--count must be at least 1"));
        }
        cfg.train = c;
    }
    cfg.eval = a.eval.unwrap_or(cfg.eval);
    cfg.views = a.views.unwrap_or(cfg.views);
    cfg.resolution = a.resolution.unwrap_or(cfg.resolution);
    cfg.severity = a.severity.map(|s| s as mvrecon::Real).unwrap_or(cfg.severity);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    if let Some(f) = &a.family {
        cfg.family = ShapeFamily::parse(f).ok_or_else(|| usage(format!("unknown family `{f}`; use composite or sphere")))?;
    }
    let mut kv = KvConfig::default();
    kv.set("train", cfg.train);
    kv.set("eval", cfg.eval);
    kv.set("views", cfg.views);
    kv.set("resolution", cfg.resolution);
    kv.set("severity", cfg.severity);
    kv.set("seed", cfg.seed);
    kv.set("family", cfg.family.name());
    print_resolved(&kv);
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    generate_to_disk(&cfg, &a.out).map_err(|e| usage(e.to_string()))?;
    let ds = Dataset::open(&a.out)?;
    println!("wrote {} shapes to {}", ds.len(), a.out.display());
    if a.stats {
        let pairs = exec::map_indexed(ds.len(), |i| -> Result<(TrainingSample, TrainingSample)> { Ok((ds.load(i)?, ds.load_clean(i)?)) })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        print!("{}", format_stats(&psnr_by_view(&pairs)));
    }
    Ok(())
}

fn open_dataset(p: &Path) -> Result<Dataset> {
    Dataset::open(p).map_err(|e| usage(format!("cannot open dataset: {e}")))
}

fn train_cmd(a: &TrainArgs) -> Result<()> {
    let start = if let Some(dir) = &a.resume {
        let mut ck = Checkpoint::load(dir).map_err(|e| usage(format!("cannot resume: {e}")))?;
        if let Some(s) = a.steps {
            ck.config.steps = s;
        }
        if let Some(d) = &a.data {
            ck.config.dataset = Some(d.clone());
        }
        ck
    } else {
        let mut kv = KvConfig::default();
        if let Some(p) = &a.config {
            kv = read_kv(p)?;
        }
        let mut cfg = TrainConfig::from_kv(&kv).map_err(|e| usage(e.to_string()))?;
        if let Some(m) = &a.mode {
            cfg.mode = parse_mode(m)?;
        }
        if let Some(n) = &a.net {
            cfg.net = NetConfig::preset(n).ok_or_else(|| usage(format!("unknown net preset `{n}`; use desk or full")))?;
        }
        cfg.steps = a.steps.unwrap_or(cfg.steps);
        cfg.seed = a.seed.unwrap_or(cfg.seed);
        cfg.lr = a.lr.map(|v| v as mvrecon::Real).unwrap_or(cfg.lr);
        cfg.batch = a.batch.unwrap_or(cfg.batch);
        cfg.checkpoint_every = a.checkpoint_every.unwrap_or(cfg.checkpoint_every);
        if let Some(d) = &a.data {
            cfg.dataset = Some(d.clone());
        }
        cfg.validate().map_err(|e| usage(e.to_string()))?;
        initial_checkpoint(&cfg)?
    };
    let cfg = start.config.clone();
    print_resolved(&cfg.to_kv());
    let data_dir = cfg.dataset.clone().ok_or_else(|| usage("no dataset; pass --data or set `dataset` in the config"))?;
    let ds = open_dataset(&data_dir)?;
    let mut data = TrainData::from_dataset(&ds, "train")?;
    if data.is_empty() {
        return Err(usage(format!("{} has no training shapes", data_dir.display())));
    }
    let run = train_until(&mut data, start, cfg.steps, Some(&a.out))?;
    match run.log.last() {
        Some(r) => println!("step {} loss {:.6}", run.checkpoint.step, r.report.total),
        None => println!("step {} (no steps run)", run.checkpoint.step),
    }
    println!("checkpoint {}", a.out.join("ckpt").display());
    Ok(())
}

fn find_shape(ds: &Dataset, id: &str) -> Result<usize> {
    ds.shapes.iter().position(|s| s.id == id).ok_or_else(|| {
        let ids: Vec<&str> = ds.shapes.iter().take(4).map(|s| s.id.as_str()).collect();
        usage(format!("no shape `{id}` in dataset (e.g. {})", ids.join(", ")))
    })
}

fn reconstruct_cmd(a: &ReconArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.checkpoint).map_err(|e| usage(format!("cannot load checkpoint: {e}")))?;
    let ds = open_dataset(&a.data)?;
    let sample = ds.load(find_shape(&ds, &a.shape)?)?;
    let inputs = sample.input_indices();
    let chosen: Vec<usize> = match &a.views {
        None => inputs.clone(),
        Some(v) => {
            let mut out = Vec::new();
            for &k in v {
                if k == 0 || k > inputs.len() {
                    return Err(usage(format!("view {k} out of range; generated views are 1..={}", inputs.len())));
                }
                out.push(inputs[k - 1]);
            }
            out
        }
    };
    let mut kv = KvConfig::default();
    kv.set("checkpoint", a.checkpoint.display());
    kv.set("shape", &a.shape);
    kv.set("views", chosen.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
    print_resolved(&kv);
    let posed: Vec<(Camera, Array)> = chosen.iter().map(|&i| (*sample.views.camera(i), sample.images[i].clone())).collect();
    let model = ck.model()?;
    let mesh = reconstruct(&model, ck.config.resolution, &posed)?;
    write_obj(&mesh, &a.out)?;
    println!(
        "mesh {}: {} vertices, {} triangles, euler {}",
        a.out.display(),
        mesh.vertices.len(),
        mesh.triangles.len(),
        mesh.euler_characteristic()
    );
    Ok(())
}

fn load_mesh(p: &Path) -> Result<Mesh> {
    read_obj(p).map_err(|e| usage(format!("cannot read mesh: {e}")))
}

fn texture_cmd(a: &TextureArgs) -> Result<()> {
    let mesh = load_mesh(&a.mesh)?;
    let ds = open_dataset(&a.data)?;
    let sample = ds.load(find_shape(&ds, &a.shape)?)?;
    let mut kv = KvConfig::default();
    kv.set("mesh", a.mesh.display());
    kv.set("shape", &a.shape);
    kv.set("size", a.size);
    kv.set("radius", a.radius);
    print_resolved(&kv);
    let views: Vec<(Camera, Array)> =
        (0..sample.views.len()).map(|i| (*sample.views.camera(i), sample.images[i].clone())).collect();
    let tm = texture_mesh(&mesh, &views, &TexConfig { size: a.size, blend_radius: a.radius }).map_err(|e| usage(e.to_string()))?;
    export_obj(&tm, &a.out)?;
    println!("textured mesh {} ({}x{} atlas)", a.out.display(), a.size, a.size);
    Ok(())
}

fn eval_cmd(a: &EvalArgs) -> Result<()> {
    let mesh = load_mesh(&a.mesh)?;
    let cfg = EvalConfig { views: a.views, resolution: a.resolution, points: a.points, seed: a.seed, ..EvalConfig::default() };
    let mut kv = KvConfig::default();
    kv.set("mesh", a.mesh.display());
    kv.set("views", cfg.views);
    kv.set("resolution", cfg.resolution);
    kv.set("points", cfg.points);
    kv.set("seed", cfg.seed);
    let (id, report) = if let Some(gt) = &a.gt {
        kv.set("gt", gt.display());
        print_resolved(&kv);
        let gt_mesh = load_mesh(gt)?;
        ("mesh".to_string(), evaluate(&mesh, GroundTruth::Mesh(&gt_mesh), &cfg)?)
    } else {
        let (Some(data), Some(shape)) = (&a.data, &a.shape) else {
            bail!(usage("pass --gt MESH or --data DIR --shape ID"));
        };
        kv.set("data", data.display());
        kv.set("shape", shape);
        print_resolved(&kv);
        let ds = open_dataset(data)?;
        let sample = ds.load(find_shape(&ds, shape)?)?;
        (shape.clone(), evaluate(&mesh, GroundTruth::Shape(&sample.shape.sdf), &cfg)?)
    };
    let rows = vec![(id, report)];
    print!("{}", EvalReport::to_table(&rows));
    if let Some(p) = &a.csv {
        fs::write(p, EvalReport::to_csv(&rows)).with_context(|| format!("cannot write {}", p.display()))?;
    }
    Ok(())
}

fn ablate_cmd(a: &AblateArgs) -> Result<()> {
    let mut base = match &a.config {
        Some(p) => TrainConfig::from_kv(&read_kv(p)?).map_err(|e| usage(e.to_string()))?,
        None => TrainConfig::default(),
    };
    base.steps = a.steps.unwrap_or(base.steps);
    base.dataset = Some(a.data.clone());
    let modes = a.modes.iter().map(|m| parse_mode(m)).collect::<Result<Vec<_>>>()?;
    if a.seeds == 0 {
        return Err(usage("--seeds must be at least 1"));
    }
    let cfg = AblationConfig { modes, seeds: (0..a.seeds).collect(), base, ..AblationConfig::default() };
    let mut kv = cfg.base.to_kv();
    kv.set("ablate.modes", cfg.modes.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(","));
    kv.set("ablate.seeds", a.seeds);
    print_resolved(&kv);
    let ds = open_dataset(&a.data)?;
    let mut train = TrainData::from_dataset(&ds, "train")?;
    let eval = TrainData::from_dataset(&ds, "eval")?;
    if train.is_empty() || eval.is_empty() {
        return Err(usage("ablation needs both train and eval shapes"));
    }
    let set = EvalSet::new(&eval, cfg.eval_points, cfg.gt_mesh_res, 0)?;
    let report = run_ablation(&mut train, &set, &cfg, |r| println!("{} seed {}: cd {:.4}", r.mode, r.seed, r.cd))?;
    fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    fs::write(a.out.join("ablation.csv"), report.to_csv())?;
    let table = report.to_table();
    fs::write(a.out.join("summary.txt"), &table)?;
    print!("{table}");
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if cli.threads > 0 {
        exec::configure_threads(cli.threads);
    }
    match &cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train_cmd(a),
        Command::Reconstruct(a) => reconstruct_cmd(a),
        Command::Texture(a) => texture_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Ablate(a) => ablate_cmd(a),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<TrainError>() {
        Some(TrainError::NonFinite { .. }) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
