//! Command-line surface: dataset synthesis, training, rendering, evaluation,
//! reconstruction error, and model inspection.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use nalgebra::Vector3;
use std::path::PathBuf;
use std::process::ExitCode;
use thinsplat::geometry::{classify_points, estimate_normals, ClassifiedCloud, IndPoint};
use thinsplat::init::{init_map, InitConfig};
use thinsplat::io::{config, dataset, ply, scene_file};
use thinsplat::metrics::{psnr, reconstruction_error, split_dataset, ssim, TrainFraction};
use thinsplat::model::SplatKind;
use thinsplat::raster::{render, RenderSettings};
use thinsplat::synth::{
    make_box_room, make_trajectory, sample_cloud, Texture, TrajectoryPattern,
};
use thinsplat::train::{train, IterationRecord, TrainOptions};
use thinsplat::{Config, Error, Map, Scalar};

#[derive(Parser)]
#[command(name = "thinsplat", about = "Surface-aligned Gaussian splatting on the CPU")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    Synth(SynthArgs),
    /// Train a splat model from a dataset directory.
    Train(TrainArgs),
    /// Render a model from poses in a cameras file.
    Render(RenderArgs),
    /// PSNR/SSIM report of a model over the evaluation split.
    Eval(EvalArgs),
    /// Mean/std distance of splat samples to the reference surfaces.
    ReconError(ReconArgs),
    /// Counts, kind histogram, and scale statistics of a model.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Room extent as WxHxD in world units.
    #[arg(long, default_value = "1.0x1.0x1.0")]
    room: String,
    #[arg(long, default_value_t = 50)]
    views: usize,
    #[arg(long, default_value_t = 5000)]
    points: usize,
    /// Isotropic point-noise sigma in world units.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "checker")]
    texture: String,
    #[arg(long, default_value = "orbit")]
    pattern: String,
    /// Rendered reference resolution as WxH.
    #[arg(long, default_value = "64x64")]
    image_size: String,
    #[arg(long, default_value_t = 400)]
    splats_per_face: usize,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// on: thin classification + tangent densification + smoothness loss;
    /// off: conventional baseline.
    #[arg(long, default_value = "on")]
    geo: String,
    /// Override total iterations.
    #[arg(long)]
    iters: Option<usize>,
    /// Override the run seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Training fraction of the non-eval pool.
    #[arg(long, default_value = "100")]
    split_fraction: String,
    /// Neighborhood size for normal estimation.
    #[arg(long, default_value_t = 10)]
    normals_k: usize,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    cameras: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "100")]
    split_fraction: String,
}

#[derive(Args)]
struct ReconArgs {
    #[arg(long)]
    model: PathBuf,
    /// Surface file (scene.txt from synth).
    #[arg(long)]
    scene: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    model: PathBuf,
}

fn parse_triplet(s: &str) -> Result<Vector3<Scalar>, Error> {
    let parts: Vec<&str> = s.split('x').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("expected WxHxD, found '{s}'")));
    }
    let mut v = Vector3::zeros();
    for (i, p) in parts.iter().enumerate() {
        v[i] = p
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("bad extent component '{p}'")))?;
    }
    Ok(v)
}

fn parse_pair(s: &str) -> Result<(usize, usize), Error> {
    let parts: Vec<&str> = s.split('x').collect();
    if parts.len() != 2 {
        return Err(Error::Config(format!("expected WxH, found '{s}'")));
    }
    let w = parts[0].parse().map_err(|_| Error::Config(format!("bad width '{}'", parts[0])))?;
    let h = parts[1].parse().map_err(|_| Error::Config(format!("bad height '{}'", parts[1])))?;
    Ok((w, h))
}

fn run_synth(args: &SynthArgs) -> Result<(), Error> {
    let extent = parse_triplet(&args.room)?;
    let texture: Texture = args.texture.parse()?;
    let pattern: TrajectoryPattern = args.pattern.parse()?;
    let image_size = parse_pair(&args.image_size)?;
    let mut scene = make_box_room(extent, texture, args.splats_per_face, args.seed)?;
    make_trajectory(&mut scene, args.views, pattern, image_size, &RenderSettings::default())?;
    scene.point_cloud = sample_cloud(&scene, args.points, Scalar::from(args.noise), args.seed ^ 1);
    dataset::write_dataset(&scene, &args.out)?;
    println!(
        "wrote dataset: {} views, {} points, {} gt splats -> {}",
        scene.cameras.len(),
        scene.point_cloud.len(),
        scene.gt_splats.len(),
        args.out.display()
    );
    Ok(())
}

fn run_train(args: &TrainArgs) -> Result<(), Error> {
    let geo_on = match args.geo.as_str() {
        "on" => true,
        "off" => false,
        other => return Err(Error::Config(format!("--geo must be on or off, found '{other}'"))),
    };
    let mut cfg: Config = match &args.config {
        Some(path) => config::read_config(path)?,
        None => Config::default(),
    };
    if let Some(iters) = args.iters {
        cfg.total_iters = iters;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if !geo_on {
        cfg.lambda_geo = 0.0;
    }
    let fraction: TrainFraction = args.split_fraction.parse()?;

    let (points, cameras) = dataset::load_dataset::<Scalar>(&args.data)?;
    let (train_ids, _) = split_dataset(cameras.len(), fraction)?;
    let train_cams: Vec<_> = train_ids.iter().map(|&i| cameras[i].clone()).collect();

    let positions: Vec<_> = points.iter().map(|p| p.position).collect();
    let colors: Vec<_> = points.iter().map(|p| p.color).collect();
    let cloud = if geo_on {
        let viewpoint = cameras[0].pose_cw.center();
        let normals = estimate_normals(&positions, args.normals_k, Some(&viewpoint))?;
        classify_points(&positions, &colors, &normals, 3.0, 20.0_f64.to_radians())?
    } else {
        ClassifiedCloud {
            co_points: Vec::new(),
            ind_points: positions
                .iter()
                .zip(colors.iter())
                .map(|(p, c)| IndPoint { position: *p, color: *c })
                .collect(),
        }
    };
    let mut map = init_map(&cloud, &InitConfig::default())?;
    log::info!(
        "initialized {} splats ({} thin) from {} train views",
        map.len(),
        map.splats.iter().filter(|s| s.kind == SplatKind::Thin).count(),
        train_cams.len()
    );

    std::fs::create_dir_all(&args.out)?;
    let mut diagnostics = std::io::stderr();
    let mut opts = TrainOptions {
        checkpoint_dir: Some(args.out.clone()),
        diagnostics: Some(&mut diagnostics),
        trace: None,
    };
    let records = train(&mut map, &train_cams, &cfg, &mut opts)?;

    if map.is_empty() {
        return Err(Error::InvalidInput("training pruned every splat".into()));
    }
    ply::write_ply(&map, args.out.join("model.ply"))?;
    let mut log_text = String::from(IterationRecord::CSV_HEADER);
    log_text.push('\n');
    for r in &records {
        log_text.push_str(&r.to_csv_line());
        log_text.push('\n');
    }
    std::fs::write(args.out.join("metrics.csv"), log_text)?;
    println!(
        "trained {} iterations, final map {} splats -> {}",
        records.len(),
        map.len(),
        args.out.display()
    );
    Ok(())
}

fn run_render(args: &RenderArgs) -> Result<(), Error> {
    let map: Map = ply::read_ply(&args.model)?;
    let cameras = dataset::read_cameras_txt::<Scalar>(&args.cameras)?;
    std::fs::create_dir_all(&args.out)?;
    let settings = RenderSettings::default();
    for (id, cam) in &cameras {
        let out = render(&map, cam, &settings);
        dataset::write_image_png(&out.image, args.out.join(format!("{id}.png")))?;
    }
    println!("rendered {} views -> {}", cameras.len(), args.out.display());
    Ok(())
}

fn format_db(v: Scalar) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.4}")
    }
}

fn run_eval(args: &EvalArgs) -> Result<(), Error> {
    let fraction: TrainFraction = args.split_fraction.parse()?;
    let map: Map = ply::read_ply(&args.model)?;
    let (_, cameras) = dataset::load_dataset::<Scalar>(&args.data)?;
    let (_, eval_ids) = split_dataset(cameras.len(), fraction)?;
    let settings = RenderSettings::default();
    let mut sum_psnr = 0.0;
    let mut sum_ssim = 0.0;
    println!("view_id,psnr,ssim");
    for &id in &eval_ids {
        let cam = &cameras[id];
        let reference = cam.reference.as_ref().expect("load_dataset guarantees references");
        let out = render(&map, cam, &settings);
        let p = psnr(&out.image, reference, 1.0)?;
        let s = ssim(&out.image, reference)?;
        println!("{id},{},{s:.6}", format_db(p));
        sum_psnr += p;
        sum_ssim += s;
    }
    let n = eval_ids.len() as f64;
    println!("summary,{},{:.6}", format_db(sum_psnr / n), sum_ssim / n);
    Ok(())
}

fn run_recon(args: &ReconArgs) -> Result<(), Error> {
    let map: Map = ply::read_ply(&args.model)?;
    let surfaces = scene_file::read_surfaces::<Scalar>(&args.scene)?;
    let (mean, std, n) = reconstruction_error(&map, &surfaces, args.seed)?;
    println!("mean,std,n_samples");
    println!("{mean:.6},{std:.6},{n}");
    Ok(())
}

fn run_inspect(args: &InspectArgs) -> Result<(), Error> {
    let map: Map = ply::read_ply(&args.model)?;
    let thin = map.splats.iter().filter(|s| s.kind == SplatKind::Thin).count();
    let mut max_scales: Vec<f64> = map
        .splats
        .iter()
        .map(|s| {
            let sc = s.scales();
            sc[0].max(sc[1]).max(sc[2])
        })
        .collect();
    max_scales.sort_by(f64::total_cmp);
    let mut opacities: Vec<f64> = map.splats.iter().map(|s| s.opacity()).collect();
    opacities.sort_by(f64::total_cmp);
    println!("splats: {}", map.len());
    println!("sh_degree: {}", map.sh_degree());
    println!("kind: thin={} free={}", thin, map.len() - thin);
    println!(
        "max_scale: min={:.6} median={:.6} max={:.6}",
        max_scales[0],
        max_scales[max_scales.len() / 2],
        max_scales[max_scales.len() - 1]
    );
    println!(
        "opacity: min={:.4} median={:.4} max={:.4}",
        opacities[0],
        opacities[opacities.len() / 2],
        opacities[opacities.len() - 1]
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Synth(args) => run_synth(args),
        Command::Train(args) => run_train(args),
        Command::Render(args) => run_render(args),
        Command::Eval(args) => run_eval(args),
        Command::ReconError(args) => run_recon(args),
        Command::Inspect(args) => run_inspect(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Config(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
