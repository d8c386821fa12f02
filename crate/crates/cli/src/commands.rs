use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use tubetrace::baselines::{color_threshold_baseline, iou_tracking_baseline, ColorThresholdConfig, IouTrackingConfig};
use tubetrace::engine::{run_parallel, TurningPointMode};
use tubetrace::metrics::{evaluate, format_table};
use tubetrace::seeding::{generate_seeds, seeds_from_json, seeds_to_json, SeedingConfig};
use tubetrace::segmenter::protocol::{serve, EchoSegmenter, ImageOracleSegmenter};
use tubetrace::synth::{generate, SynthSpec};
use tubetrace::volume::{deflicker_z, load_labels, load_volume, save_labels, save_volume};
use tubetrace::{EngineConfig, PlaneAxis, Seed, Volume3D};

use crate::backend::{BackendSpec, Factory};
use crate::{
    AxisArg, BaselineArgs, BaselineMethod, Cli, Command, DeflickerArgs, EvalArgs, SeedingArgs, SeedsArgs, SegmentArgs,
    ServeArgs, ServeKind, SynthArgs, UsageError,
};

pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a, cli.rng_seed),
        Command::Seeds(a) => seeds(a),
        Command::Segment(a) => segment(a),
        Command::Baseline(a) => baseline(a),
        Command::Eval(a) => eval(a),
        Command::Deflicker(a) => deflicker(a),
        Command::ServeBackend(a) => serve_backend(a),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load(path: &Path) -> Result<Volume3D> {
    load_volume(path).with_context(|| format!("loading volume {}", path.display()))
}

fn check_window(window: usize) -> Result<()> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(UsageError(format!("deflicker window must be odd and positive, got {window}")).into());
    }
    Ok(())
}

fn synth(a: SynthArgs, rng_seed: u64) -> Result<()> {
    let mut spec: SynthSpec = read_json(&a.spec)?;
    spec.rng_seed = rng_seed;
    let (vol, gt, seeds) = generate(&spec)?;
    save_volume(format!("{}.vol.volj", a.out_prefix), &vol)?;
    save_labels(format!("{}.gt.volj", a.out_prefix), &gt)?;
    let seeds_path = format!("{}.seeds.json", a.out_prefix);
    fs::write(&seeds_path, seeds_to_json(&seeds)).with_context(|| format!("writing {seeds_path}"))?;
    Ok(())
}

fn auto_seeds(vol: &Volume3D, s: &SeedingArgs) -> Result<Vec<Seed>> {
    let cfg = SeedingConfig {
        eta_percentile: s.eta,
        min_component_voxels: s.min_voxels,
    };
    cfg.validate().map_err(|e| UsageError(e.to_string()))?;
    Ok(match s.deflicker {
        Some(w) => {
            check_window(w)?;
            generate_seeds(&deflicker_z(vol, w), &cfg)
        }
        None => generate_seeds(vol, &cfg),
    })
}

fn seeds(a: SeedsArgs) -> Result<()> {
    let vol = load(&a.volume)?;
    let json = seeds_to_json(&auto_seeds(&vol, &a.seeding)?);
    match a.out {
        Some(p) => fs::write(&p, json).with_context(|| format!("writing {}", p.display()))?,
        None => println!("{json}"),
    }
    Ok(())
}

fn engine_config(a: &SegmentArgs) -> Result<EngineConfig> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            EngineConfig::from_json(&text).map_err(|e| UsageError(format!("{}: {e}", p.display())))?
        }
        None => EngineConfig::default(),
    };
    if let Some(axis) = a.restrict_axis {
        cfg.restrict_axis = Some(match axis {
            AxisArg::Z => PlaneAxis::Z,
            AxisArg::Y => PlaneAxis::Y,
            AxisArg::X => PlaneAxis::X,
        });
    }
    if a.naive {
        cfg.turning_points = TurningPointMode::Off;
    }
    Ok(cfg)
}

fn segment(a: SegmentArgs) -> Result<()> {
    let cfg = engine_config(&a)?;
    let spec = BackendSpec::parse(&a.backend)?;
    if a.workers == 0 {
        return Err(UsageError("--workers must be at least 1".into()).into());
    }
    let vol = load(&a.volume)?;
    let seeds = if a.seeds == "auto" {
        auto_seeds(&vol, &a.seeding)?
    } else {
        let text = fs::read_to_string(&a.seeds).with_context(|| format!("reading seeds {}", a.seeds))?;
        seeds_from_json(&text).with_context(|| format!("parsing seeds {}", a.seeds))?
    };
    let factory = Factory::new(spec)?;
    check_gt_shape(&factory, &vol)?;
    log::info!("segmenting from {} seeds with {} worker(s)", seeds.len(), a.workers);
    let make = || factory.make();
    let out = run_parallel(&vol, &seeds, &make, &cfg, a.workers)?;
    if out.truncated {
        log::warn!("iteration cap reached; the prediction is partial");
    }
    if let Some(p) = &a.events {
        let file = fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
        let mut w = BufWriter::new(file);
        for e in &out.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    save_labels(&a.out, &out.labels.with_voxel_size(vol.voxel_size_nm())?)?;
    Ok(())
}

fn check_gt_shape(f: &Factory, vol: &Volume3D) -> Result<()> {
    if let Some(gt) = f.ground_truth() {
        if gt.shape() != vol.shape() {
            bail!("ground truth shape {:?} differs from volume shape {:?}", gt.shape(), vol.shape());
        }
    }
    Ok(())
}

fn baseline(a: BaselineArgs) -> Result<()> {
    let vol = load(&a.volume)?;
    let labels = match a.method {
        BaselineMethod::Color => {
            let cfg: ColorThresholdConfig = match &a.config {
                Some(p) => read_json(p)?,
                None => ColorThresholdConfig::default(),
            };
            color_threshold_baseline(&vol, &cfg)?
        }
        BaselineMethod::Iou => {
            let Some(b) = &a.backend else {
                return Err(UsageError("baseline iou needs --backend".into()).into());
            };
            let cfg: IouTrackingConfig = match &a.config {
                Some(p) => read_json(p)?,
                None => IouTrackingConfig::default(),
            };
            let factory = Factory::new(BackendSpec::parse(b)?)?;
            check_gt_shape(&factory, &vol)?;
            let mut backend = factory.make()?;
            iou_tracking_baseline(&vol, backend.as_mut(), &cfg)?
        }
    };
    save_labels(&a.out, &labels)?;
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    if !(0.0..1.0).contains(&a.match_threshold) {
        return Err(UsageError(format!("--match-threshold must lie in [0, 1), got {}", a.match_threshold)).into());
    }
    let gt = load_labels(&a.gt).with_context(|| format!("loading {}", a.gt.display()))?;
    let pred = load_labels(&a.pred).with_context(|| format!("loading {}", a.pred.display()))?;
    let report = evaluate(&gt, &pred, a.match_threshold, a.largest_only)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("{}", format_table(&report));
    }
    Ok(())
}

fn deflicker(a: DeflickerArgs) -> Result<()> {
    check_window(a.window)?;
    let vol = load(&a.volume)?;
    save_volume(&a.out, &deflicker_z(&vol, a.window))?;
    Ok(())
}

fn serve_backend(a: ServeArgs) -> Result<()> {
    let stdin = std::io::stdin().lock();
    let stdout = std::io::stdout().lock();
    match a.kind {
        ServeKind::Echo => serve(&mut EchoSegmenter, stdin, stdout)?,
        ServeKind::ImageOracle => serve(&mut ImageOracleSegmenter, stdin, stdout)?,
    }
    Ok(())
}
