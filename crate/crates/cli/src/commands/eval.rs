use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use wavelet_map::eval::{evaluate, sample_test_points, split_frames, write_bands_csv, write_roc_csv, write_summary_csv, EvalReport};
use wavelet_map::observation::Observation;

use super::{load_log, load_map};
use crate::config::load_scene;
use crate::error::{CliError, CliResult};
use crate::Globals;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Map file.
    map: PathBuf,
    /// Observation log whose held-out frames supply the test points.
    #[arg(long = "log", required = true)]
    logs: Vec<PathBuf>,
    /// Ground-truth scene; defaults to `eval.scene` of the run config.
    #[arg(long)]
    scene: Option<String>,
    /// Directory for roc.csv, bands.csv and summary.csv.
    #[arg(long)]
    out_dir: PathBuf,
}

fn write_csv(dir: &Path, name: &str, report: &EvalReport, f: fn(BufWriter<File>, &EvalReport) -> std::io::Result<()>) -> CliResult<()> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| CliError::file(&path, e))?;
    f(BufWriter::new(file), report).map_err(|e| CliError::file(&path, e))
}

pub fn run(globals: &Globals, args: Args) -> CliResult<()> {
    let config = globals.run_config()?;
    let scene_spec = match (&args.scene, &config.eval.scene) {
        (Some(s), _) => s.clone(),
        (None, Some(s)) if s.starts_with("builtin:") => s.clone(),
        (None, Some(s)) => config.resolve(s).to_string_lossy().into_owned(),
        (None, None) => return Err(CliError::input("no ground-truth scene: pass --scene or set eval.scene")),
    };
    let scene = load_scene(&scene_spec)?;
    let map = load_map(&args.map)?;
    let mut eval_config = config.eval_config();
    eval_config.seed = globals.seed_or(config.seed);

    let mut test_frames: Vec<Observation> = Vec::new();
    for path in &args.logs {
        let log = load_log(path)?;
        let (_, test) = split_frames(log.frames.len(), eval_config.test_every);
        test_frames.extend(test.into_iter().map(|i| log.observation(i)));
    }
    if test_frames.is_empty() {
        return Err(CliError::input(format!(
            "no held-out frames: the logs are shorter than eval.test_every = {}",
            eval_config.test_every
        )));
    }
    let points = sample_test_points(&scene, &test_frames, &eval_config);
    let report = evaluate(&map, &points, &eval_config, globals.exec);

    std::fs::create_dir_all(&args.out_dir).map_err(|e| CliError::file(&args.out_dir, e))?;
    write_csv(&args.out_dir, "roc.csv", &report, write_roc_csv)?;
    write_csv(&args.out_dir, "bands.csv", &report, write_bands_csv)?;
    write_csv(&args.out_dir, "summary.csv", &report, write_summary_csv)?;
    println!(
        "auc {:.4}  threshold {:.4}  occupied {}  free {}  unknown {}",
        report.auc, report.threshold, report.occupied, report.free, report.unknown
    );
    for band in &report.bands {
        println!(
            "  band [{:>6.3}, {:>6.3}) m: {:>7} points, accuracy {:.4}",
            band.lower,
            band.upper,
            band.count(),
            band.accuracy()
        );
    }
    Ok(())
}
