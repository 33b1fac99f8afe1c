use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use heralded::experiment::{self, analyze, AnalysisOptions, BudgetReport, BudgetSummary, GroundTruth, OutputSet, Report};
use heralded::frames_io::{read_frames, read_frames_csv, read_meta, write_frames, write_frames_csv, write_meta};
use heralded::{theory_mode, Error, ExperimentConfig, FrameSet};

#[derive(Parser)]
#[command(name = "heralded", version, about = "Heralded single-photon simulation and homodyne tomography")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate heralded frames and a vacuum reference, written as HPLF files.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also export the frames as CSV (one frame per row).
        #[arg(long)]
        csv: bool,
    },
    /// Analyze a frame file: PCA mode, tomography, bootstrap errors.
    Analyze {
        #[command(flatten)]
        common: OptionalConfig,
        /// Frame file, HPLF binary or CSV (by extension).
        #[arg(long)]
        input: PathBuf,
        /// Signal-blocked reference frames for shot-noise calibration.
        #[arg(long)]
        vacuum: Option<PathBuf>,
    },
    /// Print the loss budget and, with a config, the expected photon statistics.
    Report {
        #[command(flatten)]
        common: OptionalConfig,
    },
    /// Simulate and analyze in one go.
    Full {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Overrides {
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured n_frames.
    #[arg(long)]
    frames: Option<usize>,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct OptionalConfig {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

fn load_config(path: &Path, overrides: &Overrides) -> heralded::Result<ExperimentConfig> {
    let mut config = ExperimentConfig::from_file(path)?;
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(n) = overrides.frames {
        config.n_frames = n;
    }
    config.validate()?;
    Ok(config)
}

fn read_any(path: &Path, dt: Option<f64>) -> heralded::Result<FrameSet> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let dt = dt.ok_or_else(|| Error::FrameFormat {
            path: path.to_path_buf(),
            reason: "CSV frames carry no sample spacing; pass --config".into(),
        })?;
        read_frames_csv(path, dt)
    } else {
        read_frames(path)
    }
}

fn simulate(common: &Common, csv: bool) -> heralded::Result<()> {
    let config = load_config(&common.config, &common.overrides)?;
    let mut outputs = OutputSet::new(&common.out)?;
    let run = experiment::simulate(&config)?;
    let frames_path = outputs.track("frames.bin");
    outputs.track("frames.bin.meta");
    write_frames(&frames_path, &run.simulation.frames)?;
    write_meta(&frames_path, &config)?;
    if let Some(vacuum) = &run.vacuum {
        let path = outputs.track("vacuum.bin");
        outputs.track("vacuum.bin.meta");
        write_frames(&path, vacuum)?;
        write_meta(&path, &config)?;
    }
    if csv {
        let path = outputs.track("frames.csv");
        write_frames_csv(path, &run.simulation.frames)?;
    }
    outputs.write("theory_mode.csv", |w| Ok(run.theory_mode.write_csv(w)?))?;
    for f in outputs.commit() {
        println!("{}", f.display());
    }
    Ok(())
}

fn analyze_files(common: &OptionalConfig, input: &Path, vacuum: Option<&Path>) -> heralded::Result<()> {
    let config = match &common.config {
        Some(path) => Some(load_config(path, &common.overrides)?),
        None => read_meta(input)?,
    };
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let dt = config.as_ref().map(|c| c.dt);
    let frames = read_any(input, dt)?;
    let vacuum = vacuum.map(|p| read_any(p, dt)).transpose()?;
    let theory = config.as_ref().map(theory_mode).transpose()?;
    let options = config.as_ref().map(AnalysisOptions::from_config).unwrap_or_default();

    let mut outputs = OutputSet::new(&out)?;
    let analysis = analyze(&frames, vacuum.as_ref(), theory.as_ref(), &options)?;
    let report = Report::new(&analysis, config.as_ref(), None)?;
    experiment::write_report_files(&mut outputs, &report, &analysis, theory.as_ref())?;
    outputs.commit();
    print_summary(&report);
    Ok(())
}

fn report(common: &OptionalConfig) -> heralded::Result<()> {
    let budget = BudgetSummary::reference()?;
    print!("{}", budget.budget.render()?);
    println!(
        "AOPO escape efficiency {:.4} (loss {:.2}%)",
        budget.opo_escape_efficiency,
        100.0 * (1.0 - budget.opo_escape_efficiency)
    );
    let truth = common
        .config
        .as_ref()
        .map(|p| load_config(p, &common.overrides).and_then(|c| GroundTruth::of(&c)))
        .transpose()?;
    if let Some(t) = &truth {
        println!("expected photon statistics {:.5?}", &t.photon_dist[..4]);
        println!("expected W(0) {:.5}", t.wigner_origin);
    }
    if let Some(out) = &common.out {
        let mut outputs = OutputSet::new(out)?;
        let json = heralded::report::to_json_string(&BudgetReport {
            loss_budget: budget,
            ground_truth: truth,
        })?;
        outputs.write("budget.json", |w| Ok(w.write_all(json.as_bytes())?))?;
        outputs.commit();
    }
    Ok(())
}

fn print_summary(report: &Report) {
    let se = report.se.as_ref();
    println!("photon_dist {:.4?}", &report.photon_dist[..4.min(report.photon_dist.len())]);
    match se {
        Some(se) => println!("wigner_origin {:.4} ± {:.4}", report.wigner_origin, se.wigner_origin),
        None => println!("wigner_origin {:.4}", report.wigner_origin),
    }
    if let Some(m) = report.mode_match {
        println!("mode_match {m:.4}");
    }
    println!("eigenvalue gap {:.3}", report.eigenvalue_gap);
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        Error::Io(_) | Error::FrameFormat { .. } | Error::Csv(_) | Error::Json(_) => 1,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { common, csv } => simulate(common, *csv),
        Command::Analyze { common, input, vacuum } => analyze_files(common, input, vacuum.as_deref()),
        Command::Report { common } => report(common),
        Command::Full { common } => load_config(&common.config, &common.overrides).and_then(|config| {
            let report = experiment::run_full(&config, &common.out)?;
            print_summary(&report);
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
