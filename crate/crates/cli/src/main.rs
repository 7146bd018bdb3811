//! `fringeproc`: simulate fringes, estimate orientation, lift it to a
//! direction, demodulate with the spiral transform, and benchmark.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O or format, 4 numerical failure.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "fringeproc", version, about = "Fringe orientation estimation and orientation-guided demodulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags every command accepts.
#[derive(Args, Clone, Debug)]
pub struct Common {
    /// Base seed for every random draw of the command.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the command's JSON report to this file.
    #[arg(long)]
    pub json_report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a fringe image with ground-truth phase, orientation and direction.
    Simulate(SimulateArgs),
    /// Write seeded training and validation corpora.
    MakeDataset(MakeDatasetArgs),
    /// Train the orientation network on a dataset directory.
    Train(TrainArgs),
    /// Estimate orientation with a trained network.
    Infer(InferArgs),
    /// Estimate orientation with a classical estimator.
    OrientClassic(OrientClassicArgs),
    /// Lift an orientation map to a direction map.
    UnwrapOrientation(UnwrapArgs),
    /// Demodulate a fringe image given a direction map.
    Demodulate(DemodulateArgs),
    /// Compare a predicted map with a reference.
    Evaluate(EvaluateArgs),
    /// Orientation-error sweep over modulation depth and noise.
    Benchmark(BenchmarkArgs),
    /// Prefilter, network orientation, direction lifting and demodulation.
    Pipeline(PipelineArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ObjectKind {
    /// Random sum of Gaussian kernels.
    Gaussians,
    /// Scaled peaks surface.
    Peaks,
    /// Scaled peaks plus blurred random ellipses.
    PeaksBlobs,
    /// No object phase.
    Flat,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Output fringe container; ground truth goes to sibling files.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 256)]
    pub rows: usize,
    #[arg(long, default_value_t = 256)]
    pub cols: usize,
    #[arg(long, value_enum, default_value_t = ObjectKind::Peaks)]
    pub object: ObjectKind,
    /// Peaks coefficient.
    #[arg(long, default_value_t = 2.0)]
    pub coeff: f64,
    /// Peak height of the blob component in radians.
    #[arg(long, default_value_t = 2.0)]
    pub blob_amplitude: f64,
    /// Carrier period in pixels; omit for no carrier.
    #[arg(long)]
    pub period: Option<f64>,
    /// Carrier azimuth in radians.
    #[arg(long, default_value_t = 0.0)]
    pub theta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct MakeDatasetArgs {
    /// Output directory; `train/` and `val/` are created inside.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub train: usize,
    #[arg(long, default_value_t = 50)]
    pub val: usize,
    #[arg(long, default_value_t = 64)]
    pub rows: usize,
    #[arg(long, default_value_t = 64)]
    pub cols: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Directory produced by `make-dataset`.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub paths: usize,
    #[arg(long, default_value_t = 16)]
    pub filters: usize,
    #[arg(long, default_value_t = 2)]
    pub blocks: usize,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 1)]
    pub batch_size: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct InferArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Remove background and normalize contrast before inference.
    #[arg(long)]
    pub prefilter: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ClassicMethod {
    Gradient,
    Cpfg,
}

#[derive(Args, Debug)]
pub struct OrientClassicArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ClassicMethod::Cpfg)]
    pub method: ClassicMethod,
    #[arg(long, default_value_t = 2)]
    pub window: usize,
    #[arg(long)]
    pub prefilter: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct UnwrapArgs {
    /// Orientation container (angle channel, optional validity channel).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct DemodulateArgs {
    /// Zero-mean fringe container.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub direction: PathBuf,
    /// Output container: unwrapped phase, then wrapped phase.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub prefilter: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
pub enum Metric {
    Oe,
    RmseSin,
    RmsePhase,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long = "ref", value_name = "REF")]
    pub reference: PathBuf,
    #[arg(long, value_enum, default_value_t = Metric::Oe)]
    pub metric: Metric,
    #[arg(long, default_value_t = 0)]
    pub exclude_border: usize,
    /// Print the report as JSON on stdout.
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct BenchmarkArgs {
    /// Comma-separated peaks coefficients.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5,6,7,8,9,10")]
    pub a_values: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.1")]
    pub noise: Vec<f64>,
    /// Comma-separated subset of gradient, cpfg, deeporient.
    #[arg(long, value_delimiter = ',', default_value = "cpfg")]
    pub methods: Vec<String>,
    #[arg(long, default_value_t = 14.0)]
    pub period: f64,
    #[arg(long, default_value_t = 0.0)]
    pub theta: f64,
    #[arg(long, default_value_t = 2)]
    pub window: usize,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long, default_value_t = 512)]
    pub size: usize,
    #[arg(long, default_value_t = 8)]
    pub border: usize,
    /// Trained model, required for the deeporient method.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// CSV output.
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for per-case |sin 2FO - sin 2FO_gt| maps.
    #[arg(long)]
    pub error_maps: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct PipelineArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Border excluded when ground truth is available.
    #[arg(long, default_value_t = 16)]
    pub border: usize,
    #[command(flatten)]
    pub common: Common,
}

fn init_threads() {
    if let Some(n) = std::env::var("FRINGEPROC_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // Fails only if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    init_threads();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::MakeDataset(a) => commands::make_dataset(a),
        Command::Train(a) => commands::train(a),
        Command::Infer(a) => commands::infer(a),
        Command::OrientClassic(a) => commands::orient_classic(a),
        Command::UnwrapOrientation(a) => commands::unwrap_orientation(a),
        Command::Demodulate(a) => commands::demodulate(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Benchmark(a) => commands::benchmark(a),
        Command::Pipeline(a) => commands::pipeline(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn argument_definitions_are_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn method_lists_parse() {
        let cli = Cli::try_parse_from(["fringeproc", "benchmark", "--methods", "cpfg,gradient", "--out", "x.csv"]).unwrap();
        let Command::Benchmark(a) = cli.command else { panic!("benchmark expected") };
        assert_eq!(a.methods, ["cpfg", "gradient"]);
        let cli = Cli::try_parse_from(["fringeproc", "benchmark", "--methods", "nope", "--out", "x.csv"]).unwrap();
        let Command::Benchmark(a) = cli.command else { panic!("benchmark expected") };
        assert_eq!(commands::benchmark(a).unwrap_err().exit_code(), 2);
    }
}
