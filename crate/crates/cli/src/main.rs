use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use specgrad::bench::scaling_benchmark;
use specgrad::diffusion::{
    sample, training_step_loss, NoisePredictor, NoiseScale, NoiseSchedule, OraclePredictor,
    SamplerOptions, ZeroPredictor, NAMED_SCHEDULES,
};
use specgrad::envelope::Cepstrum;
use specgrad::io::{read_sgmel, read_wav, write_filter_csv, write_sgmel, write_wav, RunConfig, WavEncoding};
use specgrad::mel::{LogMelSpectrogram, MelBank};
use specgrad::prior::{NoiseModel, NoisePrior, PriorKind};
use specgrad::stft::Stft;
use specgrad::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_FORMAT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Spectral-envelope shaped diffusion noise toolkit.
#[derive(Parser)]
#[command(name = "specgrad", version)]
struct Cli {
    /// Run configuration (`key = value` per line); defaults apply otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the log-mel spectrogram of a WAV file.
    Analyze {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Draw one noise realisation from a prior built on a mel file.
    ShapeNoise {
        #[arg(long)]
        mel: PathBuf,
        #[command(flatten)]
        prior: PriorArgs,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run the ancestral sampler.
    Sample {
        #[arg(long)]
        mel: PathBuf,
        #[arg(long)]
        schedule: Option<String>,
        #[command(flatten)]
        prior: PriorArgs,
        /// `zero` or `oracle:<reference.wav>`.
        #[arg(long)]
        predictor: String,
        /// Disable noise injection between steps.
        #[arg(long)]
        no_inject: bool,
        /// Scale injected noise by γ_t instead of √γ_t.
        #[arg(long)]
        literal_gamma: bool,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Evaluate the training loss for one step.
    LossEval {
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        schedule: Option<String>,
        #[command(flatten)]
        prior: PriorArgs,
        /// Diffusion step (1-based); drawn uniformly when omitted.
        #[arg(long = "t")]
        step: Option<usize>,
        /// `zero`, `oracle` (the input itself) or `oracle:<reference.wav>`.
        #[arg(long, default_value = "zero")]
        predictor: String,
    },
    /// Export per-frame filter magnitudes as CSV (bins × frames).
    ExportFilter {
        #[arg(long)]
        mel: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Time the time-varying filter at K and 2K frames.
    Bench {
        #[arg(long, default_value_t = 64)]
        frames: usize,
        #[arg(long, default_value_t = 2048)]
        fft: usize,
        #[arg(long, default_value_t = 10)]
        repeat: usize,
    },
    /// Print the named inference schedules.
    Schedules,
    /// Print the default run configuration.
    DefaultConfig,
}

#[derive(Args)]
struct PriorArgs {
    /// standard, diagonal or envelope.
    #[arg(long)]
    prior: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

enum Failure {
    Usage(String),
    Lib(Error),
    Bound(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Bound(_) => EXIT_NUMERICAL,
            Failure::Lib(e) => match e {
                Error::Io(_) | Error::Format(_) | Error::UnsupportedFormat(_) => EXIT_FORMAT,
                Error::DegenerateWindow(_) | Error::InvalidFilter(_) | Error::NumericalRank(_) => EXIT_NUMERICAL,
                _ => EXIT_USAGE,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) | Failure::Bound(m) => m.clone(),
            Failure::Lib(e) => e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

struct Context {
    cfg: RunConfig,
    stft: Stft,
}

impl Context {
    fn new(config: Option<&Path>) -> CliResult<Self> {
        let cfg = match config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let stft = Stft::hann(cfg.stft)?;
        Ok(Self { cfg, stft })
    }

    fn bank(&self) -> CliResult<std::sync::Arc<MelBank>> {
        Ok(MelBank::cached(self.cfg.mel, self.cfg.stft)?)
    }

    /// Reads a waveform and zero-pads it to a multiple of the hop.
    fn read_padded(&self, path: &Path) -> CliResult<(Vec<f64>, usize)> {
        let mut x = read_wav(path, self.cfg.stft.sample_rate)?;
        let original = x.len();
        let hop = self.cfg.stft.hop;
        let padded = original.div_ceil(hop).max(1) * hop;
        x.resize(padded, 0.0);
        Ok((x, original))
    }

    fn prior(&self, args: &PriorArgs, c: &LogMelSpectrogram) -> CliResult<NoisePrior> {
        let kind = match &args.prior {
            Some(p) => p.parse::<PriorKind>().map_err(|e| Failure::Usage(e.to_string()))?,
            None => self.cfg.prior,
        };
        Ok(NoisePrior::from_mel(kind, c, &self.stft, &*self.bank()?, &self.cfg.envelope)?)
    }

    fn seed(&self, args: &PriorArgs) -> u64 {
        args.seed.unwrap_or(self.cfg.seed)
    }

    fn schedule(&self, arg: Option<&str>) -> CliResult<NoiseSchedule> {
        let spec = arg.unwrap_or(&self.cfg.schedule);
        if NAMED_SCHEDULES.iter().any(|s| s.name == spec) {
            return Ok(NoiseSchedule::named(spec)?);
        }
        if spec.starts_with("linspace(") || spec.starts_with('[') {
            return Ok(NoiseSchedule::parse(spec)?);
        }
        let text = std::fs::read_to_string(spec)
            .map_err(|e| Failure::Lib(Error::Format(format!("schedule file `{spec}`: {e}"))))?;
        NoiseSchedule::parse(&text).map_err(|e| Failure::Lib(Error::Format(e.to_string())))
    }

    fn write_output(&self, path: &Path, x: &[f64]) -> CliResult<()> {
        Ok(write_wav(path, x, self.cfg.stft.sample_rate, WavEncoding::Float32)?)
    }
}

fn fit_length(mut x: Vec<f64>, len: usize) -> Vec<f64> {
    x.resize(len, 0.0);
    x
}

fn predictor_for(
    ctx: &Context,
    spec: &str,
    sched: &NoiseSchedule,
    len: usize,
    own_input: Option<&[f64]>,
) -> CliResult<Box<dyn NoisePredictor>> {
    if spec == "zero" {
        return Ok(Box::new(ZeroPredictor));
    }
    let reference = match (spec.strip_prefix("oracle:"), spec, own_input) {
        (Some(path), _, _) => fit_length(ctx.read_padded(Path::new(path))?.0, len),
        (None, "oracle", Some(x)) => x.to_vec(),
        _ => {
            return Err(Failure::Usage(format!(
                "unknown predictor `{spec}` (expected zero or oracle:<ref.wav>)"
            )))
        }
    };
    Ok(Box::new(OraclePredictor::new(reference, sched.clone())?))
}

fn run(cli: Cli) -> CliResult<()> {
    let ctx = Context::new(cli.config.as_deref())?;
    let hop = ctx.cfg.stft.hop;
    match cli.command {
        Command::Analyze { input, output } => {
            let (x, _) = ctx.read_padded(&input)?;
            let c = ctx.bank()?.log_mel(&ctx.stft, &x)?;
            write_sgmel(&output, &c)?;
            println!("wrote {} frames × {} bands to {}", c.frames(), c.n_mels(), output.display());
        }
        Command::ShapeNoise { mel, prior, output } => {
            let c = read_sgmel(&mel)?;
            let noise = ctx.prior(&prior, &c)?;
            let eps = noise.sample_noise(c.frames() * hop, ctx.seed(&prior).into())?;
            ctx.write_output(&output, &eps)?;
        }
        Command::Sample {
            mel,
            schedule,
            prior,
            predictor,
            no_inject,
            literal_gamma,
            output,
        } => {
            let c = read_sgmel(&mel)?;
            let len = c.frames() * hop;
            let sched = ctx.schedule(schedule.as_deref())?;
            let noise = ctx.prior(&prior, &c)?;
            let predictor = predictor_for(&ctx, &predictor, &sched, len, None)?;
            let opts = SamplerOptions {
                inject_noise: !no_inject,
                noise_scale: if literal_gamma {
                    NoiseScale::LiteralGamma
                } else {
                    NoiseScale::SqrtGamma
                },
            };
            let x = sample(&c, &noise, &sched, predictor.as_ref(), len, ctx.seed(&prior), opts)?;
            ctx.write_output(&output, &x)?;
        }
        Command::LossEval {
            wav,
            schedule,
            prior,
            step,
            predictor,
        } => {
            let (x0, _) = ctx.read_padded(&wav)?;
            let c = ctx.bank()?.log_mel(&ctx.stft, &x0)?;
            let sched = ctx.schedule(schedule.as_deref())?;
            let noise = ctx.prior(&prior, &c)?;
            let predictor = predictor_for(&ctx, &predictor, &sched, x0.len(), Some(&x0))?;
            let result = training_step_loss(&x0, &c, &noise, &sched, step, predictor.as_ref(), ctx.seed(&prior))?;
            println!("prior={} t={} loss={:e}", noise.kind(), result.step, result.loss);
        }
        Command::ExportFilter { mel, output } => {
            let c = read_sgmel(&mel)?;
            let cep = Cepstrum::new(ctx.cfg.stft.fft_size)?;
            let filter = cep.build_filter_spec(&c, &*ctx.bank()?, &ctx.cfg.envelope)?;
            let file = BufWriter::new(File::create(&output).map_err(Error::from)?);
            write_filter_csv(file, &filter)?;
        }
        Command::Bench { frames, fft, repeat } => {
            let report = scaling_benchmark(frames, fft, repeat)?;
            print!("{}", report.table());
            if !report.within_bound() {
                return Err(Failure::Bound(format!(
                    "time ratio {:.3} exceeds the O(K·N log N) bound",
                    report.ratio()
                )));
            }
        }
        Command::Schedules => {
            let mut out = std::io::stdout().lock();
            for s in NAMED_SCHEDULES {
                writeln!(out, "{} {}", s.name, s.describe()).map_err(Error::from)?;
            }
        }
        Command::DefaultConfig => print!("{}", RunConfig::default().to_text()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
