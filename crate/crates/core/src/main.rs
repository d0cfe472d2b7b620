use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sbar::files::{
    load_channel, load_estimate, load_kernel, load_observation, load_plan, save_channel, save_estimate, save_kernel,
    save_observation, save_plan,
};
use sbar::harness::{
    emit_csv, emit_svg, nmse, read_csv, run_sweep, summarize, write_csv, ExperimentConfig, KernelSpec, SchemeConfig,
};
use sbar::kernels::{Jitter, LengthUnit};
use sbar::{
    build_port_geometry, design_plan, generate_ssc_channel, noise_power_for_snr, observe_pilots, reconstruct,
    ChannelRealization, Kernel, SscModelParams,
};

#[derive(Parser)]
#[command(name = "sbar", version, about = "Port-channel reconstruction for fluid antenna arrays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design a sampling plan from a kernel.
    Design(DesignArgs),
    /// Train a covariance kernel from simulated channels.
    TrainKernel(TrainArgs),
    /// Draw a channel and the pilots a plan would observe.
    Simulate(SimulateArgs),
    /// Reconstruct all ports from a plan and an observation.
    Estimate(EstimateArgs),
    /// Run a Monte-Carlo NMSE sweep and write the per-trial CSV.
    Sweep(SweepArgs),
    /// Render mean NMSE against P from a sweep CSV.
    Plot(PlotArgs),
    /// Print the default sweep configuration.
    InitConfig,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelChoice {
    Bessel,
    Exponential,
}

#[derive(Clone, Copy, ValueEnum)]
enum UnitChoice {
    Wavelength,
    Meter,
}

impl From<UnitChoice> for LengthUnit {
    fn from(u: UnitChoice) -> Self {
        match u {
            UnitChoice::Wavelength => LengthUnit::Wavelength,
            UnitChoice::Meter => LengthUnit::Meter,
        }
    }
}

#[derive(Args)]
struct GeometryArgs {
    #[arg(long, default_value_t = 256)]
    ports: usize,
    /// Aperture length in wavelengths.
    #[arg(long, default_value_t = 10.0)]
    aperture: f64,
    #[arg(long, default_value_t = 3.5e9)]
    carrier_hz: f64,
}

#[derive(Args)]
struct ChannelArgs {
    #[arg(long, default_value_t = 9)]
    clusters: usize,
    #[arg(long, default_value_t = 100)]
    rays: usize,
    #[arg(long, default_value_t = 5.0)]
    spread_deg: f64,
}

#[derive(Args)]
struct DesignArgs {
    /// Kernel file; overrides --kernel-kind.
    #[arg(long, conflicts_with = "kernel_kind")]
    kernel: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "bessel")]
    kernel_kind: KernelChoice,
    #[command(flatten)]
    geometry: GeometryArgs,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Defaults to sqrt(lambda / 2 pi) in --unit.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    order: u32,
    #[arg(long, value_enum, default_value = "wavelength")]
    unit: UnitChoice,
    /// Number of pilot timeslots P.
    #[arg(long)]
    timeslots: usize,
    /// Antennas per timeslot M.
    #[arg(long)]
    antennas: usize,
    #[arg(long, conflicts_with = "snr_db", required_unless_present = "snr_db")]
    noise_power: Option<f64>,
    /// Sets sigma^2 = N / 10^(snr/10).
    #[arg(long)]
    snr_db: Option<f64>,
    #[arg(long, short)]
    out: PathBuf,
    /// Also write the generated kernel.
    #[arg(long)]
    kernel_out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    geometry: GeometryArgs,
    #[command(flatten)]
    channel: ChannelArgs,
    #[arg(long, default_value_t = 100)]
    training_size: usize,
    /// Training channel t uses seed training_seed + t.
    #[arg(long)]
    training_seed: u64,
    #[arg(long, default_value_t = sbar::kernels::DEFAULT_RELATIVE_JITTER)]
    relative_jitter: f64,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 10.0)]
    aperture: f64,
    #[arg(long, default_value_t = 3.5e9)]
    carrier_hz: f64,
    #[command(flatten)]
    channel: ChannelArgs,
    #[arg(long)]
    channel_out: PathBuf,
    #[arg(long)]
    observation_out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    observation: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
    /// Channel file to score the estimate against.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    /// CSV output; defaults to the config's output_path, else stdout.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Also render the summary plot.
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long)]
    ports: Option<usize>,
    #[arg(long)]
    antennas: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    timeslots: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    snr_db: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    carrier_hz: Option<f64>,
    #[arg(long)]
    aperture: Option<f64>,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    rays: Option<usize>,
    #[arg(long)]
    spread_deg: Option<f64>,
    /// Add S-BAR with a trained covariance kernel of this many channels.
    #[arg(long)]
    with_covariance: Option<usize>,
    #[arg(long)]
    record_timing: bool,
    #[arg(long)]
    no_plan_cache: bool,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    csv: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
}

type CliResult = Result<(), Box<dyn std::error::Error>>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Design(a) => design(a),
        Command::TrainKernel(a) => train(a),
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Sweep(a) => sweep(a),
        Command::Plot(a) => plot(a),
        Command::InitConfig => {
            print!("{}", ExperimentConfig::default().to_toml());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprint!("error: {e}");
            let mut source = e.source();
            while let Some(s) = source {
                eprint!(": {s}");
                source = s.source();
            }
            eprintln!();
            ExitCode::FAILURE
        }
    }
}

fn design(a: DesignArgs) -> CliResult {
    let kernel = match &a.kernel {
        Some(path) => load_kernel(path)?,
        None => {
            let g = &a.geometry;
            let geom = build_port_geometry(g.ports, g.aperture, g.carrier_hz)?;
            let unit = LengthUnit::from(a.unit);
            let eta = a.eta.unwrap_or(unit.default_eta(&geom));
            match a.kernel_kind {
                KernelChoice::Bessel => Kernel::bessel(&geom, a.alpha, eta, a.order, unit, Jitter::default())?,
                KernelChoice::Exponential => Kernel::exponential(&geom, a.alpha, eta, unit, Jitter::default())?,
            }
        }
    };
    let noise_power = match (a.noise_power, a.snr_db) {
        (Some(s2), _) => s2,
        (None, Some(snr)) => noise_power_for_snr(kernel.num_ports() as f64, snr)?,
        (None, None) => unreachable!("clap requires one of them"),
    };
    let plan = design_plan(&kernel, a.timeslots, a.antennas, noise_power)?;
    save_plan(&plan, &a.out)?;
    if let Some(path) = &a.kernel_out {
        save_kernel(&kernel, path)?;
    }
    let order: Vec<String> = plan.order().iter().map(|p| (p + 1).to_string()).collect();
    println!("plan {} ({} x {} measurements, sigma^2 = {noise_power})", plan.id(), a.timeslots, a.antennas);
    println!("ports: {}", order.join(" "));
    Ok(())
}

fn train(a: TrainArgs) -> CliResult {
    let g = &a.geometry;
    let geom = build_port_geometry(g.ports, g.aperture, g.carrier_hz)?;
    let training: Vec<ChannelRealization> = (0..a.training_size)
        .map(|t| {
            let params = SscModelParams::new(
                a.channel.clusters,
                a.channel.rays,
                a.channel.spread_deg,
                a.training_seed.wrapping_add(t as u64),
            );
            generate_ssc_channel(&geom, &params)
        })
        .collect::<Result<_, _>>()?;
    let kernel = Kernel::covariance(&training, Jitter::Relative(a.relative_jitter))?;
    save_kernel(&kernel, &a.out)?;
    println!("kernel {} from {} channels", kernel.fingerprint(), a.training_size);
    Ok(())
}

fn simulate(a: SimulateArgs) -> CliResult {
    let plan = load_plan(&a.plan)?;
    let geom = build_port_geometry(plan.num_ports(), a.aperture, a.carrier_hz)?;
    let params = SscModelParams::new(a.channel.clusters, a.channel.rays, a.channel.spread_deg, a.seed);
    let h = generate_ssc_channel(&geom, &params)?;
    let noise_seed = sbar::rng::hash_words(&[a.seed, 1]);
    let y = observe_pilots(&h, &plan, plan.noise_power(), noise_seed)?;
    save_channel(&h, &a.channel_out)?;
    save_observation(&y, &a.observation_out)?;
    Ok(())
}

fn estimate(a: EstimateArgs) -> CliResult {
    let plan = load_plan(&a.plan)?;
    let y = load_observation(&a.observation)?;
    let r = reconstruct(&plan, &y)?;
    save_estimate(&r, plan.id(), &a.out)?;
    if let Some(path) = &a.truth {
        let h = load_channel(path)?;
        let e = nmse(&h, &ChannelRealization::external(r.estimate.clone()))?;
        println!("nmse {e:e}");
    }
    // Reading back catches a truncated write before the caller relies on it.
    load_estimate(&a.out)?;
    Ok(())
}

fn sweep(a: SweepArgs) -> CliResult {
    let mut config = match &a.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    config.base_seed = a.seed;
    if let Some(v) = a.ports {
        config.num_ports = v;
    }
    if let Some(v) = a.antennas {
        config.antennas_per_slot = v;
    }
    if let Some(v) = a.timeslots {
        config.timeslots = v;
    }
    if let Some(v) = a.snr_db {
        config.snr_db = v;
    }
    if let Some(v) = a.trials {
        config.trials = v;
    }
    if let Some(v) = a.carrier_hz {
        config.carrier_hz = v;
    }
    if let Some(v) = a.aperture {
        config.aperture_in_wavelengths = v;
    }
    if let Some(v) = a.clusters {
        config.channel.num_clusters = v;
    }
    if let Some(v) = a.rays {
        config.channel.rays_per_cluster = v;
    }
    if let Some(v) = a.spread_deg {
        config.channel.angle_spread_deg = v;
    }
    if let Some(t) = a.with_covariance {
        // Training seeds are placed away from the hashed evaluation seeds.
        let training_seed = sbar::rng::hash_words(&[a.seed, u64::MAX]);
        config.schemes.push(SchemeConfig::Sbar {
            name: None,
            kernel: KernelSpec::covariance(t, training_seed),
        });
    }
    config.record_timing |= a.record_timing;
    config.cache_plans &= !a.no_plan_cache;
    if let Some(n) = a.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    config.validate()?;

    let records = run_sweep(&config)?;
    match a.out.as_ref().or(config.output_path.as_ref()) {
        Some(path) => emit_csv(&records, path)?,
        None => write_csv(&records, std::io::stdout().lock())?,
    }
    if let Some(path) = &a.svg {
        emit_svg(&records, path)?;
    }
    let mut err = std::io::stderr().lock();
    for s in summarize(&records) {
        for p in &s.points {
            writeln!(
                err,
                "{:<24} snr {:>6} dB  P {:>3}  mean nmse {:.4e} +- {:.1e}",
                s.label(false),
                s.snr_db,
                p.num_timeslots,
                p.mean,
                p.std_err
            )?;
        }
    }
    Ok(())
}

fn plot(a: PlotArgs) -> CliResult {
    emit_svg(&read_csv(&a.csv)?, &a.out)?;
    Ok(())
}
