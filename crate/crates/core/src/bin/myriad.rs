use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use myriad_al::format::{read_embedding_file, read_header, write_embedding_file};
use myriad_al::harness::{run_matrix, write_outputs, RunConfig, RunSpec};
use myriad_al::{Error, SyntheticSpec};

#[derive(Parser)]
#[command(name = "myriad", version, about = "Active few-shot learning on frozen embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one strategy over one or more seeds.
    Run(RunArgs),
    /// Run several strategies over the same seeds and splits.
    Sweep(RunArgs),
    /// Run the selector with each component disabled in turn.
    Ablate(RunArgs),
    /// Print the header and label counts of an embedding file.
    Inspect { path: PathBuf },
    /// Write a synthetic Gaussian-cluster dataset as an embedding file.
    Generate {
        /// e.g. `k=9,per_class=500,dim=32,sep=8,seed=0`
        #[arg(long)]
        synthetic: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    synthetic: Option<String>,
    #[arg(long)]
    strategy: Option<String>,
    /// Comma-separated list for `sweep`.
    #[arg(long, value_delimiter = ',')]
    strategies: Option<Vec<String>>,
    #[arg(long)]
    shots: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// nct | breakhis | synthetic
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    wd: Option<f64>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    ablate_no_pseudo: bool,
    #[arg(long)]
    ablate_no_subarrays: bool,
    #[arg(long)]
    ablate_entropy_only: bool,
    /// Standard deviation of Gaussian noise added to the features.
    #[arg(long)]
    ablate_noise: Option<f64>,
    #[arg(long)]
    baseline_seed: bool,
    #[arg(long)]
    ceal_delta0: Option<f64>,
    #[arg(long)]
    ceal_delta_step: Option<f64>,
}

impl RunArgs {
    fn resolve(self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_json_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.data {
            cfg.data = Some(v);
            cfg.synthetic = None;
        }
        if let Some(v) = self.synthetic {
            cfg.synthetic = Some(v);
            if self.config.is_some() {
                cfg.data = None;
            }
        }
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { cfg.$field = v; } )* };
        }
        set!(strategy, strategies, shots, seeds, jobs, out, preset, train_fraction, ceal_delta0, ceal_delta_step);
        macro_rules! set_opt {
            ($($field:ident),*) => { $( if self.$field.is_some() { cfg.$field = self.$field; } )* };
        }
        set_opt!(lr, batch, epochs, wd, ablate_noise);
        cfg.ablate_no_pseudo |= self.ablate_no_pseudo;
        cfg.ablate_no_subarrays |= self.ablate_no_subarrays;
        cfg.ablate_entropy_only |= self.ablate_entropy_only;
        cfg.baseline_seed |= self.baseline_seed;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn execute(cfg: &RunConfig, specs: Vec<RunSpec>) -> Result<(), Error> {
    let dataset = cfg.load_dataset()?;
    let records = run_matrix(&dataset, &specs, &cfg.seeds, cfg.shots, cfg.train_fraction, cfg.jobs)?;
    for r in &records {
        if let Some(last) = r.cycles.last() {
            println!(
                "{:<24} seed {:<4} labels {:<5} accuracy {:.4}  macro-F1 {:.4}",
                r.strategy, r.seed, last.labels_used, last.accuracy, last.macro_f1
            );
        }
    }
    for path in write_outputs(&records, &cfg.out)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn inspect(path: &PathBuf) -> Result<(), Error> {
    let header = read_header(path)?;
    println!("version    {}", header.version);
    println!("samples    {}", header.n);
    println!("dimension  {}", header.dim);
    println!("classes    {}", header.k_classes);
    let dataset = read_embedding_file(path)?;
    let mut counts = vec![0usize; dataset.k_classes()];
    let mut unknown = 0;
    for l in dataset.labels() {
        match l {
            Some(c) => counts[*c] += 1,
            None => unknown += 1,
        }
    }
    for (c, n) in counts.iter().enumerate() {
        println!("class {c:<4} {n}");
    }
    println!("unlabelled {unknown}");
    Ok(())
}

fn dispatch(command: Command) -> Result<(), Error> {
    match command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let specs = cfg.run_specs()?;
            execute(&cfg, specs)
        }
        Command::Sweep(args) => {
            let cfg = args.resolve()?;
            let specs = cfg.sweep_specs()?;
            execute(&cfg, specs)
        }
        Command::Ablate(args) => {
            let cfg = args.resolve()?;
            let specs = cfg.ablation_specs()?;
            execute(&cfg, specs)
        }
        Command::Inspect { path } => inspect(&path),
        Command::Generate { synthetic, out } => {
            let dataset = SyntheticSpec::parse(&synthetic)?.generate()?;
            write_embedding_file(&dataset, &out)?;
            println!("wrote {} samples to {}", dataset.len(), out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(match err {
                Error::InvalidConfig(_) | Error::UnknownStrategy(_) => 2,
                Error::Format { .. } => 3,
                _ => 1,
            })
        }
    }
}
