//! Command-line front end: argument parsing and exit-code mapping only;
//! all behavior lives in [`shardvi::harness`].
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error (bad
//! arguments, unreadable or invalid inputs).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use shardvi::harness::{
    cmd_analyze, cmd_gen, cmd_run, cmd_verify, load_instance, preset, preset_names,
    ExperimentConfig, GenFamily, VerifySuite,
};
use shardvi::instances::TopologySpec;

#[derive(Parser)]
#[command(
    name = "shardvi",
    version,
    about = "Deterministic round-based simulator and analyzer for distributed \
             value iteration over sharded tabular MDPs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute an experiment sweep from a preset or a config file
    Run(RunArgs),
    /// Report graph quantities and predicted round budgets for an instance
    Analyze(AnalyzeArgs),
    /// Run a verifier suite (exit code 1 if any check fails)
    Verify(VerifyArgs),
    /// Generate instance files (MDP JSON + partition text)
    Gen(GenArgs),
    /// List the built-in presets
    Presets,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true))]
struct RunArgs {
    /// Built-in preset name (see `shardvi presets`)
    #[arg(long, group = "source")]
    preset: Option<String>,
    /// Path to an experiment config TOML file
    #[arg(long, group = "source")]
    config: Option<PathBuf>,
    /// Write artifacts here instead of the config's output_dir
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// MDP JSON file
    #[arg(long)]
    mdp: PathBuf,
    /// Partition file (`state machine` per line)
    #[arg(long)]
    partition: PathBuf,
    /// Target accuracy for the predicted budgets
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    /// Delay bound for the asynchronous prediction
    #[arg(long, default_value_t = 2)]
    delay_bound: usize,
    /// Emit JSON instead of text
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Which suite to run
    #[arg(value_enum)]
    suite: SuiteArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Locality,
    Bits,
    Async,
    #[value(alias = "gossip_recursion")]
    GossipRecursion,
    All,
}

impl From<SuiteArg> for VerifySuite {
    fn from(arg: SuiteArg) -> Self {
        match arg {
            SuiteArg::Locality => VerifySuite::Locality,
            SuiteArg::Bits => VerifySuite::Bits,
            SuiteArg::Async => VerifySuite::Async,
            SuiteArg::GossipRecursion => VerifySuite::GossipRecursion,
            SuiteArg::All => VerifySuite::All,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(subcommand)]
    family: GenCommand,
}

#[derive(Subcommand)]
enum GenCommand {
    /// Random MDP over a machine topology
    Topology {
        /// Graph shape
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Machine count M
        #[arg(long)]
        machines: usize,
        /// Owned states per machine
        #[arg(long, default_value_t = 4)]
        states_per_machine: usize,
        /// Discount factor
        #[arg(long, default_value_t = 0.95)]
        gamma: f64,
        /// Instance seed (also wires the expander)
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output directory
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Locality pair: zero and rewarded chain variants at distance L
    LocalityPair {
        /// Hop distance L
        #[arg(long)]
        chain_len: usize,
        /// Discount factor
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
        /// Add the identical-dynamics decoy action
        #[arg(long)]
        decoy: bool,
        /// Output directory
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// One member of the parallel-chain bit family
    BitFamily {
        /// Chain length L
        #[arg(long)]
        chain_len: usize,
        /// Encoded bits as a 0/1 string, chain 0 first (e.g. 1010)
        #[arg(long, value_parser = parse_bits)]
        bits: std::vec::Vec<bool>,
        /// Discount factor
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
        /// Output directory
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Federated tree carrying the bit family on one root-to-leaf path
    FedTree {
        /// Tree depth
        #[arg(long)]
        depth: usize,
        /// Children per internal node
        #[arg(long, default_value_t = 2)]
        branching: usize,
        /// Encoded bits as a 0/1 string, chain 0 first
        #[arg(long, value_parser = parse_bits)]
        bits: std::vec::Vec<bool>,
        /// Discount factor
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
        /// Output directory
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Ring,
    Grid,
    Star,
    Expander,
    Path,
}

fn parse_bits(text: &str) -> Result<Vec<bool>, String> {
    if text.is_empty() {
        return Err("bit string must be non-empty".to_string());
    }
    text.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(format!("bit string may only contain 0 and 1, found {other:?}")),
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> shardvi::Result<ExitCode> {
    match cli.command {
        Command::Run(args) => {
            let config = match (&args.preset, &args.config) {
                (Some(name), None) => preset(name)?,
                (None, Some(path)) => {
                    ExperimentConfig::from_toml(&std::fs::read_to_string(path)?)?
                }
                _ => unreachable!("clap enforces exactly one source"),
            };
            let artifacts = cmd_run(&config, args.output_dir.as_deref())?;
            print!("{}", artifacts.summary_markdown);
            println!(
                "\nwrote {} run CSVs, summary.md, summary.json, manifest.json to {}",
                artifacts.manifest.runs.len(),
                artifacts.dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Analyze(args) => {
            let data = load_instance(&args.mdp, &args.partition)?;
            let report = cmd_analyze(&data, args.epsilon, args.delay_bound)?;
            if args.json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.render_text());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify(args) => {
            let summary = cmd_verify(args.suite.into())?;
            print!("{}", summary.render_text());
            Ok(if summary.all_passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Gen(args) => {
            let (family, out) = match args.family {
                GenCommand::Topology { kind, machines, states_per_machine, gamma, seed, out } => {
                    let spec = match kind {
                        KindArg::Ring => TopologySpec::ring(machines),
                        KindArg::Grid => TopologySpec::grid(machines),
                        KindArg::Star => TopologySpec::star(machines),
                        KindArg::Expander => TopologySpec::expander(machines, seed),
                        KindArg::Path => TopologySpec::path(machines),
                    };
                    (GenFamily::Topology { spec, states_per_machine, gamma, seed }, out)
                }
                GenCommand::LocalityPair { chain_len, gamma, decoy, out } => {
                    (GenFamily::LocalityPair { chain_len, gamma, decoy }, out)
                }
                GenCommand::BitFamily { chain_len, bits, gamma, out } => {
                    (GenFamily::BitFamily { chain_len, gamma, bits }, out)
                }
                GenCommand::FedTree { depth, branching, bits, gamma, out } => {
                    (GenFamily::FedTree { depth, branching, gamma, bits }, out)
                }
            };
            for path in cmd_gen(&family, &out)? {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Presets => {
            for name in preset_names() {
                let config = preset(name)?;
                let topologies: Vec<String> =
                    config.topologies.iter().map(|t| format!("{t:?}").to_lowercase()).collect();
                let algorithms: Vec<&str> =
                    config.algorithms.iter().map(|a| a.label()).collect();
                println!(
                    "{name:14} M={:<3} topologies={:<25} algorithms={:<28} seeds={} budget={}",
                    config.machines,
                    topologies.join(","),
                    algorithms.join(","),
                    config.seeds.len(),
                    config.round_budget
                );
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
