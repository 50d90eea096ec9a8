use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyload_core::dual::{history_csv, run_dual, BetaMode, DualConfig, StepRule};
use anyload_core::fastcontrol::{ChannelConfig, ChannelMode, DEFAULT_GAMMA_RATE, DEFAULT_WINDOW};
use anyload_core::greedy::{detect_uncontrollable, integrate, trajectory_csv, vector_field, GreedyConfig};
use anyload_core::harness::{generate_instance, run_sweep, CorrGenerator, ExperimentConfig};
use anyload_core::model::{instance_from_json, instance_to_json, SystemInstance};
use anyload_core::oracle::{default_grid_resolution, primal_grid_solve, primal_projected_descent, DescentConfig};
use anyload_core::stability::analyze;
use anyload_core::Error;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::ZeroCorrelation { .. }) => 3,
            _ => 1,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "anyload", version, about = "Load management for two-layer anycast CDNs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BetaArg {
    Exact,
    Fastcontrol,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChannelArg {
    Deterministic,
    Poisson,
}

#[derive(Clone, Copy, ValueEnum)]
enum StepArg {
    /// 2ε / (A_max² + N T_max²).
    Epsilon,
    /// 1 / L̂, from the curvature of the built-in cost families.
    Smooth,
}

#[derive(Subcommand)]
enum Command {
    /// Run the distributed dual algorithm. Exit 0 on convergence, 2 at max-iters.
    SolveDual {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
        #[arg(long, value_enum, default_value = "epsilon")]
        step: StepArg,
        #[arg(long, value_enum, default_value = "exact")]
        beta_mode: BetaArg,
        #[arg(long, value_enum, default_value = "deterministic")]
        channel: ChannelArg,
        #[arg(long, default_value_t = DEFAULT_GAMMA_RATE)]
        gamma_rate: f64,
        /// Observation window of the Poisson channel.
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2_000_000)]
        max_iters: usize,
        /// Compare against a brute-force primal optimum and report the gap.
        #[arg(long)]
        with_oracle: bool,
        /// Solution JSON; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-iteration CSV: k, dual value, squared supergradient norm, max overload, gap.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Integrate the greedy dynamics. Exit 0 on convergence, 2 at the horizon.
    SimulateGreedy {
        #[arg(long)]
        instance: PathBuf,
        /// Comma-separated interior start; all 0.5 when absent.
        #[arg(long, value_delimiter = ',')]
        x0: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1.0)]
        sensitivity: f64,
        #[arg(long, default_value_t = 1e4)]
        horizon: f64,
        /// Fixed RK4 step; 0.01 / (sensitivity · max(1, max A)) when absent.
        #[arg(long)]
        step: Option<f64>,
        /// Trajectory CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Verdict JSON; stdout when absent.
        #[arg(long)]
        verdict: Option<PathBuf>,
        /// Grid resolution of the vector field (two-node instances only).
        #[arg(long, requires = "field_out")]
        vector_field: Option<usize>,
        #[arg(long)]
        field_out: Option<PathBuf>,
    },
    /// Stability report as JSON.
    Analyze {
        #[arg(long)]
        instance: PathBuf,
        /// Zero-based groups, e.g. "0,1|2,3".
        #[arg(long)]
        partition: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        sensitivity: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo sweep over mean load; writes the summary CSV.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw a synthetic instance.
    GenInstance {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        abar: f64,
        #[arg(long, default_value_t = CorrGenerator::default().self_corr)]
        self_corr: f64,
        #[arg(long, default_value_t = CorrGenerator::default().spread)]
        spread: f64,
        #[arg(long, default_value_t = CorrGenerator::default().popularity_sigma)]
        popularity_sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(path: Option<&Path>, value: &serde_json::Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("JSON value serializes") + "\n";
    match path {
        Some(p) => write(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_instance(path: &Path) -> CliResult<SystemInstance> {
    let (inst, report) = instance_from_json(&read(path)?)?;
    for (row, sum) in report.rescaled_rows {
        eprintln!("note: row {row} summed to {sum}; rescaled to 1");
    }
    Ok(inst)
}

fn parse_partition(spec: &str) -> CliResult<(Vec<usize>, Vec<usize>)> {
    let groups: Vec<&str> = spec.split('|').collect();
    if groups.len() != 2 {
        return Err(CliError::Usage(format!("partition must have two groups separated by '|', got {spec:?}")));
    }
    let parse = |g: &str| -> CliResult<Vec<usize>> {
        g.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse().map_err(|_| CliError::Usage(format!("bad node index {s:?}"))))
            .collect()
    };
    Ok((parse(groups[0])?, parse(groups[1])?))
}

fn solve_dual(cmd: Command) -> CliResult<u8> {
    let Command::SolveDual {
        instance,
        epsilon,
        step,
        beta_mode,
        channel,
        gamma_rate,
        window,
        seed,
        max_iters,
        with_oracle,
        out,
        history,
    } = cmd
    else {
        unreachable!()
    };
    let inst = load_instance(&instance)?;
    let oracle = if with_oracle {
        let n = inst.n();
        Some(if n <= 3 {
            primal_grid_solve(&inst, default_grid_resolution(n))?
        } else {
            primal_projected_descent(&inst, &DescentConfig::default())?
        })
    } else {
        None
    };
    let beta_mode = match beta_mode {
        BetaArg::Exact => BetaMode::Exact,
        BetaArg::Fastcontrol => BetaMode::FastControl(ChannelConfig {
            gamma_rate,
            mode: match channel {
                ChannelArg::Deterministic => ChannelMode::Deterministic,
                ChannelArg::Poisson => ChannelMode::Poisson { window, seed },
            },
        }),
    };
    let config = DualConfig {
        epsilon,
        step: match step {
            StepArg::Epsilon => StepRule::FromEpsilon,
            StepArg::Smooth => StepRule::Smooth,
        },
        max_iters,
        beta_mode,
        reference_optimum: oracle.as_ref().map(|o| o.objective),
        ..DualConfig::default()
    };
    let sol = run_dual(&inst, config.clone())?;
    if let Some(path) = history {
        write(&path, &history_csv(&sol.history))?;
    }
    let mut value = serde_json::to_value(&sol).expect("solution serializes");
    value["config"] = serde_json::to_value(&config).expect("config serializes");
    if let Some(o) = &oracle {
        value["oracle"] = serde_json::to_value(o).expect("oracle result serializes");
        value["gap"] = json!(o.objective - sol.best_dual);
    }
    emit(out.as_deref(), &value)?;
    Ok(if sol.converged { 0 } else { 2 })
}

fn simulate_greedy(cmd: Command) -> CliResult<u8> {
    let Command::SimulateGreedy {
        instance,
        x0,
        sensitivity,
        horizon,
        step,
        out,
        verdict,
        vector_field: field_res,
        field_out,
    } = cmd
    else {
        unreachable!()
    };
    let inst = load_instance(&instance)?;
    let x0 = x0.unwrap_or_else(|| vec![0.5; inst.n()]);
    let config = GreedyConfig {
        sensitivity,
        step,
        horizon,
        ..GreedyConfig::default()
    };
    if let (Some(res), Some(path)) = (field_res, field_out) {
        let grid = vector_field(&inst, sensitivity, res)?;
        let mut csv = String::from("x1,x2,dx1,dx2\n");
        for r in grid {
            csv.push_str(&format!("{},{},{},{}\n", r[0], r[1], r[2], r[3]));
        }
        write(&path, &csv)?;
    }
    let tr = integrate(&inst, &x0, &config)?;
    if let Some(path) = out {
        write(&path, &trajectory_csv(&tr))?;
    }
    let report = detect_uncontrollable(&tr, &inst, config.boundary_eps, config.overload_tol);
    let value = json!({
        "verdict": tr.verdict,
        "t_end": tr.last().t,
        "steps": tr.steps,
        "step": tr.step,
        "final_x": tr.final_x(),
        "final_s": tr.final_s(),
        "classes": tr.classes,
        "status": report.status,
        "uncontrollable_nodes": report.uncontrollable_nodes(),
        "indeterminate": report.indeterminate,
        "max_excursion": tr.max_excursion,
        "clamp_activations": tr.clamp_activations,
    });
    emit(verdict.as_deref(), &value)?;
    Ok(if tr.is_converged() { 0 } else { 2 })
}

fn run(cmd: Command) -> CliResult<u8> {
    match cmd {
        c @ Command::SolveDual { .. } => solve_dual(c),
        c @ Command::SimulateGreedy { .. } => simulate_greedy(c),
        Command::Analyze {
            instance,
            partition,
            sensitivity,
            out,
        } => {
            let inst = load_instance(&instance)?;
            let groups = partition.as_deref().map(parse_partition).transpose()?;
            let report = analyze(&inst, sensitivity, groups.as_ref().map(|(a, b)| (a.as_slice(), b.as_slice())))?;
            emit(out.as_deref(), &serde_json::to_value(&report).expect("report serializes"))?;
            Ok(0)
        }
        Command::Experiment { config, out } => {
            let cfg = ExperimentConfig::from_json(&read(&config)?)?;
            let result = run_sweep(&cfg)?;
            write(&out, &result.to_csv())?;
            emit(None, &json!({ "config": cfg, "rows": result.rows }))?;
            Ok(0)
        }
        Command::GenInstance {
            n,
            abar,
            self_corr,
            spread,
            popularity_sigma,
            seed,
            out,
        } => {
            let cfg = ExperimentConfig {
                n,
                corr_gen: CorrGenerator {
                    self_corr,
                    spread,
                    popularity_sigma,
                },
                ..ExperimentConfig::default()
            };
            if n == 0 {
                return Err(CliError::Usage("n must be at least 1".into()));
            }
            let inst = generate_instance(&cfg, abar, seed)?;
            let meta = json!({
                "generator": "anyload gen-instance",
                "abar": abar,
                "self_corr": self_corr,
                "spread": spread,
                "popularity_sigma": popularity_sigma,
                "seed": seed,
            });
            let text = instance_to_json(&inst, Some(meta)) + "\n";
            match out {
                Some(p) => write(&p, &text)?,
                None => print!("{text}"),
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
