use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dynsample::config::{ExperimentConfig, Mode, Overrides};
use dynsample::experiment::{run_real, run_simulation, run_theory_curve};
use dynsample::report::{paired_deltas, read_csv, TrialRecord};
use dynsample::wilcoxon::wilcoxon_one_sided;
use dynsample::{HarnessError, Result};

#[derive(Parser)]
#[command(name = "dynsample", version, about = "Uniform vs Chernoff-optimal dynamic network sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Chernoff information of the sampling schemes over p1, plus rho(pB) over p.
    TheoryCurve(Common),
    /// Monte Carlo comparison on simulated SBM graphs.
    Simulate(Common),
    /// Comparison on an edge-list graph with a paired signed-rank test.
    Real {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        edges: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// One-sided Wilcoxon signed-rank test on paired ARI differences.
    TestWilcoxon {
        /// A trials.csv from `simulate` or `real`; tested per p1.
        #[arg(long, conflicts_with = "deltas")]
        trials_csv: Option<PathBuf>,
        /// Comma-separated differences.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        deltas: Option<Vec<f64>>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    p0: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    p1: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
}

impl Common {
    fn load(self, mode: Mode, edges: Option<PathBuf>, labels: Option<PathBuf>) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        cfg.apply(Overrides {
            out: self.out,
            seed: self.seed,
            workers: self.workers,
            p0: self.p0,
            p1: self.p1,
            trials: self.trials,
            edges,
            labels,
        });
        cfg.validate(mode)?;
        Ok(cfg)
    }
}

fn progress(total: usize) -> impl Fn(usize) + Sync {
    move |t| eprintln!("trial {} of {total} done", t + 1)
}

fn print_run(run: &dynsample::experiment::RunOutput) {
    println!("algorithm,p1,trials,mean_ari,stderr_ari");
    for s in &run.summary {
        println!("{},{},{},{:.4},{:.4}", s.algorithm, s.p1, s.trials, s.mean_ari, s.stderr_ari);
    }
    for p in &run.paired {
        let pv = p.p_value.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
        println!(
            "p1 {}: mean delta {:+.4} (se {:.4}), wins {}/{}, one-sided p {pv}",
            p.p1, p.mean_delta, p.stderr_delta, p.wins, p.trials
        );
    }
    println!("wrote {}", run.dir.display());
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::TheoryCurve(common) => {
            let cfg = common.load(Mode::TheoryCurve, None, None)?;
            let out = run_theory_curve(&cfg)?;
            if let Some(last) = out.curve.last() {
                println!(
                    "rho(B) {:e}, rho(B0) {:e}, p1* {}, p1max {}, p11max {}",
                    last.rho_b, last.rho_b0, last.p1_star, last.p1_max, last.p11_max
                );
            }
            println!("wrote {}", out.dir.display());
        }
        Command::Simulate(common) => {
            let cfg = common.load(Mode::Simulation, None, None)?;
            print_run(&run_simulation(&cfg, &progress(cfg.trials))?);
        }
        Command::Real { common, edges, labels } => {
            let cfg = common.load(Mode::RealData, edges, labels)?;
            let out = run_real(&cfg, &progress(cfg.trials))?;
            println!(
                "graph: n = {}, {} edges ({} duplicates, {} self-loops dropped){}",
                out.n,
                out.edges,
                out.duplicates,
                out.self_loops,
                if out.truth_from_full_graph { "; truth = full-graph clustering" } else { "" }
            );
            print_run(&out.run);
        }
        Command::TestWilcoxon { trials_csv, deltas } => {
            let sets = match (trials_csv, deltas) {
                (Some(path), _) => paired_deltas(&read_csv::<TrialRecord>(&path)?)
                    .into_iter()
                    .map(|(p1, d)| (format!("p1 {p1}"), d))
                    .collect(),
                (None, Some(d)) => vec![("deltas".to_string(), d)],
                (None, None) => return Err(HarnessError::Config("give --trials-csv or --deltas".into())),
            };
            for (name, d) in sets {
                let w = wilcoxon_one_sided(&d)?;
                println!("{name}: W+ = {}, n = {}, p = {:e} ({:?})", w.statistic, w.n_used, w.p_value, w.method);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
