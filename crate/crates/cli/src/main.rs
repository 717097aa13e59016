//! `ris-secrecy`: closed-form and Monte-Carlo secrecy-rate experiments for
//! uplink RIS-aided MU-MISO systems with phase-shift errors.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use ris_secrecy_core::design::{ga_optimize, select_configuration, GaConfig, PowerBudgets};
use ris_secrecy_core::experiment::{
    reproduce_figure, run_experiment, verify, FigureId, FigureRecipe, PlanSource,
};
use ris_secrecy_core::instantaneous::{PhasePlan, RisMode, RisModeKind};
use ris_secrecy_core::{parse_scenario, Error, Scenario};

#[derive(Parser)]
#[command(name = "ris-secrecy", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario JSON file (see docs/config.md).
    #[arg(long)]
    config: PathBuf,
    /// Monte-Carlo trial count.
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    /// Override the scenario's trial seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn mode_parser(s: &str) -> Result<RisModeKind, String> {
    match s {
        "passive" => Ok(RisModeKind::Passive),
        "active" => Ok(RisModeKind::Active),
        "eh" => Ok(RisModeKind::Eh),
        other => Err(format!("unknown mode `{other}` (passive|active|eh)")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form vs Monte-Carlo rates for every user, as CSV.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = mode_parser, default_value = "passive")]
        mode: RisModeKind,
        /// Phase plan source: aligned | ga | explicit:<json file with radians>.
        #[arg(long, default_value = "aligned")]
        plan: String,
        /// Output CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduce a figure as CSV series, one file per curve.
    Figure {
        #[command(flatten)]
        common: Common,
        /// rate_vs_power | rate_vs_kappa | rate_vs_N | rate_vs_M | selection_maps
        #[arg(long)]
        figure: String,
        /// Comma-separated modes to include.
        #[arg(long, default_value = "passive,active,eh")]
        modes: String,
        /// Comma-separated sweep grid override.
        #[arg(long)]
        grid: Option<String>,
        /// Output directory.
        #[arg(long, default_value = "figures")]
        out: PathBuf,
    },
    /// Closed-form / Monte-Carlo agreement report; nonzero exit on any
    /// moment flag.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = mode_parser, default_value = "passive")]
        mode: RisModeKind,
        /// Write the CSV form of the report here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Test fixture: scale one closed-form moment by 1.1 so the report
        /// must flag it (xi|varsigma|upsilon|nu|eave_x|eave_y|eave_z).
        #[arg(long, hide = true)]
        corrupt: Option<String>,
    },
    /// RIS configuration selection for a target secrecy rate.
    Select {
        #[command(flatten)]
        common: Common,
        /// Target secrecy rate, bits/s/Hz.
        #[arg(long)]
        target_rs: f64,
        /// User of interest.
        #[arg(long, default_value_t = 0)]
        user: usize,
        /// Available user power; defaults to the scenario user power.
        #[arg(long)]
        budget_user: Option<f64>,
        /// Available RIS power; defaults to the scenario ris_power.
        #[arg(long)]
        budget_ris: Option<f64>,
        /// Available BS power; defaults to the scenario bs_power.
        #[arg(long)]
        budget_bs: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Genetic phase-shift search on the closed-form sum rate.
    Ga {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = mode_parser, default_value = "passive")]
        mode: RisModeKind,
        #[arg(long, default_value_t = 64)]
        population: usize,
        #[arg(long, default_value_t = 200)]
        generations: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse(_) => 2,
        Error::Validation(_) | Error::Domain(_) => 3,
        Error::Io(_) => 4,
    }
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(Error::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load(common: &Common) -> Result<Scenario, Error> {
    let mut sc = parse_scenario(&common.config)?;
    if let Some(seed) = common.seed {
        sc.trial_seed = seed;
    }
    Ok(sc)
}

fn parse_plan(spec: &str, sc: &Scenario) -> Result<PlanSource, Error> {
    if spec == "aligned" {
        return Ok(PlanSource::Aligned { user: 0 });
    }
    if spec == "ga" {
        return Ok(PlanSource::Ga(GaConfig {
            seed: sc.trial_seed,
            ..GaConfig::default()
        }));
    }
    if let Some(path) = spec.strip_prefix("explicit:") {
        let text = std::fs::read_to_string(path)?;
        let phases: Vec<f64> = serde_json::from_str(&text)
            .map_err(|e| Error::Parse(format!("phase vector {path}: {e}")))?;
        return Ok(PlanSource::Explicit(phases));
    }
    Err(Error::Validation(format!(
        "unknown plan source `{spec}` (aligned | ga | explicit:<file>)"
    )))
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            common,
            mode,
            plan,
            out,
        } => {
            let sc = load(&common)?;
            let source = parse_plan(&plan, &sc)?;
            let csv = run_experiment(&sc, mode, &source, common.trials, sc.trial_seed)?;
            emit(out.as_ref(), &csv)
        }
        Command::Figure {
            common,
            figure,
            modes,
            grid,
            out,
        } => {
            let sc = load(&common)?;
            let figure: FigureId = figure.parse()?;
            let modes = modes
                .split(',')
                .map(|m| mode_parser(m.trim()).map_err(Error::Validation))
                .collect::<Result<Vec<_>, _>>()?;
            let grid = grid
                .map(|g| {
                    g.split(',')
                        .map(|v| {
                            v.trim()
                                .parse::<f64>()
                                .map_err(|e| Error::Parse(format!("grid value `{v}`: {e}")))
                        })
                        .collect::<Result<Vec<_>, _>>()
                })
                .transpose()?;
            let recipe = FigureRecipe::new(figure, grid, modes)?;
            let files = reproduce_figure(&recipe, &sc, common.trials, sc.trial_seed, &out)?;
            for f in files {
                println!("{}", f.display());
            }
            Ok(())
        }
        Command::Verify {
            common,
            mode,
            out,
            corrupt,
        } => {
            let sc = load(&common)?;
            let outcome = verify(&sc, mode, common.trials, sc.trial_seed, corrupt.as_deref())?;
            print!("{}", outcome.text);
            if let Some(path) = out {
                std::fs::write(path, &outcome.csv)?;
            }
            if !outcome.report.all_ok() {
                // distinct exit path for verification failure
                std::process::exit(5);
            }
            Ok(())
        }
        Command::Select {
            common,
            target_rs,
            user,
            budget_user,
            budget_ris,
            budget_bs,
            out,
        } => {
            let sc = load(&common)?;
            let angles = sc.draw_angles();
            let plan = PhasePlan::passive(ris_secrecy_core::design::aligned_phases(
                &angles,
                &sc.ris_array(),
                user,
            ));
            let budgets = PowerBudgets {
                user: budget_user.unwrap_or(sc.user_powers[user.min(sc.num_users() - 1)]),
                ris: budget_ris.unwrap_or(sc.ris_power),
                bs: budget_bs.unwrap_or(sc.bs_power),
            };
            let outcome = select_configuration(&sc, &angles, &plan, user, &budgets, target_rs)?;
            let text = serde_json::to_string_pretty(&outcome)
                .map_err(|e| Error::Parse(e.to_string()))?
                + "\n";
            emit(out.as_ref(), &text)
        }
        Command::Ga {
            common,
            mode,
            population,
            generations,
            out,
        } => {
            let sc = load(&common)?;
            let angles = sc.draw_angles();
            let mode = RisMode::from_kind(mode, &sc)?;
            let cfg = GaConfig {
                population,
                generations,
                seed: sc.trial_seed,
                ..GaConfig::default()
            };
            let outcome = ga_optimize(&sc, &angles, &mode, &cfg)?;
            let text = serde_json::to_string_pretty(&serde_json::json!({
                "objective_sum_rate": outcome.objective,
                "phases": outcome.plan.phases,
                "amplification": outcome.plan.amplification,
                "generations": cfg.generations,
            }))
            .map_err(|e| Error::Parse(e.to_string()))?
                + "\n";
            emit(out.as_ref(), &text)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
