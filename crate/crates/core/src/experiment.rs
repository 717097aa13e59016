//! Experiment orchestration for the CLI: run/figure/verify/select recipes and
//! deterministic CSV emission.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::closed_form::ergodic_secrecy_rate;
use crate::design::{
    aligned_phases, ga_optimize, required_bs_power, required_ris_power, required_user_power,
    select_configuration, GaConfig, PowerBudgets,
};
use crate::error::{Error, Result};
use crate::geometry::AngleSet;
use crate::instantaneous::{PhasePlan, RisMode, RisModeKind};
use crate::monte_carlo::{
    agreement_report_with, estimate_ergodic_rates, AgreementReport, Corruption, McOptions,
};
use crate::scenario::Scenario;

/// Where the phase plan of an experiment comes from.
#[derive(Debug, Clone)]
pub enum PlanSource {
    /// Align the phases to one user (the suboptimal closed-form rule).
    Aligned { user: usize },
    /// Genetic sum-rate search.
    Ga(GaConfig),
    /// Explicit phase vector, radians.
    Explicit(Vec<f64>),
}

impl PlanSource {
    pub fn phases(&self, sc: &Scenario, angles: &AngleSet, mode: &RisMode) -> Result<Vec<f64>> {
        match self {
            PlanSource::Aligned { user } => {
                if *user >= sc.num_users() {
                    return Err(Error::Domain(format!("user index {user} out of range")));
                }
                Ok(aligned_phases(angles, &sc.ris_array(), *user))
            }
            PlanSource::Ga(cfg) => Ok(ga_optimize(sc, angles, mode, cfg)?.plan.phases),
            PlanSource::Explicit(phases) => {
                if phases.len() != sc.m_ris {
                    return Err(Error::Config(format!(
                        "explicit plan has {} phases, expected M = {}",
                        phases.len(),
                        sc.m_ris
                    )));
                }
                Ok(phases.clone())
            }
        }
    }
}

fn csv_float(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}

/// Closed-form and Monte-Carlo rates for every user under one mode, as one
/// CSV document. Byte-identical output for identical (scenario, seeds).
pub fn run_experiment(
    sc: &Scenario,
    kind: RisModeKind,
    plan_source: &PlanSource,
    n_trials: u64,
    master_seed: u64,
) -> Result<String> {
    if n_trials < 2 {
        return Err(Error::Validation("n_trials must be >= 2".into()));
    }
    let angles = sc.draw_angles();
    let mode = RisMode::from_kind(kind, sc)?;
    let plan = PhasePlan::for_mode(plan_source.phases(sc, &angles, &mode)?, &mode, sc)?;
    let mc = estimate_ergodic_rates(
        sc,
        &plan,
        &angles,
        &mode,
        McOptions {
            n_trials,
            master_seed,
            zero_phase_error: false,
        },
    )?;
    let mut out = String::new();
    out.push_str(
        "mode,user_index,closed_user_rate,mc_user_rate,mc_se,closed_eave_rate,mc_eave_rate,secrecy_closed,secrecy_mc\n",
    );
    for k in 0..sc.num_users() {
        let rep = ergodic_secrecy_rate(sc, &plan, &angles, &mode, k)?;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            kind,
            k,
            csv_float(rep.user_rate),
            csv_float(mc.user[k].mean),
            csv_float(mc.user[k].std_error),
            csv_float(rep.eave_rate),
            csv_float(mc.eave_worst[k].mean),
            csv_float(rep.secrecy_rate),
            csv_float(mc.secrecy[k])
        )
        .expect("string write");
    }
    Ok(out)
}

/// Figure recipes: which paper behavior to reproduce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureId {
    RateVsPower,
    RateVsKappa,
    RateVsN,
    RateVsM,
    SelectionMaps,
}

impl std::str::FromStr for FigureId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rate_vs_power" => Ok(Self::RateVsPower),
            "rate_vs_kappa" => Ok(Self::RateVsKappa),
            "rate_vs_N" | "rate_vs_n" => Ok(Self::RateVsN),
            "rate_vs_M" | "rate_vs_m" => Ok(Self::RateVsM),
            "selection_maps" => Ok(Self::SelectionMaps),
            other => Err(Error::Validation(format!("unknown figure id `{other}`"))),
        }
    }
}

impl FigureId {
    pub fn name(&self) -> &'static str {
        match self {
            Self::RateVsPower => "rate_vs_power",
            Self::RateVsKappa => "rate_vs_kappa",
            Self::RateVsN => "rate_vs_N",
            Self::RateVsM => "rate_vs_M",
            Self::SelectionMaps => "selection_maps",
        }
    }

    pub fn default_grid(&self) -> Vec<f64> {
        match self {
            Self::RateVsPower => vec![0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0],
            Self::RateVsKappa => vec![0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0],
            Self::RateVsN => vec![4.0, 6.0, 8.0, 10.0, 12.0, 16.0],
            Self::RateVsM => vec![2.0, 4.0, 6.0, 8.0, 12.0, 16.0],
            Self::SelectionMaps => (1..=25).map(|i| 0.1 * i as f64).collect(),
        }
    }
}

/// A sweep description: the grid must be nonempty and ascending.
#[derive(Debug, Clone)]
pub struct FigureRecipe {
    pub figure: FigureId,
    pub grid: Vec<f64>,
    pub modes: Vec<RisModeKind>,
}

impl FigureRecipe {
    pub fn new(figure: FigureId, grid: Option<Vec<f64>>, modes: Vec<RisModeKind>) -> Result<Self> {
        let grid = grid.unwrap_or_else(|| figure.default_grid());
        if grid.is_empty() {
            return Err(Error::Validation("figure grid is empty".into()));
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation("figure grid must be ascending".into()));
        }
        if modes.is_empty() {
            return Err(Error::Validation("figure needs at least one mode".into()));
        }
        Ok(Self {
            figure,
            grid,
            modes,
        })
    }

    fn scenario_at(&self, sc: &Scenario, x: f64) -> Scenario {
        let mut s = sc.clone();
        match self.figure {
            FigureId::RateVsPower => {
                s.user_powers = vec![x; sc.num_users()];
            }
            FigureId::RateVsKappa => s.kappa = x,
            FigureId::RateVsN => s.n_bs = x.round() as usize,
            FigureId::RateVsM => s.m_ris = x.round() as usize,
            FigureId::SelectionMaps => {}
        }
        s
    }
}

/// Reproduce one figure as CSV series, one file per curve, readable by any
/// plotting tool. Secrecy rates are for user 0 with phases aligned to user 0.
/// The kappa sweep also emits the ideal (zero-error) reference curves.
pub fn reproduce_figure(
    recipe: &FigureRecipe,
    sc: &Scenario,
    n_trials: u64,
    master_seed: u64,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    if recipe.figure == FigureId::SelectionMaps {
        let path = out_dir.join("selection_maps.csv");
        fs::write(&path, selection_map_csv(sc, &recipe.grid)?)?;
        written.push(path);
        return Ok(written);
    }
    let x_name = match recipe.figure {
        FigureId::RateVsPower => "user_power_w",
        FigureId::RateVsKappa => "kappa",
        FigureId::RateVsN => "n_bs",
        FigureId::RateVsM => "m_ris",
        FigureId::SelectionMaps => unreachable!(),
    };
    for kind in &recipe.modes {
        let mut body = format!("{x_name},secrecy_closed,secrecy_mc,mc_se_user\n");
        let mut ideal = body.clone();
        for &x in &recipe.grid {
            let s = recipe.scenario_at(sc, x);
            let angles = s.draw_angles();
            let mode = RisMode::from_kind(*kind, &s)?;
            let plan = PhasePlan::for_mode(
                aligned_phases(&angles, &s.ris_array(), 0),
                &mode,
                &s,
            )?;
            let closed = ergodic_secrecy_rate(&s, &plan, &angles, &mode, 0)?;
            let mc = estimate_ergodic_rates(
                &s,
                &plan,
                &angles,
                &mode,
                McOptions {
                    n_trials,
                    master_seed,
                    zero_phase_error: false,
                },
            )?;
            writeln!(
                body,
                "{},{},{},{}",
                csv_float(x),
                csv_float(closed.secrecy_rate),
                csv_float(mc.secrecy[0]),
                csv_float(mc.user[0].std_error)
            )
            .expect("string write");
            if recipe.figure == FigureId::RateVsKappa {
                let mut s0 = s.clone();
                s0.kappa = f64::MAX.sqrt(); // effectively error-free closed form
                let closed0 = ideal_closed_secrecy(&s0, &plan, &angles, &mode)?;
                let mc0 = estimate_ergodic_rates(
                    &s,
                    &plan,
                    &angles,
                    &mode,
                    McOptions {
                        n_trials,
                        master_seed,
                        zero_phase_error: true,
                    },
                )?;
                writeln!(
                    ideal,
                    "{},{},{},{}",
                    csv_float(x),
                    csv_float(closed0),
                    csv_float(mc0.secrecy[0]),
                    csv_float(mc0.user[0].std_error)
                )
                .expect("string write");
            }
        }
        let path = out_dir.join(format!("{}_{}.csv", recipe.figure.name(), kind));
        fs::write(&path, body)?;
        written.push(path);
        if recipe.figure == FigureId::RateVsKappa {
            let path = out_dir.join(format!("{}_{}_ideal.csv", recipe.figure.name(), kind));
            fs::write(&path, ideal)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Closed-form secrecy rate with the phase error pinned to zero. Implemented
/// by saturating kappa, whose only entry point is rho(kappa)^2 -> 1.
fn ideal_closed_secrecy(
    sc: &Scenario,
    plan: &PhasePlan,
    angles: &AngleSet,
    mode: &RisMode,
) -> Result<f64> {
    let mut s = sc.clone();
    s.kappa = 1e9;
    Ok(ergodic_secrecy_rate(&s, plan, angles, mode, 0)?.secrecy_rate)
}

/// Threshold table of the selection scheme over a target-rate grid.
fn selection_map_csv(sc: &Scenario, grid: &[f64]) -> Result<String> {
    let angles = sc.draw_angles();
    let plan = PhasePlan::passive(aligned_phases(&angles, &sc.ris_array(), 0));
    let budgets = PowerBudgets {
        user: sc.user_powers[0],
        ris: sc.ris_power,
        bs: sc.bs_power,
    };
    let mut out =
        String::from("target_rs,required_user_power,required_ris_power,required_bs_power,chosen_mode\n");
    for &rs in grid {
        let user = required_user_power(sc, &plan, &angles, 0, rs)?;
        let mut capped = sc.clone();
        capped.user_powers[0] = budgets.user;
        let ris = required_ris_power(&capped, &angles, &plan, 0, rs)?;
        let bs = required_bs_power(&capped, &angles, &plan, 0, rs, sc.tau, sc.eta_eff)?;
        let sel = select_configuration(sc, &angles, &plan, 0, &budgets, rs)?;
        let fmt = |v: Option<f64>| v.map(csv_float).unwrap_or_else(|| "inf".into());
        writeln!(
            out,
            "{},{},{},{},{}",
            csv_float(rs),
            fmt(user),
            fmt(ris),
            fmt(bs),
            sel.chosen_mode
                .map(|m| m.to_string())
                .unwrap_or_else(|| "infeasible".into())
        )
        .expect("string write");
    }
    Ok(out)
}

/// Outcome of a verification run: the agreement report plus its rendered
/// text and CSV forms.
pub struct VerifyOutcome {
    pub report: AgreementReport,
    pub text: String,
    pub csv: String,
}

/// Compare every closed-form moment (and, informationally, the rates)
/// against the Monte-Carlo oracle on the given scenario. `corrupt` scales one
/// named moment, as a negative control.
pub fn verify(
    sc: &Scenario,
    kind: RisModeKind,
    n_trials: u64,
    master_seed: u64,
    corrupt: Option<&str>,
) -> Result<VerifyOutcome> {
    let angles = sc.draw_angles();
    let mode = RisMode::from_kind(kind, sc)?;
    let plan = PhasePlan::for_mode(
        aligned_phases(&angles, &sc.ris_array(), 0),
        &mode,
        sc,
    )?;
    let corruption = corrupt.map(|m| Corruption {
        moment: match m {
            "xi" => "xi",
            "varsigma" => "varsigma",
            "upsilon" => "upsilon",
            "nu" => "nu",
            "eave_x" => "eave_x",
            "eave_y" => "eave_y",
            "eave_z" => "eave_z",
            _ => "xi",
        },
        factor: 1.1,
    });
    let report = agreement_report_with(sc, &plan, &angles, &mode, n_trials, master_seed, corruption)?;
    let mut text = String::new();
    let mut csv = String::from("row,name,closed,mc_mean,std_error,z_score,flagged\n");
    writeln!(
        text,
        "{:<24} {:>14} {:>14} {:>12} {:>8}  {}",
        "moment", "closed", "mc_mean", "std_error", "z", "status"
    )
    .expect("string write");
    for row in &report.moments {
        writeln!(
            text,
            "{:<24} {:>14.6} {:>14.6} {:>12.6} {:>8.2}  {}",
            row.name,
            row.closed,
            row.mc_mean,
            row.std_error,
            row.z_score,
            if row.flagged { "FLAG" } else { "ok" }
        )
        .expect("string write");
        writeln!(
            csv,
            "moment,{},{},{},{},{},{}",
            row.name,
            csv_float(row.closed),
            csv_float(row.mc_mean),
            csv_float(row.std_error),
            csv_float(row.z_score),
            row.flagged
        )
        .expect("string write");
    }
    writeln!(text, "--- rates (Jensen gap, informational) ---").expect("string write");
    for row in &report.rates {
        writeln!(
            text,
            "{:<24} {:>14.6} {:>14.6} {:>12.6} {:>8.2}  gap={:+.4}",
            row.name,
            row.closed,
            row.mc_mean,
            row.std_error,
            row.z_score,
            row.closed - row.mc_mean
        )
        .expect("string write");
        writeln!(
            csv,
            "rate,{},{},{},{},{},{}",
            row.name,
            csv_float(row.closed),
            csv_float(row.mc_mean),
            csv_float(row.std_error),
            csv_float(row.z_score),
            row.flagged
        )
        .expect("string write");
    }
    writeln!(
        text,
        "verdict: {}",
        if report.all_ok() {
            "all moments within 3 SE"
        } else {
            "MOMENT FLAGS RAISED"
        }
    )
    .expect("string write");
    Ok(VerifyOutcome { report, text, csv })
}
