//! First-principles stochastic estimation of every expectation and ergodic
//! rate. Serves both as the verification oracle for the closed forms and as
//! the "simulation" curves of the figure recipes.
//!
//! Trials are partitioned into fixed batches keyed by trial index; batches
//! run in parallel and their partial sums are folded in batch order, so every
//! estimate is bit-identical regardless of thread count. The worker count can
//! be capped with the `RIS_SEC_THREADS` environment variable.

use ndarray::Array1;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::OnceLock;

use crate::closed_form::{self, MomentCtx};
use crate::error::{Error, Result};
use crate::geometry::AngleSet;
use crate::instantaneous::{sinr_bs_with, sinr_eave_with, PhasePlan, RisMode};
use crate::scenario::{Gains, Scenario};
use crate::stochastic::{draw_channels, trial_rng, ChannelDraw, LosSet};

/// Fixed batch count for the deterministic parallel reduction (also the
/// variance-estimation granularity).
const BATCHES: u64 = 200;

fn thread_pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Ok(v) = std::env::var("RIS_SEC_THREADS") {
            if let Ok(n) = v.trim().parse::<usize>() {
                if n > 0 {
                    builder = builder.num_threads(n);
                }
            }
        }
        builder.build().expect("worker pool")
    })
}

/// A Monte-Carlo sample mean with its standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_trials: u64,
}

/// One defining expectation, with its index bindings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentId {
    /// `E |h_k^H T^H G^H G T TBar h_k|^2`
    XiK { k: usize },
    /// `E |h_k^H T^H G^H G T TBar h_i|^2`, i != k
    VarsigmaI { k: usize, i: usize },
    /// `E ||h_k^H T^H G^H||^2`
    UpsilonK { k: usize },
    /// `E ||h_k^H T^H G^H G TBar T||^2`
    NuK { k: usize },
    /// eavesdropper signal moment (gains and amplification included)
    EaveX { j: usize, k: usize },
    /// eavesdropper interference moment
    EaveY { j: usize, k: usize, i: usize },
    /// eavesdropper RIS-noise moment `d^-alpha_e E ||h_ej TBar T||^2`
    EaveZ { j: usize },
}

impl MomentId {
    pub fn label(&self) -> String {
        match self {
            MomentId::XiK { k } => format!("xi[k={k}]"),
            MomentId::VarsigmaI { k, i } => format!("varsigma[k={k},i={i}]"),
            MomentId::UpsilonK { k } => format!("upsilon[k={k}]"),
            MomentId::NuK { k } => format!("nu[k={k}]"),
            MomentId::EaveX { j, k } => format!("eave_x[j={j},k={k}]"),
            MomentId::EaveY { j, k, i } => format!("eave_y[j={j},k={k},i={i}]"),
            MomentId::EaveZ { j } => format!("eave_z[j={j}]"),
        }
    }

    fn validate(&self, sc: &Scenario) -> Result<()> {
        let (k_max, j_max) = (sc.num_users(), sc.num_eaves());
        let ok = match *self {
            MomentId::XiK { k } | MomentId::UpsilonK { k } | MomentId::NuK { k } => k < k_max,
            MomentId::VarsigmaI { k, i } => k < k_max && i < k_max && i != k,
            MomentId::EaveX { j, k } => j < j_max && k < k_max,
            MomentId::EaveY { j, k, i } => j < j_max && k < k_max && i < k_max && i != k,
            MomentId::EaveZ { j } => j < j_max,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid moment binding {self:?}")))
        }
    }
}

/// Per-trial evaluation of one defining random quantity. The BS-side moments
/// use the unit-modulus phases only (their theorems carry the amplification
/// explicitly); the eavesdropper moments include the plan amplification.
fn moment_sample(
    id: MomentId,
    sc: &Scenario,
    gains: &Gains,
    plan: &PhasePlan,
    draw: &ChannelDraw,
) -> f64 {
    let m = sc.m_ris;
    let unit_phase: Vec<Complex64> = plan
        .phases
        .iter()
        .map(|p| Complex64::from_polar(1.0, *p))
        .collect();
    let err: Vec<Complex64> = draw
        .phase_errors
        .iter()
        .map(|p| Complex64::from_polar(1.0, *p))
        .collect();
    let combiner = |k: usize| -> Array1<Complex64> {
        // h_k^H Theta^H G^H as a row vector (unit amplification)
        let refl: Array1<Complex64> =
            (0..m).map(|mm| unit_phase[mm] * draw.h_user[k][mm]).collect();
        draw.g.dot(&refl).mapv(|v| v.conj())
    };
    let combined = |k: usize, i: usize| -> Complex64 {
        let w = combiner(k);
        let refl: Array1<Complex64> = (0..m)
            .map(|mm| unit_phase[mm] * err[mm] * draw.h_user[i][mm])
            .collect();
        let v = draw.g.dot(&refl);
        w.iter().zip(v.iter()).map(|(a, b)| a * b).sum()
    };
    match id {
        MomentId::XiK { k } => combined(k, k).norm_sqr(),
        MomentId::VarsigmaI { k, i } => combined(k, i).norm_sqr(),
        MomentId::UpsilonK { k } => combiner(k).iter().map(|v| v.norm_sqr()).sum(),
        MomentId::NuK { k } => {
            let w = combiner(k);
            (0..m)
                .map(|mm| {
                    (0..sc.n_bs)
                        .map(|n| w[n] * draw.g[(n, mm)])
                        .sum::<Complex64>()
                        .norm_sqr()
                })
                .sum()
        }
        MomentId::EaveX { j, k } => eave_amp(sc, gains, plan, draw, &err, j, k).norm_sqr(),
        MomentId::EaveY { j, i, .. } => eave_amp(sc, gains, plan, draw, &err, j, i).norm_sqr(),
        MomentId::EaveZ { j } => {
            let rho2 = plan.amplification * plan.amplification;
            gains.ris_eave[j]
                * rho2
                * draw.h_eave_ris[j].iter().map(|v| v.norm_sqr()).sum::<f64>()
        }
    }
}

/// Coherent direct + reflected amplitude seen by eavesdropper `j` for the
/// stream of user `i`, including large-scale gains and plan amplification.
fn eave_amp(
    sc: &Scenario,
    gains: &Gains,
    plan: &PhasePlan,
    draw: &ChannelDraw,
    err: &[Complex64],
    j: usize,
    i: usize,
) -> Complex64 {
    let reflected: Complex64 = (0..sc.m_ris)
        .map(|mm| {
            draw.h_eave_ris[j][mm]
                * Complex64::from_polar(plan.amplification, plan.phases[mm])
                * err[mm]
                * draw.h_user[i][mm]
        })
        .sum();
    (gains.user_ris[i] * gains.ris_eave[j]).sqrt() * reflected
        + gains.user_eave[j][i].sqrt() * draw.h_eave_direct[(j, i)]
}

/// Deterministic batched mean/variance accumulation over per-trial vectors.
fn batched_run<F>(n_trials: u64, width: usize, eval: F) -> Vec<Estimate>
where
    F: Fn(u64, &mut Vec<f64>) + Sync,
{
    assert!(n_trials >= 2, "need at least two trials");
    let batch = n_trials.div_ceil(BATCHES);
    let bounds: Vec<(u64, u64)> = (0..n_trials.div_ceil(batch))
        .map(|b| (b * batch, ((b + 1) * batch).min(n_trials)))
        .collect();
    let partials: Vec<(Vec<f64>, Vec<f64>)> = thread_pool().install(|| {
        bounds
            .par_iter()
            .map(|&(lo, hi)| {
                let mut sum = vec![0.0; width];
                let mut sumsq = vec![0.0; width];
                let mut vals = vec![0.0; width];
                for t in lo..hi {
                    eval(t, &mut vals);
                    for (w, v) in vals.iter().enumerate() {
                        sum[w] += v;
                        sumsq[w] += v * v;
                    }
                }
                (sum, sumsq)
            })
            .collect()
    });
    let mut sum = vec![0.0; width];
    let mut sumsq = vec![0.0; width];
    for (s, q) in partials {
        for w in 0..width {
            sum[w] += s[w];
            sumsq[w] += q[w];
        }
    }
    let n = n_trials as f64;
    (0..width)
        .map(|w| {
            let mean = sum[w] / n;
            let var = ((sumsq[w] / n - mean * mean) / (n - 1.0)).max(0.0);
            Estimate {
                mean,
                std_error: var.sqrt(),
                n_trials,
            }
        })
        .collect()
}

/// Unbiased sample mean of the defining random quantity of `id` over i.i.d.
/// channel draws; reproducible given (scenario, seed) and independent of the
/// worker count.
pub fn estimate_moment(
    id: MomentId,
    sc: &Scenario,
    plan: &PhasePlan,
    angles: &AngleSet,
    n_trials: u64,
    master_seed: u64,
) -> Result<Estimate> {
    if n_trials < 100 {
        return Err(Error::Validation("n_trials must be >= 100".into()));
    }
    id.validate(sc)?;
    let los = LosSet::build(sc, angles)?;
    let gains = Gains::build(sc)?;
    let out = batched_run(n_trials, 1, |t, vals| {
        let draw = draw_channels(sc, &los, &mut trial_rng(master_seed, t));
        vals[0] = moment_sample(id, sc, &gains, plan, &draw);
    });
    Ok(out[0])
}

/// Estimate several moments from the same draws (one pass).
pub fn estimate_moments(
    ids: &[MomentId],
    sc: &Scenario,
    plan: &PhasePlan,
    angles: &AngleSet,
    n_trials: u64,
    master_seed: u64,
) -> Result<Vec<Estimate>> {
    if n_trials < 100 {
        return Err(Error::Validation("n_trials must be >= 100".into()));
    }
    for id in ids {
        id.validate(sc)?;
    }
    let los = LosSet::build(sc, angles)?;
    let gains = Gains::build(sc)?;
    Ok(batched_run(n_trials, ids.len(), |t, vals| {
        let draw = draw_channels(sc, &los, &mut trial_rng(master_seed, t));
        for (w, id) in ids.iter().enumerate() {
            vals[w] = moment_sample(*id, sc, &gains, plan, &draw);
        }
    }))
}

/// Ergodic-rate estimates of one experiment.
#[derive(Debug, Clone, Serialize)]
pub struct RateEstimates {
    /// Per-user mean of `log2(1 + sinr_bs)` (EH prefactor applied).
    pub user: Vec<Estimate>,
    /// Per-(eavesdropper, user) mean rates.
    pub eave: Vec<Vec<Estimate>>,
    /// Worst-case eavesdropper rate per user: max over j of the mean rates.
    pub eave_worst: Vec<Estimate>,
    /// Clamped secrecy rate per user from the means above.
    pub secrecy: Vec<f64>,
}

/// Options for a rate-estimation run.
#[derive(Debug, Clone, Copy)]
pub struct McOptions {
    pub n_trials: u64,
    pub master_seed: u64,
    /// Replace the drawn phase errors with zero (ideal-RIS reference). The
    /// channel draws are unchanged, so an ideal run shares its randomness
    /// with the erroneous run on the same seed.
    pub zero_phase_error: bool,
}

/// Sample mean of `log2(1 + SINR)` per user and per eavesdropper. The
/// worst-case eavesdropper is taken over per-eavesdropper mean rates
/// (max of expectations, non-colluding).
pub fn estimate_ergodic_rates(
    sc: &Scenario,
    plan: &PhasePlan,
    angles: &AngleSet,
    mode: &RisMode,
    opts: McOptions,
) -> Result<RateEstimates> {
    if opts.n_trials < 2 {
        return Err(Error::Validation("n_trials must be >= 2".into()));
    }
    mode.validate()?;
    let los = LosSet::build(sc, angles)?;
    let gains = Gains::build(sc)?;
    let (k_n, j_n) = (sc.num_users(), sc.num_eaves());
    let width = k_n + j_n * k_n;
    let pref = mode.rate_prefactor();
    let all = batched_run(opts.n_trials, width, |t, vals| {
        let mut draw = draw_channels(sc, &los, &mut trial_rng(opts.master_seed, t));
        if opts.zero_phase_error {
            draw.phase_errors.fill(0.0);
        }
        for k in 0..k_n {
            vals[k] = pref * sinr_bs_with(&draw, plan, mode, sc, &gains, k).rate();
        }
        for j in 0..j_n {
            for k in 0..k_n {
                vals[k_n + j * k_n + k] =
                    pref * sinr_eave_with(&draw, plan, mode, sc, &gains, j, k).rate();
            }
        }
    });
    let user = all[..k_n].to_vec();
    let eave: Vec<Vec<Estimate>> = (0..j_n)
        .map(|j| all[k_n + j * k_n..k_n + (j + 1) * k_n].to_vec())
        .collect();
    let eave_worst: Vec<Estimate> = (0..k_n)
        .map(|k| {
            (0..j_n)
                .map(|j| eave[j][k])
                .max_by(|a, b| a.mean.total_cmp(&b.mean))
                .expect("at least one eavesdropper")
        })
        .collect();
    let secrecy = (0..k_n)
        .map(|k| (user[k].mean - eave_worst[k].mean).max(0.0))
        .collect();
    Ok(RateEstimates {
        user,
        eave,
        eave_worst,
        secrecy,
    })
}

/// One closed-form versus Monte-Carlo comparison row.
#[derive(Debug, Clone, Serialize)]
pub struct AgreementRow {
    pub name: String,
    pub closed: f64,
    pub mc_mean: f64,
    pub std_error: f64,
    /// (closed - mc) / SE; meaningful as a test statistic for moments only.
    pub z_score: f64,
    /// Set when |z| > 3 on a moment row.
    pub flagged: bool,
}

/// Structured closed-form/Monte-Carlo comparison: exact-moment rows are
/// z-tested at 3 SE; rate rows report the signed Jensen gap without a flag.
#[derive(Debug, Clone, Serialize)]
pub struct AgreementReport {
    pub moments: Vec<AgreementRow>,
    pub rates: Vec<AgreementRow>,
}

impl AgreementReport {
    pub fn all_ok(&self) -> bool {
        !self.moments.iter().any(|r| r.flagged)
    }
}

/// Multiplicative perturbations for negative-control tests: scale one named
/// closed-form moment before comparison.
#[derive(Debug, Clone, Copy)]
pub struct Corruption {
    pub moment: &'static str,
    pub factor: f64,
}

pub fn agreement_report(
    sc: &Scenario,
    plan: &PhasePlan,
    angles: &AngleSet,
    mode: &RisMode,
    n_trials: u64,
    master_seed: u64,
) -> Result<AgreementReport> {
    agreement_report_with(sc, plan, angles, mode, n_trials, master_seed, None)
}

pub fn agreement_report_with(
    sc: &Scenario,
    plan: &PhasePlan,
    angles: &AngleSet,
    mode: &RisMode,
    n_trials: u64,
    master_seed: u64,
    corruption: Option<Corruption>,
) -> Result<AgreementReport> {
    let (k_n, j_n) = (sc.num_users(), sc.num_eaves());
    let mut ids = Vec::new();
    for k in 0..k_n {
        ids.push(MomentId::XiK { k });
        ids.push(MomentId::UpsilonK { k });
        ids.push(MomentId::NuK { k });
        for i in 0..k_n {
            if i != k {
                ids.push(MomentId::VarsigmaI { k, i });
            }
        }
    }
    for j in 0..j_n {
        ids.push(MomentId::EaveZ { j });
        for k in 0..k_n {
            ids.push(MomentId::EaveX { j, k });
            for i in 0..k_n {
                if i != k {
                    ids.push(MomentId::EaveY { j, k, i });
                }
            }
        }
    }
    let estimates = estimate_moments(&ids, sc, plan, angles, n_trials, master_seed)?;

    let ctx = MomentCtx::build(sc, plan, angles)?;
    let gains = Gains::build(sc)?;
    let rho = mode.amplification(sc)?;
    let corrupt = |name: &str, value: f64| -> f64 {
        match corruption {
            Some(c) if name.starts_with(c.moment) => value * c.factor,
            _ => value,
        }
    };
    let mut moments = Vec::with_capacity(ids.len());
    for (id, est) in ids.iter().zip(&estimates) {
        let closed = match *id {
            MomentId::XiK { k } => closed_form::xi_value(
                &ctx,
                sc.rician.bs,
                sc.rician.users[k],
                ctx.f[k].norm_sqr(),
            ),
            MomentId::VarsigmaI { k, i } => closed_form::varsigma_value(&ctx, sc, k, i),
            MomentId::UpsilonK { k } => closed_form::upsilon_value(
                &ctx,
                sc.rician.bs,
                sc.rician.users[k],
                ctx.f[k].norm_sqr(),
            ),
            MomentId::NuK { k } => closed_form::nu_value(
                &ctx,
                sc.rician.bs,
                sc.rician.users[k],
                ctx.f[k].norm_sqr(),
            ),
            MomentId::EaveX { j, k } => {
                closed_form::eave_values(&ctx, sc, &gains, mode, rho, j, k).0
            }
            MomentId::EaveY { j, k, i } => {
                let (_, y, _) = closed_form::eave_values(&ctx, sc, &gains, mode, rho, j, k);
                let pos = (0..k_n).filter(|v| *v != k).position(|v| v == i).unwrap();
                y[pos]
            }
            MomentId::EaveZ { j } => closed_form::eave_values(&ctx, sc, &gains, mode, rho, j, 0).2,
        };
        let closed = corrupt(&id.label(), closed);
        let z = if est.std_error > 0.0 {
            (closed - est.mean) / est.std_error
        } else if closed == est.mean {
            0.0
        } else {
            f64::INFINITY
        };
        moments.push(AgreementRow {
            name: id.label(),
            closed,
            mc_mean: est.mean,
            std_error: est.std_error,
            z_score: z,
            flagged: z.abs() > 3.0,
        });
    }

    // rate rows: the closed form is a ratio-of-means approximation, so these
    // carry the signed Jensen gap and are informational, never flagged
    let mc = estimate_ergodic_rates(
        sc,
        plan,
        angles,
        mode,
        McOptions {
            n_trials,
            master_seed,
            zero_phase_error: false,
        },
    )?;
    let mut rates = Vec::new();
    for k in 0..k_n {
        let closed_user = closed_form::ergodic_user_rate(sc, plan, angles, mode, k)?;
        rates.push(AgreementRow {
            name: format!("user_rate[k={k}]"),
            closed: closed_user,
            mc_mean: mc.user[k].mean,
            std_error: mc.user[k].std_error,
            z_score: (closed_user - mc.user[k].mean)
                / mc.user[k].std_error.max(f64::MIN_POSITIVE),
            flagged: false,
        });
        let closed_eave = closed_form::ergodic_eave_rate(sc, plan, angles, mode, k)?;
        rates.push(AgreementRow {
            name: format!("eave_rate[k={k}]"),
            closed: closed_eave,
            mc_mean: mc.eave_worst[k].mean,
            std_error: mc.eave_worst[k].std_error,
            z_score: (closed_eave - mc.eave_worst[k].mean)
                / mc.eave_worst[k].std_error.max(f64::MIN_POSITIVE),
            flagged: false,
        });
    }
    Ok(AgreementReport { moments, rates })
}
