//! Deterministic evaluation of every second-order moment and ergodic-rate
//! expression: the user-side moments (signal, interference, combiner norm,
//! amplified-noise norm), the eavesdropper moments, and the secrecy-rate
//! assembly for the three RIS modes.
//!
//! Each moment is an exact expectation over the Rician scatter, the Rayleigh
//! direct paths and the Von Mises phase errors, taken with the error-free
//! line-of-sight geometry fixed. Several coefficients differ from their
//! printed source; every substitution was adjudicated by the Monte-Carlo
//! oracle in `monte_carlo` and is documented in `docs/errata.md`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::AngleSet;
use crate::instantaneous::{PhasePlan, RisMode};
use crate::scenario::{Gains, Scenario};
use crate::stochastic::{rho_kappa, LosSet};

/// Phase-coherence summaries of one phase plan against the LoS geometry.
///
/// `f[k]` is the beamforming sum toward user `k` through the error-free
/// phases; `|f[k]| <= M` with equality iff the plan aligns every term.
/// `xi[j][k]` is the eavesdropper-side double sum: `|g_jk|^2 - M` where
/// `g_jk` couples eavesdropper `j`'s LoS row to user `k`'s LoS through the
/// plan; its range is `[-M, M (M - 1)]`.
#[derive(Debug, Clone, Serialize)]
pub struct CoherenceFactors {
    pub f: Vec<Complex64>,
    pub xi: Vec<Vec<f64>>,
}

impl CoherenceFactors {
    pub fn xi_coh(&self, j: usize, k: usize) -> f64 {
        self.xi[j][k]
    }
}

/// The closed-form moments feeding one user's rate theorem.
#[derive(Debug, Clone, Serialize)]
pub struct MomentSet {
    /// Signal moment xi_k.
    pub xi: f64,
    /// Interference moments, one per interferer i != k (ascending i).
    pub varsigma: Vec<f64>,
    /// Combiner-norm moment upsilon_k.
    pub upsilon: f64,
    /// Amplified-RIS-noise moment nu_k.
    pub nu: f64,
    /// Eavesdropper signal moment per j (large-scale and amplification
    /// folded in).
    pub eave_x: Vec<f64>,
    /// Eavesdropper interference moments per j, per interferer i != k.
    pub eave_y: Vec<Vec<f64>>,
    /// Eavesdropper RIS-noise moment per j (0 for passive).
    pub eave_z: Vec<f64>,
}

/// Closed-form rate summary for one user.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RateReport {
    pub user_rate: f64,
    /// Worst-case (maximum) eavesdropper ergodic rate.
    pub eave_rate: f64,
    /// `max(0, user_rate - eave_rate)`.
    pub secrecy_rate: f64,
    pub mode: RisMode,
}

/// Everything the moment formulas need from one (plan, angles) pair.
pub(crate) struct MomentCtx {
    pub m: f64,
    pub n: f64,
    pub r2: f64,
    pub f: Vec<Complex64>,
    /// LoS inner products a_i^H a_k.
    pub los_dot: Vec<Vec<Complex64>>,
    pub xi_coh: Vec<Vec<f64>>,
}

impl MomentCtx {
    pub fn build(sc: &Scenario, plan: &PhasePlan, angles: &AngleSet) -> Result<Self> {
        if plan.phases.len() != sc.m_ris {
            return Err(Error::Config(format!(
                "phase plan has {} entries, expected M = {}",
                plan.phases.len(),
                sc.m_ris
            )));
        }
        let los = LosSet::build(sc, angles)?;
        let phase: Vec<Complex64> = plan
            .phases
            .iter()
            .map(|p| Complex64::from_polar(1.0, *p))
            .collect();
        let f: Vec<Complex64> = los
            .users
            .iter()
            .map(|a| {
                a.iter()
                    .zip(&phase)
                    .zip(los.bs_aod.iter())
                    .map(|((am, ph), um)| um.conj() * ph * am)
                    .sum()
            })
            .collect();
        let k = sc.num_users();
        let mut los_dot = vec![vec![Complex64::default(); k]; k];
        for i in 0..k {
            for kk in 0..k {
                los_dot[i][kk] = los.users[i]
                    .iter()
                    .zip(los.users[kk].iter())
                    .map(|(a, b)| a.conj() * b)
                    .sum();
            }
        }
        let xi_coh = los
            .eaves
            .iter()
            .map(|e| {
                los.users
                    .iter()
                    .map(|a| {
                        let g: Complex64 = e
                            .iter()
                            .zip(&phase)
                            .zip(a.iter())
                            .map(|((em, ph), am)| em * ph * am)
                            .sum();
                        g.norm_sqr() - sc.m_ris as f64
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            m: sc.m_ris as f64,
            n: sc.n_bs as f64,
            r2: rho_kappa(sc.kappa)?.powi(2),
            f,
            los_dot,
            xi_coh,
        })
    }
}

/// Beamforming sums `f_k` and eavesdropper coherence sums of a phase plan.
pub fn coherence_factors(
    plan: &PhasePlan,
    angles: &AngleSet,
    sc: &Scenario,
) -> Result<CoherenceFactors> {
    let ctx = MomentCtx::build(sc, plan, angles)?;
    Ok(CoherenceFactors {
        f: ctx.f,
        xi: ctx.xi_coh,
    })
}

/// Signal moment: the second moment of the combined desired-signal term for
/// user `k`, exact in (N, M, Rician factors, phase-error moment, |f_k|^2).
pub fn moment_xi_k(sc: &Scenario, plan: &PhasePlan, angles: &AngleSet, k: usize) -> Result<f64> {
    let ctx = MomentCtx::build(sc, plan, angles)?;
    Ok(xi_value(&ctx, sc.rician.bs, sc.rician.users[k], ctx.f[k].norm_sqr()))
}

pub(crate) fn xi_value(ctx: &MomentCtx, rb: f64, rk: f64, f2: f64) -> f64 {
    let (n, m, r2) = (ctx.n, ctx.m, ctx.r2);
    let cb = 1.0 / (rb + 1.0);
    let ck = 1.0 / (rk + 1.0);
    // grouped by the h-branch expansion; each line is one exact Gaussian or
    // circular moment
    let e1 = rk * rk
        * (rb * rb * n * n * (r2 * f2 * f2 + (1.0 - r2) * m * f2)
            + rb * n * m * f2
            + rb * n * m * (r2 * f2 + (1.0 - r2) * m)
            + n * n * m * (m * r2 + 1.0 - r2)
            + n * m * m
            + 2.0 * rb * n * n * f2 * (m * r2 + 1.0 - r2));
    let b2 = (rb * rb * n * n * m + 2.0 * rb * n * n + rb * m * n) * f2
        + (rb * m * n + n * n + n * m) * m;
    let e2 = rk * b2;
    let e3 = rk
        * ((rb * rb * n * n * m + 2.0 * rb * n * n + rb * m * n) * (r2 * f2 + (1.0 - r2) * m)
            + (rb * m * n + n * n + n * m) * m);
    let e4 = r2 * m * (m - 1.0) * n * n * (rb + 1.0) * (rb + 1.0)
        + m * (n * n * (rb + 1.0) * (rb + 1.0) + n * (2.0 * rb + 1.0))
        + n * n * m * (rb * rb * m + 2.0 * rb + 1.0)
        + n * m * m * (2.0 * rb + 1.0);
    let e14 = 2.0
        * rk
        * (r2 * m * (m - 1.0) * n * n * (rb + 1.0) * (rb + 1.0)
            + m * (n * n * (rb + 1.0) * (rb + 1.0) + n * (2.0 * rb + 1.0))
            + (f2 - m)
                * (rb * (rb + 1.0) * n * n * (m * r2 + 1.0 - r2) + rb * n * (1.0 + r2)));
    cb * cb * ck * ck * (e1 + e2 + e3 + e4 + e14)
}

/// Interference moment between desired user `k` and interferer `i`.
pub fn moment_varsigma_i(
    sc: &Scenario,
    plan: &PhasePlan,
    angles: &AngleSet,
    k: usize,
    i: usize,
) -> Result<f64> {
    if i == k {
        return Err(Error::Domain(
            "interference moment needs i != k (use the signal moment)".into(),
        ));
    }
    let ctx = MomentCtx::build(sc, plan, angles)?;
    Ok(varsigma_value(&ctx, sc, k, i))
}

pub(crate) fn varsigma_value(ctx: &MomentCtx, sc: &Scenario, k: usize, i: usize) -> f64 {
    let (n, m, r2) = (ctx.n, ctx.m, ctx.r2);
    let rb = sc.rician.bs;
    let rk = sc.rician.users[k];
    let ri = sc.rician.users[i];
    let fk2 = ctx.f[k].norm_sqr();
    let fi2 = ctx.f[i].norm_sqr();
    let pi = ctx.los_dot[i][k]; // a_i^H a_k
    let cross = (ctx.f[k].conj() * ctx.f[i] * pi).re;
    let cb = 1.0 / (rb + 1.0);
    let s1 = rk * ri
        * (rb * rb * n * n * fk2 * (r2 * fi2 + (1.0 - r2) * m)
            + rb * n * m * fk2
            + rb * n * m * (r2 * fi2 + (1.0 - r2) * m)
            + n * n * (r2 * pi.norm_sqr() + (1.0 - r2) * m)
            + n * m * m
            + 2.0 * rb * n * n * (r2 * cross + (1.0 - r2) * fk2));
    let s2 = rk
        * ((rb * rb * n * n * m + 2.0 * rb * n * n + rb * m * n) * fk2
            + (rb * m * n + n * n + n * m) * m);
    let s3 = ri
        * ((rb * rb * n * n * m + 2.0 * rb * n * n + rb * m * n) * (r2 * fi2 + (1.0 - r2) * m)
            + (rb * m * n + n * n + n * m) * m);
    let s4 = n * n * m * (rb * rb * m + 2.0 * rb + 1.0) + n * m * m * (2.0 * rb + 1.0);
    cb * cb / ((rk + 1.0) * (ri + 1.0)) * (s1 + s2 + s3 + s4)
}

/// Combiner-norm moment `E || h_k^H Theta^H G^H ||^2` (unit large-scale).
pub fn moment_upsilon_k(
    sc: &Scenario,
    plan: &PhasePlan,
    angles: &AngleSet,
    k: usize,
) -> Result<f64> {
    let ctx = MomentCtx::build(sc, plan, angles)?;
    Ok(upsilon_value(&ctx, sc.rician.bs, sc.rician.users[k], ctx.f[k].norm_sqr()))
}

pub(crate) fn upsilon_value(ctx: &MomentCtx, rb: f64, rk: f64, f2: f64) -> f64 {
    let (n, m) = (ctx.n, ctx.m);
    n * (rb * rk * f2 + (rb + rk + 1.0) * m) / ((rb + 1.0) * (rk + 1.0))
}

/// Amplified-noise-norm moment `E || h_k^H Theta^H G^H G ||^2` with unit
/// element gain. The unit-modulus error factors cancel inside this norm, so
/// the value does not depend on kappa; the plan still enters through |f_k|^2.
pub fn moment_nu_k(sc: &Scenario, plan: &PhasePlan, angles: &AngleSet, k: usize) -> Result<f64> {
    let ctx = MomentCtx::build(sc, plan, angles)?;
    Ok(nu_value(&ctx, sc.rician.bs, sc.rician.users[k], ctx.f[k].norm_sqr()))
}

pub(crate) fn nu_value(ctx: &MomentCtx, rb: f64, rk: f64, f2: f64) -> f64 {
    let (n, m) = (ctx.n, ctx.m);
    let x1 = rk
        * ((rb * rb * n * n * m + 2.0 * rb * n * n + rb * m * n) * f2
            + (rb * m * n + n * n + n * m) * m);
    let x2 = n * n * m * (rb * rb * m + 2.0 * rb + 1.0) + n * m * m * (2.0 * rb + 1.0);
    (x1 + x2) / ((rb + 1.0) * (rb + 1.0) * (rk + 1.0))
}

/// The four-Rician-branch eavesdropper bracket `E |h_ej Theta ThetaBar h_x|^2`
/// for unit element gain.
pub(crate) fn eave_bracket(m: f64, r2: f64, rho_e: f64, rho_x: f64, xi_coh: f64) -> f64 {
    (rho_e * rho_x * (m + r2 * xi_coh) + (rho_e + rho_x + 1.0) * m)
        / ((rho_e + 1.0) * (rho_x + 1.0))
}

/// Eavesdropper moments (x, y, z) for eavesdropper `j` listening to user `k`:
/// the coherently combined direct+reflected signal moment, the per-interferer
/// moments and the amplified-RIS-noise moment (0 for passive).
pub fn eave_moments(
    sc: &Scenario,
    plan: &PhasePlan,
    angles: &AngleSet,
    mode: &RisMode,
    j: usize,
    k: usize,
) -> Result<(f64, Vec<f64>, f64)> {
    let ctx = MomentCtx::build(sc, plan, angles)?;
    let gains = Gains::build(sc)?;
    let rho = mode.amplification(sc)?;
    Ok(eave_values(&ctx, sc, &gains, mode, rho, j, k))
}

pub(crate) fn eave_values(
    ctx: &MomentCtx,
    sc: &Scenario,
    gains: &Gains,
    mode: &RisMode,
    amplification: f64,
    j: usize,
    k: usize,
) -> (f64, Vec<f64>, f64) {
    let m = ctx.m;
    let rr2 = amplification * amplification;
    let reflected = |i: usize| {
        gains.user_ris[i]
            * gains.ris_eave[j]
            * rr2
            * eave_bracket(m, ctx.r2, sc.rician.eaves[j], sc.rician.users[i], ctx.xi_coh[j][i])
    };
    let x = reflected(k) + gains.user_eave[j][k];
    let y = (0..sc.num_users())
        .filter(|i| *i != k)
        .map(|i| reflected(i) + gains.user_eave[j][i])
        .collect();
    let z = match mode {
        RisMode::Passive => 0.0,
        _ => gains.ris_eave[j] * m * rr2,
    };
    (x, y, z)
}

/// All moments of one (user, plan) pair in one pass.
pub fn moment_set(
    sc: &Scenario,
    plan: &PhasePlan,
    angles: &AngleSet,
    mode: &RisMode,
    k: usize,
) -> Result<MomentSet> {
    let ctx = MomentCtx::build(sc, plan, angles)?;
    let gains = Gains::build(sc)?;
    let rho = mode.amplification(sc)?;
    let fk2 = ctx.f[k].norm_sqr();
    let varsigma = (0..sc.num_users())
        .filter(|i| *i != k)
        .map(|i| varsigma_value(&ctx, sc, k, i))
        .collect();
    let mut eave_x = Vec::new();
    let mut eave_y = Vec::new();
    let mut eave_z = Vec::new();
    for j in 0..sc.num_eaves() {
        let (x, y, z) = eave_values(&ctx, sc, &gains, mode, rho, j, k);
        eave_x.push(x);
        eave_y.push(y);
        eave_z.push(z);
    }
    Ok(MomentSet {
        xi: xi_value(&ctx, sc.rician.bs, sc.rician.users[k], fk2),
        varsigma,
        upsilon: upsilon_value(&ctx, sc.rician.bs, sc.rician.users[k], fk2),
        nu: nu_value(&ctx, sc.rician.bs, sc.rician.users[k], fk2),
        eave_x,
        eave_y,
        eave_z,
    })
}

/// SINR argument of the closed-form user rate (mode-weighted moments).
pub(crate) fn user_sinr_argument(
    ctx: &MomentCtx,
    sc: &Scenario,
    gains: &Gains,
    amplification: f64,
    k: usize,
) -> Result<f64> {
    let rb = sc.rician.bs;
    let fk2 = ctx.f[k].norm_sqr();
    let xi = xi_value(ctx, rb, sc.rician.users[k], fk2);
    let upsilon = upsilon_value(ctx, rb, sc.rician.users[k], fk2);
    let nu = nu_value(ctx, rb, sc.rician.users[k], fk2);
    let r2a = amplification * amplification;
    let r4a = r2a * r2a;
    let mut interference = 0.0;
    for i in 0..sc.num_users() {
        if i != k {
            interference += sc.user_powers[i] * gains.user_bs[i] * varsigma_value(ctx, sc, k, i);
        }
    }
    let numerator = sc.user_powers[k] * gains.user_bs[k] * xi * r4a;
    let denominator = interference * r4a
        + r4a * gains.ris_bs_noise * sc.noise_w * nu
        + r2a * upsilon * sc.noise_w;
    if denominator <= 0.0 {
        return Err(Error::Domain("zero denominator in the user rate".into()));
    }
    Ok(numerator / denominator)
}

/// Closed-form ergodic uplink rate of user `k` (bits/s/Hz), including the
/// information-slot prefactor for the energy-harvesting mode.
pub fn ergodic_user_rate(
    sc: &Scenario,
    plan: &PhasePlan,
    angles: &AngleSet,
    mode: &RisMode,
    k: usize,
) -> Result<f64> {
    let ctx = MomentCtx::build(sc, plan, angles)?;
    let gains = Gains::build(sc)?;
    let rho = mode.amplification(sc)?;
    let gamma = user_sinr_argument(&ctx, sc, &gains, rho, k)?;
    Ok(mode.rate_prefactor() * (1.0 + gamma).log2())
}

/// Per-eavesdropper closed-form SINR argument.
pub(crate) fn eave_sinr_argument(
    ctx: &MomentCtx,
    sc: &Scenario,
    gains: &Gains,
    mode: &RisMode,
    amplification: f64,
    j: usize,
    k: usize,
) -> f64 {
    let (x, y, z) = eave_values(ctx, sc, gains, mode, amplification, j, k);
    let interference: f64 = y
        .iter()
        .zip((0..sc.num_users()).filter(|i| *i != k))
        .map(|(yi, i)| sc.user_powers[i] * yi)
        .sum();
    sc.user_powers[k] * x / (interference + z * sc.noise_w + sc.noise_w)
}

/// Worst-case (max over j) closed-form ergodic eavesdropper rate for the
/// message of user `k`.
pub fn ergodic_eave_rate(
    sc: &Scenario,
    plan: &PhasePlan,
    angles: &AngleSet,
    mode: &RisMode,
    k: usize,
) -> Result<f64> {
    let ctx = MomentCtx::build(sc, plan, angles)?;
    let gains = Gains::build(sc)?;
    let rho = mode.amplification(sc)?;
    let worst = (0..sc.num_eaves())
        .map(|j| eave_sinr_argument(&ctx, sc, &gains, mode, rho, j, k))
        .fold(0.0f64, f64::max);
    Ok(mode.rate_prefactor() * (1.0 + worst).log2())
}

/// Closed-form ergodic secrecy rate of user `k`: the clamped difference of
/// the user rate and the worst eavesdropper rate.
pub fn ergodic_secrecy_rate(
    sc: &Scenario,
    plan: &PhasePlan,
    angles: &AngleSet,
    mode: &RisMode,
    k: usize,
) -> Result<RateReport> {
    let user_rate = ergodic_user_rate(sc, plan, angles, mode, k)?;
    let eave_rate = ergodic_eave_rate(sc, plan, angles, mode, k)?;
    Ok(RateReport {
        user_rate,
        eave_rate,
        secrecy_rate: (user_rate - eave_rate).max(0.0),
        mode: *mode,
    })
}
