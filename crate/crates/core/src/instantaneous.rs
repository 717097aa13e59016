//! Per-realization signal processing: phase application, MRC combining,
//! amplification factors and exact SINRs for the three RIS modes.

use ndarray::Array1;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenario::{Gains, Scenario};
use crate::stochastic::ChannelDraw;

/// The three RIS configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RisMode {
    Passive,
    Active {
        ris_power: f64,
    },
    EnergyHarvesting {
        bs_power: f64,
        tau: f64,
        eta_eff: f64,
    },
}

/// Mode tag without payload, for CLI flags and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RisModeKind {
    Passive,
    Active,
    Eh,
}

impl std::fmt::Display for RisModeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RisModeKind::Passive => "passive",
            RisModeKind::Active => "active",
            RisModeKind::Eh => "eh",
        })
    }
}

impl RisMode {
    /// Instantiate a mode from the scenario's power budget fields.
    pub fn from_kind(kind: RisModeKind, sc: &Scenario) -> Result<Self> {
        let mode = match kind {
            RisModeKind::Passive => RisMode::Passive,
            RisModeKind::Active => RisMode::Active {
                ris_power: sc.ris_power,
            },
            RisModeKind::Eh => RisMode::EnergyHarvesting {
                bs_power: sc.bs_power,
                tau: sc.tau,
                eta_eff: sc.eta_eff,
            },
        };
        mode.validate()?;
        Ok(mode)
    }

    pub fn kind(&self) -> RisModeKind {
        match self {
            RisMode::Passive => RisModeKind::Passive,
            RisMode::Active { .. } => RisModeKind::Active,
            RisMode::EnergyHarvesting { .. } => RisModeKind::Eh,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            RisMode::Passive => Ok(()),
            RisMode::Active { ris_power } => {
                if ris_power > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Validation("active mode needs ris_power > 0".into()))
                }
            }
            RisMode::EnergyHarvesting { bs_power, tau, eta_eff } => {
                if bs_power <= 0.0 {
                    Err(Error::Validation("eh mode needs bs_power > 0".into()))
                } else if !(tau > 0.0 && tau < 1.0) {
                    Err(Error::Domain("tau must lie in (0, 1)".into()))
                } else if !(eta_eff > 0.0 && eta_eff <= 1.0) {
                    Err(Error::Domain("eta_eff must lie in (0, 1]".into()))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Rate prefactor: the information-transfer time fraction.
    pub fn rate_prefactor(&self) -> f64 {
        match self {
            RisMode::EnergyHarvesting { tau, .. } => 1.0 - tau,
            _ => 1.0,
        }
    }

    /// Common element gain for the mode (1 for passive).
    pub fn amplification(&self, sc: &Scenario) -> Result<f64> {
        match *self {
            RisMode::Passive => Ok(1.0),
            RisMode::Active { ris_power } => amplification_factor(ris_power, sc),
            RisMode::EnergyHarvesting { bs_power, tau, eta_eff } => {
                eh_amplification_factor(bs_power, tau, eta_eff, sc)
            }
        }
    }
}

/// Deterministic RIS configuration: the designed phases and the common
/// element gain (1 for passive).
#[derive(Debug, Clone, Serialize)]
pub struct PhasePlan {
    /// Phase of each element, radians in [0, 2pi).
    pub phases: Vec<f64>,
    /// Common amplification `varrho` applied by every element.
    pub amplification: f64,
}

impl PhasePlan {
    pub fn passive(phases: Vec<f64>) -> Self {
        Self {
            phases,
            amplification: 1.0,
        }
    }

    /// Attach the mode's amplification factor to a phase vector.
    pub fn for_mode(phases: Vec<f64>, mode: &RisMode, sc: &Scenario) -> Result<Self> {
        if phases.len() != sc.m_ris {
            return Err(Error::Config(format!(
                "phase plan has {} entries, expected M = {}",
                phases.len(),
                sc.m_ris
            )));
        }
        Ok(Self {
            amplification: mode.amplification(sc)?,
            phases,
        })
    }

    /// Reflection coefficients `varrho e^(j phi_m)`.
    pub fn coefficients(&self) -> Array1<Complex64> {
        Array1::from_iter(
            self.phases
                .iter()
                .map(|p| Complex64::from_polar(self.amplification, *p)),
        )
    }
}

/// Additive decomposition of one SINR.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SinrBreakdown {
    pub signal: f64,
    pub interference: f64,
    /// Amplified RIS thermal noise after the second hop; 0 for passive.
    pub ris_noise: f64,
    pub rx_noise: f64,
}

impl SinrBreakdown {
    pub fn sinr(&self) -> f64 {
        self.signal / (self.interference + self.ris_noise + self.rx_noise)
    }

    pub fn rate(&self) -> f64 {
        (1.0 + self.sinr()).log2()
    }
}

/// MRC receive weights for user `k`: the conjugate transpose of the cascaded
/// channel through the error-free reflection `Theta` (the receiver cannot
/// know the random error).
pub fn mrc_weights(draw: &ChannelDraw, plan: &PhasePlan, k: usize) -> Array1<Complex64> {
    let theta = plan.coefficients();
    let reflected = &theta * &draw.h_user[k];
    draw.g.dot(&reflected).mapv(|v| v.conj())
}

/// Active-RIS element gain sustained by an amplification budget `P_r`:
/// `sqrt(P_r / (M (sum_k p_k d_ukr^-alpha_r + sigma_r^2)))`.
pub fn amplification_factor(ris_power: f64, sc: &Scenario) -> Result<f64> {
    if ris_power <= 0.0 {
        return Err(Error::Domain("ris_power must be > 0".into()));
    }
    let gains = Gains::build(sc)?;
    let incident: f64 = sc
        .user_powers
        .iter()
        .zip(&gains.user_ris)
        .map(|(p, g)| p * g)
        .sum();
    let denom = sc.m_ris as f64 * (incident + sc.noise_w);
    if denom <= 0.0 {
        return Err(Error::Config("zero incident power at the RIS".into()));
    }
    Ok((ris_power / denom).sqrt())
}

/// Average power harvested during the energy-transfer slot:
/// `eta tau P_b N M / (1 - tau)`.
pub fn harvested_power(bs_power: f64, tau: f64, eta_eff: f64, sc: &Scenario) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Domain("tau must lie in (0, 1)".into()));
    }
    if !(eta_eff > 0.0 && eta_eff <= 1.0) {
        return Err(Error::Domain("eta_eff must lie in (0, 1]".into()));
    }
    Ok(eta_eff * tau * bs_power * (sc.n_bs * sc.m_ris) as f64 / (1.0 - tau))
}

/// Element gain of the energy-harvesting RIS: the amplification factor fed by
/// the harvested power.
pub fn eh_amplification_factor(bs_power: f64, tau: f64, eta_eff: f64, sc: &Scenario) -> Result<f64> {
    amplification_factor(harvested_power(bs_power, tau, eta_eff, sc)?, sc)
}

/// Exact per-realization SINR at the BS for user `k`.
pub fn sinr_bs(
    draw: &ChannelDraw,
    plan: &PhasePlan,
    mode: &RisMode,
    sc: &Scenario,
    k: usize,
) -> Result<SinrBreakdown> {
    let gains = Gains::build(sc)?;
    Ok(sinr_bs_with(draw, plan, mode, sc, &gains, k))
}

pub(crate) fn sinr_bs_with(
    draw: &ChannelDraw,
    plan: &PhasePlan,
    mode: &RisMode,
    sc: &Scenario,
    gains: &Gains,
    k: usize,
) -> SinrBreakdown {
    let theta = plan.coefficients();
    let err: Array1<Complex64> = draw
        .phase_errors
        .iter()
        .map(|p| Complex64::from_polar(1.0, *p))
        .collect();
    let w = mrc_weights(draw, plan, k); // h_k^H Theta^H G^H, as a row
    let combine = |h: &Array1<Complex64>| -> Complex64 {
        let v = draw.g.dot(&(&theta * &err * h));
        w.iter().zip(v.iter()).map(|(a, b)| a * b).sum()
    };
    let signal = sc.user_powers[k] * gains.user_bs[k] * combine(&draw.h_user[k]).norm_sqr();
    let mut interference = 0.0;
    for i in 0..sc.num_users() {
        if i != k {
            interference +=
                sc.user_powers[i] * gains.user_bs[i] * combine(&draw.h_user[i]).norm_sqr();
        }
    }
    let ris_noise = match mode {
        RisMode::Passive => 0.0,
        _ => {
            // || h^H Theta^H G^H G ThetaBar Theta ||^2 sigma_r^2 d_rb^-alpha_r
            let mut row = Array1::<Complex64>::zeros(sc.m_ris);
            for m in 0..sc.m_ris {
                let mut acc = Complex64::new(0.0, 0.0);
                for n in 0..sc.n_bs {
                    acc += w[n] * draw.g[(n, m)];
                }
                row[m] = acc * theta[m] * err[m];
            }
            gains.ris_bs_noise * row.iter().map(|v| v.norm_sqr()).sum::<f64>() * sc.noise_w
        }
    };
    let rx_noise = w.iter().map(|v| v.norm_sqr()).sum::<f64>() * sc.noise_w;
    SinrBreakdown {
        signal,
        interference,
        ris_noise,
        rx_noise,
    }
}

/// Exact per-realization SINR at eavesdropper `j` decoding user `k`. The
/// direct and reflected paths superpose coherently; active/EH modes add the
/// amplified RIS noise heard by the eavesdropper.
pub fn sinr_eave(
    draw: &ChannelDraw,
    plan: &PhasePlan,
    mode: &RisMode,
    sc: &Scenario,
    j: usize,
    k: usize,
) -> Result<SinrBreakdown> {
    let gains = Gains::build(sc)?;
    Ok(sinr_eave_with(draw, plan, mode, sc, &gains, j, k))
}

pub(crate) fn sinr_eave_with(
    draw: &ChannelDraw,
    plan: &PhasePlan,
    mode: &RisMode,
    sc: &Scenario,
    gains: &Gains,
    j: usize,
    k: usize,
) -> SinrBreakdown {
    let theta = plan.coefficients();
    let err: Array1<Complex64> = draw
        .phase_errors
        .iter()
        .map(|p| Complex64::from_polar(1.0, *p))
        .collect();
    let he = &draw.h_eave_ris[j];
    let path = |i: usize| -> Complex64 {
        let reflected: Complex64 = he
            .iter()
            .zip(theta.iter())
            .zip(err.iter())
            .zip(draw.h_user[i].iter())
            .map(|(((e, t), b), h)| e * t * b * h)
            .sum();
        (gains.user_ris[i] * gains.ris_eave[j]).sqrt() * reflected
            + gains.user_eave[j][i].sqrt() * draw.h_eave_direct[(j, i)]
    };
    let signal = sc.user_powers[k] * path(k).norm_sqr();
    let mut interference = 0.0;
    for i in 0..sc.num_users() {
        if i != k {
            interference += sc.user_powers[i] * path(i).norm_sqr();
        }
    }
    let ris_noise = match mode {
        RisMode::Passive => 0.0,
        _ => {
            let amp: f64 = he
                .iter()
                .zip(theta.iter())
                .map(|(e, t)| (e * t).norm_sqr())
                .sum();
            gains.ris_eave[j] * amp * sc.noise_w
        }
    };
    SinrBreakdown {
        signal,
        interference,
        ris_noise,
        rx_noise: sc.noise_w,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario_str;
    use crate::stochastic::{draw_channels, trial_rng, LosSet};
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};

    const PAPER_JSON: &str = crate::scenario::tests::PAPER_JSON;

    fn tiny_scenario() -> Scenario {
        // M = N = K = J = 1 with unit-ish geometry for scalar checks
        let text = r#"{
            "k": 1, "j": 1, "n": 1, "m": 1,
            "user_powers": 2.0, "ris_power": 8.0, "bs_power": 50.0,
            "noise_dbm": 0.0, "kappa": 2.0,
            "rician": { "rho_b": 0.5, "rho_k": 0.5, "rho_ej_r": 0.5 },
            "layout": { "bs_pos": [0,0], "ris_pos": [1,0],
                        "user_pos": [[2,0]], "eave_pos": [[1,1]] },
            "pathloss": { "alpha_r": 2.0, "alpha_b": 2.0, "alpha_e": 2.0 },
            "angle_seed": 3, "trial_seed": 5
        }"#;
        parse_scenario_str(text).unwrap()
    }

    fn unit_draw(sc: &Scenario) -> ChannelDraw {
        ChannelDraw {
            g: Array2::from_elem((sc.n_bs, sc.m_ris), Complex64::new(1.0, 0.0)),
            h_user: vec![
                Array1::from_elem(sc.m_ris, Complex64::new(1.0, 0.0));
                sc.num_users()
            ],
            h_eave_ris: vec![
                Array1::from_elem(sc.m_ris, Complex64::new(1.0, 0.0));
                sc.num_eaves()
            ],
            h_eave_direct: Array2::from_elem(
                (sc.num_eaves(), sc.num_users()),
                Complex64::new(1.0, 0.0),
            ),
            phase_errors: Array1::zeros(sc.m_ris),
        }
    }

    #[test]
    fn mrc_scalar_case() {
        let sc = tiny_scenario();
        let draw = unit_draw(&sc);
        let plan = PhasePlan::passive(vec![0.0]);
        let w = mrc_weights(&draw, &plan, 0);
        assert_abs_diff_eq!(w[0].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[0].im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn mrc_norm_matches_cascade() {
        let sc = parse_scenario_str(PAPER_JSON).unwrap();
        let los = LosSet::build(&sc, &sc.draw_angles()).unwrap();
        let draw = draw_channels(&sc, &los, &mut trial_rng(1, 0));
        let plan = PhasePlan::passive(vec![0.3, 1.1, 2.9, 4.0, 5.5]);
        let w = mrc_weights(&draw, &plan, 2);
        let cascade = draw.g.dot(&(&plan.coefficients() * &draw.h_user[2]));
        let n1: f64 = w.iter().map(|v| v.norm_sqr()).sum();
        let n2: f64 = cascade.iter().map(|v| v.norm_sqr()).sum();
        assert_abs_diff_eq!(n1, n2, epsilon = 1e-12 * n1.max(1.0));
    }

    #[test]
    fn mrc_antilinear_in_channels() {
        let sc = parse_scenario_str(PAPER_JSON).unwrap();
        let los = LosSet::build(&sc, &sc.draw_angles()).unwrap();
        let mut draw = draw_channels(&sc, &los, &mut trial_rng(1, 1));
        let plan = PhasePlan::passive(vec![0.0; 5]);
        let w = mrc_weights(&draw, &plan, 0);
        draw.g.mapv_inplace(|v| v.conj());
        draw.h_user[0].mapv_inplace(|v| v.conj());
        let w_conj = mrc_weights(&draw, &plan, 0);
        for (a, b) in w.iter().zip(w_conj.iter()) {
            assert!((a.conj() - b).norm() < 1e-12);
        }
    }

    #[test]
    fn amplification_direct_substitution() {
        // M = 1, K = 1, p/d^alpha = 1, sigma_r^2 = 1 (0 dBm), P_r = 8:
        // varrho = sqrt(8 / (1 * (1 + 1))) = 2.
        let mut sc = tiny_scenario();
        sc.user_powers = vec![1.0]; // user sits 1 m from the RIS
        assert_abs_diff_eq!(sc.noise_w, 1.0, epsilon = 1e-12);
        let rho = amplification_factor(8.0, &sc).unwrap();
        assert_abs_diff_eq!(rho, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn amplification_sqrt_scaling() {
        let sc = parse_scenario_str(PAPER_JSON).unwrap();
        let r1 = amplification_factor(7.0, &sc).unwrap();
        let r4 = amplification_factor(28.0, &sc).unwrap();
        assert_abs_diff_eq!(r4, 2.0 * r1, epsilon = 1e-12);
    }

    #[test]
    fn amplification_paper_settings_oracle() {
        // Independent high-precision evaluation of the formula at the paper
        // geometry: d = sqrt(325), P_r = 7, M = 5, K = 4, p = 2.
        let sc = parse_scenario_str(PAPER_JSON).unwrap();
        let d: Vec<f64> = sc
            .layout
            .users
            .iter()
            .map(|u| u.distance(&sc.layout.ris))
            .collect();
        let incident: f64 = d.iter().map(|d| 2.0 * d.powf(-2.7)).sum();
        let expect = (7.0 / (5.0 * (incident + 1e-10))).sqrt();
        assert_abs_diff_eq!(
            amplification_factor(7.0, &sc).unwrap(),
            expect,
            epsilon = 1e-12 * expect
        );
        assert!(expect > 1.0, "paper settings amplify");
    }

    #[test]
    fn harvested_power_direct() {
        let mut sc = parse_scenario_str(PAPER_JSON).unwrap();
        sc.n_bs = 10;
        sc.m_ris = 5;
        let p = harvested_power(50.0, 0.5, 0.8, &sc).unwrap();
        assert_abs_diff_eq!(p, 0.8 * 0.5 * 50.0 * 50.0 / 0.5, epsilon = 1e-9);
        // eta=0.8, tau=0.5, Pb=50, N=10, M=5 -> 2000 W
        assert_abs_diff_eq!(p, 2000.0, epsilon = 1e-9);
    }

    #[test]
    fn harvested_power_limits_and_linearity() {
        let sc = parse_scenario_str(PAPER_JSON).unwrap();
        let p_small = harvested_power(50.0, 1e-9, 0.8, &sc).unwrap();
        assert!(p_small < 1e-4);
        let p1 = harvested_power(50.0, 0.5, 0.8, &sc).unwrap();
        let p2 = harvested_power(100.0, 0.5, 0.8, &sc).unwrap();
        assert_abs_diff_eq!(p2, 2.0 * p1, epsilon = 1e-9);
        assert!(harvested_power(50.0, 1.5, 0.8, &sc).is_err());
    }

    #[test]
    fn eh_amplification_is_composition() {
        let sc = parse_scenario_str(PAPER_JSON).unwrap();
        let pr = harvested_power(50.0, 0.5, 0.8, &sc).unwrap();
        let direct = eh_amplification_factor(50.0, 0.5, 0.8, &sc).unwrap();
        let composed = amplification_factor(pr, &sc).unwrap();
        assert_abs_diff_eq!(direct, composed, epsilon = 1e-12 * composed);
    }

    #[test]
    fn eh_matches_active_at_equal_power() {
        let sc = parse_scenario_str(PAPER_JSON).unwrap();
        let pr = harvested_power(50.0, 0.5, 1.0, &sc).unwrap();
        let a = amplification_factor(pr, &sc).unwrap();
        let b = eh_amplification_factor(50.0, 0.5, 1.0, &sc).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12 * a);
    }

    #[test]
    fn sinr_bs_scalar_no_error() {
        // M=N=K=1, passive, unit channels, phi=0: gamma = p L / sigma^2 and
        // the phase error drops out by unit modulus.
        let sc = tiny_scenario();
        let mut draw = unit_draw(&sc);
        draw.phase_errors[0] = 1.234; // must not change anything
        let plan = PhasePlan::passive(vec![0.0]);
        let s = sinr_bs(&draw, &plan, &RisMode::Passive, &sc, 0).unwrap();
        // d_ur = 1, d_rb = 1 -> L = 1; p = 2, sigma^2 = 1 (0 dBm)
        assert_abs_diff_eq!(s.signal, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.interference, 0.0);
        assert_abs_diff_eq!(s.rx_noise, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.sinr(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn sinr_bs_single_user_has_no_interference() {
        let sc = tiny_scenario();
        let los = LosSet::build(&sc, &sc.draw_angles()).unwrap();
        let draw = draw_channels(&sc, &los, &mut trial_rng(2, 0));
        let plan = PhasePlan::passive(vec![1.0]);
        let s = sinr_bs(&draw, &plan, &RisMode::Passive, &sc, 0).unwrap();
        assert_eq!(s.interference, 0.0);
        assert_eq!(s.ris_noise, 0.0);
    }

    #[test]
    fn sinr_bs_active_matches_direct_expression() {
        // The breakdown must equal a from-scratch evaluation of the cited
        // SINR with varrho absorbed into Theta.
        let sc = parse_scenario_str(PAPER_JSON).unwrap();
        let los = LosSet::build(&sc, &sc.draw_angles()).unwrap();
        let draw = draw_channels(&sc, &los, &mut trial_rng(7, 3));
        let mode = RisMode::Active { ris_power: 7.0 };
        let phases = vec![0.1, 0.9, 2.2, 3.3, 4.4];
        let plan = PhasePlan::for_mode(phases.clone(), &mode, &sc).unwrap();
        let k = 1;
        let s = sinr_bs(&draw, &plan, &mode, &sc, k).unwrap();

        // direct evaluation
        let gains = Gains::build(&sc).unwrap();
        let rho = plan.amplification;
        let theta: Array1<Complex64> = phases
            .iter()
            .map(|p| Complex64::from_polar(rho, *p))
            .collect();
        let err: Array1<Complex64> = draw
            .phase_errors
            .iter()
            .map(|p| Complex64::from_polar(1.0, *p))
            .collect();
        let w = draw.g.dot(&(&theta * &draw.h_user[k])).mapv(|v| v.conj());
        let num = |i: usize| {
            let v = draw.g.dot(&(&theta * &err * &draw.h_user[i]));
            w.iter()
                .zip(v.iter())
                .map(|(a, b)| a * b)
                .sum::<Complex64>()
                .norm_sqr()
        };
        let sig = sc.user_powers[k] * gains.user_bs[k] * num(k);
        let intf: f64 = (0..sc.num_users())
            .filter(|i| *i != k)
            .map(|i| sc.user_powers[i] * gains.user_bs[i] * num(i))
            .sum();
        let mut row = Array1::<Complex64>::zeros(sc.m_ris);
        for m in 0..sc.m_ris {
            let mut acc = Complex64::new(0.0, 0.0);
            for n in 0..sc.n_bs {
                acc += w[n] * draw.g[(n, m)];
            }
            row[m] = acc * theta[m] * err[m];
        }
        let risn =
            gains.ris_bs_noise * row.iter().map(|v| v.norm_sqr()).sum::<f64>() * sc.noise_w;
        let rxn = w.iter().map(|v| v.norm_sqr()).sum::<f64>() * sc.noise_w;
        let direct = sig / (intf + risn + rxn);
        assert_abs_diff_eq!(s.sinr(), direct, epsilon = 1e-9 * direct);
        assert!(s.ris_noise > 0.0);
    }

    #[test]
    fn sinr_eave_direct_only() {
        // all reflected channels zero -> the reflected path vanishes
        let sc = tiny_scenario();
        let mut draw = unit_draw(&sc);
        draw.h_eave_ris[0].fill(Complex64::new(0.0, 0.0));
        let plan = PhasePlan::passive(vec![0.7]);
        let s = sinr_eave(&draw, &plan, &RisMode::Passive, &sc, 0, 0).unwrap();
        // direct gain: user (2,0) to eave (1,1): d^2 = 2 -> gain = 1/4 at alpha=2... d = sqrt(2), d^-2 = 0.5
        assert_abs_diff_eq!(s.signal, 2.0 * 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.rx_noise, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sinr_eave_scalar_oracle() {
        // passive, M = 1, single user: closed scalar expression
        let sc = tiny_scenario();
        let los = LosSet::build(&sc, &sc.draw_angles()).unwrap();
        let draw = draw_channels(&sc, &los, &mut trial_rng(3, 9));
        let plan = PhasePlan::passive(vec![0.4]);
        let s = sinr_eave(&draw, &plan, &RisMode::Passive, &sc, 0, 0).unwrap();
        let gains = Gains::build(&sc).unwrap();
        let refl = draw.h_eave_ris[0][0]
            * Complex64::from_polar(1.0, 0.4)
            * Complex64::from_polar(1.0, draw.phase_errors[0])
            * draw.h_user[0][0];
        let amp = (gains.user_ris[0] * gains.ris_eave[0]).sqrt() * refl
            + gains.user_eave[0][0].sqrt() * draw.h_eave_direct[(0, 0)];
        let want = 2.0 * amp.norm_sqr() / sc.noise_w;
        assert_abs_diff_eq!(s.sinr(), want, epsilon = 1e-12 * want);
    }

    #[test]
    fn ris_noise_strictly_lowers_eave_sinr() {
        let sc = parse_scenario_str(PAPER_JSON).unwrap();
        let los = LosSet::build(&sc, &sc.draw_angles()).unwrap();
        let draw = draw_channels(&sc, &los, &mut trial_rng(4, 2));
        let mode = RisMode::Active { ris_power: 7.0 };
        let plan = PhasePlan::for_mode(vec![0.0; 5], &mode, &sc).unwrap();
        let with = sinr_eave(&draw, &plan, &mode, &sc, 0, 0).unwrap();
        let without = SinrBreakdown {
            ris_noise: 0.0,
            ..with
        };
        assert!(with.sinr() < without.sinr());
    }

    #[test]
    fn sinr_invariant_under_global_phase() {
        // adding a common phase to every element leaves |combining products|
        // unchanged
        let sc = parse_scenario_str(PAPER_JSON).unwrap();
        let los = LosSet::build(&sc, &sc.draw_angles()).unwrap();
        let draw = draw_channels(&sc, &los, &mut trial_rng(5, 4));
        let base = vec![0.2, 1.2, 2.2, 3.2, 4.2];
        let shifted: Vec<f64> = base.iter().map(|p| p + 1.0).collect();
        let p1 = PhasePlan::passive(base);
        let p2 = PhasePlan::passive(shifted);
        let s1 = sinr_bs(&draw, &p1, &RisMode::Passive, &sc, 0).unwrap();
        let s2 = sinr_bs(&draw, &p2, &RisMode::Passive, &sc, 0).unwrap();
        assert_abs_diff_eq!(s1.sinr(), s2.sinr(), epsilon = 1e-9 * s1.sinr());
    }

    #[test]
    fn noise_scaling_inverts_sinr() {
        // passive, no interference: scaling sigma^2 by c scales the SINR by 1/c
        let mut sc = tiny_scenario();
        let los = LosSet::build(&sc, &sc.draw_angles()).unwrap();
        let draw = draw_channels(&sc, &los, &mut trial_rng(6, 6));
        let plan = PhasePlan::passive(vec![0.0]);
        let s1 = sinr_bs(&draw, &plan, &RisMode::Passive, &sc, 0).unwrap();
        sc.noise_w *= 10.0;
        let s2 = sinr_bs(&draw, &plan, &RisMode::Passive, &sc, 0).unwrap();
        assert_abs_diff_eq!(s1.sinr(), 10.0 * s2.sinr(), epsilon = 1e-9 * s1.sinr());
    }

    #[test]
    fn components_nonnegative_and_rate_finite() {
        let sc = parse_scenario_str(PAPER_JSON).unwrap();
        let los = LosSet::build(&sc, &sc.draw_angles()).unwrap();
        let mode = RisMode::EnergyHarvesting {
            bs_power: 50.0,
            tau: 0.5,
            eta_eff: 0.8,
        };
        let plan = PhasePlan::for_mode(vec![0.5; 5], &mode, &sc).unwrap();
        for t in 0..50 {
            let draw = draw_channels(&sc, &los, &mut trial_rng(8, t));
            for k in 0..sc.num_users() {
                let s = sinr_bs(&draw, &plan, &mode, &sc, k).unwrap();
                assert!(s.signal >= 0.0 && s.interference >= 0.0);
                assert!(s.ris_noise >= 0.0 && s.rx_noise > 0.0);
                assert!(s.rate().is_finite());
                for j in 0..sc.num_eaves() {
                    let e = sinr_eave(&draw, &plan, &mode, &sc, j, k).unwrap();
                    assert!(e.rate().is_finite());
                }
            }
        }
    }

    #[test]
    fn array_coeffs_carry_amplification() {
        let sc = parse_scenario_str(PAPER_JSON).unwrap();
        let mode = RisMode::Active { ris_power: 7.0 };
        let plan = PhasePlan::for_mode(vec![0.0; 5], &mode, &sc).unwrap();
        let rho = amplification_factor(7.0, &sc).unwrap();
        for c in plan.coefficients().iter() {
            assert_abs_diff_eq!(c.norm(), rho, epsilon = 1e-12);
        }
    }
}
