//! Channel and phase-error sampling, plus the deterministic circular moments
//! of the Von Mises distribution.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::geometry::{steering_vector, AngleSet};
use crate::scenario::Scenario;

/// Threshold between the power-series and continued-fraction evaluations of
/// the Bessel ratio; the two agree to 1e-10 here (covered by a test).
const BESSEL_SWITCH: f64 = 15.0;

/// Characteristic-function magnitude of the zero-mean Von Mises distribution:
/// `rho(kappa) = I1(kappa) / I0(kappa)`.
///
/// Power series below [`BESSEL_SWITCH`], Gauss continued fraction above (the
/// series terms overflow long before the ratio saturates).
pub fn rho_kappa(kappa: f64) -> Result<f64> {
    if kappa < 0.0 || !kappa.is_finite() {
        return Err(Error::Domain(format!(
            "kappa must be finite and >= 0, got {kappa}"
        )));
    }
    if kappa == 0.0 {
        return Ok(0.0);
    }
    if kappa < BESSEL_SWITCH {
        Ok(bessel_ratio_series(kappa))
    } else {
        Ok(bessel_ratio_cf(kappa))
    }
}

/// I1/I0 via the defining power series (shared term ladder, 40+ terms).
fn bessel_ratio_series(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0; // q^k / (k!)^2
    let mut i0 = 1.0;
    let mut i1 = 1.0; // sum of q^k / (k! (k+1)!), scaled by x/2 at the end
    for k in 1..200 {
        term *= q / ((k * k) as f64);
        i0 += term;
        i1 += term / (k + 1) as f64;
        if term < 1e-18 * i0 {
            break;
        }
    }
    (x / 2.0) * i1 / i0
}

/// I1/I0 via the backward recursion of the Gauss continued fraction
/// `r_v = 1 / (2 v / x + r_{v+1})`.
fn bessel_ratio_cf(x: f64) -> f64 {
    let depth = (x.ceil() as usize).saturating_add(60);
    let mut r = 0.0;
    for v in (1..=depth).rev() {
        r = 1.0 / (2.0 * v as f64 / x + r);
    }
    r
}

/// Zero-mean Von Mises phase-error law with concentration `kappa`.
#[derive(Debug, Clone, Copy)]
pub struct PhaseErrorSpec {
    pub kappa: f64,
}

impl PhaseErrorSpec {
    pub fn new(kappa: f64) -> Result<Self> {
        if kappa < 0.0 {
            return Err(Error::Domain("kappa must be >= 0".into()));
        }
        Ok(Self { kappa })
    }

    /// Circular mean of `exp(j error)`.
    pub fn circular_mean(&self) -> Result<f64> {
        rho_kappa(self.kappa)
    }
}

/// One zero-mean Von Mises variate in (-pi, pi], Best-Fisher rejection.
pub fn sample_von_mises(spec: &PhaseErrorSpec, rng: &mut impl Rng) -> f64 {
    let kappa = spec.kappa;
    if kappa < 1e-9 {
        // uniform limit; the wrapped rejection constants degenerate here
        return rng.random::<f64>() * TAU - PI;
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        let u2: f64 = rng.random();
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let u3: f64 = rng.random();
            return if u3 > 0.5 { f.acos() } else { -f.acos() };
        }
    }
}

fn standard_complex(rng: &mut impl Rng) -> Complex64 {
    // Box-Muller; unit-variance circularly-symmetric complex Gaussian.
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    let mag = (-u1.ln()).sqrt(); // sqrt(2) * N(0, 1/2) amplitude
    Complex64::from_polar(mag, TAU * u2)
}

/// Rician mixture weight pair (LoS amplitude, NLoS amplitude).
fn rician_weights(rho: f64) -> (f64, f64) {
    ((rho / (rho + 1.0)).sqrt(), (1.0 / (rho + 1.0)).sqrt())
}

/// Rician vector channel: `sqrt(rho/(rho+1)) los + sqrt(1/(rho+1)) nlos` with
/// i.i.d. unit-variance circularly-symmetric complex Gaussian scatter.
pub fn sample_rician_vec(
    rho: f64,
    los: ArrayView1<Complex64>,
    rng: &mut impl Rng,
) -> Array1<Complex64> {
    let (a, b) = rician_weights(rho);
    los.mapv(|v| v * a) + Array1::from_iter((0..los.len()).map(|_| standard_complex(rng) * b))
}

/// Rician matrix channel, row-major scatter draw order.
pub fn sample_rician_mat(
    rho: f64,
    los: ArrayView2<Complex64>,
    rng: &mut impl Rng,
) -> Array2<Complex64> {
    let (a, b) = rician_weights(rho);
    let mut out = los.to_owned();
    out.mapv_inplace(|v| v * a);
    for v in out.iter_mut() {
        *v += standard_complex(rng) * b;
    }
    out
}

/// One joint small-scale realization of every channel in the system, plus one
/// phase-error vector. All channels are unit large-scale; path gains are
/// applied by the SINR evaluators.
#[derive(Debug, Clone)]
pub struct ChannelDraw {
    /// RIS -> BS channel, N x M.
    pub g: Array2<Complex64>,
    /// user -> RIS channels, K vectors of length M.
    pub h_user: Vec<Array1<Complex64>>,
    /// RIS -> eavesdropper row channels, J vectors of length M (unconjugated
    /// row entries).
    pub h_eave_ris: Vec<Array1<Complex64>>,
    /// Rayleigh user -> eavesdropper scalars, J x K.
    pub h_eave_direct: Array2<Complex64>,
    /// Von Mises phase errors, length M.
    pub phase_errors: Array1<f64>,
}

/// Deterministic per-trial substream: one ChaCha stream per trial index so
/// Monte-Carlo results do not depend on evaluation order or thread count.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

/// Line-of-sight components shared by every draw of one experiment.
#[derive(Debug, Clone)]
pub struct LosSet {
    /// LoS of the RIS->BS channel: `a_N(ris_to_bs) a_M(bs_aod)^H`.
    pub g_bar: Array2<Complex64>,
    /// M-side steering of the RIS->BS LoS (a_M of `bs_aod`).
    pub bs_aod: Array1<Complex64>,
    /// Per-user LoS at the RIS.
    pub users: Vec<Array1<Complex64>>,
    /// Per-eavesdropper LoS row at the RIS (transpose, not conjugate).
    pub eaves: Vec<Array1<Complex64>>,
}

impl LosSet {
    pub fn build(sc: &Scenario, angles: &AngleSet) -> Result<Self> {
        angles.validate(sc.num_users(), sc.num_eaves())?;
        let a_n = steering_vector(
            &sc.bs_array(),
            angles.ris_to_bs.azimuth,
            angles.ris_to_bs.elevation,
        )?;
        let a_t = steering_vector(&sc.ris_array(), angles.bs_aod.azimuth, angles.bs_aod.elevation)?;
        let mut g_bar = Array2::zeros((sc.n_bs, sc.m_ris));
        for n in 0..sc.n_bs {
            for m in 0..sc.m_ris {
                g_bar[(n, m)] = a_n[n] * a_t[m].conj();
            }
        }
        let users = angles
            .user_to_ris
            .iter()
            .map(|p| steering_vector(&sc.ris_array(), p.azimuth, p.elevation))
            .collect::<Result<Vec<_>>>()?;
        let eaves = angles
            .eave_to_ris
            .iter()
            .map(|p| steering_vector(&sc.ris_array(), p.azimuth, p.elevation))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            g_bar,
            bs_aod: a_t,
            users,
            eaves,
        })
    }
}

/// Draw one joint channel realization. Deterministic draw order (G, users,
/// eavesdropper RIS rows, direct scalars, phase errors last) so a run with
/// zero phase error can share channel draws with a kappa run on the same
/// substream.
pub fn draw_channels(sc: &Scenario, los: &LosSet, rng: &mut impl Rng) -> ChannelDraw {
    let g = sample_rician_mat(sc.rician.bs, los.g_bar.view(), rng);
    let h_user = los
        .users
        .iter()
        .zip(&sc.rician.users)
        .map(|(a, rho)| sample_rician_vec(*rho, a.view(), rng))
        .collect();
    let h_eave_ris = los
        .eaves
        .iter()
        .zip(&sc.rician.eaves)
        .map(|(a, rho)| sample_rician_vec(*rho, a.view(), rng))
        .collect();
    let mut h_eave_direct = Array2::zeros((sc.num_eaves(), sc.num_users()));
    for v in h_eave_direct.iter_mut() {
        *v = standard_complex(rng);
    }
    let pe = PhaseErrorSpec { kappa: sc.kappa };
    let phase_errors = Array1::from_iter((0..sc.m_ris).map(|_| sample_von_mises(&pe, rng)));
    ChannelDraw {
        g,
        h_user,
        h_eave_ris,
        h_eave_direct,
        phase_errors,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario_str;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    const PAPER_JSON: &str = crate::scenario::tests::PAPER_JSON;

    #[test]
    fn rho_kappa_zero() {
        assert_eq!(rho_kappa(0.0).unwrap(), 0.0);
    }

    #[test]
    fn rho_kappa_two_matches_series_oracle() {
        // I1(2)/I0(2) from 30-digit arithmetic.
        assert_abs_diff_eq!(rho_kappa(2.0).unwrap(), 0.697774657964008, epsilon = 1e-5);
    }

    #[test]
    fn rho_kappa_large_saturates() {
        assert!(rho_kappa(500.0).unwrap() > 0.999);
        assert_abs_diff_eq!(rho_kappa(500.0).unwrap(), 0.998999498996862, epsilon = 1e-9);
    }

    #[test]
    fn rho_kappa_negative_rejected() {
        assert!(rho_kappa(-1.0).is_err());
    }

    #[test]
    fn rho_kappa_strictly_increasing_on_grid() {
        let mut prev = -1.0;
        let mut k = 0.0;
        while k <= 10.0 + 1e-9 {
            let v = rho_kappa(k).unwrap();
            assert!(v > prev, "rho not increasing at kappa={k}");
            prev = v;
            k += 0.5;
        }
    }

    #[test]
    fn bessel_series_cf_agree_at_switchover() {
        let s = bessel_ratio_series(BESSEL_SWITCH);
        let c = bessel_ratio_cf(BESSEL_SWITCH);
        assert_abs_diff_eq!(s, c, epsilon = 1e-10);
        // external 30-digit value at kappa = 15
        assert_abs_diff_eq!(s, 0.966069563986508, epsilon = 1e-12);
    }

    #[test]
    fn von_mises_uniform_limit() {
        let spec = PhaseErrorSpec::new(0.0).unwrap();
        let mut rng = trial_rng(11, 0);
        let n = 1_000_000;
        let (mut c, mut s) = (0.0, 0.0);
        for _ in 0..n {
            let x = sample_von_mises(&spec, &mut rng);
            assert!(x > -PI - 1e-12 && x <= PI + 1e-12);
            c += x.cos();
            s += x.sin();
        }
        let mean = ((c / n as f64).powi(2) + (s / n as f64).powi(2)).sqrt();
        assert!(mean < 0.004, "circular mean {mean} too large for kappa=0");
    }

    #[test]
    fn von_mises_matches_bessel_ratio() {
        // mean cos equals rho(kappa) within 3 standard errors at 1e6 draws
        for kappa in [0.5, 2.0, 8.0] {
            let spec = PhaseErrorSpec::new(kappa).unwrap();
            let mut rng = trial_rng(13, kappa.to_bits());
            let n = 1_000_000usize;
            let (mut sum, mut sumsq, mut sin_sum) = (0.0, 0.0, 0.0);
            for _ in 0..n {
                let x = sample_von_mises(&spec, &mut rng);
                let c = x.cos();
                sum += c;
                sumsq += c * c;
                sin_sum += x.sin();
            }
            let mean = sum / n as f64;
            let se = ((sumsq / n as f64 - mean * mean) / (n as f64 - 1.0)).sqrt();
            let want = rho_kappa(kappa).unwrap();
            assert!(
                (mean - want).abs() < 3.0 * se,
                "kappa={kappa}: mean cos {mean} vs rho {want} (se {se})"
            );
            // zero-mean: sine component vanishes
            assert!((sin_sum / n as f64).abs() < 4.0 * se);
        }
    }

    #[test]
    fn von_mises_concentrates_at_high_kappa() {
        let spec = PhaseErrorSpec::new(50.0).unwrap();
        let mut rng = trial_rng(17, 0);
        let n = 200_000;
        let (mut c, mut s) = (0.0, 0.0);
        for _ in 0..n {
            let x = sample_von_mises(&spec, &mut rng);
            c += x.cos();
            s += x.sin();
        }
        let var = 1.0 - ((c / n as f64).powi(2) + (s / n as f64).powi(2)).sqrt();
        assert!(var < 0.03, "circular variance {var} too large for kappa=50");
        // oracle: 1 - rho(50)
        assert!(var < 2.0 * (1.0 - rho_kappa(50.0).unwrap()) + 0.005);
    }

    #[test]
    fn rician_zero_factor_is_rayleigh() {
        let los = array![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)];
        let mut rng = trial_rng(19, 0);
        let n = 100_000;
        let (mut mean, mut pow) = (Complex64::new(0.0, 0.0), 0.0);
        for _ in 0..n {
            let h = sample_rician_vec(0.0, los.view(), &mut rng);
            mean += h[0];
            pow += h[0].norm_sqr();
        }
        // second moment 1 within ~3 SE (|h|^2 is Exp(1): se = 1/sqrt(n))
        assert!((pow / n as f64 - 1.0).abs() < 3.0 / (n as f64).sqrt());
        assert!((mean / n as f64).norm() < 3.0 / (2.0 * n as f64).sqrt());
    }

    #[test]
    fn rician_infinite_factor_is_los() {
        let los = array![Complex64::new(0.6, 0.8), Complex64::new(-1.0, 0.0)];
        let mut rng = trial_rng(23, 0);
        let h = sample_rician_vec(1e9, los.view(), &mut rng);
        for (a, b) in h.iter().zip(los.iter()) {
            assert!((a - b).norm() < 1e-4);
        }
    }

    #[test]
    fn rician_unit_power_normalization() {
        // E ||h||^2 = M for any rho when the LoS is a steering vector
        let sc = parse_scenario_str(PAPER_JSON).unwrap();
        let los = LosSet::build(&sc, &sc.draw_angles()).unwrap();
        let mut rng = trial_rng(29, 0);
        let n = 100_000;
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for _ in 0..n {
            let h = sample_rician_vec(0.5, los.users[0].view(), &mut rng);
            let p: f64 = h.iter().map(|v| v.norm_sqr()).sum();
            sum += p;
            sumsq += p * p;
        }
        let mean = sum / n as f64;
        let se = ((sumsq / n as f64 - mean * mean) / (n as f64 - 1.0)).sqrt();
        assert!(
            (mean - sc.m_ris as f64).abs() < 3.0 * se,
            "E||h||^2 = {mean} vs {}",
            sc.m_ris
        );
    }

    #[test]
    fn draw_shapes_and_determinism() {
        let sc = parse_scenario_str(PAPER_JSON).unwrap();
        let los = LosSet::build(&sc, &sc.draw_angles()).unwrap();
        let d1 = draw_channels(&sc, &los, &mut trial_rng(sc.trial_seed, 5));
        let d2 = draw_channels(&sc, &los, &mut trial_rng(sc.trial_seed, 5));
        assert_eq!(d1.g.dim(), (10, 5));
        assert_eq!(d1.h_user.len(), 4);
        assert_eq!(d1.h_user[0].len(), 5);
        assert_eq!(d1.h_eave_direct.dim(), (4, 4));
        assert_eq!(d1.phase_errors.len(), 5);
        assert_eq!(d1.g, d2.g);
        assert_eq!(d1.phase_errors, d2.phase_errors);
        let d3 = draw_channels(&sc, &los, &mut trial_rng(sc.trial_seed, 6));
        assert_ne!(d1.g, d3.g);
    }

    #[test]
    fn g_is_rank_one_in_los_limit() {
        let mut sc = parse_scenario_str(PAPER_JSON).unwrap();
        sc.rician.bs = 1e12;
        let los = LosSet::build(&sc, &sc.draw_angles()).unwrap();
        let d = draw_channels(&sc, &los, &mut trial_rng(1, 0));
        // every 2x2 minor of a rank-1 matrix vanishes
        for n in 1..sc.n_bs {
            for m in 1..sc.m_ris {
                let det = d.g[(0, 0)] * d.g[(n, m)] - d.g[(0, m)] * d.g[(n, 0)];
                assert!(det.norm() < 1e-4, "minor ({n},{m}) = {det}");
            }
        }
    }

    #[test]
    fn g_frobenius_moment() {
        // E ||G||_F^2 = N M under the Rician normalization
        let sc = parse_scenario_str(PAPER_JSON).unwrap();
        let los = LosSet::build(&sc, &sc.draw_angles()).unwrap();
        let n_tr = 20_000;
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for t in 0..n_tr {
            let d = draw_channels(&sc, &los, &mut trial_rng(31, t));
            let p: f64 = d.g.iter().map(|v| v.norm_sqr()).sum();
            sum += p;
            sumsq += p * p;
        }
        let mean = sum / n_tr as f64;
        let se = ((sumsq / n_tr as f64 - mean * mean) / (n_tr as f64 - 1.0)).sqrt();
        let want = (sc.n_bs * sc.m_ris) as f64;
        assert!((mean - want).abs() < 3.0 * se, "{mean} vs {want} (se {se})");
    }
}
