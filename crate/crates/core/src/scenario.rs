//! Experiment description: dimensions, powers, Rician factors, geometry and
//! seeds, plus JSON parsing with defaults.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{AnglePair, AngleSet, ArraySpec, NodeLayout, PathLossSpec, Point};

/// Rician K-factors per channel class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RicianFactors {
    /// RIS -> BS channel.
    pub bs: f64,
    /// user -> RIS channels, length K.
    pub users: Vec<f64>,
    /// RIS -> eavesdropper channels, length J.
    pub eaves: Vec<f64>,
}

/// A fully validated experiment description. Noise is stored in watts; dBm is
/// accepted only at the parsing boundary.
#[derive(Debug, Clone, Serialize)]
pub struct Scenario {
    /// BS antenna count N.
    pub n_bs: usize,
    /// RIS element count M.
    pub m_ris: usize,
    /// Transmit power of each user, watts (length K).
    pub user_powers: Vec<f64>,
    /// Active-RIS amplification power budget P_r, watts.
    pub ris_power: f64,
    /// BS power for the energy-harvesting slot P_b, watts.
    pub bs_power: f64,
    /// Energy-transfer time fraction.
    pub tau: f64,
    /// Energy-harvesting efficiency.
    pub eta_eff: f64,
    /// Shared noise variance, watts (all nodes).
    pub noise_w: f64,
    /// Von Mises concentration of the RIS phase error.
    pub kappa: f64,
    pub rician: RicianFactors,
    pub layout: NodeLayout,
    pub pathloss: PathLossSpec,
    /// Element spacing over wavelength for both arrays.
    pub spacing_ratio: f64,
    /// Seed for the per-experiment angle draw (and eavesdropper placement).
    pub angle_seed: u64,
    /// Master seed for Monte-Carlo trials.
    pub trial_seed: u64,
}

impl Scenario {
    pub fn num_users(&self) -> usize {
        self.user_powers.len()
    }

    pub fn num_eaves(&self) -> usize {
        self.layout.eaves.len()
    }

    pub fn ris_array(&self) -> ArraySpec {
        ArraySpec {
            size: self.m_ris,
            spacing_ratio: self.spacing_ratio,
        }
    }

    pub fn bs_array(&self) -> ArraySpec {
        ArraySpec {
            size: self.n_bs,
            spacing_ratio: self.spacing_ratio,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_bs == 0 || self.m_ris == 0 {
            return Err(Error::Validation("n and m must be >= 1".into()));
        }
        if self.user_powers.is_empty() {
            return Err(Error::Validation("at least one user required".into()));
        }
        if self.user_powers.iter().any(|p| *p < 0.0) {
            return Err(Error::Validation("user powers must be >= 0".into()));
        }
        if self.ris_power < 0.0 || self.bs_power < 0.0 {
            return Err(Error::Validation("powers must be >= 0".into()));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Validation("tau must lie in (0, 1)".into()));
        }
        if !(self.eta_eff > 0.0 && self.eta_eff <= 1.0) {
            return Err(Error::Validation("eta_eff must lie in (0, 1]".into()));
        }
        if !(self.noise_w > 0.0) {
            return Err(Error::Validation("noise power must be > 0 W".into()));
        }
        if self.kappa < 0.0 {
            return Err(Error::Validation("kappa must be >= 0".into()));
        }
        if self.rician.bs < 0.0
            || self.rician.users.iter().any(|r| *r < 0.0)
            || self.rician.eaves.iter().any(|r| *r < 0.0)
        {
            return Err(Error::Validation("Rician factors must be >= 0".into()));
        }
        if self.rician.users.len() != self.num_users() {
            return Err(Error::Validation(format!(
                "rho_k has {} entries, expected K = {}",
                self.rician.users.len(),
                self.num_users()
            )));
        }
        if self.rician.eaves.len() != self.num_eaves() {
            return Err(Error::Validation(format!(
                "rho_ej_r has {} entries, expected J = {}",
                self.rician.eaves.len(),
                self.num_eaves()
            )));
        }
        if self.layout.users.len() != self.num_users() {
            return Err(Error::Validation(format!(
                "layout has {} users, expected K = {}",
                self.layout.users.len(),
                self.num_users()
            )));
        }
        self.layout.validate()?;
        self.pathloss.validate()?;
        self.ris_array().validate()?;
        self.bs_array().validate()?;
        Ok(())
    }

    /// Draw the experiment angle set from `angle_seed`: every azimuth and
    /// elevation uniform in (0, 2pi). Draw order is fixed (BS pair, RIS AoD
    /// pair, users in index order, eavesdroppers in index order) so adding
    /// trailing nodes never disturbs earlier draws.
    pub fn draw_angles(&self) -> AngleSet {
        let mut rng = ChaCha12Rng::seed_from_u64(self.angle_seed);
        let pair = |rng: &mut ChaCha12Rng| {
            AnglePair::new(rng.random::<f64>() * TAU, rng.random::<f64>() * TAU)
        };
        let ris_to_bs = pair(&mut rng);
        let bs_aod = pair(&mut rng);
        let user_to_ris = (0..self.num_users()).map(|_| pair(&mut rng)).collect();
        let eave_to_ris = (0..self.num_eaves()).map(|_| pair(&mut rng)).collect();
        AngleSet {
            ris_to_bs,
            bs_aod,
            bs_array: ris_to_bs,
            user_to_ris,
            eave_to_ris,
        }
    }
}

/// Precomputed large-scale quantities of one scenario.
#[derive(Debug, Clone)]
pub struct Gains {
    /// Composite user -> RIS -> BS gain per user.
    pub user_bs: Vec<f64>,
    /// user -> RIS gain per user (`d^-alpha_r`).
    pub user_ris: Vec<f64>,
    /// RIS -> BS distance raised to `-alpha_r`; scales the amplified RIS
    /// noise at the BS (the text uses alpha_r on this hop).
    pub ris_bs_noise: f64,
    /// RIS -> eavesdropper gain per eavesdropper (`d^-alpha_e`).
    pub ris_eave: Vec<f64>,
    /// user -> eavesdropper direct gain, indexed [eave][user].
    pub user_eave: Vec<Vec<f64>>,
}

impl Gains {
    pub fn build(sc: &Scenario) -> Result<Self> {
        use crate::geometry::{large_scale_gain, Link};
        let (k, j) = (sc.num_users(), sc.num_eaves());
        let user_bs = (0..k)
            .map(|u| large_scale_gain(&sc.layout, &sc.pathloss, Link::UserToBs(u)))
            .collect::<Result<Vec<_>>>()?;
        let user_ris = (0..k)
            .map(|u| large_scale_gain(&sc.layout, &sc.pathloss, Link::UserToRis(u)))
            .collect::<Result<Vec<_>>>()?;
        let ris_bs_noise = sc
            .layout
            .ris
            .distance(&sc.layout.bs)
            .powf(-sc.pathloss.alpha_r);
        let ris_eave = (0..j)
            .map(|e| large_scale_gain(&sc.layout, &sc.pathloss, Link::RisToEave(e)))
            .collect::<Result<Vec<_>>>()?;
        let user_eave = (0..j)
            .map(|e| {
                (0..k)
                    .map(|u| {
                        large_scale_gain(&sc.layout, &sc.pathloss, Link::UserToEave { user: u, eave: e })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            user_bs,
            user_ris,
            ris_bs_noise,
            ris_eave,
            user_eave,
        })
    }
}

fn default_tau() -> f64 {
    0.5
}
fn default_eta() -> f64 {
    0.8
}
fn default_spacing() -> f64 {
    0.5
}
fn default_disk_center() -> [f64; 2] {
    [20.0, 0.0]
}
fn default_disk_radius() -> f64 {
    10.0
}

/// Scalar-or-array field: a single value broadcasts over the index range.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ScalarOrVec {
    Scalar(f64),
    Vec(Vec<f64>),
}

impl ScalarOrVec {
    fn broadcast(&self, len: usize, key: &str) -> Result<Vec<f64>> {
        match self {
            ScalarOrVec::Scalar(v) => Ok(vec![*v; len]),
            ScalarOrVec::Vec(v) if v.len() == len => Ok(v.clone()),
            ScalarOrVec::Vec(v) => Err(Error::Validation(format!(
                "{key}: expected {len} entries, found {}",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Deserialize)]
struct RicianConfig {
    rho_b: f64,
    rho_k: ScalarOrVec,
    rho_ej_r: ScalarOrVec,
}

#[derive(Debug, Deserialize)]
struct DiskConfig {
    #[serde(default = "default_disk_center")]
    center: [f64; 2],
    #[serde(default = "default_disk_radius")]
    radius: f64,
}

#[derive(Debug, Deserialize)]
struct LayoutConfig {
    bs_pos: [f64; 2],
    ris_pos: [f64; 2],
    user_pos: Vec<[f64; 2]>,
    /// Explicit eavesdropper positions; mutually exclusive with `eave_disk`.
    eave_pos: Option<Vec<[f64; 2]>>,
    /// Sample eavesdroppers uniformly over a disk using `angle_seed`.
    eave_disk: Option<DiskConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioConfig {
    k: usize,
    j: usize,
    n: usize,
    m: usize,
    user_powers: ScalarOrVec,
    ris_power: f64,
    bs_power: f64,
    #[serde(default = "default_tau")]
    tau: f64,
    #[serde(default = "default_eta")]
    eta_eff: f64,
    noise_dbm: f64,
    kappa: f64,
    rician: RicianConfig,
    layout: LayoutConfig,
    pathloss: PathLossSpec,
    #[serde(default = "default_spacing")]
    spacing_ratio: f64,
    angle_seed: u64,
    trial_seed: u64,
}

fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

/// Uniform draw over a disk; stream 1 of the angle seed so eavesdropper
/// placement never perturbs the angle draws.
fn sample_disk(seed: u64, center: [f64; 2], radius: f64, count: usize) -> Vec<Point> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(1);
    (0..count)
        .map(|_| {
            let theta = rng.random::<f64>() * TAU;
            let r = radius * rng.random::<f64>().sqrt();
            Point::new(center[0] + r * theta.cos(), center[1] + r * theta.sin())
        })
        .collect()
}

/// Parse a scenario from a JSON string, fill defaults, enforce invariants.
pub fn parse_scenario_str(text: &str) -> Result<Scenario> {
    let cfg: ScenarioConfig =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("scenario json: {e}")))?;

    let user_powers = cfg.user_powers.broadcast(cfg.k, "user_powers")?;
    let rician = RicianFactors {
        bs: cfg.rician.rho_b,
        users: cfg.rician.rho_k.broadcast(cfg.k, "rician.rho_k")?,
        eaves: cfg.rician.rho_ej_r.broadcast(cfg.j, "rician.rho_ej_r")?,
    };

    if cfg.layout.user_pos.len() != cfg.k {
        return Err(Error::Validation(format!(
            "layout.user_pos has {} entries, expected k = {}",
            cfg.layout.user_pos.len(),
            cfg.k
        )));
    }
    let eaves = match (&cfg.layout.eave_pos, &cfg.layout.eave_disk) {
        (Some(pos), None) => {
            if pos.len() != cfg.j {
                return Err(Error::Validation(format!(
                    "layout.eave_pos has {} entries, expected j = {}",
                    pos.len(),
                    cfg.j
                )));
            }
            pos.iter().map(|p| Point::new(p[0], p[1])).collect()
        }
        (None, Some(disk)) => sample_disk(cfg.angle_seed, disk.center, disk.radius, cfg.j),
        (None, None) => sample_disk(
            cfg.angle_seed,
            default_disk_center(),
            default_disk_radius(),
            cfg.j,
        ),
        (Some(_), Some(_)) => {
            return Err(Error::Validation(
                "layout: give either eave_pos or eave_disk, not both".into(),
            ))
        }
    };

    let scenario = Scenario {
        n_bs: cfg.n,
        m_ris: cfg.m,
        user_powers,
        ris_power: cfg.ris_power,
        bs_power: cfg.bs_power,
        tau: cfg.tau,
        eta_eff: cfg.eta_eff,
        noise_w: dbm_to_watts(cfg.noise_dbm),
        kappa: cfg.kappa,
        rician,
        layout: NodeLayout {
            bs: Point::new(cfg.layout.bs_pos[0], cfg.layout.bs_pos[1]),
            ris: Point::new(cfg.layout.ris_pos[0], cfg.layout.ris_pos[1]),
            users: cfg
                .layout
                .user_pos
                .iter()
                .map(|p| Point::new(p[0], p[1]))
                .collect(),
            eaves,
        },
        pathloss: cfg.pathloss,
        spacing_ratio: cfg.spacing_ratio,
        angle_seed: cfg.angle_seed,
        trial_seed: cfg.trial_seed,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Parse a scenario from a JSON file.
pub fn parse_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.as_ref().display()))))?;
    parse_scenario_str(&text)
}
