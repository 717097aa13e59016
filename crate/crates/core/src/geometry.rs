//! Node placement, large-scale fading and uniform-planar-array steering vectors.

use ndarray::Array1;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// 2-D position in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Positions of the BS, the RIS, the K users and the J eavesdroppers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeLayout {
    pub bs: Point,
    pub ris: Point,
    pub users: Vec<Point>,
    pub eaves: Vec<Point>,
}

impl NodeLayout {
    /// All pairwise distances entering a path-loss term must be positive.
    pub fn validate(&self) -> Result<()> {
        if self.users.is_empty() {
            return Err(Error::Validation("layout needs at least one user".into()));
        }
        if self.eaves.is_empty() {
            return Err(Error::Validation(
                "layout needs at least one eavesdropper".into(),
            ));
        }
        let mut pairs: Vec<(&'static str, f64)> = vec![("ris-bs", self.ris.distance(&self.bs))];
        for (k, u) in self.users.iter().enumerate() {
            pairs.push(("user-ris", u.distance(&self.ris)));
            for e in &self.eaves {
                pairs.push(("user-eave", u.distance(e)));
            }
            let _ = k;
        }
        for e in &self.eaves {
            pairs.push(("eave-ris", e.distance(&self.ris)));
        }
        for (name, d) in pairs {
            if d <= 0.0 {
                return Err(Error::Validation(format!("coincident nodes on {name} link")));
            }
        }
        Ok(())
    }
}

/// Path-loss exponents per link class.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PathLossSpec {
    /// user -> RIS
    pub alpha_r: f64,
    /// RIS -> BS
    pub alpha_b: f64,
    /// every eavesdropper link
    pub alpha_e: f64,
}

impl PathLossSpec {
    pub fn validate(&self) -> Result<()> {
        if self.alpha_r <= 0.0 || self.alpha_b <= 0.0 || self.alpha_e <= 0.0 {
            return Err(Error::Validation("path-loss exponents must be > 0".into()));
        }
        Ok(())
    }
}

/// A planar array of `size` elements with inter-element spacing `spacing_ratio`
/// in wavelengths.
///
/// Element `k` (0-based) sits at grid coordinates
/// `x_k = k mod w`, `y_k = k div w` with row width `w = ceil(sqrt(size))`.
/// For square sizes this is the usual sqrt(X) x sqrt(X) planar index map; the
/// ceiling generalisation keeps both coordinates inside `[0, sqrt(size))` for
/// every size, so non-square arrays (e.g. 5 or 10 elements) are well defined.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ArraySpec {
    pub size: usize,
    pub spacing_ratio: f64,
}

impl ArraySpec {
    pub fn new(size: usize, spacing_ratio: f64) -> Result<Self> {
        let spec = Self {
            size,
            spacing_ratio,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::Config("array size must be >= 1".into()));
        }
        if !(self.spacing_ratio > 0.0) {
            return Err(Error::Config("spacing ratio must be > 0".into()));
        }
        Ok(())
    }

    fn row_width(&self) -> usize {
        (self.size as f64).sqrt().ceil() as usize
    }

    /// Grid coordinates of element `k` (0-based).
    pub fn element_coords(&self, k: usize) -> (usize, usize) {
        let w = self.row_width();
        (k % w, k / w)
    }
}

/// Azimuth/elevation angle pair in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnglePair {
    pub azimuth: f64,
    pub elevation: f64,
}

impl AnglePair {
    pub fn new(azimuth: f64, elevation: f64) -> Self {
        Self { azimuth, elevation }
    }
}

/// Every AoA/AoD pair of one experiment. Angles are fixed per experiment so
/// the closed forms and the Monte-Carlo runs see the same deterministic
/// line-of-sight geometry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AngleSet {
    /// AoA at the BS array from the RIS (the N-element steering pair).
    pub ris_to_bs: AnglePair,
    /// AoD of the RIS->BS channel on the RIS side (the M-element steering
    /// pair of the LoS outer product).
    pub bs_aod: AnglePair,
    /// BS-side pair used by the second-moment terms; equal to `ris_to_bs`
    /// (the text never distinguishes them and only the norm enters).
    pub bs_array: AnglePair,
    /// Per-user AoA at the RIS.
    pub user_to_ris: Vec<AnglePair>,
    /// Per-eavesdropper AoA at the RIS.
    pub eave_to_ris: Vec<AnglePair>,
}

impl AngleSet {
    pub fn validate(&self, k: usize, j: usize) -> Result<()> {
        if self.user_to_ris.len() != k || self.eave_to_ris.len() != j {
            return Err(Error::Config(format!(
                "angle set shape mismatch: {} users / {} eaves, expected {k}/{j}",
                self.user_to_ris.len(),
                self.eave_to_ris.len()
            )));
        }
        let all = self
            .user_to_ris
            .iter()
            .chain(self.eave_to_ris.iter())
            .chain([&self.ris_to_bs, &self.bs_aod, &self.bs_array]);
        for a in all {
            for v in [a.azimuth, a.elevation] {
                if !(0.0..TAU).contains(&v) {
                    return Err(Error::Validation(format!("angle {v} outside [0, 2pi)")));
                }
            }
        }
        Ok(())
    }
}

/// Steering vector of the planar array: element `k` is
/// `exp(j 2 pi (d / lambda) (x_k sin(phi1) sin(phi2) + y_k cos(phi2)))`.
/// Every element has unit modulus, so the squared norm equals the array size.
pub fn steering_vector(spec: &ArraySpec, phi1: f64, phi2: f64) -> Result<Array1<Complex64>> {
    spec.validate()?;
    let scale = TAU * spec.spacing_ratio;
    let (s1, s2, c2) = (phi1.sin(), phi2.sin(), phi2.cos());
    Ok(Array1::from_iter((0..spec.size).map(|k| {
        let (xk, yk) = spec.element_coords(k);
        let arg = scale * (xk as f64 * s1 * s2 + yk as f64 * c2);
        Complex64::from_polar(1.0, arg)
    })))
}

/// Link selector for [`large_scale_gain`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    UserToRis(usize),
    RisToBs,
    /// Composite user -> RIS -> BS gain (product of the two hops).
    UserToBs(usize),
    RisToEave(usize),
    UserToEave {
        user: usize,
        eave: usize,
    },
}

/// Large-scale power gain of a link: `d^-alpha` per hop, hop products for
/// composites. Strictly positive for valid layouts.
pub fn large_scale_gain(layout: &NodeLayout, pl: &PathLossSpec, link: Link) -> Result<f64> {
    pl.validate()?;
    let hop = |d: f64, alpha: f64, name: &str| -> Result<f64> {
        if d <= 0.0 {
            return Err(Error::Domain(format!("coincident nodes on {name} link")));
        }
        Ok(d.powf(-alpha))
    };
    let user = |k: usize| -> Result<&Point> {
        layout
            .users
            .get(k)
            .ok_or_else(|| Error::Domain(format!("user index {k} out of range")))
    };
    let eave = |j: usize| -> Result<&Point> {
        layout
            .eaves
            .get(j)
            .ok_or_else(|| Error::Domain(format!("eavesdropper index {j} out of range")))
    };
    match link {
        Link::UserToRis(k) => hop(user(k)?.distance(&layout.ris), pl.alpha_r, "user-ris"),
        Link::RisToBs => hop(layout.ris.distance(&layout.bs), pl.alpha_b, "ris-bs"),
        Link::UserToBs(k) => Ok(large_scale_gain(layout, pl, Link::UserToRis(k))?
            * large_scale_gain(layout, pl, Link::RisToBs)?),
        Link::RisToEave(j) => hop(eave(j)?.distance(&layout.ris), pl.alpha_e, "ris-eave"),
        Link::UserToEave { user: k, eave: j } => {
            hop(user(k)?.distance(eave(j)?), pl.alpha_e, "user-eave")
        }
    }
}
