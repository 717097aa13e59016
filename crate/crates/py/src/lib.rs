//! Python bindings: scenario loading, closed-form rates, Monte-Carlo
//! estimation, phase design and configuration selection.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ris_secrecy_core::closed_form::{coherence_factors, ergodic_secrecy_rate};
use ris_secrecy_core::design::{
    aligned_phases, ga_optimize, required_bs_power, required_ris_power, required_user_power,
    select_configuration, GaConfig, PowerBudgets,
};
use ris_secrecy_core::instantaneous::{PhasePlan, RisMode, RisModeKind};
use ris_secrecy_core::monte_carlo::{estimate_ergodic_rates, McOptions};
use ris_secrecy_core::stochastic;
use ris_secrecy_core::{ArraySpec, Error};

fn err(e: Error) -> PyErr {
    match e {
        Error::Domain(_) | Error::Validation(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn parse_mode(mode: &str) -> PyResult<RisModeKind> {
    match mode {
        "passive" => Ok(RisModeKind::Passive),
        "active" => Ok(RisModeKind::Active),
        "eh" => Ok(RisModeKind::Eh),
        other => Err(PyValueError::new_err(format!(
            "unknown mode `{other}` (passive|active|eh)"
        ))),
    }
}

/// A parsed experiment scenario with its deterministic angle draw.
#[pyclass]
struct Scenario {
    inner: ris_secrecy_core::Scenario,
    angles: ris_secrecy_core::AngleSet,
}

impl Scenario {
    fn plan(&self, mode: &RisMode, phases: Option<Vec<f64>>) -> PyResult<PhasePlan> {
        let phases = match phases {
            Some(p) => p,
            None => aligned_phases(&self.angles, &self.inner.ris_array(), 0),
        };
        PhasePlan::for_mode(phases, mode, &self.inner).map_err(err)
    }
}

#[pymethods]
impl Scenario {
    /// Load and validate a scenario JSON file.
    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let inner = ris_secrecy_core::parse_scenario(path).map_err(err)?;
        let angles = inner.draw_angles();
        Ok(Self { inner, angles })
    }

    /// Parse a scenario from a JSON string.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = ris_secrecy_core::parse_scenario_str(text).map_err(err)?;
        let angles = inner.draw_angles();
        Ok(Self { inner, angles })
    }

    #[getter]
    fn num_users(&self) -> usize {
        self.inner.num_users()
    }

    #[getter]
    fn num_eaves(&self) -> usize {
        self.inner.num_eaves()
    }

    #[getter]
    fn n_bs(&self) -> usize {
        self.inner.n_bs
    }

    #[getter]
    fn m_ris(&self) -> usize {
        self.inner.m_ris
    }

    #[getter]
    fn noise_w(&self) -> f64 {
        self.inner.noise_w
    }

    /// Phases aligning the beamforming sum toward one user.
    fn aligned_phases(&self, user: usize) -> Vec<f64> {
        aligned_phases(&self.angles, &self.inner.ris_array(), user)
    }

    /// `|f_k|` for every user under a phase vector.
    fn coherence_magnitudes(&self, phases: Vec<f64>) -> PyResult<Vec<f64>> {
        let plan = PhasePlan::passive(phases);
        let c = coherence_factors(&plan, &self.angles, &self.inner).map_err(err)?;
        Ok(c.f.iter().map(|v| v.norm()).collect())
    }

    /// Closed-form (user, eavesdropper, secrecy) rates for one user.
    #[pyo3(signature = (mode, user=0, phases=None))]
    fn closed_form_rates<'py>(
        &self,
        py: Python<'py>,
        mode: &str,
        user: usize,
        phases: Option<Vec<f64>>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let mode = RisMode::from_kind(parse_mode(mode)?, &self.inner).map_err(err)?;
        let plan = self.plan(&mode, phases)?;
        let rep = ergodic_secrecy_rate(&self.inner, &plan, &self.angles, &mode, user).map_err(err)?;
        let out = PyDict::new(py);
        out.set_item("user_rate", rep.user_rate)?;
        out.set_item("eave_rate", rep.eave_rate)?;
        out.set_item("secrecy_rate", rep.secrecy_rate)?;
        Ok(out)
    }

    /// Monte-Carlo (user, eavesdropper, secrecy) estimates for one user.
    #[pyo3(signature = (mode, user=0, trials=20_000, seed=None, phases=None))]
    fn monte_carlo_rates<'py>(
        &self,
        py: Python<'py>,
        mode: &str,
        user: usize,
        trials: u64,
        seed: Option<u64>,
        phases: Option<Vec<f64>>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let mode = RisMode::from_kind(parse_mode(mode)?, &self.inner).map_err(err)?;
        let plan = self.plan(&mode, phases)?;
        let est = estimate_ergodic_rates(
            &self.inner,
            &plan,
            &self.angles,
            &mode,
            McOptions {
                n_trials: trials,
                master_seed: seed.unwrap_or(self.inner.trial_seed),
                zero_phase_error: false,
            },
        )
        .map_err(err)?;
        let out = PyDict::new(py);
        out.set_item("user_rate", est.user[user].mean)?;
        out.set_item("user_se", est.user[user].std_error)?;
        out.set_item("eave_rate", est.eave_worst[user].mean)?;
        out.set_item("secrecy_rate", est.secrecy[user])?;
        Ok(out)
    }

    /// Required powers for a target secrecy rate (None when infeasible).
    #[pyo3(signature = (target_rs, user=0))]
    fn required_powers<'py>(
        &self,
        py: Python<'py>,
        target_rs: f64,
        user: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let plan = PhasePlan::passive(aligned_phases(&self.angles, &self.inner.ris_array(), user));
        let out = PyDict::new(py);
        out.set_item(
            "user_power",
            required_user_power(&self.inner, &plan, &self.angles, user, target_rs).map_err(err)?,
        )?;
        out.set_item(
            "ris_power",
            required_ris_power(&self.inner, &self.angles, &plan, user, target_rs).map_err(err)?,
        )?;
        out.set_item(
            "bs_power",
            required_bs_power(
                &self.inner,
                &self.angles,
                &plan,
                user,
                target_rs,
                self.inner.tau,
                self.inner.eta_eff,
            )
            .map_err(err)?,
        )?;
        Ok(out)
    }

    /// Configuration selection with passive -> active -> EH precedence.
    #[pyo3(signature = (target_rs, user=0, budget_user=None, budget_ris=None, budget_bs=None))]
    fn select_configuration<'py>(
        &self,
        py: Python<'py>,
        target_rs: f64,
        user: usize,
        budget_user: Option<f64>,
        budget_ris: Option<f64>,
        budget_bs: Option<f64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let plan = PhasePlan::passive(aligned_phases(&self.angles, &self.inner.ris_array(), user));
        let budgets = PowerBudgets {
            user: budget_user.unwrap_or(self.inner.user_powers[user]),
            ris: budget_ris.unwrap_or(self.inner.ris_power),
            bs: budget_bs.unwrap_or(self.inner.bs_power),
        };
        let sel =
            select_configuration(&self.inner, &self.angles, &plan, user, &budgets, target_rs)
                .map_err(err)?;
        let out = PyDict::new(py);
        out.set_item("chosen_mode", sel.chosen_mode.map(|m| m.to_string()))?;
        out.set_item("feasible", sel.feasible)?;
        out.set_item("required_user_power", sel.required_user_power)?;
        out.set_item("required_ris_power", sel.required_ris_power)?;
        out.set_item("required_bs_power", sel.required_bs_power)?;
        Ok(out)
    }

    /// Genetic phase search on the closed-form sum rate; returns
    /// (phases, objective).
    #[pyo3(signature = (mode="passive", population=64, generations=200, seed=0))]
    fn ga_phases(
        &self,
        mode: &str,
        population: usize,
        generations: usize,
        seed: u64,
    ) -> PyResult<(Vec<f64>, f64)> {
        let mode = RisMode::from_kind(parse_mode(mode)?, &self.inner).map_err(err)?;
        let cfg = GaConfig {
            population,
            generations,
            seed,
            ..GaConfig::default()
        };
        let out = ga_optimize(&self.inner, &self.angles, &mode, &cfg).map_err(err)?;
        Ok((out.plan.phases, out.objective))
    }
}

/// `I1(kappa) / I0(kappa)`: circular mean of the phase-error phasor.
#[pyfunction]
fn rho_kappa(kappa: f64) -> PyResult<f64> {
    stochastic::rho_kappa(kappa).map_err(err)
}

/// Planar-array steering vector as a list of (re, im) pairs.
#[pyfunction]
#[pyo3(signature = (size, phi1, phi2, spacing_ratio=0.5))]
fn steering_vector(
    size: usize,
    phi1: f64,
    phi2: f64,
    spacing_ratio: f64,
) -> PyResult<Vec<(f64, f64)>> {
    let spec = ArraySpec::new(size, spacing_ratio).map_err(err)?;
    let v = ris_secrecy_core::geometry::steering_vector(&spec, phi1, phi2).map_err(err)?;
    Ok(v.iter().map(|c| (c.re, c.im)).collect())
}

#[pymodule]
fn ris_secrecy(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_function(wrap_pyfunction!(rho_kappa, m)?)?;
    m.add_function(wrap_pyfunction!(steering_vector, m)?)?;
    Ok(())
}
