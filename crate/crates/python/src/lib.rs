//! Python bindings: the main analytic operations and the small oracle
//! entry points, with Hz/seconds/tesla at the boundary.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use nv_sense_core::constants::{PhysicalConstants, TAU};
use nv_sense_core::error::Error;
use nv_sense_core::metrology;
use nv_sense_core::noise;
use nv_sense_core::protocols;
use nv_sense_core::sequences::{self, FilterShape};

fn err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn consts() -> PhysicalConstants {
    PhysicalConstants::default()
}

fn shape_of(kind: &str, n: usize, level: u32) -> PyResult<FilterShape> {
    Ok(match kind {
        "ramsey" => FilterShape::Ramsey,
        "hahn" => FilterShape::Hahn,
        "pdd" => FilterShape::Pdd { n },
        "cpmg" | "xy8" => FilterShape::Cpmg { n },
        "udd" => FilterShape::Udd { n },
        "cdd" => FilterShape::Cdd { level },
        other => return Err(PyValueError::new_err(format!("unknown filter kind {other}"))),
    })
}

/// Photon statistics of one optical readout shot.
#[pyclass]
#[derive(Clone)]
struct PhotonModel {
    inner: metrology::PhotonModel,
}

#[pymethods]
impl PhotonModel {
    #[new]
    fn new(n0: f64, n1: f64) -> PyResult<Self> {
        Ok(PhotonModel {
            inner: metrology::PhotonModel::new(n0, n1).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_avg_contrast(n_avg: f64, contrast: f64) -> PyResult<Self> {
        Ok(PhotonModel {
            inner: metrology::PhotonModel::from_avg_contrast(n_avg, contrast).map_err(err)?,
        })
    }

    #[getter]
    fn n_avg(&self) -> f64 {
        self.inner.n_avg()
    }

    #[getter]
    fn contrast(&self) -> f64 {
        self.inner.contrast()
    }

    fn readout_fidelity(&self) -> f64 {
        metrology::readout_fidelity(&self.inner)
    }
}

/// Timing, fidelity, and target parameters entering the sensitivities.
#[pyclass]
#[derive(Clone)]
struct SensitivityBudget {
    inner: metrology::SensitivityBudget,
}

#[pymethods]
impl SensitivityBudget {
    #[new]
    #[pyo3(signature = (t_accu, t_ini, t_read, xi, f_read, f_ini,
                        distance_m = 10e-9, gamma_target_hz_per_t = 42.5774785e6,
                        polarization = 1.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        t_accu: f64,
        t_ini: f64,
        t_read: f64,
        xi: f64,
        f_read: f64,
        f_ini: f64,
        distance_m: f64,
        gamma_target_hz_per_t: f64,
        polarization: f64,
    ) -> Self {
        SensitivityBudget {
            inner: metrology::SensitivityBudget {
                t_accu,
                t_ini,
                t_read,
                xi,
                f_read,
                f_ini,
                distance: distance_m,
                gamma_target: TAU * gamma_target_hz_per_t,
                polarization,
            },
        }
    }

    /// The documented ambient shallow-sensor worked-example profile.
    #[staticmethod]
    fn paper_ambient_shallow() -> Self {
        SensitivityBudget {
            inner: metrology::profile_paper_ambient_shallow(),
        }
    }

    /// Magnetic-field sensitivity; mode "pol" (T/rtHz) or "fluc" (T^2/rtHz).
    fn magnetic_sensitivity(&self, mode: &str) -> PyResult<f64> {
        metrology::magnetic_sensitivity(&self.inner, parse_mode(mode)?, &consts()).map_err(err)
    }

    /// Spin-number sensitivity (spins/rtHz).
    fn spin_number_sensitivity(&self, mode: &str) -> PyResult<f64> {
        metrology::spin_number_sensitivity(&self.inner, parse_mode(mode)?, &consts()).map_err(err)
    }
}

fn parse_mode(mode: &str) -> PyResult<metrology::SensingMode> {
    match mode {
        "pol" | "polarization" => Ok(metrology::SensingMode::Polarization),
        "fluc" | "fluctuation" => Ok(metrology::SensingMode::Fluctuation),
        other => Err(PyValueError::new_err(format!("mode must be pol|fluc, got {other}"))),
    }
}

/// Readout fidelity (1 + 1/(n_avg C^2))^(-1/2) from per-shot photons.
#[pyfunction]
fn readout_fidelity(n0: f64, n1: f64) -> PyResult<f64> {
    Ok(metrology::readout_fidelity(
        &metrology::PhotonModel::new(n0, n1).map_err(err)?,
    ))
}

/// Closed-form filter function of a control family at omega (rad/s).
#[pyfunction]
#[pyo3(signature = (kind, omega, t, n = 8, level = 2))]
fn filter_function(kind: &str, omega: f64, t: f64, n: usize, level: u32) -> PyResult<f64> {
    sequences::filter_function_closed(shape_of(kind, n, level)?, omega, t).map_err(err)
}

/// Synchronized-flip electron signal (couplings in Hz).
#[pyfunction]
fn deer_signal(couplings_hz: Vec<f64>, n: usize, tau: f64) -> f64 {
    let rad: Vec<f64> = couplings_hz.iter().map(|c| TAU * c).collect();
    protocols::deer_signal(&rad, n, tau)
}

/// Density-matrix oracle for the synchronized-flip sequence
/// (secular couplings in Hz).
#[pyfunction]
fn deer_oracle(secular_couplings_hz: Vec<f64>, n: usize, tau: f64) -> PyResult<f64> {
    let rad: Vec<f64> = secular_couplings_hz.iter().map(|c| TAU * c).collect();
    protocols::deer_oracle(&rad, n, tau).map_err(err)
}

/// Small-signal decoupling NMR response; spins are (a_par_hz, a_perp_hz).
#[pyfunction]
#[pyo3(signature = (spins_hz, n, tau, mode = "real", polarizations = vec![]))]
fn dd_nmr_signal(
    spins_hz: Vec<(f64, f64)>,
    n: usize,
    tau: f64,
    mode: &str,
    polarizations: Vec<f64>,
) -> PyResult<(f64, bool)> {
    let spins: Vec<(f64, f64)> = spins_hz
        .iter()
        .map(|(ap, aper)| (TAU * ap, TAU * aper))
        .collect();
    let m = match mode {
        "real" => protocols::SignalMode::Real,
        "imag" => protocols::SignalMode::Imag,
        other => return Err(PyValueError::new_err(format!("mode real|imag, got {other}"))),
    };
    let s = protocols::dd_nmr_signal(&spins, n, tau, m, &polarizations);
    Ok((s.value, s.small_angle_valid))
}

/// Resonant pulse spacing pi / (omega_L + a_par/2), inputs in Hz.
#[pyfunction]
fn resonance_spacing(larmor_hz: f64, a_par_hz: f64) -> f64 {
    sequences::resonance_spacing(TAU * larmor_hz, TAU * a_par_hz)
}

/// Coherence curve xi(t) for a Lorentzian noise component under a control
/// family; returns a list of (t, xi).
#[pyfunction]
#[pyo3(signature = (b_rms_t, tau_c, center_hz, kind, times, n = 8, level = 2))]
fn decoherence_curve(
    b_rms_t: f64,
    tau_c: f64,
    center_hz: f64,
    kind: &str,
    times: Vec<f64>,
    n: usize,
    level: u32,
) -> PyResult<Vec<(f64, f64)>> {
    let spec =
        noise::NoiseSpectrum::new(consts().gamma_nv).lorentzian(b_rms_t, tau_c, TAU * center_hz);
    noise::decoherence(&spec, shape_of(kind, n, level)?, &times).map_err(err)
}

/// Zero-field levels of a coupled electron-nuclear spin-1/2 pair (Hz in,
/// Hz out): dict with s0, t0, tpm and the allowed transitions.
#[pyfunction]
fn zf_epr_levels(py: Python<'_>, a_perp_hz: f64, a_par_hz: f64) -> PyResult<PyObject> {
    let levels = protocols::zf_epr(TAU * a_perp_hz, TAU * a_par_hz);
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("s0_hz", levels.omega_s0 / TAU)?;
    dict.set_item("t0_hz", levels.omega_t0 / TAU)?;
    dict.set_item("tpm_hz", levels.omega_t_pm / TAU)?;
    let transitions: Vec<(String, f64, bool, f64)> = levels
        .transitions
        .iter()
        .map(|t| {
            (
                t.label.clone(),
                t.delta_omega / TAU,
                t.allowed,
                t.resonant_rabi / TAU,
            )
        })
        .collect();
    dict.set_item("transitions", transitions)?;
    Ok(dict.into())
}

/// Dressed-state transfer probability at the matching condition.
#[pyfunction]
fn hh_transition(a_hyp_hz: f64, theta: f64, t_s: f64) -> f64 {
    protocols::hh_transition(TAU * a_hyp_hz, theta, t_s)
}

/// Gradient-imaging resolution 2 pi / (t gamma |grad B|) in meters.
#[pyfunction]
fn gradient_resolution(grad_t_per_m: f64, t_s: f64, gamma_hz_per_t: f64) -> PyResult<f64> {
    metrology::gradient_resolution(&metrology::GradientModel {
        grad_b: grad_t_per_m,
        t_s,
        gamma: TAU * gamma_hz_per_t,
    })
    .map_err(err)
}

/// Rms field of a uniform surface spin layer (T).
#[pyfunction]
fn surface_rms_field(sigma_per_m2: f64, depth_m: f64) -> PyResult<f64> {
    noise::surface_rms(
        &noise::SurfaceBathModel {
            sigma_surf: sigma_per_m2,
            depth: depth_m,
        },
        &consts(),
    )
    .map_err(err)
}

/// Thermal spin polarization gamma B hbar / (2 kB T).
#[pyfunction]
fn boltzmann_polarization(gamma_hz_per_t: f64, b0_t: f64, temperature_k: f64) -> PyResult<f64> {
    metrology::polarization(
        metrology::PolarizationKind::Boltzmann {
            gamma: TAU * gamma_hz_per_t,
            b0: b0_t,
            temperature: temperature_k,
        },
        &consts(),
    )
    .map_err(err)
}

/// Heterodyne simulation: returns (fft_peak_hz, fit_hz, fit_sigma_hz).
#[pyfunction]
#[pyo3(signature = (f_signal_hz, f_lo_hz, t_exp, b_ac_t = 2e-6, t_s = 10e-6,
                    n0 = 20.0, n1 = 10.0, phase = 0.0, seed = 1))]
#[allow(clippy::too_many_arguments)]
fn qdyne_beat(
    f_signal_hz: f64,
    f_lo_hz: f64,
    t_exp: f64,
    b_ac_t: f64,
    t_s: f64,
    n0: f64,
    n1: f64,
    phase: f64,
    seed: u64,
) -> PyResult<(f64, f64, f64)> {
    let photon = metrology::PhotonModel::new(n0, n1).map_err(err)?;
    let rec = protocols::qdyne_simulate(
        f_signal_hz,
        b_ac_t,
        t_s,
        f_lo_hz,
        t_exp,
        phase,
        &photon,
        &consts(),
        seed,
    )
    .map_err(err)?;
    let peak = protocols::qdyne_peak(&protocols::qdyne_spectrum(&rec)).unwrap_or(0.0);
    let (fit, sigma) = protocols::qdyne_fit_frequency(&rec).map_err(err)?;
    Ok((peak, fit, sigma))
}

#[pymodule]
fn nv_sense(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PhotonModel>()?;
    m.add_class::<SensitivityBudget>()?;
    m.add_function(wrap_pyfunction!(readout_fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(filter_function, m)?)?;
    m.add_function(wrap_pyfunction!(deer_signal, m)?)?;
    m.add_function(wrap_pyfunction!(deer_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(dd_nmr_signal, m)?)?;
    m.add_function(wrap_pyfunction!(resonance_spacing, m)?)?;
    m.add_function(wrap_pyfunction!(decoherence_curve, m)?)?;
    m.add_function(wrap_pyfunction!(zf_epr_levels, m)?)?;
    m.add_function(wrap_pyfunction!(hh_transition, m)?)?;
    m.add_function(wrap_pyfunction!(gradient_resolution, m)?)?;
    m.add_function(wrap_pyfunction!(surface_rms_field, m)?)?;
    m.add_function(wrap_pyfunction!(boltzmann_polarization, m)?)?;
    m.add_function(wrap_pyfunction!(qdyne_beat, m)?)?;
    Ok(())
}
