//! Sensitivity, readout-noise, polarization, and spatial-resolution
//! calculators.
//!
//! Sensitivities are reported in (T or T^2) * Hz^{-1/2}; the mode is part
//! of the returned value to keep the T-vs-T^2 units explicit.

use std::f64::consts::PI;

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};

/// Photon statistics of one optical readout.
#[derive(Debug, Clone, Copy)]
pub struct PhotonModel {
    /// Mean photons per shot for ms = 0.
    pub n0: f64,
    /// Mean photons per shot for ms = +-1.
    pub n1: f64,
}

impl PhotonModel {
    pub fn new(n0: f64, n1: f64) -> Result<Self> {
        if !(n0 >= n1 && n1 >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "need n0 >= n1 >= 0, got n0={n0}, n1={n1}"
            )));
        }
        Ok(PhotonModel { n0, n1 })
    }

    pub fn from_avg_contrast(n_avg: f64, contrast: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&contrast) || !(n_avg >= 0.0) {
            return Err(Error::InvalidInput("need n_avg >= 0, C in [0,1]".into()));
        }
        Ok(PhotonModel {
            n0: n_avg * (1.0 + contrast),
            n1: n_avg * (1.0 - contrast),
        })
    }

    pub fn n_avg(&self) -> f64 {
        0.5 * (self.n0 + self.n1)
    }

    pub fn contrast(&self) -> f64 {
        if self.n0 + self.n1 == 0.0 {
            0.0
        } else {
            (self.n0 - self.n1) / (self.n0 + self.n1)
        }
    }
}

/// Readout fidelity (1 + 1/(n_avg C^2))^{-1/2}; equivalently
/// (1 + 2(n0+n1)/(n0-n1)^2)^{-1/2}.
pub fn readout_fidelity(photon: &PhotonModel) -> f64 {
    let c = photon.contrast();
    let n = photon.n_avg();
    if c == 0.0 || n == 0.0 {
        return 0.0;
    }
    (1.0 + 1.0 / (n * c * c)).powf(-0.5)
}

/// Everything entering the sensitivity formulas.
#[derive(Debug, Clone, Copy)]
pub struct SensitivityBudget {
    /// Phase-accumulation time (s).
    pub t_accu: f64,
    /// Initialization time (s).
    pub t_ini: f64,
    /// Readout time (s).
    pub t_read: f64,
    /// Remaining coherence at t_accu, in (0, 1].
    pub xi: f64,
    /// Readout fidelity in (0, 1].
    pub f_read: f64,
    /// Initialization fidelity in (0, 1].
    pub f_ini: f64,
    /// Target distance (m), spin-number modes only.
    pub distance: f64,
    /// Target gyromagnetic ratio (rad/s/T), spin-number modes only.
    pub gamma_target: f64,
    /// Target polarization, polarized spin-number mode only.
    pub polarization: f64,
}

impl SensitivityBudget {
    pub fn t_ir(&self) -> f64 {
        self.t_ini + self.t_read
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_accu > 0.0) || self.t_ini < 0.0 || self.t_read < 0.0 {
            return Err(Error::InvalidInput("times must be >= 0, t_accu > 0".into()));
        }
        for (name, v) in [("xi", self.xi), ("f_read", self.f_read), ("f_ini", self.f_ini)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidInput(format!("{name} must be in (0,1], got {v}")));
            }
        }
        Ok(())
    }

    fn duty_factor(&self) -> f64 {
        (1.0 + self.t_ir() / self.t_accu).sqrt()
    }

    fn infidelity_factor(&self) -> f64 {
        1.0 / (self.xi * self.f_read * self.f_ini)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensingMode {
    /// Statistical-fluctuation (variance) sensing, real-quadrature readout.
    Fluctuation,
    /// Polarized (mean-field) sensing, imaginary-quadrature readout.
    Polarization,
}

/// Magnetic-field sensitivity. Polarization mode returns T Hz^{-1/2};
/// fluctuation mode returns T^2 Hz^{-1/2}.
pub fn magnetic_sensitivity(
    budget: &SensitivityBudget,
    mode: SensingMode,
    consts: &PhysicalConstants,
) -> Result<f64> {
    budget.validate()?;
    let g = consts.gamma_nv.abs();
    let common = budget.infidelity_factor() * budget.duty_factor();
    Ok(match mode {
        SensingMode::Polarization => common / (g * budget.t_accu.sqrt()),
        SensingMode::Fluctuation => 2.0 * common / (g * g * budget.t_accu.powi(3).sqrt()),
    })
}

/// Spin-number sensitivity (spins Hz^{-1/2}); the polarized mode divides
/// by |P| and reports the sign of P separately in the CLI layer.
pub fn spin_number_sensitivity(
    budget: &SensitivityBudget,
    mode: SensingMode,
    consts: &PhysicalConstants,
) -> Result<f64> {
    budget.validate()?;
    if !(budget.distance > 0.0) || budget.gamma_target == 0.0 {
        return Err(Error::InvalidInput(
            "spin-number mode needs distance > 0 and gamma_target != 0".into(),
        ));
    }
    let kernel = 4.0 * PI * PI
        / (consts.mu0 * consts.hbar * consts.gamma_nv.abs() * budget.gamma_target.abs());
    let common = budget.infidelity_factor() * budget.duty_factor();
    Ok(match mode {
        SensingMode::Fluctuation => {
            kernel * kernel * budget.distance.powi(6) / budget.t_accu.powi(3).sqrt() * common
        }
        SensingMode::Polarization => {
            let p = budget.polarization.abs();
            if p == 0.0 {
                return Err(Error::InvalidInput(
                    "polarized spin-number sensitivity needs P != 0".into(),
                ));
            }
            2f64.sqrt() / 2.0 * kernel * budget.distance.powi(3) / budget.t_accu.sqrt() * common
                / p
        }
    })
}

/// Readout-time-limited scaling factor sqrt(T_read + T_read/(n_avg C^2));
/// the sensitivity is proportional to this when T_read >> T_accu.
pub fn readout_limited_scaling(photon: &PhotonModel, t_read: f64) -> Result<f64> {
    if t_read < 0.0 {
        return Err(Error::InvalidInput("T_read must be >= 0".into()));
    }
    let c = photon.contrast();
    let n = photon.n_avg();
    if c == 0.0 || n == 0.0 {
        return Err(Error::InvalidInput("need nonzero contrast and photons".into()));
    }
    Ok((t_read + t_read / (n * c * c)).sqrt())
}

/// Default margin above the readout noise required to call a single-shot
/// readout feasible.
pub const SINGLE_SHOT_DEFAULT_MARGIN: f64 = 10.0;

#[derive(Debug, Clone, Copy)]
pub struct SingleShotAssessment {
    pub feasible: bool,
    /// (g_s / 2 gamma) / sigma_R.
    pub ratio: f64,
    pub margin: f64,
}

/// Single-shot criterion: the accumulated signal g_s/(2 gamma) must exceed
/// the readout noise sigma_R by `margin` (default 10).
pub fn single_shot_feasible(
    g_s: f64,
    gamma_target_relax: f64,
    sigma_r: f64,
    margin: Option<f64>,
) -> Result<SingleShotAssessment> {
    if !(gamma_target_relax > 0.0) || !(sigma_r > 0.0) {
        return Err(Error::InvalidInput("need gamma > 0 and sigma_R > 0".into()));
    }
    let margin = margin.unwrap_or(SINGLE_SHOT_DEFAULT_MARGIN);
    let ratio = g_s.abs() / (2.0 * gamma_target_relax) / sigma_r;
    Ok(SingleShotAssessment {
        feasible: ratio >= margin,
        ratio,
        margin,
    })
}

/// Frequency precision of a heterodyne record: 1/(g_s T_exp sqrt(T_exp T2))
/// up to the clock-stability time T_LO, then 1/(g_s T_LO sqrt(T_exp T2)).
pub fn qdyne_precision(g_s: f64, t_exp: f64, t2: f64, t_lo: f64) -> Result<f64> {
    if !(g_s > 0.0 && t_exp > 0.0 && t2 > 0.0 && t_lo > 0.0) {
        return Err(Error::InvalidInput("all qdyne precision inputs must be > 0".into()));
    }
    let eff = t_exp.min(t_lo);
    Ok(1.0 / (g_s * eff * (t_exp * t2).sqrt()))
}

/// Gradient-based spatial resolution input.
#[derive(Debug, Clone, Copy)]
pub struct GradientModel {
    /// Field gradient magnitude along the projection direction (T/m).
    pub grad_b: f64,
    /// Interrogation time (s).
    pub t_s: f64,
    /// Target gyromagnetic ratio (rad/s/T).
    pub gamma: f64,
}

/// delta r = 2 pi / (t_s gamma |n . grad B|).
pub fn gradient_resolution(model: &GradientModel) -> Result<f64> {
    if !(model.grad_b > 0.0 && model.t_s > 0.0) || model.gamma == 0.0 {
        return Err(Error::InvalidInput("need positive gradient, time, gamma".into()));
    }
    Ok(2.0 * PI / (model.t_s * model.gamma.abs() * model.grad_b))
}

/// Magnitude of the gradient of the sensor's own dipolar field at distance
/// r and polar angle theta: (3 mu0 gamma_e hbar / 4 pi r^4)
/// sqrt(cos^2 theta (1 + 5 cos 2 theta)) (T/m).
pub fn nv_self_gradient(r: f64, theta: f64, consts: &PhysicalConstants) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidInput("distance must be > 0".into()));
    }
    let ang = theta.cos().powi(2) * (1.0 + 5.0 * (2.0 * theta).cos());
    let pref = 3.0 * consts.mu0 * consts.gamma_e.abs() * consts.hbar
        / (4.0 * PI * r.powi(4));
    Ok(pref * ang.max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy)]
pub enum PolarizationKind {
    /// Thermal: P = gamma B0 hbar / (2 kB T).
    Boltzmann { gamma: f64, b0: f64, temperature: f64 },
    /// Statistical: P_eff = 1/sqrt(N).
    Statistical { n_spins: f64 },
}

pub fn polarization(kind: PolarizationKind, consts: &PhysicalConstants) -> Result<f64> {
    match kind {
        PolarizationKind::Boltzmann {
            gamma,
            b0,
            temperature,
        } => {
            if !(temperature > 0.0) {
                return Err(Error::InvalidInput("temperature must be > 0".into()));
            }
            Ok(gamma.abs() * b0.abs() * consts.hbar / (2.0 * consts.kb * temperature))
        }
        PolarizationKind::Statistical { n_spins } => {
            if !(n_spins >= 1.0) {
                return Err(Error::InvalidInput("need N >= 1".into()));
            }
            Ok(1.0 / n_spins.sqrt())
        }
    }
}

/// Named budget profile for the ambient shallow-sensor worked example:
/// T_accu = 50 us, xi = 0.5, F_read = 0.04, F_ini = 0.7, T_ir = T_accu.
pub fn profile_paper_ambient_shallow() -> SensitivityBudget {
    SensitivityBudget {
        t_accu: 50e-6,
        t_ini: 25e-6,
        t_read: 25e-6,
        xi: 0.5,
        f_read: 0.04,
        f_ini: 0.7,
        distance: 10e-9,
        gamma_target: crate::constants::gamma_nuclear(crate::constants::Isotope::H1),
        polarization: 1.0,
    }
}

/// cw spectrum linewidth sqrt((1/pi T2eff)^2 + (4 T1eff/T2eff)(Omega/2pi)^2)
/// in Hz.
pub fn odmr_linewidth(omega_rabi: f64, t1_eff: f64, t2_eff: f64) -> Result<f64> {
    if !(t1_eff > 0.0 && t2_eff > 0.0) || omega_rabi < 0.0 {
        return Err(Error::InvalidInput("need positive effective times".into()));
    }
    let a = 1.0 / (PI * t2_eff);
    let b2 = 4.0 * t1_eff / t2_eff * (omega_rabi / (2.0 * PI)).powi(2);
    Ok((a * a + b2).sqrt())
}
