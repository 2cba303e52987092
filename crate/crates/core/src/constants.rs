//! Physical constants for the NV ground-state spin system.
//!
//! Internal unit for every energy/coupling is angular frequency (rad/s);
//! interfaces that speak Hz convert at the boundary. Field responses are
//! rad/s per tesla (gyromagnetic ratios, signed) and rad/s per V/m
//! (electric dipole responses).

use std::f64::consts::PI;

pub const TAU: f64 = 2.0 * PI;

/// Reference temperature (K) for the zero-field splitting.
pub const D_REFERENCE_TEMPERATURE: f64 = 298.0;

/// Nuclear species understood by the geometric hyperfine builders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Isotope {
    H1,
    H2,
    C13,
    N14,
    N15,
    F19,
    P31,
}

impl Isotope {
    pub fn symbol(self) -> &'static str {
        match self {
            Isotope::H1 => "1H",
            Isotope::H2 => "2H",
            Isotope::C13 => "13C",
            Isotope::N14 => "14N",
            Isotope::N15 => "15N",
            Isotope::F19 => "19F",
            Isotope::P31 => "31P",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        match s {
            "1H" | "H1" | "proton" => Some(Isotope::H1),
            "2H" | "H2" => Some(Isotope::H2),
            "13C" | "C13" => Some(Isotope::C13),
            "14N" | "N14" => Some(Isotope::N14),
            "15N" | "N15" => Some(Isotope::N15),
            "19F" | "F19" => Some(Isotope::F19),
            "31P" | "P31" => Some(Isotope::P31),
        _ => None,
        }
    }

    /// 2I for the isotope (1 for spin-1/2, 2 for spin-1).
    pub fn two_i(self) -> u8 {
        match self {
            Isotope::H2 | Isotope::N14 => 2,
            _ => 1,
        }
    }
}

/// Electron or nuclear target species.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Species {
    Electron,
    Nuclear(Isotope),
}

/// Constants of the sensor and its couplings. All frequencies in rad/s.
#[derive(Debug, Clone)]
pub struct PhysicalConstants {
    /// Zero-field splitting at the reference temperature (rad/s).
    pub d_zfs: f64,
    /// Temperature coefficient of the zero-field splitting (rad/s per K).
    pub c_t: f64,
    /// NV electron-spin gyromagnetic ratio (rad/s/T, signed).
    pub gamma_nv: f64,
    /// Free-electron gyromagnetic ratio (rad/s/T, signed).
    pub gamma_e: f64,
    /// Intrinsic 14N parallel hyperfine coupling (rad/s).
    pub a_par_n14: f64,
    /// Intrinsic 14N perpendicular hyperfine coupling (rad/s).
    pub a_perp_n14: f64,
    /// 14N nuclear quadrupole coupling (rad/s).
    pub p_quad_n14: f64,
    /// Parallel electric dipole response (rad/s per V/m).
    pub d_par: f64,
    /// Perpendicular electric dipole response (rad/s per V/m).
    pub d_perp: f64,
    /// Vacuum permeability (T·m/A).
    pub mu0: f64,
    /// Reduced Planck constant (J·s).
    pub hbar: f64,
    /// Boltzmann constant (J/K).
    pub kb: f64,
    /// Avogadro constant (1/mol).
    pub n_avogadro: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            d_zfs: TAU * 2.87e9,
            c_t: -TAU * 71.9e3,
            gamma_nv: -TAU * 28.04e9,
            gamma_e: -TAU * 28.03e9,
            a_par_n14: -TAU * 2.165e6,
            a_perp_n14: -TAU * 2.633e6,
            p_quad_n14: -TAU * 4.946e6,
            // 0.35 Hz·cm/V and 17 Hz·cm/V expressed per V/m.
            d_par: TAU * 0.35e-2,
            d_perp: TAU * 17.0e-2,
            mu0: 1.256_637_062_12e-6,
            hbar: 1.054_571_817e-34,
            kb: 1.380_649e-23,
            n_avogadro: 6.022_140_76e23,
        }
    }
}

impl PhysicalConstants {
    /// Zero-field splitting shifted to temperature `t` (K).
    pub fn d_at_temperature(&self, t: f64) -> f64 {
        self.d_zfs + self.c_t * (t - D_REFERENCE_TEMPERATURE)
    }

    /// Gyromagnetic ratio of a target species (rad/s/T, signed).
    pub fn gamma_of(&self, species: Species) -> f64 {
        match species {
            Species::Electron => self.gamma_e,
            Species::Nuclear(iso) => gamma_nuclear(iso),
        }
    }

    /// Dipolar prefactor mu0*gamma1*gamma2*hbar/(4 pi r^3) in rad/s (signed).
    pub fn dipolar_prefactor(&self, gamma1: f64, gamma2: f64, r: f64) -> f64 {
        self.mu0 * gamma1 * gamma2 * self.hbar / (4.0 * PI * r * r * r)
    }
}

/// Nuclear gyromagnetic ratios (rad/s/T, signed).
pub fn gamma_nuclear(iso: Isotope) -> f64 {
    TAU * match iso {
        Isotope::H1 => 42.577_478_5e6,
        Isotope::H2 => 6.535_902e6,
        Isotope::C13 => 10.708_4e6,
        Isotope::N14 => 3.077e6,
        Isotope::N15 => -4.316e6,
        Isotope::F19 => 40.077_6e6,
        Isotope::P31 => 17.235e6,
    }
}
