//! Sensor + target description and the Hamiltonian builders.
//!
//! The quantization axis for secular couplings is the direction of the
//! static field B0 (taken as +z when B0 = 0). Polar angles are measured
//! from that axis.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Vector3};

use crate::constants::{Isotope, PhysicalConstants, Species};
use crate::error::{Error, Result};
use crate::operators::{c, embed, identity, spin_operators, CMat, OperatorMatrix};

/// Default Hilbert-space cap: 3 x 2^8 states.
pub const DEFAULT_DIM_CAP: usize = 3 * 256;

/// Static fields, effective strain, and temperature at the sensor.
#[derive(Debug, Clone)]
pub struct FieldEnvironment {
    /// Static magnetic field (T), components in the NV frame.
    pub b0: Vector3<f64>,
    /// Electric field (V/m).
    pub e_field: Vector3<f64>,
    /// Effective strain, expressed as an equivalent electric field (V/m).
    pub strain: Vector3<f64>,
    /// Temperature (K).
    pub temperature: f64,
}

impl Default for FieldEnvironment {
    fn default() -> Self {
        FieldEnvironment {
            b0: Vector3::zeros(),
            e_field: Vector3::zeros(),
            strain: Vector3::zeros(),
            temperature: 298.0,
        }
    }
}

impl FieldEnvironment {
    pub fn validate(&self) -> Result<()> {
        let all = self
            .b0
            .iter()
            .chain(self.e_field.iter())
            .chain(self.strain.iter());
        for v in all {
            if !v.is_finite() {
                return Err(Error::InvalidInput("non-finite field component".into()));
            }
        }
        if !(self.temperature > 0.0) {
            return Err(Error::InvalidInput(format!(
                "temperature must be > 0, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    /// Effective electric field Pi = E + strain (V/m).
    pub fn pi_field(&self) -> Vector3<f64> {
        self.e_field + self.strain
    }

    /// Unit quantization axis: along B0, or +z at zero field.
    pub fn quantization_axis(&self) -> Vector3<f64> {
        let n = self.b0.norm();
        if n > 0.0 {
            self.b0 / n
        } else {
            Vector3::z()
        }
    }
}

/// Explicit secular hyperfine coupling, bypassing the geometric formula.
#[derive(Debug, Clone, Copy)]
pub struct HyperfineOverride {
    pub a_par: f64,
    pub a_perp: f64,
    pub a_iso: f64,
}

/// One target spin coupled to the sensor.
#[derive(Debug, Clone)]
pub struct TargetSpin {
    pub species: Species,
    /// 2I: 1 for spin-1/2, 2 for spin-1.
    pub two_i: u8,
    /// Displacement from the NV center (m).
    pub position: Vector3<f64>,
    pub hyperfine_override: Option<HyperfineOverride>,
    /// Optional symmetric quadrupole tensor (rad/s), spin >= 1 only.
    pub quadrupole: Option<[[f64; 3]; 3]>,
}

impl TargetSpin {
    pub fn electron_at(position: Vector3<f64>) -> Self {
        TargetSpin {
            species: Species::Electron,
            two_i: 1,
            position,
            hyperfine_override: None,
            quadrupole: None,
        }
    }

    pub fn nuclear_at(iso: Isotope, position: Vector3<f64>) -> Self {
        TargetSpin {
            species: Species::Nuclear(iso),
            two_i: iso.two_i(),
            position,
            hyperfine_override: None,
            quadrupole: None,
        }
    }

    pub fn dim(&self) -> usize {
        usize::from(self.two_i) + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.hyperfine_override.is_none() && self.position.norm() == 0.0 {
            return Err(Error::ZeroDisplacement);
        }
        Ok(())
    }
}

/// The NV sensor, its environment, and the targets it couples to.
#[derive(Debug, Clone)]
pub struct SpinSystem {
    pub constants: PhysicalConstants,
    pub environment: FieldEnvironment,
    /// Intrinsic nitrogen of the defect: 14, 15, or none.
    pub nv_nitrogen_isotope: Option<Isotope>,
    pub targets: Vec<TargetSpin>,
    pub dim_cap: usize,
}

impl Default for SpinSystem {
    fn default() -> Self {
        SpinSystem {
            constants: PhysicalConstants::default(),
            environment: FieldEnvironment::default(),
            nv_nitrogen_isotope: None,
            targets: Vec::new(),
            dim_cap: DEFAULT_DIM_CAP,
        }
    }
}

impl SpinSystem {
    /// 3 * prod(2I_j + 1) over nitrogen and targets.
    pub fn dim(&self) -> usize {
        let mut d = 3usize;
        if let Some(iso) = self.nv_nitrogen_isotope {
            d *= usize::from(iso.two_i()) + 1;
        }
        for t in &self.targets {
            d *= t.dim();
        }
        d
    }

    pub fn check_dim(&self) -> Result<()> {
        let dim = self.dim();
        if dim > self.dim_cap {
            return Err(Error::DimensionCap {
                dim,
                cap: self.dim_cap,
            });
        }
        Ok(())
    }

    /// Larmor frequency gamma_n * |B0| (rad/s, signed) of a nuclear isotope.
    pub fn larmor(&self, iso: Isotope) -> f64 {
        crate::constants::gamma_nuclear(iso) * self.environment.b0.norm()
    }
}

/// Full dipolar coupling between two moments: tensor A_ij (rad/s) with
/// H = sum_ij A_ij S_i I_j, plus the secular scalar A_zz measured along
/// `axis`. Gyromagnetic ratios are signed.
pub fn dipolar_coupling(
    r_vec: Vector3<f64>,
    gamma1: f64,
    gamma2: f64,
    axis: Vector3<f64>,
    consts: &PhysicalConstants,
) -> Result<(DMatrix<f64>, f64)> {
    let r = r_vec.norm();
    if r == 0.0 {
        return Err(Error::ZeroDisplacement);
    }
    let k = consts.dipolar_prefactor(gamma1, gamma2, r);
    let rhat = r_vec / r;
    // A_ij = k (delta_ij - 3 rhat_i rhat_j), expressed in the axis frame.
    let (ex, ey, ez) = axis_frame(axis);
    let basis = [ex, ey, ez];
    let mut a = DMatrix::<f64>::zeros(3, 3);
    for i in 0..3 {
        for j in 0..3 {
            let delta = if i == j { 1.0 } else { 0.0 };
            a[(i, j)] = k * (delta - 3.0 * basis[i].dot(&rhat) * basis[j].dot(&rhat));
        }
    }
    let secular = a[(2, 2)];
    Ok((a, secular))
}

/// Orthonormal frame (ex, ey, ez) with ez along `axis`.
pub fn axis_frame(axis: Vector3<f64>) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    let ez = axis.normalize();
    let seed = if ez.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let ex = (seed - ez * seed.dot(&ez)).normalize();
    let ey = ez.cross(&ex);
    (ex, ey, ez)
}

/// Secular hyperfine components (a_par, a_perp) of a target from geometry,
/// with the sensor's signed electron gamma. a_perp is a magnitude; the
/// azimuthal phase is not tracked.
pub fn hyperfine_components(
    target: &TargetSpin,
    axis: Vector3<f64>,
    consts: &PhysicalConstants,
) -> Result<(f64, f64)> {
    if let Some(o) = target.hyperfine_override {
        return Ok((o.a_par + o.a_iso, o.a_perp));
    }
    let gamma_t = consts.gamma_of(target.species);
    let (a, _) = dipolar_coupling(target.position, consts.gamma_e, gamma_t, axis, consts)?;
    let a_par = a[(2, 2)];
    let a_perp = a[(2, 0)].hypot(a[(2, 1)]);
    Ok((a_par, a_perp))
}

/// NV(+nitrogen) ground-state Hamiltonian (rad/s).
///
/// Contains the zero-field splitting (temperature shifted), the electron
/// Zeeman term, the intrinsic nitrogen hyperfine/quadrupole/Zeeman terms,
/// and the electric/strain response.
pub fn nv_ground_hamiltonian(system: &SpinSystem) -> Result<OperatorMatrix> {
    system.environment.validate()?;
    let consts = &system.constants;
    let env = &system.environment;

    let (sx, sy, sz) = spin_operators(2);
    let sx2 = &sx * &sx;
    let sy2 = &sy * &sy;
    let sz2 = &sz * &sz;

    let d = consts.d_at_temperature(env.temperature);
    let pi_f = env.pi_field();

    let mut h_nv: CMat = &sz2 * c(d)
        + &sx * c(consts.gamma_nv * env.b0.x)
        + &sy * c(consts.gamma_nv * env.b0.y)
        + &sz * c(consts.gamma_nv * env.b0.z);

    // Electric/strain response, NV frame.
    let eye3 = identity(3);
    h_nv += (&sz2 - &eye3 * c(2.0 / 3.0)) * c(consts.d_par * pi_f.z);
    h_nv += (&sy2 - &sx2) * c(consts.d_perp * pi_f.x);
    h_nv += (&sx * &sy + &sy * &sx) * c(consts.d_perp * pi_f.y);

    let h = match system.nv_nitrogen_isotope {
        None => h_nv,
        Some(iso) => {
            let two_i = iso.two_i();
            let (ix, iy, iz) = spin_operators(two_i);
            let ndim = usize::from(two_i) + 1;
            if 3 * ndim > system.dim_cap {
                return Err(Error::DimensionCap {
                    dim: 3 * ndim,
                    cap: system.dim_cap,
                });
            }
            let dims = [3usize, ndim];
            let mut h = embed(&h_nv, 0, &dims);
            // Intrinsic hyperfine: the tabulated 14N values are used for 14N;
            // 15N reuses them scaled by the gyromagnetic ratio as a default.
            let (a_par, a_perp, p_quad) = match iso {
                Isotope::N14 => (consts.a_par_n14, consts.a_perp_n14, consts.p_quad_n14),
                _ => {
                    let scale = crate::constants::gamma_nuclear(iso)
                        / crate::constants::gamma_nuclear(Isotope::N14);
                    (consts.a_par_n14 * scale, consts.a_perp_n14 * scale, 0.0)
                }
            };
            let szn = embed(&sz, 0, &dims) * embed(&iz, 1, &dims);
            let sxn = embed(&sx, 0, &dims) * embed(&ix, 1, &dims);
            let syn = embed(&sy, 0, &dims) * embed(&iy, 1, &dims);
            h += &szn * c(a_par) + (&sxn + &syn) * c(a_perp);
            if p_quad != 0.0 {
                let izf = embed(&iz, 1, &dims);
                h += &izf * &izf * c(p_quad);
            }
            let gn = crate::constants::gamma_nuclear(iso);
            h += embed(&ix, 1, &dims) * c(-gn * env.b0.x)
                + embed(&iy, 1, &dims) * c(-gn * env.b0.y)
                + embed(&iz, 1, &dims) * c(-gn * env.b0.z);
            h
        }
    };

    OperatorMatrix::hamiltonian(h)
}

/// Secular NV-nuclear Hamiltonian in the high-field interaction frame:
/// omega_L sum_j Iz_j + Sz sum_j (a_par_j Iz_j + a_perp_j Ix_j), on the
/// full NV(spin-1) x nuclei space. Nuclear-only targets.
pub fn secular_nmr_hamiltonian(system: &SpinSystem) -> Result<OperatorMatrix> {
    system.check_dim_targets_only()?;
    let axis = system.environment.quantization_axis();
    let b0 = system.environment.b0.norm();

    let mut dims = vec![3usize];
    for t in &system.targets {
        match t.species {
            Species::Nuclear(_) => dims.push(t.dim()),
            Species::Electron => {
                return Err(Error::InvalidInput(
                    "secular NMR form is nuclear-only; electron target given".into(),
                ))
            }
        }
    }
    let total: usize = dims.iter().product();
    if total > system.dim_cap {
        return Err(Error::DimensionCap {
            dim: total,
            cap: system.dim_cap,
        });
    }

    let (_, _, sz_nv) = spin_operators(2);
    let sz_full = embed(&sz_nv, 0, &dims);
    let mut h = CMat::zeros(total, total);
    for (j, t) in system.targets.iter().enumerate() {
        let iso = match t.species {
            Species::Nuclear(iso) => iso,
            Species::Electron => unreachable!(),
        };
        t.validate()?;
        let (ix, _, iz) = spin_operators(t.two_i);
        let slot = j + 1;
        let omega_l = crate::constants::gamma_nuclear(iso) * b0;
        let (a_par, a_perp) = hyperfine_components(t, axis, &system.constants)?;
        h += embed(&iz, slot, &dims) * c(omega_l);
        h += &sz_full * embed(&iz, slot, &dims) * c(a_par);
        h += &sz_full * embed(&ix, slot, &dims) * c(a_perp);
    }
    OperatorMatrix::hamiltonian(h)
}

impl SpinSystem {
    fn check_dim_targets_only(&self) -> Result<()> {
        let mut d = 3usize;
        for t in &self.targets {
            d *= t.dim();
        }
        if d > self.dim_cap {
            return Err(Error::DimensionCap {
                dim: d,
                cap: self.dim_cap,
            });
        }
        Ok(())
    }
}

/// Single- and double-quantum transition frequencies (Hz) under an
/// effective transverse/axial electric field, to second order.
///
/// `pi_perp` and `pi_par` are the transverse/axial components of
/// Pi = E + strain (V/m). Valid for |gamma_nv| Bz >> d_perp * Pi_perp; the
/// call is rejected when the ratio falls below `REGIME_RATIO`.
pub fn dq_transition_frequencies(
    env: &FieldEnvironment,
    consts: &PhysicalConstants,
    pi_perp: f64,
    pi_par: f64,
) -> Result<DqTransitions> {
    env.validate()?;
    let bz = env.b0.norm();
    let zeeman = consts.gamma_nv.abs() * bz;
    let e_perp = consts.d_perp * pi_perp;
    if e_perp != 0.0 && zeeman < REGIME_RATIO * e_perp.abs() {
        return Err(Error::RegimeViolation(format!(
            "|gamma_nv|*Bz = {:.3e} rad/s must exceed {} * d_perp*Pi_perp = {:.3e} rad/s",
            zeeman,
            REGIME_RATIO,
            REGIME_RATIO * e_perp.abs()
        )));
    }
    let d_hz = consts.d_at_temperature(env.temperature) / (2.0 * PI);
    let axial = consts.d_par * pi_par / (2.0 * PI);
    let bracket = if bz > 0.0 {
        consts.gamma_nv.abs() / (2.0 * PI) * bz + e_perp * e_perp / (4.0 * PI * consts.gamma_nv.abs() * bz)
    } else {
        // Zero-field: second-order term undefined; only valid with pi_perp = 0.
        0.0
    };
    Ok(DqTransitions {
        f_0_to_plus: d_hz + axial + bracket,
        f_0_to_minus: d_hz + axial - bracket,
        f_dq: 2.0 * bracket,
    })
}

/// Minimum ratio |gamma B| / (d_perp Pi_perp) accepted by
/// [`dq_transition_frequencies`].
pub const REGIME_RATIO: f64 = 10.0;

#[derive(Debug, Clone, Copy)]
pub struct DqTransitions {
    /// 0 -> +1 transition (Hz).
    pub f_0_to_plus: f64,
    /// 0 -> -1 transition (Hz).
    pub f_0_to_minus: f64,
    /// -1 -> +1 double-quantum transition (Hz).
    pub f_dq: f64,
}

pub fn magic_angle() -> f64 {
    (1.0 / 3f64.sqrt()).acos()
}
