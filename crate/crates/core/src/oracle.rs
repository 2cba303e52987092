//! Brute-force reference engine: exact unitary/stochastic evolution of
//! small spin systems, used to validate every analytic signal formula.
//!
//! Protocol simulations run in the interaction frame of the driven NV
//! transition: the NV is a two-level manifold (single- or double-quantum),
//! pulses are ideal instantaneous rotations, and free evolution uses the
//! secular coupling Hamiltonian. Stochastic fields enter as piecewise
//! constant B_z offsets.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::constants::Species;
use crate::error::{Error, Result};
use crate::operators::{
    c, ci, embed, hermiticity_defect, identity, spin_operators, CMat, STATE_TOL,
};
use crate::sequences::{Channel, PulseSequence, SeqElement};
use crate::system::{hyperfine_components, SpinSystem};

/// Pure state or density matrix with its dimension.
#[derive(Debug, Clone)]
pub enum QuantumState {
    StateVector(nalgebra::DVector<C64>),
    DensityMatrix(CMat),
}

impl QuantumState {
    pub fn dim(&self) -> usize {
        match self {
            QuantumState::StateVector(v) => v.len(),
            QuantumState::DensityMatrix(m) => m.nrows(),
        }
    }

    /// Norm (state vector) or trace (density matrix); must be 1 within
    /// `STATE_TOL`.
    pub fn weight(&self) -> f64 {
        match self {
            QuantumState::StateVector(v) => v.norm(),
            QuantumState::DensityMatrix(m) => {
                (0..m.nrows()).map(|i| m[(i, i)].re).sum::<f64>()
            }
        }
    }

    pub fn check(&self) -> Result<()> {
        if (self.weight() - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidInput(format!(
                "state weight {} deviates from 1",
                self.weight()
            )));
        }
        Ok(())
    }

    pub fn to_density(&self) -> CMat {
        match self {
            QuantumState::StateVector(v) => v * v.adjoint(),
            QuantumState::DensityMatrix(m) => m.clone(),
        }
    }
}

/// exp(-i H t) via eigendecomposition of the Hermitian H.
pub fn expm_hermitian(h: &CMat, t: f64) -> Result<CMat> {
    let (asym, scale) = hermiticity_defect(h);
    if asym > 1e-12 * scale.max(1e-300) {
        return Err(Error::NonHermitian {
            max_asym: asym,
            scale,
        });
    }
    let eig = h.clone().symmetric_eigen();
    let dim = h.nrows();
    let mut phases = CMat::zeros(dim, dim);
    for k in 0..dim {
        phases[(k, k)] = C64::from_polar(1.0, -eig.eigenvalues[k] * t);
    }
    Ok(&eig.eigenvectors * phases * eig.eigenvectors.adjoint())
}

/// state <- exp(-i H t) state (conjugated for density matrices).
pub fn propagate(state: &QuantumState, h: &CMat, t: f64) -> Result<QuantumState> {
    if t < 0.0 {
        return Err(Error::InvalidInput("negative duration".into()));
    }
    state.check()?;
    let u = expm_hermitian(h, t)?;
    Ok(apply_unitary(state, &u))
}

pub fn apply_unitary(state: &QuantumState, u: &CMat) -> QuantumState {
    match state {
        QuantumState::StateVector(v) => QuantumState::StateVector(u * v),
        QuantumState::DensityMatrix(m) => QuantumState::DensityMatrix(u * m * u.adjoint()),
    }
}

/// NV manifold addressed by the control channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NvManifold {
    /// ms in {0, 1}
    SingleQuantum,
    /// ms in {-1, +1}
    DoubleQuantum,
}

impl NvManifold {
    /// ms values of the two manifold levels (level 0, level 1).
    pub fn ms_values(self) -> (f64, f64) {
        match self {
            NvManifold::SingleQuantum => (0.0, 1.0),
            NvManifold::DoubleQuantum => (-1.0, 1.0),
        }
    }
}

/// One target spin in the interaction frame.
#[derive(Debug, Clone)]
pub struct FrameTarget {
    /// Coefficient of I_z (rad/s): Larmor frequency, or RF-frame detuning
    /// for a driven target.
    pub larmor: f64,
    /// Conditional coupling ms * (a_par I_z + a_perp I_x) (rad/s).
    pub a_par: f64,
    pub a_perp: f64,
    /// Isotropic couplings J_jk I_j . I_k to later targets (rad/s).
    pub j_couplings: Vec<(usize, f64)>,
}

/// Interaction-frame model evolved by the oracle: a two-level NV manifold
/// plus spin-1/2 targets.
#[derive(Debug, Clone)]
pub struct FrameSystem {
    pub manifold: NvManifold,
    /// Detuning of the driven NV transition (rad/s).
    pub nv_detuning: f64,
    pub targets: Vec<FrameTarget>,
}

impl FrameSystem {
    pub fn new(manifold: NvManifold) -> Self {
        FrameSystem {
            manifold,
            nv_detuning: 0.0,
            targets: Vec::new(),
        }
    }

    /// Secular interaction frame of a [`SpinSystem`]: Larmor frequencies
    /// and hyperfine components are derived from geometry (or overrides);
    /// electron targets keep only the conditional secular coupling, with
    /// the synchronous-flip convention placing it on a_par.
    pub fn from_spin_system(system: &SpinSystem, manifold: NvManifold) -> Result<Self> {
        let axis = system.environment.quantization_axis();
        let b0 = system.environment.b0.norm();
        let mut fs = FrameSystem::new(manifold);
        for t in &system.targets {
            t.validate()?;
            let (a_par, a_perp) = hyperfine_components(t, axis, &system.constants)?;
            let larmor = match t.species {
                Species::Nuclear(iso) => crate::constants::gamma_nuclear(iso) * b0,
                // driven electron targets sit in their own resonant frame
                Species::Electron => 0.0,
            };
            match t.species {
                Species::Nuclear(_) => fs.targets.push(FrameTarget {
                    larmor,
                    a_par,
                    a_perp,
                    j_couplings: Vec::new(),
                }),
                Species::Electron => {
                    // secular electron-electron coupling: only the
                    // ms * b * S_z term survives both drives
                    let (_, b_sec) = crate::system::dipolar_coupling(
                        t.position,
                        system.constants.gamma_nv,
                        system.constants.gamma_e,
                        axis,
                        &system.constants,
                    )?;
                    fs.targets.push(FrameTarget {
                        larmor,
                        a_par: b_sec,
                        a_perp: 0.0,
                        j_couplings: Vec::new(),
                    });
                }
            }
        }
        fs.check_dim()?;
        Ok(fs)
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![2usize];
        d.extend(self.targets.iter().map(|_| 2usize));
        d
    }

    pub fn dim(&self) -> usize {
        2usize << self.targets.len()
    }

    pub fn check_dim(&self) -> Result<()> {
        if self.dim() > crate::system::DEFAULT_DIM_CAP {
            return Err(Error::DimensionCap {
                dim: self.dim(),
                cap: crate::system::DEFAULT_DIM_CAP,
            });
        }
        Ok(())
    }

    /// Diagonal ms operator of the manifold on the NV slot.
    fn ms_operator(&self) -> CMat {
        let (m0, m1) = self.manifold.ms_values();
        let mut m = CMat::zeros(2, 2);
        m[(0, 0)] = c(m0);
        m[(1, 1)] = c(m1);
        m
    }

    /// Free-evolution Hamiltonian (rad/s).
    pub fn free_hamiltonian(&self) -> CMat {
        let dims = self.dims();
        let total: usize = dims.iter().product();
        let mut h = CMat::zeros(total, total);
        let ms = self.ms_operator();
        let (sx, _, sz) = spin_operators(1);
        // NV detuning acts on the upper manifold level
        let mut upper = CMat::zeros(2, 2);
        upper[(1, 1)] = c(1.0);
        h += embed(&upper, 0, &dims) * c(self.nv_detuning);
        let ms_full = embed(&ms, 0, &dims);
        for (j, t) in self.targets.iter().enumerate() {
            let slot = j + 1;
            h += embed(&sz, slot, &dims) * c(t.larmor);
            h += &ms_full * embed(&sz, slot, &dims) * c(t.a_par);
            h += &ms_full * embed(&sx, slot, &dims) * c(t.a_perp);
            for &(k, jc) in &t.j_couplings {
                let (ox, oy, oz) = spin_operators(1);
                let slot_k = k + 1;
                h += embed(&ox, slot, &dims) * embed(&ox, slot_k, &dims) * c(jc);
                h += embed(&oy, slot, &dims) * embed(&oy, slot_k, &dims) * c(jc);
                h += embed(&oz, slot, &dims) * embed(&oz, slot_k, &dims) * c(jc);
            }
        }
        h
    }

    /// Initial state: NV in manifold level 0, nuclear targets maximally
    /// mixed (statistical-fluctuation regime).
    pub fn initial_state(&self) -> QuantumState {
        let dims = self.dims();
        let total: usize = dims.iter().product();
        let mut nv = CMat::zeros(2, 2);
        nv[(0, 0)] = c(1.0);
        let mut rho = nv;
        for _ in &self.targets {
            rho = rho.kronecker(&(identity(2).scale(0.5)));
        }
        debug_assert_eq!(rho.nrows(), total);
        QuantumState::DensityMatrix(rho)
    }

    /// Initial state with explicit target polarizations along +z
    /// (p in [-1, 1] is the Bloch z component).
    pub fn initial_state_polarized(&self, polarizations: &[f64]) -> QuantumState {
        let mut nv = CMat::zeros(2, 2);
        nv[(0, 0)] = c(1.0);
        let mut rho = nv;
        for (j, _) in self.targets.iter().enumerate() {
            let pz = polarizations.get(j).copied().unwrap_or(0.0);
            let mut r = CMat::zeros(2, 2);
            r[(0, 0)] = c((1.0 + pz) / 2.0);
            r[(1, 1)] = c((1.0 - pz) / 2.0);
            rho = rho.kronecker(&r);
        }
        QuantumState::DensityMatrix(rho)
    }

    /// Rotation generated by a pulse on one channel.
    pub fn pulse_unitary(&self, pulse: &crate::sequences::Pulse) -> Result<CMat> {
        let dims = self.dims();
        let (sx, sy, _) = spin_operators(1);
        let gen = &sx * c(pulse.phase.cos()) + &sy * c(pulse.phase.sin());
        let slot = match pulse.channel {
            Channel::NvSq => {
                if self.manifold != NvManifold::SingleQuantum {
                    return Err(Error::UnknownChannel("nv_sq (system is DQ)".into()));
                }
                0
            }
            Channel::NvDq => {
                if self.manifold != NvManifold::DoubleQuantum {
                    return Err(Error::UnknownChannel("nv_dq (system is SQ)".into()));
                }
                0
            }
            Channel::Target(j) => {
                if j >= self.targets.len() {
                    return Err(Error::UnknownChannel(format!("target{j}")));
                }
                j + 1
            }
        };
        let g = embed(&gen, slot, &dims);
        // exp(-i angle (n.S)) for spin-1/2: cos(a/2) I - 2 i sin(a/2) (n.S)
        let half = pulse.angle / 2.0;
        Ok(identity(g.nrows()).scale(half.cos()) + g * ci(-2.0 * half.sin()))
    }
}

/// Apply one ideal pulse to a state.
pub fn apply_pulse(
    state: &QuantumState,
    frame: &FrameSystem,
    pulse: &crate::sequences::Pulse,
) -> Result<QuantumState> {
    let u = frame.pulse_unitary(pulse)?;
    Ok(apply_unitary(state, &u))
}

/// Readout quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Readout {
    Real,
    Imag,
}

/// Run a pulse sequence on the interaction-frame system and return the
/// readout probability p = (1 + Re xi)/2 or (1 + Im xi)/2.
///
/// The sequence's leading pi/2 pulse prepares the coherence; its trailing
/// pi/2 pulse is the readout pulse, whose phase is set by `readout`
/// relative to the preparation phase (Real: chi + pi, Imag: chi - pi/2).
/// The returned value is the population of the manifold ground level.
pub fn run_sequence(
    frame: &FrameSystem,
    seq: &PulseSequence,
    readout: Readout,
) -> Result<f64> {
    run_sequence_from(frame, &frame.initial_state(), seq, readout)
}

pub fn run_sequence_from(
    frame: &FrameSystem,
    initial: &QuantumState,
    seq: &PulseSequence,
    readout: Readout,
) -> Result<f64> {
    frame.check_dim()?;
    let h = frame.free_hamiltonian();
    let mut state = initial.clone();
    state.check()?;

    // locate the bracketing pi/2 pulses on the NV channel
    let nv_pulse_indices: Vec<usize> = seq
        .elements
        .iter()
        .enumerate()
        .filter_map(|(k, e)| match e {
            SeqElement::Pulse(pl)
                if matches!(pl.channel, Channel::NvSq | Channel::NvDq) =>
            {
                Some(k)
            }
            _ => None,
        })
        .collect();
    let first = *nv_pulse_indices.first().ok_or_else(|| {
        Error::InvalidInput("sequence has no NV pulse".into())
    })?;
    let last = *nv_pulse_indices.last().unwrap();
    let prep_phase = match &seq.elements[first] {
        SeqElement::Pulse(pl) if (pl.angle - std::f64::consts::FRAC_PI_2).abs() < 1e-9 => {
            pl.phase
        }
        _ => {
            return Err(Error::InvalidInput(
                "sequence must start with a pi/2 NV pulse".into(),
            ))
        }
    };
    let has_readout_pulse = last != first
        && matches!(&seq.elements[last],
            SeqElement::Pulse(pl) if (pl.angle - std::f64::consts::FRAC_PI_2).abs() < 1e-9);

    for (k, e) in seq.elements.iter().enumerate() {
        if has_readout_pulse && k == last {
            break; // replaced by the quadrature readout pulse below
        }
        match e {
            SeqElement::Wait(d) => {
                if *d < 0.0 {
                    return Err(Error::InvalidInput("negative wait".into()));
                }
                if *d > 0.0 {
                    state = propagate(&state, &h, *d)?;
                }
            }
            SeqElement::Pulse(pl) => {
                state = apply_pulse(&state, frame, pl)?;
            }
        }
    }

    let readout_phase = match readout {
        Readout::Real => prep_phase + std::f64::consts::PI,
        Readout::Imag => prep_phase - std::f64::consts::FRAC_PI_2,
    };
    let read_pulse = crate::sequences::Pulse {
        channel: match frame.manifold {
            NvManifold::SingleQuantum => Channel::NvSq,
            NvManifold::DoubleQuantum => Channel::NvDq,
        },
        phase: readout_phase,
        angle: std::f64::consts::FRAC_PI_2,
    };
    state = apply_pulse(&state, frame, &read_pulse)?;
    state.check()?;

    // population of the manifold ground level
    let rho = state.to_density();
    let dims = frame.dims();
    let mut proj = CMat::zeros(2, 2);
    proj[(0, 0)] = c(1.0);
    let p_full = embed(&proj, 0, &dims);
    let val = (p_full * rho).diagonal().iter().map(|z| z.re).sum::<f64>();
    Ok(val)
}

/// Ornstein-Uhlenbeck process for a fluctuating field offset (tesla).
/// Stationary variance sigma^2, correlation time tau_c; exact
/// discretization, so any step size is unbiased.
#[derive(Debug, Clone, Copy)]
pub struct OrnsteinUhlenbeck {
    pub sigma: f64,
    pub tau_c: f64,
}

impl OrnsteinUhlenbeck {
    /// Draw the stationary initial value.
    pub fn initial<R: rand::Rng>(&self, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.sigma * z
    }

    /// Advance by dt: exact AR(1) update.
    pub fn step<R: rand::Rng>(&self, b: f64, dt: f64, rng: &mut R) -> f64 {
        let decay = (-dt / self.tau_c).exp();
        let z: f64 = StandardNormal.sample(rng);
        b * decay + self.sigma * (1.0 - decay * decay).sqrt() * z
    }
}

/// A sampled noise trajectory: piecewise-constant field offsets.
#[derive(Debug, Clone)]
pub struct NoiseTrajectory {
    pub samples: Vec<f64>,
    pub dt: f64,
    pub process: OrnsteinUhlenbeck,
    pub seed: u64,
}

pub fn sample_trajectory(
    process: OrnsteinUhlenbeck,
    duration: f64,
    dt: f64,
    seed: u64,
) -> NoiseTrajectory {
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let n = (duration / dt).ceil() as usize + 1;
    let mut samples = Vec::with_capacity(n);
    let mut b = process.initial(&mut rng);
    samples.push(b);
    for _ in 1..n {
        b = process.step(b, dt, &mut rng);
        samples.push(b);
    }
    NoiseTrajectory {
        samples,
        dt,
        process,
        seed,
    }
}

/// Monte-Carlo estimate of the coherence xi(t) = <exp(i phi)> for a
/// toggled phase accumulation phi = gamma * integral y(s) B(s) ds.
#[derive(Debug, Clone, Copy)]
pub struct CoherenceEstimate {
    pub xi: C64,
    pub std_error: f64,
    pub n_traj: usize,
}

/// Deterministic per-trajectory seed derived from (seed, index).
fn traj_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 of seed ^ golden-ratio-scrambled index
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Estimate xi for a pulse sequence under an OU field offset coupled with
/// gyromagnetic ratio `gamma` (rad/s/T). Trajectories are independent with
/// per-index seeds; the reduction is by index, so results are bit-identical
/// for any worker count.
pub fn monte_carlo_coherence(
    seq: &PulseSequence,
    process: OrnsteinUhlenbeck,
    gamma: f64,
    n_traj: usize,
    seed: u64,
) -> Result<CoherenceEstimate> {
    if n_traj < 100 {
        return Err(Error::InvalidInput(format!(
            "need at least 100 trajectories, got {n_traj}"
        )));
    }
    let segs = seq.toggling()?;
    let dt = process.tau_c / 20.0;
    let phases: Vec<C64> = (0..n_traj as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(traj_seed(seed, i));
            let mut b = process.initial(&mut rng);
            let mut phi = 0.0f64;
            for &(t0, t1, sign) in &segs {
                let mut t = t0;
                while t < t1 - 1e-18 * seq.total_t.max(1.0) {
                    let step = dt.min(t1 - t);
                    phi += sign * gamma * b * step;
                    b = process.step(b, step, &mut rng);
                    t += step;
                }
            }
            C64::from_polar(1.0, phi)
        })
        .collect();
    let sum: C64 = phases.iter().sum();
    let mean = sum / c(n_traj as f64);
    let var: f64 = phases
        .iter()
        .map(|z| (z - mean).norm_sqr())
        .sum::<f64>()
        / (n_traj as f64 - 1.0);
    Ok(CoherenceEstimate {
        xi: mean,
        std_error: (var / n_traj as f64).sqrt(),
        n_traj,
    })
}
