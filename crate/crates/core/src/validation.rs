//! Oracle-vs-analytic validation suite.
//!
//! Every check pins an analytic result against an independent reference:
//! a closed form evaluated a second way, a brute-force lattice sum, or the
//! density-matrix/Monte-Carlo oracle. Tolerances are stated inline next to
//! each check. The CLI `validate` command and the acceptance test target
//! both run this suite.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::Vector3;

use crate::config::DEFAULT_SEED;
use crate::constants::{PhysicalConstants, TAU};
use crate::error::Result;
use crate::metrology::{
    gradient_resolution, magnetic_sensitivity, profile_paper_ambient_shallow, readout_fidelity,
    GradientModel, PhotonModel, SensingMode,
};
use crate::noise::{
    chi, relaxometry_population, spectral_overlap, NoiseSpectrum,
};
use crate::oracle::{
    monte_carlo_coherence, FrameSystem, FrameTarget, NvManifold, Readout,
};
use crate::protocols::{
    dd_projection_product, deer_oracle, deer_signal, fit_decay_rate, half_space_integral_sums,
    half_space_lattice_sums, qdyne_fit_frequency, qdyne_peak, qdyne_simulate, qdyne_spectrum,
    rotated_axial_tensor, spectrum_amplitude_at, two_d_nmr, weak_measurement, zero_field_hamiltonian,
    zf_epr, SurfaceOrientation, TwoDNmrConfig,
};
use crate::sequences::{self, filter_function_closed, filter_function_numeric, FilterShape};

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub id: usize,
    pub name: String,
    pub passed: bool,
    /// Worst observed deviation in the check's own metric.
    pub value: f64,
    /// Threshold the deviation is held against.
    pub threshold: f64,
    pub detail: String,
    pub runtime_s: f64,
    /// Stated runtime budget (s).
    pub budget_s: f64,
}

impl CheckResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:28} value={:<12.4e} threshold={:<10.3e} {:>6.2}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.threshold,
            self.runtime_s,
            self.detail
        )
    }
}

fn run_check(
    id: usize,
    name: &str,
    budget_s: f64,
    body: impl FnOnce() -> Result<(f64, f64, String)>,
) -> CheckResult {
    let start = Instant::now();
    let outcome = body();
    let runtime_s = start.elapsed().as_secs_f64();
    match outcome {
        Ok((value, threshold, detail)) => CheckResult {
            id,
            name: name.into(),
            passed: value <= threshold && runtime_s <= budget_s,
            value,
            threshold,
            detail,
            runtime_s,
            budget_s,
        },
        Err(e) => CheckResult {
            id,
            name: name.into(),
            passed: false,
            value: f64::INFINITY,
            threshold: 0.0,
            detail: format!("error: {e}"),
            runtime_s,
            budget_s,
        },
    }
}

/// Run the full suite. `quick` trims trajectory counts and grids while
/// keeping every check, for the CLI `--quick` path.
pub fn run_all(quick: bool, seed: u64) -> Vec<CheckResult> {
    let consts = PhysicalConstants::default();
    vec![
        check_readout_fidelity(),
        check_gradient_resolution(&consts),
        check_sensitivity_profile(&consts),
        check_filter_equivalence(quick),
        check_decoherence_oracle(&consts, quick, seed),
        check_deer(&consts),
        check_dd_nmr(),
        check_ensemble_sums(quick),
        check_zf_epr(quick, seed),
        check_qdyne(&consts, quick, seed),
        check_weak_measurement(),
        check_relaxometry(&consts),
        check_two_d_nmr(),
    ]
}

/// 1. F_read(n_avg = 0.05, C = 0.18) = 0.040 +- 0.002.
fn check_readout_fidelity() -> CheckResult {
    run_check(1, "readout-fidelity", 1e-3, || {
        let p = PhotonModel::from_avg_contrast(0.05, 0.18)?;
        let f = readout_fidelity(&p);
        Ok(((f - 0.040).abs(), 0.002, format!("F_read = {f:.5}")))
    })
}

/// 2. delta r (1.2 mT/nm, 120 ns, electron) = 2.5 A +- 2%.
fn check_gradient_resolution(consts: &PhysicalConstants) -> CheckResult {
    run_check(2, "gradient-resolution", 1e-3, || {
        let m = GradientModel {
            grad_b: 1.2e6,
            t_s: 120e-9,
            gamma: consts.gamma_e,
        };
        let dr = gradient_resolution(&m)?;
        let rel = (dr - 2.5e-10).abs() / 2.5e-10;
        Ok((rel, 0.02, format!("delta r = {:.4} A", dr * 1e10)))
    })
}

/// 3. Ambient shallow profile: eta_pol within x2 of 0.1 uT, eta_fluc
/// within x2 of (0.2 uT)^2. The factor-two window for the fluctuation
/// mode is applied to the equivalent field amplitude sqrt(eta) since the
/// reference value is quoted as a squared amplitude.
fn check_sensitivity_profile(consts: &PhysicalConstants) -> CheckResult {
    run_check(3, "sensitivity-profile", 1e-3, || {
        let b = profile_paper_ambient_shallow();
        let pol = magnetic_sensitivity(&b, SensingMode::Polarization, consts)?;
        let fluc = magnetic_sensitivity(&b, SensingMode::Fluctuation, consts)?;
        let dev_pol = (pol / 0.1e-6).log2().abs();
        let dev_fluc = (fluc.sqrt() / 0.2e-6).log2().abs();
        Ok((
            dev_pol.max(dev_fluc),
            1.0,
            format!(
                "eta_pol = {:.3e} T/rtHz, eta_fluc = {:.3e} T^2/rtHz (sqrt {:.3e})",
                pol,
                fluc,
                fluc.sqrt()
            ),
        ))
    })
}

/// 4. Numeric toggling-function filter vs closed forms, N <= 64,
/// 1000 frequencies per family, max |deviation| <= 1e-8.
fn check_filter_equivalence(quick: bool) -> CheckResult {
    run_check(4, "filter-equivalence", 10.0, || {
        let t = 1e-3;
        let n_pts = if quick { 300 } else { 1000 };
        let mut worst = 0.0f64;
        let mut worst_kind = String::new();
        let cases: Vec<(String, crate::sequences::PulseSequence, FilterShape)> = vec![
            ("ramsey".into(), sequences::ramsey(t)?, FilterShape::Ramsey),
            ("hahn".into(), sequences::hahn(t)?, FilterShape::Hahn),
            ("pdd-7".into(), sequences::pdd(7, t)?, FilterShape::Pdd { n: 7 }),
            ("pdd-63".into(), sequences::pdd(63, t)?, FilterShape::Pdd { n: 63 }),
            ("cpmg-16".into(), sequences::cpmg(16, t)?, FilterShape::Cpmg { n: 16 }),
            ("cpmg-64".into(), sequences::cpmg(64, t)?, FilterShape::Cpmg { n: 64 }),
            ("udd-9".into(), sequences::udd(9, t)?, FilterShape::Udd { n: 9 }),
            ("udd-64".into(), sequences::udd(64, t)?, FilterShape::Udd { n: 64 }),
        ];
        for (name, seq, shape) in &cases {
            let n_eff = seq.n_pi.max(1) as f64;
            let w_max = 20.0 * n_eff / t;
            for k in 0..n_pts {
                let w = w_max * (k as f64 + 0.5) / n_pts as f64;
                let fc = filter_function_closed(*shape, w, t)?;
                let fnum = filter_function_numeric(seq, w)?;
                let dev = (fc - fnum).abs();
                if dev > worst {
                    worst = dev;
                    worst_kind = name.clone();
                }
            }
        }
        Ok((worst, 1e-8, format!("worst deviation in {worst_kind}")))
    })
}

/// 5. OU Monte Carlo vs the decoherence quadrature for Ramsey and Hahn at
/// 20 grid times within 5%, and the flat-spectrum closed form to 1%; the
/// toggling-function identity integral F/w^2 = pi t is also verified
/// numerically to 1%.
fn check_decoherence_oracle(consts: &PhysicalConstants, quick: bool, seed: u64) -> CheckResult {
    run_check(5, "decoherence-oracle", 60.0, || {
        let n_traj = if quick { 4_000 } else { 10_000 };
        let gamma = consts.gamma_nv;
        let b = 2e-6;
        let tau_c = 4e-6;
        let spec = NoiseSpectrum::new(gamma).lorentzian(b, tau_c, 0.0);
        let procs = spec.matching_ou_processes()?;
        let mut worst_rel = 0.0f64;
        for (shape, build, t_max) in [
            (
                FilterShape::Ramsey,
                sequences::ramsey as fn(f64) -> Result<sequences::PulseSequence>,
                8e-6,
            ),
            (
                FilterShape::Hahn,
                sequences::hahn as fn(f64) -> Result<sequences::PulseSequence>,
                16e-6,
            ),
        ] {
            for k in 1..=20 {
                let t = t_max * k as f64 / 20.0;
                let seq = build(t)?;
                let mc = monte_carlo_coherence(&seq, procs[0], gamma, n_traj, seed)?;
                let xi = (-chi(&spec, shape, t)? / 2.0).exp();
                worst_rel = worst_rel.max((mc.xi.re - xi).abs() / xi);
            }
        }
        // flat-spectrum closed form
        let level = 1.0e5;
        let white = NoiseSpectrum::new(gamma).white(level);
        let mut worst_white = 0.0f64;
        for k in 1..=10 {
            let t = 2e-5 * k as f64 / 10.0;
            let xi = (-chi(&white, FilterShape::Ramsey, t)? / 2.0).exp();
            let expect = (-level * t / 4.0).exp();
            worst_white = worst_white.max((xi - expect).abs() / expect);
        }
        // numeric check of the identity behind the flat-spectrum form
        let t = 1e-5;
        let mut acc = 0.0;
        let n_steps = 400_000usize;
        let w_hi = 4000.0 / t;
        for k in 0..n_steps {
            let w = w_hi * (k as f64 + 0.5) / n_steps as f64;
            acc += filter_function_closed(FilterShape::Ramsey, w, t)? / (w * w) * (w_hi / n_steps as f64);
        }
        acc += 2.0 / w_hi; // tail of the envelope average
        let ident_rel = (2.0 * acc - PI * t).abs() / (PI * t);
        let worst = worst_rel.max(worst_white / 0.01 * 0.05).max(ident_rel / 0.01 * 0.05);
        Ok((
            worst,
            0.05,
            format!(
                "mc-vs-quadrature {worst_rel:.3e}, white {worst_white:.3e}, identity {ident_rel:.3e}"
            ),
        ))
    })
}

/// 6. DEER product-of-cosines vs density-matrix evolution <= 1e-6 for 1-3
/// targets; magic-angle secular coupling vanishes to 1e-12 of the
/// prefactor.
fn check_deer(consts: &PhysicalConstants) -> CheckResult {
    run_check(6, "deer-analytic-vs-oracle", 10.0, || {
        let nus = [TAU * 0.11e6, TAU * 0.23e6, TAU * 0.057e6];
        let mut worst = 0.0f64;
        for n_targets in 1..=3 {
            let active = &nus[..n_targets];
            for (n, tau) in [(4usize, 0.9e-6), (8, 0.45e-6), (16, 0.6e-6)] {
                let analytic = deer_signal(active, n, tau);
                let doubled: Vec<f64> = active.iter().map(|v| 2.0 * v).collect();
                let oracle = deer_oracle(&doubled, n, tau)?;
                worst = worst.max((analytic - oracle).abs());
            }
        }
        // magic angle
        let theta = crate::system::magic_angle();
        let r = 8e-9;
        let rv = Vector3::new(theta.sin(), 0.0, theta.cos()) * r;
        let (_, sec) = crate::system::dipolar_coupling(
            rv,
            consts.gamma_nv,
            consts.gamma_e,
            Vector3::z(),
            consts,
        )?;
        let peak = consts
            .dipolar_prefactor(consts.gamma_nv, consts.gamma_e, r)
            .abs();
        let magic = sec.abs() / peak;
        let worst_all = worst.max(magic / 1e-12 * 1e-6);
        Ok((
            worst_all,
            1e-6,
            format!("signal dev {worst:.2e}, magic-angle residual {magic:.2e}"),
        ))
    })
}

/// 7. Single-nucleus decoupling resonance: dip within one sweep step of
/// pi/(omega_L + a_par/2); small-angle depth within 5%; the projection
/// identity against the oracle to 1e-10.
fn check_dd_nmr() -> CheckResult {
    run_check(7, "dd-nmr-resonance", 30.0, || {
        let omega_l = TAU * 2e6;
        let a_perp = TAU * 10e3;
        let n = 32;
        let target = FrameTarget {
            larmor: omega_l,
            a_par: 0.0,
            a_perp,
            j_couplings: vec![],
        };
        let tau_res = sequences::resonance_spacing(omega_l, 0.0);
        let mut frame = FrameSystem::new(NvManifold::SingleQuantum);
        frame.targets.push(target.clone());
        let n_grid = 49;
        let mut taus = Vec::with_capacity(n_grid);
        let mut probs = Vec::with_capacity(n_grid);
        for k in 0..n_grid {
            let tau = tau_res * (0.94 + 0.12 * k as f64 / (n_grid - 1) as f64);
            let seq = sequences::cpmg(n, n as f64 * tau)?;
            let p = crate::oracle::run_sequence(&frame, &seq, Readout::Real)?;
            taus.push(tau);
            probs.push(p);
        }
        let step = tau_res * 0.12 / (n_grid - 1) as f64;
        let k_min = (1..n_grid - 1)
            .min_by(|&a, &b| probs[a].partial_cmp(&probs[b]).unwrap())
            .unwrap();
        // parabolic sub-grid refinement of the dip location
        let denom = probs[k_min - 1] - 2.0 * probs[k_min] + probs[k_min + 1];
        let frac = if denom.abs() > 0.0 {
            0.5 * (probs[k_min - 1] - probs[k_min + 1]) / denom
        } else {
            0.0
        };
        let tau_dip = taus[k_min] + frac.clamp(-0.5, 0.5) * step;
        let best = (tau_dip, probs[k_min]);
        let dip_steps = (tau_dip - tau_res).abs() / step;
        // depth vs small-angle formula
        let phi = a_perp * n as f64 * best.0 / PI;
        let depth = 1.0 - best.1;
        let depth_pred = 0.25 * phi * phi;
        let depth_rel = (depth - depth_pred).abs() / depth_pred;
        // projection identity at exact resonance
        let seq = sequences::cpmg(n, n as f64 * tau_res)?;
        let oracle = crate::oracle::run_sequence(&frame, &seq, Readout::Real)?;
        let product = dd_projection_product(&[target], NvManifold::SingleQuantum, n, tau_res)?;
        let ident = (oracle - product).abs();
        let worst = (dip_steps / 1.0)
            .max(depth_rel / 0.05)
            .max(ident / 1e-10);
        Ok((
            worst,
            1.0,
            format!(
                "dip offset {dip_steps:.2} steps, depth rel {depth_rel:.3e}, identity {ident:.2e}"
            ),
        ))
    })
}

/// 8. Half-space lattice sums vs the closed-form integrals within 3% for
/// the [100] transverse kernels and the [111] axial kernels.
fn check_ensemble_sums(quick: bool) -> CheckResult {
    run_check(8, "ensemble-prefactors", 60.0, || {
        let d = 1.0;
        let (pitch_sq, rmax_sq) = if quick { (d / 5.0, 15.0 * d) } else { (d / 8.0, 30.0 * d) };
        let (pitch_lin, rmax_lin) = if quick { (d / 3.0, 60.0 * d) } else { (d / 4.0, 120.0 * d) };
        let mut worst = 0.0f64;
        let mut detail = String::new();
        // squared kernels
        for orientation in [SurfaceOrientation::D100, SurfaceOrientation::D111] {
            let sums = half_space_lattice_sums(orientation, d, pitch_sq, rmax_sq);
            let rho = 1.0 / pitch_sq.powi(3);
            let expect = half_space_integral_sums(orientation, d, rho);
            let (got, want, label) = match orientation {
                SurfaceOrientation::D100 => (sums.sum_aperp_sq, expect.sum_aperp_sq, "aperp2-100"),
                SurfaceOrientation::D111 => (sums.sum_apar_sq, expect.sum_apar_sq, "apar2-111"),
            };
            let rel = (got - want).abs() / want;
            detail.push_str(&format!("{label} rel {rel:.2e} "));
            worst = worst.max(rel);
        }
        // linear (signed) kernels
        for orientation in [SurfaceOrientation::D100, SurfaceOrientation::D111] {
            let sums = half_space_lattice_sums(orientation, d, pitch_lin, rmax_lin);
            let rho = 1.0 / pitch_lin.powi(3);
            let expect = half_space_integral_sums(orientation, d, rho);
            let (got, want, label) = match orientation {
                SurfaceOrientation::D100 => (sums.sum_aperp_vec, expect.sum_aperp_vec, "aperpvec-100"),
                SurfaceOrientation::D111 => (sums.sum_apar, expect.sum_apar, "apar-111"),
            };
            let rel = (got - want).abs() / want;
            detail.push_str(&format!("{label} rel {rel:.2e} "));
            worst = worst.max(rel);
        }
        Ok((worst, 0.03, detail))
    })
}

/// 9. Zero-field levels: closed-form eigenvalues vs diagonalization to
/// 1e-10 over 1000 random tensors; spectrum invariant over 100 random
/// orientations to 1e-9 of the level spacing.
fn check_zf_epr(quick: bool, seed: u64) -> CheckResult {
    run_check(9, "zf-epr-levels", 10.0, || {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed ^ 0x5A);
        let n_pairs = if quick { 200 } else { 1000 };
        let mut worst_rel = 0.0f64;
        for _ in 0..n_pairs {
            let a_perp = TAU * (1e6 + 199e6 * rng.random::<f64>());
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let a_par = sign * TAU * (1e6 + 199e6 * rng.random::<f64>());
            let levels = zf_epr(a_perp, a_par);
            let tensor = nalgebra::DMatrix::from_fn(3, 3, |i, j| {
                if i != j {
                    0.0
                } else if i == 2 {
                    a_par
                } else {
                    a_perp
                }
            });
            let mut ev: Vec<f64> = zero_field_hamiltonian(&tensor)
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .copied()
                .collect();
            ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut expect = vec![
                levels.omega_s0,
                levels.omega_t0,
                levels.omega_t_pm,
                levels.omega_t_pm,
            ];
            expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let scale = a_perp.abs().max(a_par.abs());
            for (e, x) in ev.iter().zip(expect.iter()) {
                worst_rel = worst_rel.max((e - x).abs() / scale);
            }
        }
        // orientation independence
        let a_perp = TAU * 14e6;
        let a_par = TAU * 100e6;
        let reference = {
            let t = rotated_axial_tensor(a_perp, a_par, &nalgebra::Rotation3::identity());
            let mut ev: Vec<f64> = zero_field_hamiltonian(&t)
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .copied()
                .collect();
            ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ev
        };
        let spacing = reference[3] - reference[0];
        let mut worst_orient = 0.0f64;
        for _ in 0..100 {
            let rot = nalgebra::Rotation3::from_euler_angles(
                rng.random::<f64>() * TAU,
                rng.random::<f64>() * PI,
                rng.random::<f64>() * TAU,
            );
            let t = rotated_axial_tensor(a_perp, a_par, &rot);
            let mut ev: Vec<f64> = zero_field_hamiltonian(&t)
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .copied()
                .collect();
            ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (e, r) in ev.iter().zip(reference.iter()) {
                worst_orient = worst_orient.max((e - r).abs() / spacing);
            }
        }
        let worst = (worst_rel / 1e-10).max(worst_orient / 1e-9);
        Ok((
            worst,
            1.0,
            format!("eigen rel {worst_rel:.2e}, orientation spread {worst_orient:.2e}"),
        ))
    })
}

/// 10. Heterodyne record: FFT peak within 1/(pi T_exp) of the 10 Hz beat
/// at T_exp = 10 s; frequency-fit precision vs T_exp slope -1.5 +- 0.1
/// over two decades.
fn check_qdyne(consts: &PhysicalConstants, quick: bool, seed: u64) -> CheckResult {
    run_check(10, "qdyne-spectroscopy", 120.0, || {
        let photon = PhotonModel::new(20.0, 10.0)?;
        let f_lo = 1000.0;
        let t_s = 10e-6;
        let b_ac = 2e-6;
        // peak location
        let t_exp = 10.0;
        let df = 10.0;
        let rec = qdyne_simulate(f_lo + df, b_ac, t_s, f_lo, t_exp, 0.3, &photon, consts, seed)?;
        let peak = qdyne_peak(&qdyne_spectrum(&rec)).unwrap_or(0.0);
        let peak_err = (peak - df).abs() / (1.0 / (PI * t_exp));
        // precision scaling over two decades
        let df_s = 50.0;
        let seeds_per_point = if quick { 4 } else { 8 };
        let t_grid = [0.1, 0.215, 0.464, 1.0, 2.15, 4.64, 10.0];
        let mut pts = Vec::new();
        for (i, &texp) in t_grid.iter().enumerate() {
            let mut se = 0.0;
            for s in 0..seeds_per_point {
                let r = qdyne_simulate(
                    f_lo + df_s,
                    b_ac,
                    t_s,
                    f_lo,
                    texp,
                    0.1 * s as f64,
                    &photon,
                    consts,
                    seed ^ ((i * 97 + s + 1) as u64),
                )?;
                let (f_hat, _) = qdyne_fit_frequency(&r)?;
                se += (f_hat - df_s) * (f_hat - df_s);
            }
            let rms = (se / seeds_per_point as f64).sqrt();
            pts.push((texp.ln(), rms.ln()));
        }
        let slope = fit_slope(&pts);
        let slope_dev = (slope + 1.5).abs();
        let worst = (peak_err / 1.0).max(slope_dev / 0.1);
        Ok((
            worst,
            1.0,
            format!("peak at {peak:.2} Hz (err {peak_err:.2} bins), slope {slope:.3}"),
        ))
    })
}

/// 11. Sequential weak measurement: fitted coherence decay within 10% of
/// a_perp^2 t_s^2 / (pi^2 t_L) for measurement angle beta <= 0.2 rad.
fn check_weak_measurement() -> CheckResult {
    run_check(11, "weak-measurement-dephasing", 60.0, || {
        let mut worst = 0.0f64;
        for (a_perp, t_s) in [(TAU * 2e3, 20e-6), (TAU * 1e3, 30e-6), (TAU * 3e3, 10e-6)] {
            let t_l = 50e-6;
            let beta = a_perp * t_s / PI;
            assert!(beta <= 0.2 + 1e-12);
            let res = weak_measurement(a_perp, 0.0, t_s, t_l, 0.0, 400)?;
            let fitted = fit_decay_rate(&res.trace)?;
            worst = worst.max((fitted - res.gamma_beta).abs() / res.gamma_beta);
        }
        Ok((worst, 0.10, format!("worst rate deviation {worst:.3e}")))
    })
}

/// 12. Relaxometry: population endpoints 1 and 1/3 exact; the field sweep
/// of the overlap rate peaks at D/(gamma_nv + gamma_tar) within one grid
/// step for a g = 2 target.
fn check_relaxometry(consts: &PhysicalConstants) -> CheckResult {
    run_check(12, "relaxometry", 30.0, || {
        let p0 = relaxometry_population(0.0, 321.0, 123.0)?;
        let pinf = relaxometry_population(1e6, 321.0, 123.0)?;
        let endpoint_err = (p0 - 1.0).abs().max((pinf - 1.0 / 3.0).abs());
        let gamma_tar = consts.gamma_e.abs();
        let b_cross = consts.d_zfs / (consts.gamma_nv.abs() + gamma_tar);
        let gamma2 = TAU * 1e6;
        let f_ion = 1e8;
        let n_grid = 41;
        let b_lo = 0.8 * b_cross;
        let b_hi = 1.2 * b_cross;
        let mut best = (0.0f64, -1.0f64);
        for k in 0..n_grid {
            let b0 = b_lo + (b_hi - b_lo) * k as f64 / (n_grid - 1) as f64;
            let spec =
                NoiseSpectrum::new(consts.gamma_nv).lorentzian(1e-6, 1.0 / f_ion, gamma_tar * b0);
            let w_nv_minus = consts.d_zfs - consts.gamma_nv.abs() * b0;
            let rate = spectral_overlap(&spec, w_nv_minus, gamma2)?;
            if rate > best.1 {
                best = (b0, rate);
            }
        }
        let step = (b_hi - b_lo) / (n_grid - 1) as f64;
        let peak_steps = (best.0 - b_cross).abs() / step;
        let worst = (endpoint_err / 1e-12).max(peak_steps / 1.0);
        Ok((
            worst,
            1.0,
            format!(
                "endpoints {endpoint_err:.1e}, peak at {:.4} T vs {:.4} T ({peak_steps:.2} steps)",
                best.0, b_cross
            ),
        ))
    })
}

/// 13. Coupled pair shows cross peaks, uncoupled pair does not
/// (amplitude ratio > 100).
fn check_two_d_nmr() -> CheckResult {
    run_check(13, "two-d-nmr-cross-peaks", 60.0, || {
        let n = 64usize;
        let dt = 10e-6;
        let bin = 1.0 / (n as f64 * dt);
        let cfg = |j: f64| TwoDNmrConfig {
            larmor: [TAU * 20.0 * bin, TAU * 25.0 * bin],
            j_coupling: j,
            readout_beta: [0.4, 0.4],
            t1_grid: (0..n).map(|k| k as f64 * dt).collect(),
            t2_grid: (0..n).map(|k| k as f64 * dt).collect(),
        };
        let coupled = two_d_nmr(&cfg(TAU * 2e3))?;
        let uncoupled = two_d_nmr(&cfg(0.0))?;
        let (fa, fb) = (20.0 * bin, 25.0 * bin);
        let cross_c = spectrum_amplitude_at(&coupled, fa, fb)
            .max(spectrum_amplitude_at(&coupled, fb, fa));
        let cross_u = spectrum_amplitude_at(&uncoupled, fa, fb)
            .max(spectrum_amplitude_at(&uncoupled, fb, fa));
        let ratio = cross_c / cross_u.max(1e-300);
        // the metric is 100/ratio so that <= 1 passes
        Ok((
            100.0 / ratio,
            1.0,
            format!("cross-peak ratio {ratio:.3e} (coupled {cross_c:.3e})"),
        ))
    })
}

fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// CSV artifact of a validation run; runtimes are excluded so identical
/// seeds give byte-identical files.
pub fn results_csv(results: &[CheckResult]) -> crate::report::CsvTable {
    let mut t = crate::report::CsvTable::new(&["id", "name", "value", "threshold", "passed"]);
    for r in results {
        t.push(vec![
            r.id.to_string(),
            r.name.clone(),
            crate::report::fmt_f64(r.value),
            crate::report::fmt_f64(r.threshold),
            (r.passed as u8).to_string(),
        ]);
    }
    t
}

/// Convenience entry point used by the acceptance target.
pub fn default_run(quick: bool) -> Vec<CheckResult> {
    run_all(quick, DEFAULT_SEED)
}
