//! Noise spectral densities, decoherence integrals, and relaxometry.
//!
//! Spectral-density convention: a Lorentzian component of strength B
//! (tesla rms) and correlation time tau_c evaluates to
//!     S(w) = gamma^2 B^2 / pi * tau_c / (1 + ((w - w0) tau_c)^2),
//! which integrates to gamma^2 B^2 over w in (-inf, inf). A white
//! component of `level` L (rad^2/s, one-sided) evaluates to L/2.
//!
//! The decoherence function is chi(t) = (1/pi) * integral S(w) F(w)/w^2 dw
//! over the full line, with xi = exp(-chi/2). The matching stochastic
//! process for a zero-centered Lorentzian component is an OU field with
//! variance B^2/(2 pi); the Monte-Carlo oracle pins this mapping (see the
//! cross-checks in the tests and the validation suite).

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::oracle::OrnsteinUhlenbeck;
use crate::sequences::{filter_function_closed, FilterShape};

/// One spectral component.
#[derive(Debug, Clone, Copy)]
pub enum NoiseComponent {
    /// Lorentzian of rms field strength `b_rms` (T), correlation time
    /// `tau_c` (s), centered at `omega0` (rad/s).
    Lorentzian { b_rms: f64, tau_c: f64, omega0: f64 },
    /// Frequency-flat component; `level` is the one-sided density
    /// (rad^2/s), so S(w) = level/2 on the two-sided axis.
    White { level: f64 },
}

/// Sum of Lorentzian and white components, weighted by the probe
/// gyromagnetic ratio.
#[derive(Debug, Clone)]
pub struct NoiseSpectrum {
    pub components: Vec<NoiseComponent>,
    /// Probe gyromagnetic ratio (rad/s/T) entering the gamma^2 weight.
    pub gamma: f64,
}

impl NoiseSpectrum {
    pub fn new(gamma: f64) -> Self {
        NoiseSpectrum {
            components: Vec::new(),
            gamma,
        }
    }

    pub fn lorentzian(mut self, b_rms: f64, tau_c: f64, omega0: f64) -> Self {
        self.components.push(NoiseComponent::Lorentzian {
            b_rms,
            tau_c,
            omega0,
        });
        self
    }

    pub fn white(mut self, level: f64) -> Self {
        self.components.push(NoiseComponent::White { level });
        self
    }

    /// S(omega) in rad/s.
    pub fn s_at(&self, omega: f64) -> f64 {
        let g2 = self.gamma * self.gamma;
        self.components
            .iter()
            .map(|comp| match *comp {
                NoiseComponent::Lorentzian {
                    b_rms,
                    tau_c,
                    omega0,
                } => {
                    let x = (omega - omega0) * tau_c;
                    g2 * b_rms * b_rms / PI * tau_c / (1.0 + x * x)
                }
                NoiseComponent::White { level } => level / 2.0,
            })
            .sum()
    }

    /// OU processes generating the zero-centered Lorentzian components.
    pub fn matching_ou_processes(&self) -> Result<Vec<OrnsteinUhlenbeck>> {
        self.components
            .iter()
            .filter_map(|comp| match *comp {
                NoiseComponent::Lorentzian {
                    b_rms,
                    tau_c,
                    omega0,
                } => Some(if omega0 == 0.0 {
                    Ok(OrnsteinUhlenbeck {
                        sigma: b_rms / (2.0 * PI).sqrt(),
                        tau_c,
                    })
                } else {
                    Err(Error::InvalidInput(
                        "stochastic oracle handles zero-centered components only".into(),
                    ))
                }),
                NoiseComponent::White { .. } => None,
            })
            .collect()
    }
}

/// Ion spin bath above the sensor: sets the Lorentzian linewidth and
/// fluctuation strength of the relaxometry spectrum.
#[derive(Debug, Clone, Copy)]
pub struct IonBathModel {
    /// Ion concentration (mol/L).
    pub c_ion: f64,
    /// Sensor depth (m).
    pub depth: f64,
    /// Ion gyromagnetic ratio (rad/s/T).
    pub gamma_ion: f64,
    /// Intrinsic vibrational broadening (Hz), from ensemble spectroscopy.
    pub f_vib: f64,
    /// Translational diffusion coefficient (m^2/s).
    pub d_diff: f64,
    /// Fluid viscosity (Pa s).
    pub viscosity: f64,
    /// Temperature (K).
    pub temperature: f64,
    /// Larmor frequency of the ion (rad/s): Lorentzian center.
    pub omega0: f64,
}

/// Per-mechanism linewidth contributions (1/s).
#[derive(Debug, Clone, Copy)]
pub struct IonLinewidth {
    pub f_dip: f64,
    pub f_vib: f64,
    pub f_trans: f64,
    pub f_rot: f64,
}

impl IonLinewidth {
    pub fn total(&self) -> f64 {
        self.f_dip + self.f_vib + self.f_trans + self.f_rot
    }
}

/// Concentration-dependent dipolar fluctuation rate: 77 GHz per mol/L.
pub const F_DIP_PER_MOLAR: f64 = 77e9;

pub fn ion_linewidth(model: &IonBathModel, consts: &crate::PhysicalConstants) -> IonLinewidth {
    let _ = consts;
    IonLinewidth {
        f_dip: model.c_ion * F_DIP_PER_MOLAR,
        f_vib: model.f_vib,
        f_trans: model.d_diff * (3.0 / (4.0 * model.depth)).powi(2),
        f_rot: model.temperature * 1.380_649e-23 / (4.0 * model.depth.powi(3) * model.viscosity),
    }
}

/// Mean-square transverse field of the ion bath (T^2).
pub fn ion_field_variance(model: &IonBathModel, consts: &crate::PhysicalConstants) -> f64 {
    let k = consts.mu0 * consts.hbar * model.gamma_ion / (4.0 * PI);
    21e3 * PI * consts.n_avogadro * model.c_ion / (16.0 * model.depth.powi(3)) * k * k
}

/// Single-Lorentzian relaxometry spectrum of the ion bath, probed with
/// `gamma_probe`.
pub fn ion_psd(
    model: &IonBathModel,
    consts: &crate::PhysicalConstants,
    gamma_probe: f64,
) -> Result<NoiseSpectrum> {
    let lw = ion_linewidth(model, consts);
    let f_ion = lw.total();
    if f_ion <= 0.0 {
        return Err(Error::DegenerateModel(
            "ion fluctuation rate is zero; the Lorentzian degenerates".into(),
        ));
    }
    let b2 = ion_field_variance(model, consts);
    Ok(NoiseSpectrum::new(gamma_probe).lorentzian(b2.sqrt(), 1.0 / f_ion, model.omega0))
}

/// Surface spin layer: density sigma (spins/m^2) at depth d (m).
#[derive(Debug, Clone, Copy)]
pub struct SurfaceBathModel {
    pub sigma_surf: f64,
    pub depth: f64,
}

/// Rms field of a uniform g=2, S=1/2 surface layer (T).
pub fn surface_rms(model: &SurfaceBathModel, consts: &crate::PhysicalConstants) -> Result<f64> {
    if !(model.depth > 0.0) {
        return Err(Error::InvalidInput("depth must be positive".into()));
    }
    let k = consts.mu0 * consts.gamma_e.abs() * consts.hbar / (4.0 * PI);
    Ok((k * k * PI / 4.0 * model.sigma_surf / model.depth.powi(4)).sqrt())
}

/// Dielectric environment of the diamond surface.
#[derive(Debug, Clone, Copy)]
pub struct DielectricModel {
    pub kappa_diamond: f64,
    pub kappa_external: f64,
}

/// Relative permittivity of diamond used as the documented default.
pub const KAPPA_DIAMOND: f64 = 5.7;

/// Reduction of a surface point-charge field relative to air:
/// (kappa_d + 1) / (kappa_d + kappa_ext).
pub fn dielectric_screening(model: &DielectricModel) -> f64 {
    (model.kappa_diamond + 1.0) / (model.kappa_diamond + model.kappa_external)
}

/// Diffusion-limited spectral broadening 1/T_D = D (3/4d)^2 (1/s).
pub fn diffusion_broadening(d_diff: f64, depth: f64) -> Result<f64> {
    if !(depth > 0.0) || d_diff < 0.0 {
        return Err(Error::InvalidInput("need depth > 0 and D >= 0".into()));
    }
    Ok(d_diff * (3.0 / (4.0 * depth)).powi(2))
}

/// chi(t) for one filter shape under the spectrum; adaptive quadrature on
/// the Lorentzian parts relative to `REL_TOL`, analytic for white parts
/// (the toggling integral gives chi_white = level * t / 2 exactly).
pub fn chi(spectrum: &NoiseSpectrum, shape: FilterShape, t: f64) -> Result<f64> {
    let mut total = 0.0;
    let g2 = spectrum.gamma * spectrum.gamma;
    for comp in &spectrum.components {
        match *comp {
            NoiseComponent::White { level } => {
                total += level * t / 2.0;
            }
            NoiseComponent::Lorentzian {
                b_rms,
                tau_c,
                omega0,
            } => {
                let amp = g2 * b_rms * b_rms / PI * tau_c;
                let s = |w: f64| {
                    let x = (w - omega0) * tau_c;
                    let xm = (w + omega0) * tau_c;
                    // fold the negative axis onto the positive one
                    amp / (1.0 + x * x) + amp / (1.0 + xm * xm)
                };
                let integrand = |w: f64| -> Result<f64> {
                    Ok(s(w) * filter_over_w2(shape, w, t)?)
                };
                // knots: filter scale and both Lorentzian peak locations
                let w_peak = omega0.abs();
                let w_filter = filter_scale(shape, t);
                let width = 1.0 / tau_c;
                let mut knots = vec![
                    0.0,
                    0.5 * w_filter,
                    w_filter,
                    2.0 * w_filter,
                    8.0 * w_filter,
                ];
                if w_peak > 0.0 {
                    for k in [-8.0, -2.0, -0.5, 0.0, 0.5, 2.0, 8.0] {
                        let w = w_peak + k * width;
                        if w > 0.0 {
                            knots.push(w);
                        }
                    }
                }
                let w_max = (w_peak + 60.0 * width).max(60.0 * w_filter).max(60.0 / tau_c);
                knots.push(w_max);
                knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
                knots.dedup_by(|a, b| (*a - *b).abs() < 1e-300);
                let acc = integrate_panels(&integrand, &knots)?;
                // tail beyond w_max: S ~ amp/(w tau)^2, F/w^2 <= f_cap/w^2
                let f_cap = filter_envelope(shape);
                let tail = 2.0 * amp / (tau_c * tau_c) * f_cap / (3.0 * w_max.powi(3));
                total += (acc + tail) / PI;
            }
        }
    }
    Ok(total)
}

/// Relative tolerance of the decoherence quadrature.
pub const REL_TOL: f64 = 1e-6;

/// F(w)/w^2 with the removable singularity at w = 0 evaluated by series.
fn filter_over_w2(shape: FilterShape, w: f64, t: f64) -> Result<f64> {
    let wt = w * t;
    if wt.abs() < 1e-4 {
        // leading small-argument behavior per family
        return Ok(match shape {
            FilterShape::Ramsey => t * t / 2.0 * (1.0 - wt * wt / 12.0),
            FilterShape::Hahn => t * t * wt * wt / 32.0,
            FilterShape::Pdd { n } => {
                let m = n as f64 + 1.0;
                // 2 tan^2(wt/2m) sin^2(wt/2) ~ (wt)^4/(2 m^2 * 4)
                t * t * wt * wt / (8.0 * m * m)
            }
            FilterShape::Cpmg { n } => {
                let m = n as f64;
                t * t * wt * wt / (32.0 * m * m)
            }
            FilterShape::Udd { .. } | FilterShape::Cdd { .. } => {
                // echo-like: F = O(w^4); negligible at these arguments
                0.0
            }
        });
    }
    Ok(filter_function_closed(shape, w, t)? / (w * w))
}

fn filter_scale(shape: FilterShape, t: f64) -> f64 {
    match shape {
        FilterShape::Ramsey | FilterShape::Hahn => 2.0 * PI / t,
        FilterShape::Pdd { n } => PI * (n as f64 + 1.0) / t,
        FilterShape::Cpmg { n } | FilterShape::Udd { n } => PI * n as f64 / t,
        FilterShape::Cdd { level } => PI * 2f64.powi(level as i32) / t,
    }
}

fn filter_envelope(shape: FilterShape) -> f64 {
    match shape {
        FilterShape::Ramsey => 2.0,
        FilterShape::Hahn => 8.0,
        FilterShape::Pdd { n } => 2.0 * ((n + 1) * (n + 1)) as f64,
        FilterShape::Cpmg { n } => 2.0 * (n * n) as f64,
        FilterShape::Udd { n } => 2.0 * ((n + 1) * (n + 1)) as f64,
        FilterShape::Cdd { level } => 2f64.powi(2 * level as i32 + 1),
    }
}

/// Integrate over consecutive knot panels with a shared absolute
/// tolerance derived from a coarse estimate of the total magnitude.
fn integrate_panels(f: &dyn Fn(f64) -> Result<f64>, knots: &[f64]) -> Result<f64> {
    // coarse magnitude estimate: 5-point per panel
    let mut scale = 0.0;
    for pair in knots.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if !(b > a) {
            continue;
        }
        let h = (b - a) / 4.0;
        let mut acc = 0.0;
        for k in 0..=4 {
            acc += f(a + h * k as f64)?.abs();
        }
        scale += acc / 5.0 * (b - a);
    }
    let abs_tol = REL_TOL * scale.max(1e-290) / knots.len().max(1) as f64;
    let mut total = 0.0;
    for pair in knots.windows(2) {
        total += adaptive_simpson(f, pair[0], pair[1], abs_tol)?;
    }
    Ok(total)
}

fn adaptive_simpson(
    f: &dyn Fn(f64) -> Result<f64>,
    a: f64,
    b: f64,
    abs_tol: f64,
) -> Result<f64> {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    struct Ctx<'a> {
        f: &'a dyn Fn(f64) -> Result<f64>,
        evals: usize,
    }
    fn rec(
        ctx: &mut Ctx,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        ctx.evals += 2;
        if ctx.evals > 4_000_000 {
            return Err(Error::QuadratureFailure(
                "evaluation budget exhausted".into(),
            ));
        }
        let flm = (ctx.f)(lm)?;
        let frm = (ctx.f)(rm)?;
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol || depth == 0 {
            if depth == 0 && delta.abs() > 1e3 * 15.0 * tol {
                return Err(Error::QuadratureFailure(
                    "max refinement depth with large residual".into(),
                ));
            }
            Ok(left + right + delta / 15.0)
        } else {
            let l = rec(ctx, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?;
            let r = rec(ctx, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?;
            Ok(l + r)
        }
    }
    if !(b > a) {
        return Ok(0.0);
    }
    let mut ctx = Ctx { f, evals: 3 };
    let fa = f(a)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let fb = f(b)?;
    let whole = simpson(fa, fm, fb, b - a);
    rec(&mut ctx, a, b, fa, fm, fb, whole, abs_tol, 44)
}

/// Decoherence curve xi(t) = exp(-chi/2) on a time grid.
pub fn decoherence(
    spectrum: &NoiseSpectrum,
    shape: FilterShape,
    t_grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    t_grid
        .iter()
        .map(|&t| Ok((t, (-chi(spectrum, shape, t)? / 2.0).exp())))
        .collect()
}

/// Population of |0> under bare relaxation with rates Gamma1+- (1/s).
pub fn relaxometry_population(t: f64, gamma_plus: f64, gamma_minus: f64) -> Result<f64> {
    if gamma_plus < 0.0 || gamma_minus < 0.0 || t < 0.0 {
        return Err(Error::InvalidInput("rates and time must be >= 0".into()));
    }
    Ok((2.0
        + (-gamma_minus * t).exp()
        + (-gamma_plus * t).exp()
        + 2.0 * (-(gamma_minus + gamma_plus) * t).exp())
        / 6.0)
}

/// Longitudinal rates at both NV transitions for one field value.
#[derive(Debug, Clone, Copy)]
pub struct Gamma1Point {
    pub b0: f64,
    pub gamma1_plus: f64,
    pub gamma1_minus: f64,
}

/// Gamma1 = Gamma1_int + integral Gamma2 / (2 (Gamma2^2 + (w_nv - w)^2)) S(w) dw
/// evaluated at w_nv(+-) = D +- |gamma_nv| B0. The spectrum is re-centered
/// at each field via `spectrum_of(b0)`.
pub fn gamma1_vs_field(
    b0_grid: &[f64],
    spectrum_of: &dyn Fn(f64) -> Result<NoiseSpectrum>,
    gamma2: f64,
    gamma1_int: f64,
    consts: &crate::PhysicalConstants,
) -> Result<Vec<Gamma1Point>> {
    if !(gamma2 > 0.0) {
        return Err(Error::InvalidInput("Gamma2 must be positive".into()));
    }
    let d = consts.d_zfs;
    let gnv = consts.gamma_nv.abs();
    b0_grid
        .iter()
        .map(|&b0| {
            let spec = spectrum_of(b0)?;
            let rate = |w_nv: f64| -> Result<f64> {
                spectral_overlap(&spec, w_nv, gamma2)
            };
            Ok(Gamma1Point {
                b0,
                gamma1_plus: gamma1_int + rate(d + gnv * b0)?,
                gamma1_minus: gamma1_int + rate(d - gnv * b0)?,
            })
        })
        .collect()
}

/// integral Gamma2 / (2 (Gamma2^2 + (w_nv - w)^2)) S(w) dw via adaptive
/// quadrature over the peak neighbourhoods.
pub fn spectral_overlap(spec: &NoiseSpectrum, w_nv: f64, gamma2: f64) -> Result<f64> {
    let kernel = |w: f64| {
        let d = w_nv - w;
        gamma2 / (2.0 * (gamma2 * gamma2 + d * d))
    };
    let f = |w: f64| -> Result<f64> { Ok(kernel(w) * spec.s_at(w)) };
    let mut knots = vec![w_nv];
    for comp in &spec.components {
        if let NoiseComponent::Lorentzian { tau_c, omega0, .. } = *comp {
            let width = 1.0 / tau_c;
            for k in [-30.0, -8.0, -2.0, 0.0, 2.0, 8.0, 30.0] {
                knots.push(omega0 + k * width);
            }
        }
    }
    for k in [-30.0, -8.0, -2.0, 2.0, 8.0, 30.0] {
        knots.push(w_nv + k * gamma2);
    }
    let lo = knots.iter().cloned().fold(f64::INFINITY, f64::min) - 10.0 * gamma2;
    let hi = knots.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 10.0 * gamma2;
    knots.push(lo);
    knots.push(hi);
    knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    knots.dedup_by(|a, b| (*a - *b).abs() < 1e-300);
    integrate_panels(&f, &knots)
}

/// Closed-form overlap of the Gamma2 kernel with a single Lorentzian
/// component (used as the quadrature oracle in tests): the convolution of
/// two Lorentzians is a Lorentzian of summed widths.
pub fn spectral_overlap_closed(
    b_rms: f64,
    tau_c: f64,
    omega0: f64,
    gamma: f64,
    w_nv: f64,
    gamma2: f64,
) -> f64 {
    let f_ion = 1.0 / tau_c;
    let g2b2 = gamma * gamma * b_rms * b_rms;
    let width = gamma2 + f_ion;
    let delta = w_nv - omega0;
    g2b2 / 2.0 * width / (width * width + delta * delta)
}

/// Decay rate implied by the delta-function filter descriptor of the
/// spin-lock and T1 rows: chi(t)/t with F = weight * delta(w - w0).
pub fn delta_filter_rate(spec: &NoiseSpectrum, descriptor: crate::sequences::DeltaFilter) -> f64 {
    if descriptor.center == 0.0 {
        return 0.0;
    }
    let t_weight = descriptor.weight / (descriptor.center * descriptor.center);
    spec.s_at(descriptor.center) * t_weight / PI
}
