//! Pulse-sequence constructors and filter functions.
//!
//! Sequences are ordered lists of ideal instantaneous pulses and free
//! evolution intervals on named channels. Constructed sequences start with
//! a pi/2 pulse and end with the readout pi/2 pulse; the oracle replaces
//! the phase of the trailing pulse according to the requested readout
//! quadrature.
//!
//! Filter-function convention: F(w) = (w^2/2) |integral of y(s) e^{iws}|^2
//! with y(s) the +-1 toggling sign of the sensor coherence. The closed
//! forms below agree with this normalization for every family, including
//! free induction (Ramsey), whose filter is 2 sin^2(wt/2).

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Control channel addressed by a pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    /// NV single-quantum manifold (ms 0 <-> 1).
    NvSq,
    /// NV double-quantum manifold (ms -1 <-> +1).
    NvDq,
    /// RF channel of target spin `j`.
    Target(usize),
}

impl Channel {
    pub fn name(self) -> String {
        match self {
            Channel::NvSq => "nv_sq".into(),
            Channel::NvDq => "nv_dq".into(),
            Channel::Target(j) => format!("target{j}"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Pulse {
    pub channel: Channel,
    /// Rotation-axis azimuth in the xy plane (rad): 0 = x, pi/2 = y.
    pub phase: f64,
    /// Rotation angle (rad).
    pub angle: f64,
}

#[derive(Debug, Clone, Copy)]
pub enum SeqElement {
    Pulse(Pulse),
    Wait(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceKind {
    Ramsey,
    Hahn,
    Pdd,
    Cpmg,
    Xy8,
    Cdd,
    Udd,
    SpinLock,
    Deer,
    Endor,
    Correlation,
    QdyneBlock,
}

#[derive(Debug, Clone)]
pub struct PulseSequence {
    pub elements: Vec<SeqElement>,
    pub kind: SequenceKind,
    /// Number of pi pulses on the NV channel.
    pub n_pi: usize,
    /// Characteristic inter-pulse spacing (s).
    pub tau: f64,
    /// Total free-evolution duration (s).
    pub total_t: f64,
}

const X: f64 = 0.0;
const Y: f64 = std::f64::consts::FRAC_PI_2;
const PI: f64 = std::f64::consts::PI;

fn p(channel: Channel, phase: f64, angle: f64) -> SeqElement {
    SeqElement::Pulse(Pulse {
        channel,
        phase,
        angle,
    })
}

fn w(duration: f64) -> SeqElement {
    SeqElement::Wait(duration)
}

fn require_positive(t: f64) -> Result<()> {
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!(
            "duration must be positive, got {t}"
        )));
    }
    Ok(())
}

impl PulseSequence {
    pub fn total_wait(&self) -> f64 {
        self.elements
            .iter()
            .map(|e| match e {
                SeqElement::Wait(d) => *d,
                _ => 0.0,
            })
            .sum()
    }

    /// One element per line: `PULSE channel axis_deg angle_deg` or
    /// `WAIT seconds`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for e in &self.elements {
            match e {
                SeqElement::Pulse(pl) => {
                    out.push_str(&format!(
                        "PULSE {} {} {}\n",
                        pl.channel.name(),
                        pl.phase.to_degrees(),
                        pl.angle.to_degrees()
                    ));
                }
                SeqElement::Wait(d) => out.push_str(&format!("WAIT {d}\n")),
            }
        }
        out
    }

    /// Switching record of the +-1 toggling sign: (t_start, t_end, sign)
    /// per free-evolution segment. Fails when an intermediate NV pulse is
    /// not a pi pulse.
    pub fn toggling(&self) -> Result<Vec<(f64, f64, f64)>> {
        let mut segs = Vec::new();
        let mut t = 0.0f64;
        let mut sign = 1.0f64;
        let n = self.elements.len();
        for (k, e) in self.elements.iter().enumerate() {
            match e {
                SeqElement::Wait(d) => {
                    if *d > 0.0 {
                        segs.push((t, t + d, sign));
                        t += d;
                    }
                }
                SeqElement::Pulse(pl) => {
                    if pl.channel == Channel::NvSq || pl.channel == Channel::NvDq {
                        let is_edge = k == 0 || k == n - 1;
                        if (pl.angle - PI).abs() < 1e-9 {
                            sign = -sign;
                        } else if is_edge && (pl.angle - PI / 2.0).abs() < 1e-9 {
                            // protocol pi/2 pulses bracket the evolution
                        } else {
                            return Err(Error::InvalidInput(
                                "toggling function requires pi pulses between the protocol pi/2 pulses"
                                    .into(),
                            ));
                        }
                    }
                }
            }
        }
        Ok(segs)
    }
}

/// pi/2 - t - pi/2.
pub fn ramsey(t: f64) -> Result<PulseSequence> {
    require_positive(t)?;
    Ok(PulseSequence {
        elements: vec![p(Channel::NvSq, Y, PI / 2.0), w(t), p(Channel::NvSq, Y + PI, PI / 2.0)],
        kind: SequenceKind::Ramsey,
        n_pi: 0,
        tau: t,
        total_t: t,
    })
}

/// pi/2 - t/2 - pi - t/2 - pi/2.
pub fn hahn(t: f64) -> Result<PulseSequence> {
    require_positive(t)?;
    Ok(PulseSequence {
        elements: vec![
            p(Channel::NvSq, Y, PI / 2.0),
            w(t / 2.0),
            p(Channel::NvSq, X, PI),
            w(t / 2.0),
            p(Channel::NvSq, Y + PI, PI / 2.0),
        ],
        kind: SequenceKind::Hahn,
        n_pi: 1,
        tau: t / 2.0,
        total_t: t,
    })
}

/// Periodic decoupling, odd N, pi pulses at j*t/(N+1).
pub fn pdd(n: usize, t: f64) -> Result<PulseSequence> {
    require_positive(t)?;
    if n % 2 == 0 {
        return Err(Error::Parity(format!("PDD requires odd N, got {n}")));
    }
    let tau = t / (n as f64 + 1.0);
    let mut elements = vec![p(Channel::NvSq, Y, PI / 2.0)];
    for _ in 0..n {
        elements.push(w(tau));
        elements.push(p(Channel::NvSq, X, PI));
    }
    elements.push(w(tau));
    elements.push(p(Channel::NvSq, Y + PI, PI / 2.0));
    Ok(PulseSequence {
        elements,
        kind: SequenceKind::Pdd,
        n_pi: n,
        tau,
        total_t: t,
    })
}

/// CPMG, even N: pi/2 - (t/2N - pi - t/2N)^N - pi/2.
pub fn cpmg(n: usize, t: f64) -> Result<PulseSequence> {
    cpmg_with_phases(n, t, |_| X, SequenceKind::Cpmg, true)
}

/// CPMG timing with the XYXYYXYX phase pattern; N must be a multiple of 8.
/// With ideal pulses its filter function equals CPMG's; the phase pattern
/// matters only for pulse errors, which are out of scope here.
pub fn xy8(n: usize, t: f64) -> Result<PulseSequence> {
    if n % 8 != 0 {
        return Err(Error::Parity(format!("XY8 requires N divisible by 8, got {n}")));
    }
    const PATTERN: [f64; 8] = [X, Y, X, Y, Y, X, Y, X];
    let mut seq = cpmg_with_phases(n, t, |k| PATTERN[k % 8], SequenceKind::Xy8, false)?;
    seq.kind = SequenceKind::Xy8;
    Ok(seq)
}

fn cpmg_with_phases(
    n: usize,
    t: f64,
    phase_of: impl Fn(usize) -> f64,
    kind: SequenceKind,
    require_even: bool,
) -> Result<PulseSequence> {
    require_positive(t)?;
    if n == 0 || (require_even && n % 2 != 0) {
        return Err(Error::Parity(format!("CPMG requires even N >= 2, got {n}")));
    }
    let half = t / (2.0 * n as f64);
    let mut elements = vec![p(Channel::NvSq, Y, PI / 2.0)];
    for k in 0..n {
        elements.push(w(half));
        elements.push(p(Channel::NvSq, phase_of(k), PI));
        elements.push(w(half));
    }
    elements.push(p(Channel::NvSq, Y + PI, PI / 2.0));
    Ok(PulseSequence {
        elements,
        kind,
        n_pi: n,
        tau: 2.0 * half,
        total_t: t,
    })
}

/// Uhrig sequence: pulses at t_j = t sin^2(pi j / (2N+2)).
pub fn udd(n: usize, t: f64) -> Result<PulseSequence> {
    require_positive(t)?;
    if n == 0 {
        return Err(Error::InvalidInput("UDD requires N >= 1".into()));
    }
    let mut elements = vec![p(Channel::NvSq, Y, PI / 2.0)];
    let mut prev = 0.0;
    let mut min_gap = f64::INFINITY;
    for j in 1..=n {
        let tj = t * (PI * j as f64 / (2.0 * n as f64 + 2.0)).sin().powi(2);
        min_gap = min_gap.min(tj - prev);
        elements.push(w(tj - prev));
        elements.push(p(Channel::NvSq, X, PI));
        prev = tj;
    }
    elements.push(w(t - prev));
    elements.push(p(Channel::NvSq, Y + PI, PI / 2.0));
    Ok(PulseSequence {
        elements,
        kind: SequenceKind::Udd,
        n_pi: n,
        tau: min_gap,
        total_t: t,
    })
}

/// Concatenated decoupling of depth `level` (level 1 is a Hahn echo up to
/// a trailing pi pulse). Simultaneous pi pulses from the recursion cancel
/// pairwise.
pub fn cdd(level: u32, t: f64) -> Result<PulseSequence> {
    require_positive(t)?;
    if level == 0 {
        return Err(Error::InvalidInput("CDD requires level >= 1".into()));
    }
    let mut times: Vec<f64> = Vec::new();
    cdd_times(level, 0.0, t, &mut times);
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // cancel even groups of coincident pulses
    let mut kept: Vec<f64> = Vec::new();
    let mut i = 0;
    while i < times.len() {
        let mut j = i;
        while j < times.len() && (times[j] - times[i]).abs() < 1e-18 * t.max(1.0) {
            j += 1;
        }
        if (j - i) % 2 == 1 {
            kept.push(times[i]);
        }
        i = j;
    }
    let mut elements = vec![p(Channel::NvSq, Y, PI / 2.0)];
    let mut prev = 0.0;
    let mut n_pi = 0;
    for &tj in &kept {
        if tj - prev > 0.0 {
            elements.push(w(tj - prev));
        }
        elements.push(p(Channel::NvSq, X, PI));
        n_pi += 1;
        prev = tj;
    }
    if t - prev > 0.0 {
        elements.push(w(t - prev));
    }
    elements.push(p(Channel::NvSq, Y + PI, PI / 2.0));
    Ok(PulseSequence {
        elements,
        kind: SequenceKind::Cdd,
        n_pi,
        tau: t / 2f64.powi(level as i32),
        total_t: t,
    })
}

fn cdd_times(level: u32, t0: f64, t1: f64, times: &mut Vec<f64>) {
    if level == 0 {
        return;
    }
    let mid = 0.5 * (t0 + t1);
    cdd_times(level - 1, t0, mid, times);
    times.push(mid);
    cdd_times(level - 1, mid, t1, times);
    times.push(t1);
}

/// Spin lock: pi/2|x - drive along y for t - pi/2|x. Its filter is the
/// delta descriptor returned by [`delta_filter`].
pub fn spin_lock(t: f64) -> Result<PulseSequence> {
    require_positive(t)?;
    Ok(PulseSequence {
        elements: vec![p(Channel::NvSq, X, PI / 2.0), w(t), p(Channel::NvSq, X, PI / 2.0)],
        kind: SequenceKind::SpinLock,
        n_pi: 0,
        tau: t,
        total_t: t,
    })
}

/// DEER: CPMG-timed pi train on the NV with a synchronous pi pulse on
/// every listed target channel at each NV flip.
pub fn deer(n: usize, tau: f64, n_targets: usize) -> Result<PulseSequence> {
    require_positive(tau)?;
    if n == 0 {
        return Err(Error::InvalidInput("DEER requires N >= 1".into()));
    }
    let half = tau / 2.0;
    let mut elements = vec![p(Channel::NvSq, Y, PI / 2.0)];
    for _ in 0..n {
        elements.push(w(half));
        elements.push(p(Channel::NvSq, X, PI));
        for j in 0..n_targets {
            elements.push(p(Channel::Target(j), X, PI));
        }
        elements.push(w(half));
    }
    elements.push(p(Channel::NvSq, Y + PI, PI / 2.0));
    Ok(PulseSequence {
        elements,
        kind: SequenceKind::Deer,
        n_pi: n,
        tau,
        total_t: n as f64 * tau,
    })
}

/// ENDOR echo train: at every NV pi pulse, a synchronous RF pi pulse flips
/// every listed nuclear target. `n` counts echo periods; the canonical
/// single-RF-pulse form is n = 1.
pub fn endor(n: usize, tau: f64, n_targets: usize) -> Result<PulseSequence> {
    let mut seq = deer(n, tau, n_targets)?;
    seq.kind = SequenceKind::Endor;
    Ok(seq)
}

/// Two phase-sensing blocks separated by a free interval `dt`; each block
/// is a CPMG train of `n` pulses with spacing `tau` read in the imaginary
/// quadrature.
pub fn correlation(n: usize, tau: f64, dt: f64) -> Result<PulseSequence> {
    require_positive(tau)?;
    require_positive(dt)?;
    let block = qdyne_block(n, tau)?;
    let mut elements = block.elements.clone();
    elements.push(w(dt));
    elements.extend(block.elements.iter().copied());
    Ok(PulseSequence {
        elements,
        kind: SequenceKind::Correlation,
        n_pi: 2 * n,
        tau,
        total_t: 2.0 * block.total_t + dt,
    })
}

/// One imaginary-quadrature sensing block: pi/2|y - (CPMG pi train) - pi/2|x.
pub fn qdyne_block(n: usize, tau: f64) -> Result<PulseSequence> {
    require_positive(tau)?;
    if n == 0 {
        return Err(Error::InvalidInput("sensing block requires N >= 1".into()));
    }
    let half = tau / 2.0;
    let mut elements = vec![p(Channel::NvSq, Y, PI / 2.0)];
    for _ in 0..n {
        elements.push(w(half));
        elements.push(p(Channel::NvSq, X, PI));
        elements.push(w(half));
    }
    elements.push(p(Channel::NvSq, X, PI / 2.0));
    Ok(PulseSequence {
        elements,
        kind: SequenceKind::QdyneBlock,
        n_pi: n,
        tau,
        total_t: n as f64 * tau,
    })
}

/// Resonant inter-pulse spacing tau = pi / (omega_L + a_par/2) shared by
/// sequence construction and signal prediction.
pub fn resonance_spacing(omega_l: f64, a_par: f64) -> f64 {
    PI / (omega_l + a_par / 2.0).abs()
}

/// Closed-form filter families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterShape {
    Ramsey,
    Hahn,
    Pdd { n: usize },
    Cpmg { n: usize },
    Udd { n: usize },
    Cdd { level: u32 },
}

/// Delta-function filter descriptor for the spin-lock and T1 rows:
/// F(w) = weight * delta(w - center) with weight = 2 w0^2 t / pi. Consumed
/// only by the spectral-overlap integrals in the noise layer.
#[derive(Debug, Clone, Copy)]
pub struct DeltaFilter {
    pub center: f64,
    pub weight: f64,
}

pub fn delta_filter(omega0: f64, t: f64) -> DeltaFilter {
    DeltaFilter {
        center: omega0,
        weight: 2.0 * omega0 * omega0 * t / PI,
    }
}

/// Evaluate the closed-form filter function (dimensionless, >= 0).
pub fn filter_function_closed(shape: FilterShape, omega: f64, t: f64) -> Result<f64> {
    require_positive(t)?;
    let wt = omega.abs() * t;
    let f = match shape {
        FilterShape::Ramsey => 2.0 * (wt / 2.0).sin().powi(2),
        FilterShape::Hahn => 8.0 * (wt / 4.0).sin().powi(4),
        FilterShape::Pdd { n } => {
            if n % 2 == 0 {
                return Err(Error::Parity(format!("PDD filter requires odd N, got {n}")));
            }
            let m = n as f64 + 1.0;
            let u = wt / (2.0 * m);
            // 2 tan^2(u) sin^2(m u), with the removable singularity at
            // u = pi/2 evaluated by its limit.
            let cu = u.cos();
            if cu.abs() < 1e-7 {
                let ratio = m * (m * nearest_half_pi(u)).cos();
                2.0 * u.sin().powi(2) * ratio * ratio
            } else {
                let s = (m * u).sin() / cu;
                2.0 * u.sin().powi(2) * s * s
            }
        }
        FilterShape::Cpmg { n } => {
            if n % 2 != 0 || n == 0 {
                return Err(Error::Parity(format!("CPMG filter requires even N, got {n}")));
            }
            let m = n as f64;
            let x = wt / (2.0 * m);
            let cx = x.cos();
            let s4 = (x / 2.0).sin().powi(4);
            if cx.abs() < 1e-7 {
                let ratio = m * (m * nearest_half_pi(x)).cos();
                8.0 * s4 * ratio * ratio
            } else {
                let s = (m * x).sin() / cx;
                8.0 * s4 * s * s
            }
        }
        FilterShape::Udd { n } => {
            let np1 = n as f64 + 1.0;
            let mut sum = C64::new(0.0, 0.0);
            for k in -(n as i64 + 1)..=(n as i64) {
                let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                let arg = wt / 2.0 * (PI * k as f64 / np1).cos();
                sum += C64::from_polar(sign, arg);
            }
            0.5 * sum.norm_sqr()
        }
        FilterShape::Cdd { level } => {
            let l = level as i32;
            let mut f = 2f64.powi(2 * l + 1) * (wt / 2f64.powi(l + 1)).sin().powi(2);
            for k in 1..=l {
                f *= (wt / 2f64.powi(k + 1)).sin().powi(2);
            }
            f
        }
    };
    Ok(f.max(0.0))
}

fn nearest_half_pi(x: f64) -> f64 {
    let k = ((x - PI / 2.0) / PI).round();
    PI / 2.0 + k * PI
}

/// Numeric filter from the toggling function:
/// F(w) = (w^2/2) |sum over segments of y (e^{iw t1} - e^{iw t0}) / (iw)|^2.
pub fn filter_function_numeric(seq: &PulseSequence, omega: f64) -> Result<f64> {
    let segs = seq.toggling()?;
    if omega == 0.0 {
        return Ok(0.0);
    }
    let mut y = C64::new(0.0, 0.0);
    for &(t0, t1, sign) in &segs {
        let e1 = C64::from_polar(1.0, omega * t1);
        let e0 = C64::from_polar(1.0, omega * t0);
        y += (e1 - e0) * C64::new(0.0, -sign / omega);
    }
    Ok(0.5 * omega * omega * y.norm_sqr())
}

/// Filter shape implied by a constructed sequence, when one exists.
pub fn shape_of(seq: &PulseSequence) -> Option<FilterShape> {
    match seq.kind {
        SequenceKind::Ramsey => Some(FilterShape::Ramsey),
        SequenceKind::Hahn => Some(FilterShape::Hahn),
        SequenceKind::Pdd => Some(FilterShape::Pdd { n: seq.n_pi }),
        SequenceKind::Cpmg | SequenceKind::Xy8 | SequenceKind::Deer => {
            Some(FilterShape::Cpmg { n: seq.n_pi })
        }
        SequenceKind::Udd => Some(FilterShape::Udd { n: seq.n_pi }),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const T: f64 = 1e-3;

    fn max_dev(seq: &PulseSequence, shape: FilterShape, n_pts: usize, w_max: f64) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..n_pts {
            let w = w_max * (k as f64 + 0.5) / n_pts as f64;
            let fc = filter_function_closed(shape, w, seq.total_t).unwrap();
            let fnum = filter_function_numeric(seq, w).unwrap();
            worst = worst.max((fc - fnum).abs());
        }
        worst
    }

    #[test]
    fn hahn_matches_closed_form() {
        let seq = hahn(T).unwrap();
        assert!(max_dev(&seq, FilterShape::Hahn, 1000, 2.0 * PI * 40.0 / T) < 1e-8);
    }

    #[test]
    fn hahn_value_at_wt_2pi() {
        let f = filter_function_closed(FilterShape::Hahn, 2.0 * PI / T, T).unwrap();
        assert!((f - 8.0).abs() < 1e-12);
    }

    #[test]
    fn ramsey_low_frequency_limit() {
        // F/w^2 -> t^2/2 under this normalization.
        let w = 1e-4 / T;
        let f = filter_function_closed(FilterShape::Ramsey, w, T).unwrap();
        assert!((f / (w * w) - T * T / 2.0).abs() / (T * T / 2.0) < 1e-6);
        let seq = ramsey(T).unwrap();
        assert!(max_dev(&seq, FilterShape::Ramsey, 500, 40.0 / T) < 1e-10);
    }

    #[test]
    fn pdd_matches_closed_form_and_equals_hahn_at_n1() {
        let seq = pdd(7, T).unwrap();
        assert!(max_dev(&seq, FilterShape::Pdd { n: 7 }, 1000, 2.0 * PI * 140.0 / T) < 1e-8);
        for k in 1..200 {
            let wt = 0.1 * k as f64;
            let a = filter_function_closed(FilterShape::Pdd { n: 1 }, wt / T, T).unwrap();
            let b = filter_function_closed(FilterShape::Hahn, wt / T, T).unwrap();
            assert!((a - b).abs() < 1e-10, "wt={wt}: {a} vs {b}");
        }
    }

    #[test]
    fn cpmg_matches_closed_form_n16() {
        let seq = cpmg(16, T).unwrap();
        assert!(max_dev(&seq, FilterShape::Cpmg { n: 16 }, 1000, 2.0 * PI * 320.0 / T) < 1e-8);
    }

    #[test]
    fn udd1_equals_hahn_everywhere() {
        for k in 1..500 {
            let w = 0.05 * k as f64 / T;
            let a = filter_function_closed(FilterShape::Udd { n: 1 }, w, T).unwrap();
            let b = filter_function_closed(FilterShape::Hahn, w, T).unwrap();
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn udd_matches_numeric() {
        let seq = udd(9, T).unwrap();
        assert!(max_dev(&seq, FilterShape::Udd { n: 9 }, 1000, 2.0 * PI * 180.0 / T) < 1e-8);
    }

    #[test]
    fn cdd_matches_numeric_and_closed() {
        for level in 1..=4u32 {
            let seq = cdd(level, T).unwrap();
            assert!(
                max_dev(&seq, FilterShape::Cdd { level }, 800, 2.0 * PI * 100.0 / T) < 1e-8,
                "level {level}"
            );
        }
    }

    #[test]
    fn echo_families_have_zero_dc_response() {
        for seq in [hahn(T).unwrap(), cpmg(8, T).unwrap(), udd(5, T).unwrap()] {
            let segs = seq.toggling().unwrap();
            let area: f64 = segs.iter().map(|(a, b, s)| (b - a) * s).sum();
            assert!(area.abs() < 1e-15, "{:?}", seq.kind);
            assert_eq!(filter_function_numeric(&seq, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn cpmg_passband_peak_value_and_scaling() {
        // First resonance at w = pi N / t; peak value 2 N^2.
        for n in [8usize, 16] {
            let w_res = PI * n as f64 / T;
            let f = filter_function_closed(FilterShape::Cpmg { n }, w_res, T).unwrap();
            assert!(
                (f - 2.0 * (n * n) as f64).abs() < 1e-6 * (n * n) as f64,
                "n={n}: {f}"
            );
        }
        let f8 = filter_function_closed(FilterShape::Cpmg { n: 8 }, PI * 8.0 / T, T).unwrap();
        let f16 = filter_function_closed(FilterShape::Cpmg { n: 16 }, PI * 16.0 / T, T).unwrap();
        let ratio = f16 / f8;
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn parity_enforced() {
        assert!(pdd(4, T).is_err());
        assert!(cpmg(3, T).is_err());
        assert!(xy8(12, T).is_err());
        assert!(ramsey(-1.0).is_err());
    }

    #[test]
    fn sequence_durations_consistent() {
        for seq in [
            ramsey(T).unwrap(),
            hahn(T).unwrap(),
            pdd(5, T).unwrap(),
            cpmg(6, T).unwrap(),
            xy8(8, T).unwrap(),
            udd(7, T).unwrap(),
            cdd(3, T).unwrap(),
        ] {
            assert!(
                (seq.total_wait() - seq.total_t).abs() < 1e-15,
                "{:?}",
                seq.kind
            );
        }
    }

    #[test]
    fn cdd2_equals_cpmg2() {
        let seq = cdd(2, T).unwrap();
        assert_eq!(seq.n_pi, 2);
        for k in 1..300 {
            let w = 0.07 * k as f64 / T;
            let a = filter_function_closed(FilterShape::Cdd { level: 2 }, w, T).unwrap();
            let b = filter_function_closed(FilterShape::Cpmg { n: 2 }, w, T).unwrap();
            assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn resonance_spacing_formula() {
        let wl = 2.0 * PI * 2e6;
        let ap = 2.0 * PI * 10e3;
        let tau = resonance_spacing(wl, ap);
        assert!((tau - PI / (wl + ap / 2.0)).abs() < 1e-18);
    }

    #[test]
    fn dump_format() {
        let seq = hahn(1e-4).unwrap();
        let d = seq.dump();
        let lines: Vec<&str> = d.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[0].starts_with("PULSE nv_sq 90 90"));
        assert!(lines[1].starts_with("WAIT 0.00005"));
        assert!(lines[2].starts_with("PULSE nv_sq 0 180"));
    }

    #[test]
    fn delta_descriptor_weight() {
        let w0 = 2.0 * PI * 1e6;
        let d = delta_filter(w0, 1e-3);
        assert!((d.weight - 2.0 * w0 * w0 * 1e-3 / PI).abs() < 1e-3);
        assert_eq!(d.center, w0);
    }
}
