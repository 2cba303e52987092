//! `nv-sense`: configuration-driven front end for the sensing toolkit.
//!
//! Commands read a line-oriented config (`[section]` + `key = value`,
//! arrays as repeated keys) and write CSV files into `--out`. Frequencies
//! in configs and CSVs are Hz, durations seconds, fields tesla. Exit
//! codes: 2 parse error, 3 validation error, 4 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nv_sense_core::config::{RunConfig, Section, SweepSpec, DEFAULT_SEED};
use nv_sense_core::constants::{PhysicalConstants, TAU};
use nv_sense_core::error::Error;
use nv_sense_core::metrology::{
    magnetic_sensitivity, profile_paper_ambient_shallow, readout_fidelity, PhotonModel,
    SensingMode, SensitivityBudget,
};
use nv_sense_core::noise::{spectral_overlap, NoiseSpectrum};
use nv_sense_core::oracle::{FrameSystem, FrameTarget, NvManifold, Readout};
use nv_sense_core::protocols as proto;
use nv_sense_core::report::{fmt_f64, CsvTable};
use nv_sense_core::sequences::{self, FilterShape};
use nv_sense_core::validation;

#[derive(Parser)]
#[command(name = "nv-sense", version, about = "NV-center sensing calculator")]
struct Cli {
    /// Configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Named built-in parameter profile.
    #[arg(long, global = true)]
    profile: Option<String>,
    /// Output directory for CSV artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Random seed (fixed default keeps runs reproducible).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Also write the constructed pulse sequence as sequence.txt.
    #[arg(long, global = true)]
    dump_sequence: bool,
    /// Reduced-size validation run.
    #[arg(long, global = true)]
    quick: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// cw spectrum: transition lines with power-broadened linewidth.
    Odmr,
    /// Coherence decay xi(t) under a configured noise spectrum.
    Decohere,
    /// Filter function of a control family over a frequency grid.
    Filterfn,
    /// Synchronized-flip electron spectroscopy vs drive frequency.
    Deer,
    /// Decoupling-based nuclear detection vs pulse spacing (oracle).
    #[command(name = "nmr-dd")]
    NmrDd,
    /// Synchronous electron-nuclear flips vs pulse spacing (oracle).
    Endor,
    /// Dressed-state transfer vs drive amplitude (oracle).
    Hh,
    /// Bare relaxation curve and field-swept relaxation rates.
    Relaxometry,
    /// Zero-field level diagram of a coupled spin-1/2 pair.
    #[command(name = "zf-epr")]
    ZfEpr,
    /// Two-block correlation signal vs the inter-block delay.
    Correlate,
    /// Heterodyne record, spectrum, and frequency fit.
    Qdyne,
    /// Two-dimensional nuclear spectrum from the oracle.
    #[command(name = "nmr-2d")]
    Nmr2d,
    /// Sensitivity table for a budget or named profile.
    Sensitivity,
    /// Grid sweep of one or two parameters of an inner command.
    Sweep {
        /// Inner command producing the scalar outputs.
        inner: String,
    },
    /// Run the oracle-vs-analytic validation suite.
    Validate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(threads) = std::env::var("NV_SENSE_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", error_kind(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Parse { .. } => "parse",
        Error::QuadratureFailure(_) | Error::NonHermitian { .. } => "numerical",
        Error::Io(_) => "io",
        _ => "validation",
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } => 2,
        Error::QuadratureFailure(_) | Error::NonHermitian { .. } | Error::Io(_) => 4,
        _ => 3,
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = load_config(cli)?;
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    let consts = PhysicalConstants::default();
    std::fs::create_dir_all(&cli.out)?;
    match &cli.command {
        Command::Odmr => cmd_odmr(&cfg, &consts, &cli.out),
        Command::Decohere => cmd_decohere(&cfg, &consts, &cli.out),
        Command::Filterfn => cmd_filterfn(&cfg, &cli.out),
        Command::Deer => cmd_deer(&cfg, cli, &cli.out),
        Command::NmrDd => cmd_nmr_dd(&cfg, cli, &cli.out),
        Command::Endor => cmd_endor(&cfg, cli, &cli.out),
        Command::Hh => cmd_hh(&cfg, &cli.out),
        Command::Relaxometry => cmd_relaxometry(&cfg, &consts, &cli.out),
        Command::ZfEpr => cmd_zf_epr(&cfg, &cli.out),
        Command::Correlate => cmd_correlate(&cfg, &cli.out),
        Command::Qdyne => cmd_qdyne(&cfg, &consts, seed, &cli.out),
        Command::Nmr2d => cmd_nmr_2d(&cfg, &cli.out),
        Command::Sensitivity => cmd_sensitivity(&cfg, cli, &consts, &cli.out),
        Command::Sweep { inner } => cmd_sweep(&cfg, inner, &consts, seed, &cli.out),
        Command::Validate => cmd_validate(cli, seed, &cli.out),
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            RunConfig::parse(&text)
        }
        None => Ok(RunConfig::default()),
    }
}

fn sec_or_default<'a>(cfg: &'a RunConfig, name: &str) -> Section {
    cfg.section(name).cloned().unwrap_or_default()
}

fn getf(section: &Section, key: &str, default: f64) -> Result<f64, Error> {
    Ok(section.f64(key)?.unwrap_or(default))
}

fn grid(start: f64, stop: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![start];
    }
    (0..points)
        .map(|k| start + (stop - start) * k as f64 / (points - 1) as f64)
        .collect()
}

// -------------------------------------------------------------------

fn cmd_odmr(cfg: &RunConfig, consts: &PhysicalConstants, out: &Path) -> Result<(), Error> {
    cfg.check_keys(
        "odmr",
        &[
            "b0_t", "pi_perp", "pi_par", "rabi_hz", "t1_s", "t2_s", "f_start", "f_stop",
            "points", "contrast",
        ],
    )?;
    let s = sec_or_default(cfg, "odmr");
    let b0 = getf(&s, "b0_t", 2e-3)?;
    let pi_perp = getf(&s, "pi_perp", 0.0)?;
    let pi_par = getf(&s, "pi_par", 0.0)?;
    let rabi = TAU * getf(&s, "rabi_hz", 1e6)?;
    let t1 = getf(&s, "t1_s", 1e-4)?;
    let t2 = getf(&s, "t2_s", 2e-6)?;
    let contrast = getf(&s, "contrast", 0.18)?;
    let mut env = nv_sense_core::FieldEnvironment::default();
    env.b0 = nv_sense_core::nalgebra::Vector3::new(0.0, 0.0, b0);
    let lines = nv_sense_core::system::dq_transition_frequencies(&env, consts, pi_perp, pi_par)?;
    let lw = nv_sense_core::metrology::odmr_linewidth(rabi, t1, t2)?;
    let f_start = getf(&s, "f_start", lines.f_0_to_minus - 20.0 * lw)?;
    let f_stop = getf(&s, "f_stop", lines.f_0_to_plus + 20.0 * lw)?;
    let points = getf(&s, "points", 801.0)? as usize;
    let mut table = CsvTable::new(&["freq_hz", "pl"]);
    for f in grid(f_start, f_stop, points) {
        let mut pl = 1.0;
        for line in [lines.f_0_to_minus, lines.f_0_to_plus] {
            let x = (f - line) / (lw / 2.0);
            pl -= contrast / 2.0 / (1.0 + x * x);
        }
        table.push_f64(&[f, pl]);
    }
    table.write(&out.join("odmr.csv"))
}

fn parse_spectrum(cfg: &RunConfig, consts: &PhysicalConstants) -> Result<NoiseSpectrum, Error> {
    cfg.check_keys("noise", &["lorentzian", "white", "gamma_hz_per_t"])?;
    let s = sec_or_default(cfg, "noise");
    let gamma = s
        .f64("gamma_hz_per_t")?
        .map(|g| TAU * g)
        .unwrap_or(consts.gamma_nv);
    let mut spec = NoiseSpectrum::new(gamma);
    for entry in s.get_all("lorentzian") {
        let parts: Vec<f64> = entry
            .split_whitespace()
            .map(|p| {
                p.parse::<f64>().map_err(|_| {
                    Error::ConfigValidation(format!("lorentzian entry `{entry}`: bad number"))
                })
            })
            .collect::<Result<_, _>>()?;
        if parts.len() != 3 {
            return Err(Error::ConfigValidation(
                "lorentzian = <b_rms_t> <tau_c_s> <center_hz>".into(),
            ));
        }
        spec = spec.lorentzian(parts[0], parts[1], TAU * parts[2]);
    }
    for entry in s.get_all("white") {
        let level: f64 = entry
            .parse()
            .map_err(|_| Error::ConfigValidation(format!("white entry `{entry}`: bad number")))?;
        spec = spec.white(level);
    }
    if spec.components.is_empty() {
        spec = spec.lorentzian(1e-6, 1e-6, 0.0);
    }
    Ok(spec)
}

fn filter_shape(s: &Section) -> Result<(FilterShape, String), Error> {
    let kind = s.get("kind").unwrap_or("hahn").to_string();
    let n = getf(s, "n", 8.0)? as usize;
    let level = getf(s, "level", 2.0)? as u32;
    let shape = match kind.as_str() {
        "ramsey" => FilterShape::Ramsey,
        "hahn" => FilterShape::Hahn,
        "pdd" => FilterShape::Pdd { n },
        "cpmg" | "xy8" => FilterShape::Cpmg { n },
        "udd" => FilterShape::Udd { n },
        "cdd" => FilterShape::Cdd { level },
        other => {
            return Err(Error::ConfigValidation(format!(
                "unsupported filter kind `{other}` (spin_lock and t1 expose only the delta descriptor)"
            )))
        }
    };
    Ok((shape, kind))
}

fn cmd_decohere(cfg: &RunConfig, consts: &PhysicalConstants, out: &Path) -> Result<(), Error> {
    cfg.check_keys(
        "decohere",
        &["kind", "n", "level", "t_start", "t_stop", "points"],
    )?;
    let s = sec_or_default(cfg, "decohere");
    let (shape, _) = filter_shape(&s)?;
    let spec = parse_spectrum(cfg, consts)?;
    let t_grid = grid(
        getf(&s, "t_start", 1e-6)?,
        getf(&s, "t_stop", 50e-6)?,
        getf(&s, "points", 50.0)? as usize,
    );
    let curve = nv_sense_core::noise::decoherence(&spec, shape, &t_grid)?;
    let mut table = CsvTable::new(&["t_s", "xi"]);
    for (t, xi) in curve {
        table.push_f64(&[t, xi]);
    }
    table.write(&out.join("decohere.csv"))
}

fn cmd_filterfn(cfg: &RunConfig, out: &Path) -> Result<(), Error> {
    cfg.check_keys(
        "filterfn",
        &["kind", "n", "level", "t", "f_start", "f_stop", "points"],
    )?;
    let s = sec_or_default(cfg, "filterfn");
    let (shape, _) = filter_shape(&s)?;
    let t = getf(&s, "t", 1e-4)?;
    let n = getf(&s, "n", 8.0)?;
    let f_stop_default = 20.0 * n.max(1.0) / t / TAU;
    let f_grid = grid(
        getf(&s, "f_start", 0.0)?,
        getf(&s, "f_stop", f_stop_default)?,
        getf(&s, "points", 1000.0)? as usize,
    );
    let mut table = CsvTable::new(&["omega_hz", "filter"]);
    for f in f_grid {
        let v = sequences::filter_function_closed(shape, TAU * f, t)?;
        table.push_f64(&[f, v]);
    }
    table.write(&out.join("filterfn.csv"))
}

/// Electron targets of the drive-frequency spectrum: each row is
/// `target = <coupling_hz> <line_hz> [<line_hz> ...]`.
fn deer_targets(s: &Section) -> Result<Vec<(f64, Vec<f64>)>, Error> {
    let rows = s.get_all("target");
    if rows.is_empty() {
        // nitroxide-like default: three hyperfine lines around the bare
        // electron frequency at 10 mT
        let f_e = 280.4e6;
        let a_iso = 45e6;
        return Ok(vec![(0.04e6, vec![f_e - a_iso, f_e, f_e + a_iso])]);
    }
    rows.iter()
        .map(|row| {
            let nums: Vec<f64> = row
                .split_whitespace()
                .map(|p| {
                    p.parse::<f64>().map_err(|_| {
                        Error::ConfigValidation(format!("target entry `{row}`: bad number"))
                    })
                })
                .collect::<Result<_, _>>()?;
            if nums.len() < 2 {
                return Err(Error::ConfigValidation(
                    "target = <coupling_hz> <line_hz> [...]".into(),
                ));
            }
            Ok((nums[0], nums[1..].to_vec()))
        })
        .collect()
}

fn cmd_deer(cfg: &RunConfig, cli: &Cli, out: &Path) -> Result<(), Error> {
    cfg.check_keys(
        "deer",
        &["n", "tau", "f_start", "f_stop", "points", "linewidth_hz", "target"],
    )?;
    let s = sec_or_default(cfg, "deer");
    let n = getf(&s, "n", 16.0)? as usize;
    let tau = getf(&s, "tau", 0.5e-6)?;
    let lw = getf(&s, "linewidth_hz", 5e6)?;
    let targets = deer_targets(&s)?;
    let f_min = targets
        .iter()
        .flat_map(|(_, lines)| lines.iter())
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let f_max = targets
        .iter()
        .flat_map(|(_, lines)| lines.iter())
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let f_grid = grid(
        getf(&s, "f_start", f_min - 20.0 * lw)?,
        getf(&s, "f_stop", f_max + 20.0 * lw)?,
        getf(&s, "points", 601.0)? as usize,
    );
    let mut table = CsvTable::new(&["rf_hz", "signal"]);
    for f in f_grid {
        // drive effectiveness per target from its line profile
        let couplings: Vec<f64> = targets
            .iter()
            .map(|(nu, lines)| {
                let w: f64 = lines
                    .iter()
                    .map(|line| {
                        let x = (f - line) / lw;
                        1.0 / (1.0 + x * x)
                    })
                    .sum::<f64>()
                    .min(1.0);
                TAU * nu * w
            })
            .collect();
        table.push_f64(&[f, proto::deer_signal(&couplings, n, tau)]);
    }
    table.write(&out.join("deer.csv"))?;
    if cli.dump_sequence {
        let seq = sequences::deer(n, tau, targets.len())?;
        std::fs::write(out.join("sequence.txt"), seq.dump())?;
    }
    Ok(())
}

fn nmr_spins(s: &Section) -> Result<Vec<(f64, f64, f64)>, Error> {
    let rows = s.get_all("spin");
    if rows.is_empty() {
        return Ok(vec![(0.0, 10e3, 0.0)]);
    }
    rows.iter()
        .map(|row| {
            let nums: Vec<f64> = row
                .split_whitespace()
                .map(|p| {
                    p.parse::<f64>().map_err(|_| {
                        Error::ConfigValidation(format!("spin entry `{row}`: bad number"))
                    })
                })
                .collect::<Result<_, _>>()?;
            match nums.len() {
                2 => Ok((nums[0], nums[1], 0.0)),
                3 => Ok((nums[0], nums[1], nums[2])),
                _ => Err(Error::ConfigValidation(
                    "spin = <a_par_hz> <a_perp_hz> [<polarization>]".into(),
                )),
            }
        })
        .collect()
}

fn nmr_frame(s: &Section) -> Result<(FrameSystem, Vec<f64>, f64), Error> {
    let larmor = TAU * getf(s, "larmor_hz", 2e6)?;
    let spins = nmr_spins(s)?;
    let mut frame = FrameSystem::new(NvManifold::SingleQuantum);
    let mut pols = Vec::new();
    for (a_par, a_perp, pol) in &spins {
        frame.targets.push(FrameTarget {
            larmor,
            a_par: TAU * a_par,
            a_perp: TAU * a_perp,
            j_couplings: vec![],
        });
        pols.push(*pol);
    }
    Ok((frame, pols, larmor))
}

fn cmd_nmr_dd(cfg: &RunConfig, cli: &Cli, out: &Path) -> Result<(), Error> {
    cfg.check_keys(
        "nmr",
        &["larmor_hz", "spin", "n", "mode", "tau_start", "tau_stop", "points"],
    )?;
    let s = sec_or_default(cfg, "nmr");
    let (frame, pols, larmor) = nmr_frame(&s)?;
    let n = getf(&s, "n", 32.0)? as usize;
    let mode = match s.get("mode").unwrap_or("real") {
        "real" => Readout::Real,
        "imag" => Readout::Imag,
        other => {
            return Err(Error::ConfigValidation(format!(
                "mode must be real|imag, got {other}"
            )))
        }
    };
    let tau_res = sequences::resonance_spacing(larmor, frame.targets[0].a_par);
    let tau_grid = grid(
        getf(&s, "tau_start", 0.94 * tau_res)?,
        getf(&s, "tau_stop", 1.06 * tau_res)?,
        getf(&s, "points", 49.0)? as usize,
    );
    let mut table = CsvTable::new(&["tau_s", "signal"]);
    for tau in tau_grid {
        let seq = sequences::cpmg(n, n as f64 * tau)?;
        let initial = frame.initial_state_polarized(&pols);
        let p = nv_sense_core::oracle::run_sequence_from(&frame, &initial, &seq, mode)?;
        table.push_f64(&[tau, p]);
    }
    table.write(&out.join("nmr_dd.csv"))?;
    if cli.dump_sequence {
        let seq = sequences::cpmg(n, n as f64 * tau_res)?;
        std::fs::write(out.join("sequence.txt"), seq.dump())?;
    }
    Ok(())
}

fn cmd_endor(cfg: &RunConfig, cli: &Cli, out: &Path) -> Result<(), Error> {
    cfg.check_keys(
        "endor",
        &["larmor_hz", "spin", "n", "mode", "tau_start", "tau_stop", "points"],
    )?;
    let s = sec_or_default(cfg, "endor");
    let (frame, pols, _) = nmr_frame(&s)?;
    let n = getf(&s, "n", 1.0)? as usize;
    let mode = match s.get("mode").unwrap_or("real") {
        "real" => Readout::Real,
        "imag" => Readout::Imag,
        other => {
            return Err(Error::ConfigValidation(format!(
                "mode must be real|imag, got {other}"
            )))
        }
    };
    let tau_grid = grid(
        getf(&s, "tau_start", 0.5e-6)?,
        getf(&s, "tau_stop", 10e-6)?,
        getf(&s, "points", 40.0)? as usize,
    );
    let mut table = CsvTable::new(&["tau_s", "signal"]);
    for tau in tau_grid {
        let seq = sequences::endor(n, tau, frame.targets.len())?;
        let initial = frame.initial_state_polarized(&pols);
        let p = nv_sense_core::oracle::run_sequence_from(&frame, &initial, &seq, mode)?;
        table.push_f64(&[tau, p]);
    }
    table.write(&out.join("endor.csv"))?;
    if cli.dump_sequence {
        let tau_mid = grid(
            getf(&s, "tau_start", 0.5e-6)?,
            getf(&s, "tau_stop", 10e-6)?,
            3,
        )[1];
        let seq = sequences::endor(n, tau_mid, frame.targets.len())?;
        std::fs::write(out.join("sequence.txt"), seq.dump())?;
    }
    Ok(())
}

fn cmd_hh(cfg: &RunConfig, out: &Path) -> Result<(), Error> {
    cfg.check_keys(
        "hh",
        &["larmor_hz", "a_par_hz", "a_perp_hz", "t_s", "rabi_start", "rabi_stop", "points"],
    )?;
    let s = sec_or_default(cfg, "hh");
    let larmor = TAU * getf(&s, "larmor_hz", 1.5e6)?;
    let a_par = TAU * getf(&s, "a_par_hz", 0.0)?;
    let a_perp = TAU * getf(&s, "a_perp_hz", 30e3)?;
    let t_s = getf(&s, "t_s", 2.0 * std::f64::consts::PI / (a_perp / 4.0) / 2.0)?;
    let rabi_grid = grid(
        TAU * getf(&s, "rabi_start", 0.8 * larmor / TAU)?,
        TAU * getf(&s, "rabi_stop", 1.2 * larmor / TAU)?,
        getf(&s, "points", 81.0)? as usize,
    );
    let mut table = CsvTable::new(&["rabi_hz", "transfer"]);
    for omega in rabi_grid {
        let p = proto::hh_oracle_population(omega, larmor, a_par, a_perp, &[t_s])?[0];
        table.push_f64(&[omega / TAU, p]);
    }
    table.write(&out.join("hh.csv"))
}

fn cmd_relaxometry(cfg: &RunConfig, consts: &PhysicalConstants, out: &Path) -> Result<(), Error> {
    cfg.check_keys(
        "relaxometry",
        &[
            "gamma_plus", "gamma_minus", "t_start", "t_stop", "points", "b0_start", "b0_stop",
            "b0_points", "f_ion_hz", "b_rms_t", "gamma2_hz", "gamma_target_hz_per_t",
        ],
    )?;
    let s = sec_or_default(cfg, "relaxometry");
    let gp = getf(&s, "gamma_plus", 1e3)?;
    let gm = getf(&s, "gamma_minus", 1e3)?;
    let t_grid = grid(
        getf(&s, "t_start", 0.0)?,
        getf(&s, "t_stop", 5.0 / gp.max(gm).max(1e-9))?,
        getf(&s, "points", 60.0)? as usize,
    );
    let mut table = CsvTable::new(&["t_s", "p0"]);
    for t in t_grid {
        table.push_f64(&[t, nv_sense_core::noise::relaxometry_population(t, gp, gm)?]);
    }
    table.write(&out.join("relaxometry.csv"))?;

    // optional field sweep of the overlap rates
    if s.get("b0_start").is_some() {
        let gamma_tar = TAU * getf(&s, "gamma_target_hz_per_t", 28.03e9)?;
        let f_ion = getf(&s, "f_ion_hz", 1e8)?;
        let b_rms = getf(&s, "b_rms_t", 1e-6)?;
        let gamma2 = TAU * getf(&s, "gamma2_hz", 1e6)?;
        let b_grid = grid(
            getf(&s, "b0_start", 0.04)?,
            getf(&s, "b0_stop", 0.06)?,
            getf(&s, "b0_points", 41.0)? as usize,
        );
        let mut t2 = CsvTable::new(&["b0_t", "gamma1_minus", "gamma1_plus"]);
        for b0 in b_grid {
            let spec = NoiseSpectrum::new(consts.gamma_nv).lorentzian(
                b_rms,
                1.0 / f_ion,
                gamma_tar * b0,
            );
            let minus = spectral_overlap(&spec, consts.d_zfs - consts.gamma_nv.abs() * b0, gamma2)?;
            let plus = spectral_overlap(&spec, consts.d_zfs + consts.gamma_nv.abs() * b0, gamma2)?;
            t2.push_f64(&[b0, minus, plus]);
        }
        t2.write(&out.join("relaxometry_field.csv"))?;
    }
    Ok(())
}

fn cmd_zf_epr(cfg: &RunConfig, out: &Path) -> Result<(), Error> {
    cfg.check_keys("zf_epr", &["a_perp_hz", "a_par_hz"])?;
    let s = sec_or_default(cfg, "zf_epr");
    let a_perp = TAU * getf(&s, "a_perp_hz", 14e6)?;
    let a_par = TAU * getf(&s, "a_par_hz", 100e6)?;
    let levels = proto::zf_epr(a_perp, a_par);
    let mut table = CsvTable::new(&["transition", "freq_hz", "allowed", "resonant_rabi_hz"]);
    for t in &levels.transitions {
        table.push(vec![
            t.label.clone(),
            fmt_f64(t.delta_omega / TAU),
            (t.allowed as u8).to_string(),
            fmt_f64(t.resonant_rabi / TAU),
        ]);
    }
    table.write(&out.join("zf_epr.csv"))?;
    let mut lv = CsvTable::new(&["level", "omega_hz"]);
    for (name, w) in [
        ("S0", levels.omega_s0),
        ("T0", levels.omega_t0),
        ("Tpm", levels.omega_t_pm),
    ] {
        lv.push(vec![name.into(), fmt_f64(w / TAU)]);
    }
    lv.write(&out.join("zf_epr_levels.csv"))
}

fn cmd_correlate(cfg: &RunConfig, out: &Path) -> Result<(), Error> {
    cfg.check_keys(
        "correlate",
        &["freq_hz", "amplitude", "dt_start", "dt_stop", "points"],
    )?;
    let s = sec_or_default(cfg, "correlate");
    let omega = TAU * getf(&s, "freq_hz", 5e3)?;
    let amp = getf(&s, "amplitude", 1.0)?;
    let dt_grid = grid(
        getf(&s, "dt_start", 0.0)?,
        getf(&s, "dt_stop", 2e-3)?,
        getf(&s, "points", 256.0)? as usize,
    );
    let mut table = CsvTable::new(&["dt_s", "signal"]);
    for dt in dt_grid {
        table.push_f64(&[dt, proto::correlation_signal(omega, dt, amp)]);
    }
    table.write(&out.join("correlate.csv"))
}

fn qdyne_params(s: &Section) -> Result<(f64, f64, f64, f64, f64, f64, PhotonModel), Error> {
    let f_lo = getf(s, "f_lo_hz", 1000.0)?;
    let f_signal = getf(s, "f_signal_hz", f_lo + 10.0)?;
    let b_ac = getf(s, "b_ac_t", 2e-6)?;
    let t_s = getf(s, "t_s", 10e-6)?;
    let t_exp = getf(s, "t_exp", 10.0)?;
    let phase = getf(s, "phase_rad", 0.0)?;
    let photon = PhotonModel::new(getf(s, "n0", 20.0)?, getf(s, "n1", 10.0)?)?;
    Ok((f_signal, b_ac, t_s, f_lo, t_exp, phase, photon))
}

fn cmd_qdyne(
    cfg: &RunConfig,
    consts: &PhysicalConstants,
    seed: u64,
    out: &Path,
) -> Result<(), Error> {
    cfg.check_keys(
        "qdyne",
        &["f_lo_hz", "f_signal_hz", "b_ac_t", "t_s", "t_exp", "phase_rad", "n0", "n1"],
    )?;
    let s = sec_or_default(cfg, "qdyne");
    let (f_signal, b_ac, t_s, f_lo, t_exp, phase, photon) = qdyne_params(&s)?;
    let rec = proto::qdyne_simulate(f_signal, b_ac, t_s, f_lo, t_exp, phase, &photon, consts, seed)?;
    let mut record = CsvTable::new(&["shot", "phase_rad", "counts"]);
    for (n, (&phi, &k)) in rec.phases.iter().zip(rec.counts.iter()).enumerate() {
        record.push(vec![n.to_string(), fmt_f64(phi), k.to_string()]);
    }
    record.write(&out.join("qdyne_record.csv"))?;
    let spec = proto::qdyne_spectrum(&rec);
    let mut sp = CsvTable::new(&["freq_hz", "amplitude"]);
    for (f, a) in &spec {
        sp.push_f64(&[*f, *a]);
    }
    sp.write(&out.join("qdyne_spectrum.csv"))?;
    let (f_hat, sigma) = proto::qdyne_fit_frequency(&rec)?;
    let mut fit = CsvTable::new(&["quantity", "value"]);
    fit.push(vec!["beat_fit_hz".into(), fmt_f64(f_hat)]);
    fit.push(vec!["beat_sigma_hz".into(), fmt_f64(sigma)]);
    fit.push(vec![
        "beat_folded_hz".into(),
        fmt_f64(proto::fold_frequency(f_signal - f_lo, f_lo)),
    ]);
    fit.write(&out.join("qdyne_fit.csv"))
}

fn cmd_nmr_2d(cfg: &RunConfig, out: &Path) -> Result<(), Error> {
    cfg.check_keys(
        "nmr2d",
        &["f1_hz", "f2_hz", "j_hz", "beta", "points", "dt_s"],
    )?;
    let s = sec_or_default(cfg, "nmr2d");
    let n = getf(&s, "points", 64.0)? as usize;
    let dt = getf(&s, "dt_s", 10e-6)?;
    let bin = 1.0 / (n as f64 * dt);
    let cfg2 = proto::TwoDNmrConfig {
        larmor: [
            TAU * getf(&s, "f1_hz", 20.0 * bin)?,
            TAU * getf(&s, "f2_hz", 25.0 * bin)?,
        ],
        j_coupling: TAU * getf(&s, "j_hz", 2e3)?,
        readout_beta: [getf(&s, "beta", 0.4)?, getf(&s, "beta", 0.4)?],
        t1_grid: (0..n).map(|k| k as f64 * dt).collect(),
        t2_grid: (0..n).map(|k| k as f64 * dt).collect(),
    };
    let spec = proto::two_d_nmr(&cfg2)?;
    let mut table = CsvTable::new(&["f1_hz", "f2_hz", "amplitude"]);
    for (i1, f1) in spec.f1.iter().enumerate() {
        for (i2, f2) in spec.f2.iter().enumerate() {
            table.push_f64(&[*f1, *f2, spec.amplitude[i1][i2]]);
        }
    }
    table.write(&out.join("nmr_2d.csv"))
}

fn budget_from(cfg: &RunConfig, cli: &Cli) -> Result<SensitivityBudget, Error> {
    if let Some(profile) = &cli.profile {
        return match profile.as_str() {
            "paper-ambient-shallow" => Ok(profile_paper_ambient_shallow()),
            other => Err(Error::ConfigValidation(format!("unknown profile `{other}`"))),
        };
    }
    cfg.check_keys(
        "budget",
        &[
            "t_accu", "t_ini", "t_read", "xi", "f_read", "f_ini", "distance_m",
            "gamma_target_hz_per_t", "polarization", "n0", "n1",
        ],
    )?;
    let s = sec_or_default(cfg, "budget");
    let default = profile_paper_ambient_shallow();
    let f_read = match (s.f64("n0")?, s.f64("n1")?) {
        (Some(n0), Some(n1)) => readout_fidelity(&PhotonModel::new(n0, n1)?),
        _ => getf(&s, "f_read", default.f_read)?,
    };
    Ok(SensitivityBudget {
        t_accu: getf(&s, "t_accu", default.t_accu)?,
        t_ini: getf(&s, "t_ini", default.t_ini)?,
        t_read: getf(&s, "t_read", default.t_read)?,
        xi: getf(&s, "xi", default.xi)?,
        f_read,
        f_ini: getf(&s, "f_ini", default.f_ini)?,
        distance: getf(&s, "distance_m", default.distance)?,
        gamma_target: TAU * getf(&s, "gamma_target_hz_per_t", default.gamma_target / TAU)?,
        polarization: getf(&s, "polarization", default.polarization)?,
    })
}

fn sensitivity_rows(
    budget: &SensitivityBudget,
    consts: &PhysicalConstants,
) -> Result<Vec<(String, f64, String)>, Error> {
    let pol = magnetic_sensitivity(budget, SensingMode::Polarization, consts)?;
    let fluc = magnetic_sensitivity(budget, SensingMode::Fluctuation, consts)?;
    let spin_pol =
        nv_sense_core::metrology::spin_number_sensitivity(budget, SensingMode::Polarization, consts)?;
    let spin_fluc =
        nv_sense_core::metrology::spin_number_sensitivity(budget, SensingMode::Fluctuation, consts)?;
    Ok(vec![
        ("eta_pol".into(), pol, "T Hz^-1/2".into()),
        ("eta_fluc".into(), fluc, "T^2 Hz^-1/2".into()),
        ("eta_spin_pol".into(), spin_pol, "spins Hz^-1/2".into()),
        ("eta_spin_fluc".into(), spin_fluc, "spins Hz^-1/2".into()),
        (
            "polarization_sign".into(),
            budget.polarization.signum(),
            "".into(),
        ),
    ])
}

fn cmd_sensitivity(
    cfg: &RunConfig,
    cli: &Cli,
    consts: &PhysicalConstants,
    out: &Path,
) -> Result<(), Error> {
    let budget = budget_from(cfg, cli)?;
    let rows = sensitivity_rows(&budget, consts)?;
    let mut table = CsvTable::new(&["quantity", "value", "units"]);
    for (name, value, units) in &rows {
        table.push(vec![name.clone(), fmt_f64(*value), units.clone()]);
    }
    print!("{}", table.to_string());
    table.write(&out.join("sensitivity.csv"))
}

/// Scalar outputs of an inner command with one section key overridden.
fn sweep_scalars(
    inner: &str,
    cfg: &RunConfig,
    consts: &PhysicalConstants,
    seed: u64,
) -> Result<Vec<(String, f64)>, Error> {
    match inner {
        "deer" => {
            let s = sec_or_default(cfg, "deer");
            let n = getf(&s, "n", 16.0)? as usize;
            let tau = getf(&s, "tau", 0.5e-6)?;
            let couplings: Vec<f64> = {
                let rows = deer_targets(&s)?;
                rows.iter().map(|(nu, _)| TAU * nu).collect()
            };
            Ok(vec![(
                "signal".into(),
                proto::deer_signal(&couplings, n, tau),
            )])
        }
        "nmr-dd" => {
            let s = sec_or_default(cfg, "nmr");
            let (frame, pols, _) = nmr_frame(&s)?;
            let n = getf(&s, "n", 32.0)? as usize;
            let tau = s.f64("tau_start")?.ok_or_else(|| {
                Error::ConfigValidation("sweep over nmr needs tau_start as the value key".into())
            })?;
            let seq = sequences::cpmg(n, n as f64 * tau)?;
            let initial = frame.initial_state_polarized(&pols);
            let p = nv_sense_core::oracle::run_sequence_from(&frame, &initial, &seq, Readout::Real)?;
            Ok(vec![("signal".into(), p)])
        }
        "sensitivity" => {
            let cli_stub = Cli {
                config: None,
                profile: None,
                out: PathBuf::from("."),
                seed: None,
                dump_sequence: false,
                quick: false,
                command: Command::Sensitivity,
            };
            let budget = budget_from(cfg, &cli_stub)?;
            Ok(sensitivity_rows(&budget, consts)?
                .into_iter()
                .map(|(n, v, _)| (n, v))
                .collect())
        }
        "qdyne" => {
            let s = sec_or_default(cfg, "qdyne");
            let (f_signal, b_ac, t_s, f_lo, t_exp, phase, photon) = qdyne_params(&s)?;
            let mut se = 0.0;
            let reps = 4;
            for r in 0..reps {
                let rec = proto::qdyne_simulate(
                    f_signal,
                    b_ac,
                    t_s,
                    f_lo,
                    t_exp,
                    phase + 0.1 * r as f64,
                    &photon,
                    consts,
                    seed ^ (r as u64 + 1),
                )?;
                let (f_hat, _) = proto::qdyne_fit_frequency(&rec)?;
                let err = f_hat - (f_signal - f_lo);
                se += err * err;
            }
            Ok(vec![(
                "freq_rms_error_hz".into(),
                (se / reps as f64).sqrt(),
            )])
        }
        "relaxometry" => {
            let s = sec_or_default(cfg, "relaxometry");
            let b0 = s.f64("b0_start")?.ok_or_else(|| {
                Error::ConfigValidation("sweep over relaxometry needs b0_start".into())
            })?;
            let gamma_tar = TAU * getf(&s, "gamma_target_hz_per_t", 28.03e9)?;
            let f_ion = getf(&s, "f_ion_hz", 1e8)?;
            let b_rms = getf(&s, "b_rms_t", 1e-6)?;
            let gamma2 = TAU * getf(&s, "gamma2_hz", 1e6)?;
            let spec = NoiseSpectrum::new(consts.gamma_nv).lorentzian(
                b_rms,
                1.0 / f_ion,
                gamma_tar * b0,
            );
            let minus = spectral_overlap(&spec, consts.d_zfs - consts.gamma_nv.abs() * b0, gamma2)?;
            Ok(vec![("gamma1_minus".into(), minus)])
        }
        other => Err(Error::ConfigValidation(format!(
            "sweep does not support inner command `{other}`"
        ))),
    }
}

fn override_key(cfg: &RunConfig, path: &str, value: f64) -> Result<RunConfig, Error> {
    let (section, key) = path.split_once('.').ok_or_else(|| {
        Error::ConfigValidation(format!("sweep parameter `{path}` must be section.key"))
    })?;
    // rebuild the config text with the key replaced
    let mut text = String::new();
    let mut replaced = false;
    // serialize existing sections
    for name in [
        "system", "deer", "nmr", "endor", "hh", "noise", "decohere", "filterfn", "relaxometry",
        "budget", "qdyne", "nmr2d", "correlate", "zf_epr", "odmr",
    ] {
        for s in cfg.sections_named(name) {
            text.push_str(&format!("[{name}]\n"));
            for k in s.keys() {
                for v in s.get_all(k) {
                    if name == section && k == key {
                        continue;
                    }
                    text.push_str(&format!("{k} = {v}\n"));
                }
            }
            if name == section {
                text.push_str(&format!("{key} = {value}\n"));
                replaced = true;
            }
        }
    }
    if !replaced {
        text.push_str(&format!("[{section}]\n{key} = {value}\n"));
    }
    RunConfig::parse(&text)
}

fn cmd_sweep(
    cfg: &RunConfig,
    inner: &str,
    consts: &PhysicalConstants,
    seed: u64,
    out: &Path,
) -> Result<(), Error> {
    let sweep_sections = cfg.sections_named("sweep");
    if sweep_sections.is_empty() {
        return Err(Error::ConfigValidation("sweep needs a [sweep] section".into()));
    }
    if sweep_sections.len() > 2 {
        return Err(Error::ConfigValidation("at most 2 sweep dimensions".into()));
    }
    let specs: Vec<SweepSpec> = sweep_sections
        .iter()
        .map(|s| SweepSpec::from_section(s))
        .collect::<Result<_, _>>()?;
    let outer = &specs[0];
    let inner_spec = specs.get(1);
    // probe the scalar names once
    let probe_cfg = override_key(cfg, &outer.parameter, outer.grid()[0])?;
    let probe_cfg = match inner_spec {
        Some(sp) => override_key(&probe_cfg, &sp.parameter, sp.grid()[0])?,
        None => probe_cfg,
    };
    let names: Vec<String> = sweep_scalars(inner, &probe_cfg, consts, seed)?
        .into_iter()
        .map(|(n, _)| n)
        .collect();
    let mut header: Vec<String> = vec![outer.parameter.clone()];
    if let Some(sp) = inner_spec {
        header.push(sp.parameter.clone());
    }
    header.extend(names.iter().cloned());
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut table = CsvTable::new(&header_refs);
    for v_outer in outer.grid() {
        let cfg1 = override_key(cfg, &outer.parameter, v_outer)?;
        match inner_spec {
            None => {
                let scalars = sweep_scalars(inner, &cfg1, consts, seed)?;
                let mut row = vec![v_outer];
                row.extend(scalars.iter().map(|(_, v)| *v));
                table.push_f64(&row);
            }
            Some(sp) => {
                for v_inner in sp.grid() {
                    let cfg2 = override_key(&cfg1, &sp.parameter, v_inner)?;
                    let scalars = sweep_scalars(inner, &cfg2, consts, seed)?;
                    let mut row = vec![v_outer, v_inner];
                    row.extend(scalars.iter().map(|(_, v)| *v));
                    table.push_f64(&row);
                }
            }
        }
    }
    table.write(&out.join("sweep.csv"))
}

fn cmd_validate(cli: &Cli, seed: u64, out: &Path) -> Result<(), Error> {
    let results = validation::run_all(cli.quick, seed);
    for r in &results {
        println!("{}", r.line());
    }
    validation::results_csv(&results).write(&out.join("validate.csv"))?;
    let failures = results.iter().filter(|r| !r.passed).count();
    if failures > 0 {
        return Err(Error::InvalidInput(format!(
            "{failures} validation check(s) failed"
        )));
    }
    Ok(())
}
