use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use heralded_qe::config::{demo_config, RunConfig};
use heralded_qe::io::{self, Report};
use heralded_qe::jsa::{deduce_sigma0_from_scan, xi_curve};
use heralded_qe::pipeline::{calibrate, fit_raman, XiSource};
use heralded_qe::report::{calibration_plot_data, calibration_report};
use heralded_qe::simulator::{simulate_power_sweep, stationary_rates};
use heralded_qe::spectral::{width_angular_to_nm, width_param_from_fwhm, FilterSpec};
use heralded_qe::uncertainty::{budget_report, mc_resample_oracle, propagate_rif, UncertaintyInputs};
use heralded_qe::Error;

/// Heralded single-photon detector efficiency calibration.
#[derive(Parser)]
#[command(name = "heralded-qe", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Shape {
    Gaussian,
    Supergaussian6,
}

#[derive(Subcommand)]
enum Command {
    /// Collection efficiency against the filter-to-spectrum width ratio.
    XiCurve {
        #[arg(long, value_enum)]
        shape: Shape,
        /// Comma-separated width ratios.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        ratios: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a power sweep of gated photon counts.
    Simulate {
        /// Run configuration; the built-in demo when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Gates per power point.
        #[arg(long)]
        gates: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write a Raman-only sweep (seed + 1) to this file.
        #[arg(long)]
        raman: Option<PathBuf>,
        /// Check every count against the stationary rates of the counting chain.
        #[arg(long)]
        verify: bool,
    },
    /// Deduce the detector efficiency from measured counts.
    Calibrate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        counts: PathBuf,
        /// Raman-only counts for the `s1'` fit.
        #[arg(long)]
        raman: Option<PathBuf>,
        /// Signal-filter scan used to deduce the heralded width.
        #[arg(long)]
        scan: Option<PathBuf>,
        /// Fixed collection efficiency.
        #[arg(long)]
        xi: Option<f64>,
        /// Report file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Uncertainty table as CSV.
        #[arg(long)]
        budget: Option<PathBuf>,
        /// Directory for figure-ready `x,value` tables.
        #[arg(long)]
        emit_plot_data: Option<PathBuf>,
    },
    /// Fit a scan of the signal filter center.
    ScanFit {
        #[arg(long)]
        scan: PathBuf,
        /// Take the signal filter from this configuration.
        #[arg(long, conflicts_with_all = ["filter_center_nm", "filter_fwhm_nm"])]
        config: Option<PathBuf>,
        #[arg(long, requires = "filter_fwhm_nm")]
        filter_center_nm: Option<f64>,
        #[arg(long, requires = "filter_center_nm")]
        filter_fwhm_nm: Option<f64>,
        #[arg(long, default_value_t = 1)]
        filter_order: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the normalized Raman coefficient from Raman-only counts.
    RamanFit {
        #[arg(long)]
        raman: PathBuf,
        /// Idler transmission and dark probability from this configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        eta_ti: Option<f64>,
        #[arg(long)]
        dark_idler: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Propagate relative deviations to the efficiency.
    Uncertainty {
        #[arg(long, default_value_t = 0.1)]
        eta_ti: f64,
        /// Normalized Raman coefficient, 10⁻³ photons per pulse per mW.
        #[arg(long, default_value_t = 83.5)]
        s1_prime: f64,
        #[arg(long, default_value_t = 0.18)]
        p_ave_mw: f64,
        /// Detected SFWM idler rate per pulse.
        #[arg(long, default_value_t = 8e-4)]
        r_if: f64,
        /// Raman-to-SFWM ratios, one budget row each; overrides the Raman rate.
        #[arg(long, value_delimiter = ',')]
        raman_ratios: Vec<f64>,
        #[arg(long, default_value_t = 0.04)]
        rel_eta_ti: f64,
        #[arg(long, default_value_t = 0.04)]
        rel_eta_ts: f64,
        #[arg(long, default_value_t = 0.02)]
        rel_p_ave: f64,
        #[arg(long, default_value_t = 0.001)]
        rel_n_t: f64,
        #[arg(long, default_value_t = 0.001)]
        rel_r_ri: f64,
        #[arg(long, default_value_t = 0.01)]
        rel_c_c: f64,
        #[arg(long, default_value_t = 0.04)]
        rel_xi_s: f64,
        /// Monte Carlo draws for a resampling cross-check; 0 skips it.
        #[arg(long, default_value_t = 0)]
        mc_draws: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        budget: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Domain(_) => 2,
        Error::Config(_) | Error::Input { .. } | Error::Io(_) => 3,
        Error::Fit(_) | Error::Numerical { .. } => 4,
    }
}

fn load_config(path: Option<&Path>) -> heralded_qe::Result<RunConfig> {
    match path {
        Some(p) => RunConfig::from_path(p),
        None => Ok(demo_config()),
    }
}

fn emit(bytes: &[u8], out: Option<&Path>) -> heralded_qe::Result<()> {
    match out {
        Some(p) => io::atomic_write(p, bytes),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> heralded_qe::Result<()> {
    match cli.command {
        Command::XiCurve { shape, ratios, out } => {
            let order = match shape {
                Shape::Gaussian => 1,
                Shape::Supergaussian6 => 3,
            };
            emit(&io::curve_csv(&xi_curve(order, &ratios)?)?, out.as_deref())
        }

        Command::Simulate {
            config,
            seed,
            gates,
            out,
            raman,
            verify,
        } => {
            let cfg = load_config(config.as_deref())?;
            let exp = cfg.experiment()?;
            let seed = seed.unwrap_or(cfg.run.seed);
            let gates = gates.unwrap_or(cfg.run.gates_per_point);
            let counts = simulate_power_sweep(&exp, &cfg.run.powers_mw, gates, seed)?;
            let raman_counts = match &raman {
                Some(_) => Some(simulate_power_sweep(
                    &exp.raman_only(),
                    cfg.raman_powers(),
                    gates,
                    seed.wrapping_add(1),
                )?),
                None => None,
            };
            if verify {
                let mut bad = 0;
                let runs = [(&exp, &counts)].into_iter().chain(raman_counts.as_ref().map(|r| (&exp, r)));
                for (i, (e, records)) in runs.enumerate() {
                    let e = if i == 0 { *e } else { e.raman_only() };
                    for r in records {
                        let m = stationary_rates(&e, r.p_ave_mw)?;
                        let checks = [
                            ("singles_signal", r.singles_signal, m.singles_signal),
                            ("singles_idler", r.singles_idler, m.singles_idler),
                            ("coincidences_raw", r.coincidences_raw, m.coincidence_raw),
                            ("accidentals_measured", r.accidentals_measured.unwrap_or(0), m.adjacent),
                        ];
                        for (name, count, rate) in checks {
                            let mean = rate * r.gates as f64;
                            let z = if mean > 0.0 {
                                (count as f64 - mean) / mean.sqrt()
                            } else if count == 0 {
                                0.0
                            } else {
                                f64::INFINITY
                            };
                            let ok = z.abs() <= 3.0;
                            bad += usize::from(!ok);
                            eprintln!(
                                "verify p = {} mW {name}: {count} vs {mean:.1} (z = {z:+.2}) {}",
                                r.p_ave_mw,
                                if ok { "ok" } else { "FAIL" }
                            );
                        }
                    }
                }
                if bad > 0 {
                    return Err(Error::Numerical {
                        message: format!("{bad} simulated counts outside 3 sigma of the stationary rates"),
                        last_change: f64::NAN,
                        steps: 0,
                    });
                }
            }
            io::write_counts(&out, &counts)?;
            if let (Some(path), Some(records)) = (&raman, &raman_counts) {
                io::write_counts(path, records)?;
            }
            Ok(())
        }

        Command::Calibrate {
            config,
            counts,
            raman,
            scan,
            xi,
            out,
            budget,
            emit_plot_data,
        } => {
            let cfg = load_config(config.as_deref())?;
            let setup = cfg.calibration_setup()?;
            let counts = io::read_counts(&counts)?;
            let raman = raman.as_deref().map(io::read_counts).transpose()?;
            let scan = scan.as_deref().map(io::read_scan).transpose()?;
            let rel_xi = cfg.uncertainty.as_ref().and_then(|u| u.rel_xi_s).unwrap_or(0.0);
            let signal_filter = cfg.signal_filter()?;
            let source = match (xi, &scan, cfg.source.xi_s) {
                (Some(xi_s), _, _) => XiSource::Fixed { xi_s, rel_std: rel_xi },
                (None, Some(records), _) => XiSource::Scan {
                    records: records.clone(),
                    signal_filter,
                },
                (None, None, Some(xi_s)) => XiSource::Fixed { xi_s, rel_std: rel_xi },
                (None, None, None) => cfg.model_xi_source(rel_xi)?,
            };
            let result = calibrate(&setup, &counts, raman.as_deref(), &source)?;
            if result.flags.pair_rate_exceeds_cap {
                eprintln!("warning: every point exceeds the pair-rate cap; using the lowest");
            }
            if result.flags.negative_rates > 0 {
                eprintln!("warning: {} points with negative corrected rates", result.flags.negative_rates);
            }
            if result.flags.unphysical {
                eprintln!("warning: deduced efficiency lies outside [0, 1]");
            }
            if let Some(dir) = emit_plot_data {
                std::fs::create_dir_all(&dir)?;
                for (name, points) in calibration_plot_data(&result, Some(&signal_filter), scan.as_deref())? {
                    io::write_curve(&dir.join(format!("{name}.csv")), &points)?;
                }
            }
            if let Some(path) = budget {
                io::write_budget(&path, &result.budget)?;
            }
            emit(calibration_report(&result).render().as_bytes(), out.as_deref())
        }

        Command::ScanFit {
            scan,
            config,
            filter_center_nm,
            filter_fwhm_nm,
            filter_order,
            out,
        } => {
            let filter = match (filter_center_nm, filter_fwhm_nm) {
                (Some(c), Some(f)) => FilterSpec::from_width_nm(c, width_param_from_fwhm(f, filter_order)?, filter_order, 1.0)?,
                _ => load_config(config.as_deref())?.signal_filter()?,
            };
            let records = io::read_scan(&scan)?;
            let d = deduce_sigma0_from_scan(&records, &filter)?;
            let mut rep = Report::new();
            rep.push("sigma0_prime_rad_s", d.sigma0_prime)
                .push("sigma0_prime_std_rad_s", d.sigma0_prime_std)
                .push("sigma0_prime_nm", width_angular_to_nm(d.sigma0_prime, d.center_nm)?)
                .push("sigma0_rad_s", d.sigma0)
                .push("sigma0_std_rad_s", d.sigma0_std)
                .push("sigma0_nm", width_angular_to_nm(d.sigma0, d.center_nm)?)
                .push("signal_filter_width_rad_s", filter.width())
                .push("xi_s", d.xi_s)
                .push("xi_s_std", d.xi_s_std)
                .push("center_nm", d.center_nm)
                .push("negative_points", d.negative_points)
                .push("fit_iterations", d.peak.iterations);
            emit(rep.render().as_bytes(), out.as_deref())
        }

        Command::RamanFit {
            raman,
            config,
            eta_ti,
            dark_idler,
            out,
        } => {
            let cfg = config.as_deref().map(RunConfig::from_path).transpose()?;
            let eta_ti = match (eta_ti, &cfg) {
                (Some(v), _) => v,
                (None, Some(c)) => c.idler_channel.transmission,
                (None, None) => return Err(Error::Domain("raman-fit needs --eta-ti or --config".into())),
            };
            let dark = dark_idler
                .or(cfg.as_ref().map(|c| c.idler_detector.dark_count_prob))
                .unwrap_or(0.0);
            let records = io::read_counts(&raman)?;
            let fit = fit_raman(&records, eta_ti, dark)?;
            let mut rep = Report::new();
            rep.push("s1_prime", fit.s1_prime)
                .push("s1_prime_std", fit.s1_prime_std)
                .push("eta_ti", eta_ti)
                .push("dark_idler", dark)
                .push("points", fit.fit.points)
                .push("reduced_chi_square", fit.fit.reduced_chi_square());
            emit(rep.render().as_bytes(), out.as_deref())
        }

        Command::Uncertainty {
            eta_ti,
            s1_prime,
            p_ave_mw,
            r_if,
            raman_ratios,
            rel_eta_ti,
            rel_eta_ts,
            rel_p_ave,
            rel_n_t,
            rel_r_ri,
            rel_c_c,
            rel_xi_s,
            mc_draws,
            seed,
            budget,
            out,
        } => {
            let mut base = UncertaintyInputs::typical(eta_ti, s1_prime, p_ave_mw, r_if).with_xi_s(rel_xi_s).with_c_c(rel_c_c);
            base.rel_eta_ti = rel_eta_ti;
            base.rel_eta_ts = rel_eta_ts;
            base.rel_p_ave = rel_p_ave;
            base.rel_n_t = rel_n_t;
            base.rel_r_ri = rel_r_ri;
            base.validate()?;
            let configurations = if raman_ratios.is_empty() {
                vec![("single".to_string(), base)]
            } else {
                raman_ratios
                    .iter()
                    .map(|&ratio| Ok((format!("raman_ratio_{ratio}"), base.with_raman_ratio(ratio)?)))
                    .collect::<heralded_qe::Result<Vec<_>>>()?
            };
            let report = budget_report(&configurations)?;
            let mut rep = Report::new();
            for ((label, inputs), row) in configurations.iter().zip(&report.rows) {
                rep.push(format!("{label}.raman_to_sfwm"), inputs.raman_rate() / inputs.r_if)
                    .push(format!("{label}.rel_r_if"), propagate_rif(inputs)?.relative)
                    .push(format!("{label}.rel_eta_ut"), row.rel_eta);
                if mc_draws > 0 {
                    let mc = mc_resample_oracle(inputs, mc_draws, seed)?;
                    rep.push(format!("{label}.mc_rel_eta_ut"), mc.relative_deviation)
                        .push(format!("{label}.mc_divergence"), mc.divergence);
                }
            }
            if report.rows.len() > 1 {
                rep.push("mean_rel_eta_ut", report.mean_combined);
            }
            for (name, bound) in &report.systematic_bounds {
                rep.push(format!("systematic_bound_{name}"), bound);
            }
            if let Some(path) = budget {
                io::write_budget(&path, &report)?;
            }
            emit(rep.render().as_bytes(), out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
