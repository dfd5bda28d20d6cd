use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kgblab::dispersion::{dispersion_table, scan_resonance_gaps};
use kgblab::harness::{
    amplitude_gate_boundary, run_drift_ladder, run_error_scaling, run_residual_scan, write_csv, write_json, GridEntry,
    Manifest, RunConfig, Setup,
};
use kgblab::normalform::{check_kernel_symmetries, iterate_to_limit};
use kgblab::whitham::{build_ansatz, h_of_u};
use kgblab::Result;

#[derive(Parser)]
#[command(name = "kgblab", about = "KGB / Whitham / normal-form verification laboratory")]
struct Cli {
    /// TOML run configuration (defaults are used for absent keys).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for ladder runs.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Frequency gaps between the two dispersion branches.
    DispersionScan {
        #[arg(long, default_value_t = 50.0)]
        k_max: f64,
        #[arg(long, default_value_t = 200_000)]
        samples: usize,
    },
    /// Whitham solution on the slow grid.
    SimulateWhitham,
    /// KGB run from the long-wave initial data at one ε.
    SimulateKgb {
        #[arg(long)]
        eps: f64,
    },
    /// Residual norms of the improved ansatz over the ε ladder.
    ResidualScan,
    /// Normal-form iteration for Ψ at t = 0.
    NormalformIterate {
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[arg(long)]
        amplitude: Option<f64>,
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        j_max: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        /// Kernel half width in units of Δl.
        #[arg(long)]
        l_max: Option<usize>,
        /// Also bisect for the amplitude where the q gate fails, starting
        /// from this (blocked) amplitude.
        #[arg(long)]
        gate_boundary: Option<f64>,
    },
    /// Modified-energy drift, with and without the transformations.
    EnergyDrift,
    /// Approximation error against the Whitham solution over the ε ladder.
    ErrorScaling,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::from_file(p),
        None => Ok(RunConfig::default()),
    }
}

fn run(cli: Cli) -> Result<bool> {
    let mut cfg = load_config(cli.config.as_deref())?;
    let out = cli.out.clone();
    std::fs::create_dir_all(&out)?;
    let name = match &cli.command {
        Command::DispersionScan { .. } => "dispersion-scan",
        Command::SimulateWhitham => "simulate-whitham",
        Command::SimulateKgb { .. } => "simulate-kgb",
        Command::ResidualScan => "residual-scan",
        Command::NormalformIterate { .. } => "normalform-iterate",
        Command::EnergyDrift => "energy-drift",
        Command::ErrorScaling => "error-scaling",
    };

    let mut outputs = Vec::new();
    let mut grids = Vec::new();
    let mut certified = Vec::new();
    let passed = match cli.command {
        Command::DispersionScan { k_max, samples } => {
            let report = scan_resonance_gaps(k_max, samples)?;
            write_json(&out.join("gaps.json"), &report)?;
            let rows: Vec<Vec<f64>> =
                dispersion_table(k_max.min(10.0), 1001).into_iter().map(|(k, a, b)| vec![k, a, b]).collect();
            write_csv(&out.join("dispersion.csv"), &["k", "omega1", "omega2"], &rows)?;
            outputs.extend(["gaps.json".to_string(), "dispersion.csv".to_string()]);
            println!(
                "gap_12_minus {:.9} gap_12_plus {:.9} gap_same_k {:.9}",
                report.gap_12_minus, report.gap_12_plus, report.gap_same_k
            );
            report.gap_12_minus > 0.0 && report.gap_same_k > 0.0
        }
        Command::SimulateWhitham => {
            let setup = Setup::new(&cfg)?;
            let g = setup.whitham.grid();
            let mut rows = Vec::new();
            for (t, st) in setup.whitham.times.iter().zip(&setup.whitham.states) {
                let u = st.u_physical();
                let v = h_of_u(&u)?;
                for (i, (a, b)) in u.iter().zip(&v).enumerate() {
                    rows.push(vec![*t, g.x(i), *a, *b]);
                }
            }
            write_csv(&out.join("whitham.csv"), &["T", "X", "U", "V"], &rows)?;
            outputs.push("whitham.csv".into());
            true
        }
        Command::SimulateKgb { eps } => {
            let setup = Setup::new(&cfg)?;
            let grid = setup.fast_grid(eps)?;
            let dt = setup.dt_for(grid);
            let traj = setup.solve_kgb(eps, grid, dt)?;
            grids.push(GridEntry { eps, n: grid.n(), length: grid.length(), dt: traj.dt });
            let mut rows = Vec::new();
            let mut herm: f64 = 0.0;
            for (t, st) in traj.times.iter().zip(&traj.states) {
                herm = herm.max(st.hermitian_defect());
                for (i, (a, b)) in st.u_physical().iter().zip(&st.v_physical()).enumerate() {
                    rows.push(vec![*t, grid.x(i), *a, *b]);
                }
            }
            write_csv(&out.join("kgb.csv"), &["t", "x", "u", "v"], &rows)?;
            write_json(
                &out.join("kgb_summary.json"),
                &serde_json::json!({ "eps": eps, "max_hermitian_defect": herm }),
            )?;
            outputs.extend(["kgb.csv".to_string(), "kgb_summary.json".to_string()]);
            true
        }
        Command::ResidualScan => {
            let setup = Setup::new(&cfg)?;
            let scan = run_residual_scan(&setup, cli.threads)?;
            write_json(&out.join("residual_scan.json"), &scan)?;
            let rows: Vec<Vec<f64>> = scan
                .reports
                .iter()
                .map(|r| vec![r.eps, r.res_u_hs, r.res_v_hs, r.res_u_weighted, r.res_v_weighted, r.res_v_sup])
                .collect();
            write_csv(
                &out.join("residual_scan.csv"),
                &["eps", "res_u_hs", "res_v_hs", "res_u_w", "res_v_w", "res_v_sup"],
                &rows,
            )?;
            outputs.extend(["residual_scan.json".to_string(), "residual_scan.csv".to_string()]);
            println!("H^s slope {:.3}, weighted slope {:.3}", scan.hs.slope, scan.weighted.slope);
            (3.3..=3.7).contains(&scan.hs.slope) && (2.3..=2.7).contains(&scan.weighted.slope)
        }
        Command::NormalformIterate { eps, amplitude, s, j_max, tol, l_max, gate_boundary } => {
            if let Some(a) = amplitude {
                cfg.profile.amplitude = a;
            }
            if let Some(s) = s {
                cfg.normal_form.s_weight = s;
            }
            if let Some(j) = j_max {
                cfg.normal_form.j_max = j;
            }
            if let Some(t) = tol {
                cfg.normal_form.tol = t;
            }
            if let Some(h) = l_max {
                cfg.normal_form.half_width = h;
            }
            let setup = Setup::new(&cfg)?;
            let grid = setup.fast_grid(eps)?;
            let ans = build_ansatz(&setup.whitham, eps, 0.0, grid)?;
            let run = iterate_to_limit(&ans.psi(), eps, &cfg.normal_form)?;
            let ratios = run.f_non_ratios();
            let sym = check_kernel_symmetries(&run.limit);
            let boundary = gate_boundary.map(|a| amplitude_gate_boundary(&cfg, eps, a, 12)).transpose()?;
            if let Some((lo, hi)) = boundary {
                println!("q gate fails between amplitude {lo:.4e} and {hi:.4e}");
            }
            write_json(
                &out.join("normalform.json"),
                &serde_json::json!({
                    "eps": eps,
                    "q_measured": run.q_measured,
                    "stages_used": run.limit.stages_used,
                    "fitted_ratio": run.fitted_ratio(),
                    "ratios": ratios,
                    "records": run.records,
                    "symmetry": sym,
                    "gate_boundary": boundary,
                }),
            )?;
            outputs.push("normalform.json".into());
            let max = ratios.iter().cloned().fold(0.0, f64::max);
            let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            println!("stages {} ratios {:?}", run.limit.stages_used, ratios);
            !ratios.is_empty() && max < 0.6 && max / min < 2.0
        }
        Command::EnergyDrift => {
            let setup = Setup::new(&cfg)?;
            let ladder = run_drift_ladder(&setup, cli.threads)?;
            write_json(&out.join("energy_drift.json"), &ladder)?;
            for o in ladder.transformed.iter().chain(&ladder.ablated) {
                let rows: Vec<Vec<f64>> =
                    o.drift.snapshots.iter().zip(&o.drift.rates).map(|(s, r)| vec![s.t, s.e_s, s.e_mod, *r]).collect();
                let file = format!("drift_{}_{}.csv", if o.ablated { "ablated" } else { "transformed" }, o.eps);
                write_csv(&out.join(&file), &["t", "E_s", "E_mod", "dE_mod_dt"], &rows)?;
                outputs.push(file);
            }
            outputs.push("energy_drift.json".into());
            println!(
                "drift slope transformed {:.3}, ablated {:.3}",
                ladder.transformed_rate.slope, ladder.ablated_rate.slope
            );
            ladder.transformed_rate.slope >= 0.8 && ladder.ablated_rate.slope < 0.8
        }
        Command::ErrorScaling => {
            let setup = Setup::new(&cfg)?;
            let res = run_error_scaling(&setup, cli.threads)?;
            for s in &res.samples {
                grids.push(GridEntry { eps: s.eps, n: s.n_fast, length: setup.fast_grid(s.eps)?.length(), dt: s.dt });
                certified.push((s.eps, s.certified_error));
            }
            write_json(&out.join("error_scaling.json"), &res)?;
            let rows: Vec<Vec<f64>> = res
                .samples
                .iter()
                .map(|s| vec![s.eps, s.sup_error, s.h1_error, s.ansatz_gap, s.certified_error])
                .collect();
            write_csv(
                &out.join("error_scaling.csv"),
                &["eps", "sup_error", "h1_error", "ansatz_gap", "certified_error"],
                &rows,
            )?;
            outputs.extend(["error_scaling.json".to_string(), "error_scaling.csv".to_string()]);
            println!("sup-error slope {:.3} (r² {:.4})", res.sup.slope, res.sup.fit_r2);
            res.sup.slope >= 1.3 && res.sup.fit_r2 >= 0.98
        }
    };

    let mut manifest = Manifest::new(name, &cfg);
    manifest.grids = grids;
    manifest.certified_errors = certified;
    manifest.outputs = outputs;
    manifest.passed = Some(passed);
    manifest.write(&out)?;
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
