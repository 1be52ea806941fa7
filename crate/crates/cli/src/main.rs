//! `polariton`: band layouts, bound states, scattering amplitudes and
//! exact-diagonalization checks for two polaritons in a cavity array.

mod args;
mod output;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use polariton_core::bands::band_structure;
use polariton_core::bound_states::BoundState;
use polariton_core::ed::{band_edge_check, compare_bound_state};
use polariton_core::scattering::solve_scattering_with;
use polariton_core::{find_all_bound_states, Branch, ChannelSolver, ModelParams, Tolerances};

use args::{parse_angle, parse_positive, Sweep};
use output::{emit, num, sibling, to_pretty_json, Table};

#[derive(Parser)]
#[command(name = "polariton", version, about = "Two-polariton scattering and bound states in a Jaynes-Cummings-Hubbard array")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Band edges and gaps of the two-polariton continuum.
    Bands {
        #[command(flatten)]
        common: Common,
        /// Detuning: value, list or START:STOP:STEP.
        #[arg(long, default_value = "-10:10:0.05", allow_hyphen_values = true)]
        delta: Sweep,
        /// Samples per branch before extremum refinement.
        #[arg(long, default_value_t = 512)]
        grid: usize,
    },
    /// Bound states in every open gap.
    Bound {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "-10:10:0.05", allow_hyphen_values = true)]
        delta: Sweep,
    },
    /// Scattering amplitudes into every open channel.
    Scatter {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "-10,10", allow_hyphen_values = true)]
        delta: Sweep,
        /// Incident branch.
        #[arg(long, default_value = "AA")]
        branch: Branch,
        /// Incident relative momentum: value, list or START:STOP:STEP.
        #[arg(long, default_value = "0.3:2.8:0.05", allow_hyphen_values = true)]
        q: Sweep,
    },
    /// Compare bound states with exact diagonalization on rings.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "0,2", allow_hyphen_values = true)]
        delta: Sweep,
        /// Ring sizes.
        #[arg(long, value_delimiter = ',', default_value = "24,48")]
        sizes: Vec<usize>,
    },
    /// Run the invariant suite and write a JSON report.
    Validate {
        #[command(flatten)]
        tol: TolArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for the random parameter draws.
        #[arg(long, default_value_t = 20240611)]
        seed: u64,
        /// Deliberately break the model to check that the suite notices.
        #[arg(long, value_enum)]
        inject_fault: Option<validate::Fault>,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// Photon hopping in units of g.
    #[arg(long, default_value = "-0.2", value_parser = parse_angle, allow_hyphen_values = true)]
    xi: f64,
    /// Total momentum (accepts pi syntax, e.g. pi/3).
    #[arg(long = "K", default_value = "0", value_parser = parse_angle, allow_hyphen_values = true)]
    k: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    tol: TolArgs,
}

#[derive(Args, Clone)]
struct TolArgs {
    #[arg(long, value_parser = parse_positive)]
    tol_open: Option<f64>,
    #[arg(long, value_parser = parse_positive)]
    tol_edge: Option<f64>,
    #[arg(long, value_parser = parse_positive)]
    tol_velocity: Option<f64>,
    #[arg(long, value_parser = parse_positive)]
    tol_label: Option<f64>,
    #[arg(long, value_parser = parse_positive)]
    tol_residual: Option<f64>,
    #[arg(long, value_parser = parse_positive)]
    tol_current: Option<f64>,
}

impl TolArgs {
    fn resolve(&self) -> Tolerances {
        let d = Tolerances::default();
        Tolerances {
            open: self.tol_open.unwrap_or(d.open),
            edge: self.tol_edge.unwrap_or(d.edge),
            velocity: self.tol_velocity.unwrap_or(d.velocity),
            label: self.tol_label.unwrap_or(d.label),
            residual: self.tol_residual.unwrap_or(d.residual),
            current: self.tol_current.unwrap_or(d.current),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Failure category, mapped onto the exit code.
enum Failure {
    Usage(String),
    Validation,
    Runtime(String),
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(format!("write failed: {e}"))
    }
}

fn params(xi: f64, delta: f64, k: f64) -> Result<ModelParams, Failure> {
    ModelParams::new(xi, delta, k).map_err(|e| Failure::Usage(e.to_string()))
}

fn header(table: &mut Table, command: &str, common: &Common, tol: &Tolerances, delta: &Sweep) {
    table.meta("polariton", env!("CARGO_PKG_VERSION"));
    table.meta("command", command);
    table.meta("g", 1.0);
    table.meta("xi", num(common.xi));
    table.meta("K", num(common.k));
    table.meta("delta", delta);
    for (k, v) in [
        ("tol_open", tol.open),
        ("tol_edge", tol.edge),
        ("tol_velocity", tol.velocity),
        ("tol_label", tol.label),
        ("tol_residual", tol.residual),
        ("tol_current", tol.current),
    ] {
        table.meta(k, v);
    }
}

fn write_table(table: &Table, common: &Common) -> Result<(), Failure> {
    let text = match common.format {
        Format::Csv => table.to_csv(),
        Format::Json => to_pretty_json(&table.to_json()),
    };
    emit(common.out.as_deref(), &text)?;
    Ok(())
}

fn validate_all(common: &Common, delta: &Sweep) -> Result<(), Failure> {
    for &d in &delta.values {
        params(common.xi, d, common.k)?;
    }
    Ok(())
}

fn run_bands(common: &Common, delta: &Sweep, grid: usize) -> Result<(), Failure> {
    validate_all(common, delta)?;
    let tol = common.tol.resolve();
    let results: Vec<_> = delta
        .values
        .par_iter()
        .map(|&d| band_structure(&ModelParams::new(common.xi, d, common.k).unwrap(), grid))
        .collect();
    let mut table = Table::new(vec!["delta", "aa_lo", "aa_hi", "ab_lo", "ab_hi", "bb_lo", "bb_hi"]);
    header(&mut table, "bands", common, &tol, delta);
    table.meta("grid", grid);
    let mut gaps = Vec::new();
    for (&d, bs) in delta.values.iter().zip(&results) {
        let edge = |id| {
            let b = bs.band(id);
            [num(b.lower), num(b.upper)]
        };
        use polariton_core::BandId::*;
        let mut row = vec![num(d)];
        for id in [AA, AB, BB] {
            row.extend(edge(id));
        }
        table.rows.push(row);
        let entries: Vec<_> = bs
            .gaps
            .iter()
            .map(|g| serde_json::json!({ "id": g.id(), "below": g.below, "above": g.above, "lower": g.lower, "upper": g.upper }))
            .collect();
        gaps.push(serde_json::json!({ "delta": d, "gaps": entries }));
    }
    match common.format {
        Format::Csv => {
            write_table(&table, common)?;
            match &common.out {
                Some(path) => emit(Some(&sibling(path, "gaps.json")), &to_pretty_json(&gaps))?,
                None => log::info!("gap list is written only together with --out"),
            }
        }
        Format::Json => {
            let mut value = table.to_json();
            value["gaps"] = serde_json::Value::Array(gaps);
            emit(common.out.as_deref(), &to_pretty_json(&value))?;
        }
    }
    Ok(())
}

fn run_bound(common: &Common, delta: &Sweep) -> Result<(), Failure> {
    validate_all(common, delta)?;
    let tol = common.tol.resolve();
    let results: Vec<(f64, Vec<u8>, Vec<BoundState>)> = delta
        .values
        .par_iter()
        .map(|&d| {
            let p = ModelParams::new(common.xi, d, common.k).unwrap();
            let solver = ChannelSolver::new(&p, tol);
            let open: Vec<u8> = solver.bands().gaps.iter().map(|g| g.id()).filter(|&i| i > 0).collect();
            let states = find_all_bound_states(&solver).unwrap_or_else(|e| {
                log::warn!("delta = {d}: bound-state search failed: {e}");
                Vec::new()
            });
            (d, open, states)
        })
        .collect();
    let mut table = Table::new(vec!["delta", "gap_id", "E_b", "weight_p", "weight_d", "weight_t", "kappa"]);
    header(&mut table, "bound", common, &tol, delta);
    for (d, open, states) in &results {
        for gap in [1u8, 2] {
            let found: Vec<&BoundState> = states.iter().filter(|b| b.gap_id == gap).collect();
            if found.is_empty() {
                if open.contains(&gap) {
                    log::info!("delta = {d}: no bound state in open gap {gap}");
                }
                table.rows.push(vec![num(*d), gap.to_string(), String::new(), String::new(), String::new(), String::new(), String::new()]);
                continue;
            }
            for b in found {
                table.rows.push(vec![
                    num(*d),
                    gap.to_string(),
                    num(b.energy),
                    num(b.weights.photon),
                    num(b.weights.mixed),
                    num(b.weights.tls),
                    num(b.kappa),
                ]);
            }
        }
    }
    write_table(&table, common)
}

fn run_scatter(common: &Common, delta: &Sweep, branch: Branch, q: &Sweep) -> Result<(), Failure> {
    validate_all(common, delta)?;
    let tol = common.tol.resolve();
    let mut table = Table::new(vec![
        "q",
        "delta",
        "channel_out",
        "re_f",
        "im_f",
        "abs_f_sq",
        "residual_max",
        "current_max",
    ]);
    header(&mut table, "scatter", common, &tol, delta);
    table.meta("branch", branch);
    table.meta("q", q);
    for &d in &delta.values {
        let solver = ChannelSolver::new(&ModelParams::new(common.xi, d, common.k).unwrap(), tol);
        let rows: Vec<Vec<Vec<String>>> = q
            .values
            .par_iter()
            .map(|&qv| match solve_scattering_with(&solver, branch, qv) {
                Ok(sol) => sol
                    .roots
                    .iter()
                    .zip(&sol.f)
                    .filter(|(r, _)| r.open)
                    .map(|(r, f)| {
                        vec![
                            num(qv),
                            num(d),
                            r.branch.to_string(),
                            num(f.re),
                            num(f.im),
                            num(f.norm_sqr()),
                            num(sol.residual_max),
                            num(sol.current_max),
                        ]
                    })
                    .collect(),
                Err(e) => {
                    log::warn!("skipping {branch} q = {qv}, delta = {d}: {e}");
                    Vec::new()
                }
            })
            .collect();
        table.rows.extend(rows.into_iter().flatten());
    }
    write_table(&table, common)
}

fn run_oracle(common: &Common, delta: &Sweep, sizes: &[usize]) -> Result<(), Failure> {
    validate_all(common, delta)?;
    if sizes.iter().any(|&n| n < 4) {
        return Err(Failure::Usage("ring sizes must be at least 4".into()));
    }
    let tol = common.tol.resolve();
    let mut table = Table::new(vec![
        "delta",
        "gap_id",
        "E_b",
        "sites",
        "E_ed",
        "abs_error",
        "overlap",
        "weight_p_ed",
        "weight_d_ed",
        "weight_t_ed",
    ]);
    header(&mut table, "oracle", common, &tol, delta);
    table.meta("sizes", sizes.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","));
    for &d in &delta.values {
        let p = ModelParams::new(common.xi, d, common.k).unwrap();
        let solver = ChannelSolver::new(&p, tol);
        let states = find_all_bound_states(&solver).map_err(|e| Failure::Runtime(e.to_string()))?;
        for b in &states {
            let cmp = compare_bound_state(b, &p, solver.bands(), sizes).map_err(|e| Failure::Runtime(e.to_string()))?;
            for r in &cmp.rings {
                table.rows.push(vec![
                    num(d),
                    b.gap_id.to_string(),
                    num(b.energy),
                    r.sites.to_string(),
                    num(r.ed_energy),
                    num(r.error),
                    num(r.overlap),
                    num(r.composition[0]),
                    num(r.composition[1]),
                    num(r.composition[2]),
                ]);
            }
        }
        if common.k == 0.0 {
            for &n in sizes {
                let report = band_edge_check(&p, solver.bands(), n).map_err(|e| Failure::Runtime(e.to_string()))?;
                table.meta(
                    &format!("band_edges[delta={d},N={n}]"),
                    format!("violations={} in_gap={}", report.violations.len(), report.in_gap_count()),
                );
            }
        }
    }
    write_table(&table, common)
}

fn run_validate(tol: &TolArgs, out: Option<&std::path::Path>, seed: u64, fault: Option<validate::Fault>) -> Result<(), Failure> {
    let report = validate::run(tol.resolve(), fault, seed);
    emit(out, &to_pretty_json(&report))?;
    if report.passed {
        Ok(())
    } else {
        for c in report.checks.iter().filter(|c| !c.passed) {
            log::error!("{}: {}", c.name, c.detail);
        }
        Err(Failure::Validation)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().expect("thread pool initialized once");
    }
    let result = match &cli.command {
        Command::Bands { common, delta, grid } => run_bands(common, delta, *grid),
        Command::Bound { common, delta } => run_bound(common, delta),
        Command::Scatter { common, delta, branch, q } => run_scatter(common, delta, *branch, q),
        Command::Oracle { common, delta, sizes } => run_oracle(common, delta, sizes),
        Command::Validate {
            tol,
            out,
            seed,
            inject_fault,
        } => run_validate(tol, out.as_deref(), *seed, *inject_fault),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
