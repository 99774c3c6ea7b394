use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ricci_k_lab::kchain::BlockValues;
use ricci_k_lab::report::{
    self, BlocksScenario, ConnectedSumScenario, DockingScenario, GridFormat, NeckScenario,
    ObstructionScenario, PlumbingScenario, Report, Scenario, ScenarioKind, SummandSpec,
};
use ricci_k_lab::LabError;

/// Certify positive intermediate Ricci curvature of warped necks, docking
/// stations, connected sums and plumbings.
#[derive(Parser, Debug)]
#[command(name = "ricci-k-lab", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for report.json and grids.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value = "json", value_parser = ["json", "csv", "both"])]
    format: String,
    /// Relative uncertainty assigned to curvature blocks.
    #[arg(long, global = true)]
    tol_curvature: Option<f64>,
    #[arg(long, global = true)]
    tol_quadrature: Option<f64>,
    /// Do not print the report to stdout.
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the k-chain inequalities for one set of block values.
    CheckBlocks {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, allow_hyphen_values = true)]
        l12: f64,
        #[arg(long, allow_hyphen_values = true)]
        l13: f64,
        #[arg(long, allow_hyphen_values = true)]
        l23: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        ltilde: f64,
        #[arg(long, allow_hyphen_values = true)]
        l3: f64,
        #[arg(long)]
        no_sampling: bool,
    },
    /// Build a neck and certify Ric_2 > 0 on its grid.
    Neck {
        #[arg(long, default_value_t = 7)]
        n: usize,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        a_inf: f64,
        #[arg(long)]
        big_r: Option<f64>,
        /// CSV with columns x,eta.
        #[arg(long)]
        eta_csv: Option<String>,
        #[arg(long)]
        rho: f64,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        #[arg(long, conflicts_with = "sweep")]
        t0: Option<f64>,
        /// lo:hi:steps, geometric.
        #[arg(long)]
        sweep: Option<String>,
        #[arg(long, default_value_t = 512)]
        nt: usize,
        #[arg(long, default_value_t = 128)]
        nx: usize,
        /// Emit block and margin grids.
        #[arg(long)]
        grids: bool,
    },
    /// Choose docking-station parameters for a given nu.
    Docking {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        ell: usize,
        #[arg(long)]
        nu: f64,
    },
    /// Assemble a connected sum of core summands.
    PlanConnectedSum {
        /// Catalog name, repeated once per summand.
        #[arg(long = "summand", required = true)]
        summands: Vec<String>,
        #[arg(long, default_value_t = 0.2)]
        nu_min: f64,
        #[arg(long, value_delimiter = ',')]
        t0: Option<Vec<f64>>,
        #[arg(long, default_value_t = 512)]
        nt: usize,
        #[arg(long, default_value_t = 128)]
        nx: usize,
    },
    /// Curvature index on the boundary of a plumbing.
    Plumbing {
        /// HP2, OP2 or sphere-bundles.
        #[arg(long, conflicts_with = "graph")]
        preset: Option<String>,
        /// TOML file with [[vertices]] and edges.
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        q: Option<usize>,
        #[arg(long)]
        ell: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Connectivity obstructions to a k-core metric.
    Obstruction {
        /// Catalog name (S<n>, CP<n>, HP<n>, OP2).
        #[arg(long, conflicts_with_all = ["n", "connectivity"])]
        name: Option<String>,
        #[arg(long, requires = "connectivity")]
        n: Option<usize>,
        #[arg(long)]
        connectivity: Option<usize>,
        #[arg(long)]
        homotopy_sphere: bool,
        #[arg(long)]
        k: usize,
    },
    /// List spaces with known core metrics.
    Catalog,
    /// Run a scenario file.
    Run { scenario: PathBuf },
}

fn fail(e: &LabError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(report::exit_code_for(e) as u8)
}

fn scenario_for(cmd: Command) -> Result<Scenario, LabError> {
    let sc = match cmd {
        Command::CheckBlocks {
            n,
            k,
            l12,
            l13,
            l23,
            ltilde,
            l3,
            no_sampling,
        } => Scenario {
            blocks: Some(BlocksScenario {
                n,
                k,
                values: Some(BlockValues::new(l12, l13, l23, ltilde, l3)),
                profile: None,
                sampling: !no_sampling,
            }),
            ..Scenario::new(ScenarioKind::BlocksCheck)
        },
        Command::Neck {
            n,
            r,
            a_inf,
            big_r,
            eta_csv,
            rho,
            epsilon,
            delta,
            t0,
            sweep,
            nt,
            nx,
            grids,
        } => Scenario {
            neck: Some(NeckScenario {
                n,
                r,
                a_inf,
                big_r,
                eta: None,
                eta_csv,
                rho,
                epsilon,
                delta,
                t0: if sweep.is_none() { Some(t0.unwrap_or(1e3)) } else { None },
                sweep,
                nt,
                nx,
                grids,
            }),
            ..Scenario::new(ScenarioKind::Neck)
        },
        Command::Docking { n, ell, nu } => Scenario {
            docking: Some(DockingScenario {
                n,
                ell,
                nu,
                options: None,
            }),
            ..Scenario::new(ScenarioKind::Docking)
        },
        Command::PlanConnectedSum {
            summands,
            nu_min,
            t0,
            nt,
            nx,
        } => Scenario {
            connected_sum: Some(ConnectedSumScenario {
                summands: summands
                    .iter()
                    .map(|s| SummandSpec {
                        nu_min,
                        ..SummandSpec::named(s)
                    })
                    .collect(),
                t0_candidates: t0,
                nt,
                nx,
            }),
            ..Scenario::new(ScenarioKind::ConnectedSum)
        },
        Command::Plumbing {
            preset,
            graph,
            p,
            q,
            ell,
            k,
        } => {
            let plumbing = match graph {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)?;
                    toml::from_str::<PlumbingScenario>(&text)
                        .map_err(|e| LabError::Parse(format!("{}: {}", path.display(), e.message())))?
                }
                None => PlumbingScenario {
                    preset: Some(preset.unwrap_or_else(|| "HP2".into())),
                    vertices: Vec::new(),
                    edges: Vec::new(),
                    p,
                    q,
                    ell,
                    k,
                },
            };
            Scenario {
                plumbing: Some(plumbing),
                ..Scenario::new(ScenarioKind::Plumbing)
            }
        }
        Command::Obstruction {
            name,
            n,
            connectivity,
            homotopy_sphere,
            k,
        } => Scenario {
            obstruction: Some(ObstructionScenario {
                name,
                n,
                connectivity,
                homotopy_sphere,
                k,
            }),
            ..Scenario::new(ScenarioKind::Obstruction)
        },
        Command::Catalog | Command::Run { .. } => unreachable!("handled by the caller"),
    };
    Ok(sc)
}

fn apply_globals(sc: &mut Scenario, g: &Global) -> Result<(), LabError> {
    sc.seed = g.seed;
    sc.output.format = g.format.parse()?;
    if let Some(t) = g.tol_curvature {
        sc.tolerances.curvature = t;
    }
    if let Some(t) = g.tol_quadrature {
        sc.tolerances.quadrature = t;
    }
    Ok(())
}

fn set_threads() -> Result<(), LabError> {
    let Ok(v) = std::env::var("RICCI_K_LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| LabError::Parse(format!("RICCI_K_LAB_THREADS=`{v}`: expected a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| LabError::Numerical(e.to_string()))
}

fn emit(report: &Report, g: &Global, out: Option<&Path>, format: GridFormat) -> ExitCode {
    if !g.quiet {
        print!("{}", report.to_json());
    }
    if let Some(dir) = out {
        if let Err(e) = report::write_report(report, dir, format) {
            return fail(&e);
        }
    }
    eprintln!("{}: {}", if report.passed { "PASS" } else { "FAIL" }, report.status);
    ExitCode::from(report.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = set_threads() {
        return fail(&e);
    }
    let g = cli.global;
    let format: GridFormat = match g.format.parse() {
        Ok(f) => f,
        Err(e) => return fail(&e),
    };
    match cli.command {
        Command::Catalog => emit(&report::catalog_report(g.seed), &g, g.out.as_deref(), format),
        Command::Run { scenario } => {
            let text = match std::fs::read_to_string(&scenario) {
                Ok(t) => t,
                Err(e) => return fail(&e.into()),
            };
            let origin = scenario.display().to_string();
            let mut sc = match Scenario::from_toml_str(&text, &origin) {
                Ok(s) => s,
                Err(e) => return fail(&e),
            };
            // flags given explicitly override the file
            if g.seed != 0 {
                sc.seed = g.seed;
            }
            if g.format != "json" {
                sc.output.format = format;
            }
            if let Some(t) = g.tol_curvature {
                sc.tolerances.curvature = t;
            }
            if let Some(t) = g.tol_quadrature {
                sc.tolerances.quadrature = t;
            }
            let base = scenario.parent().unwrap_or(Path::new("."));
            let out = g.out.clone().or_else(|| sc.output.dir.as_ref().map(|d| base.join(d)));
            match report::run(&sc, base) {
                Ok(r) => emit(&r, &g, out.as_deref(), sc.output.format),
                Err(e) => {
                    eprintln!("error: scenario {origin}: {e}");
                    ExitCode::from(report::exit_code_for(&e) as u8)
                }
            }
        }
        cmd => {
            let mut sc = match scenario_for(cmd) {
                Ok(s) => s,
                Err(e) => return fail(&e),
            };
            if let Err(e) = apply_globals(&mut sc, &g) {
                return fail(&e);
            }
            if let Err(e) = sc.validate() {
                return fail(&e);
            }
            match report::run(&sc, Path::new(".")) {
                Ok(r) => emit(&r, &g, g.out.as_deref(), format),
                Err(e) => fail(&e),
            }
        }
    }
}
