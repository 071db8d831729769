//! Command-line surface. Flags are parsed and validated into the resolved
//! configuration before any computation; that configuration is echoed into
//! every artifact.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use frontier_core::frontier::{efficiency_scores, BandwidthChoice, FrontierConfig, FrontierModel};
use frontier_core::matsuoka::{fit_mle, EntropyKind, EntropyOrders, ReliabilityPair};
use frontier_core::simlab::{Cell, DgpKind, SimReport};
use frontier_core::smoothers::CbsMode;
use frontier_core::{fit_frontier, Bandwidths, Dataset, Kernel, MatsuokaParams, Method};
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::io::{check_parent, fmt_f64, header_lines, render_csv, Outputs, Table};
use crate::runner::{self, THREADS_ENV};

#[derive(Debug, Parser, Serialize)]
#[command(name = "frontier-lab", version, about = "Matsuoka efficiency distribution and production frontier estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Evaluate the M(p) distribution.
    Dist {
        #[command(subcommand)]
        action: DistAction,
    },
    /// Fit a frontier to CSV data.
    #[command(allow_negative_numbers = true)]
    Fit(FitArgs),
    /// Run a Monte Carlo study over a grid of (p, n) cells.
    #[command(allow_negative_numbers = true)]
    Simulate(SimulateArgs),
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DistAction {
    #[command(allow_negative_numbers = true)]
    Pdf {
        #[arg(long)]
        p: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<f64>,
    },
    #[command(allow_negative_numbers = true)]
    Cdf {
        #[arg(long)]
        p: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<f64>,
    },
    #[command(allow_negative_numbers = true)]
    Quantile {
        #[arg(long)]
        p: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        q: Vec<f64>,
    },
    /// Draw a sample; without --seed a random seed is chosen and printed.
    #[command(allow_negative_numbers = true)]
    Sample {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the sample here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// E(X^k) for the given k, or mean, variance, skewness and kurtosis.
    #[command(allow_negative_numbers = true)]
    Moment {
        #[arg(long)]
        p: f64,
        #[arg(long, allow_hyphen_values = true)]
        k: Option<f64>,
    },
    #[command(allow_negative_numbers = true)]
    Expectile {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        alpha: f64,
    },
    #[command(allow_negative_numbers = true)]
    Entropy {
        #[arg(long)]
        p: f64,
        #[arg(long, value_enum, default_value_t = EntropyArg::Shannon)]
        kind: EntropyArg,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<f64>,
    },
    /// P(X > Y) for X ~ M(p) and Y ~ M(q).
    #[command(allow_negative_numbers = true)]
    Reliability {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
    },
    /// MLE and UMVUE of p from a CSV sample.
    Fit {
        #[arg(long)]
        input: PathBuf,
        /// Column holding the sample; defaults to the first.
        #[arg(long)]
        column: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyArg {
    Shannon,
    Differential,
    Renyi,
    Tsallis,
    SharmaMittal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    Loclin,
    Cbs,
    Sbs,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Loclin => Method::Loclin,
            MethodArg::Cbs => Method::Cbs,
            MethodArg::Sbs => Method::Sbs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelArg {
    Epanechnikov,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CbsModeArg {
    Iterative,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum DgpArg {
    #[value(name = "i")]
    #[serde(rename = "i")]
    I,
    #[value(name = "ii")]
    #[serde(rename = "ii")]
    Ii,
}

/// Smoother flags shared by `fit` and `simulate`.
#[derive(Debug, Args, Serialize)]
pub struct SmootherArgs {
    /// Defaults to loclin for one input and sbs for two.
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long, value_enum, default_value_t = KernelArg::Epanechnikov)]
    pub kernel: KernelArg,
    /// JSON kernel description, e.g. a tabulated kernel; overrides --kernel.
    #[arg(long)]
    pub kernel_file: Option<PathBuf>,
    /// `cv` for leave-one-out cross-validation, or fixed `h1[,h2]`.
    #[arg(long, default_value = "cv")]
    pub bandwidth: String,
    #[arg(long, value_enum, default_value_t = CbsModeArg::Iterative)]
    pub cbs_mode: CbsModeArg,
    /// Grid points per axis for smooth backfitting.
    #[arg(long, default_value_t = frontier_core::smoothers::sbs::DEFAULT_GRID)]
    pub sbs_grid: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Name of the output column Y.
    #[arg(long)]
    pub output_col: String,
    /// Names of one or two input columns.
    #[arg(long, value_delimiter = ',', required = true)]
    pub input_cols: Vec<String>,
    #[command(flatten)]
    pub smoother: SmootherArgs,
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    #[arg(long)]
    pub scores_out: Option<PathBuf>,
    /// Component grids for two inputs; defaults to `<model-out>.components.csv`.
    #[arg(long)]
    pub components_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub dgp: DgpArg,
    #[arg(long, value_delimiter = ',', required = true)]
    pub p: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[arg(long)]
    pub replicas: usize,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub smoother: SmootherArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long, env = THREADS_ENV)]
    #[serde(skip)]
    pub threads: Option<usize>,
}

/// Runs `cli`, writing reports to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Dist { action } => dist(action, out),
        Command::Fit(args) => fit(cli, args, out),
        Command::Simulate(args) => simulate(cli, args, out),
    }
}

fn stdout_err(e: std::io::Error) -> LabError {
    LabError::io("<stdout>", e)
}

fn print_values(out: &mut dyn Write, values: impl IntoIterator<Item = f64>) -> Result<()> {
    for v in values {
        writeln!(out, "{}", fmt_f64(v)).map_err(stdout_err)?;
    }
    Ok(())
}

fn print_row(out: &mut dyn Write, names: &[&str], values: &[String]) -> Result<()> {
    writeln!(out, "{}\n{}", names.join(","), values.join(",")).map_err(stdout_err)
}

fn dist(action: &DistAction, out: &mut dyn Write) -> Result<()> {
    match action {
        DistAction::Pdf { p, x } => {
            let d = MatsuokaParams::new(*p)?;
            print_values(out, x.iter().map(|&x| d.pdf(x)))
        }
        DistAction::Cdf { p, x } => {
            let d = MatsuokaParams::new(*p)?;
            print_values(out, x.iter().map(|&x| d.cdf(x)))
        }
        DistAction::Quantile { p, q } => {
            let d = MatsuokaParams::new(*p)?;
            let v = q.iter().map(|&q| d.quantile(q)).collect::<frontier_core::Result<Vec<_>>>()?;
            print_values(out, v)
        }
        DistAction::Sample { p, n, seed, out: path } => {
            let d = MatsuokaParams::new(*p)?;
            if *n == 0 {
                return Err(LabError::Usage("--n must be at least 1".into()));
            }
            if let Some(path) = path {
                check_parent(path)?;
            }
            let seed = seed.unwrap_or_else(rand::random);
            // echo the seed actually used
            let resolved = Cli {
                command: Command::Dist {
                    action: DistAction::Sample {
                        p: *p,
                        n: *n,
                        seed: Some(seed),
                        out: path.clone(),
                    },
                },
            };
            let rows: Vec<Vec<String>> = d.sample(*n, seed).into_iter().map(|x| vec![fmt_f64(x)]).collect();
            let text = render_csv(&header_lines(&resolved), &["x"], &rows);
            match path {
                Some(path) => {
                    let mut files = Outputs::new();
                    files.write(path, &text)?;
                    files.commit();
                    writeln!(out, "seed {seed}").map_err(stdout_err)
                }
                None => out.write_all(text.as_bytes()).map_err(stdout_err),
            }
        }
        DistAction::Moment { p, k } => {
            let d = MatsuokaParams::new(*p)?;
            match k {
                Some(k) => print_values(out, [d.raw_moment(*k)?]),
                None => print_row(
                    out,
                    &["mean", "variance", "skewness", "kurtosis"],
                    &[d.mean(), d.variance(), d.skewness(), d.kurtosis()].map(fmt_f64),
                ),
            }
        }
        DistAction::Expectile { p, alpha } => {
            let d = MatsuokaParams::new(*p)?;
            print_values(out, [d.expectile(*alpha)?])
        }
        DistAction::Entropy { p, kind, alpha, beta } => {
            let d = MatsuokaParams::new(*p)?;
            let need = |v: &Option<f64>, flag: &str| {
                v.ok_or_else(|| LabError::Usage(format!("--kind {} requires --{flag}", kind.to_possible_value().unwrap().get_name())))
            };
            let kind = match kind {
                EntropyArg::Shannon => EntropyKind::Shannon,
                EntropyArg::Differential => EntropyKind::Differential,
                EntropyArg::Renyi => EntropyKind::Renyi { alpha: need(alpha, "alpha")? },
                EntropyArg::Tsallis => EntropyKind::Tsallis { alpha: need(alpha, "alpha")? },
                EntropyArg::SharmaMittal => {
                    EntropyKind::SharmaMittal(EntropyOrders::new(need(alpha, "alpha")?, need(beta, "beta")?)?)
                }
            };
            print_values(out, [d.entropy(kind)?])
        }
        DistAction::Reliability { p, q } => print_values(out, [ReliabilityPair::new(*p, *q)?.reliability()]),
        DistAction::Fit { input, column } => {
            let table = Table::read(input)?;
            let name = column.clone().unwrap_or_else(|| table.headers[0].clone());
            let sample = table.numeric_column(&name)?;
            let fit = fit_mle(&sample)?;
            print_row(
                out,
                &["p_mle", "p_umvue", "n"],
                &[fmt_f64(fit.p_mle), fmt_f64(fit.p_umvue), fit.n.to_string()],
            )
        }
    }
}

/// The smoother configuration selected by `args` for data with `dimension` inputs.
pub fn frontier_config(args: &SmootherArgs, dimension: usize) -> Result<FrontierConfig> {
    let method: Method = match args.method {
        Some(m) => m.into(),
        None if dimension == 1 => Method::Loclin,
        None => Method::Sbs,
    };
    if method.dimension() != dimension {
        return Err(LabError::Usage(format!(
            "--method {} needs {} input column(s), got {dimension}",
            method.name(),
            method.dimension()
        )));
    }
    let kernel = match &args.kernel_file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
            serde_json::from_str::<Kernel>(&text).map_err(|e| LabError::Schema {
                path: path.clone(),
                message: format!("not a kernel description: {e}"),
            })?
        }
        None => match args.kernel {
            KernelArg::Epanechnikov => Kernel::Epanechnikov,
            KernelArg::Gaussian => Kernel::Gaussian,
        },
    };
    let bandwidth = if args.bandwidth.trim() == "cv" {
        BandwidthChoice::Cv { grid: None }
    } else {
        let h = args
            .bandwidth
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| LabError::Usage(format!("--bandwidth must be 'cv' or h1[,h2], got '{}'", args.bandwidth)))?;
        if h.len() != dimension {
            return Err(LabError::Usage(format!(
                "--bandwidth needs {dimension} value(s), got {}",
                h.len()
            )));
        }
        BandwidthChoice::Fixed(Bandwidths::new(h)?)
    };
    if args.sbs_grid < frontier_core::smoothers::sbs::MIN_GRID {
        return Err(LabError::Usage(format!(
            "--sbs-grid must be at least {}",
            frontier_core::smoothers::sbs::MIN_GRID
        )));
    }
    let mut config = FrontierConfig::new(method, kernel, bandwidth);
    config.smoother.cbs_mode = match args.cbs_mode {
        CbsModeArg::Iterative => CbsMode::Iterative,
        CbsModeArg::Explicit => CbsMode::Explicit,
    };
    config.smoother.sbs_grid = args.sbs_grid;
    Ok(config)
}

#[derive(Serialize)]
struct ModelDocument<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a Cli,
    model: frontier_core::frontier::ModelSnapshot,
}

fn components_path(args: &FitArgs) -> Option<PathBuf> {
    if args.input_cols.len() != 2 {
        return None;
    }
    args.components_out
        .clone()
        .or_else(|| args.model_out.as_ref().map(|m| m.with_extension("components.csv")))
}

fn fit(cli: &Cli, args: &FitArgs, out: &mut dyn Write) -> Result<()> {
    if !(1..=2).contains(&args.input_cols.len()) {
        return Err(LabError::Usage(format!(
            "--input-cols takes one or two names, got {}",
            args.input_cols.len()
        )));
    }
    let config = frontier_config(&args.smoother, args.input_cols.len())?;
    let components_out = components_path(args);
    for path in [&args.model_out, &args.scores_out, &components_out].into_iter().flatten() {
        check_parent(path)?;
    }
    let table = Table::read(&args.input)?;
    let y = table.numeric_column(&args.output_col)?;
    if let Some(k) = y.iter().position(|&v| v <= 0.0) {
        return Err(LabError::Schema {
            path: args.input.clone(),
            message: format!(
                "line {}, column '{}': output must be > 0, got {}",
                table.lines[k], args.output_col, y[k]
            ),
        });
    }
    let columns = args
        .input_cols
        .iter()
        .map(|c| table.numeric_column(c))
        .collect::<Result<Vec<_>>>()?;
    let data = Dataset::new(y, columns)?;
    let model = fit_frontier(&data, &config)?;
    let header = header_lines(cli);

    let mut files = Outputs::new();
    if let Some(path) = &args.model_out {
        let doc = ModelDocument {
            tool: "frontier-lab",
            version: crate::io::VERSION,
            config: cli,
            model: model.snapshot()?,
        };
        let json = serde_json::to_string_pretty(&doc).expect("model documents serialize");
        files.write(path, &(json + "\n"))?;
    }
    if let Some(path) = &args.scores_out {
        files.write(path, &scores_csv(&header, args, &data, &model))?;
    }
    if let Some(path) = &components_out {
        let (x1, g1) = model.fit.component_grid(0, frontier_core::frontier::SNAPSHOT_GRID)?;
        let (x2, g2) = model.fit.component_grid(1, frontier_core::frontier::SNAPSHOT_GRID)?;
        let rows: Vec<Vec<String>> = (0..x1.len())
            .map(|k| vec![fmt_f64(x1[k]), fmt_f64(g1[k]), fmt_f64(x2[k]), fmt_f64(g2[k])])
            .collect();
        let names = [args.input_cols[0].as_str(), "g1", args.input_cols[1].as_str(), "g2"];
        files.write(path, &render_csv(&header, &names, &rows))?;
    }

    let report = efficiency_scores(&model);
    let cv_failures = model.cv.as_ref().map_or(0, |cv| cv.failures());
    let summary = format!(
        "method: {}\nkernel: {}\nbandwidths: {}\np_hat: {}\ng0: {}\ncv_failures: {}\nscores_above_one: {}\n",
        model.fit.method.name(),
        model.fit.kernel.name(),
        join(model.bandwidths().as_slice()),
        fmt_f64(model.p_hat),
        fmt_f64(model.g0()),
        cv_failures,
        report.above_one
    );
    out.write_all(summary.as_bytes()).map_err(stdout_err)?;
    files.commit();
    Ok(())
}

fn join(v: &[f64]) -> String {
    v.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(",")
}

fn scores_csv(header: &[String], args: &FitArgs, data: &Dataset, model: &FrontierModel) -> String {
    let mut names: Vec<&str> = vec!["id", &args.output_col];
    names.extend(args.input_cols.iter().map(String::as_str));
    names.extend(["g_hat", "f_hat", "efficiency"]);
    let rows: Vec<Vec<String>> = (0..data.len())
        .map(|i| {
            let mut row = vec![(i + 1).to_string(), fmt_f64(data.y()[i])];
            row.extend(data.point(i).into_iter().map(fmt_f64));
            row.extend([model.fit.fitted[i], model.frontier_at_obs[i], model.scores[i]].map(fmt_f64));
            row
        })
        .collect();
    render_csv(header, &names, &rows)
}

/// File-name tag of a cell, e.g. `dgp_i_p2_n250`.
pub fn cell_tag(cell: &Cell) -> String {
    format!("dgp_{}_p{}_n{}", cell.kind.name(), fmt_f64(cell.p), cell.n)
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Per-replica CSV of one cell.
pub fn replica_csv(header: &[String], report: &SimReport) -> String {
    let two = report.cell.kind == DgpKind::Ii;
    let mut names = vec!["r", "seed", "ase_g", "ase_f"];
    if two {
        names.extend(["ase_g1", "ase_g2"]);
    }
    names.extend(["p_hat", "max_abs_f"]);
    names.extend(if two { &["h1", "h2"][..] } else { &["h"][..] });
    let rows: Vec<Vec<String>> = report
        .records
        .iter()
        .map(|r| {
            let mut row = vec![r.replica.to_string(), r.seed.to_string(), fmt_f64(r.ase_g), fmt_f64(r.ase_f)];
            if two {
                row.extend([opt(r.ase_g1), opt(r.ase_g2)]);
            }
            row.extend([fmt_f64(r.p_hat), fmt_f64(r.max_abs_f)]);
            row.extend(r.bandwidths.iter().map(|&h| fmt_f64(h)));
            row
        })
        .collect();
    render_csv(header, &names, &rows)
}

const AGGREGATE_COLUMNS: [&str; 13] = [
    "dgp", "p", "n", "replicas", "failures", "mean_p", "var_p", "q05_p", "q95_p", "l_f", "l_g", "l_g1", "l_g2",
];

fn aggregate_row(report: &SimReport) -> Vec<String> {
    let a = &report.aggregate;
    vec![
        report.cell.kind.name().to_string(),
        fmt_f64(report.cell.p),
        report.cell.n.to_string(),
        a.replicas.to_string(),
        a.failures.to_string(),
        fmt_f64(a.mean_p),
        fmt_f64(a.var_p),
        fmt_f64(a.q05_p),
        fmt_f64(a.q95_p),
        fmt_f64(a.l_f),
        fmt_f64(a.l_g),
        opt(a.l_g1),
        opt(a.l_g2),
    ]
}

fn simulate(cli: &Cli, args: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let kind = match args.dgp {
        DgpArg::I => DgpKind::I,
        DgpArg::Ii => DgpKind::Ii,
    };
    let config = frontier_config(&args.smoother, kind.dimension())?;
    for &p in &args.p {
        MatsuokaParams::new(p)?;
    }
    if let Some(&n) = args.n.iter().find(|&&n| n < frontier_core::frontier::MIN_OBSERVATIONS) {
        return Err(LabError::Usage(format!(
            "--n values must be at least {}, got {n}",
            frontier_core::frontier::MIN_OBSERVATIONS
        )));
    }
    if !args.out_dir.is_dir() {
        return Err(LabError::io(
            &args.out_dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "output directory does not exist"),
        ));
    }
    let cells: Vec<Cell> = args
        .p
        .iter()
        .flat_map(|&p| args.n.iter().map(move |&n| Cell { kind, p, n }))
        .collect();

    let started = Instant::now();
    let reports = runner::run_study(&cells, args.replicas, &config, args.seed, args.threads)?;
    eprintln!("simulated {} cell(s) in {:.1} s", cells.len(), started.elapsed().as_secs_f64());

    let header = header_lines(cli);
    let mut files = Outputs::new();
    let mut p_rows = Vec::new();
    let mut failure_rows = Vec::new();
    for report in &reports {
        let path = args.out_dir.join(format!("replicas_{}.csv", cell_tag(&report.cell)));
        files.write(&path, &replica_csv(&header, report))?;
        for r in &report.records {
            p_rows.push(vec![
                kind.name().to_string(),
                fmt_f64(report.cell.p),
                report.cell.n.to_string(),
                r.replica.to_string(),
                fmt_f64(r.p_hat),
            ]);
        }
        for f in &report.failures {
            failure_rows.push(vec![
                kind.name().to_string(),
                fmt_f64(report.cell.p),
                report.cell.n.to_string(),
                f.replica.to_string(),
                f.seed.to_string(),
                f.error.clone(),
            ]);
        }
    }
    let agg_rows: Vec<Vec<String>> = reports.iter().map(aggregate_row).collect();
    files.write(&args.out_dir.join("aggregate.csv"), &render_csv(&header, &AGGREGATE_COLUMNS, &agg_rows))?;
    files.write(
        &args.out_dir.join("p_hat.csv"),
        &render_csv(&header, &["dgp", "p", "n", "r", "p_hat"], &p_rows),
    )?;
    files.write(
        &args.out_dir.join("failures.csv"),
        &render_csv(&header, &["dgp", "p", "n", "r", "seed", "error"], &failure_rows),
    )?;

    let text = render_csv(&[], &AGGREGATE_COLUMNS, &agg_rows);
    out.write_all(text.as_bytes()).map_err(stdout_err)?;
    files.commit();
    Ok(())
}
