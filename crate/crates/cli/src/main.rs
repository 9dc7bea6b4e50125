use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fas_secrecy::channel::{CorrelationModel, FasGeometry};
use fas_secrecy::distribution::{
    cdf_single_port, pdf_single_port, DensityForm, FasGainDistribution, PdfArgument,
};
use fas_secrecy::error::{Error, Result};
use fas_secrecy::metrics::Metric;
use fas_secrecy::monte_carlo::McMode;
use fas_secrecy::quadrature::{gauss_laguerre_rule, gauss_legendre_rule};
use fas_secrecy::runner::{
    emit_csv, first_failure, format_value, gain_distribution, parse_config, run_preset, run_sweep, write_csv,
    MappingChoice, RunConfig, SweepRow, SweepScale, SweepVariable,
};

#[derive(Parser)]
#[command(name = "fas-secrecy", version, about = "Secrecy outage and average secrecy capacity of FAS-NOMA links")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Monte Carlo seed.
    #[arg(long, global = true, env = "FASSEC_SEED")]
    seed: Option<u64>,
    /// Monte Carlo realizations; 0 turns the Monte Carlo columns off.
    #[arg(long, global = true)]
    samples: Option<u64>,
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, global = true, value_enum)]
    correlation_model: Option<CorrelationArg>,
    /// Order of both quadrature rules.
    #[arg(long, global = true)]
    quad_order: Option<usize>,
    /// Use `2 K0(√(2g))` as the single-port density.
    #[arg(long, global = true)]
    paper_literal_pdf: bool,
    /// Keep the `e^ψ` factor in the far-user ASC sum.
    #[arg(long, global = true)]
    paper_literal_asc_far: bool,
    /// Use the copula density on the diagonal as the best-port density.
    #[arg(long, global = true)]
    copula_diagonal_pdf: bool,
    /// Apply the Laguerre rule to the integrand without substitution.
    #[arg(long, global = true)]
    direct_laguerre: bool,
    /// Significant digits in CSV output.
    #[arg(long, global = true)]
    precision: Option<usize>,
    /// Output file (or directory for presets); standard output if omitted.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Copula,
    IndependentEnergyLink,
    SharedEnergyLink,
}

#[derive(Clone, Copy, ValueEnum)]
enum CorrelationArg {
    Spherical,
    Cylindrical,
}

#[derive(Clone, Copy, ValueEnum)]
enum User {
    Near,
    Far,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Laguerre,
    Legendre,
}

#[derive(Args, Default)]
struct SweepArgs {
    /// Swept variable (snr_un, snr_uf, snr_e, rate_un, rate_uf, beacon_dbm).
    #[arg(long)]
    variable: Option<String>,
    #[arg(long)]
    start: Option<f64>,
    #[arg(long)]
    stop: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    /// Treat sweep values as linear rather than dB.
    #[arg(long)]
    linear: bool,
}

#[derive(Subcommand)]
enum Command {
    /// External-eavesdropper SOP over the configured sweep.
    SopExt {
        #[arg(long, value_enum, default_value = "near")]
        user: User,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Internal-eavesdropper SOP of the near user.
    SopInt {
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// External-eavesdropper ASC over the configured sweep.
    AscExt {
        #[arg(long, value_enum, default_value = "near")]
        user: User,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Internal-eavesdropper ASC of the near user.
    AscInt {
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Run the configured sweep, or a figure preset (one CSV per curve).
    Sweep {
        #[arg(long)]
        preset: Option<String>,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Compare analytic values against Monte Carlo at every sweep point.
    McValidate {
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Nodes and weights of a quadrature rule.
    QuadTable {
        #[arg(long, value_enum, default_value = "laguerre")]
        kind: Kind,
        #[arg(long, default_value_t = 40)]
        order: usize,
    },
    /// CDF and density of the best-port gain on a log grid.
    DistTable {
        #[arg(long, default_value_t = 2)]
        n1: usize,
        #[arg(long, default_value_t = 2)]
        n2: usize,
        #[arg(long, default_value_t = 1.0)]
        w1: f64,
        #[arg(long, default_value_t = 1.0)]
        w2: f64,
        #[arg(long, default_value_t = 1e-3)]
        from: f64,
        #[arg(long, default_value_t = 100.0)]
        to: f64,
        #[arg(long, default_value_t = 41)]
        points: usize,
    },
}

fn diag(fields: &[(&str, String)]) {
    let line: Vec<String> = fields.iter().map(|(k, v)| format!("{k}={v}")).collect();
    eprintln!("{}", line.join(" "));
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(path) => parse_config(&std::fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = c.seed {
        cfg.mc.seed = seed;
    }
    if let Some(n) = c.samples {
        cfg.mc.n_samples = n;
    }
    if let Some(m) = c.mode {
        cfg.mc.mode = match m {
            ModeArg::Copula => McMode::Copula,
            ModeArg::IndependentEnergyLink => McMode::IndependentEnergyLink,
            ModeArg::SharedEnergyLink => McMode::SharedEnergyLink,
        };
    }
    if let Some(m) = c.correlation_model {
        cfg.geometry.correlation = match m {
            CorrelationArg::Spherical => CorrelationModel::Spherical,
            CorrelationArg::Cylindrical => CorrelationModel::Cylindrical,
        };
    }
    if let Some(m) = c.quad_order {
        cfg.secrecy.laguerre_order = m;
        cfg.secrecy.legendre_order = m;
    }
    if c.paper_literal_pdf {
        cfg.secrecy.pdf_argument = PdfArgument::PaperLiteral;
    }
    if c.paper_literal_asc_far {
        cfg.secrecy.asc_far_literal = true;
    }
    if c.copula_diagonal_pdf {
        cfg.secrecy.density = DensityForm::CopulaDiagonal;
    }
    if c.direct_laguerre {
        cfg.secrecy.laguerre_mapping = MappingChoice::Direct;
    }
    if let Some(p) = c.precision {
        cfg.output.precision = p;
    }
    if let Some(o) = &c.output {
        cfg.output.csv = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn apply_sweep(cfg: &mut RunConfig, s: &SweepArgs, metrics: Option<Vec<Metric>>) -> Result<()> {
    if let Some(v) = &s.variable {
        cfg.sweep.variable = match v.as_str() {
            "snr_un" => SweepVariable::SnrUn,
            "snr_uf" => SweepVariable::SnrUf,
            "snr_e" => SweepVariable::SnrE,
            "rate_un" => SweepVariable::RateUn,
            "rate_uf" => SweepVariable::RateUf,
            "beacon_dbm" => SweepVariable::BeaconDbm,
            other => return Err(Error::Config {
                key: "sweep.variable".into(),
                reason: format!("unknown variable `{other}`"),
            }),
        };
        if matches!(cfg.sweep.variable, SweepVariable::RateUn | SweepVariable::RateUf) {
            cfg.sweep.scale = SweepScale::Linear;
        }
    }
    if s.linear {
        cfg.sweep.scale = SweepScale::Linear;
    }
    if let Some(v) = s.start {
        cfg.sweep.start = v;
    }
    if let Some(v) = s.stop {
        cfg.sweep.stop = v;
    }
    if let Some(v) = s.points {
        cfg.sweep.points = v;
    }
    if let Some(m) = metrics {
        cfg.sweep.metrics = m;
    }
    cfg.validate()
}

fn report(rows: &[SweepRow], started: Instant) {
    let warnings = rows.iter().filter(|r| r.warning).count();
    let failed = rows.iter().filter(|r| r.failed).count();
    let worst = rows.iter().map(|r| r.mvn_max_error).fold(0.0, f64::max);
    diag(&[
        ("event", "sweep".into()),
        ("rows", rows.len().to_string()),
        ("failed", failed.to_string()),
        ("mvn_warnings", warnings.to_string()),
        ("mvn_max_error", format_value(worst, 3)),
        ("elapsed_s", format!("{:.3}", started.elapsed().as_secs_f64())),
    ]);
    for r in rows {
        for c in &r.cells {
            if let Some(e) = &c.error {
                diag(&[
                    ("event", "point_failed".into()),
                    ("metric", c.metric.name().into()),
                    ("sweep_value", r.sweep_value.to_string()),
                    ("error", format!("{e:?}")),
                ]);
            }
        }
    }
}

fn output_rows(cfg: &RunConfig, rows: &[SweepRow]) -> Result<()> {
    match &cfg.output.csv {
        Some(path) => emit_csv(rows, path, cfg.output.precision),
        None => write_csv(rows, std::io::stdout().lock(), cfg.output.precision),
    }
}

fn run_metric(mut cfg: RunConfig, s: &SweepArgs, metric: Metric) -> Result<()> {
    // the far user's metrics follow its own SNR unless told otherwise
    let far = matches!(metric, Metric::SopExternalFar | Metric::AscExternalFar);
    if far && s.variable.is_none() && cfg.sweep.variable == SweepVariable::SnrUn {
        cfg.sweep.variable = SweepVariable::SnrUf;
    }
    apply_sweep(&mut cfg, s, Some(vec![metric]))?;
    let started = Instant::now();
    let rows = run_sweep(&cfg)?;
    report(&rows, started);
    output_rows(&cfg, &rows)?;
    match first_failure(&rows) {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn run_presets(cfg: &RunConfig, name: &str) -> Result<()> {
    let started = Instant::now();
    let curves = run_preset(name, cfg)?;
    let dir = cfg.output.csv.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    let mut failure = None;
    for (curve, rows) in &curves {
        let path = dir.join(format!("{curve}.csv"));
        emit_csv(rows, &path, cfg.output.precision)?;
        diag(&[
            ("event", "curve".into()),
            ("name", curve.clone()),
            ("path", path.display().to_string()),
            ("rows", rows.len().to_string()),
            ("failed", rows.iter().filter(|r| r.failed).count().to_string()),
        ]);
        failure = failure.or_else(|| first_failure(rows));
    }
    diag(&[
        ("event", "preset".into()),
        ("name", name.into()),
        ("curves", curves.len().to_string()),
        ("elapsed_s", format!("{:.3}", started.elapsed().as_secs_f64())),
    ]);
    failure.map_or(Ok(()), Err)
}

fn mc_validate(mut cfg: RunConfig, s: &SweepArgs) -> Result<()> {
    apply_sweep(&mut cfg, s, None)?;
    if cfg.mc.n_samples == 0 {
        cfg.mc.n_samples = fas_secrecy::monte_carlo::DEFAULT_SAMPLES;
    }
    let started = Instant::now();
    let rows = run_sweep(&cfg)?;
    report(&rows, started);
    let digits = cfg.output.precision;
    let mut text = String::from("sweep_value,metric,analytic,mc,mc_stderr,abs_diff,tolerance,pass\n");
    let (mut checked, mut passed) = (0, 0);
    for r in &rows {
        for c in &r.cells {
            let mc = c.mc.expect("Monte Carlo enabled");
            let diff = (c.analytic - mc.value).abs();
            let tol = (3.0 * mc.std_error).max(0.02 * mc.value.abs());
            let ok = diff <= tol;
            checked += 1;
            passed += ok as usize;
            text.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                format_value(r.sweep_value, digits),
                c.metric.name(),
                format_value(c.analytic, digits),
                format_value(mc.value, digits),
                format_value(mc.std_error, digits),
                format_value(diff, digits),
                format_value(tol, digits),
                ok as u8
            ));
        }
    }
    diag(&[
        ("event", "mc_validate".into()),
        ("checked", checked.to_string()),
        ("passed", passed.to_string()),
        ("mode", cfg.mc.mode.name().into()),
        ("n_samples", cfg.mc.n_samples.to_string()),
        ("seed", cfg.mc.seed.to_string()),
    ]);
    write_text(&cfg, &text)
}

fn write_text(cfg: &RunConfig, text: &str) -> Result<()> {
    match &cfg.output.csv {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn quad_table(cfg: &RunConfig, kind: Kind, order: usize) -> Result<()> {
    let rule = match kind {
        Kind::Laguerre => gauss_laguerre_rule(order)?,
        Kind::Legendre => gauss_legendre_rule(order)?,
    };
    let d = 17.max(cfg.output.precision);
    let mut text = String::from("index,node,weight\n");
    for (i, (x, w)) in rule.nodes().iter().zip(rule.weights()).enumerate() {
        text.push_str(&format!("{},{},{}\n", i + 1, format_value(*x, d), format_value(*w, d)));
    }
    write_text(cfg, &text)
}

fn dist_table(cfg: &RunConfig, geometry: FasGeometry, from: f64, to: f64, points: usize) -> Result<()> {
    if !(from > 0.0 && to > from && points >= 2) {
        return Err(Error::Config {
            key: "dist-table".into(),
            reason: "need 0 < from < to and at least 2 points".into(),
        });
    }
    let dist: FasGainDistribution = gain_distribution(geometry, cfg.geometry.correlation)?
        .with_density(cfg.secrecy.density)
        .with_pdf_argument(cfg.secrecy.pdf_argument);
    let d = cfg.output.precision;
    let mut text = String::from("g,cdf_single_port,pdf_single_port,cdf_fas,cdf_fas_error,pdf_fas,pdf_fas_error\n");
    let ratio = (to / from).ln() / (points - 1) as f64;
    for i in 0..points {
        let g = from * (ratio * i as f64).exp();
        let cdf = dist.cdf_fas(g)?;
        let pdf = dist.pdf(g)?;
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            format_value(g, d),
            format_value(cdf_single_port(g), d),
            format_value(pdf_single_port(g)?, d),
            format_value(cdf.value, d),
            format_value(cdf.error, d),
            format_value(pdf.value, d),
            format_value(pdf.error, d)
        ));
    }
    write_text(cfg, &text)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
    }
    let cfg = load_config(&cli.common)?;
    match cli.command {
        Command::SopExt { user, sweep } => run_metric(
            cfg,
            &sweep,
            match user {
                User::Near => Metric::SopExternalNear,
                User::Far => Metric::SopExternalFar,
            },
        ),
        Command::SopInt { sweep } => run_metric(cfg, &sweep, Metric::SopInternalNear),
        Command::AscExt { user, sweep } => run_metric(
            cfg,
            &sweep,
            match user {
                User::Near => Metric::AscExternalNear,
                User::Far => Metric::AscExternalFar,
            },
        ),
        Command::AscInt { sweep } => run_metric(cfg, &sweep, Metric::AscInternalNear),
        Command::Sweep { preset, sweep } => match preset {
            Some(name) => run_presets(&cfg, &name),
            None => {
                let mut cfg = cfg;
                apply_sweep(&mut cfg, &sweep, None)?;
                let started = Instant::now();
                let rows = run_sweep(&cfg)?;
                report(&rows, started);
                output_rows(&cfg, &rows)?;
                first_failure(&rows).map_or(Ok(()), Err)
            }
        },
        Command::McValidate { sweep } => mc_validate(cfg, &sweep),
        Command::QuadTable { kind, order } => quad_table(&cfg, kind, order),
        Command::DistTable {
            n1,
            n2,
            w1,
            w2,
            from,
            to,
            points,
        } => dist_table(&cfg, FasGeometry::new(n1, n2, w1, w2)?, from, to, points),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            diag(&[("event", "error".into()), ("code", e.exit_code().to_string()), ("message", format!("{:?}", e.to_string()))]);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
