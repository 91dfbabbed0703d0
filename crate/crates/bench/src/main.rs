use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use periodic_cert_bench::config::{MuGridConfig, ScenarioConfig};
use periodic_cert_bench::report::{emit_report, Format, RunReport};
use periodic_cert_bench::scenario::{self, parse_region_spec};

/// Degree certificates for periodic solutions of perturbed periodic ODEs.
#[derive(Parser)]
#[command(name = "pcert", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario described by a JSON config.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Forced van der Pol benchmark.
    Vdp {
        #[command(flatten)]
        params: VdpArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Degree of a planar map `"f1, f2"` in `x1, x2` over a region.
    Degree {
        #[arg(long)]
        map: String,
        /// `disc:cx,cy,r`, `annulus:cx,cy,r_in,r_out` or `poly:x,y;x,y;...`.
        #[arg(long)]
        region: String,
        #[arg(long, default_value_t = 256)]
        samples: usize,
    },
    /// Detuning scan of the annular certificate.
    ScanMu {
        #[command(flatten)]
        params: VdpArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Args)]
struct VdpArgs {
    /// Optional config; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    delta: Option<f64>,
    /// Comma-separated physical epsilon values.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// `start:stop:step` or a comma-separated list.
    #[arg(long, allow_hyphen_values = true)]
    mu_grid: Option<String>,
}

#[derive(Args)]
struct OutputArgs {
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record wall-clock timings in the report.
    #[arg(long)]
    timings: bool,
}

fn parse_mu_grid(spec: &str, verify: Vec<f64>) -> anyhow::Result<MuGridConfig> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() == 3 {
        let v: Vec<f64> = parts.iter().map(|p| p.trim().parse()).collect::<Result<_, _>>().context("mu grid range")?;
        return Ok(MuGridConfig::Range { start: v[0], stop: v[1], step: v[2], verify });
    }
    if spec.trim().is_empty() {
        return Ok(MuGridConfig::List(Vec::new()));
    }
    let list = spec.split(',').map(|p| p.trim().parse()).collect::<Result<_, _>>().context("mu grid list")?;
    Ok(MuGridConfig::List(list))
}

fn load_config(path: &Path) -> anyhow::Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ScenarioConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn vdp_config(params: &VdpArgs) -> anyhow::Result<ScenarioConfig> {
    let mut cfg = match &params.config {
        Some(p) => load_config(p)?,
        None => ScenarioConfig::vdp_default(),
    };
    if let Some(d) = params.delta {
        cfg.theorem.delta = d;
    }
    if let Some(e) = &params.eps {
        cfg.epsilons = e.clone();
    }
    if let Some(g) = &params.mu_grid {
        cfg.mu_grid = parse_mu_grid(g, cfg.mu_grid.verify_values())?;
    }
    Ok(cfg)
}

fn apply_output(cfg: &mut ScenarioConfig, out: &OutputArgs) {
    if let Some(dir) = &out.out {
        cfg.output.dir = dir.display().to_string();
    }
    if out.timings {
        cfg.output.timings = true;
    }
}

fn write(report: &RunReport, cfg: &ScenarioConfig) -> anyhow::Result<()> {
    let dir = Path::new(&cfg.output.dir);
    let mut files = Vec::new();
    if cfg.output.json {
        files.extend(emit_report(report, Format::Json, dir)?);
    }
    if cfg.output.csv {
        files.extend(emit_report(report, Format::Csv, dir)?);
    }
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn summarize(report: &RunReport) {
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for c in &report.certificates {
        let deg = c.predicted_degree.map_or("n/a".to_string(), |d| d.to_string());
        let status = if c.valid { "valid" } else { "INVALID" };
        println!("{:<16} {} degree {deg:>4}  {status}", c.name, c.theorem);
        for f in &c.failures {
            println!("    failed: {f}");
        }
    }
    if let Some(r) = &report.frequency_pulling {
        println!("{}: |mu| <= {}", r.label, r.mu_hat);
    }
    for v in &report.verification {
        let mu = v.mu.map_or(String::from("-"), |m| format!("{m}"));
        println!("eps {:<6} mu {:<6} {}", v.epsilon, mu, v.verdict);
    }
    for e in &report.errors {
        println!("note: {e}");
    }
}

fn finish(report: RunReport, cfg: &ScenarioConfig) -> anyhow::Result<ExitCode> {
    summarize(&report);
    write(&report, cfg)?;
    Ok(if report.valid { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Analyze { config, out } => {
            let mut cfg = load_config(&config)?;
            apply_output(&mut cfg, &out);
            let report = scenario::analyze(&cfg)?;
            finish(report, &cfg)
        }
        Command::Vdp { params, out } => {
            let mut cfg = vdp_config(&params)?;
            apply_output(&mut cfg, &out);
            let report = scenario::run_vdp(&cfg)?;
            finish(report, &cfg)
        }
        Command::ScanMu { params, out } => {
            let mut cfg = vdp_config(&params)?;
            apply_output(&mut cfg, &out);
            let report = scenario::scan_mu(&cfg)?;
            finish(report, &cfg)
        }
        Command::Degree { map, region, samples } => {
            let spec = parse_region_spec(&region)?;
            let d = scenario::degree_of_expression(&map, &spec, samples)?;
            println!("degree {}", d.degree);
            println!("boundary margin {:e}", d.boundary_margin);
            println!("samples {} (refinements {})", d.samples_used, d.refinements);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
