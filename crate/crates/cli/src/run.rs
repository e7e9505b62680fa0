use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::Value;
use twistecho::bayes::{self, BayesOptions, EstimatorGain};
use twistecho::catalog;
use twistecho::metrics::{qfi_twisted_input_with, sensitivity};
use twistecho::search::{self, fmt_f64, optimize_point_with};
use twistecho::symmetry::{classify_fourier, DEFAULT_FOURIER_SAMPLES, DEFAULT_FOURIER_TOLERANCE};
use twistecho::{DeSettings, Protocol, ProtocolConfig, SpinOperators};

use crate::args::*;
use crate::grid::Angle;
use crate::manifest::RunManifest;

/// How a successful run ended.
pub enum Completion {
    Done,
    /// Outputs written, but some entries failed numerically.
    Partial(String),
}

pub fn execute(command: Command) -> Result<Completion> {
    if let Command::Replay(r) = &command {
        return replay(r);
    }
    let start = Instant::now();
    let (outputs, completion) = dispatch(&command)?;
    if !outputs.is_empty() {
        RunManifest {
            command: command.name().to_string(),
            seed: command.seed(),
            parameters: command,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_seconds: start.elapsed().as_secs_f64(),
            outputs,
        }
        .write()?;
    }
    Ok(completion)
}

fn replay(args: &ReplayArgs) -> Result<Completion> {
    let manifest = RunManifest::read(&args.manifest)?;
    let mut command = manifest.parameters;
    if let Command::Replay(_) = command {
        bail!("a manifest cannot record a replay");
    }
    if let Some(out) = &args.out {
        if !command.set_out(out.clone()) {
            bail!("recorded command has no output to redirect");
        }
    }
    if let Some(w) = args.workers {
        command.set_workers(w);
    }
    execute(command)
}

fn dispatch(command: &Command) -> Result<(Vec<PathBuf>, Completion)> {
    match command {
        Command::Landscape(a) => landscape(a),
        Command::Optimize(a) => optimize(a),
        Command::Signal(a) => signal(a),
        Command::Qfi(a) => qfi(a),
        Command::Curve(a) => curve(a),
        Command::Emv(a) => emv(a),
        Command::Catalog(a) => catalog_cmd(a),
        Command::Stability(a) => stability(a),
        Command::Replay(_) => unreachable!("handled by execute"),
    }
}

/// Prints to stdout; a closed pipe is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn done(out: &Path) -> Result<(Vec<PathBuf>, Completion)> {
    Ok((vec![out.to_path_buf()], Completion::Done))
}

/// Reads a bare config or the `config` field of a larger document.
pub fn load_config(path: &Path) -> Result<ProtocolConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let inner = match value.get("config") {
        Some(c) if value.get("n_particles").is_none() => c.clone(),
        _ => value,
    };
    let cfg: ProtocolConfig =
        serde_json::from_value(inner).with_context(|| format!("{} is not a protocol config", path.display()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn from_catalog(
    name: &str,
    n: Option<usize>,
    mu1: Option<Angle>,
    mu2: Option<Angle>,
    de: &DeSettings,
) -> Result<ProtocolConfig> {
    let n = n.ok_or_else(|| anyhow!("--name needs --n"))?;
    let mu1 = mu1.ok_or_else(|| anyhow!("--name needs --mu1"))?;
    Ok(catalog::build_with(name, n, mu1.0, mu2.map(|a| a.0), de)?.config)
}

fn resolve(source: &ProtocolSource, de: &DeSettings) -> Result<ProtocolConfig> {
    match (&source.config, &source.name) {
        (Some(path), _) => load_config(path),
        (None, Some(name)) => from_catalog(name, source.n, source.mu1, source.mu2, de),
        (None, None) => bail!("give a protocol with --config or --name"),
    }
}

fn landscape(a: &LandscapeArgs) -> Result<(Vec<PathBuf>, Completion)> {
    let grid = search::sweep_landscape(
        a.n,
        &a.mu1.values(),
        &a.mu2.values(),
        a.symmetry.into(),
        &a.search.settings(),
        a.search.workers,
    )?;
    write_text(&a.out, &grid.to_csv())?;
    let failures = grid.failures();
    let outputs = vec![a.out.clone()];
    if grid.degenerate() > 0 {
        eprintln!("note: {} cells have no usable slope for any axes (inv_dphi = 0)", grid.degenerate());
    }
    if failures > 0 {
        let first = grid.cells.iter().filter(|c| c.failed()).find_map(|c| c.error.clone()).unwrap_or_default();
        return Ok((outputs, Completion::Partial(format!("{failures} cells failed, first: {first}"))));
    }
    Ok((outputs, Completion::Done))
}

fn optimize(a: &OptimizeArgs) -> Result<(Vec<PathBuf>, Completion)> {
    let de = a.search.settings();
    let s = &a.source;
    let (n, mu1, mu2, class) = if s.config.is_some() || s.name.is_some() {
        let cfg = resolve(s, &de)?;
        let class = a.symmetry.map_or(cfg.symmetry_class, Into::into);
        (cfg.n_particles, cfg.mu1, cfg.mu2, class)
    } else {
        let n = s.n.ok_or_else(|| anyhow!("optimize needs --n (or --config/--name)"))?;
        let mu1 = s.mu1.ok_or_else(|| anyhow!("optimize needs --mu1"))?.0;
        let mu2 = s.mu2.ok_or_else(|| anyhow!("optimize needs --mu2"))?.0;
        (n, mu1, mu2, a.symmetry.unwrap_or(Symmetry::Anti).into())
    };
    let ops = SpinOperators::new(n)?;
    let best = optimize_point_with(&ops, mu1, mu2, class, &de)?;
    write_json(&a.out, &best)?;
    done(&a.out)
}

#[derive(Serialize)]
struct SignalSummary {
    config: ProtocolConfig,
    sensitivity: Option<twistecho::SensitivityReport>,
    sensitivity_error: Option<String>,
    fourier: twistecho::FourierReport,
}

fn signal(a: &SignalArgs) -> Result<(Vec<PathBuf>, Completion)> {
    let cfg = resolve(&a.source, &DeSettings::default().with_seed(a.seed))?;
    let ops = SpinOperators::new(cfg.n_particles)?;
    let protocol = Protocol::new(&ops, &cfg)?;
    let mut csv = String::from("phi,mean,variance,slope\n");
    for phi in a.phi.values() {
        let (mean, var) = protocol.signal(phi)?;
        let _ = writeln!(csv, "{},{},{},{}", fmt_f64(phi), fmt_f64(mean), fmt_f64(var), fmt_f64(protocol.slope(phi)));
    }
    write_text(&a.out, &csv)?;
    let (sens, err) = match sensitivity(&cfg, false) {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let summary = SignalSummary {
        fourier: classify_fourier(&cfg, DEFAULT_FOURIER_SAMPLES, DEFAULT_FOURIER_TOLERANCE)?,
        config: cfg,
        sensitivity: sens,
        sensitivity_error: err,
    };
    emit(&serde_json::to_string_pretty(&summary)?)?;
    done(&a.out)
}

fn qfi(a: &QfiArgs) -> Result<(Vec<PathBuf>, Completion)> {
    let ops = SpinOperators::new(a.n)?;
    let mut csv = String::from("mu1,f_q,sqrt_f_q,crb_delta_phi,ax,ay,az\n");
    for mu1 in a.mu1.values() {
        let r = qfi_twisted_input_with(&ops, mu1)?;
        let [x, y, z] = r.optimal_axis.to_array();
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            fmt_f64(mu1),
            fmt_f64(r.fisher_information),
            fmt_f64(r.fisher_information.sqrt()),
            fmt_f64(r.crb_delta_phi),
            fmt_f64(x),
            fmt_f64(y),
            fmt_f64(z)
        );
    }
    write_text(&a.out, &csv)?;
    done(&a.out)
}

fn curve(a: &CurveArgs) -> Result<(Vec<PathBuf>, Completion)> {
    let points = search::curve_vs_mu1(a.n, &a.mu1.values(), a.symmetry.into(), &a.search.settings(), a.search.workers)?;
    write_text(&a.out, &search::curve_to_csv(&points))?;
    let failures = points.iter().filter(|p| p.error.is_some()).count();
    if failures > 0 {
        return Ok((vec![a.out.clone()], Completion::Partial(format!("{failures} curve points failed"))));
    }
    done(&a.out)
}

fn emv(a: &EmvArgs) -> Result<(Vec<PathBuf>, Completion)> {
    let de = a.search.settings();
    let mut cfgs = Vec::new();
    for path in &a.config {
        let label = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        cfgs.push((label, load_config(path)?));
    }
    for name in &a.name {
        cfgs.push((name.clone(), from_catalog(name, a.n, a.mu1, a.mu2, &de)?));
    }
    if cfgs.is_empty() {
        bail!("emv needs at least one --config or --name");
    }
    let widths = if a.log { a.widths.log_values().map_err(|e| anyhow!(e))? } else { a.widths.values() };
    let opts = BayesOptions {
        nodes: a.nodes,
        auto_raise: !a.fixed_nodes,
        gain: match a.gain {
            Gain::Fixed => EstimatorGain::Fixed,
            Gain::Optimized => EstimatorGain::Optimized,
        },
    };
    let rows = bayes::emv_curve(&cfgs, &widths, &opts, a.search.workers)?;
    write_text(&a.out, &bayes::emv_to_csv(&rows))?;
    let uninformative = rows.iter().filter(|r| !r.informative).count();
    if uninformative > 0 {
        eprintln!("note: {uninformative} points carry no information beyond the prior (emv = inf)");
    }
    done(&a.out)
}

fn catalog_cmd(a: &CatalogArgs) -> Result<(Vec<PathBuf>, Completion)> {
    match &a.action {
        CatalogAction::List { all, out } => {
            let entries = if *all { catalog::list() } else { catalog::families() };
            let names: Vec<&str> = entries.iter().map(|e| e.name.as_str()).collect();
            emit(&names.join("\n"))?;
            write_optional(out, &entries)
        }
        CatalogAction::Regions { out } => {
            let entries = catalog::regions();
            let lines: Vec<String> = entries.iter().map(|e| format!("{}\t{}", e.name, e.tag)).collect();
            emit(&lines.join("\n"))?;
            write_optional(out, &entries)
        }
        CatalogAction::Build { name, n, mu1, mu2, out, search } => {
            let built = catalog::build_with(name, *n, mu1.0, mu2.map(|a| a.0), &search.settings())?;
            write_json(out, &built)?;
            done(out)
        }
    }
}

fn write_optional(out: &Option<PathBuf>, value: &impl Serialize) -> Result<(Vec<PathBuf>, Completion)> {
    match out {
        Some(path) => {
            write_json(path, value)?;
            done(path)
        }
        None => Ok((Vec::new(), Completion::Done)),
    }
}

fn stability(a: &StabilityArgs) -> Result<(Vec<PathBuf>, Completion)> {
    let cfg = resolve(&a.source, &DeSettings::default().with_seed(a.seed))?;
    let report = search::stability_with_threshold(&cfg, a.threshold)?;
    write_json(&a.out, &report)?;
    done(&a.out)
}
