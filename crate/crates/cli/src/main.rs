mod config;

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spatent_core::analysis::{
    critical_temperatures, evaluate_pair, fit_power_law, momentum_window_scan, run_sweep, CriticalTemperatureCurve,
    PairSetup, SweepSpec, TcStatus,
};
use spatent_core::export::{fmt_f64, write_extraction_csv, write_sweep_csv, write_tc_csv, write_window_csv};
use spatent_core::extraction::extraction_scan;
use spatent_core::modes::{Region, ENTRY_NAMES};
use spatent_core::selftest::run_selftest;
use spatent_core::{Error, ErrorClass, PairEvaluation};

use crate::config::RunConfig;

const OUT_DIR_ENV: &str = "SPATENT_OUT_DIR";

/// Spatial-mode entanglement of a thermal Bose gas in a 1D box.
#[derive(Parser, Debug)]
#[command(name = "spatent", version)]
struct Cli {
    /// TOML run configuration; every key has a default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (also `SPATENT_OUT_DIR`, then `output.dir`, then `.`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the Monte-Carlo checks.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps and scans.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Separability verdict for one pair of regions.
    Verdict(Overrides),
    /// Entanglement map over separation and temperature.
    Sweep(Overrides),
    /// Smallest and largest entangling momentum windows per region width.
    Window(Overrides),
    /// Critical temperature per region width and a power-law fit.
    Tc(Overrides),
    /// Probe-pair extraction over the sweep grid.
    Extract(Overrides),
    /// Numerical self-checks against independent references.
    Selftest(Overrides),
}

#[derive(Args, Debug)]
struct Overrides {
    /// Config overrides as `--section.key value`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--SECTION.KEY VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(m) | Failure::Numerical(m) | Failure::Io(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = match &e {
            Error::Divergent(report) => divergence_diagnostic(report),
            _ => e.to_string(),
        };
        match e.class() {
            ErrorClass::Validation => Failure::Validation(msg),
            ErrorClass::Numerical => Failure::Numerical(msg),
        }
    }
}

fn divergence_diagnostic(report: &spatent_core::CmAssemblyReport) -> String {
    let bad: Vec<String> = ENTRY_NAMES
        .iter()
        .zip(report.series_converged)
        .zip(report.tail_estimates)
        .filter(|((_, ok), _)| !ok)
        .map(|((name, _), tail)| format!("{name} (tail estimate {tail:.3e})"))
        .collect();
    format!(
        "mode sums did not converge within {} terms: {}. Sharp-edged (top-hat) regions give momentum \
         variances that grow without bound as more modes are added; use a gaussian profile or a \
         finite momentum window (truncation = \"window\")",
        report.truncation.l_max,
        bad.join(", ")
    )
}

struct Context {
    cfg: RunConfig,
    out_dir: PathBuf,
    out_explicit: bool,
    command: &'static str,
}

impl Context {
    fn metadata(&self) -> Vec<(String, String)> {
        let f = &self.cfg.field;
        vec![
            ("tool".into(), format!("spatent {}", env!("CARGO_PKG_VERSION"))),
            ("command".into(), self.command.into()),
            ("config_sha256".into(), self.cfg.hash()),
            (
                "units".into(),
                format!(
                    "hbar={} k_B={} m={} L={}; covariance entries dimensionless, vacuum variance 1",
                    f.hbar, f.k_b, f.mass, f.box_length
                ),
            ),
            ("chemical_potential".into(), f.chemical_potential.to_string()),
        ]
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>, Failure> {
        std::fs::create_dir_all(&self.out_dir)
            .map_err(|e| Failure::Io(format!("cannot create {}: {e}", self.out_dir.display())))?;
        let path = self.out_dir.join(name);
        File::create(&path)
            .map(BufWriter::new)
            .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
    }

    fn write_json<T: serde::Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, Failure> {
        let meta: serde_json::Map<String, serde_json::Value> =
            self.metadata().into_iter().map(|(k, v)| (k, v.into())).collect();
        let doc = match serde_json::to_value(value).map_err(|e| Failure::Io(format!("{name}: {e}")))? {
            serde_json::Value::Object(mut obj) => {
                obj.insert("meta".into(), meta.into());
                serde_json::Value::Object(obj)
            }
            other => serde_json::json!({ "meta": meta, "data": other }),
        };
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, &doc).map_err(|e| Failure::Io(format!("{name}: {e}")))?;
        writeln!(w).and_then(|_| w.flush()).map_err(|e| Failure::Io(format!("{name}: {e}")))?;
        Ok(self.out_dir.join(name))
    }

    fn write_csv(
        &self,
        name: &str,
        f: impl FnOnce(&mut BufWriter<File>, &[(String, String)]) -> spatent_core::Result<()>,
    ) -> Result<PathBuf, Failure> {
        let mut w = self.create(name)?;
        f(&mut w, &self.metadata()).map_err(|e| Failure::Io(format!("{name}: {e}")))?;
        w.flush().map_err(|e| Failure::Io(format!("{name}: {e}")))?;
        Ok(self.out_dir.join(name))
    }
}

fn resolve_out_dir(flag: Option<&Path>, cfg: &RunConfig) -> (PathBuf, bool) {
    if let Some(p) = flag {
        return (p.to_path_buf(), true);
    }
    if let Some(p) = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()) {
        return (PathBuf::from(p), true);
    }
    match &cfg.output.dir {
        Some(p) => (p.clone(), true),
        None => (PathBuf::from("."), false),
    }
}

fn print_evaluation(e: &PairEvaluation) {
    let s = &e.setup;
    let v = &e.verdict;
    println!("region R          [{}, {}]", s.region_r.x1, s.region_r.x2);
    println!("region Q          [{}, {}]", s.region_q.x1, s.region_q.x2);
    println!("profile           {}", s.profile.name());
    println!("modes             {}..={} ({:?})", s.truncation.l_min, s.truncation.l_max, s.truncation.kind);
    println!("temperature       {}", e.temperature);
    for (name, value) in ENTRY_NAMES.iter().zip(e.report.cm.entries()) {
        println!("{name:<17} {}", fmt_f64(value));
    }
    println!("nu_minus          {}", fmt_f64(v.nu_minus));
    println!("nu_minus_pt       {}", fmt_f64(v.nu_minus_pt));
    println!("sep_expr_direct  {}", fmt_f64(v.sep_expr_direct));
    println!("sep_expr_det      {}", fmt_f64(v.sep_expr_det));
    println!("log_negativity    {}", fmt_f64(v.log_negativity));
    println!("purity            {}", fmt_f64(e.purity));
    println!("purity_threshold  {}", fmt_f64(e.purity_threshold));
    println!("raw_residual      {}", fmt_f64(e.raw_residual));
    println!("flags             {}", e.flags().join(";"));
    if let Some(note) = e.purity_mismatch() {
        eprintln!("note: {note}");
    }
    println!("verdict           {}", v.verdict);
}

fn cmd_verdict(ctx: &Context) -> Result<(), Failure> {
    let c = &ctx.cfg;
    let field = c.field_config()?;
    let sec = &c.verdict;
    let (r, q) = match (sec.region_r, sec.region_q) {
        (Some([a, b]), Some([x, y])) => (Region::new(a, b)?, Region::new(x, y)?),
        (None, None) => {
            let centre = sec.centre.unwrap_or(0.5 * field.box_length());
            Region::symmetric_pair(sec.width, sec.separation, 2.0 * centre)?
        }
        _ => {
            return Err(Failure::Validation(
                "verdict.region_r and verdict.region_q must be given together".into(),
            ))
        }
    };
    r.check_inside(field.box_length())?;
    q.check_inside(field.box_length())?;
    if r.overlaps(&q) {
        return Err(Failure::Validation(format!(
            "regions [{}, {}] and [{}, {}] overlap",
            r.x1, r.x2, q.x1, q.x2
        )));
    }
    let modes = sec.modes();
    let setup = PairSetup {
        gate: modes.gate(),
        residual_gate: c.numerics.residual_gate,
        ..PairSetup::new(r, q, modes.profile(), modes.truncation(&c.numerics))
    };
    let eval = evaluate_pair(&setup, &field)?;
    print_evaluation(&eval);
    if ctx.out_explicit {
        ctx.write_json("verdict.json", &eval)?;
    }
    Ok(())
}

fn sweep_spec(c: &RunConfig) -> SweepSpec {
    let s = &c.sweep;
    let modes = s.modes();
    SweepSpec {
        gate: modes.gate(),
        residual_gate: c.numerics.residual_gate,
        centre: s.centre,
        ..SweepSpec::new(
            modes.profile(),
            s.width,
            s.separations(),
            s.temperatures(),
            modes.truncation(&c.numerics),
        )
    }
}

fn cmd_sweep(ctx: &Context) -> Result<(), Failure> {
    let field = ctx.cfg.field_config()?;
    let result = run_sweep(&sweep_spec(&ctx.cfg), &field)?;
    let csv = ctx.write_csv("sweep.csv", |w, m| write_sweep_csv(w, m, &result))?;
    let json = ctx.write_json("sweep.json", &result)?;
    let evals: Vec<_> = result.points.iter().filter_map(|p| p.evaluation()).collect();
    let entangled = evals.iter().filter(|e| e.is_entangled()).count();
    let unphysical = evals.iter().filter(|e| !e.verdict.is_valid()).count();
    let failed = result.points.len() - evals.len();
    println!(
        "{} points: {entangled} entangled, {unphysical} unphysical, {failed} failed",
        result.points.len()
    );
    println!("wrote {}", csv.display());
    println!("wrote {}", json.display());
    Ok(())
}

fn cmd_window(ctx: &Context) -> Result<(), Failure> {
    let field = ctx.cfg.field_config()?.with_temperature(ctx.cfg.window.temperature)?;
    let w = &ctx.cfg.window;
    let scans = w
        .widths
        .iter()
        .map(|&width| momentum_window_scan(width, &field, w.cap))
        .collect::<Result<Vec<_>, _>>()?;
    println!("{:>12} {:>8} {:>8} {:>6}", "width", "dk_min", "dk_max", "open");
    for s in &scans {
        let show = |v: Option<usize>| v.map_or("-".to_string(), |k| k.to_string());
        println!("{:>12.6} {:>8} {:>8} {:>6}", s.width, show(s.dk_min), show(s.dk_max), s.open_window);
    }
    let csv = ctx.write_csv("window.csv", |wr, m| write_window_csv(wr, m, &scans))?;
    let summary: Vec<_> = scans
        .iter()
        .map(|s| {
            serde_json::json!({
                "width": s.width,
                "temperature": s.temperature,
                "cap": s.cap,
                "dk_min": s.dk_min,
                "dk_max": s.dk_max,
                "open_window": s.open_window,
            })
        })
        .collect();
    let json = ctx.write_json("window.json", &summary)?;
    println!("wrote {}", csv.display());
    println!("wrote {}", json.display());
    Ok(())
}

fn cmd_tc(ctx: &Context) -> Result<(), Failure> {
    let field = ctx.cfg.field_config()?;
    let t = &ctx.cfg.tc;
    let mut all = Vec::new();
    let mut curves = Vec::new();
    for &route in &t.routes {
        let results = critical_temperatures(&t.widths, &field, route, &ctx.cfg.tc_options())?;
        let points: Vec<(f64, f64)> = results
            .iter()
            .filter(|r| r.status == TcStatus::Bracketed)
            .map(|r| (r.width, r.t_c))
            .collect();
        let route_name = serde_json::to_value(route).unwrap().as_str().unwrap_or("").to_string();
        println!("route {route_name}");
        println!("{:>12} {:>14} {:>14}", "width", "T_C", "status");
        for r in &results {
            let status = serde_json::to_value(r.status).unwrap();
            println!("{:>12.6} {:>14.6} {:>14}", r.width, r.t_c, status.as_str().unwrap_or(""));
        }
        let fit = if points.len() >= CriticalTemperatureCurve::MIN_POINTS {
            let fit = fit_power_law(&points)?;
            println!(
                "T_C ~ {:.4} * width^{:.4} (log RMS residual {:.3e})",
                fit.amplitude, fit.exponent, fit.residual
            );
            Some(fit)
        } else {
            eprintln!(
                "warning: route {route_name}: {} bracketed widths, at least {} needed for a power-law fit",
                points.len(),
                CriticalTemperatureCurve::MIN_POINTS
            );
            None
        };
        curves.push(serde_json::json!({
            "route": route,
            "results": results,
            "fit": fit,
            "exponent": fit.map(|f| f.exponent),
        }));
        all.extend(results);
    }
    let csv = ctx.write_csv("tc.csv", |w, m| write_tc_csv(w, m, &all))?;
    let json = ctx.write_json("tc.json", &serde_json::json!({ "curves": curves }))?;
    println!("wrote {}", csv.display());
    println!("wrote {}", json.display());
    Ok(())
}

fn cmd_extract(ctx: &Context) -> Result<(), Failure> {
    let field = ctx.cfg.field_config()?;
    let sweep = run_sweep(&sweep_spec(&ctx.cfg), &field)?;
    let e = &ctx.cfg.extract;
    let rows = extraction_scan(&sweep, e.gamma_eff, e.probe_width, &field)?;
    let count = |f: &dyn Fn(&spatent_core::extraction::ExtractionRow) -> bool| rows.iter().filter(|r| f(r)).count();
    let table = serde_json::json!({
        "field_entangled_probe_entangled": count(&|r| r.log_negativity > 0.0 && r.state.entangled),
        "field_entangled_probe_separable": count(&|r| r.log_negativity > 0.0 && !r.state.entangled),
        "field_separable_probe_entangled": count(&|r| r.log_negativity == 0.0 && r.state.entangled),
        "field_separable_probe_separable": count(&|r| r.log_negativity == 0.0 && !r.state.entangled),
    });
    println!("field vs probe verdicts: {table}");
    let csv = ctx.write_csv("extraction.csv", |w, m| write_extraction_csv(w, m, &rows))?;
    let json = ctx.write_json(
        "extraction.json",
        &serde_json::json!({ "gamma_eff": e.gamma_eff, "correspondence": table, "rows": rows }),
    )?;
    println!("wrote {}", csv.display());
    println!("wrote {}", json.display());
    Ok(())
}

fn cmd_selftest(ctx: &Context) -> Result<(), Failure> {
    let report = run_selftest(&ctx.cfg.selftest);
    for c in &report.checks {
        println!("{:<4} {:<20} {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail);
    }
    if ctx.out_explicit {
        ctx.write_json("selftest.json", &report)?;
    }
    match report.first_failure() {
        None => Ok(()),
        Some(c) => Err(Failure::Numerical(format!("selftest check `{}` failed: {}", c.name, c.detail))),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (name, ov): (&'static str, &Overrides) = match &cli.command {
        Command::Verdict(o) => ("verdict", o),
        Command::Sweep(o) => ("sweep", o),
        Command::Window(o) => ("window", o),
        Command::Tc(o) => ("tc", o),
        Command::Extract(o) => ("extract", o),
        Command::Selftest(o) => ("selftest", o),
    };
    let overrides = config::parse_overrides(&ov.overrides)?;
    let mut cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    if let Some(seed) = cli.seed {
        cfg.selftest.seed = seed;
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Validation("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Numerical(format!("thread pool: {e}")))?;
    }
    let (out_dir, out_explicit) = resolve_out_dir(cli.out.as_deref(), &cfg);
    let ctx = Context {
        cfg,
        out_dir,
        out_explicit,
        command: name,
    };
    match cli.command {
        Command::Verdict(_) => cmd_verdict(&ctx),
        Command::Sweep(_) => cmd_sweep(&ctx),
        Command::Window(_) => cmd_window(&ctx),
        Command::Tc(_) => cmd_tc(&ctx),
        Command::Extract(_) => cmd_extract(&ctx),
        Command::Selftest(_) => cmd_selftest(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("spatent: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
