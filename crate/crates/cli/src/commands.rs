use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use bitflip_core::dot_fault::exact::tally_exact;
use bitflip_core::dot_fault::{classify_value, dot_product};
use bitflip_core::gmres::{analyze, GmresConfig, RhsMode};
use bitflip_core::io::{parse_value, read_vector};
use bitflip_core::monte_carlo::{per_bit_slice, run_surface, write_slice_csv, McConfig, SliceSelector};
use bitflip_core::sparse::{equilibrate, gen_poisson, norms, read_matrix_market, write_matrix_market};
use bitflip_core::{
    classify_errors, decompose, enumerate_dot_errors, enumerate_perturbations, extract_interval, order_of_magnitude_bound,
    AbsError, ErrorClassTally, ErrorLookupTable,
};

use crate::args::{Cli, Command, DotMode, GmresCommand, McArgs, McCommand, MatrixCommand, SliceMode, TableCommand, TableFormat};
use crate::manifest::{digest_file, read_manifest, sha256_hex, unix_now, FileDigest, OutputRecord, RunManifest, MANIFEST_SCHEMA};

pub const REPORT_SCHEMA: u32 = 1;
pub const TABLE_CACHE_ENV: &str = "BITFLIP_TABLE_CACHE";

/// Bookkeeping shared by every subcommand, turned into the manifest at the end.
struct Run {
    subcommand: String,
    config: serde_json::Value,
    seeds: Vec<u64>,
    inputs: Vec<FileDigest>,
    outputs: Vec<OutputRecord>,
    primary_out: Option<PathBuf>,
}

impl Run {
    fn new(subcommand: &str) -> Self {
        Run {
            subcommand: subcommand.to_string(),
            config: serde_json::Value::Null,
            seeds: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            primary_out: None,
        }
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(digest_file(path)?);
        Ok(())
    }

    /// Write `bytes` to `out`, or to stdout when `out` is `None`.
    fn emit(&mut self, out: Option<&Path>, bytes: &[u8], schema: &str, deterministic: bool) -> Result<()> {
        match out {
            Some(path) => {
                fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
                self.outputs.push(OutputRecord {
                    path: path.to_path_buf(),
                    sha256: sha256_hex(bytes),
                    schema: schema.to_string(),
                    deterministic,
                });
                self.primary_out.get_or_insert_with(|| path.to_path_buf());
            }
            None => std::io::stdout().write_all(bytes)?,
        }
        Ok(())
    }

    fn emit_file(&mut self, path: &Path, schema: &str) -> Result<()> {
        let d = digest_file(path)?;
        self.outputs.push(OutputRecord { path: d.path, sha256: d.sha256, schema: schema.to_string(), deterministic: true });
        self.primary_out.get_or_insert_with(|| path.to_path_buf());
        Ok(())
    }

    fn finish(self, cli: &Cli, argv: &[String], started: Instant, started_unix: u64) -> Result<RunManifest> {
        let manifest = RunManifest {
            schema_version: MANIFEST_SCHEMA,
            tool: "bitflip".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: self.subcommand,
            argv: argv.to_vec(),
            config: self.config,
            seeds: self.seeds,
            threads: rayon::current_num_threads(),
            inputs: self.inputs,
            outputs: self.outputs,
            started_unix_seconds: started_unix,
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        let target = cli.manifest.clone().or_else(|| {
            self.primary_out.map(|p| {
                let mut s = p.into_os_string();
                s.push(".manifest.json");
                PathBuf::from(s)
            })
        });
        match target {
            Some(path) => fs::write(&path, text + "\n").with_context(|| format!("writing manifest {}", path.display()))?,
            None => eprintln!("{}", serde_json::to_string(&manifest)?),
        }
        Ok(manifest)
    }
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn tally_json(t: &ErrorClassTally) -> serde_json::Value {
    let s = t.shares();
    json!({
        "class1": t.class1_lt_one,
        "class2": t.class2_grey,
        "class3": t.class3_detectable,
        "class4": t.class4_nonnumeric,
        "total": t.total(),
        "threshold": t.threshold,
        "shares": { "class1": s[0], "class2": s[1], "class3": s[2], "class4": s[3] },
    })
}

fn abs_error_text(e: &AbsError) -> String {
    match e {
        AbsError::Finite(w) | AbsError::ZeroOrSubnormal(w) => w.to_string(),
        AbsError::NonNumeric => "non-numeric".into(),
    }
}

fn load_table() -> Result<ErrorLookupTable> {
    match std::env::var_os(TABLE_CACHE_ENV) {
        Some(dir) if !dir.is_empty() => {
            let dir = PathBuf::from(dir);
            fs::create_dir_all(&dir).with_context(|| format!("creating table cache {}", dir.display()))?;
            Ok(ErrorLookupTable::load_or_build(&dir)?)
        }
        _ => Ok(ErrorLookupTable::build()),
    }
}

fn parse_rhs(spec: &str) -> Result<RhsMode> {
    if spec == "ones" {
        return Ok(RhsMode::OnesSolution);
    }
    if let Some(seed) = spec.strip_prefix("random:") {
        return Ok(RhsMode::Random(seed.parse().with_context(|| format!("bad rhs seed '{seed}'"))?));
    }
    if let Some(path) = spec.strip_prefix("file:") {
        return Ok(RhsMode::File(PathBuf::from(path)));
    }
    bail!("--rhs must be ones, random:SEED or file:PATH, got '{spec}'")
}

fn mc_config(a: &McArgs) -> Result<McConfig> {
    let (lo, hi) = if a.paper_grid { (-50, 50) } else { (a.grid_min, a.grid_max) };
    if a.paper_grid {
        eprintln!("bitflip: warning: the full -50..=50 grid runs 10201 cells and can take days");
    }
    let cfg = McConfig {
        vector_length: a.n,
        samples_per_cell: a.samples,
        failure_threshold: a.threshold,
        seed: a.seed,
        ..McConfig::with_grid(lo, hi)?
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli, argv: &[String]) -> Result<()> {
    let started = Instant::now();
    let started_unix = unix_now();
    let run = match &cli.command {
        Command::Replay { path } => return replay(path),
        other => execute(other)?,
    };
    run.finish(cli, argv, started, started_unix)?;
    Ok(())
}

fn execute(command: &Command) -> Result<Run> {
    match command {
        Command::Anatomy { value, out } => {
            let mut run = Run::new("anatomy");
            let x = parse_value(value)?;
            let a = decompose(x);
            run.config = json!({ "value": value });
            let report = json!({
                "schema_version": REPORT_SCHEMA,
                "value": x,
                "bits": format!("{:016x}", x.to_bits()),
                "sign": a.sign,
                "biased_exponent": a.biased_exponent,
                "unbiased_exponent": a.unbiased_exponent(),
                "exponent_pattern": a.exponent_pattern(),
                "mantissa": format!("{:013x}", a.mantissa),
                "kind": a.kind.to_string(),
                "order_of_magnitude_bound": order_of_magnitude_bound(x).ok(),
            });
            run.emit(out.as_deref(), &json_bytes(&report)?, "anatomy-json/1", true)?;
            Ok(run)
        }
        Command::Perturb { value, format, out } => {
            let mut run = Run::new("perturb");
            let x = parse_value(value)?;
            run.config = json!({ "value": value, "format": format!("{format:?}").to_lowercase() });
            let recs = enumerate_perturbations(x)?;
            let mut buf = Vec::new();
            match format {
                TableFormat::Csv => {
                    writeln!(buf, "bit,region,original,perturbed,abs_error,delta_order")?;
                    for r in &recs {
                        writeln!(
                            buf,
                            "{},{},{:?},{:?},{},{}",
                            r.bit,
                            r.region(),
                            r.original,
                            r.perturbed,
                            abs_error_text(&r.abs_error),
                            r.delta_order
                        )?;
                    }
                }
                TableFormat::Text => {
                    for r in &recs {
                        writeln!(
                            buf,
                            "bit {:>2} {:<8} {:>24e} -> {:<24e} |err| {}",
                            r.bit.index(),
                            r.region().to_string(),
                            r.original,
                            r.perturbed,
                            abs_error_text(&r.abs_error)
                        )?;
                    }
                }
            }
            let schema = if *format == TableFormat::Csv { "perturb-csv/1" } else { "perturb-text/1" };
            run.emit(out.as_deref(), &buf, schema, true)?;
            Ok(run)
        }
        Command::DotAnalyze(d) => {
            let mut run = Run::new("dot-analyze");
            let mode = if d.exact {
                DotMode::Exact
            } else if d.interval {
                DotMode::Interval
            } else {
                d.mode
            };
            let a = read_vector(&d.a)?;
            let b = read_vector(&d.b)?;
            run.input(&d.a)?;
            run.input(&d.b)?;
            let value = dot_product(&a, &b)?;
            let (ia, ib) = (extract_interval(&a)?, extract_interval(&b)?);
            let mode_name = if mode == DotMode::Exact { "exact" } else { "interval" };
            run.config = json!({ "threshold": d.threshold, "mode": mode_name });
            let tally = match mode {
                DotMode::Exact => {
                    let recs = enumerate_dot_errors(&a, &b)?;
                    if let Some(csv) = &d.csv {
                        let mut buf = Vec::new();
                        writeln!(buf, "index,site,bit,region,class,abs_error")?;
                        for p in &recs {
                            let class = classify_value(&p.record.abs_error, d.threshold);
                            writeln!(
                                buf,
                                "{},{:?},{},{},{},{}",
                                p.index,
                                p.site,
                                p.record.bit,
                                p.record.region(),
                                class.number(),
                                abs_error_text(&p.record.abs_error)
                            )?;
                        }
                        run.emit(Some(csv), &buf, "dot-flips-csv/1", true)?;
                    }
                    if !(d.threshold.is_finite() && d.threshold >= 1.0) {
                        bail!("threshold must be finite and >= 1, got {}", d.threshold);
                    }
                    tally_exact(&recs, d.threshold)
                }
                DotMode::Interval => {
                    if d.csv.is_some() {
                        bail!("--csv is only available in exact mode");
                    }
                    classify_errors(&ia, &ib, &load_table()?, d.threshold)?
                }
            };
            let report = json!({
                "schema_version": REPORT_SCHEMA,
                "mode": mode_name,
                "n": a.len(),
                "dot_product": value,
                "interval_a": ia,
                "interval_b": ib,
                "tally": tally_json(&tally),
            });
            run.emit(d.out.as_deref(), &json_bytes(&report)?, "dot-analyze-json/1", true)?;
            Ok(run)
        }
        Command::Table(TableCommand::Build { out }) => {
            let mut run = Run::new("table build");
            run.config = json!({ "out": out });
            let t = ErrorLookupTable::build();
            t.write_to(out)?;
            run.emit_file(out, "error-table-bin/1")?;
            Ok(run)
        }
        Command::Mc(McCommand::Surface { mc, out }) => {
            let mut run = Run::new("mc surface");
            let cfg = mc_config(mc)?;
            run.config = serde_json::to_value(&cfg)?;
            run.seeds.push(cfg.seed);
            let surface = run_surface(&cfg)?;
            let mut buf = Vec::new();
            surface.write_csv(&mut buf)?;
            run.emit(out.as_deref(), &buf, "mc-surface-csv/1", true)?;
            Ok(run)
        }
        Command::Mc(McCommand::Slice { mc, mode, fixed_mag, out }) => {
            let mut run = Run::new("mc slice");
            let selector = match mode {
                SliceMode::Diagonal => SliceSelector::Diagonal,
                SliceMode::Fixed => SliceSelector::Fixed(fixed_mag.ok_or_else(|| anyhow!("--fixed-mag is required"))?),
            };
            let cfg = mc_config(mc)?;
            if let SliceSelector::Fixed(k) = selector {
                if !cfg.magnitude_grid.contains(&k) {
                    bail!("fixed magnitude {k} is outside the grid");
                }
            }
            run.config = json!({ "mc": cfg, "selector": selector });
            run.seeds.push(cfg.seed);
            let surface = run_surface(&cfg)?;
            let rows = per_bit_slice(&surface, selector)?;
            let mut buf = Vec::new();
            write_slice_csv(&rows, &mut buf)?;
            run.emit(out.as_deref(), &buf, "mc-slice-csv/1", true)?;
            Ok(run)
        }
        Command::Matrix(MatrixCommand::Poisson { grid, row_scale, out }) => {
            let mut run = Run::new("matrix poisson");
            run.config = json!({ "grid": grid, "row_scale": row_scale });
            let mut a = gen_poisson(*grid)?;
            if let Some(f) = row_scale {
                if !(f.is_finite() && *f != 0.0) {
                    bail!("--row-scale must be finite and nonzero");
                }
                a = a.scale_rows(&vec![*f; a.n_rows()])?;
            }
            write_matrix_market(&a, out)?;
            run.emit_file(out, "matrix-market")?;
            Ok(run)
        }
        Command::Matrix(MatrixCommand::Norms { input, out }) => {
            let mut run = Run::new("matrix norms");
            run.input(input)?;
            let a = read_matrix_market(input)?;
            let n = norms(&a)?;
            run.config = json!({ "in": input });
            let report = json!({
                "schema_version": REPORT_SCHEMA,
                "rows": a.n_rows(),
                "cols": a.n_cols(),
                "nnz": a.nnz(),
                "explicit_zeros": a.explicit_zeros(),
                "inf_norm": n.inf_norm,
                "two_norm_estimate": n.two_norm_estimate,
                "frobenius_norm": n.frobenius_norm,
                "power_iterations": n.power_iterations,
                "power_converged": n.power_converged,
            });
            run.emit(out.as_deref(), &json_bytes(&report)?, "matrix-norms-json/1", true)?;
            Ok(run)
        }
        Command::Matrix(MatrixCommand::Equilibrate { input, out, scales }) => {
            let mut run = Run::new("matrix equilibrate");
            run.input(input)?;
            run.config = json!({ "in": input, "out": out, "scales": scales });
            let a = read_matrix_market(input)?;
            let (s, sc) = equilibrate(&a)?;
            write_matrix_market(&s, out)?;
            run.emit_file(out, "matrix-market")?;
            if let Some(path) = scales {
                let doc = json!({ "schema_version": REPORT_SCHEMA, "row_scale": sc.row_scale, "col_scale": sc.col_scale });
                run.emit(Some(path), &json_bytes(&doc)?, "equilibration-scales-json/1", true)?;
            }
            Ok(run)
        }
        Command::Gmres(GmresCommand::Analyze(g)) => {
            let mut run = Run::new("gmres analyze");
            let rhs = parse_rhs(&g.rhs)?;
            run.input(&g.matrix)?;
            match &rhs {
                RhsMode::File(p) => run.input(p)?,
                RhsMode::Random(seed) => run.seeds.push(*seed),
                RhsMode::OnesSolution => {}
            }
            let cfg = GmresConfig {
                restart: g.restart,
                max_total_iterations: g.max_iters,
                rtol: g.rtol,
                rhs,
                instrument_norm: !g.no_norm_dot,
                log_intervals: g.log_intervals,
                check_orthogonality: false,
            };
            cfg.validate()?;
            run.config = json!({ "matrix": g.matrix, "equilibrate": g.equilibrate, "gmres": cfg });
            let a = read_matrix_market(&g.matrix)?;
            let t0 = Instant::now();
            let table = load_table()?;
            let table_seconds = t0.elapsed().as_secs_f64();
            let t1 = Instant::now();
            let result = analyze(&a, &cfg, g.equilibrate, &table)?;
            let solve_seconds = t1.elapsed().as_secs_f64();
            let rep = &result.report;
            let tally = rep.tally.as_ref().expect("instrumented run has a tally");
            let ones_error = matches!(cfg.rhs, RhsMode::OnesSolution)
                .then(|| result.solution.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max));
            let report = json!({
                "schema_version": REPORT_SCHEMA,
                "config": run.config,
                "matrix": { "rows": a.n_rows(), "nnz": a.nnz() },
                "norms": result.norms,
                "threshold": result.threshold,
                "converged": rep.converged,
                "stop_reason": rep.stop_reason,
                "iterations": rep.iterations,
                "restarts": rep.restarts,
                "initial_residual": rep.initial_residual,
                "residual_history": rep.residual_history,
                "instrumented_dot_products": rep.instrumented_dots,
                "tally": tally_json(tally),
                "max_abs_error_vs_ones": ones_error,
                "interval_log": rep.interval_log,
                "timing": { "table_seconds": table_seconds, "solve_seconds": solve_seconds },
            });
            run.emit(g.out.as_deref(), &json_bytes(&report)?, "gmres-report-json/1", false)?;
            Ok(run)
        }
        Command::Replay { .. } => unreachable!("handled in run"),
    }
}

fn replay(path: &Path) -> Result<()> {
    use clap::Parser;
    let m = read_manifest(path)?;
    let again = Cli::try_parse_from(&m.argv).map_err(|e| anyhow!("recorded argv no longer parses: {}", e.kind()))?;
    if matches!(again.command, Command::Replay { .. }) {
        bail!("manifest records a replay");
    }
    for input in &m.inputs {
        let now = digest_file(&input.path)?;
        if now.sha256 != input.sha256 {
            bail!("input {} changed since the recorded run", input.path.display());
        }
    }
    run(&again, &m.argv)?;
    let mut mismatched = Vec::new();
    for o in m.outputs.iter().filter(|o| o.deterministic) {
        if digest_file(&o.path)?.sha256 != o.sha256 {
            mismatched.push(o.path.display().to_string());
        }
    }
    if mismatched.is_empty() {
        eprintln!("bitflip: replay reproduced {} output(s)", m.outputs.iter().filter(|o| o.deterministic).count());
        Ok(())
    } else {
        bail!("replay outputs differ: {}", mismatched.join(", "))
    }
}
