use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use airy_edge::airy::{airy_eval, edge_density};
use airy_edge::convergence::{loglog_slope, strictly_decreasing, sup_errors};
use airy_edge::fredholm::{gap_finite_with, limit_kernel_blocks, tw_limit_with, tw_table, GapSettings};
use airy_edge::montecarlo::{gap_curve, ks_statistic, sample, split_rhat, RNG_NAME};
use airy_edge::orthopoly::compute_recurrence;
use airy_edge::{Beta, EdgeScaling, EdgeSystem};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;

type Outcome = Result<(), CliError>;

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

struct Run<'a> {
    cfg: &'a RunConfig,
    command: &'static str,
    started: Instant,
    outputs: Vec<String>,
}

impl<'a> Run<'a> {
    fn start(cfg: &'a RunConfig, command: &'static str) -> Result<Self, CliError> {
        std::fs::create_dir_all(&cfg.out)?;
        Ok(Run { cfg, command, started: Instant::now(), outputs: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.cfg.out.join(name)
    }

    fn csv(&mut self, name: &str, header: &[&str]) -> Result<csv::Writer<File>, CliError> {
        let mut w = csv::Writer::from_path(self.path(name))?;
        w.write_record(header)?;
        Ok(w)
    }

    fn json(&mut self, name: &str, value: &Value) -> Outcome {
        let f = BufWriter::new(File::create(self.path(name))?);
        serde_json::to_writer_pretty(f, value)?;
        Ok(())
    }

    /// `<command>_manifest.json`; only the `wall_clock` field varies between reruns.
    fn finish(mut self, details: Value) -> Outcome {
        let unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let manifest = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "config": self.cfg.echo(),
            "seed": self.cfg.seed,
            "rng": RNG_NAME,
            "outputs": self.outputs,
            "details": details,
            "wall_clock": { "elapsed_s": self.started.elapsed().as_secs_f64(), "finished_unix": unix },
        });
        let name = format!("{}_manifest.json", self.command);
        let f = BufWriter::new(File::create(self.cfg.out.join(&name))?);
        serde_json::to_writer_pretty(f, &manifest)?;
        self.outputs.push(name);
        Ok(())
    }
}

fn gap_settings(cfg: &RunConfig) -> GapSettings {
    GapSettings::with_order(cfg.order)
}

pub fn recurrence(cfg: &RunConfig) -> Outcome {
    let mut run = Run::start(cfg, "recurrence")?;
    let band = cfg.potential.band();
    let jmax = cfg.jmax.or(cfg.n.map(|n| n + 2 * band + 4)).unwrap_or(64);
    let table = compute_recurrence(&cfg.potential, jmax, 1e-12)?;
    table.write_csv(BufWriter::new(File::create(run.path("recurrence.csv"))?))?;
    let residual = table.orthonormality_residual;
    let string = table.string_equation_residual();
    println!("rows {}", table.len());
    println!("orthonormality residual {residual:.3e} (tol {:.1e})", cfg.tol);
    println!("string equation residual {string:.3e}");
    run.finish(json!({
        "rows": table.len(),
        "orthonormality_residual": residual,
        "string_equation_residual": string,
        "norm0": table.norm0,
        "domain": table.domain,
    }))?;
    if residual > cfg.tol {
        return Err(CliError::Numerical(format!("orthonormality residual {residual:.3e} > {:.1e}", cfg.tol)));
    }
    Ok(())
}

fn sizes(cfg: &RunConfig) -> Result<Vec<usize>, CliError> {
    let mut ns: Vec<usize> = cfg.n.into_iter().chain(cfg.n_ladder.iter().copied()).collect();
    ns.dedup();
    if ns.is_empty() {
        return Err(CliError::Usage("give --N or --N-ladder".into()));
    }
    Ok(ns)
}

pub fn scaling(cfg: &RunConfig) -> Outcome {
    let mut run = Run::start(cfg, "scaling")?;
    let rows: Vec<EdgeScaling> =
        sizes(cfg)?.into_iter().map(|n| EdgeScaling::new(&cfg.potential, n)).collect::<Result<_, _>>()?;
    for s in &rows {
        println!("N={} cN={:.12} dN={:.12} alphaN={:.12} lambdaN={:.12}", s.n, s.c_n, s.d_n, s.alpha_n, s.lambda_n);
    }
    run.json("scaling.json", &serde_json::to_value(&rows)?)?;
    run.finish(json!({ "sizes": rows.iter().map(|s| s.n).collect::<Vec<_>>() }))
}

fn entry_names(beta: Beta) -> &'static [&'static str] {
    match beta {
        Beta::Unitary => &["entry11"],
        _ => &["entry11", "entry12", "entry21", "entry22"],
    }
}

pub fn kernel(cfg: &RunConfig) -> Outcome {
    let n = cfg.require_n()?;
    let mut run = Run::start(cfg, "kernel")?;
    let pts = cfg.grid_or(-3.0, 4.0, 0.5).points();
    let system = EdgeSystem::new(&cfg.potential, n)?;
    let finite = system.scaled_kernel_blocks(cfg.beta, &pts)?;
    let limit = limit_kernel_blocks(cfg.beta, &pts);
    let mut header = vec!["xi", "eta"];
    header.extend(entry_names(cfg.beta));
    let width = entry_names(cfg.beta).len();
    let mut worst: f64 = 0.0;
    for (name, k) in [("kernel.csv", &finite), ("kernel_limit.csv", &limit)] {
        let mut w = run.csv(name, &header)?;
        for (i, &xi) in pts.iter().enumerate() {
            for (j, &eta) in pts.iter().enumerate() {
                let vals = [k.k11[(i, j)], k.k12[(i, j)], k.k21[(i, j)], k.k22[(i, j)]];
                let mut row = vec![num(xi), num(eta)];
                row.extend(vals[..width].iter().map(|&v| num(v)));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
    }
    for (a, b) in [(&finite.k11, &limit.k11), (&finite.k12, &limit.k12), (&finite.k21, &limit.k21), (&finite.k22, &limit.k22)]
        .into_iter()
        .take(width)
    {
        worst = worst.max((a - b).amax());
    }
    println!("N={n} β={} points {} sup |scaled − limit| {worst:.3e}", cfg.beta, pts.len());
    run.finish(json!({ "N": n, "points": pts.len(), "sup_error": worst }))
}

pub fn converge(cfg: &RunConfig) -> Outcome {
    if cfg.n_ladder.is_empty() {
        return Err(CliError::Usage("converge needs a nonempty --N-ladder".into()));
    }
    let mut run = Run::start(cfg, "converge")?;
    let grid = match cfg.beta {
        Beta::Unitary => cfg.grid_or(-3.0, 4.0, 0.5),
        _ => cfg.grid_or(-2.0, 4.0, 0.5),
    };
    let pts = grid.points();
    let mut all = Vec::new();
    for &n in &cfg.n_ladder {
        let system = EdgeSystem::new(&cfg.potential, n)?;
        all.push(sup_errors(&system, cfg.beta, &pts)?);
    }
    let mut w = run.csv("converge.csv", &["N", "beta", "entry", "sup_error"])?;
    let names = ["11", "12", "21", "22"];
    let width = entry_names(cfg.beta).len();
    let mut entries = serde_json::Map::new();
    for (k, name) in names.iter().enumerate().take(width) {
        let errs: Vec<f64> = all.iter().map(|e| e.sup[k]).collect();
        for (e, &v) in all.iter().zip(&errs) {
            w.write_record([e.n.to_string(), cfg.beta.to_string(), name.to_string(), num(v)])?;
        }
        let xs: Vec<f64> = cfg.n_ladder.iter().map(|&n| n as f64).collect();
        let exponent = loglog_slope(&xs, &errs).ok();
        let decreasing = strictly_decreasing(&errs);
        println!(
            "entry {name}: errors {} exponent {} decreasing {decreasing}",
            errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(" "),
            exponent.map_or("n/a".into(), |s| format!("{s:.3}"))
        );
        entries.insert(
            name.to_string(),
            json!({ "errors": errs, "exponent": exponent, "strictly_decreasing": decreasing }),
        );
    }
    w.flush()?;
    let summary = json!({
        "beta": cfg.beta,
        "potential": cfg.potential,
        "N_ladder": cfg.n_ladder,
        "grid": { "L0": grid.l0, "L1": grid.l1, "step": grid.step },
        "entries": entries,
    });
    run.json("converge_summary.json", &summary)?;
    run.finish(json!({ "points": pts.len() }))
}

pub fn gap(cfg: &RunConfig) -> Outcome {
    let n = cfg.require_n()?;
    let mut run = Run::start(cfg, "gap")?;
    let pts = cfg.grid_or(-4.0, 4.0, 0.5).points();
    let system = EdgeSystem::new(&cfg.potential, n)?;
    let settings = gap_settings(cfg);
    let mut w = run.csv("gap.csv", &["L0", "finite_N_prob", "tw_prob", "diff"])?;
    let mut worst: f64 = 0.0;
    for &l0 in &pts {
        let f = gap_finite_with(&system, cfg.beta, l0, &settings)?;
        let t = tw_limit_with(cfg.beta, l0, &settings)?;
        worst = worst.max((f - t).abs());
        w.write_record([num(l0), num(f), num(t), num(f - t)])?;
    }
    w.flush()?;
    println!("N={n} β={} max |finite − limit| {worst:.3e}", cfg.beta);
    run.finish(json!({ "N": n, "max_abs_diff": worst }))
}

pub fn tw(cfg: &RunConfig) -> Outcome {
    let mut run = Run::start(cfg, "tw")?;
    let ladder = match cfg.grid {
        Some(g) => g.points(),
        None => vec![-4.0, -2.0, 0.0, 2.0],
    };
    let rows = tw_table(cfg.beta, &ladder, &gap_settings(cfg))?;
    let mut w = run.csv("tw.csv", &["beta", "L0", "value", "order", "truncation_T", "est_error"])?;
    for r in &rows {
        w.write_record([
            r.beta.to_string(),
            num(r.l0),
            num(r.value),
            r.order.to_string(),
            num(r.truncation_t),
            num(r.est_error),
        ])?;
        println!("F{}({:+.3}) = {:.12} (est. error {:.1e})", r.beta, r.l0, r.value, r.est_error);
    }
    w.flush()?;
    let worst = rows.iter().map(|r| r.est_error).fold(0.0, f64::max);
    run.finish(json!({ "max_est_error": worst }))
}

pub fn sample_cmd(cfg: &RunConfig) -> Outcome {
    let n = cfg.require_n()?;
    let mut run = Run::start(cfg, "sample")?;
    let e = sample(&cfg.potential, cfg.beta, n, cfg.count, cfg.seed)?;
    e.write_csv(BufWriter::new(File::create(run.path("samples.csv"))?))?;
    let system = EdgeSystem::new(&cfg.potential, n)?;
    let curve = gap_curve(&system, cfg.beta, -8.0, 6.0, 0.05, &gap_settings(cfg))?;
    let scaled = e.scaled_largest(&system.scaling);
    let ks = ks_statistic(&scaled, |x| curve.eval(x));
    let rhat = split_rhat(&e.chains_of(&e.largest()));
    let mut sorted = scaled.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    println!(
        "samples {} acceptance {:.3} KS {ks:.4} split R-hat {rhat:.4} median {median:.4} (model {:.4})",
        e.samples.len(),
        e.acceptance_rate,
        curve.quantile(0.5)
    );
    run.finish(json!({
        "sampler": e.manifest(),
        "diagnostics": {
            "ks_distance": ks,
            "split_rhat": rhat,
            "scaled_median": median,
            "model_median": curve.quantile(0.5),
            "scaled_mean": scaled.iter().sum::<f64>() / scaled.len() as f64,
            "model_mean": curve.mean(),
        },
    }))
}

struct Check {
    name: String,
    tolerance: String,
    measured: String,
    pass: bool,
}

fn load(dir: &Path, name: &str, producer: &str) -> Result<String, CliError> {
    let path = dir.join(name);
    std::fs::read_to_string(&path)
        .map_err(|_| CliError::Missing(format!("{} (produced by `airy-edge {producer}`)", path.display())))
}

fn csv_rows(text: &str) -> Result<Vec<Vec<String>>, CliError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(str::to_string).collect());
    }
    Ok(rows)
}

fn parse_f64(s: &str) -> Result<f64, CliError> {
    s.parse().map_err(|_| CliError::Usage(format!("not a number in artifact: `{s}`")))
}

pub fn report(cfg: &RunConfig) -> Outcome {
    let dir = cfg.out.clone();
    let converge: Value = serde_json::from_str(&load(&dir, "converge_summary.json", "converge")?)?;
    let gap = csv_rows(&load(&dir, "gap.csv", "gap")?)?;
    let tw = csv_rows(&load(&dir, "tw.csv", "tw")?)?;
    let sample: Value = serde_json::from_str(&load(&dir, "sample_manifest.json", "sample")?)?;
    let mut run = Run::start(cfg, "report")?;
    let mut checks = Vec::new();

    let gammas = [(Beta::Unitary, 0.066987484), (Beta::Orthogonal, 0.185330168), (Beta::Symplectic, 0.001954035)];
    let dens = gammas.iter().map(|&(b, g)| (edge_density(b, 0.0) - g).abs()).fold(0.0, f64::max);
    checks.push(Check {
        name: "edge density constants at 0".into(),
        tolerance: "1e-8".into(),
        measured: format!("{dens:.2e}"),
        pass: dens < 1e-8,
    });
    let zero = airy_eval(0.0)?;
    let halves = (zero.tail_integral - 1.0 / 3.0).abs().max((zero.head_integral() - 2.0 / 3.0).abs());
    checks.push(Check {
        name: "Airy half-line integrals 1/3, 2/3".into(),
        tolerance: "1e-10".into(),
        measured: format!("{halves:.2e}"),
        pass: halves < 1e-10,
    });

    let beta = converge["beta"].as_u64().unwrap_or(2);
    if let Some(entries) = converge["entries"].as_object() {
        for (name, e) in entries {
            if beta == 2 {
                let slope = e["exponent"].as_f64();
                checks.push(Check {
                    name: format!("β=2 fitted decay exponent, entry {name}"),
                    tolerance: "[-0.9, -0.45]".into(),
                    measured: slope.map_or("n/a".into(), |s| format!("{s:.3}")),
                    pass: slope.is_some_and(|s| (-0.9..=-0.45).contains(&s)),
                });
            } else {
                let dec = e["strictly_decreasing"].as_bool().unwrap_or(false);
                checks.push(Check {
                    name: format!("β={beta} sup error decreasing in N, entry {name}"),
                    tolerance: "strict".into(),
                    measured: format!("{}", e["errors"]),
                    pass: dec,
                });
            }
        }
    }

    let last = gap.last().ok_or_else(|| CliError::Missing("gap.csv has no rows".into()))?;
    let far = parse_f64(&last[1])?.min(parse_f64(&last[2])?);
    checks.push(Check {
        name: format!("far-right gap probabilities at L0={}", last[0]),
        tolerance: ">= 0.999".into(),
        measured: format!("{far:.6}"),
        pass: far >= 0.999,
    });
    let mut est: f64 = 0.0;
    for row in &tw {
        est = est.max(parse_f64(&row[5])?);
    }
    checks.push(Check {
        name: "limit distribution order-doubling error".into(),
        tolerance: "1e-8".into(),
        measured: format!("{est:.2e}"),
        pass: est < 1e-8,
    });

    let diag = &sample["details"]["diagnostics"];
    let ks = diag["ks_distance"].as_f64().unwrap_or(f64::NAN);
    checks.push(Check {
        name: "KS distance, sampled λ₁ vs finite-N gap probability".into(),
        tolerance: "0.03".into(),
        measured: format!("{ks:.4}"),
        pass: ks < 0.03,
    });
    let rhat = diag["split_rhat"].as_f64().unwrap_or(f64::NAN);
    checks.push(Check {
        name: "split-chain R-hat of λ₁".into(),
        tolerance: "1.05".into(),
        measured: format!("{rhat:.4}"),
        pass: rhat < 1.05,
    });
    let acc = sample["details"]["sampler"]["acceptance_rate"].as_f64().unwrap_or(f64::NAN);
    checks.push(Check {
        name: "Metropolis acceptance rate".into(),
        tolerance: "(0.05, 0.8)".into(),
        measured: format!("{acc:.3}"),
        pass: acc > 0.05 && acc < 0.8,
    });

    let mut md = String::from("# Edge universality run report\n\n");
    md.push_str(&format!("Artifacts read from `{}`.\n\n", dir.display()));
    md.push_str("| check | tolerance | measured | result |\n|---|---|---|---|\n");
    for c in &checks {
        md.push_str(&format!(
            "| {} | {} | {} | {} |\n",
            c.name,
            c.tolerance,
            c.measured,
            if c.pass { "PASS" } else { "FAIL" }
        ));
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    md.push_str(&format!("\n{}/{} checks passed.\n", checks.len() - failed.len(), checks.len()));
    std::fs::write(run.path("report.md"), &md)?;
    print!("{md}");
    run.finish(json!({ "checks": checks.len(), "failed": failed }))?;
    if !failed.is_empty() {
        return Err(CliError::Numerical(failed.join("; ")));
    }
    Ok(())
}
