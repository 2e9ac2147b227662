//! Subcommand implementations. Each writes its files into `--out` and
//! prints a short summary on stdout.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use twoprice::certificates::{
    auto_certificate, build_dual_alpha1, build_dual_alpha_inf, build_dual_static, DualCertificate, DualProgram,
};
use twoprice::experiments::{
    generate_small_stock, result_row, run_method, run_scale, slopes_by_policy, ResultRow, SMALL_STOCK_METHODS,
};
use twoprice::policies::{fluid_policy, optimize_static, optimize_stock_dependent, OptimizationReport, Policy};
use twoprice::simulator::{insensitivity_test, SimConfig};
use twoprice::{erlang_stockout, fluid_value, steady_state, ProblemInstance, StockDependentPolicy};

use crate::config::{
    load, parse_methods, CertificateSpec, CertifyConfig, PolicySpec, ScaleConfig, SimulateConfig, SmallStockConfig,
    SolveConfig,
};
use crate::{CliError, CommonArgs};

/// Relative tolerance of the row invariants.
const ROW_TOL: f64 = 1e-9;

fn out_dir(args: &CommonArgs) -> Result<&Path, CliError> {
    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", args.out.display())))?;
    Ok(&args.out)
}

fn timed<T>(timing: bool, f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, if timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 })
}

/// Rows must satisfy `loss = FLU - reward` and `ratio <= 1`.
fn check_rows(rows: &[ResultRow]) -> Result<(), CliError> {
    for r in rows {
        let flu = if r.ratio > 0.0 { r.reward / r.ratio } else { r.reward + r.loss };
        let scale = flu.abs().max(1.0);
        if (r.loss - (flu - r.reward)).abs() > ROW_TOL * scale || !(0.0..=1.0 + ROW_TOL).contains(&r.ratio) {
            return Err(CliError::Internal(format!(
                "row c={} policy={} breaks an invariant: reward {} loss {} ratio {}",
                r.c, r.policy, r.reward, r.loss, r.ratio
            )));
        }
    }
    Ok(())
}

fn write_rows(path: &Path, rows: &[ResultRow]) -> Result<(), CliError> {
    check_rows(rows)?;
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn check_result(failures: Vec<String>) -> Result<(), CliError> {
    if failures.is_empty() {
        Ok(())
    } else {
        for f in &failures {
            eprintln!("FAIL {f}");
        }
        Err(CliError::Check(format!("{} expectation(s) not met", failures.len())))
    }
}

fn resolve_policy(spec: &PolicySpec, inst: &ProblemInstance, path: &str) -> Result<StockDependentPolicy, CliError> {
    let bad = |e: &dyn std::fmt::Display| CliError::Config(format!("{path}: {e}"));
    match spec {
        PolicySpec::Tagged(p) => p.expand(inst.c).map_err(|e| bad(&e)),
        PolicySpec::Vector(x) => {
            if x.len() != inst.c {
                return Err(bad(&format!("admission vector has {} entries, c = {}", x.len(), inst.c)));
            }
            StockDependentPolicy::new(x.clone()).map_err(|e| bad(&e))
        }
        PolicySpec::Named(n) if n == "fluid" => Ok(fluid_policy(inst)),
        PolicySpec::Named(n) => Err(bad(&format!("unknown policy name '{n}'"))),
    }
}

fn policy_label(spec: &PolicySpec) -> String {
    match spec {
        PolicySpec::Tagged(Policy::Static { .. }) => "static".into(),
        PolicySpec::Tagged(Policy::TwoPrice(_)) => "two_price".into(),
        PolicySpec::Tagged(Policy::StockDependent(_)) | PolicySpec::Vector(_) => "stock_dependent".into(),
        PolicySpec::Named(n) => n.clone(),
    }
}

#[derive(Serialize)]
struct SolveReport<'a> {
    c: usize,
    lambda: f64,
    d: f64,
    xstar: f64,
    flu: f64,
    /// Erlang blocking probability under the fluid admission probability.
    fluid_stockout: f64,
    reports: &'a [OptimizationReport],
    rows: &'a [ResultRow],
}

pub fn solve(args: &CommonArgs) -> Result<(), CliError> {
    let cfg: SolveConfig = load(&args.config)?;
    let seed = args.seed.unwrap_or(cfg.seed);
    let inst = cfg.instance.build("instance")?;
    let methods = parse_methods(&cfg.policies, "policies")?;
    let mut evaluated = Vec::with_capacity(cfg.evaluate.len());
    for (name, spec) in &cfg.evaluate {
        evaluated.push((name, resolve_policy(spec, &inst, &format!("evaluate.{name}"))?));
    }
    let dir = out_dir(args)?;
    let timing = !args.no_timing;
    let flu = fluid_value(&inst);

    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for m in methods {
        let (report, ms) = timed(timing, || run_method(&inst, m, seed));
        let report = report?;
        rows.push(result_row(&inst, &report, "solve", seed, ms));
        reports.push(report);
    }
    for (name, policy) in evaluated {
        let (ss, ms) = timed(timing, || steady_state(&inst, &policy));
        let ss = ss?;
        rows.push(ResultRow {
            c: inst.c,
            lambda: inst.lambda,
            d: inst.d,
            policy: name.clone(),
            reward: ss.reward,
            loss: flu - ss.reward,
            ratio: if flu > 0.0 { ss.reward / flu } else { 1.0 },
            slope_group: "evaluate".into(),
            seed,
            wall_ms: ms,
        });
    }
    write_rows(&dir.join("results.csv"), &rows)?;
    let report = SolveReport {
        c: inst.c,
        lambda: inst.lambda,
        d: inst.d,
        xstar: inst.xstar(),
        flu,
        fluid_stockout: erlang_stockout(inst.c, inst.lambda * inst.d * inst.fluid_admission()),
        reports: &reports,
        rows: &rows,
    };
    write_json(&dir.join("report.json"), &report)?;

    println!("c = {}, lambda = {}, d = {}, x* = {:.6}", inst.c, inst.lambda, inst.d, inst.xstar());
    println!("{:<18} {:>16} {:>14} {:>10}", "policy", "reward", "loss", "ratio");
    println!("{:<18} {:>16.6} {:>14} {:>10}", "FLU", flu, "", "");
    for r in &rows {
        println!("{:<18} {:>16.6} {:>14.6} {:>10.6}", r.policy, r.reward, r.loss, r.ratio);
    }

    if args.check {
        let mut failures = Vec::new();
        for (key, e) in &cfg.expect {
            let got = if key == "flu" {
                Some(flu)
            } else {
                rows.iter().find(|r| &r.policy == key).map(|r| r.reward)
            };
            match got {
                Some(v) if e.holds(v) => println!("PASS {key}: {v:.6} (expected {} +- {})", e.value, e.tol),
                Some(v) => failures.push(format!("{key}: {v:.6}, expected {} +- {}", e.value, e.tol)),
                None => failures.push(format!("{key}: no such policy in the run")),
            }
        }
        check_result(failures)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SlopeRow<'a> {
    slope_group: &'a str,
    policy: &'a str,
    slope: f64,
    intercept: f64,
    r2: f64,
    points: usize,
}

pub fn scale(args: &CommonArgs) -> Result<(), CliError> {
    let cfg: ScaleConfig = load(&args.config)?;
    cfg.validate()?;
    let seed = args.seed.unwrap_or(cfg.seed);
    let methods = parse_methods(&cfg.policies, "policies")?;
    let mut bases = Vec::with_capacity(cfg.family.len());
    for fam in &cfg.family {
        bases.push(fam.instance().build(&format!("family.{}", fam.name))?);
        parse_methods(&fam.expect.keys().cloned().collect::<Vec<_>>(), &format!("family.{}.expect", fam.name))?;
    }
    let dir = out_dir(args)?;

    let mut rows = Vec::new();
    for (fam, base) in cfg.family.iter().zip(&bases) {
        log::info!("family {}", fam.name);
        rows.extend(run_scale(base, &cfg.scales, &methods, &fam.name, seed, !args.no_timing)?);
    }
    write_rows(&dir.join("results.csv"), &rows)?;

    let slopes = slopes_by_policy(&rows);
    let mut w = csv::Writer::from_path(dir.join("slopes.csv"))?;
    println!("{:<14} {:<16} {:>8} {:>8}", "family", "policy", "slope", "r2");
    for ((group, policy), fit) in &slopes {
        match fit {
            Ok(f) => {
                w.serialize(SlopeRow {
                    slope_group: group,
                    policy,
                    slope: f.slope,
                    intercept: f.intercept,
                    r2: f.r2,
                    points: f.points,
                })?;
                println!("{group:<14} {policy:<16} {:>8.4} {:>8.4}", f.slope, f.r2);
            }
            Err(e) => log::warn!("{group}/{policy}: no slope ({e})"),
        }
    }
    w.flush()?;
    fs::write(dir.join("plot.gp"), gnuplot_script(&rows))?;

    if args.check {
        let mut failures = Vec::new();
        for fam in &cfg.family {
            for (policy, [lo, hi]) in &fam.expect {
                let label = twoprice::policies::Method::from_label(policy).map(|m| m.label()).unwrap_or(policy);
                match slopes.get(&(fam.name.clone(), label.to_string())) {
                    Some(Ok(f)) if (*lo..=*hi).contains(&f.slope) => {
                        println!("PASS {}/{label}: slope {:.4} in [{lo}, {hi}]", fam.name, f.slope)
                    }
                    Some(Ok(f)) => failures.push(format!("{}/{label}: slope {:.4} not in [{lo}, {hi}]", fam.name, f.slope)),
                    Some(Err(e)) => failures.push(format!("{}/{label}: {e}", fam.name)),
                    None => failures.push(format!("{}/{label}: policy was not run", fam.name)),
                }
            }
        }
        check_result(failures)?;
    }
    Ok(())
}

/// Log-log loss plot with the data inlined as named blocks.
fn gnuplot_script(rows: &[ResultRow]) -> String {
    let mut series: BTreeMap<(&str, &str), Vec<(usize, f64)>> = BTreeMap::new();
    for r in rows {
        series.entry((&r.slope_group, &r.policy)).or_default().push((r.c, r.loss));
    }
    let mut s = String::from("set logscale xy\nset xlabel 'c'\nset ylabel 'loss'\nset key left top\n");
    let mut plots = Vec::new();
    for (k, ((group, policy), pts)) in series.iter().enumerate() {
        let _ = writeln!(s, "$s{k} << EOD");
        for (c, loss) in pts {
            let _ = writeln!(s, "{c} {loss}");
        }
        s.push_str("EOD\n");
        plots.push(format!("$s{k} using 1:2 with linespoints title '{group} {policy}'"));
    }
    if !plots.is_empty() {
        let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    }
    s
}

#[derive(Serialize)]
struct MeanRow<'a> {
    family: &'a str,
    c: usize,
    policy: &'a str,
    mean_ratio: f64,
}

#[derive(Serialize)]
struct FamilySummary {
    family: String,
    instances: usize,
    order_violations: usize,
    max_order_violation: f64,
}

pub fn small_stock(args: &CommonArgs) -> Result<(), CliError> {
    let cfg: SmallStockConfig = load(&args.config)?;
    if cfg.families.is_empty() || cfg.instances == 0 {
        return Err(CliError::Config("families and instances must be non-empty".into()));
    }
    if cfg.c.is_empty() || cfg.c.contains(&0) {
        return Err(CliError::Config("c: capacities must be positive".into()));
    }
    let seed = args.seed.unwrap_or(cfg.seed);
    let dir = out_dir(args)?;

    let mut rows = Vec::new();
    let mut means = Vec::new();
    let mut summaries = Vec::new();
    let mut failures = Vec::new();
    for (k, family) in cfg.families.iter().enumerate() {
        let gs = generate_small_stock(*family, cfg.instances, seed.wrapping_add(k as u64))?;
        let s = twoprice::experiments::run_small_stock(*family, &gs, &cfg.c, seed, !args.no_timing)?;
        println!(
            "{}: {} order violation(s), worst {:.3e}",
            family.label(),
            s.order_violations,
            s.max_order_violation
        );
        if s.max_order_violation > ROW_TOL {
            failures.push(format!("{}: ordering violated by {:.3e}", family.label(), s.max_order_violation));
        }
        for &c in &cfg.c {
            let mut line = format!("  c = {c:>4}:");
            for m in SMALL_STOCK_METHODS {
                let mean = s.mean_ratio[&(c, m.label().to_string())];
                let _ = write!(line, " {}={mean:.4}", m.label());
                means.push((family.label(), c, m.label(), mean));
            }
            println!("{line}");
        }
        summaries.push(FamilySummary {
            family: family.label().into(),
            instances: cfg.instances,
            order_violations: s.order_violations,
            max_order_violation: s.max_order_violation,
        });
        rows.extend(s.rows);
    }
    write_rows(&dir.join("results.csv"), &rows)?;
    let mut w = csv::Writer::from_path(dir.join("means.csv"))?;
    for &(family, c, policy, mean_ratio) in &means {
        w.serialize(MeanRow {
            family,
            c,
            policy,
            mean_ratio,
        })?;
    }
    w.flush()?;
    write_json(&dir.join("summary.json"), &summaries)?;

    if args.check {
        for (family, per_c) in &cfg.expect {
            for (c, per_policy) in per_c {
                for (policy, e) in per_policy {
                    let label = twoprice::policies::Method::from_label(policy).map(|m| m.label()).unwrap_or(policy);
                    let found = c.parse::<usize>().ok().and_then(|c| {
                        means
                            .iter()
                            .find(|m| m.0 == family.as_str() && m.1 == c && m.2 == label)
                            .map(|m| m.3)
                    });
                    match found {
                        Some(v) if e.holds(v) => {
                            println!("PASS {family}/c={c}/{label}: {v:.4} (expected {} +- {})", e.value, e.tol)
                        }
                        Some(v) => failures.push(format!("{family}/c={c}/{label}: {v:.4}, expected {} +- {}", e.value, e.tol)),
                        None => failures.push(format!("{family}/c={c}/{label}: not in the run")),
                    }
                }
            }
        }
        check_result(failures)?;
    }
    Ok(())
}

/// One audited certificate in `certificates.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct CertEntry {
    pub source: String,
    pub certificate: Option<DualCertificate>,
    /// Optimum of the policy class the certificate bounds.
    pub optimum_reward: Option<f64>,
    /// `zeta` minus that optimum; must not be negative.
    pub optimum_margin: Option<f64>,
    pub pass: bool,
    pub error: Option<String>,
}

fn program_name(p: &DualProgram) -> &'static str {
    match p {
        DualProgram::Alpha1 { .. } => "alpha1",
        DualProgram::AlphaInf { .. } => "alpha_inf",
        DualProgram::Static { .. } => "static",
    }
}

fn failed_entry(source: String, error: String) -> CertEntry {
    CertEntry {
        source,
        certificate: None,
        optimum_reward: None,
        optimum_margin: None,
        pass: false,
        error: Some(error),
    }
}

fn replay(path: &Path) -> Vec<CertEntry> {
    let source = format!("replay:{}", path.display());
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return vec![failed_entry(source, e.to_string())],
    };
    // a bare certificate, or the array this command writes
    let parsed = if text.trim_start().starts_with('[') {
        serde_json::from_str::<Vec<CertEntry>>(&text).map(|v| v.into_iter().filter_map(|e| e.certificate).collect())
    } else {
        serde_json::from_str::<DualCertificate>(&text).map(|c| vec![c])
    };
    let certs: Vec<DualCertificate> = match parsed {
        Ok(c) => c,
        Err(e) => return vec![failed_entry(source, format!("unreadable certificate: {e}"))],
    };
    if certs.is_empty() {
        return vec![failed_entry(source, "no certificates in file".into())];
    }
    certs
        .into_iter()
        .map(|mut cert| {
            cert.residuals = None;
            match cert.verify().map(|r| r.pass) {
                Ok(pass) => CertEntry {
                    source: source.clone(),
                    certificate: Some(cert),
                    optimum_reward: None,
                    optimum_margin: None,
                    pass,
                    error: None,
                },
                Err(e) => failed_entry(source.clone(), e.to_string()),
            }
        })
        .collect()
}

pub fn certify(args: &CommonArgs) -> Result<(), CliError> {
    let cfg: CertifyConfig = load(&args.config)?;
    if !cfg.certificates.is_empty() && cfg.instance.is_none() {
        return Err(CliError::Config("certificates: an [instance] section is required".into()));
    }
    if cfg.certificates.is_empty() && cfg.replay.is_empty() {
        return Err(CliError::Config("nothing to certify: give certificates or replay files".into()));
    }
    let inst = cfg.instance.as_ref().map(|s| s.build("instance")).transpose()?;
    let dir = out_dir(args)?;
    let base_dir = args.config.parent().map(Path::to_path_buf).unwrap_or_default();

    let mut entries = Vec::new();
    if let Some(inst) = &inst {
        let mut sd: Option<f64> = None;
        let mut st: Option<f64> = None;
        for (k, spec) in cfg.certificates.iter().enumerate() {
            let built = match *spec {
                CertificateSpec::Auto => auto_certificate(inst),
                CertificateSpec::Alpha1 { big_r, r } => build_dual_alpha1(inst, big_r, r),
                CertificateSpec::AlphaInf { r1, r2, b2, b3, case } => build_dual_alpha_inf(inst, r1, r2, b2, b3, case),
                CertificateSpec::Static { r, b, q } => build_dual_static(inst, r, b, q),
            };
            let source = format!("certificates[{k}]");
            let cert = match built {
                Ok(c) => c,
                Err(e) => {
                    entries.push(failed_entry(source, e.to_string()));
                    continue;
                }
            };
            let mut entry = CertEntry {
                source,
                pass: cert.passed(),
                certificate: None,
                optimum_reward: None,
                optimum_margin: None,
                error: None,
            };
            if cfg.compare_sd {
                let opt = if matches!(cert.program, DualProgram::Static { .. }) {
                    *st.get_or_insert_with(|| optimize_static(inst).reward)
                } else {
                    match sd {
                        Some(v) => v,
                        None => *sd.insert(optimize_stock_dependent(inst)?.reward),
                    }
                };
                let margin = cert.zeta - opt;
                entry.optimum_reward = Some(opt);
                entry.optimum_margin = Some(margin);
                entry.pass &= margin >= -cert.tolerance();
            }
            entry.certificate = Some(cert);
            entries.push(entry);
        }
    }
    for path in &cfg.replay {
        let p = PathBuf::from(path);
        entries.extend(replay(&if p.is_absolute() { p } else { base_dir.join(p) }));
    }
    write_json(&dir.join("certificates.json"), &entries)?;

    for e in &entries {
        let verdict = if e.pass { "PASS" } else { "FAIL" };
        match &e.certificate {
            Some(c) => {
                let worst = c.residuals.as_ref().map_or(f64::NAN, |r| r.max_violation);
                let mut line = format!(
                    "{verdict} {} {}: zeta = {:.6}, gap = {:.6}, max violation = {worst:.3e}",
                    e.source,
                    program_name(&c.program),
                    c.zeta,
                    c.gap()
                );
                if let Some(m) = e.optimum_margin {
                    let _ = write!(line, ", zeta - optimum = {m:.6}");
                }
                if let Some(r) = &c.residuals {
                    if let Some(label) = &r.violated_constraint {
                        let _ = write!(line, ", worst constraint {label}");
                    }
                }
                println!("{line}");
            }
            None => println!("{verdict} {}: {}", e.source, e.error.as_deref().unwrap_or("")),
        }
    }
    let failed = entries.iter().filter(|e| !e.pass).count();
    if failed > 0 {
        return Err(CliError::Check(format!("{failed} of {} certificate(s) failed", entries.len())));
    }
    Ok(())
}

#[derive(Serialize)]
struct RunSummary {
    distribution: String,
    seed: u64,
    events: u64,
    empirical_reward_rate: f64,
    half_width: f64,
    mean_busy: f64,
    littles_law_busy: f64,
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    report: &'a twoprice::simulator::InsensitivityReport,
    runs: Vec<RunSummary>,
}

pub fn simulate(args: &CommonArgs) -> Result<(), CliError> {
    let cfg: SimulateConfig = load(&args.config)?;
    let seed = args.seed.unwrap_or(cfg.seed);
    let inst = cfg.instance.build("instance")?;
    let policy = resolve_policy(&cfg.policy, &inst, "policy")?;
    if !(cfg.horizon.is_finite() && cfg.horizon > 0.0) {
        return Err(CliError::Config(format!("horizon: must be positive, got {}", cfg.horizon)));
    }
    if let Some(w) = cfg.warmup {
        if !(w >= 0.0 && w < cfg.horizon) {
            return Err(CliError::Config(format!("warmup: must lie in [0, horizon), got {w}")));
        }
    }
    if cfg.durations.is_empty() {
        return Err(CliError::Config("durations: at least one distribution is required".into()));
    }
    let durations: Vec<_> = cfg.durations.iter().map(|d| d.resolve(inst.d)).collect();
    for (k, d) in durations.iter().enumerate() {
        d.validate().map_err(|e| CliError::Config(format!("durations[{k}]: {e}")))?;
        if (d.mean() - inst.d).abs() > 1e-9 * inst.d {
            return Err(CliError::Config(format!(
                "durations[{k}]: mean {} differs from instance d = {}",
                d.mean(),
                inst.d
            )));
        }
    }
    let dir = out_dir(args)?;
    let sim = SimConfig {
        seed,
        horizon: cfg.horizon,
        warmup: cfg.warmup,
    };
    let (report, ms) = timed(!args.no_timing, || insensitivity_test(&inst, &policy, &durations, &sim));
    let report = report?;

    let flu = fluid_value(&inst);
    let label = policy_label(&cfg.policy);
    let row = |group: String, reward: f64, wall_ms: f64| ResultRow {
        c: inst.c,
        lambda: inst.lambda,
        d: inst.d,
        policy: label.clone(),
        reward,
        loss: flu - reward,
        ratio: if flu > 0.0 { reward / flu } else { 1.0 },
        slope_group: group,
        seed,
        wall_ms,
    };
    let mut rows = vec![row("analytic".into(), report.analytic_reward, 0.0)];
    for (d, run) in durations.iter().zip(&report.runs) {
        rows.push(row(d.name(), run.empirical_reward_rate, ms));
    }
    // simulated rewards can exceed FLU by sampling noise
    let mut w = csv::Writer::from_path(dir.join("results.csv"))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("pi.csv"))?;
    let mut header = vec!["j".to_string(), "analytic".to_string()];
    header.extend(durations.iter().map(|d| d.name()));
    w.write_record(&header)?;
    for (j, p) in report.analytic_pi.iter().enumerate() {
        let mut rec = vec![j.to_string(), p.to_string()];
        rec.extend(report.runs.iter().map(|r| r.empirical_pi[j].to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;

    let runs = durations
        .iter()
        .zip(&report.runs)
        .map(|(d, r)| RunSummary {
            distribution: d.name(),
            seed: r.seed,
            events: r.events,
            empirical_reward_rate: r.empirical_reward_rate,
            half_width: r.half_width,
            mean_busy: r.mean_busy,
            littles_law_busy: r.littles_law_busy,
        })
        .collect();
    write_json(&dir.join("insensitivity.json"), &SimulateOutput { report: &report, runs })?;

    println!("analytic reward {:.6}", report.analytic_reward);
    for r in &report.rows {
        println!(
            "{} {:<28} tv = {:.5}, reward error = {:.5}",
            if r.pass { "PASS" } else { "FAIL" },
            r.distribution,
            r.tv,
            r.reward_rel_error
        );
    }
    if args.check && !report.pass {
        return Err(CliError::Check("empirical distribution differs from the analytic one".into()));
    }
    Ok(())
}
