use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use lightcone_core::analysis::{
    stability_rate, verify_free_theorem, verify_linear_stability, verify_semilinear_theorem,
    DataGenerator,
};
use lightcone_core::decompose::{h2k_norm, project, spectral_project, DecompositionRecord};
use lightcone_core::evolve::TrajectoryConfig;
use lightcone_core::modes::{
    eigenvalue_scan, free_eigenvalue, free_mode, plus_minus_collision, semilinear_eigenvalues,
    semilinear_mode, Branch, ModeRecord,
};
use lightcone_core::{
    ChebBasis, EvolveOptions, Evolver, Field, ModeLabel, ModePair, Problem, VerificationReport,
    Verdict,
};

use crate::config::{check_k, RunConfig, MAX_JMAX};
use crate::output::{ensure_dir, write_csv, write_json};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub j: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_plus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_minus: Option<f64>,
    /// For `λ_j⁺` equal to an earlier `λ_i⁻`, the label `minus(i)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plus_coincides_with: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTable {
    pub problem: String,
    pub p: Option<f64>,
    pub pc0: f64,
    pub rows: Vec<SpectrumRow>,
}

pub fn spectrum_table(cfg: &RunConfig) -> Result<SpectrumTable, CliError> {
    let problem = cfg.problem()?;
    let rows = match &problem {
        Problem::Free => (1..=cfg.jmax)
            .map(|j| SpectrumRow {
                j,
                lambda: Some(free_eigenvalue(j) as f64),
                lambda_plus: None,
                lambda_minus: None,
                plus_coincides_with: None,
            })
            .collect(),
        Problem::Semilinear(params) => {
            let scan = eigenvalue_scan(params, cfg.jmax, None);
            (0..=cfg.jmax)
                .map(|j| {
                    let of = |b: Branch| scan.iter().find(|e| e.j == j && e.branch == b);
                    SpectrumRow {
                        j,
                        lambda: None,
                        lambda_plus: of(Branch::Plus).map(|e| e.lambda),
                        lambda_minus: of(Branch::Minus).map(|e| e.lambda),
                        plus_coincides_with: plus_minus_collision(params, j)
                            .map(|i| ModeLabel::Minus(i).to_string()),
                    }
                })
                .collect()
        }
    };
    Ok(SpectrumTable {
        problem: problem.name().to_string(),
        p: problem.params().map(|p| p.p()),
        pc0: problem.pc0(),
        rows,
    })
}

pub fn spectrum(cfg: &RunConfig, json: bool) -> Result<String, CliError> {
    let table = spectrum_table(cfg)?;
    if json {
        let mut s = serde_json::to_string_pretty(&table).map_err(|e| CliError::Output(e.to_string()))?;
        s.push('\n');
        return Ok(s);
    }
    let mut s = String::new();
    match table.p {
        Some(p) => {
            let _ = writeln!(s, "# semilinear p = {p}, pc0 = {}", table.pc0);
            let _ = writeln!(s, "j\tlambda_plus\tlambda_minus");
        }
        None => {
            let _ = writeln!(s, "# free");
            let _ = writeln!(s, "j\tlambda");
        }
    }
    for r in &table.rows {
        match (r.lambda, r.lambda_plus, r.lambda_minus) {
            (Some(l), _, _) => {
                let _ = writeln!(s, "{}\t{l}", r.j);
            }
            (None, Some(a), Some(b)) => {
                let _ = write!(s, "{}\t{a}\t{b}", r.j);
                if let Some(c) = &r.plus_coincides_with {
                    let _ = write!(s, "\t# lambda_plus = {c}");
                }
                s.push('\n');
            }
            _ => {}
        }
    }
    Ok(s)
}

fn catalogue(cfg: &RunConfig, problem: &Problem<f64>) -> Result<Vec<ModePair<f64>>, CliError> {
    let modes = match problem {
        Problem::Free => {
            if cfg.jmax == 0 {
                return Err(CliError::Config("free modes start at j = 1; pass --jmax >= 1".into()));
            }
            (1..=cfg.jmax).map(free_mode).collect::<Result<Vec<_>, _>>()?
        }
        Problem::Semilinear(params) => {
            let mut out = Vec::new();
            for j in 0..=cfg.jmax {
                for b in [Branch::Plus, Branch::Minus] {
                    out.push(semilinear_mode(params, j, b)?);
                }
            }
            out
        }
    };
    Ok(modes.iter().map(|m| m.normalized(cfg.k)).collect())
}

pub fn modes(cfg: &RunConfig) -> Result<String, CliError> {
    let problem = cfg.problem()?;
    let modes = catalogue(cfg, &problem)?;
    let basis = Arc::new(ChebBasis::<f64>::new(cfg.n)?);
    let mut s = String::from("label\tlambda\tdegree\tresidual_H\n");
    for m in &modes {
        let r = m.eigen_residual(&basis, &problem)?;
        let _ = writeln!(s, "{}\t{}\t{}\t{:.3e}", m.label, m.lambda, m.degree(), r);
    }
    ensure_dir(&cfg.out)?;
    let path = cfg.out.join("modes.json");
    let records: Vec<ModeRecord> = modes.iter().map(ModePair::to_record).collect();
    write_json(&path, &records)?;
    let _ = writeln!(s, "wrote {}", path.display());
    Ok(s)
}

fn parse_index(text: &str, prefix: &str) -> Option<usize> {
    text.strip_prefix(prefix)?.strip_suffix(')')?.trim().parse().ok()
}

/// Resolves `--mode`: a label `free(j)`, `plus(j)`, `minus(j)` or an
/// analytic eigenvalue.
pub fn resolve_mode(text: &str, problem: &Problem<f64>) -> Result<ModePair<f64>, CliError> {
    let text = text.trim();
    let bad = || CliError::Config(format!("'{text}' is not an analytic mode of the {} problem", problem.name()));
    match problem {
        Problem::Free => {
            let j = match parse_index(text, "free(") {
                Some(j) => j,
                None => {
                    let lambda: f64 = text.parse().map_err(|_| bad())?;
                    let j = 1.0 - lambda;
                    if j.fract() != 0.0 || j < 1.0 || j > MAX_JMAX as f64 {
                        return Err(bad());
                    }
                    j as usize
                }
            };
            free_mode(j).map_err(|_| bad())
        }
        Problem::Semilinear(params) => {
            let pick = if let Some(j) = parse_index(text, "plus(") {
                (j, Branch::Plus)
            } else if let Some(j) = parse_index(text, "minus(") {
                (j, Branch::Minus)
            } else {
                let lambda: f64 = text.parse().map_err(|_| bad())?;
                let tol = 1e-9 * lambda.abs().max(1.0);
                (0..=MAX_JMAX)
                    .find_map(|j| {
                        let (plus, minus) = semilinear_eigenvalues(params, j);
                        if (minus - lambda).abs() <= tol {
                            Some((j, Branch::Minus))
                        } else if (plus - lambda).abs() <= tol {
                            Some((j, Branch::Plus))
                        } else {
                            None
                        }
                    })
                    .ok_or_else(bad)?
            };
            Ok(semilinear_mode(params, pick.0, pick.1)?)
        }
    }
}

fn initial_data(
    cfg: &RunConfig,
    problem: &Problem<f64>,
    basis: &Arc<ChebBasis<f64>>,
) -> Result<(Field<f64>, String), CliError> {
    match &cfg.mode {
        Some(text) => {
            let m = resolve_mode(text, problem)?.normalized(cfg.k);
            Ok((m.field(basis), format!("mode {} (lambda = {})", m.label, m.lambda)))
        }
        None => {
            let f = DataGenerator::new(cfg.seed).next_field(basis, cfg.k)?;
            Ok((f, format!("random polynomial, seed {}", cfg.seed)))
        }
    }
}

fn evolver(cfg: &RunConfig, problem: &Problem<f64>, filter: bool, keep_states: bool) -> Result<Evolver<f64>, CliError> {
    let basis = Arc::new(ChebBasis::new(cfg.n)?);
    let options = EvolveOptions {
        dtau: cfg.dtau,
        filter,
        keep_states,
        ..EvolveOptions::default()
    };
    Ok(Evolver::new(&basis, problem, options)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub requested_tau: f64,
    pub tau: f64,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveManifest {
    pub command: String,
    pub initial_data: String,
    pub run: TrajectoryConfig,
    pub samples: usize,
    pub initial_norm_h: f64,
    pub final_norm_h: f64,
    pub final_norm_h2k: f64,
    pub norms_csv: String,
    pub snapshots: Vec<SnapshotEntry>,
}

pub fn evolve(cfg: &RunConfig, snapshots: &[f64]) -> Result<String, CliError> {
    let problem = cfg.problem()?;
    if let Some(t) = snapshots.iter().find(|t| !(**t >= 0.0 && **t <= cfg.tau_end)) {
        return Err(CliError::Config(format!("snapshot tau {t} lies outside [0, tau-end]")));
    }
    let ev = evolver(cfg, &problem, cfg.filter, !snapshots.is_empty())?;
    let (u0, description) = initial_data(cfg, &problem, ev.basis())?;
    let tr = ev.run(&u0, cfg.tau_end, cfg.k)?;
    ensure_dir(&cfg.out)?;
    write_csv(&cfg.out.join("norms.csv"), &tr.norms_csv())?;
    let mut entries = Vec::with_capacity(snapshots.len());
    for (i, &t) in snapshots.iter().enumerate() {
        let (tau, state) = tr
            .snapshot(t)
            .ok_or_else(|| CliError::Output("no states recorded".into()))?;
        let name = format!("snapshot_{i:03}.csv");
        write_csv(&cfg.out.join(&name), &state.to_csv())?;
        entries.push(SnapshotEntry {
            requested_tau: t,
            tau,
            path: name,
        });
    }
    let last = tr.norms.last().copied().unwrap_or(tr.norms[0]);
    let manifest = EvolveManifest {
        command: "evolve".into(),
        initial_data: description,
        run: tr.config.clone(),
        samples: tr.taus.len(),
        initial_norm_h: tr.norms[0].h,
        final_norm_h: last.h,
        final_norm_h2k: last.h2k,
        norms_csv: "norms.csv".into(),
        snapshots: entries,
    };
    let path = cfg.out.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(format!(
        "evolved {} to tau = {}: norm_H {} -> {}\nwrote {}\n",
        manifest.initial_data,
        cfg.tau_end,
        manifest.initial_norm_h,
        manifest.final_norm_h,
        path.display()
    ))
}

pub fn decompose(cfg: &RunConfig, spectral: bool) -> Result<String, CliError> {
    let problem = cfg.problem()?;
    let basis = Arc::new(ChebBasis::new(cfg.n)?);
    let (u, description) = initial_data(cfg, &problem, &basis)?;
    let d = if spectral {
        spectral_project(&u, cfg.k, &problem)?
    } else {
        project(&u, cfg.k, &problem)?
    };
    ensure_dir(&cfg.out)?;
    write_csv(&cfg.out.join("remainder.csv"), &d.remainder.to_csv())?;
    let record: DecompositionRecord = d.to_record(Some("remainder.csv".into()));
    let path = cfg.out.join("decomposition.json");
    write_json(&path, &record)?;
    let mut s = format!("{description}, k = {}, {:?} split\nlabel\tlambda\tcoeff\n", cfg.k, record.split);
    for ((l, lam), c) in record.labels.iter().zip(&record.lambdas).zip(&record.coeffs) {
        let _ = writeln!(s, "{l}\t{lam}\t{c}");
    }
    let _ = writeln!(
        s,
        "remainder H^2k norm {}\nwrote {}",
        h2k_norm(&d.remainder, cfg.k)?,
        path.display()
    );
    Ok(s)
}

/// The check `verify` runs for this configuration.
pub fn run_check(cfg: &RunConfig, problem: &Problem<f64>, k: usize) -> Result<VerificationReport, CliError> {
    let filter = cfg.filter || k >= 2;
    let report = match problem {
        Problem::Free => {
            let ev = evolver(cfg, problem, filter, true)?;
            verify_free_theorem(&ev, k, cfg.tau_end, cfg.samples, cfg.seed)?
        }
        Problem::Semilinear(_) if cfg.no_gauge => {
            let ev = evolver(cfg, problem, filter, false)?;
            verify_linear_stability(&ev, k, cfg.tau_end, cfg.samples, cfg.seed)?
        }
        Problem::Semilinear(_) => {
            let ev = evolver(cfg, problem, filter, true)?;
            verify_semilinear_theorem(&ev, k, cfg.tau_end, cfg.samples, cfg.seed)?
        }
    };
    Ok(report)
}

fn report_line(r: &VerificationReport) -> String {
    let p = r.p.map(|p| format!(" p={p}")).unwrap_or_default();
    format!(
        "{}{p} k={}: {:?} ({}/{} samples), fitted rates [{}, {}], bound {}",
        r.check,
        r.k,
        r.summary.verdict,
        r.summary.passed,
        r.summary.samples,
        r.summary.min_rate,
        r.summary.max_rate,
        r.per_sample.first().map(|s| s.bound).unwrap_or(f64::NAN),
    )
}

pub fn verify(cfg: &RunConfig) -> Result<(String, bool), CliError> {
    let problem = cfg.problem()?;
    let report = run_check(cfg, &problem, cfg.k)?;
    ensure_dir(&cfg.out)?;
    let path = cfg.out.join("report.json");
    write_json(&path, &report)?;
    let mut s = report_line(&report);
    for note in &report.summary.notes {
        let _ = write!(s, "\nnote: {note}");
    }
    let _ = writeln!(s, "\nwrote {}", path.display());
    Ok((s, report.passed()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub p: Option<f64>,
    pub k: usize,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<String>,
    /// Expected exponent: the remainder bound for theorem checks, the
    /// stability rate otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theoretical_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambdas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub cells: usize,
    pub passed: usize,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub problem: String,
    pub no_gauge: bool,
    pub n: usize,
    pub tau_end: f64,
    pub samples: usize,
    pub seed: u64,
    pub cells: Vec<CellRecord>,
    pub summary: SweepSummary,
}

fn cell_dir(p: Option<f64>, k: usize) -> String {
    match p {
        Some(p) => format!("p{p}_k{k}"),
        None => format!("free_k{k}"),
    }
}

fn run_cell(cfg: &RunConfig, p: Option<f64>, k: usize) -> CellRecord {
    let mut cell = CellRecord {
        p,
        k,
        verdict: Verdict::Fail,
        check: None,
        theoretical_rate: None,
        lambdas: Vec::new(),
        min_rate: None,
        max_rate: None,
        report: None,
        error: None,
    };
    let result = (|| -> Result<VerificationReport, CliError> {
        let problem = match p {
            None => Problem::Free,
            Some(p) => Problem::Semilinear(crate::config::parse_p(&p.to_string(), cfg.allow_real_p)?),
        };
        let report = run_check(cfg, &problem, k)?;
        let dir = cfg.out.join(cell_dir(p, k));
        ensure_dir(&dir)?;
        write_json(&dir.join("report.json"), &report)?;
        Ok(report)
    })();
    match result {
        Ok(r) => {
            cell.verdict = r.summary.verdict;
            cell.theoretical_rate = match (p, cfg.no_gauge) {
                (Some(_), true) => r.p.map(|p| {
                    stability_rate(&lightcone_core::ProblemParams::with_real_exponent(p).expect("validated"))
                }),
                _ => r.per_sample.first().map(|s| s.bound),
            };
            cell.lambdas = r.per_sample.first().map(|s| s.lambdas.clone()).unwrap_or_default();
            cell.min_rate = Some(r.summary.min_rate);
            cell.max_rate = Some(r.summary.max_rate);
            cell.check = Some(r.check);
            cell.report = Some(format!("{}/report.json", cell_dir(p, k)));
        }
        Err(e) => cell.error = Some(e.to_string()),
    }
    cell
}

pub fn sweep(cfg: &RunConfig) -> Result<(String, bool), CliError> {
    let ks: Vec<usize> = if cfg.ks.is_empty() { vec![check_k(cfg.k)?] } else { cfg.ks.clone() };
    let ps: Vec<Option<f64>> = if cfg.free {
        if !cfg.ps.is_empty() {
            return Err(CliError::Config("--ps does not apply to --free".into()));
        }
        vec![None]
    } else if !cfg.ps.is_empty() {
        cfg.ps.iter().copied().map(Some).collect()
    } else {
        cfg.problem
            .and_then(|p| p.params().map(|q| q.p()))
            .map(Some)
            .into_iter()
            .collect()
    };
    let grid: Vec<(Option<f64>, usize)> = ps.iter().flat_map(|&p| ks.iter().map(move |&k| (p, k))).collect();
    if grid.is_empty() {
        return Err(CliError::Config("empty sweep grid: pass --ps (or --p, or --free) and --ks".into()));
    }
    ensure_dir(&cfg.out)?;
    let cells: Vec<CellRecord> = std::thread::scope(|scope| {
        let handles: Vec<_> = grid
            .iter()
            .map(|&(p, k)| scope.spawn(move || run_cell(cfg, p, k)))
            .collect();
        handles
            .into_iter()
            .zip(&grid)
            .map(|(h, &(p, k))| {
                h.join().unwrap_or_else(|_| CellRecord {
                    p,
                    k,
                    verdict: Verdict::Fail,
                    check: None,
                    theoretical_rate: None,
                    lambdas: Vec::new(),
                    min_rate: None,
                    max_rate: None,
                    report: None,
                    error: Some("cell panicked".into()),
                })
            })
            .collect()
    });
    let passed = cells.iter().filter(|c| c.verdict.passed()).count();
    let all = passed == cells.len();
    let report = SweepReport {
        problem: if cfg.free { "free".into() } else { "semilinear".into() },
        no_gauge: cfg.no_gauge,
        n: cfg.n,
        tau_end: cfg.tau_end,
        samples: cfg.samples,
        seed: cfg.seed,
        summary: SweepSummary {
            cells: cells.len(),
            passed,
            verdict: if all { Verdict::Pass } else { Verdict::Fail },
        },
        cells,
    };
    let path = cfg.out.join("sweep.json");
    write_json(&path, &report)?;
    let table = sweep_csv(&report);
    if let Some(csv) = &table {
        write_csv(&cfg.out.join("sweep.csv"), csv)?;
    }
    let mut s = String::new();
    for c in &report.cells {
        let p = c.p.map(|p| format!("p={p} ")).unwrap_or_default();
        match &c.error {
            Some(e) => {
                let _ = writeln!(s, "{p}k={}: error: {e}", c.k);
            }
            None => {
                let _ = writeln!(
                    s,
                    "{p}k={}: {:?}, rates [{}, {}] vs {}",
                    c.k,
                    c.verdict,
                    c.min_rate.unwrap_or(f64::NAN),
                    c.max_rate.unwrap_or(f64::NAN),
                    c.theoretical_rate.unwrap_or(f64::NAN)
                );
            }
        }
    }
    let _ = writeln!(s, "{}/{} cells passed\nwrote {}", passed, report.summary.cells, path.display());
    Ok((s, all))
}

/// Plot-ready table of the cells that produced a report; `p = 0` marks
/// the free problem.
fn sweep_csv(report: &SweepReport) -> Option<String> {
    let mut s = String::from("p,k,pass,min_rate,max_rate,theoretical_rate\n");
    let mut rows = 0;
    for c in &report.cells {
        if let (Some(lo), Some(hi), Some(t)) = (c.min_rate, c.max_rate, c.theoretical_rate) {
            let _ = writeln!(
                s,
                "{:.16e},{},{},{:.16e},{:.16e},{:.16e}",
                c.p.unwrap_or(0.0),
                c.k,
                u8::from(c.verdict.passed()),
                lo,
                hi,
                t
            );
            rows += 1;
        }
    }
    (rows > 0).then_some(s)
}
