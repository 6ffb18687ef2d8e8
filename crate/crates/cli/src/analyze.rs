use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use capset_core::bounds::{classical_threshold, ef_classical, ef_conjecture_b, ef_grassmanian, ef_theorem_a};
use capset_core::capacity::{
    capacity_sets, capacity_vector, check_capacity_invariants, ratio_stats, save_capacity_matrix,
    save_capacity_vector,
};
use capset_core::combinatorics::ef_count;
use capset_core::dictionary::{coherence_profile, grassmanian_mu};
use capset_core::sampling::{ef_comp_b, ef_empirical, variance_experiment, CoeffModel, EmpiricalConfig};
use capset_core::{CapacityMatrix, CapacityVector, CapsetError, EstimationFunction, SolverConfig};
use serde::Serialize;

use crate::args::{AnalyzeArgs, CoeffModelArg, EfKind};
use crate::cache::{default_dir, CapacityCache};
use crate::dict::{self, DictDescriptor};
use crate::{thread_pool, write_file, CliError, CliResult};

#[derive(Debug, Serialize)]
struct Stage {
    name: String,
    seconds: f64,
    lps: usize,
    cached: bool,
}

#[derive(Debug, Serialize)]
struct SolverSummary {
    feas_tol: f64,
    opt_tol: f64,
    pivot_tol: f64,
    pivot_rule: String,
    refactor_interval: usize,
    perturb: bool,
}

#[derive(Debug, Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    command: Vec<String>,
    dictionary: DictDescriptor,
    estimation_functions: Vec<&'static str>,
    samples: usize,
    var_samples: Option<usize>,
    d: usize,
    coeff_model: &'static str,
    mc_seed: u64,
    jobs: usize,
    solver: SolverSummary,
    stages: Vec<Stage>,
    outputs: Vec<String>,
}

#[derive(Debug, Serialize)]
struct CoherenceSummary {
    mu: f64,
    grassmanian_mu: Option<f64>,
    /// Largest m with μ₁(m−1) + μ₁(m) < 1.
    babel_threshold: usize,
    classical_threshold: f64,
}

#[derive(Debug, Serialize)]
struct CapacitySummary {
    #[serde(rename = "E_q")]
    e_q: f64,
    #[serde(rename = "var_q")]
    var_q: f64,
    #[serde(rename = "2E_q")]
    two_e_q: f64,
    #[serde(rename = "2var_q")]
    two_var_q: f64,
    #[serde(rename = "E_Q", skip_serializing_if = "Option::is_none")]
    e_pair: Option<f64>,
    #[serde(rename = "var_Q", skip_serializing_if = "Option::is_none")]
    var_pair: Option<f64>,
    invariant_violations: usize,
}

#[derive(Debug, Serialize)]
struct RatioSummary {
    mean: f64,
    variance: f64,
    std_dev: f64,
    pairs: usize,
}

#[derive(Debug, Serialize)]
struct EfSummary {
    label: String,
    params: BTreeMap<String, f64>,
    values: Vec<f64>,
    interpolated: Vec<usize>,
}

#[derive(Debug, Serialize)]
struct VarianceSummary {
    samples: usize,
    seed: u64,
    max_ell: usize,
    /// `(ℓ, kind, excess in σ)` for rows with var_x above var_y by more than 3σ.
    violations_3sigma: Vec<(usize, &'static str, f64)>,
}

#[derive(Debug, Serialize)]
struct Report {
    dictionary: DictDescriptor,
    coherence: CoherenceSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    capacity: Option<CapacitySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ratio: Option<RatioSummary>,
    estimation_functions: BTreeMap<&'static str, EfSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    variance: Option<VarianceSummary>,
}

struct Stages(Vec<Stage>);

impl Stages {
    fn run<T>(&mut self, name: &str, lps: usize, f: impl FnOnce() -> CliResult<T>) -> CliResult<T> {
        log::info!("{name}: start ({lps} LPs)");
        let start = Instant::now();
        let out = f()?;
        let seconds = start.elapsed().as_secs_f64();
        log::info!("{name}: done in {seconds:.2} s");
        self.0.push(Stage {
            name: name.to_string(),
            seconds,
            lps,
            cached: false,
        });
        Ok(out)
    }

    fn cached(&mut self, name: &str) {
        log::info!("{name}: loaded from cache");
        self.0.push(Stage {
            name: name.to_string(),
            seconds: 0.0,
            lps: 0,
            cached: true,
        });
    }
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value).map(|s| s + "\n").map_err(|e| CliError::Output(e.to_string()))
}

fn save(out: &Path, outputs: &mut Vec<String>, name: &str, contents: String) -> CliResult<()> {
    write_file(&out.join(name), contents)?;
    outputs.push(name.to_string());
    Ok(())
}

fn ef_summary(ef: &EstimationFunction) -> EfSummary {
    EfSummary {
        label: ef.label.clone(),
        params: ef.params.clone(),
        values: ef.values().to_vec(),
        interpolated: ef.interpolated().to_vec(),
    }
}

pub fn run(args: AnalyzeArgs) -> CliResult<ExitCode> {
    if args.samples == 0 {
        return Err(CliError::Config("--samples must be positive".into()));
    }
    let pool = thread_pool(args.jobs)?;
    let jobs = pool.current_num_threads();
    pool.install(|| analyze(args, jobs))
}

fn analyze(args: AnalyzeArgs, jobs: usize) -> CliResult<ExitCode> {
    let mut efs = args.ef.clone();
    efs.sort();
    efs.dedup();
    let mc_seed = args.mc_seed.unwrap_or(args.dict.seed);
    let solver = SolverConfig::default();
    let out = &args.out;
    std::fs::create_dir_all(out).map_err(|e| CliError::Output(format!("cannot create {}: {e}", out.display())))?;
    let mut stages = Stages(Vec::new());
    let mut outputs = Vec::new();

    let (dict, descriptor) = stages.run("dictionary", 0, || dict::build(&args.dict))?;
    let (n, l) = (dict.rows(), dict.cols());
    let profile = stages.run("profile", 0, || Ok(coherence_profile(&dict, l - 1)?))?;
    let coherence = CoherenceSummary {
        mu: profile.mu,
        grassmanian_mu: grassmanian_mu(n, l).ok(),
        babel_threshold: profile.babel_threshold(),
        classical_threshold: classical_threshold(profile.mu),
    };

    let needs_pairs = efs.iter().any(|e| e.needs_pairs()) || args.var_samples.is_some();
    let needs_q = needs_pairs || efs.iter().any(|e| e.needs_q());
    let cache_dir = (!args.no_cache).then(|| args.cache_dir.clone().unwrap_or_else(default_dir));
    let cache = CapacityCache::new(cache_dir, &dict, &solver);
    let label = dict.label().to_string();

    let mut q: Option<CapacityVector> = None;
    let mut qm: Option<CapacityMatrix> = None;
    if needs_pairs {
        match (cache.load_q(l), cache.load_pairs(l)) {
            (Some(cq), Some(cm)) => {
                stages.cached("capacity q");
                stages.cached("capacity Q");
                q = Some(cq);
                qm = Some(cm);
            }
            _ => {
                let (cq, cm) = stages.run("capacity q+Q", l + l * (l - 1), || Ok(capacity_sets(&dict, &solver)?))?;
                cache.store_q(&cq, &label, dict.seed());
                cache.store_pairs(&cm, &label, dict.seed());
                q = Some(cq);
                qm = Some(cm);
            }
        }
    } else if needs_q {
        q = Some(match cache.load_q(l) {
            Some(cq) => {
                stages.cached("capacity q");
                cq
            }
            None => {
                let cq = stages.run("capacity q", l, || Ok(capacity_vector(&dict, &solver)?))?;
                cache.store_q(&cq, &label, dict.seed());
                cq
            }
        });
    }

    let mut violations = 0;
    if let Some(cq) = &q {
        let path = out.join("q.csv");
        save_capacity_vector(cq, &label, dict.seed(), &path)?;
        outputs.push("q.csv".into());
        violations = check_capacity_invariants(cq, qm.as_ref(), &profile.mu_k, 1e-9).len();
    }
    if let Some(cm) = &qm {
        save_capacity_matrix(cm, &label, dict.seed(), out.join("Q.csv"))?;
        outputs.push("Q.csv".into());
    }
    let capacity = q.as_ref().map(|cq| CapacitySummary {
        e_q: cq.mean(),
        var_q: cq.variance(),
        two_e_q: 2.0 * cq.mean(),
        two_var_q: 2.0 * cq.variance(),
        e_pair: qm.as_ref().map(|m| m.mean()),
        var_pair: qm.as_ref().map(|m| m.variance()),
        invariant_violations: violations,
    });
    let ratio = match (&q, &qm) {
        (Some(cq), Some(cm)) => match ratio_stats(cq, cm) {
            Ok(r) => Some(RatioSummary {
                mean: r.mean,
                variance: r.variance,
                std_dev: r.std_dev,
                pairs: r.count,
            }),
            Err(CapsetError::EmptyDomain) => None,
            Err(e) => return Err(e.into()),
        },
        _ => None,
    };

    let mut table = BTreeMap::new();
    for &kind in &efs {
        let stage = format!("ef {}", kind.name());
        let lps = if kind == EfKind::Emp { args.samples * n } else { 0 };
        let ef = stages.run(&stage, lps, || {
            let missing = || CliError::Config("capacity stage missing".into());
            Ok(match kind {
                EfKind::Cb => ef_classical(profile.mu, l)?,
                EfKind::Gb => ef_grassmanian(n, l)?,
                EfKind::ThmA => ef_theorem_a(q.as_ref().ok_or_else(missing)?),
                EfKind::ThmB => ef_conjecture_b(qm.as_ref().ok_or_else(missing)?),
                EfKind::CompB => ef_comp_b(qm.as_ref().ok_or_else(missing)?, args.samples, mc_seed)?,
                EfKind::Count => ef_count(q.as_ref().ok_or_else(missing)?, args.d)?,
                EfKind::Emp => {
                    let config = EmpiricalConfig {
                        samples: args.samples,
                        seed: mc_seed,
                        coeff_model: match args.coeff_model {
                            CoeffModelArg::Gaussian => CoeffModel::GaussianNonzeros,
                            CoeffModelArg::Signs => CoeffModel::UnitSigns,
                        },
                        solver: solver.clone(),
                        ..EmpiricalConfig::default()
                    };
                    ef_empirical(&dict, &config)?
                }
            })
        })?;
        save(out, &mut outputs, &format!("ef_{}.csv", kind.name()), ef.to_csv())?;
        table.insert(kind.name(), ef_summary(&ef));
    }

    let variance = match (args.var_samples, &q, &qm) {
        (Some(samples), Some(cq), Some(cm)) => {
            let max_ell = (n / 2).clamp(1, l);
            let report = stages.run("variance", 0, || Ok(variance_experiment(cq, cm, max_ell, samples, mc_seed)?))?;
            save(out, &mut outputs, "variance.csv", report.to_csv())?;
            let flagged = report
                .violations(3.0)
                .into_iter()
                .map(|r| (r.ell, r.kind.as_str(), r.excess_sigmas()))
                .collect::<Vec<_>>();
            for (ell, kind, sigmas) in &flagged {
                log::warn!("variance: ℓ = {ell} ({kind}) var_x exceeds var_y by {sigmas:.1}σ");
            }
            Some(VarianceSummary {
                samples,
                seed: mc_seed,
                max_ell,
                violations_3sigma: flagged,
            })
        }
        _ => None,
    };

    let report = Report {
        dictionary: descriptor.clone(),
        coherence,
        capacity,
        ratio,
        estimation_functions: table,
        variance,
    };
    let report_json = to_json(&report)?;
    save(out, &mut outputs, "report.json", report_json.clone())?;
    outputs.push("manifest.json".into());
    let manifest = Manifest {
        tool: "capset",
        version: env!("CARGO_PKG_VERSION"),
        command: std::env::args().collect(),
        dictionary: descriptor,
        estimation_functions: efs.iter().map(|e| e.name()).collect(),
        samples: args.samples,
        var_samples: args.var_samples,
        d: args.d,
        coeff_model: match args.coeff_model {
            CoeffModelArg::Gaussian => "gaussian",
            CoeffModelArg::Signs => "signs",
        },
        mc_seed,
        jobs,
        solver: SolverSummary {
            feas_tol: solver.feas_tol,
            opt_tol: solver.opt_tol,
            pivot_tol: solver.pivot_tol,
            pivot_rule: format!("{:?}", solver.pivot_rule),
            refactor_interval: solver.refactor_interval,
            perturb: solver.perturb,
        },
        stages: stages.0,
        outputs,
    };
    write_file(&out.join("manifest.json"), to_json(&manifest)?)?;
    print!("{report_json}");

    if violations > 0 {
        log::error!("{violations} capacity invariant violations; LP results are not trustworthy");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}
