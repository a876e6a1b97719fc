mod config;
mod custom;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mechlab::attack::{scan_profiles, AttackTarget, GainStats, ScanRow};
use mechlab::axioms::{check_all, independence_matrix, independence_mechanisms};
use mechlab::theorem::{self, InductionOutcome, Lemma, LemmaTrace};
use mechlab::{AgentId, BidProfile, MechError, Mechanism, PaymentMode, Registry, SearchGrid};

use config::{Overrides, ScenarioConfig};
use report::{csv_path, AttackSection, ReportDocument, Skipped, Timer};

#[derive(Parser)]
#[command(
    name = "mechlab",
    version,
    about = "Axiom audits, deviation search and proof traces for single-parameter mechanisms"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON); flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Registered mechanism name.
    #[arg(long, global = true)]
    mechanism: Option<String>,
    /// Per-unit-bid price of the proportional rule.
    #[arg(long, global = true)]
    c: Option<f64>,
    /// Reserve price of spa-reserve.
    #[arg(long, global = true)]
    r: Option<f64>,
    #[arg(long, global = true, value_enum)]
    payment: Option<PaymentArg>,
    /// Bid grid as lo:hi:step.
    #[arg(long, global = true)]
    grid: Option<SearchGrid>,
    #[arg(long, global = true)]
    n_min: Option<usize>,
    #[arg(long, global = true)]
    n_max: Option<usize>,
    /// Number of sampled profiles.
    #[arg(long, global = true)]
    profile_budget: Option<usize>,
    /// Sampler seed; falls back to MECHLAB_SEED, then 42.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// JSON report path; CSV files are written next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Omit timings and timestamps so identical inputs give identical bytes.
    #[arg(long, global = true)]
    deterministic: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum PaymentArg {
    Myerson,
    Explicit,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Both,
}

impl Format {
    fn json(self) -> bool {
        self != Format::Csv
    }

    fn csv(self) -> bool {
        self != Format::Json
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Misreport,
    Sybil,
    MultiSybil,
}

#[derive(Subcommand)]
enum Command {
    /// Run all seven axiom checkers on sampled profiles.
    Audit,
    /// Search for profitable deviations.
    Attack {
        #[arg(long, value_enum, default_value_t = TargetArg::Sybil)]
        target: TargetArg,
        /// Sybil count for multi-sybil.
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Attack this profile (comma-separated bids, ids 1..n) instead of
        /// sampling.
        #[arg(long)]
        profile: Option<String>,
        /// Only this agent deviates (requires --profile).
        #[arg(long, requires = "profile")]
        deviator: Option<u64>,
    },
    /// Trace the steps of the characterization argument.
    Theorem {
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "lemma1,eqn2,lemma2,lemma3,averaging,induction"
        )]
        lemmas: Vec<Lemma>,
        #[arg(long, default_value_t = 7.0)]
        u: f64,
        #[arg(long, default_value_t = 3.0)]
        v: f64,
        #[arg(long, default_value_t = 50)]
        lemma_n_max: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,2,5")]
        avg_u: Vec<f64>,
        #[arg(long, default_value = "2,7,5")]
        induction_profile: String,
    },
    /// Mechanism-by-axiom matrix of the five independence mechanisms.
    Independence {
        /// Extra registered mechanisms to add as unasserted rows.
        #[arg(long, value_delimiter = ',')]
        include: Vec<String>,
    },
}

/// Deferred CSV output, given the JSON report path.
type CsvWriter = Box<dyn FnOnce(&Path) -> anyhow::Result<()>>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn scenario(common: &Common, registry: &Registry) -> anyhow::Result<ScenarioConfig> {
    let mut cfg = match &common.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    cfg.apply(Overrides {
        mechanism: common.mechanism.clone(),
        c: common.c,
        r: common.r,
        payment: common.payment.map(|p| match p {
            PaymentArg::Myerson => PaymentMode::Myerson,
            PaymentArg::Explicit => PaymentMode::Explicit,
        }),
        grid: common.grid.clone(),
        n_min: common.n_min,
        n_max: common.n_max,
        profile_budget: common.profile_budget,
        seed: common.seed,
    });
    cfg.resolve_seed()?;
    cfg.validate(registry)?;
    Ok(cfg)
}

fn parse_bids(s: &str) -> anyhow::Result<BidProfile> {
    let bids = s
        .split(',')
        .map(|b| {
            b.trim()
                .parse::<f64>()
                .with_context(|| format!("`{b}` is not a bid"))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(BidProfile::from_bids(&bids)?)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let common = &cli.common;
    if let Some(jobs) = common.jobs {
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("cannot start worker pool")?;
    }
    if common.format.csv() && common.out.is_none() {
        bail!("--format csv|both needs --out to place the CSV files");
    }
    let registry = custom::registry();
    let cfg = scenario(common, &registry)?;
    let mut timer = Timer::new(!common.deterministic);

    let name = match &cli.command {
        Command::Audit => "audit",
        Command::Attack { .. } => "attack",
        Command::Theorem { .. } => "theorem",
        Command::Independence { .. } => "independence",
    };
    let mut doc = ReportDocument::new(name, cfg.clone());
    if cfg.grid.is_degenerate() {
        let w = format!(
            "search grid {} is degenerate: it has a single regular point, so deviation searches only see 0, hi and the profile's own bids",
            cfg.grid
        );
        eprintln!("warning: {w}");
        doc.warnings.push(w);
    }

    let mut csvs: Vec<CsvWriter> = Vec::new();
    match cli.command {
        Command::Audit => {
            let mech = cfg.build(&registry)?;
            let profiles = cfg.sampler()?.sample(cfg.profile_budget);
            let ctx = cfg.check_context();
            let reports = timer.time("audit", || check_all(&mech, &profiles, &ctx))?;
            for r in &reports {
                eprintln!(
                    "{:<26} {}  violations={} worst={:.3e}",
                    r.axiom.as_str(),
                    r.verdict,
                    r.violations,
                    r.worst_magnitude
                );
            }
            doc.passed = reports.iter().all(|r| r.passed());
            doc.axiom_reports = reports.clone();
            csvs.push(Box::new(move |out| {
                report::write_axioms_csv(&csv_path(out, "axioms"), &reports)
            }));
        }
        Command::Attack {
            target,
            k,
            profile,
            deviator,
        } => {
            let mech = cfg.build(&registry)?;
            let target = match target {
                TargetArg::Misreport => AttackTarget::Misreport,
                TargetArg::Sybil => AttackTarget::Sybil,
                TargetArg::MultiSybil => AttackTarget::MultiSybil { k },
            };
            let (section, rows) =
                timer.time("attack", || attack(&cfg, &mech, target, profile, deviator))?;
            eprintln!(
                "{}: worst gain {:.6e} over {} searches (threshold {:.1e})",
                section.target, section.stats.max, section.stats.count, section.threshold
            );
            doc.passed = section.stats.max <= section.threshold;
            let label = section.target.clone();
            doc.attack = Some(section);
            csvs.push(Box::new(move |out| {
                report::write_gains_csv(&csv_path(out, "gains"), &label, &rows)
            }));
        }
        Command::Theorem {
            lemmas,
            u,
            v,
            lemma_n_max,
            avg_u,
            induction_profile,
        } => {
            let mech = cfg.build(&registry)?;
            let induction_profile = parse_bids(&induction_profile)?;
            let ctx = cfg.theorem_context();
            let mut selected = lemmas;
            selected.sort();
            selected.dedup();
            for lemma in selected {
                timer.time(lemma.as_str(), || -> anyhow::Result<()> {
                    match lemma {
                        Lemma::Lemma1 => doc.lemma_traces.push(theorem::lemma1_trace(
                            &mech,
                            u,
                            v,
                            lemma_n_max,
                            &ctx,
                        )?),
                        Lemma::Eqn2 => doc.lemma_traces.push(theorem::eqn2_chain_check(
                            &mech,
                            u,
                            v,
                            lemma_n_max,
                            &ctx,
                        )?),
                        Lemma::Lemma2 => doc.lemma_traces.push(theorem::lemma2_trace(
                            &mech,
                            u,
                            &cfg.grid.points_up_to(u),
                            &ctx,
                        )?),
                        Lemma::Lemma3 => doc
                            .lemma_traces
                            .push(theorem::lemma3_monotone(&mech, u, &cfg.grid, &ctx)?),
                        Lemma::Averaging => {
                            let results = avg_u
                                .iter()
                                .map(|&x| theorem::averaging_identity(&mech, x, &ctx))
                                .collect::<mechlab::Result<Vec<_>>>();
                            match results {
                                Ok(results) => {
                                    doc.averaging = results;
                                    doc.lemma_traces
                                        .push(theorem::averaging_trace(&mech, &avg_u, &ctx)?);
                                }
                                Err(MechError::Precondition(reason)) => doc.skipped.push(Skipped {
                                    section: "averaging".into(),
                                    reason,
                                }),
                                Err(e) => return Err(e.into()),
                            }
                        }
                        Lemma::Induction => {
                            match theorem::induction_witness(&mech, &induction_profile, &ctx) {
                                Ok(outcome) => doc.induction = Some(outcome),
                                Err(MechError::Precondition(reason)) => doc.skipped.push(Skipped {
                                    section: "induction".into(),
                                    reason,
                                }),
                                Err(e) => return Err(e.into()),
                            }
                        }
                    }
                    Ok(())
                })?;
            }
            for t in &doc.lemma_traces {
                eprintln!(
                    "{:<10} {:?}  worst slack {:.3e} (tolerance {:.1e})",
                    t.lemma.as_str(),
                    t.verdict,
                    t.worst_slack,
                    t.tolerance
                );
            }
            match &doc.induction {
                Some(InductionOutcome::Witness { deviation, .. }) => {
                    eprintln!("induction  profitable sybil, gain {:.6e}", deviation.gain)
                }
                Some(InductionOutcome::NotApplicable { .. }) => {
                    eprintln!("induction  not applicable: low bidder has zero share")
                }
                Some(InductionOutcome::NoProfitableDeviation { best, .. }) => {
                    eprintln!(
                        "induction  no profitable sybil, best gain {:.3e}",
                        best.gain
                    )
                }
                None => {}
            }
            for s in &doc.skipped {
                eprintln!("{:<10} skipped: {}", s.section, s.reason);
            }
            doc.passed = doc.lemma_traces.iter().all(LemmaTrace::consistent)
                && !matches!(doc.induction, Some(InductionOutcome::Witness { .. }));
            let traces = doc.lemma_traces.clone();
            csvs.push(Box::new(move |out| {
                for t in &traces {
                    report::write_trace_csv(&csv_path(out, t.lemma.as_str()), t)?;
                }
                Ok(())
            }));
        }
        Command::Independence { include } => {
            let mut mechs = independence_mechanisms(cfg.c, cfg.r);
            for name in &include {
                if mechs.iter().any(|m| m.name() == name) {
                    continue;
                }
                mechs.push(registry.build(name, &cfg.params())?);
            }
            let profiles = cfg.sampler()?.sample(cfg.profile_budget);
            let ctx = cfg.check_context();
            let matrix = timer.time("independence", || {
                independence_matrix(&mechs, &profiles, &ctx)
            })?;
            eprint!("{}", matrix.render_table());
            doc.passed = matrix.matches_expected;
            let m = matrix.clone();
            doc.independence = Some(matrix);
            csvs.push(Box::new(move |out| {
                report::write_matrix_csv(&csv_path(out, "independence"), &m)
            }));
        }
    }
    timer.finish(&mut doc);

    match &common.out {
        Some(out) => {
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)
                    .with_context(|| format!("cannot create {}", dir.display()))?;
            }
            if common.format.json() {
                std::fs::write(out, doc.to_json()?)
                    .with_context(|| format!("cannot write {}", out.display()))?;
            }
            if common.format.csv() {
                for write in csvs {
                    write(out)?;
                }
            }
        }
        None => print!("{}", doc.to_json()?),
    }
    eprintln!("{}", if doc.passed { "PASS" } else { "FAIL" });
    Ok(doc.passed)
}

fn attack(
    cfg: &ScenarioConfig,
    mech: &Mechanism,
    target: AttackTarget,
    profile: Option<String>,
    deviator: Option<u64>,
) -> anyhow::Result<(AttackSection, Vec<ScanRow>)> {
    let quad = cfg.quad();
    let tol = cfg.tolerances;
    let threshold = match target {
        AttackTarget::Misreport => tol.tol_num + 2.0 * tol.tol_quad,
        AttackTarget::Sybil => tol.tol_num + 4.0 * tol.tol_quad,
        AttackTarget::MultiSybil { k } => tol.tol_num + 2.0 * (k as f64 + 1.0) * tol.tol_quad,
    };
    let (rows, profiles_tested, scan_worst) = match profile {
        Some(bids) => {
            let p = parse_bids(&bids)?;
            let agents: Vec<AgentId> = match deviator {
                Some(id) => {
                    let id = AgentId(id);
                    if !p.contains(id) {
                        bail!("deviator {id} is not in profile {p}");
                    }
                    vec![id]
                }
                None => p.agents().collect(),
            };
            let rows = agents
                .into_iter()
                .map(|a| {
                    Ok(ScanRow {
                        profile_index: 0,
                        deviation: target.run(mech, &p, a, &cfg.grid, &cfg.search, &quad)?,
                    })
                })
                .collect::<mechlab::Result<Vec<_>>>()?;
            (rows, 1, None)
        }
        None => {
            let profiles = cfg.sampler()?.sample(cfg.profile_budget);
            let scan = scan_profiles(
                mech,
                &profiles,
                target,
                &cfg.grid,
                &cfg.search,
                &quad,
                threshold,
            )?;
            (scan.rows, profiles.len(), scan.worst)
        }
    };
    let gains: Vec<f64> = rows.iter().map(|r| r.deviation.gain).collect();
    // first strictly largest gain, in agent order
    let worst = scan_worst.or_else(|| {
        rows.iter()
            .fold(None::<&ScanRow>, |best, r| match best {
                Some(b) if b.deviation.gain >= r.deviation.gain => Some(b),
                _ => Some(r),
            })
            .map(|r| r.deviation.clone())
    });
    Ok((
        AttackSection {
            target: target.label(),
            profiles_tested,
            threshold,
            worst,
            stats: GainStats::from_gains(&gains, threshold),
        },
        rows,
    ))
}
