//! The acceptance suite behind `reproduce-all`: thirteen criteria, each
//! running catalog experiments with pinned configs and judging the result
//! against a pinned tolerance.
//!
//! Output layout under the chosen directory:
//!
//! ```text
//! payload/   deterministic per-criterion results (byte-identical per seed)
//! timing/    wall-clock data
//! summary.csv, summary.json   claim vs measured vs tolerance vs status
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};
use traplab_core::crs::{CrsModel, Impact};
use traplab_core::SeedStream;

use crate::catalog::{self, Outcome};
use crate::error::RunError;
use crate::oracle;
use crate::runner::{create_dir, write_csv, write_json, write_outcome, VERSION};

pub const CRITERIA: usize = 13;
pub const DETERMINISM_ID: u8 = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// Determinism needs an earlier run with the same seed to compare with.
    Skipped,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub id: u8,
    pub name: &'static str,
    pub claim: &'static str,
    pub measured: String,
    pub tolerance: &'static str,
    pub claim_holds: bool,
    pub seconds: f64,
    pub limit_seconds: f64,
    pub status: Status,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub version: &'static str,
    pub rows: Vec<SummaryRow>,
    pub duration_secs: f64,
    pub artifacts: Vec<PathBuf>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.status != Status::Fail)
    }

    pub fn exit_code(&self) -> i32 {
        if self.all_passed() {
            0
        } else {
            1
        }
    }
}

struct Run {
    experiment: &'static str,
    params: Map<String, Value>,
    outcome: Outcome,
}

struct Judged {
    measured: String,
    holds: bool,
    runs: Vec<Run>,
}

struct Criterion {
    id: u8,
    name: &'static str,
    claim: &'static str,
    tolerance: &'static str,
    limit_seconds: f64,
    /// The measurement itself is a timing and stays out of the payload.
    timed: bool,
    judge: fn(&SeedStream) -> Result<Judged, RunError>,
}

fn run(experiment: &'static str, params: Value, seed: &SeedStream) -> Result<Run, RunError> {
    let params = params.as_object().cloned().unwrap_or_default();
    let (p, outcome) = catalog::execute(experiment, &params, &seed.child(experiment))?;
    Ok(Run {
        experiment,
        params: p.as_map().clone(),
        outcome,
    })
}

fn at<'a>(v: &'a Value, pointer: &str) -> Result<&'a Value, RunError> {
    v.pointer(pointer)
        .ok_or_else(|| RunError::Experiment(format!("result lacks `{pointer}`")))
}

fn num(v: &Value, pointer: &str) -> Result<f64, RunError> {
    at(v, pointer)?
        .as_f64()
        .ok_or_else(|| RunError::Experiment(format!("`{pointer}` is not a number")))
}

fn flag(v: &Value, pointer: &str) -> Result<bool, RunError> {
    at(v, pointer)?
        .as_bool()
        .ok_or_else(|| RunError::Experiment(format!("`{pointer}` is not a boolean")))
}

fn rows<'a>(v: &'a Value, pointer: &str) -> Result<&'a Vec<Value>, RunError> {
    at(v, pointer)?
        .as_array()
        .ok_or_else(|| RunError::Experiment(format!("`{pointer}` is not an array")))
}

fn rel_err(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

const M5_QUOTED: f64 = 2.3e-10;
const M5_TOLERANCE: f64 = 0.05;

fn scarcity_fraction(seed: &SeedStream) -> Result<Judged, RunError> {
    let r4 = run("scarcity.fraction", json!({"m": 4}), seed)?;
    let r5 = run("scarcity.fraction", json!({"m": 5}), seed)?;
    let r10 = run("scarcity.fraction", json!({"m": 10}), seed)?;
    let exact4 = r4.outcome.payload["numerator"] == "1" && r4.outcome.payload["denominator"] == "65536";
    let v5 = num(&r5.outcome.payload, "/fraction")?;
    let l10 = num(&r10.outcome.payload, "/log10_fraction")?;
    Ok(Judged {
        measured: format!("m=4: {}/{}; m=5: {v5:.4e}; m=10: log10 {l10:.3}", r4.outcome.payload["numerator"].as_str().unwrap_or("?"), r4.outcome.payload["denominator"].as_str().unwrap_or("?")),
        holds: exact4 && rel_err(v5, M5_QUOTED) <= M5_TOLERANCE && (-308.5..=-308.0).contains(&l10),
        runs: vec![r4, r5, r10],
    })
}

fn operational(seed: &SeedStream) -> Result<Judged, RunError> {
    let r = run("crs.mtbf", json!({"eps": 1e-9, "rate": 1000.0}), seed)?;
    let days = num(&r.outcome.payload, "/mtbf_days")?;
    let per_year = num(&r.outcome.payload, "/failures_per_year")?;
    Ok(Judged {
        measured: format!("MTBF {days:.3} days, {per_year:.3} failures/year"),
        holds: (11.5..=11.7).contains(&days) && (30.0..=32.0).contains(&per_year),
        runs: vec![r],
    })
}

fn space_filling(seed: &SeedStream) -> Result<Judged, RunError> {
    let r = run("scarcity.space_filling", json!({"dimension": 1_000_000, "resolution_bits_per_dim": 1}), seed)?;
    let p = &r.outcome.payload;
    let (log2, atoms, planck) = (at(p, "/log2_samples")?.as_u64(), at(p, "/log2_atoms_bound")?.as_u64(), at(p, "/log2_planck_times_bound")?.as_u64());
    Ok(Judged {
        measured: {
            let show = |v: Option<u64>| v.map_or("missing".to_string(), |v| v.to_string());
            format!("log2 samples {}; comparisons 2^{} atoms, 2^{} Planck times", show(log2), show(atoms), show(planck))
        },
        holds: log2 == Some(1_000_000) && atoms == Some(266) && planck == Some(204),
        runs: vec![r],
    })
}

fn reduction(seed: &SeedStream) -> Result<Judged, RunError> {
    let r = run("verification.reduction", json!({"count": 1000, "max_vars": 10}), seed)?;
    let p = &r.outcome.payload;
    let (n, agree) = (num(p, "/formulas")?, num(p, "/agreements")?);
    let (taut, non) = (num(p, "/tautologies")?, num(p, "/non_tautologies")?);
    let bound = num(p, "/error_bound_holds")?;
    Ok(Judged {
        measured: format!("{agree}/{n} agree ({taut} tautologies); error >= 2^-k for {bound}/{non}"),
        holds: n == 1000.0 && agree == n && bound == non && taut > 0.0 && non > 0.0,
        runs: vec![r],
    })
}

const SLOPE_RANGE: (f64, f64) = (0.8, 1.2);

fn scaling(seed: &SeedStream) -> Result<Judged, RunError> {
    let r = run("verification.scaling", json!({}), seed)?;
    let slope = r.outcome.timing.as_ref().and_then(|t| t["slope"].as_f64());
    Ok(Judged {
        measured: match slope {
            Some(s) => format!("slope {s:.3}"),
            None => "no slope".into(),
        },
        holds: slope.is_some_and(|s| (SLOPE_RANGE.0..=SLOPE_RANGE.1).contains(&s)),
        runs: vec![r],
    })
}

const QUOTED_SAFE_FRACTION: f64 = 0.00372;

fn scarcity_sampling(seed: &SeedStream) -> Result<Judged, RunError> {
    let r = run("scarcity.linear_sampling", json!({"n_policies": 50_000, "dim": 10, "eps": 0.01}), seed)?;
    let frac = num(&r.outcome.payload, "/safe_fraction_at_eps")?;
    let ratio = frac / QUOTED_SAFE_FRACTION;
    Ok(Judged {
        measured: format!("safe fraction {:.4}% (ratio to quoted {ratio:.2})", frac * 100.0),
        holds: frac > 0.0 && frac < 0.01 && (0.1..=10.0).contains(&ratio),
        runs: vec![r],
    })
}

fn escape(seed: &SeedStream) -> Result<Judged, RunError> {
    let r = run("geometry.escape", json!({"n_nets": 500}), seed)?;
    let p = &r.outcome.payload;
    let (non_deg, reduced) = (num(p, "/non_degenerate")?, num(p, "/reduced")?);
    let (checked, passed) = (num(p, "/halving_checked")?, num(p, "/halving_passed")?);
    Ok(Judged {
        measured: format!(
            "reduced {reduced}/{non_deg} non-degenerate; halving check {passed}/{checked}, max rel. error {:.2e}",
            num(p, "/max_halving_error")?
        ),
        holds: non_deg > 0.0 && reduced >= 0.99 * non_deg && checked > 0.0 && passed == checked,
        runs: vec![r],
    })
}

fn hits_at(stats: &Value, radius: f64) -> Result<f64, RunError> {
    rows(stats, "/rows")?
        .iter()
        .find(|r| r["tube_radius"].as_f64() == Some(radius))
        .and_then(|r| r["hits"].as_f64())
        .ok_or_else(|| RunError::Experiment(format!("no row for radius {radius}")))
}

fn ladder_non_increasing(stats: &Value) -> Result<bool, RunError> {
    let f: Vec<f64> = rows(stats, "/rows")?.iter().filter_map(|r| r["fraction"].as_f64()).collect();
    Ok(f.windows(2).all(|w| w[1] <= w[0]))
}

fn topological_trap(seed: &SeedStream) -> Result<Judged, RunError> {
    let r = run(
        "geometry.training_paths",
        json!({"n_paths": 100_000, "ambient_dim": 3, "codimension": 2, "tube_radius": 1e-3, "control": true}),
        seed,
    )?;
    let stats = rows(&r.outcome.payload, "/statistics")?;
    let (thin, control) = (&stats[0], &stats[1]);
    let (h2, h1) = (hits_at(thin, 1e-3)?, hits_at(control, 1e-3)?);
    let monotone = ladder_non_increasing(thin)? && ladder_non_increasing(control)?;
    Ok(Judged {
        measured: format!("codim-2 hits {h2}, codim-1 hits {h1} of 1e5 at r=1e-3; ladder monotone: {monotone}"),
        holds: h2 == 0.0 && h1 > 0.0 && monotone,
        runs: vec![r],
    })
}

const RARE_P: [f64; 10] = [0.1, 0.05, 0.02, 0.01, 5e-3, 2e-3, 1e-3, 1e-4, 1e-5, 1e-6];
const RARE_DELTA: [f64; 5] = [0.5, 0.2, 0.1, 0.05, 0.01];
/// Slack for comparing the library's `exp(m ln(1-p))` with the oracle.
const MISS_SLACK: f64 = 1e-9;

fn rare_events(seed: &SeedStream) -> Result<Judged, RunError> {
    let b = run("learning.rare_event_bound", json!({"p_d": RARE_P, "delta": RARE_DELTA}), seed)?;
    let mut tight = 0;
    let mut pairs = Vec::new();
    for row in rows(&b.outcome.payload, "/rows")? {
        let (p, delta) = (num(row, "/bound/spec/p_d")?, num(row, "/bound/spec/delta")?);
        let m = at(row, "/bound/m_min")?.as_u64().unwrap_or(0);
        let ok = m >= 1
            && oracle::miss_probability(p, m) <= delta * (1.0 + MISS_SLACK)
            && (m == 1 || oracle::miss_probability(p, m - 1) > delta * (1.0 - MISS_SLACK));
        tight += ok as usize;
        pairs.push((p, m));
    }
    let mut runs = vec![b];
    let mut within = 0;
    // The twenty pairs with the largest p_d.
    for (i, &(p, m)) in pairs.iter().take(20).enumerate() {
        let r = run(
            "learning.rare_observation",
            json!({"p_d": p, "m": m, "trials": 20_000}),
            &seed.child(&format!("obs{i}")),
        )?;
        let emp = num(&r.outcome.payload, "/empirical/estimate")?;
        let n = num(&r.outcome.payload, "/empirical/trials")?;
        let expected = 1.0 - oracle::miss_probability(p, m);
        let sigma = (expected * (1.0 - expected) / n).sqrt();
        within += ((emp - expected).abs() <= 3.0 * sigma) as usize;
        runs.push(r);
    }
    Ok(Judged {
        measured: format!("bound tight on {tight}/{} pairs; {within}/20 observation rates within 3 sigma", pairs.len()),
        holds: pairs.len() == 50 && tight == 50 && within == 20,
        runs,
    })
}

fn pac_bayes(seed: &SeedStream) -> Result<Judged, RunError> {
    let r = run("learning.posterior", json!({"instances": 100, "zero_prior_every": 5}), seed)?;
    let p = &r.outcome.payload;
    let (n, holds) = (num(p, "/instances")?, num(p, "/bound_holds_exactly")?);
    let (zero, zero_ok) = (num(p, "/zero_prior_instances")?, num(p, "/zero_prior_consistent")?);
    Ok(Judged {
        measured: format!("bound exact in {holds}/{n}; zero-prior instances consistent {zero_ok}/{zero}"),
        holds: n == 100.0 && holds == n && zero > 0.0 && zero_ok == zero,
        runs: vec![r],
    })
}

fn adversarial(seed: &SeedStream) -> Result<Judged, RunError> {
    let audit = run("adversarial.audit_evader", json!({"arity": 16, "audit_size": 10_000, "x_star": 65_535}), seed)?;
    let prf = run("adversarial.prf_policy", json!({"n": 16, "rho": 0.0625}), seed)?;
    let detect = run("adversarial.blackbox_detection", json!({"n": 16}), seed)?;
    let search = run("adversarial.planted_search", json!({"n_values": [12, 16, 20]}), seed)?;
    let diag = run("adversarial.diagonalization", json!({}), seed)?;

    let a = &audit.outcome.payload;
    let audit_ok = flag(a, "/audit/passes_all")? && flag(a, "/unsafe_at_trigger")? && num(a, "/audit/audited")? == 10_000.0;
    let prf_ok = flag(&prf.outcome.payload, "/trigger_fraction/within_three_sigma")?;
    let cells = rows(&detect.outcome.payload, "/rows")?;
    let detect_within = cells
        .iter()
        .filter(|c| c["report"]["within_three_sigma"].as_bool() == Some(true))
        .count();
    let searches = rows(&search.outcome.payload, "/rows")?;
    let search_ok = searches.iter().all(|s| s["meets_half_domain"].as_bool() == Some(true));
    let diag_ok = flag(&diag.outcome.payload, "/all_unaligned_with_witness")?;
    let means: Vec<String> = searches
        .iter()
        .map(|s| format!("n={}: {}", s["n"], s["mean_evaluations"]))
        .collect();
    Ok(Judged {
        measured: format!(
            "audit {}; PRF fraction {:.5}; detection {detect_within}/{} within 3 sigma; search {}; diagonalization {}",
            if audit_ok { "evaded" } else { "caught" },
            num(&prf.outcome.payload, "/trigger_fraction/fraction")?,
            cells.len(),
            means.join(", "),
            if diag_ok { "all unaligned" } else { "incomplete" },
        ),
        holds: audit_ok && prf_ok && detect_within == cells.len() && !cells.is_empty() && search_ok && diag_ok,
        runs: vec![audit, prf, detect, search, diag],
    })
}

const CRS_REL_TOLERANCE: f64 = 1e-12;

fn crs(seed: &SeedStream) -> Result<Judged, RunError> {
    let grid = [0.0, 1.0, 2.0, 3.0, 4.0];
    let fig = run("crs.trap_curves", json!({"C_grid": grid}), seed)?;
    let mut worst = 0.0f64;
    for row in rows(&fig.outcome.payload, "/curve/rows")? {
        let c = num(row, "/C")?;
        worst = worst
            .max(rel_err(num(row, "/required_eps")?, 10f64.powf(-2.0 * c - 2.0)))
            .max(rel_err(num(row, "/verification_cost")?, 10f64.powf(3.0 * c + 2.0)));
    }
    let mut runs = vec![fig];
    let mut monotone = 0;
    for i in 0..10u64 {
        let model = CrsModel::random(&mut seed.child("models").rng(i));
        let grid: Vec<f64> = (0..100).map(|j| model.c_max * j as f64 / 99.0).collect();
        let r = run("crs.trap_curves", json!({"model": model, "C_grid": grid}), &seed.index(i))?;
        monotone += flag(&r.outcome.payload, "/eps_non_increasing")? as usize;
        runs.push(r);
    }
    let unbounded = CrsModel {
        label: "linear impact".into(),
        impact: Impact::Linear { scale: 1.0 },
        ..CrsModel::figure_default()
    };
    let conv = run("crs.convergence", json!({"model": unbounded, "eps0": 1e-12, "C_limit": 1e6}), seed)?;
    let w = &conv.outcome.payload["witness"];
    let converged = w["capability"].is_number() && num(w, "/required_eps")? < 1e-12;
    let measured = format!(
        "figure-default max rel. error {worst:.1e}; {monotone}/10 random models monotone; linear-impact witness C = {}",
        w["capability"]
    );
    runs.push(conv);
    Ok(Judged {
        measured,
        holds: worst <= CRS_REL_TOLERANCE && monotone == 10 && converged,
        runs,
    })
}

static CRITERIA_TABLE: &[Criterion] = &[
    Criterion {
        id: 1,
        name: "combinatorial scarcity",
        claim: "m=4 -> 1/65536; m=5 -> 2.3e-10; m=10 -> log10 in [-308.5, -308.0]",
        tolerance: "m=4 exact; m=5 within 5% of 2.3e-10; m=10 interval; < 1 s",
        limit_seconds: 1.0,
        timed: false,
        judge: scarcity_fraction,
    },
    Criterion {
        id: 2,
        name: "operational consequence",
        claim: "eps=1e-9 at 1000 decisions/s -> failure every ~11.6 days, ~31 per year",
        tolerance: "MTBF in [11.5, 11.7] days; failures/year in [30, 32]; < 1 s",
        limit_seconds: 1.0,
        timed: false,
        judge: operational,
    },
    Criterion {
        id: 3,
        name: "space-filling barrier",
        claim: "d=1e6 at 1 bit -> 2^1000000 samples, beyond 2^266 and 2^204",
        tolerance: "log2 count exactly 1000000; constants 266 and 204; < 1 s",
        limit_seconds: 1.0,
        timed: false,
        judge: space_filling,
    },
    Criterion {
        id: 4,
        name: "verification reduction",
        claim: "pi_phi perfectly safe iff phi tautology; otherwise error >= 2^-k",
        tolerance: "1000/1000 agree with brute force; bound on every non-tautology; < 30 s",
        limit_seconds: 30.0,
        timed: false,
        judge: reduction,
    },
    Criterion {
        id: 5,
        name: "verification scaling",
        claim: "exhaustive verification time grows as 2^m",
        tolerance: "slope of log2(median time) vs m over 12..20 in [0.8, 1.2]; < 300 s",
        limit_seconds: 300.0,
        timed: true,
        judge: scaling,
    },
    Criterion {
        id: 6,
        name: "scarcity sampling",
        claim: "0.372% of random linear policies (d=10) are 0.01-safe",
        tolerance: "fraction in (0, 1%) and within a factor 10 of 0.372%; < 120 s",
        limit_seconds: 120.0,
        timed: false,
        judge: scarcity_sampling,
    },
    Criterion {
        id: 7,
        name: "geometry escape",
        claim: "a perturbation along -grad M lowers the safety margin",
        tolerance: ">= 99% of non-degenerate nets reduced; all step-halving checks <= 1e-4; < 300 s",
        limit_seconds: 300.0,
        timed: false,
        judge: escape,
    },
    Criterion {
        id: 8,
        name: "topological trap",
        claim: "gradient-flow paths miss a codimension-2 safe set",
        tolerance: "0 codim-2 hits and > 0 codim-1 hits at r=1e-3 over 1e5 paths; ladder non-increasing; < 300 s",
        limit_seconds: 300.0,
        timed: false,
        judge: topological_trap,
    },
    Criterion {
        id: 9,
        name: "rare events",
        claim: "m >= ln(1/delta)/p_d samples needed to observe a p_d disaster",
        tolerance: "m_min tight on 50/50 pairs; 20/20 rates within 3 sigma of 1-(1-p_d)^m; < 60 s",
        limit_seconds: 60.0,
        timed: false,
        judge: rare_events,
    },
    Criterion {
        id: 10,
        name: "PAC-Bayes",
        claim: "E_Q[L] >= eps_min (1 - Q(S)); P(S)=0 forces Q(S)=0",
        tolerance: "exact rational check in 100/100 instances; zero-prior instances consistent; < 60 s",
        limit_seconds: 60.0,
        timed: false,
        judge: pac_bayes,
    },
    Criterion {
        id: 11,
        name: "adversarial suite",
        claim: "audits are evadable, keyed traps are cheap to plant and costly to find, diagonalization defeats every technique",
        tolerance: "audit 100% passed and unsafe at x*; PRF and detection within 3 sigma; mean search >= 2^(n-1); all techniques unaligned; < 300 s",
        limit_seconds: 300.0,
        timed: false,
        judge: adversarial,
    },
    Criterion {
        id: 12,
        name: "capability-risk scaling",
        claim: "required eps -> 0 as capability grows without bound",
        tolerance: "figure-default curves to 1e-12 relative; 10/10 random models monotone; eps < 1e-12 reached; < 1 s",
        limit_seconds: 1.0,
        timed: false,
        judge: crs,
    },
];

const DETERMINISM_CLAIM: &str = "reproduce-all with a fixed seed yields byte-identical payloads";
const DETERMINISM_TOLERANCE: &str = "payload tree identical to the previous run in this directory";

/// Every file under `dir`, keyed by relative path.
pub fn read_tree(dir: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>, RunError> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(|e| RunError::io(&d, e))? {
            let path = entry.map_err(|e| RunError::io(&d, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = fs::read(&path).map_err(|e| RunError::io(&path, e))?;
                out.insert(path.strip_prefix(dir).expect("under dir").to_path_buf(), bytes);
            }
        }
    }
    Ok(out)
}

fn previous_payload(payload_dir: &Path, seed: u64) -> Option<BTreeMap<PathBuf, Vec<u8>>> {
    let manifest: Value = serde_json::from_slice(&fs::read(payload_dir.join("manifest.json")).ok()?).ok()?;
    (manifest["seed"].as_u64() == Some(seed)).then(|| read_tree(payload_dir).ok())?
}

fn check_writable(dir: &Path) -> Result<(), RunError> {
    create_dir(dir)?;
    let probe = dir.join(".write-test");
    fs::write(&probe, b"").map_err(|e| RunError::io(dir, e))?;
    fs::remove_file(&probe).map_err(|e| RunError::io(&probe, e))
}

struct Measured {
    criterion: &'static Criterion,
    result: Result<Judged, RunError>,
    seconds: f64,
}

fn measure(c: &'static Criterion, root: &SeedStream) -> Measured {
    let start = Instant::now();
    let result = (c.judge)(&root.child(&format!("criterion-{}", c.id)));
    Measured {
        criterion: c,
        result,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Runs every criterion with pinned configs. With `parallel`, untimed
/// criteria run concurrently after the timed benchmark has finished alone.
pub fn reproduce_all(out: &Path, seed: u64, parallel: bool) -> Result<SuiteReport, RunError> {
    check_writable(out)?;
    let start = Instant::now();
    let payload_dir = out.join("payload");
    let timing_dir = out.join("timing");
    let previous = previous_payload(&payload_dir, seed);
    for d in [&payload_dir, &timing_dir] {
        if d.exists() {
            fs::remove_dir_all(d).map_err(|e| RunError::io(d, e))?;
        }
    }
    create_dir(&payload_dir)?;
    create_dir(&timing_dir)?;

    let root = SeedStream::new(seed);
    let (timed, untimed): (Vec<&'static Criterion>, Vec<&'static Criterion>) =
        CRITERIA_TABLE.iter().partition(|c| c.timed);
    let mut measured: Vec<Measured> = timed.into_iter().map(|c| measure(c, &root)).collect();
    if parallel {
        measured.extend(untimed.into_par_iter().map(|c| measure(c, &root)).collect::<Vec<_>>());
    } else {
        measured.extend(untimed.into_iter().map(|c| measure(c, &root)));
    }
    measured.sort_by_key(|m| m.criterion.id);

    let mut rows = Vec::with_capacity(CRITERIA);
    let mut artifacts = Vec::new();
    for m in measured {
        let c = m.criterion;
        let (measured_text, holds, runs) = match m.result {
            Ok(j) => (j.measured, j.holds, j.runs),
            Err(e) => (format!("error: {e}"), false, Vec::new()),
        };
        let dir_name = format!("criterion-{:02}", c.id);
        let mut experiments = Vec::new();
        for (i, r) in runs.iter().enumerate() {
            let prefix = format!("{i:02}-{}", r.experiment);
            let config = json!({ "experiment": r.experiment, "params": r.params });
            let claim = catalog::find(r.experiment).map_or("", |e| e.claim);
            artifacts.extend(write_outcome(
                &payload_dir.join(&dir_name),
                &timing_dir.join(&dir_name),
                &prefix,
                claim,
                &config,
                &r.outcome,
                0.0,
            )?);
            experiments.push(prefix);
        }
        let mut record = json!({
            "id": c.id,
            "name": c.name,
            "claim": c.claim,
            "tolerance": c.tolerance,
            "experiments": experiments,
        });
        if !c.timed {
            record["measured"] = json!(measured_text);
            record["claim_holds"] = json!(holds);
        }
        let path = payload_dir.join(format!("{dir_name}.json"));
        write_json(&path, &record)?;
        artifacts.push(path);
        let within_time = m.seconds <= c.limit_seconds;
        rows.push(SummaryRow {
            id: c.id,
            name: c.name,
            claim: c.claim,
            measured: if within_time {
                measured_text
            } else {
                format!("{measured_text}; took {:.2} s", m.seconds)
            },
            tolerance: c.tolerance,
            claim_holds: holds,
            seconds: m.seconds,
            limit_seconds: c.limit_seconds,
            status: if holds && within_time { Status::Pass } else { Status::Fail },
        });
    }

    let manifest = payload_dir.join("manifest.json");
    write_json(&manifest, &json!({ "seed": seed, "version": VERSION, "criteria": CRITERIA }))?;
    artifacts.push(manifest);

    let det_start = Instant::now();
    let current = read_tree(&payload_dir)?;
    let (measured, status) = match previous {
        None => ("no earlier run with this seed in the output directory".to_string(), Status::Skipped),
        Some(prev) => {
            let differing: Vec<String> = prev
                .keys()
                .chain(current.keys())
                .filter(|k| prev.get(*k) != current.get(*k))
                .map(|k| k.display().to_string())
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            if differing.is_empty() {
                (format!("{} payload files identical", current.len()), Status::Pass)
            } else {
                (format!("{} files differ, e.g. {}", differing.len(), differing[0]), Status::Fail)
            }
        }
    };
    rows.push(SummaryRow {
        id: DETERMINISM_ID,
        name: "determinism",
        claim: DETERMINISM_CLAIM,
        measured,
        tolerance: DETERMINISM_TOLERANCE,
        claim_holds: status == Status::Pass,
        seconds: det_start.elapsed().as_secs_f64(),
        limit_seconds: f64::INFINITY,
        status,
    });

    let summary_csv = out.join("summary.csv");
    let header: Vec<String> = ["id", "criterion", "claim", "measured", "tolerance", "seconds", "limit_seconds", "status"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.id.to_string(),
                r.name.to_string(),
                r.claim.to_string(),
                r.measured.clone(),
                r.tolerance.to_string(),
                format!("{:.3}", r.seconds),
                r.limit_seconds.to_string(),
                r.status.label().to_string(),
            ]
        })
        .collect();
    write_csv(&summary_csv, &header, &table)?;
    artifacts.push(summary_csv);
    let mut report = SuiteReport {
        seed,
        version: VERSION,
        rows,
        duration_secs: start.elapsed().as_secs_f64(),
        artifacts,
    };
    let summary_json = out.join("summary.json");
    report.artifacts.push(summary_json.clone());
    write_json(&summary_json, &report)?;
    Ok(report)
}

/// One line per criterion.
pub fn format_summary(report: &SuiteReport) -> String {
    report
        .rows
        .iter()
        .map(|r| format!("{} [{:>2}] {}: {} (tolerance: {}; {:.2} s)\n", r.status.label(), r.id, r.name, r.measured, r.tolerance, r.seconds))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criteria_are_numbered_in_order() {
        let ids: Vec<u8> = CRITERIA_TABLE.iter().map(|c| c.id).collect();
        assert_eq!(ids, (1..DETERMINISM_ID).collect::<Vec<_>>());
        assert_eq!(CRITERIA_TABLE.len() + 1, CRITERIA);
        assert_eq!(CRITERIA_TABLE.iter().filter(|c| c.timed).count(), 1);
    }

    #[test]
    fn fast_criteria_hold() {
        let root = SeedStream::new(42);
        for id in [1u8, 2, 3, 12] {
            let c = &CRITERIA_TABLE[id as usize - 1];
            let j = (c.judge)(&root.child("t")).unwrap();
            assert!(j.holds, "criterion {id}: {}", j.measured);
        }
    }
}
