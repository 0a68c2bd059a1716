//! Named experiments: each maps a parameter schema onto library operations.

use rand::Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};
use traplab_core::adversarial::{
    blackbox_detection_experiment, build_audit_evader, build_prf_policy, check_diagonalization, crypto_threshold,
    diagonal_policy, planted_trigger_search_cost, prf_trigger_fraction, run_audit, stakeholder_union_coverage,
    trigger_set_disagreement, AuditSuite, StakeholderSet, TechniqueRegistry,
};
use traplab_core::crs::{
    acceptable_risk, convergence_witness, emit_trap_curves, fn_curve_check, operational_failure_rate, required_epsilon,
    CrsModel,
};
use traplab_core::geometry::{
    escape_experiment, gradient_alignment_experiment, multi_path_trap, random_safe_network, safety_margin,
    simulate_training_paths_multi, AlignmentTask, Dynamics, EscapeExperimentConfig, EscapeOptions, GridDomain,
    PathBudget, TaskVariant, ThinSafeSet,
};
use traplab_core::learning::{
    eps_safe_set_monotonicity, pac_bayes_lower_bound, rare_event_sample_bound, simulate_rare_observation,
    toy_posterior_experiment, PolicySampler, PosteriorConfig, PriorSpec, RareEventSpec,
};
use traplab_core::policy::{
    alignment_error_exact, evaluate_relu, hazard_probability, is_eps_safe, BooleanPolicy, HazardModel, LinearPolicy,
    ReluNetwork, UnsafeRegion,
};
use traplab_core::scarcity::{
    incompressibility_verdict, safe_policy_fraction, sample_linear_policy_hazards, space_filling_cost,
};
use traplab_core::verification::{
    measure_verification_scaling, parse_formula, policy_from_formula, random_formula, random_kcnf,
    separating_threshold, verify_eps_safety, verify_perfect_safety, PropositionalFormula, ScalingOptions,
};
use traplab_core::SeedStream;

use crate::error::RunError;
use crate::oracle;
use crate::params::{param, required, Kind, ParamSpec, Params};

/// A CSV table emitted alongside the JSON payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Holds wall-clock measurements; excluded from deterministic payloads.
    pub timed: bool,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            timed: false,
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// Result of one experiment: a deterministic payload plus optional timing.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub payload: Value,
    pub timing: Option<Value>,
    pub tables: Vec<Table>,
}

impl Outcome {
    fn new(payload: Value) -> Self {
        Self {
            payload,
            timing: None,
            tables: Vec::new(),
        }
    }

    fn of<T: Serialize>(v: &T) -> Result<Self, RunError> {
        Ok(Self::new(to_value(v)?))
    }

    fn table(mut self, t: Table) -> Self {
        self.tables.push(t);
        self
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, RunError> {
    serde_json::to_value(v).map_err(|e| RunError::Experiment(format!("serializing result: {e}")))
}

pub type Runner = fn(&Params, &SeedStream) -> Result<Outcome, RunError>;

pub struct Experiment {
    pub name: &'static str,
    /// The result the experiment exercises.
    pub claim: &'static str,
    /// Library operations the experiment reaches.
    pub ops: &'static [&'static str],
    pub params: &'static [ParamSpec],
    /// Wall-clock benchmark; never run concurrently with other work.
    pub timed: bool,
    pub run: Runner,
}

#[derive(Debug, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub claim: &'static str,
    pub ops: &'static [&'static str],
    pub params: &'static [ParamSpec],
    pub timed: bool,
}

pub fn find(name: &str) -> Option<&'static Experiment> {
    CATALOG.iter().find(|e| e.name == name)
}

pub fn list_experiments() -> Vec<CatalogEntry> {
    CATALOG
        .iter()
        .map(|e| CatalogEntry {
            name: e.name,
            claim: e.claim,
            ops: e.ops,
            params: e.params,
            timed: e.timed,
        })
        .collect()
}

/// Validates `params` against the experiment's schema and runs it.
pub fn execute(name: &str, params: &Map<String, Value>, seed: &SeedStream) -> Result<(Params, Outcome), RunError> {
    let exp = find(name).ok_or_else(|| RunError::Config(format!("unknown experiment `{name}`")))?;
    let p = Params::validate(exp.params, params)?;
    let out = (exp.run)(&p, seed)?;
    Ok((p, out))
}

fn f(v: f64) -> String {
    v.to_string()
}

fn model_param(p: &Params) -> Result<CrsModel, RunError> {
    let model: Option<CrsModel> = p.get("model")?;
    let model = model.unwrap_or_else(CrsModel::figure_default);
    model.validate()?;
    Ok(model)
}

fn key_param(p: &Params, name: &str) -> Result<Vec<u8>, RunError> {
    Ok(p.get::<String>(name)?.into_bytes())
}

pub static CATALOG: &[Experiment] = &[
    Experiment {
        name: "policy.alignment_error",
        claim: "Alignment error and eps-robust safety (definitions)",
        ops: &["alignment_error_exact", "is_eps_safe"],
        params: &[
            param("arity", Kind::Integer, "4", "input bits m"),
            param("catastrophic", Kind::IntegerList, "[]", "catastrophic input indices"),
            param("eps", Kind::Number, "0.0", "tolerance"),
        ],
        timed: false,
        run: |p, _| {
            let policy = BooleanPolicy::with_catastrophic(p.u32("arity")?, p.get::<Vec<u64>>("catastrophic")?)?;
            let error = alignment_error_exact(&policy)?;
            let eps = p.f64("eps")?;
            Ok(Outcome::new(json!({
                "error": to_value(&error)?,
                "value": error.value(),
                "eps": eps,
                "eps_safe": is_eps_safe(&policy, eps)?,
            })))
        },
    },
    Experiment {
        name: "policy.hazard",
        claim: "Harm and safety of a linear threshold policy (definition)",
        ops: &["hazard_probability"],
        params: &[
            param("weights", Kind::NumberList, "[1.0, 0.5, -0.25]", "policy weights"),
            param("bias", Kind::Number, "0.0", "policy bias"),
            param("threshold", Kind::Number, "0.7", "unsafe iff x_1 > threshold"),
            param("n_samples", Kind::Integer, "100000", "Monte Carlo inputs"),
        ],
        timed: false,
        run: |p, seed| {
            let weights: Vec<f64> = p.get("weights")?;
            let model = HazardModel::new(
                weights.len(),
                UnsafeRegion::FirstCoordinateAbove {
                    threshold: p.f64("threshold")?,
                },
            )?;
            let policy = LinearPolicy::new(weights, p.f64("bias")?)?;
            let est = hazard_probability(&policy, &model, p.u64("n_samples")?, seed)?;
            Ok(Outcome::new(json!({ "model": model.description, "hazard": to_value(&est)? })))
        },
    },
    Experiment {
        name: "policy.relu_harm",
        claim: "Harm and safety of a ReLU policy (definition)",
        ops: &["evaluate_relu"],
        params: &[
            param("layer_dims", Kind::IntegerList, "[2, 8, 1]", "input, hidden..., output widths"),
            param("x", Kind::NumberList, "[0.5, 0.5]", "input point"),
        ],
        timed: false,
        run: |p, seed| {
            let dims: Vec<usize> = p.get("layer_dims")?;
            let net = ReluNetwork::random(&dims, &mut seed.rng(0))?;
            let x: Vec<f64> = p.get("x")?;
            let out = evaluate_relu(&net, &x)?;
            Ok(Outcome::new(json!({
                "layer_dims": dims,
                "x": x,
                "output": net.forward(&x)?,
                "outcome": to_value(&out)?,
            })))
        },
    },
    Experiment {
        name: "verification.reduction",
        claim: "eps-Robust Verification Complexity (tautology reduction)",
        ops: &["parse_formula", "policy_from_formula", "verify_perfect_safety"],
        params: &[
            param("formula", Kind::String, "\"\"", "single formula; empty draws random ones"),
            param("count", Kind::Integer, "1000", "random formulas"),
            param("max_vars", Kind::Integer, "10", "largest k for random formulas"),
        ],
        timed: false,
        run: run_reduction,
    },
    Experiment {
        name: "verification.eps_threshold",
        claim: "eps-Robust Verification Complexity (threshold check)",
        ops: &["verify_eps_safety"],
        params: &[
            param("formula", Kind::String, "\"x1 | x2\"", "formula to reduce"),
            param("eps", Kind::Number, "0.0", "threshold in [0, 1]"),
        ],
        timed: false,
        run: |p, _| {
            let phi = parse_formula(&p.get::<String>("formula")?).map_err(traplab_core::Error::from)?;
            let reduced = policy_from_formula(&phi)?;
            let verdict = verify_eps_safety(&reduced.policy, p.f64("eps")?)?;
            Ok(Outcome::new(json!({
                "formula": phi.to_string(),
                "num_vars": phi.num_vars(),
                "verdict": to_value(&verdict)?,
                "separating_threshold": separating_threshold(phi.num_vars()),
            })))
        },
    },
    Experiment {
        name: "verification.scaling",
        claim: "Sharp Verification Threshold",
        ops: &["measure_verification_scaling"],
        params: &[
            param("m_values", Kind::IntegerList, "[12, 13, 14, 15, 16, 17, 18, 19, 20]", "variable counts"),
            param("formulas_per_m", Kind::Integer, "3", "instances per m"),
            param("samples_per_instance", Kind::Integer, "5", "timed samples (>= 5)"),
            param("warmup_rounds", Kind::Integer, "1", "untimed calls per instance"),
            param("min_sample_ns", Kind::Integer, "1000000", "minimum duration of one sample"),
        ],
        timed: true,
        run: |p, seed| {
            let options = ScalingOptions {
                samples_per_instance: p.usize("samples_per_instance")?,
                warmup_rounds: p.usize("warmup_rounds")?,
                min_sample_ns: p.u64("min_sample_ns")?,
            };
            let report = measure_verification_scaling(&p.get::<Vec<u32>>("m_values")?, p.usize("formulas_per_m")?, seed, &options)?;
            let mut table = Table::new("timing", &["m", "trials", "median_ns", "repetitions"]);
            table.timed = true;
            for r in &report.rows {
                table.push(vec![r.m.to_string(), r.trials.to_string(), f(r.median_ns), r.repetitions.to_string()]);
            }
            let instances: Vec<Value> = report.rows.iter().map(|r| json!({"m": r.m, "clauses": r.clauses})).collect();
            let mut out = Outcome::new(json!({
                "instance_model": report.instance_model,
                "time_unit": report.time_unit,
                "instances": instances,
            }))
            .table(table);
            out.timing = Some(json!({
                "slope": report.slope,
                "clock_granularity_ns": report.clock_granularity_ns,
                "rows": to_value(&report.rows)?,
            }));
            Ok(out)
        },
    },
    Experiment {
        name: "scarcity.fraction",
        claim: "Combinatorial Scarcity of Safe Policies",
        ops: &["safe_policy_fraction"],
        params: &[param("m", Kind::Integer, "4", "input bits")],
        timed: false,
        run: |p, _| {
            let m = p.u32("m")?;
            let r = safe_policy_fraction(m)?;
            let (num, den) = r.exact.clone().unzip();
            Ok(Outcome::new(json!({
                "m": m,
                "log10_fraction": r.log10_value,
                "fraction": r.value(),
                "numerator": num,
                "denominator": den,
            })))
        },
    },
    Experiment {
        name: "scarcity.space_filling",
        claim: "Measure Zero for Safe Policies (space-filling barrier)",
        ops: &["space_filling_cost"],
        params: &[
            param("dimension", Kind::Integer, "1000000", "parameter dimension d"),
            param("resolution_bits_per_dim", Kind::Integer, "1", "grid bits per coordinate"),
        ],
        timed: false,
        run: |p, _| Outcome::of(&space_filling_cost(p.u64("dimension")?, p.u64("resolution_bits_per_dim")?)?),
    },
    Experiment {
        name: "scarcity.linear_sampling",
        claim: "Measure Zero for Safe Policies (sampled linear policies)",
        ops: &["sample_linear_policy_hazards"],
        params: &[
            param("n_policies", Kind::Integer, "50000", "random linear policies"),
            param("dim", Kind::Integer, "10", "input dimension"),
            param("samples_per_policy", Kind::Integer, "4000", "hazard samples per policy"),
            param("eps", Kind::Number, "0.01", "safety tolerance"),
            param("threshold", Kind::Number, "0.7", "unsafe iff x_1 > threshold"),
        ],
        timed: false,
        run: |p, seed| {
            let model = HazardModel::new(
                p.usize("dim")?,
                UnsafeRegion::FirstCoordinateAbove {
                    threshold: p.f64("threshold")?,
                },
            )?;
            let h = sample_linear_policy_hazards(
                p.u64("n_policies")?,
                &model,
                p.u64("samples_per_policy")?,
                p.f64("eps")?,
                seed,
            )?;
            let mut table = Table::new("histogram", &["bin_low", "bin_high", "count"]);
            for (i, c) in h.counts.iter().enumerate() {
                table.push(vec![f(h.bin_edges[i]), f(h.bin_edges[i + 1]), c.to_string()]);
            }
            Ok(Outcome::of(&h)?.table(table))
        },
    },
    Experiment {
        name: "scarcity.incompressibility",
        claim: "The Incompressibility Barrier",
        ops: &["incompressibility_verdict"],
        params: &[
            param("rule_bits", Kind::Integer, "1024", "incompressible rule bits K"),
            param("capacity_bits", Kind::Integer, "100", "program capacity C"),
        ],
        timed: false,
        run: |p, _| {
            let v = incompressibility_verdict(p.u64("rule_bits")?, p.u64("capacity_bits")?);
            let mut out = to_value(&v)?;
            out["fraction_bound"] = json!(v.fraction_bound());
            Ok(Outcome::new(out))
        },
    },
    Experiment {
        name: "geometry.margin",
        claim: "Topological Alignment Trap (safety margin)",
        ops: &["safety_margin"],
        params: &[
            param("input_dim", Kind::Integer, "2", "input dimension"),
            param("resolution", Kind::Integer, "10", "grid points per axis (>= 8)"),
            param("max_hidden_layers", Kind::Integer, "2", "hidden layers drawn from 0..=this"),
            param("max_width", Kind::Integer, "8", "largest hidden width"),
        ],
        timed: false,
        run: |p, seed| {
            let config = EscapeExperimentConfig {
                input_dim: p.usize("input_dim")?,
                resolution: p.usize("resolution")?,
                max_hidden_layers: p.usize("max_hidden_layers")?,
                max_width: p.usize("max_width")?,
                ..EscapeExperimentConfig::default()
            };
            let domain = GridDomain::unit(config.input_dim, config.resolution)?;
            let net = random_safe_network(&config, &domain, &mut seed.rng(0))?;
            let r = safety_margin(&net, &domain)?;
            Ok(Outcome::new(json!({ "layer_dims": net.layer_dims(), "result": to_value(&r)? })))
        },
    },
    Experiment {
        name: "geometry.escape",
        claim: "Topological Alignment Trap (margin escape)",
        ops: &["escape_perturbation"],
        params: &[
            param("n_nets", Kind::Integer, "500", "random safe networks"),
            param("input_dim", Kind::Integer, "2", "input dimension"),
            param("resolution", Kind::Integer, "10", "grid points per axis (>= 8)"),
            param("max_hidden_layers", Kind::Integer, "2", "hidden layers drawn from 0..=this"),
            param("max_width", Kind::Integer, "8", "largest hidden width"),
            param("step_alpha", Kind::Number, "0.01", "initial step along -grad M"),
            param("max_iters", Kind::Integer, "3", "descent iterations"),
        ],
        timed: false,
        run: |p, seed| {
            let config = EscapeExperimentConfig {
                n_nets: p.usize("n_nets")?,
                input_dim: p.usize("input_dim")?,
                resolution: p.usize("resolution")?,
                max_hidden_layers: p.usize("max_hidden_layers")?,
                max_width: p.usize("max_width")?,
                options: EscapeOptions {
                    step_alpha: p.f64("step_alpha")?,
                    max_iters: p.usize("max_iters")?,
                    ..EscapeOptions::default()
                },
            };
            Outcome::of(&escape_experiment(&config, seed)?)
        },
    },
    Experiment {
        name: "geometry.training_paths",
        claim: "Dynamic Consequence: The Topological Alignment Trap",
        ops: &["simulate_training_paths"],
        params: &[
            param("n_paths", Kind::Integer, "100000", "gradient-flow paths"),
            param("ambient_dim", Kind::Integer, "3", "parameter dimension n"),
            param("codimension", Kind::Integer, "2", "codimension of the safe set"),
            param("distance", Kind::Number, "3.0", "distance of the safe set from the origin"),
            param("tube_radius", Kind::Number, "0.001", "hit threshold"),
            param("radii", Kind::NumberList, "[0.1, 0.01, 0.001, 0.0001]", "radius ladder"),
            param("control", Kind::Bool, "true", "also score the codimension-1 hyperplane"),
            param("step_size", Kind::Number, "0.01", "Euler step"),
            param("max_steps", Kind::Integer, "10000", "steps per path"),
            param("noise", Kind::Number, "0.0", "Langevin noise scale"),
        ],
        timed: false,
        run: run_training_paths,
    },
    Experiment {
        name: "geometry.multi_path_trap",
        claim: "Multi-Path Topological Alignment Trap",
        ops: &["multi_path_trap"],
        params: &[
            param("budget_c", Kind::Number, "10.0", "path budget c n^k: c"),
            param("budget_k", Kind::Integer, "3", "path budget c n^k: k"),
            param("ambient_dims", Kind::IntegerList, "[3, 4, 5, 6]", "dimensions n"),
            param("codimension", Kind::Integer, "2", "codimension of the safe set"),
            param("tube_radius", Kind::Number, "0.001", "hit threshold"),
            param("max_steps", Kind::Integer, "2000", "steps per path"),
        ],
        timed: false,
        run: |p, seed| {
            let budget = PathBudget {
                c: p.f64("budget_c")?,
                k: p.u32("budget_k")?,
            };
            let dynamics = Dynamics {
                max_steps: p.usize("max_steps")?,
                ..Dynamics::default()
            };
            let radius = p.f64("tube_radius")?;
            let mut table = Table::new("hits", &["n", "paths", "hits", "min_distance"]);
            let mut rows = Vec::new();
            for n in p.get::<Vec<usize>>("ambient_dims")? {
                let s = seed.child(&format!("n{n}"));
                let set = ThinSafeSet::random(n, p.usize("codimension")?, 3.0, radius, &mut s.child("set").rng(0))?;
                let st = multi_path_trap(&budget, &set, &dynamics, &[radius], &s)?;
                table.push(vec![n.to_string(), st.n_paths.to_string(), st.hits.to_string(), f(st.min_distance)]);
                rows.push(to_value(&st)?);
            }
            Ok(Outcome::new(json!({ "budget": to_value(&budget)?, "statistics": rows })).table(table))
        },
    },
    Experiment {
        name: "geometry.gradient_alignment",
        claim: "The Capability-Safety Asymmetry",
        ops: &["gradient_alignment_experiment"],
        params: &[
            param("variant", Kind::String, "\"exceptions\"", "exceptions | identical | negated"),
            param("n_points", Kind::Integer, "200", "random networks"),
        ],
        timed: false,
        run: |p, seed| {
            let task = AlignmentTask {
                variant: p.get::<TaskVariant>("variant")?,
                ..AlignmentTask::default()
            };
            let r = gradient_alignment_experiment(&task, p.usize("n_points")?, seed)?;
            let mut table = Table::new("cosine_histogram", &["bin_low", "bin_high", "count"]);
            for (i, c) in r.counts.iter().enumerate() {
                table.push(vec![f(r.bin_edges[i]), f(r.bin_edges[i + 1]), c.to_string()]);
            }
            Ok(Outcome::of(&r)?.table(table))
        },
    },
    Experiment {
        name: "learning.rare_event_bound",
        claim: "The Rare Disaster Training Paradox (sample bound)",
        ops: &["rare_event_sample_bound"],
        params: &[
            param("p_d", Kind::NumberList, "[0.001]", "disaster probabilities"),
            param("delta", Kind::NumberList, "[0.05]", "allowed miss probabilities"),
        ],
        timed: false,
        run: |p, _| {
            let mut table = Table::new("bounds", &["p_d", "delta", "m_min", "coarse_bound", "observation_at_m_min"]);
            let mut rows = Vec::new();
            for &pd in &p.get::<Vec<f64>>("p_d")? {
                for &delta in &p.get::<Vec<f64>>("delta")? {
                    let spec = RareEventSpec::new(pd, delta)?;
                    let b = rare_event_sample_bound(&spec);
                    table.push(vec![f(pd), f(delta), b.m_min.to_string(), f(b.coarse_bound), f(b.observation_at_m_min)]);
                    rows.push(json!({
                        "bound": to_value(&b)?,
                        "miss_at_m_min": spec.miss_probability(b.m_min),
                        "miss_below_m_min": spec.miss_probability(b.m_min - 1),
                    }));
                }
            }
            Ok(Outcome::new(json!({ "rows": rows })).table(table))
        },
    },
    Experiment {
        name: "learning.rare_observation",
        claim: "The Rare Disaster Training Paradox (observation rate)",
        ops: &["simulate_rare_observation"],
        params: &[
            param("p_d", Kind::Number, "0.001", "disaster probability"),
            param("m", Kind::Integer, "1000", "samples per trial"),
            param("trials", Kind::Integer, "20000", "independent trials (>= 1000)"),
        ],
        timed: false,
        run: |p, seed| Outcome::of(&simulate_rare_observation(p.f64("p_d")?, p.u64("m")?, p.u64("trials")?, seed)?),
    },
    Experiment {
        name: "learning.pac_bayes_bound",
        claim: "PAC-Bayes Alignment Lower Bound",
        ops: &["pac_bayes_lower_bound"],
        params: &[
            param("eps_min", Kind::Number, "0.1", "least risk of an unsafe hypothesis"),
            param("q_safe", Kind::Number, "0.5", "posterior mass on the safe set"),
        ],
        timed: false,
        run: |p, _| {
            let (e, q) = (p.f64("eps_min")?, p.f64("q_safe")?);
            Ok(Outcome::new(json!({ "eps_min": e, "q_safe": q, "lower_bound": pac_bayes_lower_bound(e, q)? })))
        },
    },
    Experiment {
        name: "learning.posterior",
        claim: "PAC-Bayes Alignment Lower Bound (exact posteriors)",
        ops: &["toy_posterior_experiment"],
        params: &[
            param("config", Kind::Object, "null", "explicit posterior config; null draws random instances"),
            param("instances", Kind::Integer, "100", "random instances"),
            param("zero_prior_every", Kind::Integer, "5", "every k-th random instance gets no prior safe mass (0: never)"),
        ],
        timed: false,
        run: run_posterior,
    },
    Experiment {
        name: "learning.eps_monotonicity",
        claim: "eps-Bound Inheritance (nested eps-safe sets)",
        ops: &["eps_safe_set_monotonicity"],
        params: &[
            param("sampler", Kind::Object, "{\"kind\": \"uniform_table\", \"arity\": 4}", "policy sampler"),
            param("eps_grid", Kind::NumberList, "[0.0, 0.125, 0.25, 0.5, 1.0]", "ascending tolerances"),
            param("n_samples", Kind::Integer, "100000", "sampled policies"),
        ],
        timed: false,
        run: |p, seed| {
            let sampler: PolicySampler = p.get("sampler")?;
            let r = eps_safe_set_monotonicity(&sampler, &p.get::<Vec<f64>>("eps_grid")?, p.u64("n_samples")?, seed)?;
            let mut table = Table::new("measure", &["eps", "estimate", "ci_low", "ci_high"]);
            for row in &r.rows {
                let e = &row.estimate;
                table.push(vec![f(row.eps), f(e.estimate), f(e.ci_low), f(e.ci_high)]);
            }
            Ok(Outcome::of(&r)?.table(table))
        },
    },
    Experiment {
        name: "adversarial.audit_evader",
        claim: "Incompleteness of Static Audits",
        ops: &["build_audit_evader"],
        params: &[
            param("arity", Kind::Integer, "16", "input bits"),
            param("audit_size", Kind::Integer, "10000", "audited inputs 0..size"),
            param("x_star", Kind::Integer, "65535", "untested trigger"),
        ],
        timed: false,
        run: |p, _| {
            let audit = AuditSuite::prefix(p.u32("arity")?, p.u64("audit_size")?)?;
            let b = build_audit_evader(&audit, p.u64("x_star")?)?;
            let outcome = run_audit(&b.policy, &audit)?;
            Ok(Outcome::new(json!({
                "trigger": b.trigger,
                "unsafe_at_trigger": b.policy.is_catastrophic(b.trigger),
                "audit": to_value(&outcome)?,
            })))
        },
    },
    Experiment {
        name: "adversarial.prf_policy",
        claim: "Trap Universality (keyed trigger sets)",
        ops: &["build_prf_policy"],
        params: &[
            param("key", Kind::String, "\"traplab\"", "secret key"),
            param("other_key", Kind::String, "\"traplab-2\"", "second key for the disagreement check"),
            param("n", Kind::Integer, "16", "input bits"),
            param("rho", Kind::Number, "0.0625", "trigger density"),
        ],
        timed: false,
        run: |p, _| {
            let (n, rho) = (p.u32("n")?, p.f64("rho")?);
            let a = build_prf_policy(&key_param(p, "key")?, n, rho)?;
            let b = build_prf_policy(&key_param(p, "other_key")?, n, rho)?;
            Ok(Outcome::new(json!({
                "trigger_fraction": to_value(&prf_trigger_fraction(&a))?,
                "disagreement_with_other_key": trigger_set_disagreement(&a, &b)?,
                "independent_key_expectation": 2.0 * rho * (1.0 - rho),
            })))
        },
    },
    Experiment {
        name: "adversarial.blackbox_detection",
        claim: "Trap Universality (black-box detection)",
        ops: &["blackbox_detection_experiment"],
        params: &[
            param("key", Kind::String, "\"traplab\"", "secret key"),
            param("n", Kind::Integer, "16", "input bits"),
            param("rho", Kind::NumberList, "[0.001, 0.01, 0.05]", "trigger densities"),
            param("q", Kind::IntegerList, "[10, 100, 1000]", "query budgets"),
            param("trials", Kind::Integer, "2000", "detection trials per cell"),
        ],
        timed: false,
        run: |p, seed| {
            let key = key_param(p, "key")?;
            let mut table = Table::new("detection", &["rho", "q", "detection", "expected", "expected_nominal", "sigmas"]);
            let mut rows = Vec::new();
            for &rho in &p.get::<Vec<f64>>("rho")? {
                let policy = build_prf_policy(&key, p.u32("n")?, rho)?;
                for &q in &p.get::<Vec<u64>>("q")? {
                    let r = blackbox_detection_experiment(&policy, q, p.u64("trials")?, &seed.child(&format!("{rho}/{q}")))?;
                    table.push(vec![
                        f(rho),
                        q.to_string(),
                        f(r.detection.estimate),
                        f(r.expected),
                        f(r.expected_nominal),
                        f(r.sigmas),
                    ]);
                    rows.push(json!({ "rho": rho, "report": to_value(&r)? }));
                }
            }
            Ok(Outcome::new(json!({ "rows": rows })).table(table))
        },
    },
    Experiment {
        name: "adversarial.planted_search",
        claim: "Trap Universality (exhaustive search cost)",
        ops: &["planted_trigger_search_cost"],
        params: &[
            param("n_values", Kind::IntegerList, "[12, 16, 20]", "input bits"),
            param("keys", Kind::Integer, "16", "random keys per n"),
        ],
        timed: false,
        run: |p, seed| {
            let mut rows = Vec::new();
            for n in p.get::<Vec<u32>>("n_values")? {
                let keys: Vec<Vec<u8>> = (0..p.u64("keys")?)
                    .map(|i| traplab_core::adversarial::random_key(&mut seed.child(&format!("n{n}")).rng(i), 16))
                    .collect();
                let r = planted_trigger_search_cost(n, &keys)?;
                rows.push(json!({
                    "n": n,
                    "keys": r.keys,
                    "mean_evaluations": r.mean_evaluations,
                    "half_domain": r.half_domain,
                    "meets_half_domain": r.meets_half_domain,
                    "min_single_scan": r.ascending.iter().chain(&r.descending).min(),
                }));
            }
            Ok(Outcome::new(json!({ "rows": rows })))
        },
    },
    Experiment {
        name: "adversarial.crypto_threshold",
        claim: "Trap Universality (cryptographic threshold)",
        ops: &["crypto_threshold"],
        params: &[param("d", Kind::Integer, "1000", "domain parameter d")],
        timed: false,
        run: |p, _| {
            let d = p.u64("d")?;
            Ok(Outcome::new(json!({ "d": d, "tau": crypto_threshold(d)? })))
        },
    },
    Experiment {
        name: "adversarial.diagonalization",
        claim: "No Universal Alignment Technique",
        ops: &["diagonal_policy", "check_diagonalization"],
        params: &[
            param("slice_bits", Kind::Integer, "2", "bits selecting the slice"),
            param("data_bits", Kind::Integer, "8", "bits within a slice"),
        ],
        timed: false,
        run: |p, _| {
            let registry = TechniqueRegistry::shipped();
            let d = diagonal_policy(&registry, p.u32("slice_bits")?, p.u32("data_bits")?)?;
            let verdicts = check_diagonalization(&registry, &d)?;
            let all = verdicts.iter().all(|v| v.unaligned() && v.witness.is_some());
            Ok(Outcome::new(json!({
                "techniques": registry.names(),
                "verdicts": to_value(&verdicts)?,
                "all_unaligned_with_witness": all,
            })))
        },
    },
    Experiment {
        name: "adversarial.stakeholders",
        claim: "The Movable Goalpost / Epistemic Fragility",
        ops: &["stakeholder_union_coverage"],
        params: &[
            param("stakeholders", Kind::Integer, "10", "number of stakeholders"),
            param("behaviors", Kind::Integer, "1000", "behaviour space size"),
            param("fraction", Kind::Number, "0.3", "share each stakeholder declares unsafe"),
        ],
        timed: false,
        run: |p, seed| {
            let set = StakeholderSet::random(p.usize("stakeholders")?, p.u64("behaviors")?, p.f64("fraction")?, seed)?;
            let r = stakeholder_union_coverage(&set)?;
            let mut table = Table::new("coverage", &["stakeholders", "covered", "safe_remaining"]);
            for s in &r.incremental {
                table.push(vec![s.stakeholders.to_string(), s.covered.to_string(), s.safe_remaining.to_string()]);
            }
            Ok(Outcome::of(&r)?.table(table))
        },
    },
    Experiment {
        name: "crs.acceptable_risk",
        claim: "The CRS Dynamic",
        ops: &["acceptable_risk", "required_epsilon"],
        params: &[
            param("model", Kind::Object, "null", "CRS model; null is the figure-default model"),
            param("C", Kind::Number, "2.0", "capability"),
        ],
        timed: false,
        run: |p, _| {
            let model = model_param(p)?;
            let c = p.f64("C")?;
            Ok(Outcome::new(json!({
                "model": to_value(&model)?,
                "C": c,
                "acceptable_risk": to_value(&acceptable_risk(&model, c)?)?,
                "required_epsilon": to_value(&required_epsilon(&model, c)?)?,
            })))
        },
    },
    Experiment {
        name: "crs.fn_curve",
        claim: "F-N Curve and Societal Risk Tolerance",
        ops: &["fn_curve_check"],
        params: &[
            required("F", Kind::Number, "event frequency"),
            required("N", Kind::Number, "fatalities per event"),
            param("alpha", Kind::Number, "1.0", "risk aversion exponent"),
            param("k", Kind::Number, "0.01", "tolerance constant"),
        ],
        timed: false,
        run: |p, _| Outcome::of(&fn_curve_check(p.f64("F")?, p.f64("N")?, p.f64("alpha")?, p.f64("k")?)?),
    },
    Experiment {
        name: "crs.mtbf",
        claim: "Operational consequence of a fixed error rate",
        ops: &["operational_failure_rate"],
        params: &[
            param("eps", Kind::Number, "1e-9", "catastrophe probability per decision"),
            param("rate", Kind::Number, "1000.0", "decisions per second"),
        ],
        timed: false,
        run: |p, _| Outcome::of(&operational_failure_rate(p.f64("eps")?, p.f64("rate")?)?),
    },
    Experiment {
        name: "crs.trap_curves",
        claim: "The CRS Dynamic (trap curves)",
        ops: &["emit_trap_curves"],
        params: &[
            param("model", Kind::Object, "null", "CRS model; null is the figure-default model"),
            param("C_grid", Kind::NumberList, "[0.0, 1.0, 2.0, 3.0, 4.0]", "ascending capabilities"),
        ],
        timed: false,
        run: |p, _| {
            let model = model_param(p)?;
            let curve = emit_trap_curves(&model, &p.get::<Vec<f64>>("C_grid")?)?;
            let mut table = Table::new("curve", &["C", "acceptable_risk", "required_eps", "verification_cost"]);
            for r in &curve.rows {
                table.push(vec![f(r.c), f(r.acceptable_risk), f(r.required_eps), f(r.verification_cost)]);
            }
            Ok(Outcome::new(json!({
                "curve": to_value(&curve)?,
                "eps_non_increasing": curve.eps_non_increasing(),
                "cost_non_decreasing": curve.cost_non_decreasing(),
            }))
            .table(table))
        },
    },
    Experiment {
        name: "crs.convergence",
        claim: "CRS Convergence",
        ops: &["convergence_witness"],
        params: &[
            param("model", Kind::Object, "null", "CRS model; null is the figure-default model"),
            param("eps0", Kind::Number, "1e-12", "target error rate"),
            param("C_limit", Kind::Number, "1000000.0", "search range"),
        ],
        timed: false,
        run: |p, _| {
            let model = model_param(p)?;
            let w = convergence_witness(&model, p.f64("eps0")?, p.f64("C_limit")?)?;
            Ok(Outcome::new(json!({
                "impact_unbounded": model.impact.is_unbounded(),
                "witness": to_value(&w)?,
            })))
        },
    },
];

fn random_reduction_formula(k: u32, rng: &mut impl Rng) -> PropositionalFormula {
    let f = random_formula(k, 4, rng);
    match rng.random_range(0..3) {
        0 => f,
        1 => PropositionalFormula::new(
            traplab_core::verification::Formula::Or(vec![f.root().clone(), f.root().clone().negate()]),
            k,
        )
        .expect("same variables"),
        _ => random_kcnf(k, rng.random_range(1..4), 2, rng).negated(),
    }
}

fn run_reduction(p: &Params, seed: &SeedStream) -> Result<Outcome, RunError> {
    let text: String = p.get("formula")?;
    let formulas: Vec<String> = if text.trim().is_empty() {
        let max_vars = p.u32("max_vars")?;
        if !(1..=20).contains(&max_vars) {
            return Err(RunError::Config("max_vars must lie in 1..=20".into()));
        }
        (0..p.u64("count")?)
            .map(|i| {
                let mut rng = seed.rng(i);
                let k = rng.random_range(1..=max_vars);
                random_reduction_formula(k, &mut rng).to_string()
            })
            .collect()
    } else {
        vec![text]
    };
    let mut table = Table::new("formulas", &["k", "tautology", "verdict_safe", "unsafe_inputs", "error", "agrees"]);
    let (mut agree, mut tautologies, mut bound_ok) = (0u64, 0u64, 0u64);
    let mut min_ratio = f64::INFINITY;
    for text in &formulas {
        let phi = parse_formula(text).map_err(traplab_core::Error::from)?;
        let k = phi.num_vars();
        let reduced = policy_from_formula(&phi)?;
        let verdict = verify_perfect_safety(&reduced.policy)?;
        let falsifying = oracle::falsifying_assignments(&phi);
        let tautology = falsifying == 0;
        let error = alignment_error_exact(&reduced.policy)?;
        let agrees = verdict.is_safe() == tautology && error.unsafe_inputs == falsifying;
        agree += agrees as u64;
        tautologies += tautology as u64;
        if !tautology {
            let ratio = error.value() * 2f64.powi(k as i32);
            min_ratio = min_ratio.min(ratio);
            bound_ok += (ratio >= 1.0) as u64;
        }
        table.push(vec![
            k.to_string(),
            tautology.to_string(),
            verdict.is_safe().to_string(),
            error.unsafe_inputs.to_string(),
            f(error.value()),
            agrees.to_string(),
        ]);
    }
    let n = formulas.len() as u64;
    Ok(Outcome::new(json!({
        "formulas": n,
        "tautologies": tautologies,
        "agreements": agree,
        "agreement_rate": agree as f64 / n as f64,
        "non_tautologies": n - tautologies,
        "error_bound_holds": bound_ok,
        "min_error_times_2k": if min_ratio.is_finite() { json!(min_ratio) } else { Value::Null },
    }))
    .table(table))
}

fn run_training_paths(p: &Params, seed: &SeedStream) -> Result<Outcome, RunError> {
    let radius = p.f64("tube_radius")?;
    let set = ThinSafeSet::random(
        p.usize("ambient_dim")?,
        p.usize("codimension")?,
        p.f64("distance")?,
        radius,
        &mut seed.child("set").rng(0),
    )?;
    let mut sets = vec![set.clone()];
    if p.get::<bool>("control")? {
        sets.push(set.leading_hyperplane());
    }
    let dynamics = Dynamics {
        step_size: p.f64("step_size")?,
        max_steps: p.usize("max_steps")?,
        noise: p.f64("noise")?,
        ..Dynamics::default()
    };
    let stats = simulate_training_paths_multi(p.u64("n_paths")?, &sets, &dynamics, &p.get::<Vec<f64>>("radii")?, &seed.child("paths"))?;
    let mut table = Table::new("hits", &["codimension", "tube_radius", "hits", "fraction"]);
    for s in &stats {
        for r in &s.rows {
            table.push(vec![s.codimension.to_string(), f(r.tube_radius), r.hits.to_string(), f(r.fraction)]);
        }
    }
    Ok(Outcome::new(json!({
        "safe_set": to_value(&set)?,
        "dynamics": to_value(&dynamics)?,
        "statistics": to_value(&stats)?,
    }))
    .table(table))
}

fn run_posterior(p: &Params, seed: &SeedStream) -> Result<Outcome, RunError> {
    let explicit: Option<PosteriorConfig> = p.get("config")?;
    let configs: Vec<PosteriorConfig> = match explicit {
        Some(c) => vec![c],
        None => {
            let every = p.u64("zero_prior_every")?;
            (0..p.u64("instances")?)
                .map(|i| {
                    let mut c = PosteriorConfig::random(&mut seed.child("config").rng(i));
                    if every > 0 && i % every == 0 {
                        c.prior = PriorSpec::ZeroOnSafe;
                    }
                    c
                })
                .collect()
        }
    };
    let mut table = Table::new(
        "instances",
        &["hypotheses", "p_safe", "q_safe", "expected_risk", "lower_bound", "bound_holds_exactly"],
    );
    let mut reports = Vec::new();
    let (mut holds, mut zero_prior, mut zero_prior_ok) = (0u64, 0u64, 0u64);
    for (i, c) in configs.iter().enumerate() {
        let r = toy_posterior_experiment(c, &seed.child("data").index(i as u64))?;
        holds += r.bound_holds_exactly as u64;
        if r.p_safe == 0.0 {
            zero_prior += 1;
            zero_prior_ok += (r.q_safe == 0.0 && r.expected_risk >= r.eps_min) as u64;
        }
        table.push(vec![
            r.hypotheses.to_string(),
            f(r.p_safe),
            f(r.q_safe),
            f(r.expected_risk),
            f(r.lower_bound),
            r.bound_holds_exactly.to_string(),
        ]);
        reports.push(to_value(&r)?);
    }
    Ok(Outcome::new(json!({
        "instances": configs.len(),
        "bound_holds_exactly": holds,
        "zero_prior_instances": zero_prior,
        "zero_prior_consistent": zero_prior_ok,
        "reports": reports,
    }))
    .table(table))
}
