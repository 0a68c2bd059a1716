//! Grid-based safety margins of ReLU networks and gradient-driven escape
//! perturbations in parameter space.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::ReluNetwork;
use crate::seed::SeedStream;

/// Largest grid the margin scan will enumerate.
pub const MAX_GRID_POINTS: usize = 1 << 22;

/// Gradient norms below this are treated as zero.
const ZERO_GRADIENT: f64 = 1e-12;
/// Lower clamp on the gradient norm in the distance proxy.
const GRADIENT_CLAMP: f64 = 1e-9;
/// Relative tolerance used to break near-ties toward the lower grid index.
const TIE_TOLERANCE: f64 = 1e-12;

/// Axis-aligned box sampled on a regular grid with `resolution` points per
/// dimension (end points included).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub resolution: usize,
}

impl GridDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, resolution: usize) -> Result<Self> {
        if lo.is_empty() {
            return Err(Error::invalid("domain", "needs at least one dimension"));
        }
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                actual: hi.len(),
            });
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l.is_finite() && h.is_finite() && l < h)) {
            return Err(Error::invalid("domain", "bounds must be finite with lo < hi"));
        }
        if resolution < 8 {
            return Err(Error::invalid("resolution", "need at least 8 points per dimension"));
        }
        let points = (0..lo.len()).try_fold(1usize, |acc, _| acc.checked_mul(resolution));
        if points.is_none_or(|p| p > MAX_GRID_POINTS) {
            return Err(Error::invalid(
                "resolution",
                format!("grid exceeds {MAX_GRID_POINTS} points"),
            ));
        }
        Ok(Self { lo, hi, resolution })
    }

    /// The unit box `[0, 1]^dim`.
    pub fn unit(dim: usize, resolution: usize) -> Result<Self> {
        Self::new(vec![0.0; dim], vec![1.0; dim], resolution)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn point_count(&self) -> usize {
        self.resolution.pow(self.dim() as u32)
    }

    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h - l) * (h - l))
            .sum::<f64>()
            .sqrt()
    }

    /// Grid point number `index`; the first coordinate varies fastest.
    pub fn point(&self, mut index: usize, out: &mut Vec<f64>) {
        out.clear();
        let steps = (self.resolution - 1) as f64;
        for (l, h) in self.lo.iter().zip(&self.hi) {
            let j = index % self.resolution;
            index /= self.resolution;
            out.push(l + (h - l) * j as f64 / steps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginStatus {
    /// A finite distance proxy was found.
    Boundary,
    /// Every grid point has a vanishing input gradient; the margin is
    /// reported as the domain diameter.
    NoBoundary,
    /// Every grid point is catastrophic; the margin is 0.
    AllCatastrophic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyMarginResult {
    pub margin: f64,
    pub critical_input: Vec<f64>,
    pub status: MarginStatus,
    pub grid_points: usize,
    pub catastrophic_points: usize,
    /// Grid points skipped because the input gradient vanished there.
    pub zero_gradient_points: usize,
}

impl SafetyMarginResult {
    /// True when no grid point is catastrophic.
    pub fn is_safe(&self) -> bool {
        self.catastrophic_points == 0
    }
}

/// Minimum over the grid of `|f(x)| / max(|grad_x f(x)|, 1e-9)`, a
/// first-order proxy for the distance from `x` to the decision boundary.
///
/// Points whose input gradient vanishes carry no boundary information and
/// are counted in `zero_gradient_points` instead.
pub fn safety_margin(net: &ReluNetwork, domain: &GridDomain) -> Result<SafetyMarginResult> {
    if net.input_dim() != domain.dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            actual: domain.dim(),
        });
    }
    let n = domain.point_count();
    let mut x = Vec::with_capacity(domain.dim());
    let mut best: Option<(f64, usize)> = None;
    let mut catastrophic = 0;
    let mut flat = 0;
    for i in 0..n {
        domain.point(i, &mut x);
        let (out, grad) = net.output_and_input_gradient(&x)?;
        if out > 0.0 {
            catastrophic += 1;
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm < ZERO_GRADIENT {
            flat += 1;
            continue;
        }
        let proxy = out.abs() / norm.max(GRADIENT_CLAMP);
        match best {
            Some((b, _)) if proxy >= b * (1.0 - TIE_TOLERANCE) => {}
            _ => best = Some((proxy, i)),
        }
    }
    let (margin, index, status) = if catastrophic == n {
        (0.0, best.map_or(0, |b| b.1), MarginStatus::AllCatastrophic)
    } else {
        match best {
            Some((m, i)) => (m, i, MarginStatus::Boundary),
            None => (domain.diameter(), 0, MarginStatus::NoBoundary),
        }
    };
    domain.point(index, &mut x);
    Ok(SafetyMarginResult {
        margin,
        critical_input: x,
        status,
        grid_points: n,
        catastrophic_points: catastrophic,
        zero_gradient_points: flat,
    })
}

/// The margin as a function of parameters: the grid proxy for safe
/// networks and 0 once any grid point is catastrophic.
fn margin_of(net: &ReluNetwork, params: &[f64], domain: &GridDomain) -> Result<f64> {
    let r = safety_margin(&net.with_parameters(params)?, domain)?;
    Ok(if r.is_safe() { r.margin } else { 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscapeOptions {
    pub step_alpha: f64,
    pub max_iters: usize,
    /// Central-difference step for the margin gradient.
    pub fd_step: f64,
    /// Backtracking halvings tried before a step is declared stuck.
    pub max_halvings: u32,
    /// Relative tolerance of the step-halving check.
    pub halving_tolerance: f64,
}

impl Default for EscapeOptions {
    fn default() -> Self {
        Self {
            step_alpha: 0.01,
            max_iters: 3,
            fd_step: 1e-6,
            max_halvings: 40,
            halving_tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EscapeFlag {
    /// `alpha = 0`: parameters returned unchanged.
    ZeroStep,
    /// The perturbed network is catastrophic somewhere on the grid.
    BecameUnsafe,
    /// The margin gradient vanished after at least one successful step.
    StalledEarly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeResult {
    pub network: ReluNetwork,
    /// Margin before the first step and after each accepted step.
    pub trace: Vec<f64>,
    /// Step sizes actually accepted (after backtracking).
    pub accepted_alphas: Vec<f64>,
    pub gradient_norms: Vec<f64>,
    /// Relative difference between the gradients at `h` and `h/2`.
    pub halving_errors: Vec<f64>,
    pub halving_passed: bool,
    /// Euclidean distance between initial and final parameters.
    pub displacement: f64,
    pub flags: Vec<EscapeFlag>,
}

impl EscapeResult {
    pub fn initial_margin(&self) -> f64 {
        self.trace[0]
    }

    pub fn final_margin(&self) -> f64 {
        *self.trace.last().expect("trace is non-empty")
    }

    pub fn reduced(&self) -> bool {
        self.final_margin() < self.initial_margin()
    }
}

fn central_gradient(
    net: &ReluNetwork,
    params: &[f64],
    domain: &GridDomain,
    h: f64,
) -> Result<Vec<f64>> {
    let mut p = params.to_vec();
    let mut g = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + h;
        let up = margin_of(net, &p, domain)?;
        p[i] = orig - h;
        let down = margin_of(net, &p, domain)?;
        p[i] = orig;
        g.push((up - down) / (2.0 * h));
    }
    Ok(g)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Descends the margin along `v = -grad_w M(w)`: `w' = w + alpha v`, with
/// backtracking so every accepted step strictly lowers the margin.
///
/// The gradient is a central difference with step `fd_step`, cross-checked
/// against step `fd_step / 2`.
pub fn escape_perturbation(
    net: &ReluNetwork,
    domain: &GridDomain,
    options: &EscapeOptions,
) -> Result<EscapeResult> {
    let alpha = options.step_alpha;
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::invalid("step_alpha", "must be finite and non-negative"));
    }
    if !(options.fd_step.is_finite() && options.fd_step > 0.0) {
        return Err(Error::invalid("fd_step", "must be positive"));
    }
    let start = safety_margin(net, domain)?;
    if !start.is_safe() || start.margin <= 0.0 {
        return Err(Error::Precondition(format!(
            "network must have positive margin ({} catastrophic grid points, margin {})",
            start.catastrophic_points, start.margin
        )));
    }
    if start.status == MarginStatus::NoBoundary {
        return Err(Error::Degenerate("input gradient vanishes on the whole grid".into()));
    }
    let mut result = EscapeResult {
        network: net.clone(),
        trace: vec![start.margin],
        accepted_alphas: Vec::new(),
        gradient_norms: Vec::new(),
        halving_errors: Vec::new(),
        halving_passed: true,
        displacement: 0.0,
        flags: Vec::new(),
    };
    if alpha == 0.0 {
        result.flags.push(EscapeFlag::ZeroStep);
        return Ok(result);
    }
    let initial = net.parameters();
    let mut params = initial.clone();
    let mut current = start.margin;
    for iter in 0..options.max_iters {
        let g = central_gradient(net, &params, domain, options.fd_step)?;
        let g_half = central_gradient(net, &params, domain, options.fd_step / 2.0)?;
        let gn = norm(&g);
        result.gradient_norms.push(gn);
        let diff: Vec<f64> = g.iter().zip(&g_half).map(|(a, b)| a - b).collect();
        let rel = norm(&diff) / norm(&g_half).max(ZERO_GRADIENT);
        result.halving_errors.push(rel);
        result.halving_passed &= rel <= options.halving_tolerance;
        if gn < ZERO_GRADIENT {
            if iter == 0 {
                return Err(Error::Degenerate(format!(
                    "margin gradient norm {gn:e} below {ZERO_GRADIENT:e}"
                )));
            }
            result.flags.push(EscapeFlag::StalledEarly);
            break;
        }
        let mut step = alpha;
        let mut accepted = None;
        for _ in 0..=options.max_halvings {
            let trial: Vec<f64> = params.iter().zip(&g).map(|(p, d)| p - step * d).collect();
            let m = margin_of(net, &trial, domain)?;
            if m < current {
                accepted = Some((trial, m));
                break;
            }
            step /= 2.0;
        }
        let Some((trial, m)) = accepted else {
            if iter == 0 {
                return Err(Error::Degenerate(
                    "no margin-decreasing step found along the negative gradient".into(),
                ));
            }
            result.flags.push(EscapeFlag::StalledEarly);
            break;
        };
        params = trial;
        current = m;
        result.trace.push(m);
        result.accepted_alphas.push(step);
        if m == 0.0 {
            result.flags.push(EscapeFlag::BecameUnsafe);
            break;
        }
    }
    result.network = net.with_parameters(&params)?;
    let delta: Vec<f64> = params.iter().zip(&initial).map(|(a, b)| a - b).collect();
    result.displacement = norm(&delta);
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeExperimentConfig {
    pub n_nets: usize,
    pub input_dim: usize,
    pub resolution: usize,
    /// Hidden layers are drawn with 0..=max_hidden_layers layers.
    pub max_hidden_layers: usize,
    pub max_width: usize,
    pub options: EscapeOptions,
}

impl Default for EscapeExperimentConfig {
    fn default() -> Self {
        Self {
            n_nets: 500,
            input_dim: 2,
            resolution: 10,
            max_hidden_layers: 2,
            max_width: 8,
            options: EscapeOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeExperimentReport {
    pub n_nets: usize,
    pub degenerate: usize,
    pub non_degenerate: usize,
    pub reduced: usize,
    pub reduced_fraction: f64,
    pub halving_checked: usize,
    pub halving_passed: usize,
    pub max_halving_error: f64,
    pub became_unsafe: usize,
    pub mean_relative_reduction: f64,
}

/// Random network with depth in `1..=max_hidden_layers + 1` layers, shifted
/// so that its largest grid output is strictly negative.
pub fn random_safe_network(
    config: &EscapeExperimentConfig,
    domain: &GridDomain,
    rng: &mut impl Rng,
) -> Result<ReluNetwork> {
    let hidden = rng.random_range(0..=config.max_hidden_layers);
    let mut dims = vec![config.input_dim];
    dims.extend((0..hidden).map(|_| rng.random_range(2..=config.max_width.max(2))));
    dims.push(1);
    let mut net = ReluNetwork::random(&dims, rng)?;
    let mut x = Vec::new();
    let mut max_out = f64::NEG_INFINITY;
    for i in 0..domain.point_count() {
        domain.point(i, &mut x);
        max_out = max_out.max(net.forward(&x)?);
    }
    let gap = 0.05 + 0.5 * rng.random::<f64>();
    net.shift_output(-(max_out + gap));
    Ok(net)
}

/// Runs [`escape_perturbation`] on many random safe networks.
pub fn escape_experiment(
    config: &EscapeExperimentConfig,
    seed: &SeedStream,
) -> Result<EscapeExperimentReport> {
    let domain = GridDomain::unit(config.input_dim, config.resolution)?;
    let outcomes = (0..config.n_nets)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed.rng(i as u64);
            let net = random_safe_network(config, &domain, &mut rng)?;
            match escape_perturbation(&net, &domain, &config.options) {
                Ok(r) => Ok(Some(r)),
                Err(Error::Degenerate(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let done: Vec<&EscapeResult> = outcomes.iter().flatten().collect();
    let reduced = done.iter().filter(|r| r.reduced()).count();
    let halving_passed = done.iter().filter(|r| r.halving_passed).count();
    let rel: f64 = done
        .iter()
        .map(|r| (r.initial_margin() - r.final_margin()) / r.initial_margin())
        .sum();
    Ok(EscapeExperimentReport {
        n_nets: config.n_nets,
        degenerate: config.n_nets - done.len(),
        non_degenerate: done.len(),
        reduced,
        reduced_fraction: if done.is_empty() { 0.0 } else { reduced as f64 / done.len() as f64 },
        halving_checked: done.len(),
        halving_passed,
        max_halving_error: done
            .iter()
            .flat_map(|r| r.halving_errors.iter().copied())
            .fold(0.0, f64::max),
        became_unsafe: done
            .iter()
            .filter(|r| r.flags.contains(&EscapeFlag::BecameUnsafe))
            .count(),
        mean_relative_reduction: if done.is_empty() { 0.0 } else { rel / done.len() as f64 },
    })
}
