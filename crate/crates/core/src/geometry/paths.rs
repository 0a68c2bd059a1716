//! Gradient-flow training paths and their encounters with thin safe sets.
//!
//! A safe set is an affine subspace `{x : N x = o}` with orthonormal rows in
//! `N`; the distance from `x` is `|N x - o|`. A path is the explicit-Euler
//! discretisation of the gradient flow of a random smooth potential, and the
//! distance to the safe set is minimised exactly over every Euler segment,
//! so a path cannot tunnel through a tube between steps.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::SeedStream;

/// Tube radii used to exhibit the shrinking hit fraction.
pub const DEFAULT_RADII: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

const ORTHONORMAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThinSafeSet {
    ambient_dim: usize,
    normals: Vec<Vec<f64>>,
    offsets: Vec<f64>,
    tube_radius: f64,
}

impl ThinSafeSet {
    /// Codimension 1 is accepted so hyperplane controls can be built; the
    /// thin regime is `codimension >= 2`.
    pub fn new(normals: Vec<Vec<f64>>, offsets: Vec<f64>, tube_radius: f64) -> Result<Self> {
        let c = normals.len();
        let Some(n) = normals.first().map(Vec::len) else {
            return Err(Error::invalid("normals", "need at least one constraint"));
        };
        if c >= n {
            return Err(Error::invalid("normals", format!("codimension {c} must be below dimension {n}")));
        }
        if offsets.len() != c {
            return Err(Error::DimensionMismatch {
                expected: c,
                actual: offsets.len(),
            });
        }
        if let Some(row) = normals.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: row.len(),
            });
        }
        for i in 0..c {
            for j in 0..=i {
                let dot: f64 = normals[i].iter().zip(&normals[j]).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > ORTHONORMAL_TOLERANCE {
                    return Err(Error::invalid("normals", "rows must be orthonormal"));
                }
            }
        }
        if offsets.iter().any(|o| !o.is_finite()) {
            return Err(Error::invalid("offsets", "must be finite"));
        }
        if tube_radius.is_nan() || tube_radius <= 0.0 {
            return Err(Error::invalid("tube_radius", "must be positive"));
        }
        Ok(Self {
            ambient_dim: n,
            normals,
            offsets,
            tube_radius,
        })
    }

    /// Random orientation (Gram-Schmidt on Gaussian vectors), placed at
    /// Euclidean distance `distance` from the origin.
    pub fn random(
        ambient_dim: usize,
        codimension: usize,
        distance: f64,
        tube_radius: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if codimension == 0 || codimension >= ambient_dim {
            return Err(Error::invalid("codimension", "must lie in [1, ambient_dim)"));
        }
        let mut normals: Vec<Vec<f64>> = Vec::with_capacity(codimension);
        while normals.len() < codimension {
            let mut v: Vec<f64> = (0..ambient_dim).map(|_| rng.sample(StandardNormal)).collect();
            for u in &normals {
                let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
            }
            let len = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if len > 1e-6 {
                normals.push(v.into_iter().map(|a| a / len).collect());
            }
        }
        let dir: Vec<f64> = (0..codimension).map(|_| rng.sample(StandardNormal)).collect();
        let len = dir.iter().map(|a| a * a).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let offsets = dir.iter().map(|a| distance * a / len).collect();
        Self::new(normals, offsets, tube_radius)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn codimension(&self) -> usize {
        self.normals.len()
    }

    pub fn normals(&self) -> &[Vec<f64>] {
        &self.normals
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn tube_radius(&self) -> f64 {
        self.tube_radius
    }

    pub fn is_thin(&self) -> bool {
        self.codimension() >= 2
    }

    pub fn with_tube_radius(&self, tube_radius: f64) -> Result<Self> {
        Self::new(self.normals.clone(), self.offsets.clone(), tube_radius)
    }

    /// The hyperplane cut out by the first constraint alone.
    pub fn leading_hyperplane(&self) -> Self {
        Self {
            ambient_dim: self.ambient_dim,
            normals: vec![self.normals[0].clone()],
            offsets: vec![self.offsets[0]],
            tube_radius: self.tube_radius,
        }
    }

    /// Closest point of the set to the origin.
    pub fn base_point(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.ambient_dim];
        for (row, o) in self.normals.iter().zip(&self.offsets) {
            p.iter_mut().zip(row).for_each(|(a, b)| *a += o * b);
        }
        p
    }

    fn residual(&self, x: &[f64], out: &mut [f64]) {
        for ((r, row), o) in out.iter_mut().zip(&self.normals).zip(&self.offsets) {
            *r = row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - o;
        }
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        let mut r = vec![0.0; self.codimension()];
        self.residual(x, &mut r);
        r.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Minimum of `|r0 + s d|` over `s` in `[0, 1]`.
fn segment_distance(r0: &[f64], d: &[f64]) -> f64 {
    let dd: f64 = d.iter().map(|v| v * v).sum();
    let s = if dd > 0.0 {
        (-r0.iter().zip(d).map(|(a, b)| a * b).sum::<f64>() / dd).clamp(0.0, 1.0)
    } else {
        0.0
    };
    r0.iter()
        .zip(d)
        .map(|(a, b)| (a + s * b) * (a + s * b))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Sinusoid {
    amplitude: f64,
    frequency: Vec<f64>,
    phase: f64,
}

/// `V(x) = 1/2 sum_i a_i (x_i - c_i)^2 + sum_j A_j sin(k_j . x + phi_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    curvatures: Vec<f64>,
    centers: Vec<f64>,
    sinusoids: Vec<Sinusoid>,
}

impl Potential {
    /// Curvatures uniform in `[1, 2]`, centres `N(0, 0.5^2)`, standard-normal
    /// frequencies and uniform phases.
    pub fn random(dim: usize, dynamics: &Dynamics, rng: &mut impl Rng) -> Self {
        let curvatures = (0..dim).map(|_| rng.random_range(1.0..2.0)).collect();
        let centers = (0..dim)
            .map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let sinusoids = (0..dynamics.sinusoids)
            .map(|_| Sinusoid {
                amplitude: dynamics.sinusoid_amplitude,
                frequency: (0..dim).map(|_| rng.sample(StandardNormal)).collect(),
                phase: rng.random_range(0.0..std::f64::consts::TAU),
            })
            .collect();
        Self {
            curvatures,
            centers,
            sinusoids,
        }
    }

    pub fn dim(&self) -> usize {
        self.centers.len()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let quad: f64 = x
            .iter()
            .zip(&self.centers)
            .zip(&self.curvatures)
            .map(|((x, c), a)| 0.5 * a * (x - c) * (x - c))
            .sum();
        quad + self
            .sinusoids
            .iter()
            .map(|s| s.amplitude * (dot(&s.frequency, x) + s.phase).sin())
            .sum::<f64>()
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for (((g, x), c), a) in out.iter_mut().zip(x).zip(&self.centers).zip(&self.curvatures) {
            *g = a * (x - c);
        }
        for s in &self.sinusoids {
            let w = s.amplitude * (dot(&s.frequency, x) + s.phase).cos();
            out.iter_mut().zip(&s.frequency).for_each(|(g, k)| *g += w * k);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dynamics {
    pub step_size: f64,
    pub max_steps: usize,
    /// Langevin noise scale; each step adds `noise * sqrt(step) * N(0, I)`.
    pub noise: f64,
    pub sinusoids: usize,
    pub sinusoid_amplitude: f64,
    /// Noise-free paths stop once a step moves less than this.
    pub stop_displacement: f64,
}

impl Default for Dynamics {
    fn default() -> Self {
        Self {
            step_size: 1e-2,
            max_steps: 10_000,
            noise: 0.0,
            sinusoids: 3,
            sinusoid_amplitude: 0.1,
            stop_displacement: 1e-9,
        }
    }
}

impl Dynamics {
    fn validate(&self) -> Result<()> {
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::invalid("step_size", "must be positive"));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::invalid("noise", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPath {
    /// Visited points; empty unless recording was requested.
    pub points: Vec<Vec<f64>>,
    pub step_size: f64,
    pub steps: usize,
    pub min_distance: f64,
    /// `(step, distance)` at each entry into the tube; step 0 is the start.
    pub hit_events: Vec<(usize, f64)>,
}

struct PathOutcome {
    min_distances: Vec<f64>,
    steps: usize,
}

fn run_path(
    start: &[f64],
    potential: &Potential,
    dynamics: &Dynamics,
    sets: &[&ThinSafeSet],
    rng: &mut impl Rng,
    mut visit: impl FnMut(usize, &[f64], &[f64]),
) -> PathOutcome {
    let n = start.len();
    let mut x = start.to_vec();
    let mut grad = vec![0.0; n];
    let mut residuals: Vec<Vec<f64>> = sets
        .iter()
        .map(|s| {
            let mut r = vec![0.0; s.codimension()];
            s.residual(&x, &mut r);
            r
        })
        .collect();
    let mut min_distances: Vec<f64> = residuals.iter().map(|r| dot(r, r).sqrt()).collect();
    let mut dists = min_distances.clone();
    visit(0, &x, &dists);
    let mut moves: Vec<Vec<f64>> = residuals.iter().map(|r| vec![0.0; r.len()]).collect();
    let mut delta = vec![0.0; n];
    let noise_scale = dynamics.noise * dynamics.step_size.sqrt();
    let mut steps = 0;
    for step in 1..=dynamics.max_steps {
        potential.gradient(&x, &mut grad);
        for (d, g) in delta.iter_mut().zip(&grad) {
            *d = -dynamics.step_size * g;
        }
        if noise_scale > 0.0 {
            for d in &mut delta {
                *d += noise_scale * rng.sample::<f64, _>(StandardNormal);
            }
        }
        for (k, set) in sets.iter().enumerate() {
            let (r, dr) = (&mut residuals[k], &mut moves[k]);
            for (m, row) in dr.iter_mut().zip(&set.normals) {
                *m = dot(row, &delta);
            }
            dists[k] = segment_distance(r, dr);
            min_distances[k] = min_distances[k].min(dists[k]);
            r.iter_mut().zip(dr.iter()).for_each(|(a, b)| *a += b);
        }
        x.iter_mut().zip(&delta).for_each(|(a, b)| *a += b);
        steps = step;
        visit(step, &x, &dists);
        if noise_scale == 0.0 && dot(&delta, &delta).sqrt() < dynamics.stop_displacement {
            break;
        }
    }
    PathOutcome {
        min_distances,
        steps,
    }
}

/// Follows one path from `start`; `rng` only feeds the optional noise.
pub fn simulate_path(
    start: &[f64],
    potential: &Potential,
    dynamics: &Dynamics,
    safe_set: &ThinSafeSet,
    record_points: bool,
    rng: &mut impl Rng,
) -> Result<TrainingPath> {
    dynamics.validate()?;
    if start.len() != safe_set.ambient_dim() || potential.dim() != start.len() {
        return Err(Error::DimensionMismatch {
            expected: safe_set.ambient_dim(),
            actual: start.len(),
        });
    }
    let mut points = Vec::new();
    let mut hit_events = Vec::new();
    let mut inside = false;
    let radius = safe_set.tube_radius();
    let outcome = run_path(start, potential, dynamics, &[safe_set], rng, |step, x, d| {
        if record_points {
            points.push(x.to_vec());
        }
        let now = d[0] < radius;
        if now && !inside {
            hit_events.push((step, d[0]));
        }
        inside = now;
    });
    Ok(TrainingPath {
        points,
        step_size: dynamics.step_size,
        steps: outcome.steps,
        min_distance: outcome.min_distances[0],
        hit_events,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitRow {
    pub tube_radius: f64,
    pub hits: u64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitStatistics {
    pub n_paths: u64,
    pub ambient_dim: usize,
    pub codimension: usize,
    /// Hits at the safe set's own tube radius.
    pub tube_radius: f64,
    pub hits: u64,
    /// One row per requested radius, in the order given.
    pub rows: Vec<HitRow>,
    /// Smallest path-to-set distance seen; infinite with no paths.
    pub min_distance: f64,
    pub mean_steps: f64,
}

impl HitStatistics {
    pub fn hit_fraction(&self) -> f64 {
        if self.n_paths == 0 {
            0.0
        } else {
            self.hits as f64 / self.n_paths as f64
        }
    }
}

fn statistics(set: &ThinSafeSet, distances: &[f64], radii: &[f64], mean_steps: f64) -> HitStatistics {
    let n = distances.len() as u64;
    let count = |r: f64| distances.iter().filter(|&&d| d < r).count() as u64;
    let rows = radii
        .iter()
        .map(|&r| {
            let hits = count(r);
            HitRow {
                tube_radius: r,
                hits,
                fraction: if n == 0 { 0.0 } else { hits as f64 / n as f64 },
            }
        })
        .collect();
    HitStatistics {
        n_paths: n,
        ambient_dim: set.ambient_dim(),
        codimension: set.codimension(),
        tube_radius: set.tube_radius(),
        hits: count(set.tube_radius()),
        rows,
        min_distance: distances.iter().copied().fold(f64::INFINITY, f64::min),
        mean_steps,
    }
}

/// Simulates `n_paths` paths once and scores them against every set, so all
/// sets (and all radii) see identical paths. Path `i` draws its start from
/// `N(0, I)`, then its potential, then its noise, all from `seed.rng(i)`.
pub fn simulate_training_paths_multi(
    n_paths: u64,
    safe_sets: &[ThinSafeSet],
    dynamics: &Dynamics,
    radii: &[f64],
    seed: &SeedStream,
) -> Result<Vec<HitStatistics>> {
    dynamics.validate()?;
    let Some(first) = safe_sets.first() else {
        return Err(Error::invalid("safe_sets", "need at least one set"));
    };
    let dim = first.ambient_dim();
    if let Some(s) = safe_sets.iter().find(|s| s.ambient_dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: s.ambient_dim(),
        });
    }
    if radii.iter().any(|r| r.is_nan() || *r <= 0.0) {
        return Err(Error::invalid("radii", "must be positive"));
    }
    let sets: Vec<&ThinSafeSet> = safe_sets.iter().collect();
    let outcomes: Vec<PathOutcome> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed.rng(i);
            let start: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let potential = Potential::random(dim, dynamics, &mut rng);
            run_path(&start, &potential, dynamics, &sets, &mut rng, |_, _, _| {})
        })
        .collect();
    let mean_steps = if outcomes.is_empty() {
        0.0
    } else {
        outcomes.iter().map(|o| o.steps as f64).sum::<f64>() / outcomes.len() as f64
    };
    Ok(safe_sets
        .iter()
        .enumerate()
        .map(|(k, set)| {
            let d: Vec<f64> = outcomes.iter().map(|o| o.min_distances[k]).collect();
            statistics(set, &d, radii, mean_steps)
        })
        .collect())
}

pub fn simulate_training_paths(
    n_paths: u64,
    safe_set: &ThinSafeSet,
    dynamics: &Dynamics,
    radii: &[f64],
    seed: &SeedStream,
) -> Result<HitStatistics> {
    let mut v = simulate_training_paths_multi(n_paths, std::slice::from_ref(safe_set), dynamics, radii, seed)?;
    Ok(v.remove(0))
}

/// Polynomial path budget `round(c * n^k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathBudget {
    pub c: f64,
    pub k: u32,
}

impl PathBudget {
    pub fn paths(&self, n: usize) -> Result<u64> {
        let v = self.c * (n as f64).powi(self.k as i32);
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::invalid("path_budget", format!("c * n^k = {v} is not a count")));
        }
        Ok(v.round() as u64)
    }
}

pub fn multi_path_trap(
    budget: &PathBudget,
    safe_set: &ThinSafeSet,
    dynamics: &Dynamics,
    radii: &[f64],
    seed: &SeedStream,
) -> Result<HitStatistics> {
    let n = budget.paths(safe_set.ambient_dim())?;
    simulate_training_paths(n, safe_set, dynamics, radii, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_in_3d() -> ThinSafeSet {
        ThinSafeSet::new(
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
            vec![3.0, 0.0],
            1e-3,
        )
        .unwrap()
    }

    #[test]
    fn rejects_non_orthonormal_rows() {
        let r = ThinSafeSet::new(vec![vec![1.0, 0.0, 0.0], vec![1.0, 1.0, 0.0]], vec![0.0, 0.0], 0.1);
        assert!(r.is_err());
    }

    #[test]
    fn rejects_full_codimension() {
        let r = ThinSafeSet::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0], 0.1);
        assert!(r.is_err());
    }

    #[test]
    fn distance_is_residual_norm() {
        let s = line_in_3d();
        assert_eq!(s.distance(&[3.0, 0.0, 7.0]), 0.0);
        assert!((s.distance(&[0.0, 4.0, 1.0]) - 5.0).abs() < 1e-12);
        assert_eq!(s.distance(&s.base_point()), 0.0);
    }

    #[test]
    fn segment_distance_finds_interior_minimum() {
        // Segment from (-1, 1) to (1, 1): closest approach to the origin is 1.
        assert_eq!(segment_distance(&[-1.0, 1.0], &[2.0, 0.0]), 1.0);
        assert_eq!(segment_distance(&[2.0, 0.0], &[1.0, 0.0]), 2.0);
    }

    #[test]
    fn start_on_set_hits_at_step_zero() {
        let s = line_in_3d();
        let d = Dynamics::default();
        let mut rng = SeedStream::new(3).rng(0);
        let pot = Potential::random(3, &d, &mut rng);
        let p = simulate_path(&[3.0, 0.0, -1.0], &pot, &d, &s, false, &mut rng).unwrap();
        assert_eq!(p.hit_events.first(), Some(&(0, 0.0)));
        assert_eq!(p.min_distance, 0.0);
    }

    #[test]
    fn random_sets_are_orthonormal_at_distance() {
        let mut rng = SeedStream::new(5).rng(0);
        let s = ThinSafeSet::random(6, 3, 3.0, 0.1, &mut rng).unwrap();
        assert!((s.distance(&[0.0; 6]) - 3.0).abs() < 1e-12);
        let p = s.base_point();
        assert!(s.distance(&p) < 1e-12);
    }

    #[test]
    fn infinite_radius_hits_every_path() {
        let s = line_in_3d().with_tube_radius(f64::INFINITY).unwrap();
        let st = simulate_training_paths(20, &s, &Dynamics::default(), &[f64::INFINITY], &SeedStream::new(1)).unwrap();
        assert_eq!(st.hits, 20);
        assert_eq!(st.rows[0].hits, 20);
    }

    #[test]
    fn zero_budget_is_empty() {
        let b = PathBudget { c: 0.0, k: 2 };
        let st = multi_path_trap(&b, &line_in_3d(), &Dynamics::default(), &DEFAULT_RADII, &SeedStream::new(1)).unwrap();
        assert_eq!(st.n_paths, 0);
        assert_eq!(st.hits, 0);
        assert_eq!(st.hit_fraction(), 0.0);
    }

    #[test]
    fn noise_free_paths_descend() {
        let d = Dynamics::default();
        let mut rng = SeedStream::new(9).rng(0);
        let pot = Potential::random(3, &d, &mut rng);
        let s = line_in_3d();
        let p = simulate_path(&[1.0, -2.0, 0.5], &pot, &d, &s, true, &mut rng).unwrap();
        let first = pot.value(&p.points[0]);
        let last = pot.value(p.points.last().unwrap());
        assert!(last < first);
        assert!(p.steps < d.max_steps);
    }
}
