//! Capability/safety gradient alignment on a toy one-dimensional task.
//!
//! Capability: fit the broad pattern `t(x) = intercept + slope x` on a grid
//! over `[-1, 1]` (mean squared error). Safety: at a handful of exception
//! points the output must stay below a ceiling (mean squared hinge). Each
//! random network is first trained on the capability loss until that loss
//! has dropped to `pretrain_fraction` of its initial value, and the cosine
//! between the two loss gradients is measured there.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::ReluNetwork;
use crate::seed::SeedStream;
use crate::stats::histogram;

const ZERO_GRADIENT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskVariant {
    /// Safety loss is the exception-set hinge.
    Exceptions,
    /// Safety loss equals the capability loss.
    Identical,
    /// Safety loss is the negated capability loss.
    Negated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentTask {
    pub variant: TaskVariant,
    pub hidden_width: usize,
    pub capability_points: usize,
    pub intercept: f64,
    pub slope: f64,
    pub exceptions: Vec<f64>,
    pub exception_ceiling: f64,
    pub learning_rate: f64,
    pub max_pretrain_steps: usize,
    pub pretrain_fraction: f64,
}

impl Default for AlignmentTask {
    fn default() -> Self {
        Self {
            variant: TaskVariant::Exceptions,
            hidden_width: 8,
            capability_points: 32,
            intercept: 2.0,
            slope: 0.5,
            exceptions: vec![-0.3, 0.2, 0.5],
            exception_ceiling: -1.0,
            learning_rate: 0.05,
            max_pretrain_steps: 500,
            pretrain_fraction: 0.5,
        }
    }
}

impl AlignmentTask {
    fn validate(&self) -> Result<()> {
        if self.hidden_width == 0 || self.capability_points < 2 {
            return Err(Error::invalid("task", "need hidden units and at least two capability points"));
        }
        if self.variant == TaskVariant::Exceptions && self.exceptions.is_empty() {
            return Err(Error::invalid("exceptions", "exception set is empty"));
        }
        if !(self.pretrain_fraction > 0.0 && self.pretrain_fraction <= 1.0) {
            return Err(Error::invalid("pretrain_fraction", "must lie in (0, 1]"));
        }
        Ok(())
    }

    fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.capability_points;
        (0..n).map(move |i| -1.0 + 2.0 * i as f64 / (n - 1) as f64)
    }

    /// Capability loss and its parameter gradient.
    pub fn capability(&self, net: &ReluNetwork) -> Result<(f64, Vec<f64>)> {
        let mut loss = 0.0;
        let mut grad = vec![0.0; net.parameter_count()];
        for x in self.grid() {
            let (out, g) = net.output_and_parameter_gradient(&[x])?;
            let r = out - (self.intercept + self.slope * x);
            loss += r * r;
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += 2.0 * r * b);
        }
        let n = self.capability_points as f64;
        grad.iter_mut().for_each(|a| *a /= n);
        Ok((loss / n, grad))
    }

    /// Safety loss and its parameter gradient under the task variant.
    pub fn safety(&self, net: &ReluNetwork) -> Result<(f64, Vec<f64>)> {
        match self.variant {
            TaskVariant::Identical => self.capability(net),
            TaskVariant::Negated => {
                let (l, g) = self.capability(net)?;
                Ok((-l, g.into_iter().map(|v| -v).collect()))
            }
            TaskVariant::Exceptions => {
                let mut loss = 0.0;
                let mut grad = vec![0.0; net.parameter_count()];
                for &x in &self.exceptions {
                    let (out, g) = net.output_and_parameter_gradient(&[x])?;
                    let excess = (out - self.exception_ceiling).max(0.0);
                    loss += excess * excess;
                    grad.iter_mut().zip(&g).for_each(|(a, b)| *a += 2.0 * excess * b);
                }
                let n = self.exceptions.len() as f64;
                grad.iter_mut().for_each(|a| *a /= n);
                Ok((loss / n, grad))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub variant: TaskVariant,
    pub n_points: usize,
    pub cosines: Vec<f64>,
    /// Points skipped because a gradient vanished.
    pub skipped: usize,
    pub mean_cosine: f64,
    pub negative_fraction: f64,
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub mean_pretrain_steps: f64,
}

fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na < ZERO_GRADIENT || nb < ZERO_GRADIENT {
        return None;
    }
    let c = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb);
    Some(c.clamp(-1.0, 1.0))
}

/// Gradient-descends the capability loss until it falls to the configured
/// fraction of its starting value; returns the steps taken.
fn pretrain(task: &AlignmentTask, net: &mut ReluNetwork) -> Result<usize> {
    let (initial, _) = task.capability(net)?;
    let goal = task.pretrain_fraction * initial;
    let mut params = net.parameters();
    for step in 0..task.max_pretrain_steps {
        let (loss, grad) = task.capability(net)?;
        if loss <= goal {
            return Ok(step);
        }
        params.iter_mut().zip(&grad).for_each(|(p, g)| *p -= task.learning_rate * g);
        *net = net.with_parameters(&params)?;
    }
    Ok(task.max_pretrain_steps)
}

/// Cosine between capability and safety gradients at `n_points` random
/// networks, each pre-trained part-way on capability.
pub fn gradient_alignment_experiment(
    task: &AlignmentTask,
    n_points: usize,
    seed: &SeedStream,
) -> Result<AlignmentReport> {
    task.validate()?;
    let dims = [1, task.hidden_width, 1];
    let samples = (0..n_points)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed.rng(i as u64);
            let mut net = ReluNetwork::random(&dims, &mut rng)?;
            let steps = pretrain(task, &mut net)?;
            let (_, gc) = task.capability(&net)?;
            let (_, gs) = task.safety(&net)?;
            Ok((cosine(&gc, &gs), steps))
        })
        .collect::<Result<Vec<_>>>()?;
    let cosines: Vec<f64> = samples.iter().filter_map(|s| s.0).collect();
    let (bin_edges, counts) = histogram(&cosines, -1.0, 1.0, 20);
    let k = cosines.len().max(1) as f64;
    Ok(AlignmentReport {
        variant: task.variant,
        n_points,
        skipped: n_points - cosines.len(),
        mean_cosine: cosines.iter().sum::<f64>() / k,
        negative_fraction: cosines.iter().filter(|&&c| c < 0.0).count() as f64 / k,
        bin_edges,
        counts,
        mean_pretrain_steps: samples.iter().map(|s| s.1 as f64).sum::<f64>() / n_points.max(1) as f64,
        cosines,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(variant: TaskVariant) -> AlignmentReport {
        let task = AlignmentTask {
            variant,
            ..Default::default()
        };
        gradient_alignment_experiment(&task, 40, &SeedStream::new(11)).unwrap()
    }

    #[test]
    fn identical_losses_align() {
        let r = run(TaskVariant::Identical);
        assert!(r.cosines.iter().all(|c| (c - 1.0).abs() < 1e-12));
    }

    #[test]
    fn negated_losses_oppose() {
        let r = run(TaskVariant::Negated);
        assert!(r.cosines.iter().all(|c| (c + 1.0).abs() < 1e-12));
    }

    #[test]
    fn exception_task_is_anti_aligned() {
        let r = run(TaskVariant::Exceptions);
        assert!(r.mean_cosine < 0.0, "mean cosine {}", r.mean_cosine);
        assert_eq!(r.counts.iter().sum::<u64>() as usize, r.cosines.len());
    }
}
