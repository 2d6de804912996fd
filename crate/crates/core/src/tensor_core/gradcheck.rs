//! Central finite-difference verification of analytic gradients.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CenterState, FeatureNormState, Graph, Tensor, Var};
use crate::error::Result;

pub const STEP: f64 = 1e-3;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

/// Largest discrepancy observed for one named input.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupError {
    pub name: String,
    pub elements: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub op: String,
    pub tolerance: f64,
    pub groups: Vec<GroupError>,
}

impl GradCheckReport {
    pub fn worst(&self) -> f64 {
        self.groups.iter().map(|g| g.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.groups.iter().all(|g| g.max_rel_error < self.tolerance)
    }
}

/// `|a − n| / max(|a|, |n|)`, falling back to the absolute gap when both
/// sides vanish.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    let gap = (analytic - numeric).abs();
    if scale < 1e-8 {
        gap
    } else {
        gap / scale
    }
}

/// Compares the gradients `build` produces against central differences with
/// step [`STEP`] for every element of every input.
pub fn gradient_check<F>(
    op: &str,
    inputs: &[(&str, Tensor<f64>)],
    build: F,
    tolerance: f64,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let evaluate = |values: &[Tensor<f64>]| -> Result<f64> {
        let mut graph = Graph::new();
        let vars: Vec<Var> = values.iter().map(|t| graph.param(t.clone())).collect();
        let loss = build(&mut graph, &vars)?;
        Ok(graph.value(loss).item())
    };

    let mut graph = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|(_, t)| graph.param(t.clone())).collect();
    let loss = build(&mut graph, &vars)?;
    graph.backward(loss)?;

    let mut values: Vec<Tensor<f64>> = inputs.iter().map(|(_, t)| t.clone()).collect();
    let mut groups = Vec::with_capacity(inputs.len());
    for (slot, (name, tensor)) in inputs.iter().enumerate() {
        let zeros = vec![0.0; tensor.len()];
        let analytic = graph.grad(vars[slot]).unwrap_or(&zeros).to_vec();
        let mut max_rel: f64 = 0.0;
        let mut max_abs: f64 = 0.0;
        for i in 0..tensor.len() {
            let original = values[slot].data()[i];
            values[slot].data_mut()[i] = original + STEP;
            let up = evaluate(&values)?;
            values[slot].data_mut()[i] = original - STEP;
            let down = evaluate(&values)?;
            values[slot].data_mut()[i] = original;
            let numeric = (up - down) / (2.0 * STEP);
            max_rel = max_rel.max(relative_error(analytic[i], numeric));
            max_abs = max_abs.max((analytic[i] - numeric).abs());
        }
        groups.push(GroupError {
            name: (*name).to_string(),
            elements: tensor.len(),
            max_rel_error: max_rel,
            max_abs_error: max_abs,
        });
    }
    Ok(GradCheckReport { op: op.to_string(), tolerance, groups })
}

fn uniform(rng: &mut impl Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(lo..hi))
}

/// Values bounded away from zero so the PReLU kink stays out of reach of the step.
fn away_from_zero(rng: &mut impl Rng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| {
        let magnitude = rng.random_range(0.1..1.0);
        if rng.random_bool(0.5) {
            magnitude
        } else {
            -magnitude
        }
    })
}

/// Distinct values spaced well beyond the step so no pooling window is near a tie.
fn well_separated(rng: &mut impl Rng, shape: &[usize]) -> Tensor<f64> {
    let len: usize = shape.iter().product();
    let mut ranks: Vec<usize> = (0..len).collect();
    ranks.shuffle(rng);
    Tensor::from_fn(shape, |i| ranks[i] as f64 * 0.05 - len as f64 * 0.025)
}

/// Names accepted by [`standard_suite`].
pub const SUITE_OPS: &[&str] = &[
    "conv2d",
    "maxpool2d",
    "prelu",
    "fully_connected",
    "residual_block",
    "feature_norm_train",
    "feature_norm_eval",
    "softmax_cross_entropy",
    "center_loss",
    "composed_network",
];

/// Runs the check over every differentiable operation, optionally restricted
/// to names containing `filter`.
pub fn standard_suite(seed: u64, tolerance: f64, filter: Option<&str>) -> Result<Vec<GradCheckReport>> {
    let mut reports = Vec::new();
    for &op in SUITE_OPS {
        if filter.is_some_and(|f| !op.contains(f)) {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fxhash(op));
        reports.push(check_op(op, &mut rng, tolerance)?);
    }
    Ok(reports)
}

fn fxhash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x1000_0000_01b3))
}

fn check_op(op: &str, rng: &mut ChaCha8Rng, tol: f64) -> Result<GradCheckReport> {
    match op {
        "conv2d" => {
            let x = uniform(rng, &[2, 2, 4, 5], -1.0, 1.0);
            let w = uniform(rng, &[3, 2, 3, 3], -0.5, 0.5);
            let b = uniform(rng, &[3], -0.5, 0.5);
            let proj = uniform(rng, &[2, 3, 4, 5], -1.0, 1.0);
            gradient_check(op, &[("input", x), ("weights", w), ("bias", b)], |g, v| {
                let y = g.conv2d(v[0], v[1], v[2])?;
                g.weighted_sum(y, &proj)
            }, tol)
        }
        "maxpool2d" => {
            let x = well_separated(rng, &[2, 2, 5, 6]);
            let proj = uniform(rng, &[2, 2, 3, 3], -1.0, 1.0);
            gradient_check(op, &[("input", x)], |g, v| {
                let y = g.maxpool2d(v[0])?;
                g.weighted_sum(y, &proj)
            }, tol)
        }
        "prelu" => {
            let x = away_from_zero(rng, &[3, 4, 2, 2]);
            let a = uniform(rng, &[4], 0.05, 0.5);
            let proj = uniform(rng, &[3, 4, 2, 2], -1.0, 1.0);
            gradient_check(op, &[("input", x), ("slopes", a)], |g, v| {
                let y = g.prelu(v[0], v[1])?;
                g.weighted_sum(y, &proj)
            }, tol)
        }
        "fully_connected" => {
            let x = uniform(rng, &[4, 5], -1.0, 1.0);
            let w = uniform(rng, &[5, 3], -1.0, 1.0);
            let b = uniform(rng, &[3], -1.0, 1.0);
            let proj = uniform(rng, &[4, 3], -1.0, 1.0);
            gradient_check(op, &[("input", x), ("weights", w), ("bias", b)], |g, v| {
                let y = g.linear(v[0], v[1], v[2])?;
                g.weighted_sum(y, &proj)
            }, tol)
        }
        "residual_block" => {
            let x = uniform(rng, &[2, 2, 3, 3], -1.0, 1.0);
            let w1 = uniform(rng, &[2, 2, 3, 3], -0.5, 0.5);
            let b1 = uniform(rng, &[2], -0.2, 0.2);
            let s1 = uniform(rng, &[2], 0.1, 0.4);
            let w2 = uniform(rng, &[2, 2, 3, 3], -0.5, 0.5);
            let b2 = uniform(rng, &[2], -0.2, 0.2);
            let s2 = uniform(rng, &[2], 0.1, 0.4);
            let proj = uniform(rng, &[2, 2, 3, 3], -1.0, 1.0);
            let inputs = [("input", x), ("w1", w1), ("b1", b1), ("s1", s1), ("w2", w2), ("b2", b2), ("s2", s2)];
            resample_until_smooth(rng, op, &inputs, tol, |g, v| {
                let y = g.residual_block(
                    v[0],
                    [
                        super::ConvPreluVars { weights: v[1], bias: v[2], slopes: v[3] },
                        super::ConvPreluVars { weights: v[4], bias: v[5], slopes: v[6] },
                    ],
                )?;
                g.weighted_sum(y, &proj)
            })
        }
        "feature_norm_train" => {
            let x = uniform(rng, &[6, 3], -2.0, 2.0);
            let proj = uniform(rng, &[6, 3], -1.0, 1.0);
            gradient_check(op, &[("input", x)], |g, v| {
                let mut state = FeatureNormState::new(3);
                let y = g.feature_norm(v[0], &mut state)?;
                g.weighted_sum(y, &proj)
            }, tol)
        }
        "feature_norm_eval" => {
            let x = uniform(rng, &[4, 3], -2.0, 2.0);
            let proj = uniform(rng, &[4, 3], -1.0, 1.0);
            let mut state = FeatureNormState::new(3);
            state.running_mean = vec![0.3, -0.2, 0.1];
            state.running_var = vec![0.5, 1.5, 2.0];
            state.eval();
            gradient_check(op, &[("input", x)], |g, v| {
                let y = g.feature_norm(v[0], &mut state.clone())?;
                g.weighted_sum(y, &proj)
            }, tol)
        }
        "softmax_cross_entropy" => {
            let x = uniform(rng, &[4, 3], -1.0, 1.0);
            let w = uniform(rng, &[3, 5], -1.0, 1.0);
            let b = uniform(rng, &[5], -0.5, 0.5);
            let labels: Vec<usize> = (0..4).map(|_| rng.random_range(0..5)).collect();
            gradient_check(op, &[("features", x), ("weights", w), ("bias", b)], |g, v| {
                g.softmax_cross_entropy(v[0], v[1], v[2], &labels)
            }, tol)
        }
        "center_loss" => {
            let x = uniform(rng, &[5, 3], -1.0, 1.0);
            let labels = vec![0, 1, 1, 2, 0];
            let mut state = CenterState::new(3, 3);
            state.centers = uniform(rng, &[3, 3], -1.0, 1.0);
            gradient_check(op, &[("features", x)], |g, v| g.center_loss(v[0], &labels, &state), tol)
        }
        "composed_network" => {
            let x = uniform(rng, &[2, 1, 4, 4], -1.0, 1.0);
            let w = uniform(rng, &[2, 1, 3, 3], -0.5, 0.5);
            let b = uniform(rng, &[2], -0.2, 0.2);
            let a = uniform(rng, &[2], 0.1, 0.4);
            let fw = uniform(rng, &[32, 3], -0.3, 0.3);
            let fb = uniform(rng, &[3], -0.2, 0.2);
            let labels = vec![2, 0];
            let inputs = [("input", x), ("conv.weights", w), ("conv.bias", b), ("prelu.slopes", a), ("fc.weights", fw), ("fc.bias", fb)];
            resample_until_smooth(rng, op, &inputs, tol, |g, v| {
                let h = g.conv2d(v[0], v[1], v[2])?;
                let h = g.prelu(h, v[3])?;
                let h = g.flatten(h)?;
                g.softmax_cross_entropy(h, v[4], v[5], &labels)
            })
        }
        other => Err(crate::error::Error::Invalid(format!("unknown gradient-check op {other:?}"))),
    }
}

/// Rejects sample points where a PReLU pre-activation sits within the step
/// of its kink, drawing fresh inputs instead.
fn resample_until_smooth<F>(
    rng: &mut ChaCha8Rng,
    op: &str,
    inputs: &[(&str, Tensor<f64>)],
    tol: f64,
    build: F,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let mut current: Vec<(&str, Tensor<f64>)> = inputs.to_vec();
    for _ in 0..64 {
        if min_preactivation_magnitude(&current, &build)? > 10.0 * STEP {
            break;
        }
        let shape = current[0].1.shape().to_vec();
        current[0].1 = uniform(rng, &shape, -1.0, 1.0);
    }
    gradient_check(op, &current, build, tol)
}

fn min_preactivation_magnitude<F>(inputs: &[(&str, Tensor<f64>)], build: &F) -> Result<f64>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let mut graph = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|(_, t)| graph.param(t.clone())).collect();
    build(&mut graph, &vars)?;
    Ok(graph.preactivation_gap())
}
