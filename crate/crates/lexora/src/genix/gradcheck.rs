//! Numeric verification of the hand-written backward pass: central
//! differences on a miniature model, sampled across every tensor.

use rand::seq::IteratorRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::model::{sequence_loss, train_step, Hyper, ModelParams};
use super::vocab::Vocab;
use crate::taskschema::Task;

const EPSILON: f64 = 1e-5;

#[derive(Clone, Debug, Serialize)]
pub struct TensorCheck {
    pub tensor: String,
    pub n_checked: usize,
    pub max_rel_err: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub n_checked: usize,
    pub max_rel_err: f64,
    pub worst_tensor: String,
    pub tensors: Vec<TensorCheck>,
}

/// The fixed probe examples: two tasks, so at least two prompt tensors
/// receive real gradient, plus every other tensor in the model.
fn probes() -> Vec<(Task, Vec<u32>, Vec<u32>)> {
    let v = Vocab::new();
    vec![
        (Task::Fraud, v.encode("got 42 won.").unwrap(), v.encode("42 won").unwrap()),
        (Task::DrunkDriving, v.encode("drove a car 20m.").unwrap(), v.encode("car").unwrap()),
    ]
}

fn total_loss(params: &ModelParams) -> f64 {
    probes()
        .iter()
        .map(|(task, src, tgt)| sequence_loss(params, Some(*task), src, tgt))
        .sum()
}

/// Compare analytic gradients against central differences on a tiny
/// model. `min_coords` coordinates are distributed evenly over all
/// tensors (at least one each). The relative error uses a small floor so
/// genuinely-zero gradients compare cleanly.
pub fn grad_check(seed: u64, min_coords: usize) -> GradCheckReport {
    let mut params = ModelParams::new(Hyper::tiny(), seed);
    let mut grads = params.zeros_like();
    for (task, src, tgt) in probes() {
        train_step(&params, Some(task), &src, &tgt, &mut grads);
    }

    let n_tensors = params.tensors().len();
    let per_tensor = min_coords.div_ceil(n_tensors).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);

    let mut tensors = Vec::with_capacity(n_tensors);
    let mut n_checked = 0;
    let mut max_rel_err = 0.0f64;
    let mut worst_tensor = String::new();

    for ti in 0..n_tensors {
        let (name, len) = {
            let ts = params.tensors();
            (ts[ti].0.clone(), ts[ti].1.len())
        };
        let coords: Vec<usize> = (0..len).choose_multiple(&mut rng, per_tensor.min(len));
        let mut tensor_max = 0.0f64;
        for ci in coords {
            let analytic = grads.tensors()[ti].1.data[ci];
            let original = params.tensors()[ti].1.data[ci];

            params.tensors_mut()[ti].1.data[ci] = original + EPSILON;
            let plus = total_loss(&params);
            params.tensors_mut()[ti].1.data[ci] = original - EPSILON;
            let minus = total_loss(&params);
            params.tensors_mut()[ti].1.data[ci] = original;

            let numeric = (plus - minus) / (2.0 * EPSILON);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            tensor_max = tensor_max.max(rel);
            n_checked += 1;
        }
        if tensor_max > max_rel_err {
            max_rel_err = tensor_max;
            worst_tensor = name.clone();
        }
        tensors.push(TensorCheck {
            tensor: name,
            n_checked: per_tensor.min(len),
            max_rel_err: tensor_max,
        });
    }

    GradCheckReport { n_checked, max_rel_err, worst_tensor, tensors }
}
