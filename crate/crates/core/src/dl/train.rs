use super::model::{softmax, Model};
use super::{init_weights, Accuracy, Dataset, DlError, Record, TrainingParams};

/// Loss gradient for one record, shaped like the model's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(model: &Model) -> Self {
        Gradients {
            weights: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }
}

/// Scratch space reused across records.
struct Workspace {
    pre: Vec<Vec<f64>>,
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
    grads: Gradients,
}

impl Workspace {
    fn new(model: &Model) -> Self {
        let (pre, acts) = model.buffers();
        let widest = model.layer_sizes.iter().copied().max().unwrap_or(0);
        Workspace {
            pre,
            acts,
            delta: Vec::with_capacity(widest),
            delta_prev: Vec::with_capacity(widest),
            grads: Gradients::zeros_like(model),
        }
    }
}

/// `logsumexp(z) - z[label]`, with the maximum logit factored out.
fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for &z in logits {
        sum += libm::exp(z - max);
    }
    max + libm::log(sum) - logits[label]
}

/// Forward pass plus back-propagation into `ws.grads`; returns the loss.
///
/// Output delta is `softmax(z) - onehot(label)`. Going down a layer, the
/// incoming delta for unit `i` is `sum_j W[j][i] * delta[j]` (ascending `j`),
/// zeroed where the pre-activation is not positive. Weight gradients are
/// `delta[j] * input[i]`, bias gradients `delta[j]`.
fn backward(model: &Model, x: &[f64], label: usize, ws: &mut Workspace) -> f64 {
    model.forward_into(x, &mut ws.pre, &mut ws.acts);
    let logits = ws.acts.last().unwrap();
    let loss = cross_entropy(logits, label);
    ws.delta.clear();
    ws.delta.extend(softmax(logits));
    ws.delta[label] -= 1.0;

    for l in (0..model.num_layers()).rev() {
        let (n_in, n_out) = (model.layer_sizes[l], model.layer_sizes[l + 1]);
        let input = &ws.acts[l];
        let gw = &mut ws.grads.weights[l];
        let gb = &mut ws.grads.biases[l];
        for j in 0..n_out {
            let d = ws.delta[j];
            let row = &mut gw[j * n_in..(j + 1) * n_in];
            for i in 0..n_in {
                row[i] = d * input[i];
            }
            gb[j] = d;
        }
        if l > 0 {
            let w = &model.weights[l];
            let below = &ws.pre[l - 1];
            ws.delta_prev.clear();
            for i in 0..n_in {
                let mut s = 0.0;
                for j in 0..n_out {
                    s += w[j * n_in + i] * ws.delta[j];
                }
                ws.delta_prev.push(if below[i] > 0.0 { s } else { 0.0 });
            }
            std::mem::swap(&mut ws.delta, &mut ws.delta_prev);
        }
    }
    loss
}

/// `param -= learning_rate * grad`, element by element.
fn apply(model: &mut Model, grads: &Gradients, learning_rate: f64) {
    for (w, g) in model.weights.iter_mut().zip(&grads.weights) {
        for (x, &d) in w.iter_mut().zip(g) {
            *x -= learning_rate * d;
        }
    }
    for (b, g) in model.biases.iter_mut().zip(&grads.biases) {
        for (x, &d) in b.iter_mut().zip(g) {
            *x -= learning_rate * d;
        }
    }
}

fn check_record(model: &Model, r: &Record) -> Result<(), DlError> {
    if r.features.len() != model.input_dim() {
        return Err(DlError::BadInput { expected: model.input_dim(), found: r.features.len() });
    }
    if r.label as usize >= model.num_classes() {
        return Err(DlError::BadInput { expected: model.num_classes(), found: r.label as usize });
    }
    Ok(())
}

/// Analytic gradient of the cross-entropy loss for one record, and the loss.
pub fn gradients(model: &Model, record: &Record) -> Result<(Gradients, f64), DlError> {
    model.validate()?;
    check_record(model, record)?;
    let mut ws = Workspace::new(model);
    let loss = backward(model, &record.features, record.label as usize, &mut ws);
    Ok((ws.grads, loss))
}

/// Cross-entropy of one record.
pub fn record_loss(model: &Model, record: &Record) -> Result<f64, DlError> {
    check_record(model, record)?;
    let (mut pre, mut acts) = model.buffers();
    model.forward_into(&record.features, &mut pre, &mut acts);
    Ok(cross_entropy(acts.last().unwrap(), record.label as usize))
}

/// Mean cross-entropy over a dataset, summed in record order.
pub fn mean_loss(model: &Model, dataset: &Dataset) -> Result<f64, DlError> {
    let mut sum = 0.0;
    for r in dataset.records() {
        sum += record_loss(model, r)?;
    }
    Ok(sum / dataset.len() as f64)
}

/// Runs `epochs` passes of SGD over `records` in order, one update per record.
pub fn train_on(model: &mut Model, records: &[Record], learning_rate: f64, epochs: u32) -> Result<(), DlError> {
    for r in records {
        check_record(model, r)?;
    }
    let mut ws = Workspace::new(model);
    for epoch in 0..epochs {
        for (i, r) in records.iter().enumerate() {
            let loss = backward(model, &r.features, r.label as usize, &mut ws);
            if !loss.is_finite() {
                return Err(DlError::Diverged { epoch, record: i });
            }
            apply(model, &ws.grads, learning_rate);
        }
    }
    if model.validate().is_err() {
        return Err(DlError::Diverged { epoch: epochs.saturating_sub(1), record: records.len() });
    }
    Ok(())
}

/// Trains from `start` (or from `init_weights(params)` when absent) for
/// `epochs_to_run` epochs over `dataset` in stored order.
pub fn train(
    params: &TrainingParams,
    dataset: &Dataset,
    start: Option<&Model>,
    epochs_to_run: u32,
) -> Result<Model, DlError> {
    params.validate()?;
    let sizes = &params.layer_sizes;
    if dataset.input_dim() != sizes[0] || dataset.num_classes() != *sizes.last().unwrap() {
        return Err(DlError::BadArchitecture(format!(
            "layers {sizes:?} do not fit a {}-feature, {}-class dataset",
            dataset.input_dim(),
            dataset.num_classes()
        )));
    }
    let mut model = match start {
        Some(m) => {
            if &m.layer_sizes != sizes {
                return Err(DlError::BadArchitecture(format!(
                    "start model has layers {:?}, params say {sizes:?}",
                    m.layer_sizes
                )));
            }
            m.validate()?;
            m.clone()
        }
        None => init_weights(params)?,
    };
    train_on(&mut model, dataset.records(), params.learning_rate, epochs_to_run)?;
    Ok(model)
}

/// Fraction of records whose arg-max class probability equals the label.
/// Ties go to the lowest class index.
pub fn evaluate(model: &Model, test_set: &Dataset) -> Result<Accuracy, DlError> {
    if test_set.is_empty() {
        return Err(DlError::EmptyDataset);
    }
    model.validate()?;
    let (mut pre, mut acts) = model.buffers();
    let mut correct = 0u64;
    for r in test_set.records() {
        check_record(model, r)?;
        model.forward_into(&r.features, &mut pre, &mut acts);
        let probs = softmax(acts.last().unwrap());
        let mut best = 0;
        for (k, &p) in probs.iter().enumerate().skip(1) {
            if p > probs[best] {
                best = k;
            }
        }
        if best == r.label as usize {
            correct += 1;
        }
    }
    Accuracy::new(correct, test_set.len() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(x: &[f64], label: u32) -> Record {
        Record { features: x.to_vec(), label }
    }

    #[test]
    fn zero_epochs_is_identity() {
        let p = TrainingParams::new(vec![2, 4, 2], 0.1, 0, 11);
        let ds = Dataset::new(vec![rec(&[1.0, 2.0], 1), rec(&[-1.0, 0.5], 0)], 2, 2).unwrap();
        let start = init_weights(&p).unwrap();
        let out = train(&p, &ds, Some(&start), 0).unwrap();
        assert_eq!(out.serialize().unwrap(), start.serialize().unwrap());
        let fresh = train(&p, &ds, None, 0).unwrap();
        assert_eq!(fresh, start);
    }

    #[test]
    fn one_step_matches_hand_gradient() {
        // Single linear layer from zero weights: p = (1/2, 1/2), label 0, so
        // dL/dz = (-1/2, 1/2); dL/dW[j][i] = dz_j * x_i; dL/db = dz.
        let p = TrainingParams::new(vec![2, 2], 0.5, 1, 0);
        let x = [2.0, -4.0];
        let ds = Dataset::new(vec![rec(&x, 0)], 2, 2).unwrap();
        let start = Model::zeros(&[2, 2]).unwrap();
        let out = train(&p, &ds, Some(&start), 1).unwrap();
        let dz = [-0.5, 0.5];
        let mut expected_w = vec![0.0; 4];
        for j in 0..2 {
            for i in 0..2 {
                expected_w[j * 2 + i] = -0.5 * dz[j] * x[i];
            }
        }
        assert_eq!(out.weights[0], expected_w);
        assert_eq!(out.biases[0], vec![0.25, -0.25]);
    }

    #[test]
    fn shape_mismatch_is_bad_architecture() {
        let p = TrainingParams::new(vec![3, 2], 0.1, 1, 0);
        let ds = Dataset::new(vec![rec(&[1.0, 2.0], 1)], 2, 2).unwrap();
        assert!(matches!(train(&p, &ds, None, 1), Err(DlError::BadArchitecture(_))));
        let p = TrainingParams::new(vec![2, 2], 0.1, 1, 0);
        let other = Model::zeros(&[2, 3, 2]).unwrap();
        assert!(matches!(train(&p, &ds, Some(&other), 1), Err(DlError::BadArchitecture(_))));
    }

    #[test]
    fn huge_learning_rate_diverges() {
        let p = TrainingParams::new(vec![1, 4, 2], 1e300, 1, 0);
        let ds = Dataset::new(vec![rec(&[1e10], 0), rec(&[-1e10], 1)], 1, 2).unwrap();
        assert!(matches!(train(&p, &ds, None, 5), Err(DlError::Diverged { .. })));
    }

    #[test]
    fn constant_predictor_on_balanced_set() {
        // Bias favours class 1 regardless of input.
        let m = Model { layer_sizes: vec![1, 2], weights: vec![vec![0.0, 0.0]], biases: vec![vec![0.0, 1.0]] };
        let recs = (0..10).map(|i| rec(&[i as f64], (i % 2) as u32)).collect();
        let ds = Dataset::new(recs, 1, 2).unwrap();
        assert_eq!(evaluate(&m, &ds).unwrap(), Accuracy::new(5, 10).unwrap());
    }

    #[test]
    fn ties_go_to_lowest_class() {
        let m = Model::zeros(&[1, 3]).unwrap();
        let ds = Dataset::new(vec![rec(&[1.0], 0), rec(&[1.0], 1), rec(&[1.0], 2)], 1, 3).unwrap();
        assert_eq!(evaluate(&m, &ds).unwrap(), Accuracy::new(1, 3).unwrap());
    }

    #[test]
    fn separable_task_reaches_full_accuracy() {
        let recs: Vec<Record> = (0..40)
            .map(|i| {
                let t = i as f64 / 40.0;
                let label = (i % 2) as u32;
                let x = if label == 0 { -1.0 - t } else { 1.0 + t };
                rec(&[x, t], label)
            })
            .collect();
        let ds = Dataset::new(recs, 2, 2).unwrap();
        let p = TrainingParams::new(vec![2, 8, 2], 0.05, 50, 4);
        let m = train(&p, &ds, None, 50).unwrap();
        let correct = ds
            .records()
            .iter()
            .filter(|r| {
                let probs = crate::dl::feed_forward(&m, &r.features).unwrap();
                (probs[1] > probs[0]) as u32 == r.label
            })
            .count() as u64;
        assert_eq!(correct, 40);
        assert_eq!(evaluate(&m, &ds).unwrap(), Accuracy::new(correct, 40).unwrap());
    }

    #[test]
    fn empty_test_set() {
        // Dataset cannot be empty by construction; the guard covers prefix(0).
        let ds = Dataset::new(vec![rec(&[1.0], 0)], 1, 2).unwrap();
        assert_eq!(ds.prefix(0), Err(DlError::EmptyDataset));
    }
}
