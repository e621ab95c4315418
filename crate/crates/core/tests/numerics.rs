use podl_core::dl::rng::DetRng;
use podl_core::dl::{feed_forward, gradients, init_weights, record_loss, train, Dataset, Model, Record, TrainingParams};

fn random_case(seed: u64) -> (Model, Record) {
    let mut rng = DetRng::new("test/gradcheck", seed, 0);
    let depth = 1 + rng.below(3) as usize;
    let mut sizes = vec![1 + rng.below(4) as usize];
    for _ in 1..depth {
        sizes.push(1 + rng.below(5) as usize);
    }
    sizes.push(2 + rng.below(3) as usize);
    let mut model = init_weights(&TrainingParams::new(sizes.clone(), 0.1, 0, seed)).unwrap();
    for b in model.biases.iter_mut().flatten() {
        *b = rng.uniform(-0.5, 0.5);
    }
    let features = (0..sizes[0]).map(|_| rng.uniform(-2.0, 2.0)).collect();
    let label = rng.below(*sizes.last().unwrap() as u64) as u32;
    (model, Record { features, label })
}

fn rel_err(a: f64, n: f64) -> f64 {
    let scale = a.abs().max(n.abs());
    if scale < 1e-7 {
        (a - n).abs()
    } else {
        (a - n).abs() / scale
    }
}

#[test]
fn backprop_matches_central_differences() {
    let h = 1e-6;
    for seed in 0..100 {
        let (model, record) = random_case(seed);
        let (g, _) = gradients(&model, &record).unwrap();
        for l in 0..model.weights.len() {
            for i in 0..model.weights[l].len() {
                let (mut plus, mut minus) = (model.clone(), model.clone());
                plus.weights[l][i] += h;
                minus.weights[l][i] -= h;
                let n = (record_loss(&plus, &record).unwrap() - record_loss(&minus, &record).unwrap()) / (2.0 * h);
                let e = rel_err(g.weights[l][i], n);
                assert!(e < 1e-4, "seed {seed} w[{l}][{i}]: {} vs {n} ({e})", g.weights[l][i]);
            }
            for i in 0..model.biases[l].len() {
                let (mut plus, mut minus) = (model.clone(), model.clone());
                plus.biases[l][i] += h;
                minus.biases[l][i] -= h;
                let n = (record_loss(&plus, &record).unwrap() - record_loss(&minus, &record).unwrap()) / (2.0 * h);
                let e = rel_err(g.biases[l][i], n);
                assert!(e < 1e-4, "seed {seed} b[{l}][{i}]: {} vs {n} ({e})", g.biases[l][i]);
            }
        }
    }
}

#[test]
fn softmax_outputs_sum_to_one() {
    for seed in 0..50 {
        let (model, record) = random_case(seed);
        let p = feed_forward(&model, &record.features).unwrap();
        let s: f64 = p.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }
}

#[test]
fn training_is_bit_reproducible_in_process() {
    let (train_set, _) = podl_core::dl::generate_task(9, 60, 10, 1).unwrap();
    let p = TrainingParams::new(vec![2, 8, 3], 0.05, 30, 3);
    let a = train(&p, &train_set, None, 30).unwrap().serialize().unwrap();
    let b = train(&p, &train_set, None, 30).unwrap().serialize().unwrap();
    assert_eq!(a, b);
    let ds: &Dataset = &train_set;
    assert_eq!(train(&p, ds, None, 0).unwrap(), init_weights(&p).unwrap());
}
