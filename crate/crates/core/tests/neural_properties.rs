use fraudkit::augment::{default_gan_spec, sample_synthetic, train_gan, GanVariant};
use fraudkit::neural::{Activation, LayerSpec, Loss, Matrix, Network, NetworkSpec};
use fraudkit::rng;
use rand::Rng;
use rand_distr::StandardNormal;

const ACTIVATIONS: [Activation; 5] = [
    Activation::Relu,
    Activation::LeakyRelu,
    Activation::Tanh,
    Activation::Logistic,
    Activation::Linear,
];

fn random_problem(seed: u64) -> (Network, Matrix, Matrix) {
    let mut r = rng::seeded(seed);
    let input = r.random_range(1..5);
    let depth = r.random_range(1..4);
    let loss = [Loss::Mse, Loss::BinaryCrossEntropy, Loss::WassersteinCritic][seed as usize % 3];
    let mut layers: Vec<LayerSpec> = (0..depth)
        .map(|_| LayerSpec::new(r.random_range(1..6), ACTIVATIONS[r.random_range(0..5)]))
        .collect();
    let out_width = if loss == Loss::WassersteinCritic { 1 } else { r.random_range(1..3) };
    let head = if loss == Loss::BinaryCrossEntropy { Activation::Logistic } else { ACTIVATIONS[r.random_range(0..5)] };
    layers.push(LayerSpec::new(out_width, head));
    let mut net = Network::init(&NetworkSpec::new(input, layers, loss), seed).unwrap();
    // zero biases put dead-relu rows exactly on the next layer's kink
    let generic: Vec<f64> = net.parameters().iter().map(|_| 0.7 * r.sample::<f64, _>(StandardNormal)).collect();
    net.set_parameters(&generic);
    let rows = r.random_range(2..7);
    let x: Vec<Vec<f64>> = (0..rows).map(|_| (0..input).map(|_| r.sample(StandardNormal)).collect()).collect();
    let t: Vec<Vec<f64>> = (0..rows)
        .map(|i| match loss {
            Loss::WassersteinCritic => vec![if i % 2 == 0 { 1.0 } else { -1.0 }],
            Loss::BinaryCrossEntropy => (0..out_width).map(|_| f64::from(r.random_bool(0.5))).collect(),
            Loss::Mse => (0..out_width).map(|_| r.sample(StandardNormal)).collect(),
        })
        .collect();
    let tc = t[0].len();
    (net, Matrix::from_rows(&x, input).unwrap(), Matrix::from_rows(&t, tc).unwrap())
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-7)
}

#[test]
fn backprop_matches_central_differences() {
    let h = 1e-6;
    for seed in 0..25 {
        let (mut net, x, t) = random_problem(seed);
        let (_, grads) = net.loss_and_gradients(&x, &t).unwrap();
        let analytic = grads.flatten();
        let base = net.parameters();
        assert_eq!(analytic.len(), base.len());
        let mut worst: f64 = 0.0;
        for i in 0..base.len() {
            let mut p = base.clone();
            p[i] = base[i] + h;
            net.set_parameters(&p);
            let up = net.loss(&x, &t).unwrap();
            p[i] = base[i] - h;
            net.set_parameters(&p);
            let down = net.loss(&x, &t).unwrap();
            let numeric = (up - down) / (2.0 * h);
            // absolute floor for parameters with vanishing gradient
            if analytic[i].abs().max(numeric.abs()) > 1e-9 {
                worst = worst.max(rel_err(analytic[i], numeric));
            }
        }
        net.set_parameters(&base);
        assert!(worst <= 1e-4, "seed {seed}: relative error {worst:.3e}");
    }
}

#[test]
fn input_gradient_matches_central_differences() {
    let h = 1e-6;
    for seed in 100..110 {
        let (net, x, t) = random_problem(seed);
        let trace = net.forward_trace(&x).unwrap();
        let (_, d_out) = fraudkit::neural::loss_and_output_gradient(net.spec.loss, trace.output(), &t).unwrap();
        let (_, d_in) = net.backward(&trace, &d_out);
        for i in 0..x.data.len() {
            let mut xp = x.clone();
            xp.data[i] += h;
            let mut xm = x.clone();
            xm.data[i] -= h;
            let numeric = (net.loss(&xp, &t).unwrap() - net.loss(&xm, &t).unwrap()) / (2.0 * h);
            if d_in.data[i].abs().max(numeric.abs()) > 1e-9 {
                assert!(rel_err(d_in.data[i], numeric) <= 1e-4, "seed {seed} input {i}");
            }
        }
    }
}

fn mean_col(rows: &[Vec<f64>], j: usize) -> f64 {
    rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64
}

#[test]
fn gans_move_toward_the_minority_cloud() {
    let mut r = rng::seeded(3);
    let cloud: Vec<Vec<f64>> = (0..64)
        .map(|_| vec![0.8 + 0.05 * r.sample::<f64, _>(StandardNormal), 0.2 + 0.05 * r.sample::<f64, _>(StandardNormal)])
        .map(|v: Vec<f64>| v.into_iter().map(|x| x.clamp(0.0, 1.0)).collect())
        .collect();
    let target = [mean_col(&cloud, 0), mean_col(&cloud, 1)];
    let gap = |s: &[Vec<f64>]| (0..2).map(|j| (mean_col(s, j) - target[j]).abs()).sum::<f64>();
    let run = |variant, epochs| {
        let mut spec = default_gan_spec(variant, 2).unwrap();
        spec.train.epochs = epochs;
        let gan = train_gan(&cloud, &spec).unwrap();
        assert_eq!(gan.discriminator_losses.len(), epochs);
        sample_synthetic(&gan, 400, 9)
    };
    let start = run(GanVariant::Vgan, 1);
    let end = run(GanVariant::Vgan, 600);
    assert!(gap(&end) < 0.5 * gap(&start), "vgan: {} vs {}", gap(&end), gap(&start));
    assert!(gap(&end) < 0.15, "vgan: {}", gap(&end));
    // a clipped critic is close to linear, so only the direction of travel is checked
    let start = run(GanVariant::Wgan, 1);
    let end = run(GanVariant::Wgan, 400);
    assert!(gap(&end) < 0.75 * gap(&start), "wgan: {} vs {}", gap(&end), gap(&start));
    assert!(mean_col(&end, 0) > mean_col(&start, 0) && mean_col(&end, 1) < mean_col(&start, 1));
}

