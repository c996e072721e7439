// Scratch micro-profiler for forward/backward hot paths.
use csipos_core::numerics::{mse_loss_grad, Model, Phase, Tensor};
use csipos_core::posnet::{build_positioning_cnn, ArchConfig};
use csipos_core::rng::rng_from_seed;
use rand::Rng as _;
use std::time::Instant;

fn main() {
    let arch = ArchConfig::desk(64, 16);
    let model = build_positioning_cnn(&arch, 7).unwrap();
    let mut rng = rng_from_seed(1);
    let shape = arch.input_shape();
    let len: usize = shape.iter().product();
    let input = Tensor::from_vec(&shape, (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let target = Tensor::from_vec(&[2], vec![0.3, 0.6]).unwrap();

    let reps = 500;
    let t = Instant::now();
    for _ in 0..reps {
        let acts = model.forward(&input, Phase::Infer).unwrap();
        std::hint::black_box(&acts);
    }
    let fwd = t.elapsed().as_secs_f64() / reps as f64;
    println!("forward:          {:.3} ms", fwd * 1e3);

    let t = Instant::now();
    for _ in 0..reps {
        let acts = model.forward(&input, Phase::Train { dropout_seed: 1 }).unwrap();
        let (_, grad_out) = mse_loss_grad(acts.output(), &target).unwrap();
        let g = model.backward(&acts, &grad_out).unwrap();
        std::hint::black_box(&g);
    }
    let both = t.elapsed().as_secs_f64() / reps as f64;
    println!("forward+backward: {:.3} ms ({:.3} ms backward-ish)", both * 1e3, (both - fwd) * 1e3);

    // Per-layer forward timing
    per_layer(&model, &input);
}

fn per_layer(model: &Model, input: &Tensor) {
    use csipos_core::numerics::LayerSpec;
    let acts = model.forward(input, Phase::Infer).unwrap();
    println!("\nper-layer forward (500 reps):");
    for (idx, layer) in model.layers.iter().enumerate() {
        let x = &acts.values[idx];
        let reps = 500;
        let t = Instant::now();
        for _ in 0..reps {
            let out = match &layer.spec {
                LayerSpec::Conv2d { stride, padding, .. } => {
                    csipos_core::numerics::conv2d(x, &layer.weights, &layer.bias, *stride, *padding).unwrap()
                }
                LayerSpec::Dense { .. } => {
                    csipos_core::numerics::dense(x, &layer.weights, &layer.bias).unwrap()
                }
                _ => continue,
            };
            std::hint::black_box(&out);
        }
        let dt = t.elapsed().as_secs_f64() / reps as f64 * 1e6;
        println!("  layer {:2} {:12} in {:?}: {:.1} us", idx, layer.spec.kind_name(), x.shape(), dt);
    }
}
