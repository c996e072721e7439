// Scratch probe for desk-scale training throughput and accuracy.
// Run: cargo run --release -p csipos-core --example desk_probe [epochs] [arch]

use csipos_core::channel::{build_topology, generate_grid_dataset, Area, GeometryConfig,
                           RadioConfig, TopologyKind};
use csipos_core::evalkit::{mean_error, nn_baseline};
use csipos_core::posnet::{build_positioning_cnn, param_count, predict, ArchConfig};
use csipos_core::trainer::{prepare_folds, split_dataset, train, SplitConfig, TrainConfig};
use csipos_core::features::FeatureTensor;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let arch_name = args.get(2).map(|s| s.as_str()).unwrap_or("desk");
    let lr: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(3e-3);
    let dropout: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.2);

    let t0 = Instant::now();
    let topo = build_topology(TopologyKind::Ura, &GeometryConfig::default()).unwrap();
    let radio = RadioConfig::default(); // K=16, noise-free
    let area = Area::desk_default();
    let ds = generate_grid_dataset(&topo, &radio, &[area], 25.0, 200.0, 1).unwrap();
    println!("dataset: {} samples, N={}, K={}  ({:.1?})", ds.len(), ds.n_antennas,
             ds.n_subcarriers(), t0.elapsed());

    let split = split_dataset(ds.len(), &SplitConfig { seed: 1, ..SplitConfig::default() }).unwrap();
    println!("split: {}/{}/{}", split.train.len(), split.val.len(), split.test.len());

    let t1 = Instant::now();
    let (train_fold, val_fold, test_fold, _norm) = prepare_folds(&ds, &split, &area).unwrap();
    println!("folds prepared ({:.1?})", t1.elapsed());

    let mut arch = match arch_name {
        "paper" => ArchConfig::paper(64, radio.subcarriers),
        _ => ArchConfig::desk(64, radio.subcarriers),
    };
    arch.dropout_rate = dropout;
    let mut model = build_positioning_cnn(&arch, 7).unwrap();
    println!("arch {} params {} lr {} dropout {}", arch_name,
             param_count(&model).total(), lr, dropout);

    let cfg = TrainConfig {
        epochs,
        batch_size: 32,
        patience: 0,
        seed: 7,
        adam: csipos_core::numerics::AdamConfig { lr, ..Default::default() },
        ..TrainConfig::default()
    };
    let t2 = Instant::now();
    let outcome = train(&mut model, &train_fold, &val_fold, &cfg).unwrap();
    let dt = t2.elapsed();
    println!("trained {} epochs in {:.1?} ({:.2} s/epoch)", outcome.history.len(), dt,
             dt.as_secs_f64() / outcome.history.len().max(1) as f64);
    for h in outcome.history.iter().step_by(5.max(outcome.history.len()/10)) {
        println!("  epoch {:3}  train_loss {:.3e}  val_loss {:.3e}  val_me {:.1} mm",
                 h.epoch, h.train_loss, h.val_loss, h.val_me_mm);
    }
    println!("best epoch {} val_me {:.2} mm", outcome.best_epoch, outcome.best_val_me_mm);

    // Test ME
    let preds: Vec<[f64; 2]> = test_fold.inputs.iter().map(|t| {
        let p = predict(&model, &FeatureTensor { tensor: t.clone() }).unwrap();
        test_fold.label_map.denormalize(p)
    }).collect();
    let lambda = radio.wavelength_mm();
    let (me_mm, me_l) = mean_error(&preds, &test_fold.positions_mm, lambda).unwrap();
    println!("CNN test ME: {:.2} mm ({:.3} lambda)", me_mm, me_l);

    // NN baseline on raw CSI
    let t3 = Instant::now();
    let train_samples: Vec<_> = split.train.iter().map(|&i| ds.samples[i].clone()).collect();
    let test_samples: Vec<_> = split.test.iter().map(|&i| ds.samples[i].clone()).collect();
    let nn_preds = nn_baseline(&train_samples, &test_samples);
    let truths: Vec<[f64; 2]> = test_samples.iter().map(|s| s.position).collect();
    let (nn_mm, nn_l) = mean_error(&nn_preds, &truths, lambda).unwrap();
    println!("NN baseline ME: {:.2} mm ({:.3} lambda)  ({:.1?})", nn_mm, nn_l, t3.elapsed());
    println!("ratio NN/CNN: {:.2}x  (need >= 2)", nn_mm / me_mm);
}
