// Scratch probe for the antenna-count ablation and the transfer ladder.
// Run: cargo run --release -p csipos-core --example ablation_probe [mode] [epochs]
// mode: "antennas" | "transfer"

use csipos_core::channel::{build_topology, generate_grid_dataset, Area, Dataset,
                           GeometryConfig, RadioConfig, TopologyKind};
use csipos_core::evalkit::{antenna_subsample, mean_error, SubsampleStrategy};
use csipos_core::features::FeatureTensor;
use csipos_core::numerics::AdamConfig;
use csipos_core::posnet::{build_positioning_cnn, predict, stage1_boundary, ArchConfig};
use csipos_core::trainer::{prepare_folds, split_dataset, train, transfer_train, Fold,
                           SplitConfig, TrainConfig};
use std::time::Instant;

fn desk_dataset(kind: TopologyKind) -> Dataset {
    let topo = build_topology(kind, &GeometryConfig::default()).unwrap();
    let radio = RadioConfig::default();
    generate_grid_dataset(&topo, &radio, &[Area::desk_default()], 25.0, 200.0, 1).unwrap()
}

fn test_me(model: &csipos_core::numerics::Model, fold: &Fold, lambda: f64) -> (f64, f64) {
    let preds: Vec<[f64; 2]> = fold
        .inputs
        .iter()
        .map(|t| {
            let p = predict(model, &FeatureTensor { tensor: t.clone() }).unwrap();
            fold.label_map.denormalize(p)
        })
        .collect();
    mean_error(&preds, &fold.positions_mm, lambda).unwrap()
}

fn cfg(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 32,
        patience: 0,
        seed,
        adam: AdamConfig { lr: 3e-3, ..Default::default() },
        ..TrainConfig::default()
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(|s| s.as_str()).unwrap_or("antennas");
    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(60);
    let lambda = RadioConfig::default().wavelength_mm();
    let area = Area::desk_default();

    match mode {
        "antennas" => {
            let full = desk_dataset(TopologyKind::Ura);
            for seed in [1u64, 2, 3] {
                let mut line = format!("seed {seed}:");
                for n in [8usize, 16, 32, 64] {
                    let t = Instant::now();
                    let ds = antenna_subsample(&full, n, SubsampleStrategy::EvenlySpaced).unwrap();
                    let split = split_dataset(ds.len(), &SplitConfig { seed, ..Default::default() }).unwrap();
                    let (tr, va, te, _) = prepare_folds(&ds, &split, &area).unwrap();
                    let arch = ArchConfig::desk(n, 16);
                    let mut model = build_positioning_cnn(&arch, seed).unwrap();
                    train(&mut model, &tr, &va, &cfg(epochs, seed)).unwrap();
                    let (me, _) = test_me(&model, &te, lambda);
                    line.push_str(&format!("  n={n}: {me:6.2} mm ({:.0?})", t.elapsed()));
                }
                println!("{line}");
            }
        }
        "transfer" => {
            let ura = desk_dataset(TopologyKind::Ura);
            let ula = desk_dataset(TopologyKind::Ula);
            let arch = ArchConfig::desk(64, 16);
            let boundary = stage1_boundary(&arch).unwrap();
            println!("freeze boundary: {boundary}");
            for seed in [1u64, 2, 3] {
                // Pretrain on URA.
                let t = Instant::now();
                let split = split_dataset(ura.len(), &SplitConfig { seed, ..Default::default() }).unwrap();
                let (tr, va, _, _) = prepare_folds(&ura, &split, &area).unwrap();
                let mut pre = build_positioning_cnn(&arch, seed).unwrap();
                train(&mut pre, &tr, &va, &cfg(epochs, seed)).unwrap();
                println!("seed {seed}: URA pretrain done ({:.0?})", t.elapsed());

                // From-scratch full ULA reference.
                let split_u = split_dataset(ula.len(), &SplitConfig { seed, ..Default::default() }).unwrap();
                let (tru, vau, teu, _) = prepare_folds(&ula, &split_u, &area).unwrap();
                let t = Instant::now();
                let mut scratch = build_positioning_cnn(&arch, seed).unwrap();
                train(&mut scratch, &tru, &vau, &cfg(epochs, seed)).unwrap();
                let (scratch_me, _) = test_me(&scratch, &teu, lambda);
                println!("  ULA from scratch: {scratch_me:.2} mm ({:.0?})", t.elapsed());

                // Transfer ladder.
                for budget in [110usize, 221, 553, 1105] {
                    let t = Instant::now();
                    let mut model = pre.clone();
                    transfer_train(&mut model, &tru, &vau, budget, boundary, &cfg(epochs, seed))
                        .unwrap();
                    let (me, _) = test_me(&model, &teu, lambda);
                    println!("  budget {budget:5}: {me:6.2} mm ({:.0?})", t.elapsed());
                }
            }
        }
        other => eprintln!("unknown mode {other}"),
    }
}
