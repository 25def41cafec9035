use criterion::{black_box, criterion_group, criterion_main, Criterion};

use certrand_core::eat::eat_bound;
use certrand_core::extractor::{build_weak_design, Extractor};
use certrand_core::verifier::lxeb_score;
use certrand_core::wire::{Challenge, Payload, WireMessage};
use certrand_core::{derive_circuit, output_distribution, prf_block, Ensemble, Key32, MinTradeoff};

fn simulation(c: &mut Criterion) {
    let key = Key32::filled(1);
    for (ensemble, n, depth) in [(Ensemble::HaarColumn, 10, None), (Ensemble::Fourier, 12, None), (Ensemble::Brickwork, 8, Some(8))] {
        let circuit = derive_circuit(&key, 0, ensemble, n, depth).unwrap();
        c.bench_function(&format!("output_distribution/{ensemble}/n={n}"), |b| {
            b.iter(|| output_distribution(black_box(&circuit)).unwrap())
        });
    }
}

fn scoring(c: &mut Criterion) {
    let circuit = derive_circuit(&Key32::filled(2), 0, Ensemble::HaarColumn, 10, None).unwrap();
    let p = output_distribution(&circuit).unwrap();
    let samples: Vec<u64> = (0..1000).map(|i| (i * 7919) % 1024).collect();
    c.bench_function("lxeb_score/k=1000", |b| b.iter(|| lxeb_score(&p, black_box(&samples)).unwrap()));
    c.bench_function("prf_block", |b| b.iter(|| prf_block(&Key32::filled(3), b"bench", black_box(7))));
}

fn extraction(c: &mut Criterion) {
    c.bench_function("weak_design/m=1024,t=256", |b| b.iter(|| build_weak_design(black_box(1024), 256).unwrap()));
    let ext = Extractor::new(30_000, 256, 2f64.powi(-32)).unwrap();
    let x: Vec<bool> = (0..30_000).map(|i| (i * 31) % 7 < 3).collect();
    let y: Vec<bool> = (0..ext.seed_len()).map(|i| (i * 17) % 5 < 2).collect();
    c.bench_function("trevisan/30000->256", |b| b.iter(|| ext.extract(black_box(&x), &y).unwrap()));
}

fn certificate_and_wire(c: &mut Criterion) {
    let f = MinTradeoff::xhog_general(10, 0.01, 0.0).unwrap();
    c.bench_function("eat_bound", |b| b.iter(|| eat_bound(black_box(1_000_000), &f, 1.5, 1024, 0.9, 1e-10).unwrap()));
    let circuit = derive_circuit(&Key32::filled(4), 0, Ensemble::HaarColumn, 10, None).unwrap();
    let msg = WireMessage::new([1; 16], 3, Payload::Challenge(Challenge { circuit, k: 1 }));
    let bytes = msg.encode().unwrap();
    c.bench_function("wire/encode", |b| b.iter(|| black_box(&msg).encode().unwrap()));
    c.bench_function("wire/decode", |b| b.iter(|| WireMessage::decode(black_box(&bytes)).unwrap()));
}

criterion_group!(benches, simulation, scoring, extraction, certificate_and_wire);
criterion_main!(benches);
