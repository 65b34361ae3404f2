use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use od2rnn_bench::{model, prepared_dataset};
use od2rnn_core::layers::GruCell;
use od2rnn_core::{Mode, Preset, RngStream};

fn gru(c: &mut Criterion) {
    let mut rng = RngStream::new(2);
    let mut group = c.benchmark_group("gru");
    for hidden in [32, 64, 256] {
        let cell = GruCell::new(16, hidden, &mut rng);
        let xs: Vec<Vec<f64>> = (0..20).map(|_| rng.uniform(-1.0, 1.0, 16).unwrap()).collect();
        let h0 = vec![0.0; hidden];
        group.bench_function(format!("sequence_t20_h{hidden}"), |b| {
            b.iter(|| cell.sequence(black_box(&xs), &h0).unwrap())
        });
        let (hs, trace) = cell.sequence(&xs, &h0).unwrap();
        let grads: Vec<Vec<f64>> = hs.iter().map(|h| vec![1.0; h.len()]).collect();
        group.bench_function(format!("bptt_t20_h{hidden}"), |b| {
            b.iter(|| cell.backward(black_box(&trace), &grads).unwrap())
        });
    }
    group.finish();
}

fn network(c: &mut Criterion) {
    let ds = prepared_dataset();
    let sample = &ds.samples[0];
    let net = model(&ds, Preset::Desk);
    let dropout = RngStream::new(3);
    let mut group = c.benchmark_group("od2rnn_desk");
    group.bench_function("predict", |b| b.iter(|| net.predict(black_box(sample)).unwrap()));
    group.bench_function("forward_backward", |b| {
        b.iter_batched(
            || dropout.clone(),
            |rng| {
                let pass = net.forward(sample, Mode::Train, &rng).unwrap();
                net.backward(&pass, sample.label).unwrap()
            },
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

criterion_group!(benches, gru, network);
criterion_main!(benches);
