use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use sounder_core::filterbank::{assemble_bank, synthesize_channel, BankLayout, ChannelDesign, SynthesisOptions};
use sounder_core::network::{brute_force_smatrix, ConnectionGraph};
use sounder_core::waveguide::{section_smatrix, WaveguideSpec};
use sounder_core::FrequencyGrid;

fn g_band() -> Vec<ChannelDesign> {
    let guide = WaveguideSpec::wr5();
    [183.31, 180.31, 177.31, 174.31, 171.31]
        .iter()
        .map(|f| synthesize_channel(f * 1e9, 2e9, &guide, &SynthesisOptions::default()).unwrap())
        .collect()
}

fn bench_synthesis(c: &mut Criterion) {
    let guide = WaveguideSpec::wr5();
    c.bench_function("synthesize_g_channel", |b| {
        b.iter(|| synthesize_channel(183.31e9, 2e9, &guide, &SynthesisOptions::default()).unwrap())
    });
}

fn bench_bank(c: &mut Criterion) {
    let channels = g_band();
    let layout = BankLayout::new(channels, vec![2.5e-3; 5], WaveguideSpec::wr5()).unwrap();
    let grid = FrequencyGrid::linspace(165e9, 190e9, 1001).unwrap();
    c.bench_function("assemble_5ch_bank_1001pt", |b| b.iter(|| assemble_bank(&layout, &grid).unwrap()));
}

fn bench_oracle(c: &mut Criterion) {
    let grid = FrequencyGrid::linspace(60e9, 70e9, 64).unwrap();
    let guide = WaveguideSpec::wr15();
    let sections: Vec<_> = (0..5).map(|i| section_smatrix(&guide, 1e-3 * (i + 1) as f64, &grid).unwrap()).collect();
    c.bench_function("brute_force_5_sections_64pt", |b| {
        b.iter_batched(
            || {
                ConnectionGraph::new(
                    sections.clone(),
                    (1..5).map(|i| ((i - 1, 1), (i, 0))).collect(),
                    vec![(0, 0), (4, 1)],
                )
                .unwrap()
            },
            |graph| brute_force_smatrix(&graph).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, bench_synthesis, bench_bank, bench_oracle);
criterion_main!(benches);
