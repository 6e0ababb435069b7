use std::hint::black_box;

use actlang::generator::{generate_short, simulate, CountModel, GenConfig};
use actlang::{fit_trends, fixtures, infer_grammar, solve_ctmc};
use actlang_bench::{chain, point_mass, tables};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn inference(c: &mut Criterion) {
    let corpus = fixtures::table4_grammar_corpus();
    let alphabet = fixtures::alphabet();
    c.bench_function("infer_grammar", |b| b.iter(|| infer_grammar(black_box(&corpus), &alphabet).unwrap()));
    let series = fixtures::series();
    c.bench_function("fit_trends", |b| b.iter(|| fit_trends(black_box(&series)).unwrap()));
}

fn generation(c: &mut Criterion) {
    let tables = tables();
    let counts = CountModel::geometric(fixtures::alphabet().letters(), 2.5).unwrap();
    let mut g = c.benchmark_group("generate");
    for n in [1_000u64, 10_000] {
        let cfg = GenConfig::new(7, n).unwrap();
        g.bench_with_input(BenchmarkId::new("short", n), &cfg, |b, cfg| b.iter(|| generate_short(&tables, cfg).unwrap()));
        g.bench_with_input(BenchmarkId::new("with_counts", n), &cfg, |b, cfg| {
            b.iter(|| simulate(&tables, &counts, cfg).unwrap())
        });
    }
    g.finish();
}

fn markov(c: &mut Criterion) {
    let chain = chain();
    let p0 = point_mass(14);
    let mut g = c.benchmark_group("solve_ctmc");
    for t in [0.5, 10.0] {
        g.bench_with_input(BenchmarkId::from_parameter(t), &t, |b, t| b.iter(|| solve_ctmc(&chain, &p0, *t).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, inference, generation, markov);
criterion_main!(benches);
