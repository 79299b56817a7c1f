use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use cryptorates::derivatives::{bond_call_b4, caplet_price, OptionMethod};
use cryptorates::fx::{crypto_usd_call, FxMethod, KernelLeg};
use cryptorates::kernels::KernelModel;
use cryptorates::mc::{martingale_test, McOptions};
use cryptorates::numerics::{erf, erf_inv};
use cryptorates::stochastic::RngStream;
use cryptorates::term_structure::{bond_price, yield_curve};
use cryptorates_bench::{bond_call, caplet, dollar, flat};

fn special_functions(c: &mut Criterion) {
    let mut g = c.benchmark_group("special");
    g.bench_function("erf", |b| b.iter(|| erf(black_box(0.7)).unwrap()));
    g.bench_function("erf_tail", |b| b.iter(|| erf(black_box(3.5)).unwrap()));
    g.bench_function("erf_inv", |b| b.iter(|| erf_inv(black_box(0.9)).unwrap()));
    g.finish();
}

fn term_structure(c: &mut Criterion) {
    let curve = flat(0.75);
    let mut g = c.benchmark_group("term_structure");
    for model in [KernelModel::bessel3(), KernelModel::bessel4()] {
        let s0 = model.initial_state().unwrap();
        g.bench_with_input(BenchmarkId::new("bond_price", model.name()), &model, |b, m| {
            b.iter(|| bond_price(m, &s0, &curve, black_box(2.0)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("yield", model.name()), &model, |b, m| {
            b.iter(|| yield_curve(m, &curve, black_box(5.0)).unwrap())
        });
    }
    g.finish();
}

fn options(c: &mut Criterion) {
    let curve = flat(0.6);
    let spec = bond_call(0.5);
    let mut g = c.benchmark_group("bessel4_call");
    g.bench_function("series", |b| {
        b.iter(|| bond_call_b4(black_box(&spec), &curve, OptionMethod::Series { k_max: 20 }).unwrap())
    });
    g.bench_function("quadrature", |b| {
        b.iter(|| bond_call_b4(black_box(&spec), &curve, OptionMethod::Quadrature).unwrap())
    });
    g.finish();

    let b3 = KernelModel::bessel3();
    let curve = flat(0.75);
    c.bench_function("caplet", |b| b.iter(|| caplet_price(&b3, black_box(&caplet(0.2)), &curve).unwrap()));

    let leg = KernelLeg::new(KernelModel::bessel3(), flat(0.75), 1.0).unwrap();
    let usd = dollar();
    c.bench_function("crypto_usd_radial", |b| {
        b.iter(|| {
            crypto_usd_call(
                &leg,
                &usd,
                1.0,
                black_box(0.8),
                FxMethod::RadialQuadrature,
                &McOptions::default(),
                &RngStream::new(0, 0),
            )
            .unwrap()
        })
    });
}

fn monte_carlo(c: &mut Criterion) {
    let curve = flat(0.75);
    let model = KernelModel::bessel3();
    let mut g = c.benchmark_group("monte_carlo");
    g.sample_size(10);
    for n in [10_000u64, 100_000] {
        g.bench_with_input(BenchmarkId::new("martingale_test", n), &n, |b, &n| {
            b.iter(|| martingale_test(&model, &curve, 2.0, 1.0, &McOptions::new(n), &RngStream::new(42, 0)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, special_functions, term_structure, options, monte_carlo);
criterion_main!(benches);
