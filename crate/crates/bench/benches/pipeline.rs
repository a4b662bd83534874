use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hlsflow_bench::{gemm_design, gemm_module};
use hlsflow_core::sim::Variant;
use hlsflow_core::{emit_verilog, interpret, lower, parse, print, simulate};

fn frontend(c: &mut Criterion) {
    let text = print(&gemm_module(32, Variant::Nested));
    c.bench_function("parse gemm32", |b| b.iter(|| parse(black_box(&text)).unwrap()));
    let flat = gemm_module(32, Variant::Flattened);
    c.bench_function("print gemm32 flattened", |b| b.iter(|| print(black_box(&flat))));
}

fn backend(c: &mut Criterion) {
    let mut g = c.benchmark_group("lower+emit");
    for variant in [Variant::Nested, Variant::Flattened] {
        let m = gemm_module(32, variant);
        g.bench_with_input(BenchmarkId::new("lower", variant), &m, |b, m| b.iter(|| lower(&m.funcs[0]).unwrap()));
        let hw = lower(&m.funcs[0]).unwrap();
        g.bench_with_input(BenchmarkId::new("emit_verilog", variant), &hw, |b, hw| b.iter(|| emit_verilog(hw).unwrap()));
    }
    g.finish();
}

fn execution(c: &mut Criterion) {
    let mut g = c.benchmark_group("execute gemm");
    g.sample_size(10);
    for n in [4u64, 8, 16] {
        for variant in [Variant::Nested, Variant::Flattened] {
            let (hw, mems) = gemm_design(n, variant);
            g.bench_with_input(BenchmarkId::new(format!("simulate/{variant}"), n), &(hw, mems), |b, (hw, mems)| {
                b.iter(|| simulate(hw, mems, u64::MAX).unwrap())
            });
        }
        let m = gemm_module(n, Variant::Nested);
        let mems = gemm_design(n, Variant::Nested).1;
        g.bench_with_input(BenchmarkId::new("interpret", n), &(m, mems), |b, (m, mems)| b.iter(|| interpret(&m.funcs[0], mems).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, frontend, backend, execution);
criterion_main!(benches);
