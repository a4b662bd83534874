//! Shared setup for the pipeline benchmarks.

use hlsflow_core::memory::MemorySet;
use hlsflow_core::sim::{gemm_inputs, Variant, DEFAULT_SEED};
use hlsflow_core::transforms::{unroll_full, LoopPath};
use hlsflow_core::{gen_gemm, lower, AffineModule, HwComponent};

pub fn gemm_module(n: u64, variant: Variant) -> AffineModule {
    let m = gen_gemm(n);
    match variant {
        Variant::Nested => m,
        Variant::Flattened => unroll_full(&m, &LoopPath::new(None, &[0, 0, 0])).expect("gemm has an innermost loop"),
    }
}

/// Lowered GEMM plus seeded input images.
pub fn gemm_design(n: u64, variant: Variant) -> (HwComponent, MemorySet) {
    let c = lower(&gemm_module(n, variant).funcs[0]).expect("gemm lowers");
    (c, gemm_inputs(n, DEFAULT_SEED))
}
