//! Affine loop nests to a structural hardware IR, Verilog, and a
//! cycle-accurate simulator.
//!
//! The pipeline is `parse` → `verify_module` → optional `unroll_full` /
//! `unroll_by_factor` → `lower` → `emit_verilog` or `simulate`. The affine
//! `interpret` function is the functional reference for every stage.

pub mod affine_ir;
pub mod diagnostic;
pub mod fixtures;
pub mod hw_ir;
pub mod lowering;
pub mod memory;
pub mod parser;
pub mod rtl;
pub mod sim;
pub mod testgen;
pub mod transforms;

pub use affine_ir::{
    alpha_equivalent, canonicalize, gen_gemm, interpret, verify_func, verify_module, AffineExpr, AffineFor, AffineFunc,
    AffineModule, AffineOp, InterpError, IterArg, MemRefType, OpKind, GEMM_FUNC_NAME,
};
pub use diagnostic::Diagnostic;
pub use fixtures::check_fixtures;
pub use hw_ir::{
    dump, resource_counts, static_latency, validate, Cell, CellKind, Control, Group, HwComponent, Latency, ResourceReport,
};
pub use lowering::{lower, lower_module, LowerError};
pub use memory::{MemoryImage, MemorySet};
pub use parser::{parse, parse_with_spans, print, ParseError, Parsed, SourceSpan};
pub use rtl::{emit_testbench, emit_verilog, netlist_check, run_verilog, EmitError, VerilogText};
pub use sim::{bench, simulate, BenchRow, BenchTable, SimError, SimResult, Variant};
pub use transforms::{unroll_by_factor, unroll_full, LoopPath, TransformError};
