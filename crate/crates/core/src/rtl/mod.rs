//! Verilog backend: a binary-encoded FSM drives group-activity wires, every
//! cell input is a priority mux over the groups that drive it, registers and
//! memories are clocked processes, and memories read combinationally.
//!
//! Handshake: `go` is sampled while idle; `done` is high for the single cycle
//! after the last group state. A While-free control tree of static latency
//! `L` therefore takes `L + 2` cycles from the cycle that samples `go` through
//! the `done` pulse.

mod fsm;
mod netlist;
mod testbench;
mod verilog;

pub use fsm::{bits_for, build_fsm, conditions, take, Cond, Fsm, FsmState, Target, DONE, IDLE, PAR_STATE_LIMIT};
pub use netlist::{netlist_check, parse_verilog, run_verilog, Module, NetlistParseError, RtlRun, RtlSim, RtlSimError};
pub use testbench::{emit_self_checking_testbench, emit_testbench, parse_dump, parse_mem_dump, Dump, DumpError};
pub use verilog::emit_verilog;

use crate::diagnostic::Diagnostic;
use crate::hw_ir::PortRef;

/// Cycles the go/done handshake adds to a component's static latency.
pub const HANDSHAKE_CYCLES: u64 = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerilogText {
    pub text: String,
    /// Name of the top module in `text`.
    pub top: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EmitError {
    #[error("component is not valid: {}", .0.first().map(ToString::to_string).unwrap_or_default())]
    Invalid(Vec<Diagnostic>),
    #[error("{0} is not a usable Verilog identifier")]
    BadName(String),
    #[error("unsupported control: {0}")]
    UnsupportedControl(String),
}

/// Wire carrying `p` in emitted text.
pub fn port_wire(p: &PortRef) -> String {
    format!("{}_{}", p.cell, p.port)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine_ir::{gen_gemm, interpret};
    use crate::hw_ir::{static_latency, HwComponent, Latency};
    use crate::lowering::lower;
    use crate::memory::{memory_set, MemoryImage};
    use crate::sim::simulate;
    use crate::transforms::{unroll_full, LoopPath};

    fn inputs(n: usize) -> crate::memory::MemorySet {
        let a: Vec<i32> = (0..n * n).map(|i| i as i32 - 3).collect();
        let b: Vec<i32> = (0..n * n).map(|i| (i as i32) * -7 + 2).collect();
        memory_set([MemoryImage::zeros("arg0", n * n), MemoryImage::new("arg1", a), MemoryImage::new("arg2", b)])
    }

    #[test]
    fn gemm4_module_header_and_state_width() {
        let c = lower(&gen_gemm(4).funcs[0]).unwrap();
        let v = emit_verilog(&c).unwrap();
        assert!(v.text.starts_with("module mlir_funcSYCL_class_mxm_kernel (\n  input wire clk,"));
        let fsm = build_fsm(&c).unwrap();
        let w = fsm.width();
        assert_eq!(w, (fsm.states.len() as f64).log2().ceil() as u32);
        assert!(v.text.contains(&format!("  reg [{}:0] fsm_state;", w - 1)));
        assert!(netlist_check(&c, &v).is_empty(), "{:?}", netlist_check(&c, &v));
        assert_eq!(emit_verilog(&c).unwrap(), v);
    }

    #[test]
    fn emitted_text_executes_like_the_simulator() {
        let path: LoopPath = "0.0.0".parse().unwrap();
        for n in [1usize, 2, 3] {
            for m in [gen_gemm(n as u64), unroll_full(&gen_gemm(n as u64), &path).unwrap()] {
                let f = &m.funcs[0];
                let c = lower(f).unwrap();
                let mems = inputs(n);
                let sim = simulate(&c, &mems, u64::MAX).unwrap();
                let rtl = run_verilog(&emit_verilog(&c).unwrap(), &mems, 1 << 20).unwrap();
                assert_eq!(rtl.memories, interpret(f, &mems).unwrap());
                assert_eq!(rtl.cycles, sim.cycles + HANDSHAKE_CYCLES);
            }
        }
    }

    #[test]
    fn empty_control_pulses_done_after_go() {
        let c = HwComponent::new("empty");
        let fsm = build_fsm(&c).unwrap();
        assert_eq!(fsm.states.len(), 2);
        let v = emit_verilog(&c).unwrap();
        assert!(netlist_check(&c, &v).is_empty());
        let r = run_verilog(&v, &Default::default(), 10).unwrap();
        assert_eq!(r.cycles, 2);
        assert_eq!(static_latency(&c, &c.control), Latency::Cycles(0));
    }

    #[test]
    fn dangling_wire_is_reported_once() {
        let c = lower(&gen_gemm(2).funcs[0]).unwrap();
        let v = emit_verilog(&c).unwrap();
        let line = v.text.lines().find(|l| l.starts_with("  assign add_") && l.contains("_left =")).unwrap().to_string();
        let wire = line.trim_start_matches("  assign ").split(' ').next().unwrap().to_string();
        let broken = VerilogText { text: v.text.replace(&format!("{line}\n"), ""), top: v.top.clone() };
        let d = netlist_check(&c, &broken);
        assert_eq!(d.len(), 1, "{d:?}");
        assert!(d[0].message.contains(&wire));
    }

    #[test]
    fn width_mismatch_is_reported_once() {
        let c = lower(&gen_gemm(2).funcs[0]).unwrap();
        let v = emit_verilog(&c).unwrap();
        let line = v.text.lines().find(|l| l.contains("_write_en = ") && l.starts_with("  assign reg_")).unwrap().to_string();
        let (lhs, _) = line.split_once(" = ").unwrap();
        let broken = VerilogText { text: v.text.replace(&line, &format!("{lhs} = 32'd1;")), top: v.top.clone() };
        let d = netlist_check(&c, &broken);
        assert_eq!(d.len(), 1, "{d:?}");
        assert!(d[0].message.contains("width mismatch"));
    }

    #[test]
    fn undeclared_and_double_driven() {
        let c = HwComponent::new("e");
        let v = emit_verilog(&c).unwrap();
        let text = v.text.replace("  assign done", "  assign ghost = 1'd0;\n  assign done = 1'd0;\n  assign done");
        let d = netlist_check(&c, &VerilogText { text, top: v.top });
        let msgs: Vec<&str> = d.iter().map(|d| d.message.as_str()).collect();
        assert_eq!(msgs, ["`ghost` is not declared", "wire `done` has 2 drivers"]);
    }

    #[test]
    fn testbench_contents() {
        let f = &gen_gemm(2).funcs[0];
        let c = lower(f).unwrap();
        let mems = inputs(2);
        let tb = emit_testbench(&c, &mems, 500);
        assert_eq!(tb.top, "mlir_funcSYCL_class_mxm_kernel_tb");
        assert!(tb.text.contains("dut.arg1_mem[3] = 32'd0;"));
        assert!(tb.text.contains("dut.arg2_mem[1] = 32'd4294967291;"));
        assert!(tb.text.contains("$display(\"MEM arg0[%0d]=%0d\", i, $signed(dut.arg0_mem[i]));"));
        let expected = interpret(f, &mems).unwrap();
        let checking = emit_self_checking_testbench(&c, &mems, &expected, 500);
        assert!(checking.text.contains("MISMATCH arg0[0]"));
        let timeout = emit_testbench(&c, &mems, 0);
        assert!(timeout.text.contains("$display(\"TIMEOUT\");\n    $finish;"));
        assert!(!timeout.text.contains("dut.arg1_mem"));
    }

    #[test]
    fn dump_round_trip() {
        let text = "CYCLES 41\nMEM b[0]=-1\nMEM a[1]=5\nMEM a[0]=2147483647\nnoise\n";
        let d = parse_dump(text).unwrap();
        assert_eq!(d.cycles, Some(41));
        assert_eq!(d.memories["a"].data, [i32::MAX, 5]);
        assert_eq!(d.memories["b"].data, [-1]);
        assert_eq!(parse_mem_dump("TIMEOUT\n"), Err(DumpError::Timeout));
        assert!(matches!(parse_mem_dump("MEM a[1]=3\n"), Err(DumpError::Gap { .. })));
        assert!(matches!(parse_mem_dump("MEM a[0]=x\n"), Err(DumpError::Malformed { line: 1, .. })));
        assert!(matches!(parse_mem_dump("MEM a[0]=1\nMEM a[0]=1\n"), Err(DumpError::Malformed { line: 2, .. })));
    }

    #[test]
    fn rejects_unusable_names() {
        let mut c = HwComponent::new("bad-name");
        assert!(matches!(emit_verilog(&c), Err(EmitError::BadName(_))));
        c.name = "ok".into();
        c.groups.push(crate::hw_ir::Group::new("fsm_x"));
        assert!(matches!(emit_verilog(&c), Err(EmitError::BadName(_))));
    }
}
