use std::collections::BTreeMap;
use std::fmt::Write;

use super::VerilogText;
use crate::hw_ir::HwComponent;
use crate::memory::{MemoryImage, MemorySet};

/// Testbench that loads `mems`, pulses `go`, waits up to `max_cycles` for
/// `done`, and prints `CYCLES <n>` and one `MEM <name>[<i>]=<value>` line per
/// element, memories in name order. Prints `TIMEOUT` instead when `done`
/// never arrives.
pub fn emit_testbench(c: &HwComponent, mems: &MemorySet, max_cycles: u64) -> VerilogText {
    testbench(c, mems, None, max_cycles)
}

/// As [`emit_testbench`], followed by a comparison against `expected` that
/// prints `PASS` or `FAIL` plus one `MISMATCH` line per differing element.
pub fn emit_self_checking_testbench(c: &HwComponent, mems: &MemorySet, expected: &MemorySet, max_cycles: u64) -> VerilogText {
    testbench(c, mems, Some(expected), max_cycles)
}

fn testbench(c: &HwComponent, mems: &MemorySet, expected: Option<&MemorySet>, max_cycles: u64) -> VerilogText {
    let top = format!("{}_tb", c.name);
    let mut out = String::new();
    out.push_str("`timescale 1ns/1ps\n");
    let _ = writeln!(out, "module {top};");
    out.push_str("  reg clk = 1'b0;\n  reg reset = 1'b1;\n  reg go = 1'b0;\n  wire done;\n  reg [63:0] cycles;\n  integer i;\n  integer errors;\n\n");
    let _ = writeln!(out, "  {} dut (.clk(clk), .reset(reset), .go(go), .done(done));\n", c.name);
    out.push_str("  always #5 clk = ~clk;\n\n  initial begin\n");
    if max_cycles == 0 {
        out.push_str("    $display(\"TIMEOUT\");\n    $finish;\n  end\nendmodule\n");
        return VerilogText { text: out, top };
    }
    for (name, length) in c.memories() {
        if let Some(img) = mems.get(name) {
            for (i, v) in img.data.iter().enumerate().take(length as usize) {
                let _ = writeln!(out, "    dut.{name}_mem[{i}] = 32'd{};", *v as u32);
            }
        }
    }
    out.push_str("    errors = 0;\n    @(posedge clk);\n    #1 reset = 1'b0;\n    go = 1'b1;\n    cycles = 64'd0;\n");
    let _ = writeln!(out, "    while (done !== 1'b1 && cycles < 64'd{max_cycles}) begin");
    out.push_str("      @(posedge clk);\n      #1 go = 1'b0;\n      cycles = cycles + 64'd1;\n    end\n");
    out.push_str("    if (done !== 1'b1) begin\n      $display(\"TIMEOUT\");\n      $finish;\n    end\n");
    out.push_str("    $display(\"CYCLES %0d\", cycles + 64'd1);\n");
    let mut names: Vec<(&str, u64)> = c.memories().collect();
    names.sort();
    for (name, length) in &names {
        let _ = writeln!(out, "    for (i = 0; i < {length}; i = i + 1) $display(\"MEM {name}[%0d]=%0d\", i, $signed(dut.{name}_mem[i]));");
    }
    if let Some(expected) = expected {
        for (name, _) in &names {
            let Some(img) = expected.get(*name) else { continue };
            for (i, v) in img.data.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "    if (dut.{name}_mem[{i}] !== 32'd{}) begin errors = errors + 1; $display(\"MISMATCH {name}[{i}] expected {v} got %0d\", $signed(dut.{name}_mem[{i}])); end",
                    *v as u32
                );
            }
        }
        out.push_str("    if (errors == 0) $display(\"PASS\"); else $display(\"FAIL\");\n");
    }
    out.push_str("    $finish;\n  end\nendmodule\n");
    VerilogText { text: out, top }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DumpError {
    #[error("simulation reported a timeout")]
    Timeout,
    #[error("line {line}: malformed dump line `{text}`")]
    Malformed { line: usize, text: String },
    #[error("memory `{name}` is missing element {index}")]
    Gap { name: String, index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dump {
    pub cycles: Option<u64>,
    pub memories: MemorySet,
}

/// Reads `CYCLES` and `MEM` lines from simulator output; other lines are
/// ignored. Each memory's indices must cover `0..len` exactly once.
pub fn parse_dump(text: &str) -> Result<Dump, DumpError> {
    let mut cycles = None;
    let mut cells: BTreeMap<String, BTreeMap<usize, i32>> = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let bad = || DumpError::Malformed { line: n + 1, text: raw.to_string() };
        if line == "TIMEOUT" {
            return Err(DumpError::Timeout);
        }
        if let Some(rest) = line.strip_prefix("CYCLES ") {
            cycles = Some(rest.trim().parse().map_err(|_| bad())?);
        } else if let Some(rest) = line.strip_prefix("MEM ") {
            let (lhs, value) = rest.split_once('=').ok_or_else(bad)?;
            let (name, idx) = lhs.strip_suffix(']').and_then(|l| l.split_once('[')).ok_or_else(bad)?;
            let idx: usize = idx.parse().map_err(|_| bad())?;
            let value: i32 = value.trim().parse().map_err(|_| bad())?;
            if name.is_empty() || cells.entry(name.to_string()).or_default().insert(idx, value).is_some() {
                return Err(bad());
            }
        }
    }
    let mut memories = MemorySet::new();
    for (name, elems) in cells {
        let mut data = Vec::with_capacity(elems.len());
        for (expect, (idx, v)) in elems.into_iter().enumerate() {
            if idx != expect {
                return Err(DumpError::Gap { name, index: expect });
            }
            data.push(v);
        }
        memories.insert(name.clone(), MemoryImage::new(name, data));
    }
    Ok(Dump { cycles, memories })
}

pub fn parse_mem_dump(text: &str) -> Result<MemorySet, DumpError> {
    parse_dump(text).map(|d| d.memories)
}
