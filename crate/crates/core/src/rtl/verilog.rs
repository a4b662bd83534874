use std::collections::BTreeMap;
use std::fmt::Write;

use super::fsm::{build_fsm, Cond, Fsm, Target, DONE, IDLE};
use super::{port_wire, EmitError, VerilogText};
use crate::hw_ir::{validate, Assignment, CellKind, Direction, HwComponent, Predicate, Src};
use crate::lowering::RESERVED;

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_') && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn check_name(s: &str, what: &str) -> Result<(), EmitError> {
    if !is_identifier(s) || RESERVED.contains(&s) || s.starts_with("fsm_") {
        return Err(EmitError::BadName(format!("{what} `{s}`")));
    }
    Ok(())
}

fn lit(width: u32, value: u64) -> String {
    format!("{width}'d{value}")
}

fn decl(width: u32) -> String {
    if width == 1 {
        String::new()
    } else {
        format!("[{}:0] ", width - 1)
    }
}

fn src_text(s: &Src) -> String {
    match s {
        Src::Port(p) => port_wire(p),
        Src::Lit(l) => lit(l.width, l.value),
    }
}

pub fn emit_verilog(c: &HwComponent) -> Result<VerilogText, EmitError> {
    let diags = validate(c);
    if !diags.is_empty() {
        return Err(EmitError::Invalid(diags));
    }
    check_name(&c.name, "component")?;
    for cell in &c.cells {
        check_name(&cell.name, "cell")?;
    }
    for g in &c.groups {
        check_name(&g.name, "group")?;
    }
    let fsm = build_fsm(c)?;
    let mut out = String::new();
    let _ = writeln!(out, "module {} (", c.name);
    let ports: Vec<String> = c
        .ports
        .iter()
        .map(|p| {
            let dir = if p.direction == Direction::In { "input" } else { "output" };
            format!("  {dir} wire {}{}", decl(p.width), p.name)
        })
        .collect();
    out.push_str(&ports.join(",\n"));
    out.push_str("\n);\n");

    let sw = fsm.width();
    out.push_str("\n  // controller\n");
    let _ = writeln!(out, "  reg {}fsm_state;", decl(sw));
    for k in 0..fsm.counters.len() {
        let _ = writeln!(out, "  reg {}fsm_rep_{k};", decl(fsm.counter_width(k)));
    }
    for g in &c.groups {
        let _ = writeln!(out, "  wire fsm_grp_{};", g.name);
    }

    out.push_str("\n  // cells\n");
    for cell in &c.cells {
        match cell.kind {
            CellKind::Register { width } => {
                let _ = writeln!(out, "  reg {}{}_q;", decl(width), cell.name);
            }
            CellKind::Memory { width, length } => {
                let _ = writeln!(out, "  reg {}{}_mem [0:{}];", decl(width), cell.name, length - 1);
            }
            _ => {}
        }
        for (port, width, _) in cell.kind.ports() {
            let _ = writeln!(out, "  wire {}{}_{port};", decl(width), cell.name);
        }
    }

    out.push_str("\n  // group activity\n");
    for g in &c.groups {
        let states = fsm.states_of(&g.name);
        let expr = if states.is_empty() {
            lit(1, 0)
        } else {
            states.iter().map(|s| format!("fsm_state == {}", lit(sw, *s as u64))).collect::<Vec<_>>().join(" || ")
        };
        let _ = writeln!(out, "  assign fsm_grp_{} = {expr};", g.name);
    }
    let _ = writeln!(out, "  assign done = fsm_state == {};", lit(sw, DONE as u64));

    // Drivers of each cell input, in group order.
    let mut drivers: BTreeMap<(String, String), Vec<(&str, &Assignment)>> = BTreeMap::new();
    for g in &c.groups {
        for a in &g.assignments {
            drivers.entry((a.dest.cell.clone(), a.dest.port.clone())).or_default().push((&g.name, a));
        }
    }

    out.push_str("\n  // datapath\n");
    for cell in &c.cells {
        let name = &cell.name;
        for (port, width, dir) in cell.kind.ports() {
            if dir == Direction::Out {
                continue;
            }
            let mut expr = lit(width, 0);
            if let Some(ds) = drivers.get(&(name.clone(), port.to_string())) {
                for (g, a) in ds.iter().rev() {
                    let sel = match &a.guard {
                        Some(guard) => format!("fsm_grp_{g} && {}", port_wire(guard)),
                        None => format!("fsm_grp_{g}"),
                    };
                    expr = format!("{sel} ? {} : {expr}", src_text(&a.src));
                }
            }
            let _ = writeln!(out, "  assign {name}_{port} = {expr};");
        }
        match cell.kind {
            CellKind::Register { width } => {
                let _ = writeln!(out, "  assign {name}_out = {name}_q;");
                let _ = writeln!(out, "  always @(posedge clk) begin");
                let _ = writeln!(out, "    if (reset) {name}_q <= {};", lit(width, 0));
                let _ = writeln!(out, "    else if ({name}_write_en) {name}_q <= {name}_in;");
                out.push_str("  end\n");
            }
            CellKind::Memory { .. } => {
                let _ = writeln!(out, "  assign {name}_read_data = {name}_mem[{name}_read_addr];");
                let _ = writeln!(out, "  always @(posedge clk) begin");
                let _ = writeln!(out, "    if ({name}_write_en) {name}_mem[{name}_write_addr] <= {name}_write_data;");
                out.push_str("  end\n");
            }
            CellKind::Adder { .. } => {
                let _ = writeln!(out, "  assign {name}_out = {name}_left + {name}_right;");
            }
            CellKind::Multiplier { .. } => {
                let _ = writeln!(out, "  assign {name}_out = {name}_left * {name}_right;");
            }
            CellKind::Comparator { predicate: Predicate::Lt, .. } => {
                let _ = writeln!(out, "  assign {name}_out = $signed({name}_left) < $signed({name}_right);");
            }
            CellKind::Comparator { predicate: Predicate::Eq, .. } => {
                let _ = writeln!(out, "  assign {name}_out = {name}_left == {name}_right;");
            }
            CellKind::Constant { width, value } => {
                let _ = writeln!(out, "  assign {name}_out = {};", lit(width, value));
            }
        }
    }

    out.push_str("\n  // state transitions\n");
    out.push_str("  always @(posedge clk) begin\n    if (reset) begin\n");
    let _ = writeln!(out, "      fsm_state <= {};", lit(sw, IDLE as u64));
    for k in 0..fsm.counters.len() {
        let _ = writeln!(out, "      fsm_rep_{k} <= {};", lit(fsm.counter_width(k), 0));
    }
    out.push_str("    end else begin\n      case (fsm_state)\n");
    for (s, state) in fsm.states.iter().enumerate() {
        let mut comment = String::new();
        if s == IDLE {
            comment.push_str(" // idle");
        } else if s == DONE {
            comment.push_str(" // done");
        } else if !state.groups.is_empty() {
            let _ = write!(comment, " // {}", state.groups.join(" "));
        }
        let _ = writeln!(out, "        {}: begin{comment}", lit(sw, s as u64));
        render(&mut out, &fsm, &state.next, 5);
        out.push_str("        end\n");
    }
    let _ = writeln!(out, "        default: fsm_state <= {};", lit(sw, IDLE as u64));
    out.push_str("      endcase\n    end\n  end\nendmodule\n");
    Ok(VerilogText { text: out, top: c.name.clone() })
}

fn render(out: &mut String, fsm: &Fsm, t: &Target, depth: usize) {
    let pad = "  ".repeat(depth);
    match t {
        Target::State(s) => {
            let _ = writeln!(out, "{pad}fsm_state <= {};", lit(fsm.width(), *s as u64));
        }
        Target::Branch { cond, then, els } => {
            let c = match cond {
                Cond::Go => "go".to_string(),
                Cond::Port(p) => port_wire(p),
                Cond::Last(k) => format!("fsm_rep_{k} == {}", lit(fsm.counter_width(*k), 1)),
            };
            let _ = writeln!(out, "{pad}if ({c}) begin");
            render(out, fsm, then, depth + 1);
            let _ = writeln!(out, "{pad}end else begin");
            render(out, fsm, els, depth + 1);
            let _ = writeln!(out, "{pad}end");
        }
        Target::Load { counter, value, then } => {
            let _ = writeln!(out, "{pad}fsm_rep_{counter} <= {};", lit(fsm.counter_width(*counter), *value));
            render(out, fsm, then, depth);
        }
        Target::Decrement { counter, then } => {
            let w = fsm.counter_width(*counter);
            let _ = writeln!(out, "{pad}fsm_rep_{counter} <= fsm_rep_{counter} - {};", lit(w, 1));
            render(out, fsm, then, depth);
        }
    }
}
