use std::fmt::Write;

use super::{Control, Direction, HwComponent};

/// Deterministic `.hwir` text for `c`. Cells and groups keep their stored
/// order; the control tree is an indented s-expression.
pub fn dump(c: &HwComponent) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "component {} {{", c.name);
    out.push_str("  ports {\n");
    for p in &c.ports {
        let dir = match p.direction {
            Direction::In => "in",
            Direction::Out => "out",
        };
        let _ = writeln!(out, "    {dir} {}: {};", p.name, p.width);
    }
    out.push_str("  }\n  cells {\n");
    for cell in &c.cells {
        let _ = writeln!(out, "    {} = {};", cell.name, cell.kind);
    }
    out.push_str("  }\n");
    for g in &c.groups {
        let _ = writeln!(out, "  group {} <{}> {{", g.name, g.latency);
        for a in &g.assignments {
            match &a.guard {
                Some(guard) => {
                    let _ = writeln!(out, "    {} = {guard} ? {};", a.dest, a.src);
                }
                None => {
                    let _ = writeln!(out, "    {} = {};", a.dest, a.src);
                }
            }
        }
        out.push_str("  }\n");
    }
    out.push_str("  control\n");
    sexpr(&mut out, &c.control, 2);
    out.push_str("}\n");
    out
}

fn sexpr(out: &mut String, n: &Control, depth: usize) {
    let pad = "  ".repeat(depth);
    match n {
        Control::Enable(g) => {
            let _ = writeln!(out, "{pad}(enable {g})");
        }
        Control::Seq(cs) | Control::Par(cs) => {
            let head = if matches!(n, Control::Seq(_)) { "seq" } else { "par" };
            if cs.is_empty() {
                let _ = writeln!(out, "{pad}({head})");
                return;
            }
            let _ = writeln!(out, "{pad}({head}");
            for child in cs {
                sexpr(out, child, depth + 1);
            }
            let _ = writeln!(out, "{pad})");
        }
        Control::While { port, cond, body } => {
            let _ = writeln!(out, "{pad}(while {port} {cond}");
            sexpr(out, body, depth + 1);
            let _ = writeln!(out, "{pad})");
        }
        Control::Repeat { count, body } => {
            let _ = writeln!(out, "{pad}(repeat {count}");
            sexpr(out, body, depth + 1);
            let _ = writeln!(out, "{pad})");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hw_ir::{Cell, CellKind, Group, Literal, PortRef, Src};

    #[test]
    fn dumps_small_component() {
        let mut c = HwComponent::new("k");
        c.cells.push(Cell::new("r0", CellKind::Register { width: 32 }));
        let mut g = Group::new("g0");
        g.assign(PortRef::new("r0", "in"), Src::Lit(Literal::from_i32(-1)));
        g.assign(PortRef::new("r0", "write_en"), Src::Lit(Literal::bit(true)));
        c.groups.push(g);
        c.control = Control::Seq(vec![Control::Repeat { count: 2, body: Box::new(Control::Enable("g0".into())) }, Control::Par(vec![])]);
        let expected = "\
component k {
  ports {
    in clk: 1;
    in reset: 1;
    in go: 1;
    out done: 1;
  }
  cells {
    r0 = register(32);
  }
  group g0 <1> {
    r0.in = 32'd4294967295;
    r0.write_en = 1'd1;
  }
  control
    (seq
      (repeat 2
        (enable g0)
      )
      (par)
    )
}
";
        assert_eq!(dump(&c), expected);
    }
}
