use std::collections::BTreeMap;
use std::path::Path;

use hlsflow_core::affine_ir::{gen_gemm, interpret};
use hlsflow_core::fixtures::bless_fixtures;
use hlsflow_core::hw_ir::{dump, resource_counts, static_latency};
use hlsflow_core::lowering::{lower_detailed, lower_module, repeat_form, LowerError, Lowered};
use hlsflow_core::memory::{set_to_json, MemoryImage, MemorySet};
use hlsflow_core::parser::print;
use hlsflow_core::rtl::{emit_self_checking_testbench, emit_testbench, emit_verilog, parse_dump, DumpError};
use hlsflow_core::sim::{simulate_with, BenchError, SimOptions};
use hlsflow_core::{AffineFunc, SourceSpan};
use serde_json::json;

use crate::diag::{CmdResult, Diag, Failure, EXIT_INPUT, EXIT_LOWER, EXIT_RUNTIME};
use crate::input::{bind_memories, load, read, write, Loaded};
use crate::{
    BenchArgs, CheckFixturesArgs, CompileArgs, EmitKind, GenArgs, ImportDumpArgs, Kernel, ReportArgs, RunArgs, SimulateArgs,
    TableFormat,
};

fn lower_error(l: &Loaded, e: LowerError) -> Failure {
    let diags = match e {
        LowerError::UnsupportedConstruct { location, message } => {
            vec![Diag::error(&l.path, format!("{location}: unsupported construct: {message}")).at(l.span(&location))]
        }
        LowerError::Invalid { diagnostics } => diagnostics
            .into_iter()
            .map(|d| Diag::error(&l.path, d.to_string()).at(l.span(&d.location)))
            .collect(),
    };
    Failure { code: EXIT_LOWER, diags }
}

fn lower_one(l: &Loaded, f: &AffineFunc) -> Result<Lowered, Failure> {
    lower_detailed(f).map_err(|e| lower_error(l, e))
}

/// Re-keys images through `names`; keys without a mapping are kept.
fn rename(set: MemorySet, names: &BTreeMap<String, String>) -> MemorySet {
    set.into_values()
        .map(|img| {
            let name = names.get(&img.name).cloned().unwrap_or(img.name);
            (name.clone(), MemoryImage { name, ..img })
        })
        .collect()
}

fn invert(m: &BTreeMap<String, String>) -> BTreeMap<String, String> {
    m.iter().map(|(a, b)| (b.clone(), a.clone())).collect()
}

fn memories_json(set: &MemorySet) -> serde_json::Value {
    serde_json::to_value(set.values().collect::<Vec<_>>()).expect("memory images serialize")
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json serializes") + "\n"
}

pub fn gen(a: GenArgs) -> CmdResult {
    if a.n == 0 {
        return Err(Failure::usage("matrix size must be at least 1"));
    }
    let text = match a.kind {
        Kernel::Gemm => print(&gen_gemm(a.n)),
    };
    if a.stdout {
        print!("{text}");
        return Ok(());
    }
    let path = a.out.dir.join(format!("gemm{}.mlir", a.n));
    write(&path, &text)?;
    println!("{}", path.display());
    Ok(())
}

pub fn compile(a: CompileArgs, warnings: &mut Vec<Diag>) -> CmdResult {
    let l = load(&a.source.input, &a.source.unroll)?;
    let stem = a.source.input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    let single = a.source.func.is_some() || l.module.funcs.len() == 1;
    let components = if single {
        vec![lower_one(&l, l.select(a.source.func.as_deref())?)?.component]
    } else {
        lower_module(&l.module).map_err(|e| lower_error(&l, e))?
    };
    let emit_err = |e: hlsflow_core::EmitError| Failure::new(EXIT_LOWER, Diag::error(&l.path, e.to_string()));
    let mut written = Vec::new();
    if a.emit.contains(&EmitKind::Verilog) {
        let mut text = String::new();
        for c in &components {
            if !text.is_empty() {
                text.push('\n');
            }
            text.push_str(&emit_verilog(c).map_err(emit_err)?.text);
        }
        written.push((a.out.dir.join(format!("{stem}.sv")), text));
    }
    if a.emit.contains(&EmitKind::Hwir) {
        let text = components.iter().map(dump).collect::<Vec<_>>().join("\n");
        written.push((a.out.dir.join(format!("{stem}.hwir")), text));
    }
    if a.emit.contains(&EmitKind::Testbench) {
        if !single {
            return Err(Failure::usage("a testbench covers one function; choose it with --func"));
        }
        let f = l.select(a.source.func.as_deref())?;
        let lowered = lower_one(&l, f)?;
        let mems = bind_memories(f, &a.mems.mem, warnings)?;
        let cell_mems = rename(mems.clone(), &lowered.memories);
        let tb = if a.self_check {
            let expected = interpret(f, &mems).map_err(|e| Failure::new(EXIT_RUNTIME, Diag::error(&l.path, e.to_string())))?;
            emit_self_checking_testbench(&lowered.component, &cell_mems, &rename(expected, &lowered.memories), a.max_cycles)
        } else {
            emit_testbench(&lowered.component, &cell_mems, a.max_cycles)
        };
        written.push((a.out.dir.join(format!("{stem}_tb.sv")), tb.text));
    }
    for (path, text) in &written {
        write(path, text)?;
        println!("{}", path.display());
    }
    Ok(())
}

pub fn run(a: RunArgs, warnings: &mut Vec<Diag>) -> CmdResult {
    let l = load(&a.source.input, &a.source.unroll)?;
    let f = l.select(a.source.func.as_deref())?;
    let mems = bind_memories(f, &a.mems.mem, warnings)?;
    let out = interpret(f, &mems).map_err(|e| Failure::new(EXIT_RUNTIME, Diag::error(&l.path, e.to_string())))?;
    println!("{}", set_to_json(&out));
    Ok(())
}

pub fn simulate(a: SimulateArgs, warnings: &mut Vec<Diag>) -> CmdResult {
    let l = load(&a.source.input, &a.source.unroll)?;
    let f = l.select(a.source.func.as_deref())?;
    let lowered = lower_one(&l, f)?;
    let mems = bind_memories(f, &a.mems.mem, warnings)?;
    let opts = SimOptions { max_cycles: a.max_cycles, trace: a.trace.is_some() };
    let result = simulate_with(&lowered.component, &rename(mems.clone(), &lowered.memories), opts)
        .map_err(|e| Failure::new(EXIT_RUNTIME, Diag::error(&l.path, e.to_string())))?;
    let out = rename(result.memories, &invert(&lowered.memories));
    if let (Some(path), Some(trace)) = (&a.trace, &result.trace) {
        let text: String = trace.iter().map(|t| format!("{t}\n")).collect();
        write(path, &text)?;
    }
    if a.check {
        let expected = interpret(f, &mems).map_err(|e| Failure::new(EXIT_RUNTIME, Diag::error(&l.path, e.to_string())))?;
        let differing: Vec<String> = expected.iter().filter(|(k, v)| out.get(*k) != Some(v)).map(|(k, _)| format!("%{k}")).collect();
        if !differing.is_empty() {
            return Err(Failure::new(
                EXIT_RUNTIME,
                Diag::error(&l.path, format!("simulation differs from the interpreter in {}", differing.join(", "))),
            ));
        }
    }
    print!("{}", pretty(&json!({ "cycles": result.cycles, "memories": memories_json(&out) })));
    Ok(())
}

pub fn bench(a: BenchArgs) -> CmdResult {
    if a.sizes.is_empty() || a.variants.is_empty() {
        return Err(Failure::usage("bench needs at least one size and one variant"));
    }
    let table = hlsflow_core::sim::bench(&a.sizes, &a.variants, a.seed, a.jobs).map_err(|e| {
        let code = match e {
            BenchError::BadSize => crate::diag::EXIT_USAGE,
            BenchError::Lower { .. } => EXIT_LOWER,
            _ => EXIT_RUNTIME,
        };
        Failure::new(code, Diag::error("bench", e.to_string()))
    })?;
    let text = match a.format {
        TableFormat::Csv => table.to_csv(),
        TableFormat::Text => table.to_text(),
    };
    match &a.output {
        Some(path) => write(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn report(a: ReportArgs) -> CmdResult {
    let l = load(&a.source.input, &a.source.unroll)?;
    let funcs: Vec<&AffineFunc> = match &a.source.func {
        Some(name) => vec![l.select(Some(name))?],
        None => l.module.funcs.iter().collect(),
    };
    let mut rows = Vec::new();
    for f in funcs {
        let lowered = lower_one(&l, f)?;
        let c = &lowered.component;
        let mut row = serde_json::to_value(resource_counts(c)).expect("report serializes");
        let cycles = static_latency(c, &repeat_form(&c.control, &lowered.trips)).cycles();
        row["function"] = json!(f.name);
        row["component"] = json!(c.name);
        row["cycles"] = json!(cycles);
        rows.push(row);
    }
    print!("{}", pretty(&serde_json::Value::Array(rows)));
    Ok(())
}

pub fn check_fixtures(a: CheckFixturesArgs) -> CmdResult {
    if a.bless {
        let written = bless_fixtures(&a.dir).map_err(|d| Failure::new(EXIT_INPUT, Diag::error(d.location, d.message)))?;
        for w in written {
            println!("{}", a.dir.join(w).display());
        }
        return Ok(());
    }
    let diags = hlsflow_core::check_fixtures(&a.dir);
    if diags.is_empty() {
        return Ok(());
    }
    Err(Failure { code: EXIT_INPUT, diags: diags.into_iter().map(|d| Diag::error(d.location, d.message)).collect() })
}

pub fn import_dump(a: ImportDumpArgs) -> CmdResult {
    let shown = a.dump.display().to_string();
    let text = read(&a.dump)?;
    let parsed = parse_dump(&text).map_err(|e| match &e {
        DumpError::Timeout => Failure::new(EXIT_RUNTIME, Diag::error(&shown, e.to_string())),
        DumpError::Malformed { line, .. } => {
            let span = SourceSpan { line: *line, column: 1, length: 0 };
            Failure::new(EXIT_INPUT, Diag::error(&shown, e.to_string()).at(Some(span)))
        }
        DumpError::Gap { .. } => Failure::new(EXIT_INPUT, Diag::error(&shown, e.to_string())),
    })?;
    let mut memories = parsed.memories;
    if let Some(design) = &a.design {
        let l = load(Path::new(design), &a.unroll)?;
        let lowered = lower_one(&l, l.select(a.func.as_deref())?)?;
        memories = rename(memories, &invert(&lowered.memories));
    }
    print!("{}", pretty(&json!({ "cycles": parsed.cycles, "memories": memories_json(&memories) })));
    Ok(())
}
