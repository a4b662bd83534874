//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p hlsflow-cli --test acceptance`; add `-- --slow`
//! to include 128x128 in the cycle-ordering check.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use hlsflow_core::affine_ir::{alpha_equivalent, gen_gemm, verify_module, AffineModule};
use hlsflow_core::hw_ir::{resource_counts, static_latency, validate, Latency};
use hlsflow_core::lowering::lower;
use hlsflow_core::memory::{memory_set, MemoryImage, MemorySet};
use hlsflow_core::parser::{parse, print};
use hlsflow_core::rtl::{emit_verilog, netlist_check};
use hlsflow_core::sim::{bench, simulate, BenchTable, Variant, DEFAULT_SEED};
use hlsflow_core::testgen::{random_function, random_module, random_static_component, GenConfig};
use hlsflow_core::transforms::{unroll_full, LoopPath};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MAX_CYCLES: u64 = 1 << 32;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Row-major `a × b` with 32-bit wrap-around.
fn matmul(a: &[i32], b: &[i32], n: usize) -> Vec<i32> {
    let mut c = vec![0i32; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0i32;
            for k in 0..n {
                acc = acc.wrapping_add(a[i * n + k].wrapping_mul(b[k * n + j]));
            }
            c[i * n + j] = acc;
        }
    }
    c
}

fn nested_closed_form(n: u64) -> u64 {
    3 * n * n * n + 6 * n * n + 4 * n + 2
}

fn flattened(n: u64) -> AffineModule {
    unroll_full(&gen_gemm(n), &LoopPath::new(None, &[0, 0, 0])).expect("gemm has an innermost loop")
}

fn cases() -> Vec<(usize, u64, Vec<i32>, Vec<i32>)> {
    let mut out = Vec::new();
    for n in [2usize, 4, 8, 16] {
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 * n as u64 + seed);
            let a = (0..n * n).map(|_| rng.gen()).collect();
            let b = (0..n * n).map(|_| rng.gen()).collect();
            out.push((n, seed, a, b));
        }
    }
    out
}

fn images(n: usize, a: &[i32], b: &[i32]) -> MemorySet {
    memory_set([MemoryImage::zeros("arg0", n * n), MemoryImage::new("arg1", a.to_vec()), MemoryImage::new("arg2", b.to_vec())])
}

fn criteria_1_and_2() -> (Outcome, Outcome) {
    let mut designs = BTreeMap::new();
    for n in [2u64, 4, 8, 16] {
        let nested = lower(&gen_gemm(n).funcs[0]).unwrap();
        let flat = lower(&flattened(n).funcs[0]).unwrap();
        designs.insert(n as usize, (nested, flat));
    }
    let (mut ok1, mut ok2, mut total) = (0, 0, 0);
    let mut failures = Vec::new();
    for (n, seed, a, b) in cases() {
        total += 1;
        let (nested, flat) = &designs[&n];
        let mems = images(n, &a, &b);
        let want = matmul(&a, &b, n);
        let got_nested = simulate(nested, &mems, MAX_CYCLES).map(|r| r.memories["arg0"].data.clone());
        let got_flat = simulate(flat, &mems, MAX_CYCLES).map(|r| r.memories["arg0"].data.clone());
        match &got_nested {
            Ok(v) if *v == want => ok1 += 1,
            _ => failures.push(format!("nested n={n} seed={seed}")),
        }
        match (&got_flat, &got_nested) {
            (Ok(f), Ok(g)) if f == g => ok2 += 1,
            _ => failures.push(format!("flattened n={n} seed={seed}")),
        }
    }
    let note = if failures.is_empty() { String::new() } else { format!("; failing: {}", failures.join(", ")) };
    (
        outcome(ok1 == total, format!("{ok1}/{total} nested runs equal the brute-force oracle (n = 2, 4, 8, 16){note}")),
        outcome(ok2 == total, format!("{ok2}/{total} flattened runs equal the nested runs")),
    )
}

fn cycles(t: &BenchTable, n: u64, v: Variant) -> Option<u64> {
    t.rows.iter().find(|r| r.n == n && r.variant == v).map(|r| r.cycles)
}

fn criterion_3(table: &Result<BenchTable, String>, sizes: &[u64]) -> Outcome {
    let t = match table {
        Ok(t) => t,
        Err(e) => return outcome(false, format!("bench failed: {e}")),
    };
    let mut parts = Vec::new();
    let mut pass = true;
    for &n in sizes {
        let (a, b) = (cycles(t, n, Variant::Nested), cycles(t, n, Variant::Flattened));
        match (a, b) {
            (Some(a), Some(b)) => {
                pass &= b < a;
                parts.push(format!("n={n}: {b} < {a}"));
            }
            _ => pass = false,
        }
    }
    outcome(pass, format!("flattened < nested cycles at every size ({})", parts.join(", ")))
}

fn criterion_4(table: &Result<BenchTable, String>) -> Outcome {
    let t = match table {
        Ok(t) => t,
        Err(e) => return outcome(false, format!("bench failed: {e}")),
    };
    let mut measured = BTreeMap::new();
    let mems = hlsflow_core::sim::gemm_inputs(2, DEFAULT_SEED);
    if let Ok(r) = simulate(&lower(&gen_gemm(2).funcs[0]).unwrap(), &mems, MAX_CYCLES) {
        measured.insert(2, r.cycles);
    }
    for n in [4, 8, 16, 32, 64] {
        if let Some(c) = cycles(t, n, Variant::Nested) {
            measured.insert(n, c);
        }
    }
    let exact = [2u64, 4, 8, 16, 32].iter().all(|n| measured.get(n) == Some(&nested_closed_form(*n)));
    let mut ratios = Vec::new();
    let mut in_band = true;
    for n in [16u64, 32] {
        match (measured.get(&n), measured.get(&(2 * n))) {
            (Some(&a), Some(&b)) => {
                let r = b as f64 / a as f64;
                in_band &= (6.5..=8.2).contains(&r);
                ratios.push(format!("C({})/C({n}) = {r:.3}", 2 * n));
            }
            _ => in_band = false,
        }
    }
    // The closed form itself stays inside the band for every n >= 16.
    let form_band = (16..=4096u64).all(|n| (6.5..=8.2).contains(&(nested_closed_form(2 * n) as f64 / nested_closed_form(n) as f64)));
    outcome(
        exact && in_band && form_band,
        format!(
            "nested cycles equal 3n^3+6n^2+4n+2 for n = 2..32: {exact}; {}; closed-form ratio in [6.5, 8.2] for n = 16..4096: {form_band}",
            ratios.join(", ")
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut bad = Vec::new();
    for n in 2..=64u64 {
        let nested = resource_counts(&lower(&gen_gemm(n).funcs[0]).unwrap()).multipliers;
        let flat = resource_counts(&lower(&flattened(n).funcs[0]).unwrap()).multipliers;
        if nested != 1 || flat != n {
            bad.push(format!("n={n}: nested {nested}, flattened {flat}"));
        }
    }
    outcome(bad.is_empty(), format!("nested designs use 1 multiplier and flattened designs use n, n = 2..64{}", list(&bad)))
}

fn list(items: &[String]) -> String {
    if items.is_empty() {
        String::new()
    } else {
        format!("; mismatches: {}", items.join(", "))
    }
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut bad = Vec::new();
    for k in 0..100 {
        let f = random_function(&mut rng, &format!("f{k}"), GenConfig::default());
        match lower(&f) {
            Err(e) => bad.push(format!("#{k}: {e}")),
            Ok(c) => {
                let v = validate(&c);
                let n = emit_verilog(&c).map(|text| netlist_check(&c, &text));
                match n {
                    Ok(d) if d.is_empty() && v.is_empty() => {}
                    Ok(d) => bad.push(format!("#{k}: {} validate / {} netlist diagnostics", v.len(), d.len())),
                    Err(e) => bad.push(format!("#{k}: {e}")),
                }
            }
        }
    }
    outcome(bad.is_empty(), format!("validate and netlist_check are empty for {}/100 random functions{}", 100 - bad.len(), list(&bad)))
}

fn hlsflow(args: &[&str], cwd: &Path) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_hlsflow")).args(args).current_dir(cwd).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    Ok(out.stdout)
}

fn criterion_7() -> Outcome {
    let run = || -> Result<(bool, bool), String> {
        let fixture = repo().join("fixtures/gemm32.mlir");
        let fixture = fixture.to_str().unwrap();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        for d in [&a, &b] {
            hlsflow(&["compile", fixture, "-o", d.path().to_str().unwrap()], d.path())?;
        }
        let same = |name: &str| std::fs::read(a.path().join(name)).ok().zip(std::fs::read(b.path().join(name)).ok()).is_some_and(|(x, y)| x == y);
        let artifacts = same("gemm32.sv") && same("gemm32.hwir");
        let args = ["bench", "--sizes", "2,4,8,16", "--seed", "42", "--jobs", "0"];
        let csv = hlsflow(&args, a.path())? == hlsflow(&args, b.path())?;
        Ok((artifacts, csv))
    };
    match run() {
        Ok((artifacts, csv)) => outcome(
            artifacts && csv,
            format!("two compiles give identical .sv/.hwir: {artifacts}; two seeded bench runs give identical CSV: {csv}"),
        ),
        Err(e) => outcome(false, format!("command failed: {}", e.trim())),
    }
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut ok = 0;
    for _ in 0..1000 {
        let m = random_module(&mut rng, GenConfig::default());
        if parse(&print(&m)).is_ok_and(|back| back == m) {
            ok += 1;
        }
    }
    let fixture = std::fs::read_to_string(repo().join("fixtures/gemm32.mlir")).unwrap_or_default();
    let kernel = parse(&fixture).is_ok_and(|m| verify_module(&m).is_empty() && alpha_equivalent(&m, &gen_gemm(32)));
    outcome(
        ok == 1000 && kernel,
        format!("{ok}/1000 generated modules survive print then parse unchanged; reference kernel equals the generated 32x32 GEMM: {kernel}"),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut ok = 0;
    for _ in 0..50 {
        let c = random_static_component(&mut rng, 4);
        if let (Latency::Cycles(s), Ok(r)) = (static_latency(&c, &c.control), simulate(&c, &MemorySet::new(), MAX_CYCLES)) {
            if s == r.cycles {
                ok += 1;
            }
        }
    }
    outcome(ok == 50, format!("static latency equals simulated cycles for {ok}/50 random While-free trees"))
}

fn main() {
    let slow = std::env::args().any(|a| a == "--slow");
    let mut sizes = vec![4u64, 8, 16, 32, 64];
    if slow {
        sizes.push(128);
    }
    let start = Instant::now();
    let (table, (c1, c2), c5, c6, c7, c8, c9) = std::thread::scope(|s| {
        let table = s.spawn(|| bench(&sizes, &[Variant::Nested, Variant::Flattened], DEFAULT_SEED, 0).map_err(|e| e.to_string()));
        let c12 = s.spawn(criteria_1_and_2);
        let c5 = s.spawn(criterion_5);
        let c6 = s.spawn(criterion_6);
        let c7 = s.spawn(criterion_7);
        let c8 = s.spawn(criterion_8);
        let c9 = s.spawn(criterion_9);
        (
            table.join().unwrap(),
            c12.join().unwrap(),
            c5.join().unwrap(),
            c6.join().unwrap(),
            c7.join().unwrap(),
            c8.join().unwrap(),
            c9.join().unwrap(),
        )
    });
    let results = [
        ("functional correctness", c1),
        ("unroll preservation", c2),
        ("flattened faster than nested", criterion_3(&table, &sizes)),
        ("closed-form cycle model", criterion_4(&table)),
        ("resource proportionality", c5),
        ("structural soundness", c6),
        ("determinism", c7),
        ("round trip", c8),
        ("static/dynamic agreement", c9),
    ];
    let mut failed = 0;
    for (k, (name, o)) in results.iter().enumerate() {
        println!("criterion {} {}: {name}: {}", k + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed in {:.1}s{}", results.len() - failed, results.len(), start.elapsed().as_secs_f64(), if slow { " (slow)" } else { "" });
    if failed > 0 {
        std::process::exit(1);
    }
}
