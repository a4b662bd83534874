use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn hlsflow(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hlsflow"))
        .args(args)
        .current_dir(cwd)
        .env_remove("HLSFLOW_OUT_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn gen2(dir: &Path) -> PathBuf {
    assert!(hlsflow(&["gen", "gemm", "2", "-o", "."], dir).status.success());
    dir.join("gemm2.mlir")
}

#[test]
fn gen_writes_a_reparseable_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen2(dir.path());
    let m = hlsflow_core::parse(&fs::read_to_string(path).unwrap()).unwrap();
    assert!(hlsflow_core::alpha_equivalent(&m, &hlsflow_core::gen_gemm(2)));
}

#[test]
fn gen_32_matches_the_reference_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let out = hlsflow(&["gen", "gemm", "32", "--stdout"], dir.path());
    let generated = hlsflow_core::parse(&stdout(&out)).unwrap();
    let reference = hlsflow_core::parse(&fs::read_to_string(fixture("gemm32.mlir")).unwrap()).unwrap();
    assert!(hlsflow_core::alpha_equivalent(&generated, &reference));
}

#[test]
fn compile_unrolled_reference_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture("gemm32.mlir");
    let out = hlsflow(&["compile", input.to_str().unwrap(), "--unroll", "0.0.0:full", "-o", "out/"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let sv = fs::read_to_string(dir.path().join("out/gemm32.sv")).unwrap();
    let hwir = fs::read_to_string(dir.path().join("out/gemm32.hwir")).unwrap();
    assert!(sv.starts_with("module mlir_funcSYCL_class_mxm_kernel ("));
    assert_eq!(hwir.matches("multiplier(32)").count(), 32);
}

#[test]
fn out_dir_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let input = gen2(dir.path());
    let out = Command::new(env!("CARGO_BIN_EXE_hlsflow"))
        .args(["compile", input.to_str().unwrap(), "--emit", "hwir"])
        .current_dir(dir.path())
        .env("HLSFLOW_OUT_DIR", "artifacts")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("artifacts/gemm2.hwir").exists());
    assert!(!dir.path().join("artifacts/gemm2.sv").exists());
}

#[test]
fn testbench_is_emitted_with_bound_memories() {
    let dir = tempfile::tempdir().unwrap();
    let input = gen2(dir.path());
    fs::write(dir.path().join("a.json"), "[1, 2, 3, 4]").unwrap();
    let out = hlsflow(
        &["compile", input.to_str().unwrap(), "--emit", "testbench", "--mem", "arg1=a.json", "--self-check"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let tb = fs::read_to_string(dir.path().join("gemm2_tb.sv")).unwrap();
    assert!(tb.contains("dut.arg1_mem[3] = 32'd4;"), "{tb}");
    assert!(tb.contains("PASS"));
    let warnings = stderr(&out);
    assert!(warnings.contains("warning: memory %arg0 is not bound"));
    assert!(warnings.contains("warning: memory %arg2 is not bound"));
    assert!(!warnings.contains("%arg1 is not bound"));
}

#[test]
fn run_and_simulate_agree() {
    let dir = tempfile::tempdir().unwrap();
    let input = gen2(dir.path());
    fs::write(dir.path().join("a.json"), "[1, 2, 3, 4]").unwrap();
    fs::write(dir.path().join("b.json"), r#"{"name": "arg2", "length": 4, "data": [5, 6, 7, 8]}"#).unwrap();
    let args = ["--mem", "arg1=a.json", "--mem", "arg2=b.json"];
    let input = input.to_str().unwrap();
    let run = hlsflow(&[&["run", input][..], &args].concat(), dir.path());
    let sim = hlsflow(&[&["simulate", input, "--check"][..], &args].concat(), dir.path());
    assert!(run.status.success() && sim.status.success(), "{}", stderr(&sim));
    let run: serde_json::Value = serde_json::from_str(&stdout(&run)).unwrap();
    let sim: serde_json::Value = serde_json::from_str(&stdout(&sim)).unwrap();
    assert_eq!(run, sim["memories"]);
    assert_eq!(sim["cycles"], 58);
    assert_eq!(run[0]["data"], serde_json::json!([19, 22, 43, 50]));
}

#[test]
fn trace_has_one_line_per_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let input = gen2(dir.path());
    let out = hlsflow(&["simulate", input.to_str().unwrap(), "--trace", "t.txt"], dir.path());
    assert!(out.status.success());
    let trace = fs::read_to_string(dir.path().join("t.txt")).unwrap();
    assert_eq!(trace.lines().count(), 58);
    assert!(trace.lines().next().unwrap().starts_with("0 "));
}

#[test]
fn bench_csv_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let out = hlsflow(&["bench", "--sizes", "1,2", "--seed", "7", "--jobs", "2"], dir.path());
    assert!(out.status.success());
    assert_eq!(
        stdout(&out),
        "# seed=7\nn,variant,cycles,multipliers,adders,registers\n1,nested,15,1,9,12\n1,flattened,10,1,6,8\n2,nested,58,1,9,12\n2,flattened,30,2,9,9\n"
    );
}

#[test]
fn report_predicts_simulated_cycles() {
    let dir = tempfile::tempdir().unwrap();
    let input = gen2(dir.path());
    let out = hlsflow(&["report", input.to_str().unwrap(), "--unroll", "0.0.0:full"], dir.path());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v[0]["multipliers"], 2);
    assert_eq!(v[0]["cycles"], 30);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let input = gen2(dir.path());
    let input = input.to_str().unwrap();
    fs::write(dir.path().join("bad.mlir"), "func.func @f(%m: memref<4xi32>) {\n  %x = affine.load %q[0] : memref<4xi32, 0>\n  return\n}\n")
        .unwrap();
    let parse = hlsflow(&["run", "bad.mlir"], dir.path());
    assert_eq!(parse.status.code(), Some(1));
    assert_eq!(stderr(&parse).trim(), "bad.mlir:2:3: error: %q is not a memref argument");

    let syntax = hlsflow(&["compile", "missing.mlir"], dir.path());
    assert_eq!(syntax.status.code(), Some(1));

    let transform = hlsflow(&["compile", input, "--unroll", "0.4:full"], dir.path());
    assert_eq!(transform.status.code(), Some(2));
    assert!(stderr(&transform).contains("error: --unroll 0.4:full: no loop at 0.4"));

    let timeout = hlsflow(&["simulate", input, "--max-cycles", "10"], dir.path());
    assert_eq!(timeout.status.code(), Some(3));

    assert_eq!(hlsflow(&["frobnicate"], dir.path()).status.code(), Some(64));
    assert_eq!(hlsflow(&["run", input, "--mem", "nope=x.json"], dir.path()).status.code(), Some(64));
    assert_eq!(hlsflow(&["compile", input, "--unroll", "0.0.0:zero"], dir.path()).status.code(), Some(64));
    assert_eq!(hlsflow(&["bench", "--sizes", "0"], dir.path()).status.code(), Some(64));
    assert_eq!(hlsflow(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn memory_image_length_is_checked() {
    let dir = tempfile::tempdir().unwrap();
    let input = gen2(dir.path());
    fs::write(dir.path().join("short.json"), "[1, 2]").unwrap();
    let out = hlsflow(&["run", input.to_str().unwrap(), "--mem", "arg1=short.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("short.json: error: %arg1 holds 4 elements but the image has 2"));
}

#[test]
fn check_fixtures_on_repository() {
    let out = hlsflow(&["check-fixtures", fixture("").to_str().unwrap()], Path::new("."));
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn check_fixtures_reports_mutation() {
    let dir = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(fixture("")).unwrap() {
        let entry = entry.unwrap();
        fs::copy(entry.path(), dir.path().join(entry.file_name())).unwrap();
    }
    let sv = dir.path().join("gemm2.sv");
    fs::write(&sv, fs::read_to_string(&sv).unwrap().replace("endmodule", "endmodule // edited")).unwrap();
    let out = hlsflow(&["check-fixtures", "."], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("fixture `gemm2-verilog`"));
}

#[test]
fn import_dump_maps_cells_to_arguments() {
    let dir = tempfile::tempdir().unwrap();
    let input = gen2(dir.path());
    let mut log = String::from("VCD info: ignored\nCYCLES 60\n");
    for (mem, base) in [("arg0", 0), ("arg1", 10), ("arg2", 20)] {
        for i in 0..4 {
            log += &format!("MEM {mem}[{i}]={}\n", base + i);
        }
    }
    fs::write(dir.path().join("sim.log"), log).unwrap();
    let out = hlsflow(&["import-dump", "sim.log", "--design", input.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["cycles"], 60);
    assert_eq!(v["memories"][1]["name"], "arg1");
    assert_eq!(v["memories"][1]["data"], serde_json::json!([10, 11, 12, 13]));

    fs::write(dir.path().join("timeout.log"), "TIMEOUT\n").unwrap();
    assert_eq!(hlsflow(&["import-dump", "timeout.log"], dir.path()).status.code(), Some(3));
    fs::write(dir.path().join("bad.log"), "CYCLES 1\nMEM arg0[x]=1\n").unwrap();
    let bad = hlsflow(&["import-dump", "bad.log"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).starts_with("bad.log:2:1: error:"));
}
