use std::fmt::{self, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{simulate, SimError};
use crate::affine_ir::{gen_gemm, interpret};
use crate::hw_ir::resource_counts;
use crate::lowering::{lower, LowerError};
use crate::memory::{memory_set, MemoryImage};
use crate::transforms::{unroll_full, LoopPath};

pub const DEFAULT_SEED: u64 = 0x5eed_2023;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Nested,
    Flattened,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Nested => "nested",
            Variant::Flattened => "flattened",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nested" => Ok(Variant::Nested),
            "flattened" => Ok(Variant::Flattened),
            other => Err(format!("unknown variant `{other}` (expected nested or flattened)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BenchRow {
    pub n: u64,
    pub variant: Variant,
    pub cycles: u64,
    pub multipliers: u64,
    pub adders: u64,
    pub registers: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BenchTable {
    pub seed: u64,
    pub rows: Vec<BenchRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BenchError {
    #[error("matrix size must be at least 1")]
    BadSize,
    #[error("n={n} {variant}: {source}")]
    Lower { n: u64, variant: Variant, source: LowerError },
    #[error("n={n} {variant}: {source}")]
    Sim { n: u64, variant: Variant, source: SimError },
    #[error("n={n} {variant}: simulated result differs from the interpreter")]
    Mismatch { n: u64, variant: Variant },
    #[error("worker pool: {0}")]
    Pool(String),
}

/// One simulated GEMM per `(size, variant)` pair, checked against the
/// interpreter on the same seeded inputs. `jobs == 0` uses every core.
pub fn bench(sizes: &[u64], variants: &[Variant], seed: u64, jobs: usize) -> Result<BenchTable, BenchError> {
    if sizes.contains(&0) {
        return Err(BenchError::BadSize);
    }
    let cases: Vec<(u64, Variant)> = sizes.iter().flat_map(|&n| variants.iter().map(move |&v| (n, v))).collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| BenchError::Pool(e.to_string()))?;
    let rows = pool.install(|| cases.par_iter().map(|&(n, v)| run_case(n, v, seed)).collect::<Result<Vec<_>, _>>())?;
    Ok(BenchTable { seed, rows })
}

/// Random `A` and `B` for size `n`; both variants of one size see the same data.
pub fn gemm_inputs(n: u64, seed: u64) -> crate::memory::MemorySet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(n);
    let len = (n * n) as usize;
    let a: Vec<i32> = (0..len).map(|_| rng.gen()).collect();
    let b: Vec<i32> = (0..len).map(|_| rng.gen()).collect();
    memory_set([MemoryImage::zeros("arg0", len), MemoryImage::new("arg1", a), MemoryImage::new("arg2", b)])
}

fn run_case(n: u64, variant: Variant, seed: u64) -> Result<BenchRow, BenchError> {
    let mut m = gen_gemm(n);
    if variant == Variant::Flattened {
        let inner = LoopPath::new(None, &[0, 0, 0]);
        m = unroll_full(&m, &inner).expect("gemm always has an innermost loop at 0.0.0");
    }
    let f = &m.funcs[0];
    let c = lower(f).map_err(|source| BenchError::Lower { n, variant, source })?;
    let mems = gemm_inputs(n, seed);
    let r = simulate(&c, &mems, u64::MAX).map_err(|source| BenchError::Sim { n, variant, source })?;
    let want = interpret(f, &mems).expect("generated gemm interprets on matching images");
    if r.memories != want {
        return Err(BenchError::Mismatch { n, variant });
    }
    let res = resource_counts(&c);
    Ok(BenchRow { n, variant, cycles: r.cycles, multipliers: res.multipliers, adders: res.adders, registers: res.registers })
}

const HEADER: [&str; 6] = ["n", "variant", "cycles", "multipliers", "adders", "registers"];

impl BenchTable {
    fn cells(&self) -> Vec<[String; 6]> {
        self.rows
            .iter()
            .map(|r| {
                [
                    r.n.to_string(),
                    r.variant.to_string(),
                    r.cycles.to_string(),
                    r.multipliers.to_string(),
                    r.adders.to_string(),
                    r.registers.to_string(),
                ]
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# seed={}\n{}\n", self.seed, HEADER.join(","));
        for row in self.cells() {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_text(&self) -> String {
        let cells = self.cells();
        let mut widths = HEADER.map(str::len);
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = format!("seed {}\n", self.seed);
        let line = |out: &mut String, row: &[&str]| {
            let parts: Vec<String> = row
                .iter()
                .zip(widths)
                .enumerate()
                .map(|(i, (c, w))| if i == 1 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&mut out, &HEADER);
        for row in &cells {
            let refs: Vec<&str> = row.iter().map(String::as_str).collect();
            line(&mut out, &refs);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_table() {
        let t = bench(&[1, 2, 4], &[Variant::Nested, Variant::Flattened], 7, 2).unwrap();
        assert_eq!(t.rows.len(), 6);
        assert_eq!(t.rows[0].cycles, 15);
        assert_eq!(t.rows[1].cycles, 10);
        for pair in t.rows.chunks(2).skip(1) {
            assert!(pair[1].cycles < pair[0].cycles);
        }
        let csv = t.to_csv();
        assert!(csv.starts_with("# seed=7\nn,variant,cycles,multipliers,adders,registers\n1,nested,15,1,9,12\n"), "{csv}");
        assert!(t.to_text().lines().nth(1).unwrap().starts_with("n  variant"));
    }

    #[test]
    fn rejects_zero() {
        assert_eq!(bench(&[0], &[Variant::Nested], 1, 1), Err(BenchError::BadSize));
    }

    #[test]
    fn seeded_inputs_are_stable() {
        assert_eq!(gemm_inputs(3, 9), gemm_inputs(3, 9));
        assert_ne!(gemm_inputs(3, 9), gemm_inputs(3, 10));
    }
}
