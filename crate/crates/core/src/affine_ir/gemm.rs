use super::{AffineExpr, AffineFor, AffineFunc, AffineModule, AffineOp, IterArg, MemRefType, OpKind};

/// Kernel name used by the generated GEMM function.
pub const GEMM_FUNC_NAME: &str = "mlir_funcSYCL_class_mxm_kernel";

/// Builds the triple-nested `C = A x B` kernel over row-major `n x n`
/// matrices: `%arg0` is C, `%arg1` is A, `%arg2` is B.
pub fn gen_gemm(n: u64) -> AffineModule {
    assert!(n >= 1, "gemm size must be positive");
    let size = n as i64;
    let ty = MemRefType::new(n * n, 1);

    let reduction = AffineFor {
        iv: "arg5".into(),
        lower: 0,
        upper: size,
        step: 1,
        iter_args: vec![IterArg { name: "arg6".into(), init: "c0_i32".into() }],
        body: vec![
            AffineOp::with_result(
                "2",
                OpKind::Load { memref: "arg2".into(), index: AffineExpr::term("arg5", size).plus_term("arg4", 1) },
            ),
            AffineOp::with_result(
                "3",
                OpKind::Load { memref: "arg1".into(), index: AffineExpr::term("arg5", 1).plus_term("arg3", size) },
            ),
            AffineOp::with_result("4", OpKind::MulI { lhs: "2".into(), rhs: "3".into() }),
            AffineOp::with_result("5", OpKind::AddI { lhs: "4".into(), rhs: "arg6".into() }),
            AffineOp::new(OpKind::Yield { values: vec!["5".into()] }),
        ],
    };
    let columns = AffineFor {
        iv: "arg4".into(),
        lower: 0,
        upper: size,
        step: 1,
        iter_args: vec![],
        body: vec![
            AffineOp::with_result("c0_i32", OpKind::Constant { value: 0 }),
            AffineOp::with_result("1", OpKind::For(reduction)),
            AffineOp::new(OpKind::Store {
                value: "1".into(),
                memref: "arg0".into(),
                index: AffineExpr::term("arg4", 1).plus_term("arg3", size),
            }),
        ],
    };
    let rows = AffineFor {
        iv: "arg3".into(),
        lower: 0,
        upper: size,
        step: 1,
        iter_args: vec![],
        body: vec![AffineOp::new(OpKind::For(columns))],
    };
    AffineModule {
        funcs: vec![AffineFunc {
            name: GEMM_FUNC_NAME.into(),
            args: vec![("arg0".into(), ty), ("arg1".into(), ty), ("arg2".into(), ty)],
            body: vec![AffineOp::new(OpKind::For(rows)), AffineOp::new(OpKind::Return)],
        }],
    }
}
