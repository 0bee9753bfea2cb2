use alloc::string::ToString;

use super::{check_data, FittedModel, ModelKind, ModelMeta, RegressorError};
use crate::expr::{ExprTree, Node};
use crate::linalg::affine_fit;
use crate::Matrix;

/// `b0 + sum_j b_j x_j`, skipping zero coefficients.
pub(crate) fn affine_tree(intercept: f64, coef: &[f64]) -> ExprTree {
    let mut root = Node::Const(intercept);
    for (j, &b) in coef.iter().enumerate() {
        if b != 0.0 {
            root = Node::add(root, Node::mul(Node::Const(b), Node::Var(j)));
        }
    }
    ExprTree::new(root)
}

/// Ordinary least squares with an intercept. Rank deficiency yields the
/// minimum-norm solution and the `rank_deficient` flag.
pub fn fit_linear(x: &Matrix, y: &[f64]) -> Result<FittedModel, RegressorError> {
    check_data(x, y)?;
    let fit = affine_fit(x, y, None)?;
    let mut meta = ModelMeta::default();
    if fit.rank_deficient {
        meta.flags.push("rank_deficient".to_string());
    }
    let m = FittedModel::from_expr(ModelKind::Linear, x.ncols(), affine_tree(fit.intercept, &fit.coef), meta)?;
    Ok(m.with_mask(None))
}
