//! Closed-form fields for `init.kind = "field_expr"`.

use evalexpr::{build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Value};
use spde_bridge_core::PhysicalGrid;

use crate::error::{CliError, Result};

/// Evaluates `expr` at every grid point. The expression sees the position as
/// `x`, plus `pi` and the domain length `L`; functions use evalexpr names
/// such as `math::sin`.
pub fn sample_field(expr: &str, grid: &PhysicalGrid) -> Result<Vec<f64>> {
    let bad = |e: evalexpr::EvalexprError| CliError::config(format!("`init.expr`: {e}"));
    let tree = build_operator_tree::<DefaultNumericTypes>(expr).map_err(bad)?;
    let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
    ctx.set_value("pi".into(), Value::Float(std::f64::consts::PI)).map_err(bad)?;
    ctx.set_value("L".into(), Value::Float(grid.domain_length())).map_err(bad)?;
    grid.points()
        .iter()
        .map(|&x| {
            ctx.set_value("x".into(), Value::Float(x)).map_err(bad)?;
            let v = tree.eval_number_with_context(&ctx).map_err(bad)?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(CliError::config(format!("`init.expr` is not finite at x = {x}")))
            }
        })
        .collect()
}
