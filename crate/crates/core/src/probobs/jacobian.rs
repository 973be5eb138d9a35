//! Observability Jacobian from the series solution.
//!
//! With y_r(t) = g_r(Φ(t), u*(t)) the block of rows for derivative order j is
//!
//! ```text
//! J[j·n_y + r][c] = j! · coeff_j( sum_k (∂g_r/∂x̄_k)(Φ, u*) · Γ_{k,c} )
//! ```
//!
//! i.e. the c-th initial-condition sensitivity of d^j y_r/dt^j at t = 0. The
//! j! factor is a per-row rescale and cannot change the rank; the flag exists
//! so tests can confirm that.

use crate::expr::{ExprId, SeriesDomain};
use crate::field::FieldMatrix;
use crate::model::AugmentedModel;

use super::specialize::SpecializedSystem;
use super::variational::{series_bindings, SolveError, VariationalSolution};

/// Stacks sensitivity rows for output derivative orders 0..order.
/// The result is (order · n_y) x dim.
pub fn assemble_jacobian(
    aug: &mut AugmentedModel,
    sys: &SpecializedSystem,
    sol: &VariationalSolution,
    rescale: bool,
) -> Result<FieldMatrix, SolveError> {
    let field = sys.field();
    let dim = aug.dim();
    let n_y = aug.n_outputs();
    let order = sol.order;
    let symbols = aug.component_symbols();

    let outputs = aug.outputs.clone();
    let mut entries: Vec<(usize, usize, ExprId)> = Vec::new();
    for (r, &g) in outputs.iter().enumerate() {
        for (k, &sym) in symbols.iter().enumerate() {
            let d = aug.arena.differentiate(g, sym)?;
            if !aug.arena.is_zero(d) {
                entries.push((r, k, d));
            }
        }
    }

    let bindings = series_bindings(aug, sys, &sol.phi, order);
    let domain = SeriesDomain { field, order };
    let exprs: Vec<ExprId> = entries.iter().map(|&(_, _, e)| e).collect();
    let values = aug.arena.evaluate_many(&exprs, &bindings, &domain)?;

    let mut jac = FieldMatrix::zero(field, order * n_y, dim);
    for ((r, k, _), partial) in entries.iter().zip(&values) {
        for c in 0..dim {
            if sol.gamma[*k][c].is_zero() {
                continue;
            }
            let prod = partial.mul(&sol.gamma[*k][c]);
            for j in 0..order {
                let v = prod.coeff(j);
                if !v.is_zero() {
                    let row = j * n_y + r;
                    jac.set(row, c, jac.get(row, c) + v);
                }
            }
        }
    }

    if rescale {
        let mut fact = field.one();
        for j in 1..order {
            fact = fact * field.from_i64(j as i64);
            for r in 0..n_y {
                let row = j * n_y + r;
                for c in 0..dim {
                    let v = jac.get(row, c);
                    if !v.is_zero() {
                        jac.set(row, c, v * fact);
                    }
                }
            }
        }
    }
    Ok(jac)
}
