//! Random specialization of an augmented model over a prime field.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::expr::{rational_normal_form, EvalError, ExprId, FieldDomain, SymbolBindings};
use crate::field::{FieldElement, PrimeField, TruncatedSeries};
use crate::model::AugmentedModel;

/// One random point plus input series, with the dynamics pre-split into
/// numerator/denominator pairs whose denominators are units at the point.
///
/// A `SpecializedSystem` is a pure function of `(model, seed, prime)`; both
/// engines evaluate at the same specialization when handed the same system.
#[derive(Debug, Clone)]
pub struct SpecializedSystem {
    pub prime: u64,
    /// Seed this specialization was drawn from (already attempt-salted).
    pub seed: u64,
    /// Series carry coefficients t^0..t^(order-1); order = dim(x̄)+1 by
    /// default.
    pub order: usize,
    /// Initial values for every augmented component, all nonzero.
    pub x0: Vec<FieldElement>,
    /// Per known input (in declaration order), a random power series.
    pub u_series: Vec<TruncatedSeries>,
    /// Numerators of the component dynamics f̄_i.
    pub dynamics_num: Vec<ExprId>,
    /// Denominators of the component dynamics; units at `x0`.
    pub dynamics_den: Vec<ExprId>,
    /// Numerators / denominators of the outputs; denominators unit at `x0`.
    pub output_num: Vec<ExprId>,
    pub output_den: Vec<ExprId>,
}

impl SpecializedSystem {
    pub fn field(&self) -> PrimeField {
        PrimeField::new(self.prime)
    }

    /// Scalar bindings at t = 0: components at `x0`, known inputs at their
    /// series' constant coefficient.
    pub fn point_bindings(&self, aug: &AugmentedModel) -> SymbolBindings<FieldElement> {
        let mut b = SymbolBindings::for_arena(&aug.arena);
        for (comp, &v) in aug.components.iter().zip(&self.x0) {
            b.bind(comp.symbol, v);
        }
        for (&u, series) in aug.known_inputs.iter().zip(&self.u_series) {
            b.bind(u, series.coeff(0));
        }
        b
    }

    /// Series bindings with each component bound to the given flow series and
    /// each known input to its random series.
    pub fn series_bindings(
        &self,
        aug: &AugmentedModel,
        flow: &[TruncatedSeries],
    ) -> SymbolBindings<TruncatedSeries> {
        let mut b = SymbolBindings::for_arena(&aug.arena);
        for (comp, phi) in aug.components.iter().zip(flow) {
            b.bind(comp.symbol, phi.clone());
        }
        for (&u, series) in aug.known_inputs.iter().zip(&self.u_series) {
            b.bind(u, series.clone());
        }
        b
    }

    /// Value of the j-th derivative of known input `input_idx` at t = 0,
    /// i.e. j! times the series coefficient; zero beyond the stored order.
    pub fn known_input_derivative(&self, input_idx: usize, j: usize) -> FieldElement {
        let field = self.field();
        if j >= self.order {
            return field.zero();
        }
        let mut fact = field.one();
        for k in 1..=j {
            fact = fact * field.from_i64(k as i64);
        }
        self.u_series[input_idx].coeff(j) * fact
    }
}

/// Why a specialization attempt was rejected.
#[derive(Debug, Clone, thiserror::Error)]
pub enum SpecializeError {
    #[error("denominator of {context} vanishes at the sampled point")]
    VanishingDenominator { context: String },
    #[error("dynamics of {context} are not rational: {detail}")]
    NotRational { context: String, detail: String },
}

/// Draws one specialization. Deterministic in `(seed, prime)`; the caller
/// retries with a different salted seed when a denominator vanishes.
pub fn specialize(
    aug: &mut AugmentedModel,
    seed: u64,
    prime: u64,
    sample_bound: u64,
    order: usize,
) -> Result<SpecializedSystem, SpecializeError> {
    let field = PrimeField::new(prime);
    let bound = sample_bound.min(prime - 1).max(1);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let x0: Vec<FieldElement> =
        (0..aug.dim()).map(|_| field.element(rng.gen_range(1..=bound))).collect();
    let u_series: Vec<TruncatedSeries> = (0..aug.known_inputs.len())
        .map(|_| {
            let coeffs: Vec<u64> = (0..order).map(|_| rng.gen_range(1..=bound)).collect();
            TruncatedSeries::new(field, coeffs)
        })
        .collect();

    let dynamics = aug.dynamics();
    let mut dynamics_num = Vec::with_capacity(dynamics.len());
    let mut dynamics_den = Vec::with_capacity(dynamics.len());
    let mut output_num = Vec::with_capacity(aug.outputs.len());
    let mut output_den = Vec::with_capacity(aug.outputs.len());
    {
        let labeled = dynamics
            .iter()
            .enumerate()
            .map(|(i, &e)| (format!("d({})/dt", aug.component_name(i)), e, true))
            .chain(
                aug.outputs
                    .iter()
                    .enumerate()
                    .map(|(r, &e)| (format!("output {}", r + 1), e, false)),
            )
            .collect::<Vec<_>>();
        for (context, expr, is_dynamics) in labeled {
            let form = rational_normal_form(&mut aug.arena, expr).map_err(|e| {
                SpecializeError::NotRational { context: context.clone(), detail: e.0.excerpt }
            })?;
            if is_dynamics {
                dynamics_num.push(form.num);
                dynamics_den.push(form.den);
            } else {
                output_num.push(form.num);
                output_den.push(form.den);
            }
        }
    }

    let sys = SpecializedSystem {
        prime,
        seed,
        order,
        x0,
        u_series,
        dynamics_num,
        dynamics_den,
        output_num,
        output_den,
    };

    // Every denominator must be a unit at the point, else the flow series
    // does not exist at this specialization and we must resample.
    let bindings = sys.point_bindings(aug);
    let dens: Vec<ExprId> =
        sys.dynamics_den.iter().chain(&sys.output_den).copied().collect();
    match aug.arena.evaluate_many(&dens, &bindings, &FieldDomain(field)) {
        Ok(values) => {
            for (k, v) in values.iter().enumerate() {
                if v.is_zero() {
                    let context = if k < sys.dynamics_den.len() {
                        format!("d({})/dt", aug.component_name(k))
                    } else {
                        format!("output {}", k - sys.dynamics_den.len() + 1)
                    };
                    return Err(SpecializeError::VanishingDenominator { context });
                }
            }
        }
        Err(EvalError::DivisionByZero) => {
            return Err(SpecializeError::VanishingDenominator { context: "equations".into() })
        }
        Err(e) => {
            return Err(SpecializeError::NotRational {
                context: "equations".into(),
                detail: e.to_string(),
            })
        }
    }
    Ok(sys)
}
