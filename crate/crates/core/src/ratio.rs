//! The approximation-ratio curve `(1 + ln(1/λ)) / (1 - λ)`, its minimizer,
//! and the end-to-end guarantee check on instances.

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::mechanism::{equilibrium, EquilibriumReport, TradeInstance};
use crate::scalar::{unit_scale, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaOptimum<T> {
    pub lambda_star: T,
    pub ratio_star: T,
    /// `|2 - 1/λ* - ln λ*|`.
    pub stationarity_residual: T,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GuaranteeMargins<T> {
    /// `gft - fb / ratio_star`.
    pub margin_315: T,
    /// `gft - fb / 4`.
    pub margin_4: T,
    pub ratio_star: T,
}

fn check_lambda<T: Scalar>(lambda: T) -> Result<()> {
    if lambda > T::zero() && lambda < T::one() {
        Ok(())
    } else {
        Err(domain(format!("lambda = {lambda} is outside (0, 1)")))
    }
}

pub(crate) fn validate_lambda<T: Scalar>(lambda: T) -> Result<()> {
    check_lambda(lambda)
}

/// Guaranteed ratio `(1 + ln(1/λ)) / (1 - λ)` for scaling parameter `λ`.
pub fn ratio_bound<T: Scalar>(lambda: T) -> Result<T> {
    check_lambda(lambda)?;
    Ok((T::one() - lambda.ln()) / (T::one() - lambda))
}

/// Derivative numerator of [`ratio_bound`]: `2 - 1/λ - ln λ`. Strictly
/// increasing on `(0, 1)`.
fn stationarity<T: Scalar>(lambda: T) -> T {
    T::two() - lambda.recip() - lambda.ln()
}

const MAX_ITERATIONS: usize = 200;

/// Minimizes [`ratio_bound`] by safeguarded Newton iteration on the
/// stationarity condition, bracketed in `[0.1, 0.9]`.
pub fn optimize_lambda<T: Scalar>(tol: T) -> Result<LambdaOptimum<T>> {
    if !(tol > T::zero()) {
        return Err(domain(format!("tol = {tol} must be positive")));
    }
    let step_tol = tol.max(T::epsilon());
    let (mut lo, mut hi) = (T::lit(0.1), T::lit(0.9));
    debug_assert!(stationarity(lo) < T::zero() && stationarity(hi) > T::zero());
    let mut lambda = T::lit(0.3);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let g = stationarity(lambda);
        if g == T::zero() {
            converged = true;
            break;
        }
        if g < T::zero() {
            lo = lambda;
        } else {
            hi = lambda;
        }
        let slope = (T::one() - lambda) / (lambda * lambda);
        let mut next = lambda - g / slope;
        if !(next > lo && next < hi) {
            next = (lo + hi) * T::half();
        }
        let step = (next - lambda).abs();
        lambda = next;
        if step <= step_tol * lambda || hi - lo <= T::epsilon() * lambda {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numeric(format!(
            "stationarity solve did not converge in {MAX_ITERATIONS} iterations"
        )));
    }
    let ratio_star = ratio_bound(lambda)?;
    let probe = T::lit(10.0) * tol;
    let slack = T::lit(4.0) * T::epsilon() * ratio_star;
    for neighbour in [lambda - probe, lambda + probe] {
        if neighbour > T::zero() && neighbour < T::one() && ratio_bound(neighbour)? < ratio_star - slack
        {
            return Err(Error::Numeric(format!(
                "lambda = {lambda} is not a local minimum of the ratio bound"
            )));
        }
    }
    Ok(LambdaOptimum {
        lambda_star: lambda,
        ratio_star,
        stationarity_residual: stationarity(lambda).abs(),
        iterations,
    })
}

/// The optimal ratio constant, about 3.1462.
pub fn ratio_star<T: Scalar>() -> T {
    optimize_lambda(T::lit(1e-12))
        .expect("stationarity solve converges on a fixed bracket")
        .ratio_star
}

/// Guarantee margins for an already computed equilibrium; errors when
/// either is negative beyond tolerance.
pub fn guarantee_margins<T: Scalar>(report: &EquilibriumReport<T>) -> Result<GuaranteeMargins<T>> {
    let ratio_star = ratio_star::<T>();
    let margins = GuaranteeMargins {
        margin_315: report.gft - report.fb / ratio_star,
        margin_4: report.gft - report.fb / T::lit(4.0),
        ratio_star,
    };
    let tolerance = T::check_tol() * unit_scale(report.fb);
    for (name, slack) in [("margin_315", margins.margin_315), ("margin_4", margins.margin_4)] {
        if slack < -tolerance {
            return Err(Error::InvariantViolation {
                name: name.into(),
                slack: slack.to_f64().unwrap_or(f64::NAN),
                tolerance: tolerance.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    Ok(margins)
}

/// Checks `gft >= fb / 3.1462` and `gft >= fb / 4` on an instance.
pub fn guarantee_check<T: Scalar>(instance: &TradeInstance<T>) -> Result<GuaranteeMargins<T>> {
    guarantee_margins(&equilibrium(instance))
}
