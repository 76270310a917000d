//! Fixed-value geometry of the buyer's problem and the bounds built on it.
//!
//! For a buyer value `v` facing seller quantile function `c(q)` with
//! acceptance curve `x(p)`, and a scaling `λ` in `(0, 1)`:
//!
//! * `b = c(λ x(v))` splits the conditional first best `∫_0^{x(v)} (v - c)`
//!   into `S = ∫_{-∞}^{b} x(p) dp` and `B = ∫_b^v x(p) dp`.
//! * `A = ∫_{λx(v)}^{x(v)} (v - c(q)) dq` is the top wedge.
//! * `u_S_geom = ∫_0^{λx(v)} (c(q/λ) - c(q)) dq` is the area between the
//!   quantile curve and its `1/λ`-scaled copy, and satisfies
//!   `u_S_geom + A = (1 - λ) fb_v`.
//!
//! `S` and `B` are measured under the CDF while `fb_v` integrates the
//! quantile function, so `S + B = fb_v` compares two independent routes.

use serde::Serialize;

use crate::distributions::Distribution;
use crate::error::{domain, Error, Result};
use crate::mechanism::{
    buyer_best_response, equilibrium, role_swap, TradeInstance,
};
use crate::ratio::{ratio_bound, validate_lambda, GuaranteeMargins};
use crate::scalar::{unit_scale, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecompositionReport<T> {
    pub v: T,
    pub lambda: T,
    pub x_v: T,
    pub b_lambda: T,
    pub fb_v: T,
    #[serde(rename = "area_S")]
    pub area_s: T,
    #[serde(rename = "area_B")]
    pub area_b: T,
    #[serde(rename = "area_A")]
    pub area_a: T,
    #[serde(rename = "u_S_geom")]
    pub u_s_geom: T,
    /// Buyer utility from offering `b_lambda`.
    #[serde(rename = "u_B_dev")]
    pub u_b_dev: T,
    /// Buyer best-response utility at `v`.
    #[serde(rename = "u_B_opt")]
    pub u_b_opt: T,
}

/// Decomposition averaged over the buyer prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectedDecomposition<T> {
    pub lambda: T,
    pub x_v: T,
    pub fb: T,
    #[serde(rename = "area_S")]
    pub area_s: T,
    #[serde(rename = "area_B")]
    pub area_b: T,
    #[serde(rename = "area_A")]
    pub area_a: T,
    #[serde(rename = "u_S_geom")]
    pub u_s_geom: T,
    #[serde(rename = "u_B_dev")]
    pub u_b_dev: T,
    #[serde(rename = "u_B_opt")]
    pub u_b_opt: T,
    /// Expected utility of the seller's scaled-quantile strategy.
    pub seller_scaling_utility: T,
}

/// Signed slacks of the proven relations; non-negative when they hold.
/// `identity` entries are equalities and should be zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Slacks<T> {
    /// (i) `(1-λ)FB - E[u_S_geom] - E[A]`.
    pub identity: T,
    /// (i) on the role-swapped instance.
    pub identity_mirror: T,
    /// (ii) `u_B ln(1/λ) - E[A]`.
    pub area_a: T,
    /// (ii) on the role-swapped instance: `u_S ln(1/λ) - E[A']`.
    pub area_a_mirror: T,
    /// `u_S - E[seller scaled-quantile utility]`.
    pub seller_strategy: T,
    /// (iii) `u_S + u_B ln(1/λ) - (1-λ)FB`.
    pub seller_bound: T,
    /// (iv) `u_B + u_S ln(1/λ) - (1-λ)FB`.
    pub mirrored_bound: T,
    /// (v) `GFT - (1-λ)FB / (1 + ln(1/λ))`.
    pub averaged: T,
    /// Minimum over values of `u_B_dev - λ B` (both roles).
    pub buyer_deviation: T,
    /// Minimum over values of `u_S_geom - (1-λ) S` (both roles).
    pub seller_area: T,
    /// Minimum over values of `seller_scaling_utility - u_S_geom`.
    pub scaling_utility: T,
    /// `GFT - FB/4`.
    pub quarter: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport<T> {
    pub lambda: T,
    pub ln_inv_lambda: T,
    pub ratio_bound: T,
    pub fb: T,
    pub gft: T,
    #[serde(rename = "u_B")]
    pub u_b: T,
    #[serde(rename = "u_S")]
    pub u_s: T,
    #[serde(rename = "expected_area_A")]
    pub expected_area_a: T,
    #[serde(rename = "expected_u_S_geom")]
    pub expected_u_s_geom: T,
    #[serde(rename = "expected_area_A_mirror")]
    pub expected_area_a_mirror: T,
    #[serde(rename = "expected_u_S_geom_mirror")]
    pub expected_u_s_geom_mirror: T,
    pub slacks: Slacks<T>,
    pub guarantee: GuaranteeMargins<T>,
}

/// All fixed-`v` areas for seller prior `seller` and scaling `lambda`.
pub fn decompose_fixed_v<T: Scalar>(
    v: T,
    seller: &Distribution<T>,
    lambda: T,
) -> Result<DecompositionReport<T>> {
    validate_lambda(lambda)?;
    Ok(decompose_unchecked(v, seller, lambda))
}

fn decompose_unchecked<T: Scalar>(v: T, seller: &Distribution<T>, lambda: T) -> DecompositionReport<T> {
    let zero = T::zero();
    let x_v = seller.cdf(v);
    let u_b_opt = buyer_best_response(v, seller).utility;
    if x_v == zero {
        return DecompositionReport {
            v,
            lambda,
            x_v,
            b_lambda: v,
            fb_v: zero,
            area_s: zero,
            area_b: zero,
            area_a: zero,
            u_s_geom: zero,
            u_b_dev: zero,
            u_b_opt,
        };
    }
    let scaled = lambda * x_v;
    let b = seller.quantile_unchecked(scaled);
    let below = seller.support_min().min(b);
    let full = seller.integrate_quantile_unchecked(zero, x_v);
    let lower = seller.integrate_quantile_unchecked(zero, scaled);
    let wedge = seller.integrate_quantile_unchecked(scaled, x_v);
    DecompositionReport {
        v,
        lambda,
        x_v,
        b_lambda: b,
        fb_v: x_v * v - full,
        area_s: seller.integrate_cdf_unchecked(below, b),
        area_b: seller.integrate_cdf_unchecked(b, v),
        area_a: (x_v - scaled) * v - wedge,
        // ∫_0^{λx} c(q/λ) dq = λ ∫_0^x c(r) dr
        u_s_geom: lambda * full - lower,
        u_b_dev: (v - b) * seller.cdf(b),
        u_b_opt,
    }
}

/// The buyer's deviation to `b = c(λ x(v))`: `(b, (v - b) x(b))`.
pub fn buyer_deviation_bound<T: Scalar>(v: T, seller: &Distribution<T>, lambda: T) -> Result<(T, T)> {
    let d = decompose_fixed_v(v, seller, lambda)?;
    Ok((d.b_lambda, d.u_b_dev))
}

/// Expected seller utility, against a fixed buyer value `v`, of the strategy
/// that offers `c(min(q/λ, 1))` at cost quantile `q`. The offer is accepted
/// iff it does not exceed `v`.
pub fn seller_scaling_utility<T: Scalar>(v: T, seller: &Distribution<T>, lambda: T) -> Result<T> {
    validate_lambda(lambda)?;
    Ok(scaling_utility_unchecked(v, seller, lambda))
}

fn scaling_utility_unchecked<T: Scalar>(v: T, seller: &Distribution<T>, lambda: T) -> T {
    let zero = T::zero();
    let x_v = seller.cdf(v);
    // c(min(q/λ, 1)) <= v iff min(q/λ, 1) <= x(v)
    let accepted = if x_v >= T::one() { T::one() } else { lambda * x_v };
    let scaled_end = accepted.min(lambda);
    let mut revenue = lambda * seller.integrate_quantile_unchecked(zero, scaled_end / lambda);
    if accepted > lambda {
        revenue = revenue + (accepted - lambda) * seller.support_max();
    }
    revenue - seller.integrate_quantile_unchecked(zero, accepted)
}

/// `u_B_opt(v) - q (v - c(q))`, non-negative for every `q` in `[0, x(v)]`.
pub fn key_lemma_margin<T: Scalar>(v: T, seller: &Distribution<T>, q: T) -> Result<T> {
    let x_v = seller.cdf(v);
    if !(q >= T::zero() && q <= x_v) {
        return Err(domain(format!("q = {q} is outside [0, x(v) = {x_v}]")));
    }
    let u_b_opt = buyer_best_response(v, seller).utility;
    Ok(u_b_opt - q * (v - seller.quantile_unchecked(q)))
}

/// Decomposition fields averaged over the buyer's value.
pub fn decompose_expected<T: Scalar>(
    instance: &TradeInstance<T>,
    lambda: T,
) -> Result<ExpectedDecomposition<T>> {
    validate_lambda(lambda)?;
    let seller = &instance.seller;
    let [x_v, fb, area_s, area_b, area_a, u_s_geom, u_b_dev, u_b_opt, scaling] =
        instance.buyer.expect(|v| {
            let d = decompose_unchecked(v, seller, lambda);
            [
                d.x_v,
                d.fb_v,
                d.area_s,
                d.area_b,
                d.area_a,
                d.u_s_geom,
                d.u_b_dev,
                d.u_b_opt,
                scaling_utility_unchecked(v, seller, lambda),
            ]
        });
    Ok(ExpectedDecomposition {
        lambda,
        x_v,
        fb,
        area_s,
        area_b,
        area_a,
        u_s_geom,
        u_b_dev,
        u_b_opt,
        seller_scaling_utility: scaling,
    })
}

/// Conditioning values at which per-value relations are spot-checked: every
/// atom of a discrete prior, or the knot values plus a midpoint quantile
/// grid of a piecewise-linear one.
pub fn probe_values<T: Scalar>(prior: &Distribution<T>) -> Vec<T> {
    const GRID: usize = 64;
    match prior {
        Distribution::Discrete(d) => d.values().to_vec(),
        Distribution::Pwl(p) => {
            let mut vs: Vec<T> = p.values().to_vec();
            vs.extend((0..GRID).map(|i| {
                let q = (T::from_usize(i).unwrap() + T::half()) / T::from_usize(GRID).unwrap();
                prior.quantile_unchecked(q)
            }));
            vs
        }
    }
}

struct PerValueMinima<T> {
    buyer_deviation: T,
    seller_area: T,
    scaling_utility: T,
}

fn per_value_minima<T: Scalar>(instance: &TradeInstance<T>, lambda: T) -> PerValueMinima<T> {
    let mut out = PerValueMinima {
        buyer_deviation: T::infinity(),
        seller_area: T::infinity(),
        scaling_utility: T::infinity(),
    };
    for v in probe_values(&instance.buyer) {
        let d = decompose_unchecked(v, &instance.seller, lambda);
        let s = scaling_utility_unchecked(v, &instance.seller, lambda);
        out.buyer_deviation = out.buyer_deviation.min(d.u_b_dev - lambda * d.area_b);
        out.seller_area = out
            .seller_area
            .min(d.u_s_geom - (T::one() - lambda) * d.area_s);
        out.scaling_utility = out.scaling_utility.min(s - d.u_s_geom);
    }
    out
}

/// Computes every quantity and slack without judging them.
pub fn bound_report<T: Scalar>(instance: &TradeInstance<T>, lambda: T) -> Result<BoundReport<T>> {
    let ratio = ratio_bound(lambda)?;
    let ln_inv = -lambda.ln();
    let one = T::one();
    let swapped = role_swap(instance);

    let eq = equilibrium(instance);
    let direct = decompose_expected(instance, lambda)?;
    let mirror = decompose_expected(&swapped, lambda)?;
    let scaled_fb = (one - lambda) * eq.fb;

    let minima = per_value_minima(instance, lambda);
    let minima_mirror = per_value_minima(&swapped, lambda);

    let slacks = Slacks {
        identity: scaled_fb - direct.u_s_geom - direct.area_a,
        identity_mirror: scaled_fb - mirror.u_s_geom - mirror.area_a,
        area_a: eq.u_b * ln_inv - direct.area_a,
        area_a_mirror: eq.u_s * ln_inv - mirror.area_a,
        seller_strategy: eq.u_s - direct.seller_scaling_utility,
        seller_bound: eq.u_s + eq.u_b * ln_inv - scaled_fb,
        mirrored_bound: eq.u_b + eq.u_s * ln_inv - scaled_fb,
        averaged: eq.gft - scaled_fb / (one + ln_inv),
        buyer_deviation: minima.buyer_deviation.min(minima_mirror.buyer_deviation),
        seller_area: minima.seller_area.min(minima_mirror.seller_area),
        scaling_utility: minima.scaling_utility.min(minima_mirror.scaling_utility),
        quarter: eq.gft - eq.fb / T::lit(4.0),
    };
    let ratio_star = crate::ratio::ratio_star::<T>();
    Ok(BoundReport {
        lambda,
        ln_inv_lambda: ln_inv,
        ratio_bound: ratio,
        fb: eq.fb,
        gft: eq.gft,
        u_b: eq.u_b,
        u_s: eq.u_s,
        expected_area_a: direct.area_a,
        expected_u_s_geom: direct.u_s_geom,
        expected_area_a_mirror: mirror.area_a,
        expected_u_s_geom_mirror: mirror.u_s_geom,
        slacks,
        guarantee: GuaranteeMargins {
            margin_315: eq.gft - eq.fb / ratio_star,
            margin_4: eq.gft - eq.fb / T::lit(4.0),
            ratio_star,
        },
    })
}

impl<T: Scalar> BoundReport<T> {
    /// Tolerance for aggregate relations: `1e-9 * max(1, FB, u_B, u_S)` in
    /// double precision.
    pub fn tolerance(&self) -> T {
        T::check_tol() * unit_scale(self.fb).max(self.u_b.abs()).max(self.u_s.abs())
    }

    /// Named slacks with whether each is an equality.
    pub fn named_slacks(&self) -> [(&'static str, T, bool); 12] {
        let s = &self.slacks;
        [
            ("identity", s.identity, true),
            ("identity_mirror", s.identity_mirror, true),
            ("area_a", s.area_a, false),
            ("area_a_mirror", s.area_a_mirror, false),
            ("seller_strategy", s.seller_strategy, false),
            ("seller_bound", s.seller_bound, false),
            ("mirrored_bound", s.mirrored_bound, false),
            ("averaged", s.averaged, false),
            ("buyer_deviation", s.buyer_deviation, false),
            ("seller_area", s.seller_area, false),
            ("scaling_utility", s.scaling_utility, false),
            ("quarter", s.quarter, false),
        ]
    }

    /// First relation violated beyond tolerance, if any.
    pub fn check(&self) -> Result<()> {
        let tolerance = self.tolerance();
        for (name, slack, equality) in self.named_slacks() {
            let bad = if equality {
                slack.abs() > tolerance || slack.is_nan()
            } else {
                slack < -tolerance || slack.is_nan()
            };
            if bad {
                return Err(Error::InvariantViolation {
                    name: name.into(),
                    slack: slack.to_f64().unwrap_or(f64::NAN),
                    tolerance: tolerance.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        let g = &self.guarantee;
        for (name, slack) in [("margin_315", g.margin_315), ("margin_4", g.margin_4)] {
            if slack < -tolerance || slack.is_nan() {
                return Err(Error::InvariantViolation {
                    name: name.into(),
                    slack: slack.to_f64().unwrap_or(f64::NAN),
                    tolerance: tolerance.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(())
    }
}

/// [`bound_report`] followed by [`BoundReport::check`]; a violation is an
/// [`Error::InvariantViolation`].
pub fn verify_bounds<T: Scalar>(instance: &TradeInstance<T>, lambda: T) -> Result<BoundReport<T>> {
    let report = bound_report(instance, lambda)?;
    report.check()?;
    Ok(report)
}
