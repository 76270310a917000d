//! First best, posted-price best responses, and the canonical equilibrium of
//! the random proposer mechanism.
//!
//! The responder accepts whenever the offer leaves it weakly better off, so
//! a seller with cost `c` accepts an offer `p` iff `c <= p` and a buyer with
//! value `v` accepts iff `v >= p`. The seller's problem is solved as a
//! buyer's problem on negated priors; see [`role_swap`].

use serde::{Deserialize, Serialize};

use crate::distributions::{Distribution, RawDistribution};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Buyer and seller priors. Independence is structural: the instance is the
/// product of the two marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    into = "RawInstance<T>",
    try_from = "RawInstance<T>",
    bound(
        serialize = "T: Scalar + Serialize",
        deserialize = "T: Scalar + Deserialize<'de>"
    )
)]
pub struct TradeInstance<T> {
    /// Distribution of the buyer's value `v`.
    pub buyer: Distribution<T>,
    /// Distribution of the seller's cost `c`.
    pub seller: Distribution<T>,
}

/// Instance file contents before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawInstance<T> {
    pub buyer: RawDistribution<T>,
    pub seller: RawDistribution<T>,
}

impl<T: Scalar> RawInstance<T> {
    pub fn validate(&self) -> Result<TradeInstance<T>> {
        let buyer = self.buyer.validate();
        let seller = self.seller.validate();
        match (buyer, seller) {
            (Ok(buyer), Ok(seller)) => Ok(TradeInstance { buyer, seller }),
            (b, s) => {
                let mut report = crate::error::ValidationReport::default();
                for (side, r) in [("buyer", b.err()), ("seller", s.err())] {
                    match r {
                        Some(Error::Validation(v)) => {
                            report.violations.extend(v.prefixed(side).violations)
                        }
                        Some(e) => return Err(e),
                        None => {}
                    }
                }
                Err(Error::Validation(report))
            }
        }
    }
}

impl<T: Scalar> TryFrom<RawInstance<T>> for TradeInstance<T> {
    type Error = Error;

    fn try_from(raw: RawInstance<T>) -> Result<Self> {
        raw.validate()
    }
}

impl<T: Scalar> From<TradeInstance<T>> for RawInstance<T> {
    fn from(i: TradeInstance<T>) -> Self {
        RawInstance {
            buyer: i.buyer.to_raw(),
            seller: i.seller.to_raw(),
        }
    }
}

impl<T: Scalar> TradeInstance<T> {
    pub fn new(buyer: Distribution<T>, seller: Distribution<T>) -> Self {
        Self { buyer, seller }
    }
}

/// Optimal take-it-or-leave-it offer of a proposer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BestResponse<T> {
    pub price: T,
    pub utility: T,
    /// Probability that the responder accepts `price`.
    pub trade_prob: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumReport<T> {
    #[serde(rename = "u_B")]
    pub u_b: T,
    #[serde(rename = "u_S")]
    pub u_s: T,
    pub gft_buyer_proposes: T,
    pub gft_seller_proposes: T,
    pub gft: T,
    pub fb: T,
}

/// Probability that a seller drawn from `seller` accepts offer `p`.
pub fn acceptance_prob<T: Scalar>(seller: &Distribution<T>, p: T) -> T {
    seller.cdf(p)
}

/// `E[(v - c)+]` for a fixed buyer value.
pub fn conditional_first_best<T: Scalar>(v: T, seller: &Distribution<T>) -> T {
    let x = seller.cdf(v);
    x * v - seller.integrate_quantile_unchecked(T::zero(), x)
}

/// First-best gains from trade `E[(v - c)+]`.
pub fn first_best<T: Scalar>(instance: &TradeInstance<T>) -> T {
    let [fb] = instance
        .buyer
        .expect(|v| [conditional_first_best(v, &instance.seller)]);
    fb
}

/// Buyer with value `v` choosing the offer that maximizes `(v - p) * x(p)`.
///
/// Ties prefer the larger acceptance probability, then the lower price. When
/// no offer earns a positive surplus the buyer offers its own value.
pub fn buyer_best_response<T: Scalar>(v: T, seller: &Distribution<T>) -> BestResponse<T> {
    let mut best = BestResponse {
        price: v,
        utility: T::zero(),
        trade_prob: seller.cdf(v),
    };
    let mut consider = |price: T, trade_prob: T| {
        if price > v {
            return;
        }
        let utility = (v - price) * trade_prob;
        let better = utility > best.utility
            || (utility == best.utility
                && (trade_prob > best.trade_prob
                    || (trade_prob == best.trade_prob && price < best.price)));
        if better {
            best = BestResponse {
                price,
                utility,
                trade_prob,
            };
        }
    };
    match seller {
        Distribution::Discrete(d) => {
            for (&c, &x) in d.values().iter().zip(d.cumulative()) {
                if c > v {
                    break;
                }
                consider(c, x);
            }
        }
        Distribution::Pwl(p) => {
            let (qs, ys) = (p.qs(), p.values());
            for k in 0..ys.len() {
                if ys[k] > v {
                    break;
                }
                consider(ys[k], seller.cdf(ys[k]));
                if k + 1 < ys.len() && ys[k + 1] > ys[k] {
                    // x(p) = qa + (p - ya) s on this segment; the concave
                    // objective peaks at (v + ya - qa / s) / 2.
                    let s = (qs[k + 1] - qs[k]) / (ys[k + 1] - ys[k]);
                    let vertex = (v + ys[k] - qs[k] / s) * T::half();
                    let hi = ys[k + 1].min(v);
                    let price = vertex.max(ys[k]).min(hi);
                    consider(price, seller.cdf(price));
                }
            }
        }
    }
    best
}

/// Seller with cost `c` choosing the offer that maximizes
/// `(p - c) * Pr[v >= p]`; ties prefer the larger acceptance probability,
/// then the higher price.
pub fn seller_best_response<T: Scalar>(c: T, buyer: &Distribution<T>) -> BestResponse<T> {
    seller_best_response_negated(c, &buyer.negate())
}

/// [`seller_best_response`] against an already negated buyer prior.
pub(crate) fn seller_best_response_negated<T: Scalar>(
    c: T,
    negated_buyer: &Distribution<T>,
) -> BestResponse<T> {
    let br = buyer_best_response(-c, negated_buyer);
    BestResponse {
        price: -br.price,
        ..br
    }
}

/// Buyer-proposer utility and realized surplus for a fixed value `v`.
pub(crate) fn buyer_proposal_outcome<T: Scalar>(v: T, seller: &Distribution<T>) -> [T; 2] {
    let br = buyer_best_response(v, seller);
    let gft = br.trade_prob * v - seller.integrate_quantile_unchecked(T::zero(), br.trade_prob);
    [br.utility, gft]
}

/// `(u, gft)` of the side whose prior is `proposer`, written as a buyer
/// facing a seller prior `responder`.
fn proposer_side<T: Scalar>(proposer: &Distribution<T>, responder: &Distribution<T>) -> [T; 2] {
    proposer.expect(|v| buyer_proposal_outcome(v, responder))
}

/// Canonical best-response equilibrium: each proposer posts its optimal
/// price against the opponent's prior and the responder accepts at weak
/// benefit.
pub fn equilibrium<T: Scalar>(instance: &TradeInstance<T>) -> EquilibriumReport<T> {
    let swapped = role_swap(instance);
    let [u_b, gft_buyer_proposes] = proposer_side(&instance.buyer, &instance.seller);
    let [u_s, gft_seller_proposes] = proposer_side(&swapped.buyer, &swapped.seller);
    EquilibriumReport {
        u_b,
        u_s,
        gft_buyer_proposes,
        gft_seller_proposes,
        gft: (gft_buyer_proposes + gft_seller_proposes) * T::half(),
        fb: first_best(instance),
    }
}

/// Exchange the roles by negation: the new buyer has value `-c` and the new
/// seller has cost `-v`, so the surplus `v - c` is unchanged pointwise.
pub fn role_swap<T: Scalar>(instance: &TradeInstance<T>) -> TradeInstance<T> {
    TradeInstance {
        buyer: instance.seller.negate(),
        seller: instance.buyer.negate(),
    }
}
