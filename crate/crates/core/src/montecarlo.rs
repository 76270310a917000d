//! Simulation estimates of the first best and of the mechanism, used as an
//! independent cross-check of the exact pipeline.
//!
//! Trial `i` of a run with `D` draws per trial reads keystream words
//! `[2Di, 2D(i+1))` of the ChaCha generator seeded with `seed`, so its
//! randomness depends only on `(seed, i)`. Trials are reduced in fixed-size
//! chunks merged in index order, so results are bit-identical for any
//! thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::Distribution;
use crate::error::{domain, Result};
use crate::mechanism::{buyer_best_response, seller_best_response_negated, TradeInstance};
use crate::numeric::pairwise_sum;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimEstimate<T> {
    pub mean: T,
    /// Sample standard deviation over `sqrt(trials)`.
    pub stderr: T,
    pub trials: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MechanismEstimate<T> {
    pub gft: SimEstimate<T>,
    /// Buyer utility over the trials where the buyer proposed.
    #[serde(rename = "u_B")]
    pub u_b: SimEstimate<T>,
    /// Seller utility over the trials where the seller proposed.
    #[serde(rename = "u_S")]
    pub u_s: SimEstimate<T>,
}

const CHUNK: u64 = 1 << 14;

/// Count, mean and sum of squared deviations of a block of samples.
#[derive(Debug, Clone, Copy)]
struct Moments<T> {
    n: u64,
    mean: T,
    m2: T,
}

impl<T: Scalar> Moments<T> {
    fn empty() -> Self {
        Self {
            n: 0,
            mean: T::zero(),
            m2: T::zero(),
        }
    }

    fn of(xs: &[T]) -> Self {
        if xs.is_empty() {
            return Self::empty();
        }
        let n = T::from_usize(xs.len()).unwrap();
        let mean = pairwise_sum(xs) / n;
        let dev: Vec<T> = xs.iter().map(|&x| (x - mean) * (x - mean)).collect();
        Self {
            n: xs.len() as u64,
            mean,
            m2: pairwise_sum(&dev),
        }
    }

    fn merge(self, other: Self) -> Self {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let (na, nb) = (T::from_u64(self.n).unwrap(), T::from_u64(other.n).unwrap());
        let n = na + nb;
        let delta = other.mean - self.mean;
        Self {
            n: self.n + other.n,
            mean: self.mean + delta * nb / n,
            m2: self.m2 + other.m2 + delta * delta * na * nb / n,
        }
    }

    fn estimate(self, seed: u64) -> SimEstimate<T> {
        let stderr = if self.n > 1 {
            let n = T::from_u64(self.n).unwrap();
            let var = self.m2 / (n - T::one());
            var.max(T::zero()).sqrt() / n.sqrt()
        } else {
            T::zero()
        };
        SimEstimate {
            mean: self.mean,
            stderr,
            trials: self.n,
            seed,
        }
    }
}

fn uniform<T: Scalar>(rng: &mut ChaCha8Rng) -> T {
    let u = T::from_f64(rng.random::<f64>()).unwrap();
    u.min(T::one() - T::epsilon())
}

/// Inverse-transform draw that also reports the atom index for discrete
/// priors, so per-atom best responses can be looked up.
fn draw<T: Scalar>(dist: &Distribution<T>, u: T) -> (T, Option<usize>) {
    match dist.as_discrete() {
        Some(d) => {
            let i = d.quantile_index(u);
            (d.values()[i], Some(i))
        }
        None => (dist.quantile_unchecked(u), None),
    }
}

/// Runs `trial` on each trial's `D` uniform draws and reduces the per-trial
/// vectors chunk by chunk. `trial` returns one optional sample per tracked
/// quantity.
fn run_trials<T, F, const D: usize, const K: usize>(seed: u64, trials: u64, trial: F) -> [Moments<T>; K]
where
    T: Scalar,
    F: Fn([T; D]) -> [Option<T>; K] + Sync,
{
    let base = ChaCha8Rng::seed_from_u64(seed);
    let chunks = trials.div_ceil(CHUNK);
    let per_chunk: Vec<[Moments<T>; K]> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(trials);
            // Each draw consumes one u64, i.e. two 32-bit keystream words.
            let mut rng = base.clone();
            rng.set_word_pos(u128::from(start) * 2 * D as u128);
            let mut cols: [Vec<T>; K] = std::array::from_fn(|_| Vec::with_capacity(CHUNK as usize));
            for _ in start..end {
                let u = std::array::from_fn(|_| uniform(&mut rng));
                for (col, x) in cols.iter_mut().zip(trial(u)) {
                    if let Some(x) = x {
                        col.push(x);
                    }
                }
            }
            std::array::from_fn(|k| Moments::of(&cols[k]))
        })
        .collect();
    per_chunk
        .into_iter()
        .fold([Moments::empty(); K], |acc, m| std::array::from_fn(|k| acc[k].merge(m[k])))
}

fn check_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        Err(domain("trials must be at least 1"))
    } else {
        Ok(())
    }
}

/// Sampled estimate of `E[(v - c)+]`.
pub fn simulate_fb<T: Scalar>(instance: &TradeInstance<T>, trials: u64, seed: u64) -> Result<SimEstimate<T>> {
    check_trials(trials)?;
    let [m] = run_trials(seed, trials, |[uv, uc]| {
        let v = instance.buyer.quantile_unchecked(uv);
        let c = instance.seller.quantile_unchecked(uc);
        [Some((v - c).max(T::zero()))]
    });
    Ok(m.estimate(seed))
}

/// Best-response prices per atom of a discrete proposer prior.
fn price_table<T: Scalar>(proposer: &Distribution<T>, price: impl Fn(T) -> T) -> Option<Vec<T>> {
    proposer
        .as_discrete()
        .map(|d| d.values().iter().map(|&x| price(x)).collect())
}

/// Plays the random proposer mechanism trial by trial: a fair coin picks the
/// proposer, both types are drawn, the proposer posts its best-response
/// price against the opponent prior, and the responder accepts at weak
/// benefit.
pub fn simulate_mechanism<T: Scalar>(
    instance: &TradeInstance<T>,
    trials: u64,
    seed: u64,
) -> Result<MechanismEstimate<T>> {
    check_trials(trials)?;
    let (buyer, seller) = (&instance.buyer, &instance.seller);
    let negated_buyer = buyer.negate();
    let buyer_price = |v: T| buyer_best_response(v, seller).price;
    let seller_price = |c: T| seller_best_response_negated(c, &negated_buyer).price;
    let buyer_table = price_table(buyer, buyer_price);
    let seller_table = price_table(seller, seller_price);

    let [gft, u_b, u_s] = run_trials(seed, trials, |[coin, uv, uc]| {
        let (v, vi) = draw(buyer, uv);
        let (c, ci) = draw(seller, uc);
        if coin < T::half() {
            let p = match (&buyer_table, vi) {
                (Some(t), Some(i)) => t[i],
                _ => buyer_price(v),
            };
            let trade = c <= p;
            let surplus = if trade { v - c } else { T::zero() };
            let utility = if trade { v - p } else { T::zero() };
            [Some(surplus), Some(utility), None]
        } else {
            let p = match (&seller_table, ci) {
                (Some(t), Some(i)) => t[i],
                _ => seller_price(c),
            };
            let trade = v >= p;
            let surplus = if trade { v - c } else { T::zero() };
            let utility = if trade { p - c } else { T::zero() };
            [Some(surplus), None, Some(utility)]
        }
    });
    Ok(MechanismEstimate {
        gft: gft.estimate(seed),
        u_b: u_b.estimate(seed),
        u_s: u_s.estimate(seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_trade_instance_is_exactly_zero() {
        let i = TradeInstance::new(Distribution::point(0.0), Distribution::point(1.0));
        let e = simulate_fb(&i, 100, 3).unwrap();
        assert_eq!((e.mean, e.stderr, e.trials), (0.0, 0.0, 100));
    }

    #[test]
    fn sure_trade_mechanism_is_exactly_one() {
        let i = TradeInstance::new(Distribution::point(1.0), Distribution::point(0.0));
        let e = simulate_mechanism(&i, 10, 99).unwrap();
        assert_eq!((e.gft.mean, e.gft.stderr), (1.0, 0.0));
        assert_eq!(e.u_b.trials + e.u_s.trials, 10);
    }

    #[test]
    fn zero_trials_rejected() {
        let i = TradeInstance::new(Distribution::point(1.0), Distribution::point(0.0));
        assert!(simulate_fb(&i, 0, 1).is_err());
        assert!(simulate_mechanism(&i, 0, 1).is_err());
    }

    #[test]
    fn moments_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let whole = Moments::of(&xs);
        let split = Moments::of(&xs[..333]).merge(Moments::of(&xs[333..]));
        assert!((whole.mean - split.mean).abs() < 1e-12);
        assert!((whole.m2 - split.m2).abs() < 1e-9 * whole.m2);
    }

    #[test]
    fn trial_draws_are_consecutive_keystream_windows() {
        let trials = 2 * CHUNK + 3;
        let [a, b] = run_trials::<f64, _, 2, 2>(42, trials, |[x, y]| [Some(x), Some(y)]);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for _ in 0..trials {
            xs.push(uniform::<f64>(&mut rng));
            ys.push(uniform::<f64>(&mut rng));
        }
        assert!((a.mean - pairwise_sum(&xs) / trials as f64).abs() < 1e-15);
        assert!((b.mean - pairwise_sum(&ys) / trials as f64).abs() < 1e-15);
    }

    #[test]
    fn repeated_runs_are_bit_identical() {
        let u = Distribution::uniform(0.0, 1.0).unwrap();
        let i = TradeInstance::new(u.clone(), u);
        let a = simulate_mechanism(&i, 50_000, 5).unwrap();
        let b = simulate_mechanism(&i, 50_000, 5).unwrap();
        assert_eq!(a, b);
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = single.install(|| simulate_mechanism(&i, 50_000, 5).unwrap());
        assert_eq!(a, c);
    }
}
