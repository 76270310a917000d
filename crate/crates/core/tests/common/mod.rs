//! Shared corpus and brute-force oracles. The oracles work from raw atom
//! lists by direct enumeration and never call the library's integration or
//! best-response code.
#![allow(dead_code)]

use bitrade::search::random_instance;
use bitrade::{Distribution, SearchConfig, TradeInstance};

pub const CORPUS_SEED: u64 = 20_240_917;
pub const CORPUS_SIZE: usize = 1000;

/// Seeded discrete-by-discrete instances with 1 to 8 atoms per side and
/// values in `[0, 1]`. Every fourth instance snaps values to multiples of
/// 1/8 so that buyer and seller atoms coincide and ties are exercised.
pub fn corpus(n: usize) -> Vec<TradeInstance> {
    (0..n)
        .map(|i| {
            let atoms = 1 + i % 8;
            let cfg = SearchConfig::new(atoms, 1, 1, CORPUS_SEED);
            let inst = random_instance(&cfg, i as u64).expect("valid corpus config");
            if i % 4 == 3 {
                TradeInstance::new(snap(&inst.buyer), snap(&inst.seller))
            } else {
                inst
            }
        })
        .collect()
}

fn snap(d: &Distribution) -> Distribution {
    let atoms = atoms(d).into_iter().map(|(v, p)| ((v * 8.0).round() / 8.0, p));
    Distribution::discrete(atoms).expect("snapped atoms are valid")
}

pub fn uniform_pair() -> TradeInstance {
    let u = Distribution::uniform(0.0, 1.0).unwrap();
    TradeInstance::new(u.clone(), u)
}

pub fn point_uniform() -> TradeInstance {
    TradeInstance::new(Distribution::point(1.0), Distribution::uniform(0.0, 1.0).unwrap())
}

pub fn lambda_grid() -> Vec<f64> {
    (1..=19).map(|k| k as f64 * 0.05).collect()
}

/// `(value, prob)` pairs of a discrete distribution.
pub fn atoms(d: &Distribution) -> Vec<(f64, f64)> {
    let d = d.as_discrete().expect("discrete distribution");
    d.values().iter().copied().zip(d.probs().iter().copied()).collect()
}

/// Running sums of the atom probabilities.
fn cumulative(atoms: &[(f64, f64)]) -> Vec<f64> {
    atoms
        .iter()
        .scan(0.0, |acc, &(_, p)| {
            *acc += p;
            Some(*acc)
        })
        .collect()
}

/// `Pr[c <= p]` by summation.
pub fn cdf(atoms: &[(f64, f64)], p: f64) -> f64 {
    atoms.iter().filter(|&&(c, _)| c <= p).map(|&(_, w)| w).sum()
}

/// Smallest atom whose running probability reaches `q`.
pub fn quantile(atoms: &[(f64, f64)], q: f64) -> f64 {
    let cum = cumulative(atoms);
    for (k, &(c, _)) in atoms.iter().enumerate() {
        if cum[k] >= q {
            return c;
        }
    }
    atoms.last().unwrap().0
}

pub fn first_best(buyer: &[(f64, f64)], seller: &[(f64, f64)]) -> f64 {
    let mut total = 0.0;
    for &(v, pv) in buyer {
        for &(c, pc) in seller {
            total += pv * pc * (v - c).max(0.0);
        }
    }
    total
}

/// One proposer type's best offer found by trying every opponent atom as
/// the price, plus the no-trade offer. Returns `(utility, gft)`.
fn best_offer(
    candidates: impl Iterator<Item = f64>,
    utility_of: impl Fn(f64) -> (f64, f64),
    gft_of: impl Fn(f64) -> f64,
    prefer_low_price: bool,
) -> (f64, f64) {
    // (utility, acceptance, price)
    let mut best: Option<(f64, f64, f64)> = None;
    for p in candidates {
        let (u, x) = utility_of(p);
        if u < 0.0 {
            continue;
        }
        let better = match best {
            None => true,
            Some((bu, bx, bp)) => {
                let tie = (u - bu).abs() <= 1e-14;
                (!tie && u > bu)
                    || (tie && (x > bx + 1e-14 || ((x - bx).abs() <= 1e-14 && (p < bp) == prefer_low_price)))
            }
        };
        if better {
            best = Some((u, x, p));
        }
    }
    match best {
        Some((u, x, p)) if x > 0.0 => (u, gft_of(p)),
        _ => (0.0, 0.0),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OracleEquilibrium {
    pub u_b: f64,
    pub u_s: f64,
    pub gft_buyer_proposes: f64,
    pub gft_seller_proposes: f64,
    pub fb: f64,
}

impl OracleEquilibrium {
    pub fn gft(&self) -> f64 {
        0.5 * (self.gft_buyer_proposes + self.gft_seller_proposes)
    }
}

/// Exhaustive equilibrium of a discrete-by-discrete instance.
pub fn equilibrium(buyer: &[(f64, f64)], seller: &[(f64, f64)]) -> OracleEquilibrium {
    let (mut u_b, mut g_b) = (0.0, 0.0);
    for &(v, pv) in buyer {
        let (u, g) = best_offer(
            seller.iter().map(|a| a.0),
            |p| {
                let x = cdf(seller, p);
                ((v - p) * x, x)
            },
            |p| seller.iter().filter(|a| a.0 <= p).map(|&(c, w)| w * (v - c)).sum(),
            true,
        );
        u_b += pv * u;
        g_b += pv * g;
    }
    let (mut u_s, mut g_s) = (0.0, 0.0);
    for &(c, pc) in seller {
        let accept = |p: f64| -> f64 { buyer.iter().filter(|a| a.0 >= p).map(|a| a.1).sum() };
        let (u, g) = best_offer(
            buyer.iter().map(|a| a.0),
            |p| {
                let x = accept(p);
                ((p - c) * x, x)
            },
            |p| buyer.iter().filter(|a| a.0 >= p).map(|&(v, w)| w * (v - c)).sum(),
            false,
        );
        u_s += pc * u;
        g_s += pc * g;
    }
    OracleEquilibrium {
        u_b,
        u_s,
        gft_buyer_proposes: g_b,
        gft_seller_proposes: g_s,
        fb: first_best(buyer, seller),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OracleDecomposition {
    pub x_v: f64,
    pub b: f64,
    pub fb_v: f64,
    pub area_s: f64,
    pub area_b: f64,
    pub area_a: f64,
    pub u_s_geom: f64,
    pub u_b_dev: f64,
}

/// Integral over `[lo, hi]` of a function that is constant between the
/// given breakpoints, evaluated at the midpoint of each piece.
fn piecewise_constant_integral(mut cuts: Vec<f64>, lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    cuts.retain(|&q| q > lo && q < hi);
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    cuts.windows(2)
        .map(|w| (w[1] - w[0]) * f(0.5 * (w[0] + w[1])))
        .sum()
}

/// Fixed-value geometry by summation over seller atoms.
pub fn decomposition(v: f64, seller: &[(f64, f64)], lambda: f64) -> OracleDecomposition {
    let x = cdf(seller, v);
    if x == 0.0 {
        return OracleDecomposition {
            x_v: 0.0,
            b: v,
            fb_v: 0.0,
            area_s: 0.0,
            area_b: 0.0,
            area_a: 0.0,
            u_s_geom: 0.0,
            u_b_dev: 0.0,
        };
    }
    let b = quantile(seller, lambda * x);
    let hinge = |t: f64| -> f64 { seller.iter().map(|&(c, w)| w * (t - c).max(0.0)).sum() };
    let cum = cumulative(seller);
    let mut cuts = cum.clone();
    cuts.extend(cum.iter().map(|q| lambda * q));
    let area_a = piecewise_constant_integral(cuts.clone(), lambda * x, x, |q| v - quantile(seller, q));
    let u_s_geom = piecewise_constant_integral(cuts, 0.0, lambda * x, |q| {
        quantile(seller, q / lambda) - quantile(seller, q)
    });
    OracleDecomposition {
        x_v: x,
        b,
        fb_v: hinge(v),
        area_s: hinge(b),
        area_b: hinge(v) - hinge(b),
        area_a,
        u_s_geom,
        u_b_dev: (v - b) * cdf(seller, b),
    }
}

/// Utility of the scaled-quantile seller strategy against a buyer of value
/// `v`, integrated piece by piece over the seller quantile.
pub fn scaling_utility(v: f64, seller: &[(f64, f64)], lambda: f64) -> f64 {
    let cum = cumulative(seller);
    let mut cuts = cum.clone();
    cuts.extend(cum.iter().map(|q| lambda * q));
    piecewise_constant_integral(cuts, 0.0, 1.0, |q| {
        let offer = quantile(seller, (q / lambda).min(1.0));
        if offer <= v {
            offer - quantile(seller, q)
        } else {
            0.0
        }
    })
}

/// Midpoint rule with `n` cells, for smooth checks on continuous priors.
pub fn midpoint(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / n as f64;
    (0..n).map(|i| f(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
}
