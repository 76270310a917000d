mod common;

use bitrade::geometry::{decompose_fixed_v, seller_scaling_utility};
use bitrade::mechanism::{equilibrium, first_best};
use bitrade::{distributions, mechanism, Distribution, TradeInstance};

use common::{atoms, corpus};

#[test]
fn equilibrium_matches_exhaustive_enumeration() {
    for (i, inst) in corpus(400).iter().enumerate() {
        let (b, s) = (atoms(&inst.buyer), atoms(&inst.seller));
        let want = common::equilibrium(&b, &s);
        let got = equilibrium(inst);
        let pairs = [
            ("u_B", got.u_b, want.u_b),
            ("u_S", got.u_s, want.u_s),
            ("gft_buyer_proposes", got.gft_buyer_proposes, want.gft_buyer_proposes),
            ("gft_seller_proposes", got.gft_seller_proposes, want.gft_seller_proposes),
            ("gft", got.gft, want.gft()),
            ("fb", got.fb, want.fb),
        ];
        for (name, g, w) in pairs {
            assert!((g - w).abs() <= 1e-12, "instance {i} {name}: {g} vs {w}");
        }
    }
}

#[test]
fn fixed_value_geometry_matches_atom_sums() {
    for (i, inst) in corpus(300).iter().enumerate() {
        let s = atoms(&inst.seller);
        let mut probes: Vec<f64> = atoms(&inst.buyer).iter().map(|a| a.0).collect();
        probes.extend([0.0, 0.37, 1.0, 1.5]);
        for lambda in [0.05, 0.25, 0.5, 0.75, 0.95] {
            for &v in &probes {
                let got = decompose_fixed_v(v, &inst.seller, lambda).unwrap();
                let want = common::decomposition(v, &s, lambda);
                let pairs = [
                    ("x_v", got.x_v, want.x_v),
                    ("b", got.b_lambda, want.b),
                    ("fb_v", got.fb_v, want.fb_v),
                    ("area_S", got.area_s, want.area_s),
                    ("area_B", got.area_b, want.area_b),
                    ("area_A", got.area_a, want.area_a),
                    ("u_S_geom", got.u_s_geom, want.u_s_geom),
                    ("u_B_dev", got.u_b_dev, want.u_b_dev),
                ];
                for (name, g, w) in pairs {
                    assert!(
                        (g - w).abs() <= 1e-12,
                        "instance {i} v={v} lambda={lambda} {name}: {g} vs {w}"
                    );
                }
                let g = seller_scaling_utility(v, &inst.seller, lambda).unwrap();
                let w = common::scaling_utility(v, &s, lambda);
                assert!((g - w).abs() <= 1e-12, "instance {i} v={v} scaling: {g} vs {w}");
            }
        }
    }
}

#[test]
fn uniform_pair_closed_forms() {
    // A uniform seller gives x(p) = p, so a buyer with value v offers v/2
    // and earns v^2/4; by symmetry the seller earns (1 - c)^2 / 4.
    let inst = common::uniform_pair();
    let eq = equilibrium(&inst);
    assert!((eq.u_b - 1.0 / 12.0).abs() <= 1e-12);
    assert!((eq.u_s - 1.0 / 12.0).abs() <= 1e-12);
    // Buyer-proposer surplus: integral over v of v * v/2 - (v/2)^2 / 2 = 3/8 * 1/3.
    assert!((eq.gft_buyer_proposes - 0.125).abs() <= 1e-12);
    assert!((eq.gft - 0.125).abs() <= 1e-12);
    assert!((eq.fb - 1.0 / 6.0).abs() <= 1e-12);
    assert!((eq.fb / eq.gft - 4.0 / 3.0).abs() <= 1e-12);
}

#[test]
fn point_uniform_closed_forms() {
    // Value 1 against a uniform seller: the buyer offers 1/2, surplus 3/8.
    // The seller with cost c asks 1 and always trades, surplus 1/2.
    let eq = equilibrium(&common::point_uniform());
    assert!((eq.fb - 0.5).abs() <= 1e-12);
    assert!((eq.u_b - 0.25).abs() <= 1e-12);
    assert!((eq.gft_buyer_proposes - 0.375).abs() <= 1e-12);
    assert!((eq.gft_seller_proposes - 0.5).abs() <= 1e-12);
    assert!((eq.gft - 7.0 / 16.0).abs() <= 1e-12);
    assert!((eq.fb / eq.gft - 8.0 / 7.0).abs() <= 1e-12);
}

#[test]
fn uniform_geometry_closed_forms() {
    // Uniform seller, value v: x = v, b = lambda v, S = (lambda v)^2 / 2,
    // B = (v^2 - (lambda v)^2) / 2, A = (1 - lambda)^2 v^2 / 2,
    // u_S_geom = lambda(1 - lambda) v^2 / 2.
    let u = Distribution::uniform(0.0, 1.0).unwrap();
    for v in [0.1, 0.5, 0.9, 1.0] {
        for lambda in [0.1, 0.31784, 0.5, 0.8] {
            let d = decompose_fixed_v(v, &u, lambda).unwrap();
            let lv = lambda * v;
            assert!((d.b_lambda - lv).abs() <= 1e-12);
            assert!((d.area_s - lv * lv / 2.0).abs() <= 1e-12);
            assert!((d.area_b - (v * v - lv * lv) / 2.0).abs() <= 1e-12);
            assert!((d.area_a - (1.0 - lambda).powi(2) * v * v / 2.0).abs() <= 1e-12);
            assert!((d.u_s_geom - lambda * (1.0 - lambda) * v * v / 2.0).abs() <= 1e-12);
            assert!((d.u_b_dev - (v - lv) * lv).abs() <= 1e-12);
            // The scaled-quantile strategy on a uniform seller: q <= lambda v
            // trades at q/lambda, so utility is the integral of q/lambda - q.
            // At v = 1 the types above lambda ask 1 and are accepted too.
            let mut want = common::midpoint(0.0, lv, 1000, |q| q / lambda - q);
            if v >= 1.0 {
                want += (1.0 - lambda).powi(2) / 2.0;
            }
            let got = seller_scaling_utility(v, &u, lambda).unwrap();
            assert!((got - want).abs() <= 1e-9, "v={v} lambda={lambda}");
        }
    }
}

#[test]
fn pwl_first_best_matches_quadrature() {
    let buyer = Distribution::pwl([(0.0, 0.2), (0.4, 0.5), (0.4, 0.7), (1.0, 1.2)]);
    assert!(buyer.is_err(), "repeated q must be rejected");
    let buyer = Distribution::pwl([(0.0, 0.2), (0.4, 0.5), (0.7, 0.5), (1.0, 1.2)]).unwrap();
    let seller = Distribution::pwl([(0.0, 0.0), (0.5, 0.3), (1.0, 0.9)]).unwrap();
    let inst = TradeInstance::new(buyer.clone(), seller.clone());
    let n = 4000;
    let want = common::midpoint(0.0, 1.0, n, |qb| {
        let v = buyer.quantile(qb).unwrap();
        common::midpoint(0.0, 1.0, n, |qs| (v - seller.quantile(qs).unwrap()).max(0.0))
    });
    assert!((first_best(&inst) - want).abs() <= 1e-6, "{} vs {want}", first_best(&inst));
}

#[test]
fn pwl_buyer_response_beats_dense_grid() {
    let seller = Distribution::pwl([(0.0, 0.0), (0.2, 0.1), (0.5, 0.1), (0.8, 0.6), (1.0, 1.0)]).unwrap();
    for v in [0.05, 0.1, 0.3, 0.55, 0.8, 1.0, 1.3] {
        let br = mechanism::buyer_best_response(v, &seller);
        let grid_best = (0..=20_000)
            .map(|i| {
                let p = 1.3 * i as f64 / 20_000.0;
                (v - p) * seller.cdf(p)
            })
            .fold(0.0, f64::max);
        assert!(br.utility >= grid_best - 1e-12, "v={v}");
        assert!(br.utility <= grid_best + 1e-4, "v={v}");
    }
}

#[test]
fn single_precision_pipeline() {
    let u = distributions::Distribution::<f32>::uniform(0.0, 1.0).unwrap();
    let inst = mechanism::TradeInstance::new(u.clone(), u);
    let eq = equilibrium(&inst);
    assert!((eq.gft - 0.125).abs() <= 1e-5);
    assert!((eq.fb - 1.0 / 6.0).abs() <= 1e-5);
    let report = bitrade::geometry::verify_bounds(&inst, 0.5f32).unwrap();
    assert!(report.slacks.seller_bound >= 0.0);
}
