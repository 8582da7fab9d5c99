use proptest::prelude::*;
use vulnprice::barrier::{knock_out_expm, price_barrier_legs, BarrierDirection, BarrierSpec};
use vulnprice::dirichlet::laplace_exact;
use vulnprice::fixtures::{table1_model_floored, BARRIER_LEVEL, BARRIER_STRIKE};
use vulnprice::reference::expm_price;
use vulnprice::series::{price_claim, PricerConfig, Steps};
use vulnprice::PayoffVector;

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 1..=5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laplace_is_symmetric(x in point(), shift in 0usize..5) {
        let mut y = x.clone();
        let len = y.len();
        y.rotate_left(shift % len);
        y.reverse();
        let (a, b) = (laplace_exact(&x), laplace_exact(&y));
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn laplace_decreases_in_each_coordinate(x in point(), i in 0usize..5, bump in 0.01f64..1.0) {
        let i = i % x.len();
        let mut y = x.clone();
        y[i] += bump;
        prop_assert!(laplace_exact(&y) < laplace_exact(&x));
    }

    #[test]
    fn series_is_linear_in_payoff(
        f in prop::collection::vec(0.0f64..2.0, 3),
        g in prop::collection::vec(0.0f64..2.0, 3),
        a in 0.0f64..3.0,
        t in 0.1f64..5.0,
    ) {
        let model = table1_model_floored();
        let cfg = PricerConfig::new(4, Steps::Width(0.25));
        let combo: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + y).collect();
        let pf = price_claim(t, &PayoffVector::new(f).unwrap(), &cfg, &model).unwrap().at_maturity();
        let pg = price_claim(t, &PayoffVector::new(g).unwrap(), &cfg, &model).unwrap().at_maturity();
        let pc = price_claim(t, &PayoffVector::new(combo).unwrap(), &cfg, &model).unwrap().at_maturity();
        for i in 0..3 {
            prop_assert!((pc[i] - (a * pf[i] + pg[i])).abs() < 1e-12);
        }
    }
}

#[test]
fn bond_prices_fall_with_maturity() {
    let model = table1_model_floored();
    let cfg = PricerConfig::new(5, Steps::Width(0.25));
    let ones = PayoffVector::ones(3);
    let mut prev = vec![1.0; 3];
    for t in [0.5, 1.0, 2.0, 5.0, 10.0] {
        let p = price_claim(t, &ones, &cfg, &model).unwrap().at_maturity();
        for i in 0..3 {
            assert!(p[i] > 0.0 && p[i] < prev[i], "T={t} regime {i}: {} after {}", p[i], prev[i]);
        }
        prev = p;
    }
}

#[test]
fn series_bond_matches_expm() {
    let model = table1_model_floored();
    let cfg = PricerConfig::new(6, Steps::Width(0.25));
    let ones = PayoffVector::ones(3);
    for t in [1.0, 4.0] {
        let s = price_claim(t, &ones, &cfg, &model).unwrap().at_maturity();
        let e = expm_price(t, &ones, &model).unwrap();
        for i in 0..3 {
            assert!((s[i] - e[i]).abs() < 1e-6, "T={t}: {} vs {}", s[i], e[i]);
        }
    }
}

#[test]
fn knock_in_plus_knock_out_is_plain() {
    let model = table1_model_floored();
    let cfg = PricerConfig::new(5, Steps::Width(0.25));
    let spec = BarrierSpec::vol_call(BARRIER_LEVEL, BarrierDirection::KnockOut, BARRIER_STRIKE, model.vols()).unwrap();
    let legs = price_barrier_legs(3.0, &spec, &cfg, &model).unwrap();
    let plain = legs.plain.at_maturity();
    let sum: Vec<f64> = legs.knock_in.at_maturity().iter().zip(legs.knock_out.at_maturity()).map(|(a, b)| a + b).collect();
    for i in 0..3 {
        assert!((sum[i] - plain[i]).abs() < 1e-15);
    }
    let exact = knock_out_expm(3.0, &spec, &model).unwrap();
    for (i, (a, b)) in legs.knock_out.at_maturity().iter().zip(&exact).enumerate() {
        assert!((a - b).abs() < 1e-5, "regime {i}: {a} vs {b}");
    }
}
