use proptest::prelude::*;

use uniconv_core::calculus::{LipschitzMethod, Region};
use uniconv_core::certify::{admissible_radius, check_condition, regularity_radius};
use uniconv_core::geometry::modulus_lp_ball;
use uniconv_core::trs::minimize_on_ball;
use uniconv_core::{LipschitzBound, Matrix, RegularityBound, Vector};

fn reg(value: f64) -> RegularityBound {
    RegularityBound { value, x0: vec![0.0, 0.0], surjective: value.is_finite() }
}

fn lip(value: f64, r0: f64) -> LipschitzBound {
    LipschitzBound { value, region: Region::new(&Vector::zeros(2), r0), method: LipschitzMethod::ExactQuadratic }
}

proptest! {
    #[test]
    fn verdict_is_antitone_in_the_radius(k in 0.01f64..5.0, l in 0.01f64..5.0, r1 in 0.01f64..2.0, r2 in 0.01f64..2.0) {
        let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
        let at = |r: f64| check_condition(0.125 / r, &reg(k), &lip(l, 1.0)).unwrap().certified;
        prop_assert!(!at(hi) || at(lo));
    }

    #[test]
    fn admissible_radius_certifies(k in 0.01f64..5.0, l in 0.0f64..5.0, gamma in 0.01f64..1.0, frac in 0.01f64..0.99) {
        let r = frac * admissible_radius(gamma, &reg(k), &lip(l, 1.0)).unwrap();
        prop_assert!(check_condition(gamma / r, &reg(k), &lip(l, 1.0)).unwrap().certified);
    }

    #[test]
    fn condition_survives_on_the_regularity_ball(k in 0.01f64..5.0, l in 0.01f64..5.0, c in 0.01f64..2.0, r0 in 0.01f64..5.0) {
        match regularity_radius(c, &reg(k), &lip(l, r0)) {
            Some(rho) => {
                prop_assert!(rho > 0.0 && rho <= r0);
                // Perturbed regularity bound on ball(x0, ρ).
                let k_rho = k / (1.0 - k * l * rho);
                prop_assert!(k_rho > 0.0 && k_rho * l / 8.0 < c);
            }
            None => prop_assert!(k * l / 8.0 >= c * (1.0 - 1e-12)),
        }
    }

    #[test]
    fn lp_modulus_dominates_its_power2_constant(p in 1.05f64..6.0, eps in 0.001f64..2.0) {
        let m = modulus_lp_ball(p, eps).unwrap();
        prop_assert!(m.delta >= m.c * eps * eps * (1.0 - 1e-9) - 1e-15);
        prop_assert!(m.delta <= 1.0);
    }

    #[test]
    fn trs_beats_feasible_points(
        h in proptest::array::uniform3(-3.0f64..3.0),
        g in proptest::array::uniform2(-2.0f64..2.0),
        r in 0.05f64..2.0,
        probes in proptest::collection::vec((0.0f64..std::f64::consts::TAU, 0.0f64..1.0), 32),
    ) {
        let hm = Matrix::from_row_slice(2, 2, &[h[0], h[1], h[1], h[2]]);
        let gv = Vector::from_row_slice(&g);
        let sol = minimize_on_ball(&hm, &gv, 0.0, &Vector::zeros(2), r);
        prop_assert!(sol.x.norm() <= r * (1.0 + 1e-12));
        for (t, s) in probes {
            let x = Vector::from_vec(vec![t.cos(), t.sin()]) * (r * s.sqrt());
            let val = 0.5 * x.dot(&(&hm * &x)) + gv.dot(&x);
            prop_assert!(sol.value <= val + 1e-10 * (1.0 + val.abs()));
        }
    }
}
