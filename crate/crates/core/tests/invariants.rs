//! Curvature identities and chart operations on random smooth charts.

use proptest::prelude::*;
use statman_core::curvature::{identity_suite, lower04, ricci, riemann, DEFAULT_ALPHAS};
use statman_core::models::parse_expression;
use statman_core::structure::complete_cubic;
use statman_core::{sample_points, Chart, ConnectionKind, Point, ScalarField};

const TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
struct Coefficients {
    metric: [f64; 5],
    cubic: [[f64; 3]; 4],
}

fn coefficients() -> impl Strategy<Value = Coefficients> {
    (
        prop::array::uniform5(-1.0..1.0f64),
        prop::array::uniform4(prop::array::uniform3(-1.0..1.0f64)),
    )
        .prop_map(|(metric, cubic)| Coefficients { metric, cubic })
}

/// A two-dimensional chart whose metric stays positive definite on
/// `[-1, 1]²`: diagonal entries in `[1, 2]`, off-diagonal below `0.3`.
fn random_chart(c: &Coefficients) -> Chart {
    let coords = vec!["x1".to_string(), "x2".to_string()];
    let field = |s: String| ScalarField::expression(parse_expression(&s, &coords).unwrap());
    let m = c.metric;
    let g11 = format!("1.5 + 0.5*sin({}*x1 + {}*x2)", m[0], m[1]);
    let g22 = format!("1.5 + 0.5*cos({}*x1 - {}*x2)", m[2], m[3]);
    let g12 = format!("0.3*sin({}*x1*x2)", m[4]);
    let metric = vec![field(g11), field(g12.clone()), field(g12), field(g22)];
    let slots = [[0, 0, 0], [0, 0, 1], [0, 1, 1], [1, 1, 1]];
    let entries = slots
        .iter()
        .zip(c.cubic)
        .map(|(&idx, [a, b, d])| (idx, field(format!("{a} + {b}*x1*x2 + {d}*sin(x2 - x1)"))))
        .collect();
    Chart::new("random", coords, metric, complete_cubic(2, entries).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn identity_suite_holds(c in coefficients(), x1 in -1.0..1.0f64, x2 in -1.0..1.0f64) {
        let chart = random_chart(&c);
        let geo = chart.local(&Point::new(vec![x1, x2]).unwrap()).unwrap();
        for d in identity_suite(&geo, &DEFAULT_ALPHAS, TOL).unwrap() {
            if d.applicable {
                prop_assert!(d.defect <= TOL * d.tol_factor, "{}: {:e}", d.name, d.defect);
            }
        }
    }

    #[test]
    fn scaling_the_cubic_form_moves_along_the_alpha_family(
        c in coefficients(),
        alpha in -2.0..2.0f64,
        x1 in -1.0..1.0f64,
        x2 in -1.0..1.0f64,
    ) {
        let chart = random_chart(&c);
        let p = Point::new(vec![x1, x2]).unwrap();
        let direct = chart.local(&p).unwrap().connection(ConnectionKind::Alpha(alpha)).values();
        let scaled = chart.scaled(alpha).local(&p).unwrap().connection(ConnectionKind::Nabla).values();
        prop_assert!(direct.rel_defect(&scaled).unwrap() <= 1e-14);

        let twice = chart.dual().dual().local(&p).unwrap().connection(ConnectionKind::Nabla).values();
        let once = chart.local(&p).unwrap().connection(ConnectionKind::Nabla).values();
        prop_assert!(twice.rel_defect(&once).unwrap() == 0.0);
    }

    #[test]
    fn dual_curvatures_pair_through_the_metric(c in coefficients(), x1 in -1.0..1.0f64, x2 in -1.0..1.0f64) {
        // g(R(X,Y)Z, W) = −g(Z, R*(X,Y)W) with r04 laid out [x][y][z][w].
        let geo = random_chart(&c).local(&Point::new(vec![x1, x2]).unwrap()).unwrap();
        let g = &geo.metric.g;
        let r = lower04(&riemann(&geo.connection(ConnectionKind::Nabla)).values(), g);
        let r_star = lower04(&riemann(&geo.connection(ConnectionKind::NablaStar)).values(), g);
        prop_assert!(r.rel_defect(&r_star.swap_slots(2, 3).scale(-1.0)).unwrap() <= TOL);
    }

    #[test]
    fn ricci_of_the_levi_civita_connection_is_symmetric(
        c in coefficients(),
        x1 in -1.0..1.0f64,
        x2 in -1.0..1.0f64,
    ) {
        let geo = random_chart(&c).local(&Point::new(vec![x1, x2]).unwrap()).unwrap();
        let ric = ricci(&riemann(&geo.connection(ConnectionKind::LeviCivita)).values());
        prop_assert!(ric.symmetry_defect(&[0, 1]).unwrap() <= TOL);
    }

    #[test]
    fn samples_stay_in_the_box(count in 1usize..64, seed in any::<u64>()) {
        let domain = [(-2.0, 3.0), (0.5, 0.75), (10.0, 20.0)];
        let points = sample_points(&domain, count, seed).unwrap();
        prop_assert_eq!(points.len(), count);
        for p in &points {
            for (x, (lo, hi)) in p.coords().iter().zip(domain) {
                prop_assert!((lo..=hi).contains(x));
            }
        }
        prop_assert_eq!(points, sample_points(&domain, count, seed).unwrap());
    }
}
