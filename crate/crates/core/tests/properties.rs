use proptest::prelude::*;

use snc_core::bounds::{xi_constant, Analyzer};
use snc_core::genfunc::RationalGf;
use snc_core::matrix::Matrix;
use snc_core::mmp::{
    characterize_arrival, characterize_service, exp_transition_matrix, perron, EmissionDist, Mmp,
};
use snc_core::network::{theta_stars, FlowSpec, ServiceModel, TandemNetwork};

fn emission() -> impl Strategy<Value = EmissionDist> {
    prop_oneof![
        (0.0f64..3.0).prop_map(|value| EmissionDist::Constant { value }),
        (0.5f64..4.0, 0.05f64..0.95)
            .prop_map(|(value, prob)| EmissionDist::ScaledBernoulli { value, prob }),
        (0.1f64..2.5).prop_map(|mean| EmissionDist::Poisson { mean }),
    ]
}

fn mmp(max_states: usize) -> impl Strategy<Value = Mmp> {
    (1..=max_states).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::collection::vec(0.05f64..1.0, n), n),
            prop::collection::vec(emission(), n),
        )
            .prop_map(|(rows, em)| {
                let rows: Vec<Vec<f64>> = rows
                    .into_iter()
                    .map(|r| {
                        let s: f64 = r.iter().sum();
                        r.into_iter().map(|x| x / s).collect()
                    })
                    .collect();
                Mmp::from_rows(&rows, em).unwrap()
            })
    })
}

/// `sum over k_1 + ... + k_n = k of prod a_i^{k_i}`, by enumeration.
fn compositions(rates: &[f64], k: u32) -> f64 {
    match rates {
        [] => (k == 0) as u8 as f64,
        [a] => a.powi(k as i32),
        [a, rest @ ..] => (0..=k)
            .map(|j| a.powi(j as i32) * compositions(rest, k - j))
            .sum(),
    }
}

fn log_mean_mgf(m: &Mmp, theta: f64, t: usize) -> f64 {
    // E_pi[e^{theta A(0,t)}] = pi (P Phi)^t 1 with Phi = diag(phi_j(theta))
    let n = m.n_states();
    let phi: Vec<f64> = m.emissions().iter().map(|e| e.mgf(theta)).collect();
    let mut v = m.stationary().to_vec();
    let mut log_scale = 0.0;
    for _ in 0..t {
        let mut w = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                w[j] += v[i] * m.transition()[(i, j)] * phi[j];
            }
        }
        let s: f64 = w.iter().sum();
        log_scale += s.ln();
        v = w.into_iter().map(|x| x / s).collect();
    }
    log_scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn coefficients_match_composition_sums(
        rates in prop::collection::vec(0.01f64..1.5, 0..5),
        log_pref in -3.0f64..3.0,
    ) {
        let g = RationalGf::new(log_pref, rates.clone());
        for k in 0..12u32 {
            let want = log_pref.exp() * compositions(&rates, k);
            let got = g.coeff(k as u64);
            prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1e-300), "k={} {} vs {}", k, got, want);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn partial_sums_increase_to_eval(
        rates in prop::collection::vec(0.05f64..0.9, 1..4),
        frac in 0.05f64..0.8,
    ) {
        let g = RationalGf::new(0.0, rates);
        let z = frac * g.radius();
        let total = g.eval(z).unwrap();
        let mut partial = 0.0;
        for (k, c) in g.coeffs(4000).into_iter().enumerate() {
            if c == 0.0 {
                break;
            }
            let next = partial + (c.ln() + k as f64 * z.ln()).exp();
            prop_assert!(next >= partial);
            partial = next;
        }
        prop_assert!(partial <= total * (1.0 + 1e-12));
        prop_assert!((partial - total).abs() <= 1e-9 * total);
    }

    #[test]
    fn arrival_rate_is_monotone_and_above_mean(m in mmp(4), t1 in 0.01f64..2.0, dt in 0.01f64..2.0) {
        let a = characterize_arrival(&m, t1).unwrap();
        let b = characterize_arrival(&m, t1 + dt).unwrap();
        let mean = m.mean_rate();
        prop_assert!(a.rho >= mean - 1e-9 * mean.max(1.0));
        prop_assert!(b.rho >= a.rho - 1e-9 * a.rho.abs().max(1.0));
        prop_assert!(a.sigma >= 0.0);
    }

    #[test]
    fn two_state_perron_matches_quadratic_root(
        p in 0.02f64..0.98, q in 0.02f64..0.98,
        e0 in emission(), e1 in emission(),
        theta in 0.01f64..1.5,
    ) {
        let m = Mmp::from_rows(&[vec![1.0 - p, p], vec![q, 1.0 - q]], vec![e0, e1]).unwrap();
        let (f0, f1) = (e0.mgf(theta), e1.mgf(theta));
        // two-state chains are reversible, so psi = P diag(phi)
        let (a, b, c, d) = ((1.0 - p) * f0, p * f1, q * f0, (1.0 - q) * f1);
        let tr = a + d;
        let det = a * d - b * c;
        let lambda = tr / 2.0 + (tr * tr / 4.0 - det).sqrt();
        let ch = characterize_arrival(&m, theta).unwrap();
        prop_assert!((ch.log_lambda - lambda.ln()).abs() <= 1e-10 * lambda.ln().abs().max(1.0));
        let pair = perron(&exp_transition_matrix(&m, theta), m.stationary()).unwrap();
        prop_assert!(pair.residual <= 1e-11);
        let dot: f64 = pair.nu.iter().zip(m.stationary()).map(|(x, y)| x * y).sum();
        prop_assert!((dot - 1.0).abs() <= 1e-12);
    }

    /// `E[e^{theta A(0,t)}] <= e^{theta(rho t + sigma)}`, exact expectation.
    #[test]
    fn arrival_envelope_bounds_exact_mgf(m in mmp(3), theta in 0.02f64..1.2) {
        let c = characterize_arrival(&m, theta).unwrap();
        for t in [1usize, 2, 5, 20, 60] {
            let lhs = log_mean_mgf(&m, theta, t);
            let rhs = theta * (c.rho * t as f64 + c.sigma);
            prop_assert!(lhs <= rhs + 1e-9 * rhs.abs().max(1.0), "t={} {} > {}", t, lhs, rhs);
        }
    }

    /// `E[e^{-theta S(0,t)}] <= e^{-theta(rho t - sigma)}`, exact expectation.
    #[test]
    fn service_envelope_bounds_exact_mgf(m in mmp(3), theta in 0.02f64..1.2) {
        let c = characterize_service(&ServiceModel::Markov { mmp: m.clone() }, theta).unwrap();
        for t in [1usize, 2, 5, 20, 60] {
            let lhs = log_mean_mgf(&m, -theta, t);
            let rhs = -theta * (c.rho * t as f64 - c.sigma);
            prop_assert!(lhs <= rhs + 1e-9 * rhs.abs().max(1.0), "t={} {} > {}", t, lhs, rhs);
        }
    }
}

fn bernoulli_server(value: f64, prob: f64) -> ServiceModel {
    ServiceModel::Markov {
        mmp: Mmp::iid(EmissionDist::ScaledBernoulli { value, prob }).unwrap(),
    }
}

fn two_server_net(
    src: Mmp,
    c1: f64,
    p2: f64,
    cross: Option<(Mmp, usize, usize)>,
) -> Option<TandemNetwork> {
    let mut flows = vec![FlowSpec {
        id: 1,
        first: 1,
        last: 2,
        arrival: src,
    }];
    if let Some((m, f, l)) = cross {
        flows.push(FlowSpec {
            id: 2,
            first: f,
            last: l,
            arrival: m,
        });
    }
    TandemNetwork::new(
        vec![
            ServiceModel::ConstantRate { rate: c1 },
            bernoulli_server(8.0, p2),
        ],
        flows,
    )
    .ok()
}

fn small_source() -> impl Strategy<Value = Mmp> {
    (0.1f64..0.9, 0.1f64..0.9, 0.2f64..1.5)
        .prop_map(|(p, q, mean)| Mmp::on_off(p, q, EmissionDist::Poisson { mean }).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn adding_cross_traffic_lowers_theta_star(
        src in small_source(), cross in small_source(), first in 1usize..=2, span in 0usize..=1,
    ) {
        let last = (first + span).min(2);
        let base = two_server_net(src.clone(), 5.0, 0.7, None).unwrap();
        let Some(with) = two_server_net(src, 5.0, 0.7, Some((cross, first, last))) else {
            return Ok(());
        };
        let (Ok(a), Ok(b)) = (theta_stars(&base), theta_stars(&with)) else {
            return Ok(());
        };
        for j in 0..2 {
            prop_assert!(b[j].value() <= a[j].value() * (1.0 + 1e-9), "server {}: {:?} > {:?}", j + 1, b[j], a[j]);
        }
    }

    #[test]
    fn xi_below_sigma_envelope(
        src in small_source(), cross in small_source(), frac in 0.05f64..1.0, h in 1usize..=2,
    ) {
        let Some(net) = two_server_net(src, 6.0, 0.6, Some((cross, 1, 2))) else {
            return Ok(());
        };
        let Ok(an) = Analyzer::new(net) else { return Ok(()) };
        let hi = an.martingale_domain(h).upper();
        prop_assume!(hi.is_finite());
        let th = frac * hi;
        let xi = xi_constant(&an, h, th).unwrap();
        let mut env = an.service(h, th).unwrap().sigma;
        for i in an.network().flow_indices_at(h) {
            env += an.arrival(i, th).unwrap().sigma;
        }
        prop_assert!(xi.log_value <= th * env + 1e-12, "{} > {}", xi.log_value, th * env);
    }
}

#[test]
fn xi_is_one_for_iid_processes() {
    let arrival = |mean| Mmp::iid(EmissionDist::Poisson { mean }).unwrap();
    let net = TandemNetwork::new(
        vec![
            ServiceModel::ConstantRate { rate: 4.0 },
            bernoulli_server(6.0, 0.6),
        ],
        vec![
            FlowSpec {
                id: 1,
                first: 1,
                last: 2,
                arrival: arrival(1.0),
            },
            FlowSpec {
                id: 2,
                first: 2,
                last: 2,
                arrival: arrival(0.8),
            },
        ],
    )
    .unwrap();
    let an = Analyzer::new(net).unwrap();
    for h in [1, 2] {
        let hi = an.martingale_domain(h).upper();
        for f in [0.1, 0.5, 0.99] {
            let xi = xi_constant(&an, h, f * hi).unwrap();
            assert!(xi.log_value.abs() <= 1e-12, "h={h}: {}", xi.log_value);
        }
    }
}

#[test]
fn identity_matrix_has_unit_perron_root() {
    let m = Matrix::identity(3);
    let pair = perron(&m, &[0.2, 0.3, 0.5]).unwrap();
    assert!((pair.lambda - 1.0).abs() < 1e-14);
}
