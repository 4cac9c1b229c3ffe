mod common;

use common::*;
use crn_core::io::{self, Layout, Table};
use crn_core::parser;
use crn_core::scheme::Record;
use crn_core::{chemical_potential, free_energy, simulate, Reaction, ReactionNetwork, SolverOptions};
use proptest::prelude::*;

fn positive() -> impl Strategy<Value = f64> {
    (-3.0f64..3.0).prop_map(f64::exp)
}

fn state4() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(positive(), 4)
}

fn rates() -> impl Strategy<Value = ([f64; 2], [f64; 2])> {
    (positive(), positive(), positive(), positive()).prop_map(|(a, b, c, d)| ([a, b], [c, d]))
}

/// Random single-reaction-per-pair networks with full column rank: reaction
/// `l` converts species `l` into species `l + 1` with random coefficients.
fn chain() -> impl Strategy<Value = (ReactionNetwork, Vec<f64>)> {
    (1usize..4)
        .prop_flat_map(|m| {
            (
                prop::collection::vec((1u32..4, 1u32..4, positive(), positive()), m),
                prop::collection::vec(positive(), m + 1),
            )
        })
        .prop_map(|(params, c0)| {
            let n = params.len() + 1;
            let reactions = params
                .iter()
                .enumerate()
                .map(|(l, &(p, q, kp, km))| {
                    let mut alpha = vec![0; n];
                    let mut beta = vec![0; n];
                    alpha[l] = p;
                    beta[l + 1] = q;
                    Reaction::new(alpha, beta, kp, km)
                })
                .collect();
            (ReactionNetwork::new(names(n), reactions).unwrap(), c0)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conservation_identity(extents in prop::collection::vec(-0.3f64..0.3, 2), c0 in state4()) {
        let net = four_species([1.0; 2], [1.0; 2]);
        let c = net.concentrations(&c0, &extents);
        for (k, res) in net.conservation_basis().residuals(&c0, &c).iter().enumerate() {
            let scale = net.conservation_basis().norms()[k] * inf_norm(&c0).max(inf_norm(&c));
            prop_assert!(res.abs() <= 1e-14 * scale.max(1.0));
        }
    }

    #[test]
    fn free_energy_lower_bound(c in state4(), (kp, km) in rates()) {
        let net = four_species(kp, km);
        let eq = equilibrium(&net);
        let floor = -eq.c_inf().iter().sum::<f64>();
        prop_assert!(free_energy(&c, eq.c_inf()) >= floor - 1e-12 * floor.abs());
    }

    #[test]
    fn affinity_and_rate_ratio(c in state4(), (kp, km) in rates()) {
        let net = four_species(kp, km);
        let eq = equilibrium(&net);
        let aff = net.affinity(&c, &eq).unwrap();
        let rates = net.lma_rates(&c);
        for l in 0..2 {
            let log_ratio = (rates.forward[l] / rates.backward[l]).ln();
            prop_assert!((log_ratio + aff[l]).abs() <= 1e-9 * (1.0 + aff[l].abs()));
        }
    }

    #[test]
    fn affinity_vanishes_exactly_where_rates_do((kp, km) in rates(), scale in positive()) {
        let net = four_species(kp, km);
        let eq = equilibrium(&net);
        // Every point of the form c_inf * exp(gamma) with gamma in ker S^T
        // balances each reaction.
        let basis = net.conservation_basis();
        let shift: Vec<f64> = (0..4)
            .map(|i| scale.ln() * 0.1 * (basis.vectors[0][i] + basis.vectors[1][i]) as f64)
            .collect();
        let c: Vec<f64> = eq.c_inf().iter().zip(&shift).map(|(a, s)| a * s.exp()).collect();
        prop_assert!(inf_norm(&net.affinity(&c, &eq).unwrap()) < 1e-12);
        let r = net.lma_rates(&c);
        for l in 0..2 {
            prop_assert!(r.net[l].abs() <= 1e-10 * r.forward[l].max(r.backward[l]));
        }
    }

    #[test]
    fn chemical_potential_is_gradient_of_free_energy(c in state4(), (kp, km) in rates()) {
        let net = four_species(kp, km);
        let eq = equilibrium(&net);
        let mu = chemical_potential(&c, eq.c_inf()).unwrap();
        let g = fd_gradient(|x| free_energy(x, eq.c_inf()), &c, 1e-6);
        for (a, b) in mu.iter().zip(&g) {
            prop_assert!((a - b).abs() <= 1e-6 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn random_step_sizes_keep_positivity_and_decay(
        dt in (-4.0f64..2.5).prop_map(|e| 10f64.powf(e)),
        c0 in state4(),
        (kp, km) in rates(),
    ) {
        let net = four_species(kp, km);
        let eq = equilibrium(&net);
        let run = simulate(&net, &c0, &eq, dt, 20.0 * dt, &SolverOptions::default()).unwrap();
        for w in run.records.windows(2) {
            prop_assert!(w[1].c.iter().all(|&v| v > 0.0));
            let rise = free_energy(&w[1].c, eq.c_inf()) - free_energy(&w[0].c, eq.c_inf());
            prop_assert!(rise <= 1e-10, "energy rose by {rise:e}");
        }
    }

    #[test]
    fn random_networks_round_trip((net, c0) in chain()) {
        let text = parser::serialize(&net, Some(&c0)).unwrap();
        let (back, back_c0) = parser::load(&text, None).unwrap();
        prop_assert_eq!(&back, &net);
        prop_assert_eq!(back_c0.as_deref(), Some(c0.as_slice()));
    }

    #[test]
    fn random_networks_decay((net, c0) in chain(), dt in 0.01f64..5.0) {
        let eq = equilibrium(&net);
        let run = simulate(&net, &c0, &eq, dt, 10.0 * dt, &SolverOptions::default()).unwrap();
        let f: Vec<f64> = run.records.iter().map(|r| free_energy(&r.c, eq.c_inf())).collect();
        prop_assert!(f.windows(2).all(|w| w[1] - w[0] <= 1e-10 * (1.0 + w[0].abs())));
    }

    #[test]
    fn csv_round_trip(rows in prop::collection::vec(prop::collection::vec(any::<f64>(), 6), 1..5)) {
        let records: Vec<Record> = rows
            .iter()
            .map(|v| Record {
                t: v[0],
                c: v[1..3].to_vec(),
                extents: vec![v[3]],
                free_energy: v[4],
                conservation: vec![v[5]],
            })
            .collect();
        let table = Table {
            layout: Layout {
                species: vec!["A".into(), "B".into()],
                reaction_ids: vec!["R1".into()],
                n_conservation: 1,
            },
            records,
            truncated: false,
        };
        let back = io::read_csv(&io::write_csv(&table)).unwrap();
        let bits = |t: &Table| -> Vec<u64> {
            t.records
                .iter()
                .flat_map(|r| {
                    let mut v = vec![r.t];
                    v.extend(&r.c);
                    v.extend(&r.extents);
                    v.push(r.free_energy);
                    v.extend(&r.conservation);
                    v
                })
                .map(|x| if x.is_nan() { u64::MAX } else { x.to_bits() })
                .collect()
        };
        prop_assert_eq!(bits(&back), bits(&table));
    }
}
