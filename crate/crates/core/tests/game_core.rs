mod common;

use nalgebra::DVector;
use nlqre::payoff::Transpose;
use nlqre::treeplex::{behavioral_to_sequence, constraint_residual, sequence_to_behavioral, validate_treeplex, TreeplexDef};
use nlqre::zoo::{random_game, random_treeplex};
use nlqre::{Game, SparsePayoff, Treeplex};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_behavioral(t: &Treeplex, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    t.infosets()
        .iter()
        .map(|info| {
            let w: Vec<f64> = info.actions.iter().map(|_| rng.random_range(0.05..1.0)).collect();
            let s: f64 = w.iter().sum();
            w.iter().map(|x| x / s).collect()
        })
        .collect()
}

#[test]
fn uniform_behavioral_on_four_actions() {
    let t = common::simplex(4);
    let u = behavioral_to_sequence(&t, &[vec![0.25; 4]]).unwrap();
    assert_eq!(&u[..], &[1.0, 0.25, 0.25, 0.25, 0.25]);
    let b = sequence_to_behavioral(&t, &u, 1e-12).unwrap();
    assert_eq!(b, vec![vec![0.25; 4]]);
}

#[test]
fn two_level_chain_quarters() {
    let t = Treeplex::new(TreeplexDef {
        num_sequences: 5,
        infosets: vec![
            nlqre::treeplex::InfosetDef {
                parent: 0,
                actions: vec![1, 2],
            },
            nlqre::treeplex::InfosetDef {
                parent: 1,
                actions: vec![3, 4],
            },
        ],
    })
    .unwrap();
    let u = behavioral_to_sequence(&t, &[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
    assert_eq!(u[3], 0.25);
    assert_eq!(u[4], 0.25);
    let det = behavioral_to_sequence(&t, &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    assert_eq!(&det[..], &[1.0, 1.0, 0.0, 0.0, 1.0]);
}

#[test]
fn sparse_product_matches_dense() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = random_game(&mut rng, 10, 0.4, 5.0);
    let dense = common::dense_payoff(&g);
    let v: Vec<f64> = (0..g.payoff().cols()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let u: Vec<f64> = (0..g.payoff().rows()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let pv = g.payoff().apply(&v, Transpose::No).unwrap();
    let ptu = g.payoff().apply(&u, Transpose::Yes).unwrap();
    let dv = &dense * DVector::from_vec(v);
    let du = dense.transpose() * DVector::from_vec(u);
    for (a, b) in pv.iter().zip(dv.iter()) {
        assert!((a - b).abs() < 1e-12);
    }
    for (a, b) in ptu.iter().zip(du.iter()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn duplicate_payoff_coordinates_are_rejected() {
    assert!(SparsePayoff::new(2, 2, vec![(1, 1, 1.0), (1, 1, 2.0)]).is_err());
}

#[test]
fn game_json_has_the_documented_fields() {
    let g = common::rps();
    let json: serde_json::Value = serde_json::from_str(&g.to_json().unwrap()).unwrap();
    for key in ["treeplex_u", "treeplex_v", "payoffs"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
    assert_eq!(Game::from_json(&g.to_json().unwrap()).unwrap(), g);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn behavioral_plans_are_feasible(seed in any::<u64>(), size in 2usize..80) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_treeplex(&mut rng, size);
        let b = random_behavioral(&t, &mut rng);
        let u = behavioral_to_sequence(&t, &b).unwrap();
        prop_assert!(constraint_residual(&t, &u).unwrap() <= 1e-12);
    }

    #[test]
    fn behavioral_round_trip(seed in any::<u64>(), size in 2usize..80) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_treeplex(&mut rng, size);
        let b = random_behavioral(&t, &mut rng);
        let u = behavioral_to_sequence(&t, &b).unwrap();
        let back = sequence_to_behavioral(&t, &u, 1e-12).unwrap();
        for (x, y) in back.iter().flatten().zip(b.iter().flatten()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn indexing_is_topological(seed in any::<u64>(), size in 2usize..80) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_treeplex(&mut rng, size);
        for info in t.infosets() {
            for &a in &info.actions {
                prop_assert!(info.parent < a);
            }
        }
        let def = TreeplexDef { num_sequences: t.num_sequences(), infosets: t.infosets().to_vec() };
        prop_assert!(validate_treeplex(&def).is_valid());
    }

    #[test]
    fn perturbation_shows_in_residual(seed in any::<u64>(), delta in 1e-6f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_treeplex(&mut rng, 30);
        let mut u = t.uniform_plan();
        let a = rng.random_range(1..t.num_sequences());
        u[a] += delta;
        prop_assert!(constraint_residual(&t, &u).unwrap() >= delta * (1.0 - 1e-12));
    }
}
