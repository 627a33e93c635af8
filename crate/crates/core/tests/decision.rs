use proptest::prelude::*;
use ued_core::decision::*;

fn game_strategy(max_n: usize, max_m: usize) -> impl Strategy<Value = GameMatrix> {
    (1..=max_n, 1..=max_m)
        .prop_flat_map(|(n, m)| prop::collection::vec(prop::collection::vec(-10i32..=10, m), n))
        .prop_map(|rows| {
            GameMatrix::new(
                rows.into_iter()
                    .map(|r| r.into_iter().map(f64::from).collect())
                    .collect(),
            )
            .unwrap()
        })
}

fn brute_regret(g: &GameMatrix, i: usize, j: usize) -> f64 {
    let mut best = g.get(0, j);
    for k in 1..g.n_policies() {
        if g.get(k, j) > best {
            best = g.get(k, j);
        }
    }
    best - g.get(i, j)
}

fn brute_minimax_regret(g: &GameMatrix) -> Vec<usize> {
    let worst: Vec<f64> = (0..g.n_policies())
        .map(|i| {
            let mut w = f64::NEG_INFINITY;
            for j in 0..g.n_params() {
                w = w.max(brute_regret(g, i, j));
            }
            w
        })
        .collect();
    let best = worst.iter().copied().fold(f64::INFINITY, f64::min);
    (0..worst.len()).filter(|&i| worst[i] == best).collect()
}

fn map(g: &GameMatrix, f: impl Fn(usize, usize, f64) -> f64) -> GameMatrix {
    GameMatrix::new(
        (0..g.n_policies())
            .map(|i| (0..g.n_params()).map(|j| f(i, j, g.get(i, j))).collect())
            .collect(),
    )
    .unwrap()
}

proptest! {
    #[test]
    fn regret_matrix_matches_brute_force(g in game_strategy(6, 6)) {
        let r = regret_matrix(&g);
        for i in 0..g.n_policies() {
            for j in 0..g.n_params() {
                prop_assert_eq!(r[i][j], brute_regret(&g, i, j));
                prop_assert!(r[i][j] >= 0.0);
            }
        }
        prop_assert_eq!(minimax_regret(&g), brute_minimax_regret(&g));
    }

    #[test]
    fn rules_ignore_affine_rescaling(g in game_strategy(5, 5), shift in -50i32..50, scale in 1u32..6) {
        let h = map(&g, |_, _, v| v * f64::from(scale) + f64::from(shift));
        prop_assert_eq!(maximin(&h), maximin(&g));
        prop_assert_eq!(insufficient_reason(&h), insufficient_reason(&g));
        prop_assert_eq!(minimax_regret(&h), minimax_regret(&g));
    }

    #[test]
    fn minimax_regret_ignores_column_shifts(g in game_strategy(5, 5), shifts in prop::collection::vec(-20i32..20, 5)) {
        let h = map(&g, |_, j, v| v + f64::from(shifts[j]));
        prop_assert_eq!(regret_matrix(&h), regret_matrix(&g));
        prop_assert_eq!(minimax_regret(&h), minimax_regret(&g));
    }

    #[test]
    fn row_permutation_permutes_choices(g in game_strategy(5, 4), rot in 0usize..5) {
        let n = g.n_policies();
        let k = rot % n;
        let h = map(&g, |i, j, _| g.get((i + k) % n, j));
        let back = |s: Vec<usize>| {
            let mut v: Vec<usize> = s.into_iter().map(|i| (i + k) % n).collect();
            v.sort_unstable();
            v
        };
        prop_assert_eq!(back(minimax_regret(&h)), minimax_regret(&g));
        prop_assert_eq!(back(maximin(&h)), maximin(&g));
    }

    #[test]
    fn minimax_regret_never_totally_dominated(g in game_strategy(5, 5)) {
        let mr = minimax_regret(&g);
        prop_assert!(!mr.is_empty());
        for &a in &mr {
            for b in 0..g.n_policies() {
                prop_assert!(!totally_dominates(&g, b, a));
            }
        }
    }

    #[test]
    fn lambda_mr_is_distribution_with_mr_best_responses(g in game_strategy(5, 5)) {
        let lam = construct_lambda_mr(&g);
        for (i, c) in lam.iter().enumerate() {
            prop_assert!(c.distribution.iter().all(|p| *p >= 0.0 && *p <= 1.0 + 1e-12));
            prop_assert!((c.distribution.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&c.mix));
            if c.v_pi != 0.0 {
                let ratio = c.c_pi / c.v_pi;
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&ratio));
            }
            let regrets = regret_matrix(&g);
            let top = regrets[i].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(regrets[i][c.theta_bar], top);
        }
        let v = policy_conditioned_values(&g, &lam);
        prop_assert_eq!(best_responses(&v), minimax_regret(&g));
    }

    #[test]
    fn symmetric_paired_equilibria_favor_protagonist(g in game_strategy(4, 4)) {
        let report = nash_dominance_check(&PairedGame::symmetric(g));
        prop_assert!(report.passed());
    }
}

#[test]
fn paired_payoffs() {
    let g = GameMatrix::new(vec![vec![1.0, 5.0], vec![4.0, 2.0]]).unwrap();
    let game = PairedGame::symmetric(g);
    assert_eq!(game.payoffs(0, 1, 0), [1.0, 3.0, 3.0]);
    assert_eq!(game.payoffs(1, 0, 1), [2.0, 3.0, 3.0]);
    assert_eq!(game.payoffs(1, 1, 1), [2.0, 0.0, 0.0]);
}

#[test]
fn equilibrium_enumeration_by_hand() {
    // protagonist and antagonist share rows; column 1 is where row 0 is strictly better
    let g = GameMatrix::new(vec![vec![3.0, 3.0], vec![0.0, 1.0]]).unwrap();
    let report = nash_dominance_check(&PairedGame::symmetric(g));
    assert!(report.passed());
    for e in &report.equilibria {
        assert_eq!(e.protagonist, 0);
    }
    assert!(!report.vacuous());
}

#[test]
fn asymmetric_policy_sets_can_violate() {
    // an antagonist with a strictly better policy than anything the protagonist has
    let p = GameMatrix::new(vec![vec![0.0, 0.0]]).unwrap();
    let a = GameMatrix::new(vec![vec![1.0, 1.0]]).unwrap();
    let report = nash_dominance_check(&PairedGame::new(p, a).unwrap());
    assert!(!report.passed());
}

#[test]
fn theorem1_flags_out_of_band_payoffs() {
    let g = GameMatrix::new(vec![vec![0.0, 50.0], vec![100.0, -1.0]]).unwrap();
    let bands = SuccessBands {
        s_min: 75.0,
        s_max: 100.0,
        f_min: -1.0,
        f_max: 0.0,
    };
    assert!(matches!(
        theorem1_check(&g, &bands),
        Theorem1Report::NotApplicable { .. }
    ));
}

#[test]
fn theorem1_without_universal_succeeder_is_not_applicable() {
    let g = GameMatrix::new(vec![vec![100.0, 0.0], vec![0.0, 100.0]]).unwrap();
    let bands = SuccessBands {
        s_min: 75.0,
        s_max: 100.0,
        f_min: -1.0,
        f_max: 0.0,
    };
    assert!(matches!(
        theorem1_check(&g, &bands),
        Theorem1Report::NotApplicable { .. }
    ));
}
