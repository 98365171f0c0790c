use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rectbound::directproduct::{
    check_goodcoordinate, conditioned_coordinate_factorization, decay_experiment, success_variables, ProductInstance,
};
use rectbound::domain::{make_family, Distribution, Relation};
use rectbound::par::Exec;
use rectbound::protocols::{budget_allowance, factorize, ProtocolTree};
use rectbound::Error;

fn and() -> (Relation, Distribution, ProtocolTree) {
    let (f, mu) = make_family("AND", 1).unwrap();
    let base = ProtocolTree::send_then_answer(&f).unwrap();
    (f, mu, base)
}

fn skewed() -> Distribution {
    Distribution::new(2, 2, vec![0.4, 0.1, 0.2, 0.3]).unwrap()
}

#[test]
fn perfect_protocol_always_succeeds() {
    let (f, mu, base) = and();
    let inst = ProductInstance::independent(f, mu, 1, &base).unwrap();
    let s = success_variables(&inst).unwrap();
    assert!((s.pr_success(&[1]).unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn independent_coordinates_multiply() {
    let (f, _, _) = and();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let base = ProtocolTree::random(2, 2, 2, 2, &mut rng).unwrap();
        let inst = ProductInstance::independent(f.clone(), skewed(), 2, &base).unwrap();
        let s = success_variables(&inst).unwrap();
        let (p1, p2, p12) = (s.pr_success(&[1]).unwrap(), s.pr_success(&[2]).unwrap(), s.pr_success(&[1, 2]).unwrap());
        assert!((p12 - p1 * p2).abs() < 1e-12, "{p12} vs {p1}·{p2}");
        assert!((p1 - p2).abs() < 1e-12);
    }
}

/// Replays the budget rule coordinate by coordinate with the base tree.
fn replay(f: &Relation, mu: &Distribution, base: &ProtocolTree, t: usize, fraction: f64, guess: usize) -> f64 {
    let d = base.depth();
    let mut total = 0.0;
    for xt in 0..1usize << t {
        for yt in 0..1usize << t {
            let mut p = 1.0;
            let mut spent = 0;
            let mut ok = true;
            for i in 0..t {
                let (x, y) = (xt >> i & 1, yt >> i & 1);
                p *= mu.prob(x, y);
                let z = if budget_allowance(fraction, i, d) - spent.min(budget_allowance(fraction, i, d)) >= d {
                    let run = base.run(x, y).unwrap();
                    spent += base.leaves()[run.leaf].depth;
                    run.output
                } else {
                    guess
                };
                ok &= f.accepts(x, y, z);
            }
            if ok {
                total += p;
            }
        }
    }
    total
}

#[test]
fn shared_budget_success_matches_replay() {
    let (f, mu, base) = and();
    for t in 1..=3 {
        for fraction in [0.0, 0.5, 0.75, 1.0] {
            let inst = ProductInstance::shared_budget(f.clone(), mu.clone(), t, &base, fraction).unwrap();
            let all: Vec<usize> = (1..=t).collect();
            let got = success_variables(&inst).unwrap().pr_success(&all).unwrap();
            let want = replay(&f, &mu, &base, t, fraction, 0);
            assert!((got - want).abs() < 1e-12, "t={t} fraction={fraction}: {got} vs {want}");
            assert!(inst.tree().cost() <= budget_allowance(fraction, t - 1, 2) + 2 * t);
        }
    }
    // Half the budget at t = 2 funds only the second coordinate.
    let inst = ProductInstance::shared_budget(f, mu, 2, &base, 0.5).unwrap();
    let s = success_variables(&inst).unwrap();
    assert!((s.pr_success(&[1]).unwrap() - 0.75).abs() < 1e-12);
    assert!((s.pr_success(&[2]).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn single_coordinate_factorization_is_the_tree_factorization() {
    let (f, _, base) = and();
    let mu = skewed();
    let inst = ProductInstance::independent(f, mu.clone(), 1, &base).unwrap();
    let cf = conditioned_coordinate_factorization(&inst, &[], 1).unwrap();
    assert!(cf.r_vars.is_empty());
    let direct = factorize(&base, &mu).unwrap();
    assert_eq!(cf.factorization.m_size(), direct.m_size());
    for x in 0..2 {
        for y in 0..2 {
            for m in 0..direct.m_size() {
                assert!((cf.factorization.prob(x, y, m) - direct.prob(x, y, m)).abs() < 1e-15);
            }
        }
    }
    assert!(cf.verified());
}

#[test]
fn conditioned_factorization_reproduces_the_joint() {
    let (f, mu, base) = and();
    let inst = ProductInstance::shared_budget(f.clone(), mu, 2, &base, 0.5).unwrap();
    let cf = conditioned_coordinate_factorization(&inst, &[1], 2).unwrap();
    assert!(cf.verified(), "{}", cf.max_abs_error);
    assert!((cf.pr_condition - 0.75).abs() < 1e-12);
    assert_eq!(cf.r_vars, ["D1", "U1", "X1", "Y1"]);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let tree = ProtocolTree::random(4, 4, 4, 4, &mut rng).unwrap();
        let inst = ProductInstance::new(f.clone(), skewed(), 2, tree).unwrap();
        for (cond, j) in [(vec![], 1), (vec![], 2), (vec![1], 2), (vec![2], 1)] {
            match conditioned_coordinate_factorization(&inst, &cond, j) {
                Ok(cf) => assert!(cf.verified(), "{cond:?} {j}: {}", cf.max_abs_error),
                Err(Error::NullEvent(_)) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }
}

#[test]
fn null_conditioning_event_is_an_error() {
    let (f, mu, _) = and();
    let wrong = Relation::tabulate(2, 2, 2, |x, y| 1 - (x & y)).unwrap();
    let base = ProtocolTree::send_then_answer(&wrong).unwrap();
    let inst = ProductInstance::independent(f, mu, 2, &base).unwrap();
    assert!(matches!(conditioned_coordinate_factorization(&inst, &[1], 2), Err(Error::NullEvent(_))));
    assert!(conditioned_coordinate_factorization(&inst, &[2], 2).is_err());
}

#[test]
fn goodcoordinate_vacuous_conditioning() {
    let (f, _, base) = and();
    let inst = ProductInstance::independent(f, skewed(), 2, &base).unwrap();
    let c = inst.tree().cost() as f64 / (0.01 * 2.0);
    let rep = check_goodcoordinate(&inst, &[], 0.01, c).unwrap();
    assert!(rep.pass(), "{:#?}", rep.chain);
    assert_eq!(rep.j, Some(1));
    assert!(rep.coordinates.iter().all(|b| b.qualifies && b.divergence.abs() < 1e-12));
}

#[test]
fn goodcoordinate_shared_budget_and() {
    let (f, mu, base) = and();
    let inst = ProductInstance::shared_budget(f, mu, 2, &base, 0.5).unwrap();
    // Pr[T_1 = 1] = 3/4, so delta1 must exceed log(4/3)/2.
    let delta1 = 0.25;
    let c = inst.tree().cost() as f64 / (delta1 * 2.0);
    let rep = check_goodcoordinate(&inst, &[1], delta1, c).unwrap();
    assert!(rep.pass(), "{:#?}", rep);
    assert_eq!(rep.j, Some(2));
    let b = &rep.coordinates[0];
    assert!(b.divergence <= 8.0 * delta1 && b.info_mr <= 16.0 * delta1 * (c + 1.0));
    // Coordinate 2 is solved by sending x_2 and x_2 ∧ y_2.
    assert!((b.info_m - 1.5).abs() < 1e-12, "{}", b.info_m);
}

#[test]
fn goodcoordinate_random_protocols() {
    let (f, _, _) = and();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checked = 0;
    for _ in 0..30 {
        let tree = ProtocolTree::random(4, 4, 4, 4, &mut rng).unwrap();
        let inst = ProductInstance::new(f.clone(), skewed(), 2, tree).unwrap();
        let s = success_variables(&inst).unwrap();
        for cond in [vec![], vec![1], vec![2]] {
            let pr = s.pr_success(&cond).unwrap();
            if pr == 0.0 {
                continue;
            }
            let delta1 = -pr.log2() / 2.0 + 0.01;
            let c = inst.tree().cost() as f64 / (delta1 * 2.0);
            let rep = check_goodcoordinate(&inst, &cond, delta1, c).unwrap();
            assert!(rep.pass(), "{:#?}", rep);
            // At t = 2 the averaging leaves no room for a bad coordinate.
            assert!(rep.coordinates.iter().all(|b| b.qualifies));
            checked += 1;
        }
    }
    assert!(checked > 30);
}

#[test]
fn goodcoordinate_rejects_rare_conditioning() {
    let (f, mu, base) = and();
    let inst = ProductInstance::shared_budget(f, mu, 2, &base, 0.5).unwrap();
    let err = check_goodcoordinate(&inst, &[1], 0.01, 1e6).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)));
    // Too little budget for the protocol's communication.
    assert!(matches!(check_goodcoordinate(&inst, &[1], 0.25, 1.0), Err(Error::Precondition(_))));
}

#[test]
fn decay_perfect_protocol_never_fails() {
    let (f, mu, base) = and();
    let curve = decay_experiment(&f, &mu, &base, 6, 1.0, 20_000, 3, Exec::Auto).unwrap();
    assert!(curve.points.iter().all(|p| p.successes == p.trials));
}

#[test]
fn decay_independent_runs_follow_a_power() {
    let (f, _, _) = and();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let base = ProtocolTree::random(2, 2, 2, 2, &mut rng).unwrap();
    let curve = decay_experiment(&f, &skewed(), &base, 8, 1.0, 100_000, 5, Exec::Auto).unwrap();
    let p = curve.per_coordinate_success;
    assert!(p > 0.0 && p < 1.0);
    for pt in &curve.points {
        let exact = p.powi(pt.t as i32);
        let sigma = (exact * (1.0 - exact) / pt.trials as f64).sqrt();
        assert!((pt.estimate - exact).abs() <= 3.0 * sigma + 1e-12, "t={} {} vs {exact}", pt.t, pt.estimate);
    }
}

#[test]
fn decay_budget_starved_curve_is_monotone_and_deterministic() {
    let (f, mu, base) = and();
    let a = decay_experiment(&f, &mu, &base, 8, 0.5, 50_000, 1, Exec::Auto).unwrap();
    let b = decay_experiment(&f, &mu, &base, 8, 0.5, 50_000, 1, Exec::Sequential).unwrap();
    assert_eq!(a, b);
    assert!(a.points.windows(2).all(|w| w[1].successes <= w[0].successes));
    // Every other coordinate is guessed: the success law is (3/4)^⌈t/2⌉.
    for pt in &a.points {
        let exact = 0.75f64.powi(pt.t.div_ceil(2) as i32);
        assert!((pt.estimate - exact).abs() < 4.0 * (exact * (1.0 - exact) / 5e4).sqrt() + 1e-12);
    }
    assert!(decay_experiment(&f, &mu, &base, 8, 0.5, 0, 1, Exec::Auto).is_err());
}
