use adact_core::burden::{burden, Algorithm, BurdenInput};
use adact_core::network::build_correlations;
use adact_core::ols::solve_via_ols;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn ols_runtime_counter_tracks_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut report = Vec::new();
    for _ in 0..20 {
        let (n, nh, m) = (rng.gen_range(1..=10), rng.gen_range(1..=10), rng.gen_range(1..=4));
        let nu = n + nh + 1;
        let nv = 2 * nu + 3;
        let xa = DMatrix::from_fn(nv, nu, |_, _| rng.gen_range(-1.0..1.0));
        let t = DMatrix::from_fn(nv, m, |_, _| rng.gen_range(-1.0..1.0));
        let sys = build_correlations(&xa, &t).unwrap();
        let counted = solve_via_ols(&sys.r, &sys.c).multiplies as f64;
        let formula = burden(
            Algorithm::Ols,
            &BurdenInput::new(n as u64, nh as u64, m as u64, nv as u64, 2).unwrap(),
        ) as f64;
        let ratio = formula / counted;
        if !(0.5..=2.0).contains(&ratio) {
            report.push(format!("N_u={nu} M={m}: counted {counted}, formula {formula}, ratio {ratio:.2}"));
        }
    }
    assert!(report.is_empty(), "counter outside a factor of 2:\n{}", report.join("\n"));
}

#[test]
fn ols_runtime_counter_is_exact_for_its_loops() {
    // accepted-basis recursion plus the forward and back substitutions
    for nu in 1..=12usize {
        for m in 1..=3usize {
            let r = DMatrix::<f64>::identity(nu, nu);
            let c = DMatrix::from_element(nu, m, 1.0);
            let counted = solve_via_ols(&r, &c).multiplies as usize;
            let recursion: usize = (0..nu)
                .map(|j| (0..j).map(|i| i + 2).sum::<usize>() + (0..j).map(|k| j - k + 1).sum::<usize>() + 1)
                .sum();
            let solve = m * (nu * (nu + 1) / 2) * 2;
            assert_eq!(counted, recursion + solve, "N_u={nu} M={m}");
        }
    }
}
