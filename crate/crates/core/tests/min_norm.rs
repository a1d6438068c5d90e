use moprompt_core::mgda::{
    frank_wolfe, mgda_step, min_norm_point, min_norm_two, GradientSet, DEFAULT_MAX_ITER,
    DEFAULT_TOLERANCE,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn random_gradients(rng: &mut ChaCha8Rng, m: usize) -> GradientSet {
    let d = rng.random_range(2..=6);
    let gs = (0..m)
        .map(|_| (0..d).map(|_| StandardNormal.sample(rng)).collect())
        .collect();
    GradientSet::new(gs).unwrap()
}

fn quad(gram: &[Vec<f64>], w: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (i, wi) in w.iter().enumerate() {
        for (j, wj) in w.iter().enumerate() {
            acc += wi * wj * gram[i][j];
        }
    }
    acc
}

/// Minimum of `w' G w` over the simplex grid with spacing `1 / res`.
fn grid_minimum(gram: &[Vec<f64>], res: usize) -> f64 {
    let step = 1.0 / res as f64;
    let mut best = f64::INFINITY;
    match gram.len() {
        2 => {
            for a in 0..=res {
                let x = a as f64 * step;
                best = best.min(quad(gram, &[x, 1.0 - x]));
            }
        }
        3 => {
            for a in 0..=res {
                for b in 0..=(res - a) {
                    let x = a as f64 * step;
                    let y = b as f64 * step;
                    best = best.min(quad(gram, &[x, y, (1.0 - x - y).max(0.0)]));
                }
            }
        }
        m => panic!("grid search not implemented for m = {m}"),
    }
    best
}

#[test]
fn matches_grid_search_and_satisfies_optimality() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..100 {
        let m = 2 + case % 2;
        let g = random_gradients(&mut rng, m);
        let res = min_norm_point(&g, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER).unwrap();
        let grid = grid_minimum(&g.gram(), 1000);
        assert!(
            (res.combined_norm_sq - grid).abs() <= 1e-4,
            "case {case}: solver {} grid {grid}",
            res.combined_norm_sq
        );
        let u: Vec<f64> = res.direction.iter().map(|d| -d).collect();
        let uu: f64 = u.iter().map(|x| x * x).sum();
        for gi in g.gradients() {
            let dot: f64 = gi.iter().zip(&u).map(|(a, b)| a * b).sum();
            assert!(dot >= uu - DEFAULT_TOLERANCE, "case {case}: {dot} < {uu}");
        }
    }
}

#[test]
fn two_objective_closed_form_agrees_with_frank_wolfe() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..200 {
        let g = random_gradients(&mut rng, 2);
        let gram = g.gram();
        let closed = min_norm_two(&gram);
        let fw = frank_wolfe(&gram, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER);
        let a = quad(&gram, &closed);
        let b = quad(&gram, &fw.weights);
        assert!((a - b).abs() <= 1e-7, "{a} vs {b}");
        let res = min_norm_point(&g, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER).unwrap();
        assert!(res.closed_form_discrepancy.unwrap() <= 1e-7);
    }
}

#[test]
fn single_objective_step_is_plain_gradient_descent() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..50 {
        let g = random_gradients(&mut rng, 1);
        let params: Vec<f64> = (0..g.dim()).map(|_| rng.random::<f64>()).collect();
        let eta = rng.random::<f64>();
        let stepped = mgda_step(&params, &g, eta).unwrap();
        let plain: Vec<f64> = params
            .iter()
            .zip(&g.gradients()[0])
            .map(|(p, gi)| p - eta * gi)
            .collect();
        assert_eq!(stepped, plain);
    }
}
