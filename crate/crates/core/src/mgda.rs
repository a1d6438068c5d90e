//! Min-norm point of the convex hull of per-objective loss gradients.
//!
//! Minimizing `||sum_i lambda_i g_i||^2` over the probability simplex gives the
//! weights of the common descent direction `d = -sum_i lambda_i g_i`. The
//! solver is Frank-Wolfe with exact line search, run entirely on the `m x m`
//! Gram matrix so the cost per iteration does not depend on the parameter
//! dimension.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-7;
pub const DEFAULT_MAX_ITER: usize = 250;

/// `m` gradients of dimension `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    gradients: Vec<Vec<f64>>,
}

impl GradientSet {
    pub fn new(gradients: Vec<Vec<f64>>) -> Result<Self> {
        let first = gradients.first().ok_or(Error::Empty("gradient set"))?;
        let n = first.len();
        if n == 0 {
            return Err(Error::Empty("gradient"));
        }
        for g in &gradients {
            if g.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: g.len(),
                });
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("gradient"));
            }
        }
        Ok(Self { gradients })
    }

    pub fn num_objectives(&self) -> usize {
        self.gradients.len()
    }

    pub fn dim(&self) -> usize {
        self.gradients[0].len()
    }

    pub fn gradients(&self) -> &[Vec<f64>] {
        &self.gradients
    }

    pub fn gram(&self) -> Vec<Vec<f64>> {
        let m = self.gradients.len();
        let mut gram = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in i..m {
                let v = dot(&self.gradients[i], &self.gradients[j]);
                gram[i][j] = v;
                gram[j][i] = v;
            }
        }
        gram
    }

    /// `sum_i weights_i g_i`.
    pub fn combine(&self, weights: &SimplexWeights) -> Vec<f64> {
        let mut out: Vec<f64> = self.gradients[0].iter().map(|g| weights.0[0] * g).collect();
        for (w, g) in weights.0.iter().zip(&self.gradients).skip(1) {
            for (o, x) in out.iter_mut().zip(g) {
                *o += w * x;
            }
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A point of the probability simplex.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub const SUM_TOLERANCE: f64 = 1e-9;

    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("simplex weights"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidConfig(
                "simplex weight outside [0, inf)".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidConfig(
                "simplex weights do not sum to 1".into(),
            ));
        }
        Ok(Self(weights))
    }

    pub fn vertex(m: usize, i: usize) -> Self {
        let mut w = vec![0.0; m];
        w[i] = 1.0;
        Self(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentResult {
    pub weights: SimplexWeights,
    /// `-(sum_i lambda_i g_i)`.
    pub direction: Vec<f64>,
    /// `||sum_i lambda_i g_i||^2`.
    pub combined_norm_sq: f64,
    /// Frank-Wolfe gap `u.u - min_j g_j.u` at the returned weights.
    pub duality_gap: f64,
    pub iterations: usize,
    pub converged: bool,
    /// For two objectives: `|fw - closed_form|` in `combined_norm_sq`.
    pub closed_form_discrepancy: Option<f64>,
}

/// Frank-Wolfe state in weight space.
#[derive(Debug, Clone)]
pub struct FrankWolfeTrace {
    pub weights: Vec<f64>,
    /// `||u||^2` after each iteration, starting with the initial vertex.
    pub norms: Vec<f64>,
    pub duality_gap: f64,
    pub converged: bool,
}

fn quad(gram: &[Vec<f64>], w: &[f64]) -> (Vec<f64>, f64) {
    let gw: Vec<f64> = gram.iter().map(|row| dot(row, w)).collect();
    let norm = dot(w, &gw);
    (gw, norm)
}

/// Best starting point among the vertices and the exact minimizers on each
/// edge of the simplex. Earlier candidates win ties.
fn initial_weights(gram: &[Vec<f64>]) -> Vec<f64> {
    let m = gram.len();
    let mut best = vec![0.0; m];
    best[0] = 1.0;
    let mut best_norm = gram[0][0];
    for i in 0..m {
        for j in i..m {
            let mut w = vec![0.0; m];
            let norm = if i == j {
                w[i] = 1.0;
                gram[i][i]
            } else {
                let sub = [vec![gram[i][i], gram[i][j]], vec![gram[j][i], gram[j][j]]];
                let [a, b] = min_norm_two(&sub);
                w[i] = a;
                w[j] = b;
                a * a * gram[i][i] + 2.0 * a * b * gram[i][j] + b * b * gram[j][j]
            };
            if norm < best_norm {
                best_norm = norm;
                best = w;
            }
        }
    }
    best
}

/// Frank-Wolfe with exact line search, started from the best vertex or edge
/// minimizer. Ties in the linear subproblem go to the lowest index.
pub fn frank_wolfe(gram: &[Vec<f64>], tol: f64, max_iter: usize) -> FrankWolfeTrace {
    let m = gram.len();
    let mut w = initial_weights(gram);
    let (mut gw, mut norm) = quad(gram, &w);
    let mut norms = vec![norm];
    let mut gap = f64::INFINITY;
    let mut converged = false;
    for _ in 0..max_iter {
        let mut j = 0;
        for i in 1..m {
            if gw[i] < gw[j] {
                j = i;
            }
        }
        gap = norm - gw[j];
        if gap <= tol {
            converged = true;
            break;
        }
        // ||u - g_j||^2 = u.u - 2 g_j.u + g_j.g_j
        let denom = norm - 2.0 * gw[j] + gram[j][j];
        if denom <= 0.0 {
            converged = true;
            break;
        }
        let step = (gap / denom).clamp(0.0, 1.0);
        for (i, wi) in w.iter_mut().enumerate() {
            *wi *= 1.0 - step;
            if i == j {
                *wi += step;
            }
        }
        let next = quad(gram, &w);
        gw = next.0;
        norm = next.1;
        norms.push(norm);
    }
    if !converged {
        let j = (0..m).fold(0, |j, i| if gw[i] < gw[j] { i } else { j });
        gap = norm - gw[j];
        converged = gap <= tol;
    }
    FrankWolfeTrace {
        weights: w,
        norms,
        duality_gap: gap,
        converged,
    }
}

/// Exact minimizer of `||l g1 + (1 - l) g2||^2` on `[0, 1]`, returned as
/// `(l, 1 - l)`. Identical gradients give `(1, 0)`.
pub fn min_norm_two(gram: &[Vec<f64>]) -> [f64; 2] {
    let (g11, g12, g22) = (gram[0][0], gram[0][1], gram[1][1]);
    let denom = g11 - 2.0 * g12 + g22;
    if denom <= 0.0 {
        return [1.0, 0.0];
    }
    let l = ((g22 - g12) / denom).clamp(0.0, 1.0);
    [l, 1.0 - l]
}

/// Approximate min-norm point of the convex hull of `g`.
///
/// Stops once the Frank-Wolfe gap is at most `tol` or after `max_iter`
/// iterations; an unconverged result is flagged, not an error. With two
/// objectives the closed-form weights are returned and the Frank-Wolfe value
/// is kept as a cross-check.
pub fn min_norm_point(g: &GradientSet, tol: f64, max_iter: usize) -> Result<DescentResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig("tolerance must be positive".into()));
    }
    if max_iter == 0 {
        return Err(Error::InvalidConfig("max_iter must be positive".into()));
    }
    let m = g.num_objectives();
    if m == 1 {
        let combined = g.gradients[0].clone();
        let norm = dot(&combined, &combined);
        return Ok(DescentResult {
            weights: SimplexWeights::vertex(1, 0),
            direction: combined.iter().map(|v| -v).collect(),
            combined_norm_sq: norm,
            duality_gap: 0.0,
            iterations: 0,
            converged: true,
            closed_form_discrepancy: None,
        });
    }
    let gram = g.gram();
    let trace = frank_wolfe(&gram, tol, max_iter);
    let iterations = trace.norms.len() - 1;
    let (weights, gap, converged, discrepancy) = if m == 2 {
        let exact = min_norm_two(&gram);
        let (gw, norm) = quad(&gram, &exact);
        let fw_norm = *trace.norms.last().unwrap_or(&norm);
        let gap = norm - gw[0].min(gw[1]);
        (exact.to_vec(), gap, true, Some((fw_norm - norm).abs()))
    } else {
        (trace.weights, trace.duality_gap, trace.converged, None)
    };
    let weights = SimplexWeights(weights);
    let combined = g.combine(&weights);
    let combined_norm_sq = dot(&combined, &combined);
    Ok(DescentResult {
        weights,
        direction: combined.iter().map(|v| -v).collect(),
        combined_norm_sq,
        duality_gap: gap.max(0.0),
        iterations,
        converged,
        closed_form_discrepancy: discrepancy,
    })
}

/// One multiple-gradient descent step on loss gradients:
/// `params - eta * sum_i lambda_i g_i`.
pub fn mgda_step(params: &[f64], g: &GradientSet, eta: f64) -> Result<Vec<f64>> {
    if params.len() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            found: params.len(),
        });
    }
    let result = min_norm_point(g, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER)?;
    Ok(params
        .iter()
        .zip(&result.direction)
        .map(|(p, d)| p + eta * d)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gs(rows: &[&[f64]]) -> GradientSet {
        GradientSet::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn solve(rows: &[&[f64]]) -> DescentResult {
        min_norm_point(&gs(rows), DEFAULT_TOLERANCE, DEFAULT_MAX_ITER).unwrap()
    }

    #[test]
    fn orthogonal_unit_gradients() {
        let r = solve(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert!((r.weights.as_slice()[0] - 0.5).abs() < 1e-12);
        assert!((r.combined_norm_sq - 0.5).abs() < 1e-12);
        assert_eq!(r.direction, vec![-0.5, -0.5]);
    }

    #[test]
    fn identical_gradients() {
        let r = solve(&[&[0.3, -1.2, 2.0], &[0.3, -1.2, 2.0]]);
        let w = r.weights.as_slice();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((r.combined_norm_sq - (0.09 + 1.44 + 4.0)).abs() < 1e-12);
    }

    #[test]
    fn collinear_endpoint() {
        let r = solve(&[&[2.0, 0.0], &[1.0, 0.0]]);
        assert_eq!(r.weights.as_slice(), &[0.0, 1.0]);
        assert_eq!(r.combined_norm_sq, 1.0);
    }

    #[test]
    fn opposing_gradients_are_pareto_stationary() {
        let v = [0.4, -1.1, 0.7];
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        let r = solve(&[&v, &neg]);
        assert!(r.combined_norm_sq <= DEFAULT_TOLERANCE);
        let r3 = solve(&[&v, &neg, &[1.0, 1.0, 1.0]]);
        assert!(r3.combined_norm_sq <= DEFAULT_TOLERANCE);
        let stepped = mgda_step(&[1.0, 2.0, 3.0], &gs(&[&v, &neg]), 0.5).unwrap();
        for (a, b) in stepped.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn step_with_zero_rate_is_identity() {
        let p = [0.5, -0.25];
        assert_eq!(
            mgda_step(&p, &gs(&[&[1.0, 2.0], &[3.0, -1.0]]), 0.0).unwrap(),
            p
        );
    }

    #[test]
    fn single_objective_is_plain_descent() {
        let p = [0.5, -0.25, 3.0];
        let g = [0.1, 0.7, -2.0];
        let stepped = mgda_step(&p, &gs(&[&g]), 0.3).unwrap();
        let plain: Vec<f64> = p.iter().zip(&g).map(|(a, b)| a - 0.3 * b).collect();
        assert_eq!(stepped, plain);
    }

    #[test]
    fn rejects_bad_gradients() {
        assert!(GradientSet::new(vec![]).is_err());
        assert!(GradientSet::new(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert_eq!(
            GradientSet::new(vec![vec![1.0, f64::INFINITY]]),
            Err(Error::NonFinite("gradient"))
        );
        assert!(mgda_step(&[1.0], &gs(&[&[1.0, 2.0]]), 0.1).is_err());
    }

    #[test]
    fn unconverged_runs_are_flagged() {
        let g = gs(&[
            &[1.0, 0.2, -0.3],
            &[-0.4, 1.0, 0.1],
            &[0.3, -0.5, 1.0],
            &[0.9, 0.8, 0.7],
        ]);
        let r = min_norm_point(&g, 1e-300, 1).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 1);
        let sum: f64 = r.weights.as_slice().iter().sum();
        assert!((sum - 1.0).abs() < SimplexWeights::SUM_TOLERANCE);
    }

    fn gradient_sets() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..=4, 1usize..=6).prop_flat_map(|(m, n)| {
            prop::collection::vec(prop::collection::vec(-3.0f64..3.0, n), m)
        })
    }

    proptest! {
        #[test]
        fn weights_stay_on_simplex(rows in gradient_sets()) {
            let g = GradientSet::new(rows).unwrap();
            let r = min_norm_point(&g, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER).unwrap();
            let w = r.weights.as_slice();
            prop_assert!(w.iter().all(|&x| x >= 0.0));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= SimplexWeights::SUM_TOLERANCE);
        }

        #[test]
        fn frank_wolfe_is_monotone(rows in gradient_sets()) {
            let g = GradientSet::new(rows).unwrap();
            let trace = frank_wolfe(&g.gram(), DEFAULT_TOLERANCE, DEFAULT_MAX_ITER);
            for pair in trace.norms.windows(2) {
                prop_assert!(pair[1] <= pair[0] + 1e-12 * (1.0 + pair[0]));
            }
        }

        #[test]
        fn optimality_condition_holds(rows in gradient_sets()) {
            let g = GradientSet::new(rows).unwrap();
            let r = min_norm_point(&g, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER).unwrap();
            prop_assume!(r.converged);
            let u: Vec<f64> = r.direction.iter().map(|d| -d).collect();
            let uu = dot(&u, &u);
            for gi in g.gradients() {
                prop_assert!(dot(gi, &u) >= uu - DEFAULT_TOLERANCE - 1e-12 * (1.0 + uu));
            }
        }

        #[test]
        fn scale_covariance(rows in gradient_sets(), c in 0.1f64..10.0) {
            let g = GradientSet::new(rows.clone()).unwrap();
            let scaled = GradientSet::new(
                rows.iter().map(|r| r.iter().map(|v| v * c).collect()).collect(),
            ).unwrap();
            let a = min_norm_point(&g, 1e-12, 5000).unwrap();
            let b = min_norm_point(&scaled, 1e-12, 5000).unwrap();
            let expected = c * c * a.combined_norm_sq;
            prop_assert!((b.combined_norm_sq - expected).abs() <= 1e-6 * (1.0 + expected));
            // the weights found on the scaled problem are optimal for the original
            let u = g.combine(&b.weights);
            prop_assert!((dot(&u, &u) - a.combined_norm_sq).abs() <= 1e-6 * (1.0 + a.combined_norm_sq));
        }
    }
}
