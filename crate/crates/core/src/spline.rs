//! Natural cubic spline basis for the time-varying baseline hazard effect.
//!
//! The basis over `[0, 1]` uses `e` equally spaced knots `k_j = (j-1)/(e-1)`
//! and consists of `b_1(t) = 1`, `b_2(t) = t`, and the truncated-cubic
//! combinations
//!
//! ```text
//! b_{i+2}(t) = d_i(t) - d_{e-1}(t),   i = 1..e-2,
//! d_j(t) = (max(t-k_j, 0)^3 - max(t-k_e, 0)^3) / (k_e - k_j),
//! ```
//!
//! which is linear beyond both boundary knots. Discrete time runs over `q`
//! intervals; interval `s` is represented by its right endpoint `r_s = s/q`,
//! so `r_q = 1` coincides with the last knot. The basis vector at each
//! representative time is precomputed once and reused by the model and by the
//! sensitivity formulas of the privacy mechanisms.

use crate::error::{Error, Result};

/// Precomputed natural cubic spline basis over `q` discrete intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    knots: Vec<f64>,
    e: usize,
    q: usize,
    /// `interval_vectors[s-1] = [b_1(r_s), ..., b_e(r_s)]` with `r_s = s/q`.
    interval_vectors: Vec<Vec<f64>>,
}

/// Builds the basis with `e >= 2` equally spaced knots and `q >= 1` intervals.
pub fn build_basis(e: usize, q: usize) -> Result<SplineBasis> {
    if e < 2 {
        return Err(Error::Config(format!(
            "spline basis needs at least 2 knots, got e={e}"
        )));
    }
    if q < 1 {
        return Err(Error::Config("number of intervals q must be >= 1".into()));
    }
    let knots: Vec<f64> = (0..e).map(|j| j as f64 / (e - 1) as f64).collect();
    let interval_vectors = (1..=q)
        .map(|s| eval_at(&knots, s as f64 / q as f64))
        .collect();
    Ok(SplineBasis {
        knots,
        e,
        q,
        interval_vectors,
    })
}

fn truncated_cubic(knots: &[f64], j: usize, t: f64) -> f64 {
    let k_j = knots[j];
    let k_e = *knots.last().unwrap();
    ((t - k_j).max(0.0).powi(3) - (t - k_e).max(0.0).powi(3)) / (k_e - k_j)
}

fn eval_at(knots: &[f64], t: f64) -> Vec<f64> {
    let e = knots.len();
    let mut out = Vec::with_capacity(e);
    out.push(1.0);
    out.push(t);
    if e > 2 {
        let d_last = truncated_cubic(knots, e - 2, t);
        for i in 0..e - 2 {
            out.push(truncated_cubic(knots, i, t) - d_last);
        }
    }
    out
}

impl SplineBasis {
    /// Number of basis functions.
    pub fn e(&self) -> usize {
        self.e
    }

    /// Number of discrete time intervals.
    pub fn q(&self) -> usize {
        self.q
    }

    /// Knot locations `0 = k_1 < ... < k_e = 1`.
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Precomputed basis vector for interval `s` (1-based).
    pub fn interval_vector(&self, s: usize) -> &[f64] {
        &self.interval_vectors[s - 1]
    }

    /// All precomputed interval vectors, in interval order.
    pub fn interval_vectors(&self) -> &[Vec<f64>] {
        &self.interval_vectors
    }

    /// Representative time of interval `s` (its right endpoint `s/q`).
    pub fn representative_time(&self, s: usize) -> f64 {
        s as f64 / self.q as f64
    }

    /// Evaluates `[b_1(t), ..., b_e(t)]` for `t` in `[0, 1]`.
    ///
    /// Evaluating at a representative time `s/q` reproduces
    /// `interval_vector(s)` bit-exactly (both go through the same code path).
    pub fn eval_basis(&self, t: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!(
                "basis evaluation time {t} outside [0, 1]"
            )));
        }
        Ok(eval_at(&self.knots, t))
    }

    /// Evaluates the basis at any real `t` using the natural extension of
    /// the closed form (linear beyond the boundary knots). Used by boundary
    /// diagnostics; ordinary evaluation should go through [`eval_basis`].
    ///
    /// [`eval_basis`]: SplineBasis::eval_basis
    pub fn eval_basis_extended(&self, t: f64) -> Vec<f64> {
        eval_at(&self.knots, t)
    }

    /// Euclidean norms of the interval vectors, `‖A_s‖` for `s = 1..q`.
    pub fn basis_norms(&self) -> Vec<f64> {
        self.interval_vectors
            .iter()
            .map(|a| a.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Independent oracle: evaluates the basis definition term by term,
    /// sharing no code with `eval_at`.
    fn naive_basis(e: usize, t: f64) -> Vec<f64> {
        let knots: Vec<f64> = (0..e).map(|j| j as f64 / (e - 1) as f64).collect();
        let d = |j: usize, t: f64| {
            let cube = |x: f64| if x > 0.0 { x * x * x } else { 0.0 };
            (cube(t - knots[j]) - cube(t - knots[e - 1])) / (knots[e - 1] - knots[j])
        };
        let mut b = vec![1.0, t];
        for i in 0..e.saturating_sub(2) {
            b.push(d(i, t) - d(e - 2, t));
        }
        b
    }

    fn gamma_at(basis: &SplineBasis, alpha: &[f64], t: f64) -> f64 {
        basis
            .eval_basis_extended(t)
            .iter()
            .zip(alpha)
            .map(|(b, a)| b * a)
            .sum()
    }

    #[test]
    fn two_knot_basis_is_constant_and_identity() {
        let basis = build_basis(2, 2).unwrap();
        assert_eq!(basis.knots(), &[0.0, 1.0]);
        assert_eq!(basis.interval_vector(1), &[1.0, 0.5]);
        assert_eq!(basis.interval_vector(2), &[1.0, 1.0]);
    }

    #[test]
    fn three_knots_are_equally_spaced() {
        let basis = build_basis(3, 10).unwrap();
        assert_eq!(basis.knots(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn cubic_terms_vanish_at_origin() {
        let basis = build_basis(3, 4).unwrap();
        let b = basis.eval_basis(0.0).unwrap();
        assert_eq!(b, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn hand_evaluated_value_at_one() {
        // e = 3: d_1(1) = 1, d_2(1) = 0.125/0.5 = 0.25, so b_3(1) = 0.75.
        let basis = build_basis(3, 5).unwrap();
        let b = basis.eval_basis(1.0).unwrap();
        assert_relative_eq!(b[0], 1.0);
        assert_relative_eq!(b[1], 1.0);
        assert_relative_eq!(b[2], 0.75, max_relative = 1e-15);
    }

    #[test]
    fn matches_naive_formula_oracle() {
        for e in 2..=6 {
            let basis = build_basis(e, 8).unwrap();
            for i in 0..=50 {
                let t = i as f64 / 50.0;
                let got = basis.eval_basis(t).unwrap();
                let want = naive_basis(e, t);
                for (g, w) in got.iter().zip(&want) {
                    assert_relative_eq!(g, w, max_relative = 1e-14, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn interval_vectors_match_eval_bit_exactly() {
        let basis = build_basis(4, 17).unwrap();
        for s in 1..=17 {
            let direct = basis.eval_basis(basis.representative_time(s)).unwrap();
            assert_eq!(direct, basis.interval_vector(s));
        }
    }

    #[test]
    fn norms_for_two_knot_basis() {
        let basis = build_basis(2, 2).unwrap();
        let norms = basis.basis_norms();
        assert_relative_eq!(norms[0], 1.25f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(norms[1], 2.0f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn norms_at_least_one_and_monotone_for_linear_basis() {
        let basis = build_basis(2, 40).unwrap();
        let norms = basis.basis_norms();
        for w in norms.windows(2) {
            assert!(w[0] <= w[1] + 1e-15, "norms not nondecreasing: {w:?}");
        }
        let any = build_basis(5, 30).unwrap();
        for n in any.basis_norms() {
            assert!(n >= 1.0);
        }
    }

    #[test]
    fn rejects_single_knot_and_zero_intervals() {
        assert!(matches!(build_basis(1, 5), Err(Error::Config(_))));
        assert!(matches!(build_basis(3, 0), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_evaluation_outside_unit_interval() {
        let basis = build_basis(3, 5).unwrap();
        assert!(matches!(basis.eval_basis(-0.1), Err(Error::Domain(_))));
        assert!(matches!(basis.eval_basis(1.1), Err(Error::Domain(_))));
    }

    /// Central second difference; exact for a cubic when the stencil stays
    /// within one polynomial piece.
    fn fd_second(basis: &SplineBasis, alpha: &[f64], t: f64, h: f64) -> f64 {
        (gamma_at(basis, alpha, t + h) - 2.0 * gamma_at(basis, alpha, t)
            + gamma_at(basis, alpha, t - h))
            / (h * h)
    }

    fn fd_first(basis: &SplineBasis, alpha: &[f64], t: f64, h: f64) -> f64 {
        (gamma_at(basis, alpha, t + h) - gamma_at(basis, alpha, t - h)) / (2.0 * h)
    }

    proptest! {
        #[test]
        fn second_derivative_vanishes_at_boundaries(
            e in 3usize..7,
            raw in prop::collection::vec(-2.0f64..2.0, 7),
        ) {
            let basis = build_basis(e, 10).unwrap();
            let alpha = &raw[..e];
            // The O(h) remainder of the one-sided stencil carries the third
            // derivative, which grows like the inverse knot spacing.
            let scale = 1.0 + e as f64 * alpha.iter().map(|a| a.abs()).sum::<f64>();
            let h = 1e-4;
            for t in [0.0, 1.0] {
                let dd = fd_second(&basis, alpha, t, h);
                prop_assert!(
                    dd.abs() <= 1e-4 * scale,
                    "second derivative {dd} at boundary t={t}"
                );
            }
        }

        #[test]
        fn smooth_to_second_order_at_interior_knots(
            e in 3usize..7,
            raw in prop::collection::vec(-2.0f64..2.0, 7),
        ) {
            let basis = build_basis(e, 10).unwrap();
            let alpha = &raw[..e];
            let scale = 1.0 + alpha.iter().map(|a| a.abs()).sum::<f64>();
            let h = 1e-4;
            for &k in &basis.knots()[1..e - 1] {
                // Value continuity: the closed form is single-valued; check a
                // tight two-sided difference.
                let jump0 = (gamma_at(&basis, alpha, k - 1e-9)
                    - gamma_at(&basis, alpha, k + 1e-9))
                .abs();
                prop_assert!(jump0 <= 1e-7 * scale);

                // First derivative: quadratic per piece after differentiation,
                // so quadratic extrapolation of exact central differences
                // recovers the one-sided limits exactly (up to rounding).
                let left1 = 3.0 * fd_first(&basis, alpha, k - h, h)
                    - 3.0 * fd_first(&basis, alpha, k - 2.0 * h, h)
                    + fd_first(&basis, alpha, k - 3.0 * h, h);
                let right1 = 3.0 * fd_first(&basis, alpha, k + h, h)
                    - 3.0 * fd_first(&basis, alpha, k + 2.0 * h, h)
                    + fd_first(&basis, alpha, k + 3.0 * h, h);
                prop_assert!(
                    (left1 - right1).abs() <= 1e-5 * scale,
                    "first-derivative jump {} at knot {k}", left1 - right1
                );

                // Second derivative: linear per piece, so linear extrapolation
                // of the one-sided stencils is exact.
                let left2 = 2.0 * fd_second(&basis, alpha, k - h, h)
                    - fd_second(&basis, alpha, k - 2.0 * h, h);
                let right2 = 2.0 * fd_second(&basis, alpha, k + h, h)
                    - fd_second(&basis, alpha, k + 2.0 * h, h);
                prop_assert!(
                    (left2 - right2).abs() <= 1e-5 * scale,
                    "second-derivative jump {} at knot {k}", left2 - right2
                );
            }
        }

        #[test]
        fn first_two_functions_are_exact(t in 0.0f64..=1.0, e in 2usize..7) {
            let basis = build_basis(e, 3).unwrap();
            let b = basis.eval_basis(t).unwrap();
            prop_assert_eq!(b[0], 1.0);
            prop_assert_eq!(b[1], t);
        }
    }
}
