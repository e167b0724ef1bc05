//! Ridge-regression empirical risk.
//!
//! Per-sample loss `ℓ_i(θ) = ½(x_iᵀθ − y_i)² + (α/2)‖θ‖²` and total objective
//! `J(θ) = Σ ℓ_i(θ) + (λ/2)‖θ − θ₀‖²`. The λ-term is the optional localization
//! regularizer; the pipeline uses λ = 0.

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// Feature matrix (row-major, `n × d`) and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<S> {
    features: Vec<S>,
    labels: Vec<S>,
    n: usize,
    d: usize,
}

impl<S: Scalar> Dataset<S> {
    pub fn new(rows: Vec<Vec<S>>, labels: Vec<S>) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(Error::InvalidDataset(format!("row {i} has {} features, expected {d}", row.len())));
        }
        let n = rows.len();
        Self::from_row_major(n, d, rows.into_iter().flatten().collect(), labels)
    }

    pub fn from_row_major(n: usize, d: usize, features: Vec<S>, labels: Vec<S>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidDataset(format!("need n ≥ 1 and d ≥ 1, got n={n}, d={d}")));
        }
        if features.len() != n * d {
            return Err(Error::DimensionMismatch { expected: n * d, actual: features.len() });
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: labels.len() });
        }
        if let Some(pos) = features.iter().chain(&labels).position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!("non-finite entry at flat position {pos}")));
        }
        Ok(Self { features, labels, n, d })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn label(&self, i: usize) -> S {
        self.labels[i]
    }

    pub fn labels(&self) -> &[S] {
        &self.labels
    }

    pub fn features(&self) -> &[S] {
        &self.features
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[S], S)> + '_ {
        self.features.chunks_exact(self.d).zip(self.labels.iter().copied())
    }

    /// Replace-one neighbor: row `i` swapped for `(x, y)`.
    pub fn with_replaced_row(&self, i: usize, x: &[S], y: S) -> Result<Self> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange { index: i, n: self.n });
        }
        if x.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, actual: x.len() });
        }
        let mut out = self.clone();
        out.features[i * self.d..(i + 1) * self.d].copy_from_slice(x);
        out.labels[i] = y;
        Ok(out)
    }

    /// Converts the entries to another floating point type.
    pub fn cast<T: Scalar>(&self) -> Dataset<T> {
        let conv = |v: &S| T::lit(v.to_f64_lossy());
        Dataset {
            features: self.features.iter().map(conv).collect(),
            labels: self.labels.iter().map(conv).collect(),
            n: self.n,
            d: self.d,
        }
    }
}

/// Ridge ERM objective over a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct LossModel<S> {
    pub dataset: Dataset<S>,
    /// Per-sample ridge weight α.
    pub reg_alpha: S,
    /// Localization center θ₀ of the λ-term.
    pub center: Vec<S>,
    /// Weight λ of the localization term.
    pub reg_lambda: S,
}

/// Lipschitz, strong convexity and smoothness constants of the per-sample
/// losses over a domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityBounds<S> {
    /// G: bound on ‖∇ℓ_i(θ)‖ over the domain.
    pub lipschitz: S,
    /// α
    pub strong_convexity: S,
    /// β
    pub smoothness: S,
}

impl<S: Scalar> RegularityBounds<S> {
    pub fn new(lipschitz: S, strong_convexity: S, smoothness: S) -> Result<Self> {
        let ok = lipschitz > S::zero()
            && strong_convexity > S::zero()
            && strong_convexity <= smoothness
            && smoothness.is_finite()
            && lipschitz.is_finite();
        if !ok {
            return Err(Error::param(
                "bounds",
                format!("need G > 0 and 0 < α ≤ β, got G={lipschitz}, α={strong_convexity}, β={smoothness}"),
            ));
        }
        Ok(Self { lipschitz, strong_convexity, smoothness })
    }

    /// κ = β/α
    pub fn condition_number(&self) -> S {
        self.smoothness / self.strong_convexity
    }
}

impl<S: Scalar> LossModel<S> {
    pub fn new(dataset: Dataset<S>, reg_alpha: S) -> Result<Self> {
        if !(reg_alpha > S::zero()) || !reg_alpha.is_finite() {
            return Err(Error::param("reg_alpha", format!("must be > 0, got {reg_alpha}")));
        }
        let d = dataset.d();
        Ok(Self { dataset, reg_alpha, center: vec![S::zero(); d], reg_lambda: S::zero() })
    }

    /// Like [`LossModel::new`] but admits α = 0, for checking the plain
    /// least-squares formula. The exact minimizer then needs λ > 0.
    pub fn unregularized(dataset: Dataset<S>) -> Self {
        let d = dataset.d();
        Self { dataset, reg_alpha: S::zero(), center: vec![S::zero(); d], reg_lambda: S::zero() }
    }

    /// Adds the `(λ/2)‖θ − center‖²` term.
    pub fn with_localization(mut self, center: Vec<S>, reg_lambda: S) -> Result<Self> {
        self.check_dim(&center)?;
        if !(reg_lambda >= S::zero()) {
            return Err(Error::param("reg_lambda", format!("must be ≥ 0, got {reg_lambda}")));
        }
        self.center = center;
        self.reg_lambda = reg_lambda;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.dataset.n()
    }

    pub fn d(&self) -> usize {
        self.dataset.d()
    }

    fn check_dim(&self, theta: &[S]) -> Result<()> {
        if theta.len() == self.d() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.d(), actual: theta.len() })
        }
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i < self.n() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index: i, n: self.n() })
        }
    }

    pub fn per_sample_loss(&self, theta: &[S], i: usize) -> Result<S> {
        self.check_index(i)?;
        self.check_dim(theta)?;
        Ok(self.loss_unchecked(theta, i))
    }

    fn loss_unchecked(&self, theta: &[S], i: usize) -> S {
        let half = S::lit(0.5);
        let r = linalg::dot(self.dataset.row(i), theta) - self.dataset.label(i);
        half * r * r + half * self.reg_alpha * linalg::dot(theta, theta)
    }

    /// `∇ℓ_i(θ) = x_i(x_iᵀθ − y_i) + αθ`
    pub fn per_sample_gradient(&self, theta: &[S], i: usize) -> Result<Vec<S>> {
        self.check_index(i)?;
        self.check_dim(theta)?;
        let x = self.dataset.row(i);
        let r = linalg::dot(x, theta) - self.dataset.label(i);
        Ok(x.iter().zip(theta).map(|(&xj, &tj)| xj * r + self.reg_alpha * tj).collect())
    }

    pub fn total_objective(&self, theta: &[S]) -> Result<S> {
        self.check_dim(theta)?;
        let data: S = (0..self.n()).map(|i| self.loss_unchecked(theta, i)).sum();
        let shift = linalg::distance(theta, &self.center);
        Ok(data + S::lit(0.5) * self.reg_lambda * shift * shift)
    }

    pub fn total_gradient(&self, theta: &[S]) -> Result<Vec<S>> {
        self.check_dim(theta)?;
        let n_alpha = S::lit(self.n() as f64) * self.reg_alpha;
        let mut grad: Vec<S> =
            theta.iter().zip(&self.center).map(|(&t, &c)| n_alpha * t + self.reg_lambda * (t - c)).collect();
        for (x, y) in self.dataset.rows() {
            let r = linalg::dot(x, theta) - y;
            linalg::axpy(r, x, &mut grad);
        }
        Ok(grad)
    }

    /// Hessian `XᵀX + (nα + λ) I`, row-major `d × d`.
    pub fn hessian(&self) -> Vec<S> {
        let d = self.d();
        let mut h = vec![S::zero(); d * d];
        for (x, _) in self.dataset.rows() {
            for a in 0..d {
                for b in 0..d {
                    h[a * d + b] = h[a * d + b] + x[a] * x[b];
                }
            }
        }
        let diag = S::lit(self.n() as f64) * self.reg_alpha + self.reg_lambda;
        for a in 0..d {
            h[a * d + a] = h[a * d + a] + diag;
        }
        h
    }

    /// Right-hand side `Xᵀy + λθ₀` of the normal equations.
    pub fn normal_rhs(&self) -> Vec<S> {
        let mut rhs: Vec<S> = self.center.iter().map(|&c| self.reg_lambda * c).collect();
        for (x, y) in self.dataset.rows() {
            linalg::axpy(y, x, &mut rhs);
        }
        rhs
    }

    /// Closed-form minimizer of `J`: solves `(XᵀX + nαI + λI)θ = Xᵀy + λθ₀`.
    pub fn exact_minimizer(&self) -> Result<Vec<S>> {
        if !(self.reg_alpha > S::zero() || self.reg_lambda > S::zero()) {
            return Err(Error::Singular("α = λ = 0 leaves the ridge objective without strict convexity".into()));
        }
        linalg::solve(self.hessian(), self.normal_rhs(), self.d())
    }

    /// Certifies G, α, β over the ball `B(domain_center, domain_radius)`.
    ///
    /// With `r = ‖domain_center‖ + domain_radius` every θ in the ball has
    /// `‖θ‖ ≤ r`, so `‖∇ℓ_i(θ)‖ ≤ ‖x_i‖(‖x_i‖ r + |y_i|) + α r`.
    pub fn certify_bounds(&self, domain_radius: S, domain_center: &[S]) -> Result<RegularityBounds<S>> {
        if !(domain_radius > S::zero()) {
            return Err(Error::param("domain_radius", format!("must be > 0, got {domain_radius}")));
        }
        self.check_dim(domain_center)?;
        if self.n() == 0 {
            return Err(Error::InvalidDataset("empty dataset".into()));
        }
        let r_max = linalg::norm2(domain_center) + domain_radius;
        let mut lipschitz = S::zero();
        let mut max_sq = S::zero();
        for (x, y) in self.dataset.rows() {
            let nx = linalg::norm2(x);
            lipschitz = lipschitz.max(nx * (nx * r_max + y.abs()) + self.reg_alpha * r_max);
            max_sq = max_sq.max(nx * nx);
        }
        RegularityBounds::new(lipschitz, self.reg_alpha, max_sq + self.reg_alpha)
    }

    /// Radius of an origin-centred ball containing the minimizer of `Σℓ_i` for
    /// this dataset and every replace-one neighbor built from its rows:
    /// `‖θ*‖ ≤ ‖Xᵀy‖/(nα) ≤ maxᵢ ‖x_i‖|y_i| / α`.
    pub fn minimizer_radius(&self) -> S {
        let peak = self.dataset.rows().map(|(x, y)| linalg::norm2(x) * y.abs()).fold(S::zero(), S::max);
        peak / self.reg_alpha
    }

    /// `(L, m)`: an upper bound `L = nβ + λ` on the largest Hessian eigenvalue
    /// of `J` and its strong convexity `m = nα + λ`.
    pub fn curvature_bounds(&self, bounds: &RegularityBounds<S>) -> (S, S) {
        let n = S::lit(self.n() as f64);
        (n * bounds.smoothness + self.reg_lambda, n * bounds.strong_convexity + self.reg_lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one(x: &[f64], y: f64) -> Dataset<f64> {
        Dataset::new(vec![x.to_vec()], vec![y]).unwrap()
    }

    fn two_point() -> LossModel<f64> {
        let ds = Dataset::new(vec![vec![1.0], vec![1.0]], vec![1.0, 0.0]).unwrap();
        LossModel::new(ds, 1.0).unwrap()
    }

    fn random_model(rng: &mut ChaCha8Rng, n: usize, d: usize, alpha: f64) -> LossModel<f64> {
        let rows = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let labels = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        LossModel::new(Dataset::new(rows, labels).unwrap(), alpha).unwrap()
    }

    #[test]
    fn per_sample_loss_examples() {
        let m = LossModel::new(one(&[1.0], 0.0), 1.0).unwrap();
        assert_eq!(m.per_sample_loss(&[0.0], 0).unwrap(), 0.0);
        let m = LossModel::new(one(&[1.0], 1.0), 2.0).unwrap();
        assert_eq!(m.per_sample_loss(&[1.0], 0).unwrap(), 1.0);
        let m = LossModel::unregularized(one(&[1.0, 1.0], 3.0));
        assert_eq!(m.per_sample_loss(&[1.0, 1.0], 0).unwrap(), 0.5);
    }

    #[test]
    fn per_sample_loss_errors() {
        let m = two_point();
        assert!(matches!(m.per_sample_loss(&[0.0], 2), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(m.per_sample_loss(&[0.0, 1.0], 0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn objective_examples() {
        let m = two_point();
        let by_parts = m.per_sample_loss(&[0.25], 0).unwrap() + m.per_sample_loss(&[0.25], 1).unwrap();
        assert_eq!(m.total_objective(&[0.25]).unwrap(), by_parts);
        // Hand arithmetic: ½(0.75)² + ½(0.25)² + ½·0.0625·2.
        assert!((m.total_objective(&[0.25]).unwrap() - 0.375).abs() < 1e-15);

        let loc = m.clone().with_localization(vec![0.3], 2.0).unwrap();
        let plain = m.total_objective(&[0.3]).unwrap();
        assert_eq!(loc.total_objective(&[0.3]).unwrap(), plain);
    }

    #[test]
    fn gradient_examples() {
        let m = LossModel::new(one(&[1.0], 0.0), 1.0).unwrap();
        assert_eq!(m.total_gradient(&[1.0]).unwrap(), vec![2.0]);

        let m = two_point();
        let theta = m.exact_minimizer().unwrap();
        assert!(linalg::norm2(&m.total_gradient(&theta).unwrap()) <= 1e-10);
    }

    #[test]
    fn exact_minimizer_examples() {
        let theta = two_point().exact_minimizer().unwrap();
        assert!((theta[0] - 0.25).abs() < 1e-15);

        let ds = Dataset::new(vec![vec![1.0, 2.0], vec![-1.0, 0.5]], vec![0.0, 0.0]).unwrap();
        let theta = LossModel::new(ds.clone(), 0.7).unwrap().exact_minimizer().unwrap();
        assert!(theta.iter().all(|t: &f64| t.abs() < 1e-15));

        let singular = LossModel::unregularized(ds);
        assert!(matches!(singular.exact_minimizer(), Err(Error::Singular(_))));
    }

    #[test]
    fn exact_minimizer_matches_gradient_descent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_model(&mut rng, 5, 3, 0.4);
        let exact = m.exact_minimizer().unwrap();

        // Oracle: plain gradient descent with step 1/L, L = trace of the Hessian.
        let h = m.hessian();
        let lip: f64 = (0..3).map(|i| h[i * 3 + i]).sum();
        let mut theta = vec![0.0; 3];
        for _ in 0..10_000 {
            let g = m.total_gradient(&theta).unwrap();
            linalg::axpy(-1.0 / lip, &g, &mut theta);
        }
        for (a, b) in exact.iter().zip(&theta) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn certify_examples() {
        let m = LossModel::new(one(&[1.0], 0.0), 1.0).unwrap();
        let b = m.certify_bounds(1.0, &[0.0]).unwrap();
        assert_eq!((b.lipschitz, b.smoothness, b.strong_convexity), (2.0, 2.0, 1.0));
        assert_eq!(b.condition_number(), 2.0);

        let ds = Dataset::new(vec![vec![3.0, 4.0], vec![1.0, 0.0]], vec![2.0, -7.0]).unwrap();
        let m: LossModel<f64> = LossModel::new(ds, 0.5).unwrap();
        let b = m.certify_bounds(1e-12, &[0.0, 0.0]).unwrap();
        assert!((b.lipschitz - 10.0).abs() < 1e-9);
        assert!(m.certify_bounds(0.0, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::<f64>::new(vec![], vec![]).is_err());
        assert!(Dataset::new(vec![vec![1.0], vec![1.0, 2.0]], vec![0.0, 0.0]).is_err());
        assert!(Dataset::new(vec![vec![f64::NAN]], vec![0.0]).is_err());
        assert!(Dataset::new(vec![vec![1.0]], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn single_precision_agrees() {
        let m32 = LossModel::new(two_point().dataset.cast::<f32>(), 1.0f32).unwrap();
        let theta = m32.exact_minimizer().unwrap();
        assert!((theta[0] - 0.25).abs() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn gradient_matches_finite_differences(seed in any::<u64>(), n in 1usize..8, d in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let alpha = rng.gen_range(0.1..2.0);
            let m = random_model(&mut rng, n, d, alpha)
                .with_localization((0..d).map(|_| rng.gen_range(-1.0..1.0)).collect(), 0.3)
                .unwrap();
            let theta: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let g = m.total_gradient(&theta).unwrap();
            let h = 1e-5;
            for j in 0..d {
                let mut up = theta.clone();
                let mut dn = theta.clone();
                up[j] += h;
                dn[j] -= h;
                let fd = (m.total_objective(&up).unwrap() - m.total_objective(&dn).unwrap()) / (2.0 * h);
                prop_assert!((fd - g[j]).abs() <= 1e-6 * g[j].abs().max(1.0), "coord {}: fd {} vs {}", j, fd, g[j]);
            }
        }

        #[test]
        fn minimizer_is_optimal(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_model(&mut rng, 6, 3, 0.5);
            let star = m.exact_minimizer().unwrap();
            prop_assert!(linalg::norm2(&m.total_gradient(&star).unwrap()) <= 1e-10);
            let best = m.total_objective(&star).unwrap();
            for _ in 0..100 {
                let t: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
                prop_assert!(best <= m.total_objective(&t).unwrap());
            }
        }

        #[test]
        fn strong_convexity_inequality(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let alpha = rng.gen_range(0.1..2.0);
            let m = random_model(&mut rng, 5, 2, alpha);
            let a: Vec<f64> = (0..2).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..2).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let diff = linalg::sub(&b, &a);
            let lower = m.total_objective(&a).unwrap()
                + linalg::dot(&m.total_gradient(&a).unwrap(), &diff)
                + 0.5 * 5.0 * alpha * linalg::dot(&diff, &diff);
            prop_assert!(m.total_objective(&b).unwrap() >= lower - 1e-9);
        }

        #[test]
        fn certified_lipschitz_holds(seed in any::<u64>(), radius in 0.1f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_model(&mut rng, 4, 3, 0.8);
            let center: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let bounds = m.certify_bounds(radius, &center).unwrap();
            let in_ball = |rng: &mut ChaCha8Rng| -> Vec<f64> {
                loop {
                    let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    if linalg::norm2(&v) <= 1.0 {
                        return center.iter().zip(v).map(|(c, u)| c + radius * u).collect();
                    }
                }
            };
            for _ in 0..20 {
                let (t1, t2) = (in_ball(&mut rng), in_ball(&mut rng));
                for i in 0..4 {
                    let gap = (m.per_sample_loss(&t1, i).unwrap() - m.per_sample_loss(&t2, i).unwrap()).abs();
                    prop_assert!(gap <= bounds.lipschitz * linalg::distance(&t1, &t2) * (1.0 + 1e-12) + 1e-12);
                }
            }
        }
    }
}
