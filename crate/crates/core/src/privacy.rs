//! Privacy budgets, composition, and Laplace/Gaussian noise.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure_positive, Error, Result};
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BudgetKind {
    /// ε-DP
    Pure,
    /// μ-GDP
    Gdp,
}

impl BudgetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BudgetKind::Pure => "pure",
            BudgetKind::Gdp => "gdp",
        }
    }
}

impl fmt::Display for BudgetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Norm used for sensitivities and W∞ distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Norm {
    L1,
    L2,
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Norm::L1 => "ℓ1",
            Norm::L2 => "ℓ2",
        })
    }
}

/// A pure ε-DP or μ-GDP budget. The value is always finite and positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget {
    kind: BudgetKind,
    value: f64,
}

impl PrivacyBudget {
    pub fn new(kind: BudgetKind, value: f64) -> Result<Self> {
        ensure_positive("budget", value)?;
        Ok(Self { kind, value })
    }

    pub fn pure(epsilon: f64) -> Result<Self> {
        Self::new(BudgetKind::Pure, epsilon)
    }

    pub fn gdp(mu: f64) -> Result<Self> {
        Self::new(BudgetKind::Gdp, mu)
    }

    pub fn kind(&self) -> BudgetKind {
        self.kind
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// Budget of each of `parts` equal stages that compose back to `self`:
    /// `ε/k` for pure DP, `μ/√k` for GDP.
    pub fn split_even(&self, parts: usize) -> Result<Self> {
        if parts == 0 {
            return Err(Error::param("parts", "must be ≥ 1"));
        }
        let k = parts as f64;
        let value = match self.kind {
            BudgetKind::Pure => self.value / k,
            BudgetKind::Gdp => self.value / k.sqrt(),
        };
        Self::new(self.kind, value)
    }
}

impl fmt::Display for PrivacyBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.value)
    }
}

/// Parses `pure:<ε>` or `gdp:<μ>`.
impl FromStr for PrivacyBudget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, value) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("budget `{s}` is not of the form kind:value")))?;
        let kind = match kind.trim().to_ascii_lowercase().as_str() {
            "pure" | "eps" | "epsilon" => BudgetKind::Pure,
            "gdp" | "mu" => BudgetKind::Gdp,
            other => return Err(Error::Config(format!("unknown budget kind `{other}`"))),
        };
        let value: f64 =
            value.trim().parse().map_err(|_| Error::Config(format!("budget value `{value}` is not a number")))?;
        PrivacyBudget::new(kind, value)
    }
}

/// Adaptive composition: `ε₁ + ε₂` for pure DP, `√(μ₁² + μ₂²)` for GDP.
pub fn compose(a: PrivacyBudget, b: PrivacyBudget) -> Result<PrivacyBudget> {
    if a.kind != b.kind {
        return Err(Error::BudgetKindMismatch(a.kind, b.kind));
    }
    let value = match a.kind {
        BudgetKind::Pure => a.value + b.value,
        BudgetKind::Gdp => a.value.hypot(b.value),
    };
    PrivacyBudget::new(a.kind, value)
}

/// Composes a non-empty sequence of same-kind budgets.
pub fn compose_all(budgets: &[PrivacyBudget]) -> Result<PrivacyBudget> {
    let (first, rest) = budgets.split_first().ok_or_else(|| Error::param("budgets", "nothing to compose"))?;
    rest.iter().try_fold(*first, |acc, &b| compose(acc, b))
}

/// μ such that an ε-DP mechanism is μ-GDP: `μ = 2Φ⁻¹(e^ε / (1 + e^ε))`.
pub fn pure_to_gdp(epsilon: f64) -> Result<f64> {
    ensure_positive("epsilon", epsilon)?;
    // e^ε/(1+e^ε) − ½ = tanh(ε/2)/2, exact to relative precision even for tiny ε.
    let offset = 0.5 * (0.5 * epsilon).tanh();
    if offset <= 0.5 - P_LOW {
        return Ok(2.0 * central_quantile(offset));
    }
    Ok(-2.0 * inverse_normal_cdf(1.0 / (1.0 + epsilon.exp())))
}

const P_LOW: f64 = 0.02425;

/// Standard normal quantile Φ⁻¹(p).
///
/// Acklam's rational approximation (relative error ≈ 1.15e-9) followed by one
/// Halley step against the complementary error function, giving ~1e-15
/// absolute accuracy on (0, 1).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    if p > 0.5 {
        return -inverse_normal_cdf(1.0 - p);
    }

    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00, 3.754408661907416e+00];

    if p >= P_LOW {
        return central_quantile(p - 0.5);
    }
    let q = (-2.0 * p.ln()).sqrt();
    let x = (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
        / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0);

    // Halley refinement on f(x) = Φ(x) − p.
    let cdf = 0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2);
    halley(x, cdf - p)
}

/// Φ⁻¹(½ + q) for |q| ≤ ½ − P_LOW, taking the offset from ½ directly so that
/// small offsets keep full relative precision.
#[allow(clippy::excessive_precision)]
fn central_quantile(q: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    let r = q * q;
    let x = (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
        / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0);
    // Φ(x) − ½ − q, with Φ(x) − ½ = erf(x/√2)/2.
    let gap = 0.5 * statrs::function::erf::erf(x / std::f64::consts::SQRT_2) - q;
    halley(x, gap)
}

/// One Halley step for Φ(x) = target given the residual `Φ(x) − target`.
fn halley(x: f64, residual: f64) -> f64 {
    let u = residual * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    x - u / (1.0 + x * u / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseFamily {
    /// i.i.d. Laplace(scale) per coordinate.
    LaplacePerCoord,
    /// N(0, scale² I).
    GaussianIsotropic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    pub scale: f64,
    pub dim: usize,
}

impl NoiseSpec {
    pub fn new(family: NoiseFamily, scale: f64, dim: usize) -> Result<Self> {
        ensure_positive("noise scale", scale)?;
        Ok(Self { family, scale, dim })
    }

    pub fn laplace(scale: f64, dim: usize) -> Result<Self> {
        Self::new(NoiseFamily::LaplacePerCoord, scale, dim)
    }

    pub fn gaussian(scale: f64, dim: usize) -> Result<Self> {
        Self::new(NoiseFamily::GaussianIsotropic, scale, dim)
    }
}

/// Draws one noise vector.
///
/// Laplace variates come from the inverse CDF of a uniform on (−½, ½);
/// Gaussian variates from `rand_distr::StandardNormal` (ziggurat). Both are
/// deterministic given the stream state.
pub fn sample_noise(spec: &NoiseSpec, rng: &mut Stream) -> Vec<f64> {
    (0..spec.dim)
        .map(|_| match spec.family {
            NoiseFamily::LaplacePerCoord => spec.scale * standard_laplace(rng),
            NoiseFamily::GaussianIsotropic => {
                let z: f64 = rng.sample(StandardNormal);
                spec.scale * z
            }
        })
        .collect()
}

fn standard_laplace(rng: &mut Stream) -> f64 {
    // u ∈ (−½, ½); reject the endpoint that would give ln(0).
    let u = loop {
        let u: f64 = rng.gen::<f64>() - 0.5;
        if u != -0.5 {
            break u;
        }
    };
    -u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Noise calibrated to a sensitivity.
///
/// * pure, ℓ2 sensitivity: Laplace with scale `√d · s / ε`;
/// * pure, ℓ1 sensitivity: Laplace with scale `s / ε`;
/// * GDP: Gaussian with standard deviation `s / μ`.
pub fn calibrate(sensitivity: f64, budget: PrivacyBudget, norm: Norm, dim: usize) -> Result<NoiseSpec> {
    ensure_positive("sensitivity", sensitivity)?;
    match budget.kind() {
        BudgetKind::Pure => {
            let lift = match norm {
                Norm::L1 => 1.0,
                Norm::L2 => (dim as f64).sqrt(),
            };
            NoiseSpec::laplace(lift * sensitivity / budget.value(), dim)
        }
        BudgetKind::Gdp => NoiseSpec::gaussian(sensitivity / budget.value(), dim),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    /// Quantile by bisection on the normal CDF; independent of the rational
    /// approximation.
    fn bisect_quantile(p: f64) -> f64 {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let (mut lo, mut hi) = (-40.0f64, 40.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            // Upper tail via the survival function: 1 − p is exact for p ≥ ½.
            let below = if p > 0.5 { normal.sf(mid) > 1.0 - p } else { normal.cdf(mid) < p };
            if below {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn quantile_matches_bisection() {
        for &p in &[1e-300, 1e-12, 1e-4, 0.02425, 0.1, 0.3, 0.5, 0.731_058_578_630_004_9, 0.9, 0.999_999] {
            let ours = inverse_normal_cdf(p);
            let oracle = bisect_quantile(p);
            assert!((ours - oracle).abs() <= 1e-12 * oracle.abs().max(1.0), "p={p}: {ours} vs {oracle}");
        }
        assert_eq!(inverse_normal_cdf(0.5), 0.0);
    }

    #[test]
    fn conversion_examples() {
        // 40-digit reference: 2·√2·erfinv(2e/(1+e) − 1).
        let mu1 = pure_to_gdp(1.0).unwrap();
        assert!((mu1 - 1.232_035_385_344_901).abs() < 1e-12, "{mu1}");
        assert!(pure_to_gdp(2.0).unwrap() > mu1);
        let small = pure_to_gdp(1e-6).unwrap();
        assert!((small - 1.253_314_137_315_478e-6).abs() < 1e-18);
        assert!(pure_to_gdp(0.0).is_err());
        assert!(pure_to_gdp(-1.0).is_err());
    }

    #[test]
    fn composition_examples() {
        let p = compose(PrivacyBudget::pure(1.0).unwrap(), PrivacyBudget::pure(2.0).unwrap()).unwrap();
        assert_eq!(p, PrivacyBudget::pure(3.0).unwrap());
        let g = compose(PrivacyBudget::gdp(1.0).unwrap(), PrivacyBudget::gdp(2.0).unwrap()).unwrap();
        assert_eq!(g.kind(), BudgetKind::Gdp);
        assert!((g.value() - 5f64.sqrt()).abs() < 1e-15);

        let x = PrivacyBudget::pure(0.7).unwrap();
        let tiny = PrivacyBudget::pure(1e-300).unwrap();
        assert_eq!(compose(x, tiny).unwrap(), x);
        let y = PrivacyBudget::gdp(0.7).unwrap();
        assert_eq!(compose(y, PrivacyBudget::gdp(1e-300).unwrap()).unwrap(), y);

        assert!(matches!(compose(x, y), Err(Error::BudgetKindMismatch(..))));
    }

    #[test]
    fn split_recomposes() {
        for b in [PrivacyBudget::pure(3.0).unwrap(), PrivacyBudget::gdp(3.0).unwrap()] {
            let part = b.split_even(3).unwrap();
            let back = compose_all(&[part, part, part]).unwrap();
            assert!((back.value() - b.value()).abs() < 1e-14);
        }
    }

    #[test]
    fn budget_parsing() {
        assert_eq!("pure:1.5".parse::<PrivacyBudget>().unwrap(), PrivacyBudget::pure(1.5).unwrap());
        assert_eq!(" gdp : 2 ".parse::<PrivacyBudget>().unwrap(), PrivacyBudget::gdp(2.0).unwrap());
        assert!("pure:-1".parse::<PrivacyBudget>().is_err());
        assert!("renyi:1".parse::<PrivacyBudget>().is_err());
        assert!("1.0".parse::<PrivacyBudget>().is_err());
    }

    #[test]
    fn calibration_examples() {
        let s = calibrate(0.03, PrivacyBudget::pure(1.0).unwrap(), Norm::L2, 4).unwrap();
        assert_eq!(s.family, NoiseFamily::LaplacePerCoord);
        assert!((s.scale - 0.06).abs() < 1e-15);
        let s = calibrate(0.2, PrivacyBudget::pure(1.0).unwrap(), Norm::L1, 3).unwrap();
        assert!((s.scale - 0.2).abs() < 1e-15);
        let s = calibrate(0.2, PrivacyBudget::gdp(0.5).unwrap(), Norm::L2, 3).unwrap();
        assert_eq!(s.family, NoiseFamily::GaussianIsotropic);
        assert!((s.scale - 0.4).abs() < 1e-15);
        assert!(calibrate(0.0, PrivacyBudget::gdp(0.5).unwrap(), Norm::L2, 3).is_err());
        assert!(NoiseSpec::laplace(-1.0, 2).is_err());
    }

    #[test]
    fn vanishing_scale_gives_zero_noise() {
        let mut rng = stream(3);
        for family in [NoiseFamily::LaplacePerCoord, NoiseFamily::GaussianIsotropic] {
            let z = sample_noise(&NoiseSpec::new(family, 1e-300, 5).unwrap(), &mut rng);
            assert!(z.iter().all(|v| v.abs() < 1e-290));
        }
    }

    #[test]
    fn laplace_mean_absolute_value() {
        let b = 0.7;
        let mut rng = stream(21);
        let z = sample_noise(&NoiseSpec::laplace(b, 1_000_000).unwrap(), &mut rng);
        let mean_abs = z.iter().map(|v| v.abs()).sum::<f64>() / z.len() as f64;
        assert!((mean_abs / b - 1.0).abs() < 0.01, "{mean_abs}");
    }

    #[test]
    fn gaussian_variance() {
        let sigma = 1.3;
        let mut rng = stream(22);
        let z = sample_noise(&NoiseSpec::gaussian(sigma, 1_000_000).unwrap(), &mut rng);
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (z.len() - 1) as f64;
        assert!((var / (sigma * sigma) - 1.0).abs() < 0.01, "{var}");
    }

    #[test]
    fn laplace_density_ratio_bounded() {
        // Laplace mechanism in 1-d: shift s, scale s/ε.
        let (s, eps) = (0.8, 0.9);
        let b = s / eps;
        let density = |o: f64, m: f64| (-(o - m).abs() / b).exp() / (2.0 * b);
        for k in 0..=4000 {
            let o = -10.0 + 20.0 * k as f64 / 4000.0;
            for &shift in &[0.0, 0.3 * s, s, -s] {
                let ratio = density(o, 0.0) / density(o, shift);
                assert!(ratio <= eps.exp() * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn gaussian_log_likelihood_ratio_statistic() {
        // Shift s with σ = s/μ: LLR under the null is N(μ²/2, μ²).
        let (s, mu) = (0.5, 1.2);
        let sigma = s / mu;
        let mut rng = stream(23);
        let z = sample_noise(&NoiseSpec::gaussian(sigma, 1_000_000).unwrap(), &mut rng);
        let llr: Vec<f64> = z.iter().map(|&o| ((o - s).powi(2) - o.powi(2)) / (2.0 * sigma * sigma)).collect();
        let mean = llr.iter().sum::<f64>() / llr.len() as f64;
        let var = llr.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (llr.len() - 1) as f64;
        assert!((mean / (mu * mu / 2.0) - 1.0).abs() < 0.02, "{mean}");
        assert!((var / (mu * mu) - 1.0).abs() < 0.02, "{var}");
    }

    proptest! {
        #[test]
        fn compose_commutative_associative(
            kind in prop_oneof![Just(BudgetKind::Pure), Just(BudgetKind::Gdp)],
            va in 1e-3f64..50.0,
            vb in 1e-3f64..50.0,
            vc in 1e-3f64..50.0,
        ) {
            let [a, b, c] = [va, vb, vc].map(|v| PrivacyBudget::new(kind, v).unwrap());
            let ab = compose(a, b).unwrap().value();
            let ba = compose(b, a).unwrap().value();
            prop_assert!((ab - ba).abs() <= 1e-12 * ab);
            let left = compose(compose(a, b).unwrap(), c).unwrap().value();
            let right = compose(a, compose(b, c).unwrap()).unwrap().value();
            prop_assert!((left - right).abs() <= 1e-12 * left);
        }

        #[test]
        fn conversion_is_monotone(a in 1e-4f64..20.0, b in 1e-4f64..20.0) {
            prop_assume!(a < b);
            prop_assert!(pure_to_gdp(a).unwrap() < pure_to_gdp(b).unwrap());
        }
    }
}
