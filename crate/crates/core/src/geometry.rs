//! Certification math for the TV → W∞ conversion.
//!
//! The accuracy ξ the sampler must reach is exponentially small in the
//! dimension, so every quantity is carried in log-space ([`LogScaled`]) and
//! only exponentiated for display.

use statrs::function::gamma::ln_gamma;
use std::f64::consts::{LN_2, PI};

use crate::erm::LossModel;
use crate::error::{ensure_positive, Error, Result};
use crate::linalg;
use crate::privacy::Norm;
use crate::RegularityBounds;

/// A positive quantity stored as its natural log. `value` is `exp(ln)` and
/// may be 0 or ∞ when not representable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogScaled {
    pub ln: f64,
    pub value: f64,
}

impl LogScaled {
    pub fn from_ln(ln: f64) -> Self {
        Self { ln, value: ln.exp() }
    }

    pub fn from_value(value: f64) -> Result<Self> {
        ensure_positive("value", value)?;
        Ok(Self { ln: value.ln(), value })
    }
}

/// Sampling domain `B(center, radius)`; `inner_radius_req` is the radius R₁
/// the sampler's mixing guarantee asks to fit around the minimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainBall {
    pub center: Vec<f64>,
    pub radius: f64,
    pub inner_radius_req: f64,
}

impl DomainBall {
    pub fn new(center: Vec<f64>, radius: f64, inner_radius_req: f64) -> Result<Self> {
        ensure_positive("radius", radius)?;
        if !(inner_radius_req >= 0.0) {
            return Err(Error::param("inner_radius_req", "must be ≥ 0"));
        }
        Ok(Self { center, radius, inner_radius_req })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        linalg::distance(theta, &self.center) <= self.radius
    }

    /// Whether `B(point, R₁)` fits inside the ball.
    pub fn covers_inner_ball(&self, point: &[f64]) -> bool {
        linalg::distance(point, &self.center) + self.inner_radius_req <= self.radius
    }
}

/// Quantities fed into the sampler schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certification {
    pub p_min: LogScaled,
    /// Target TV accuracy ξ.
    pub xi: LogScaled,
    /// W∞ accuracy Δ.
    pub delta_winf: f64,
    pub norm: Norm,
}

impl Certification {
    pub fn new(p_min: LogScaled, delta_winf: f64, d: usize, norm: Norm) -> Result<Self> {
        let xi = tv_threshold(p_min, delta_winf, d, norm)?;
        Ok(Self { p_min, xi, delta_winf, norm })
    }
}

/// ln of the volume of the unit d-ball, `(d/2) ln π − ln Γ(d/2 + 1)`.
fn ln_unit_ball_volume(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    half * PI.ln() - ln_gamma(half + 1.0)
}

/// Volume `π^{d/2} r^d / Γ(d/2 + 1)` of a d-ball.
pub fn ball_volume(d: usize, r: f64) -> Result<LogScaled> {
    if d == 0 {
        return Err(Error::param("d", "must be ≥ 1"));
    }
    ensure_positive("r", r)?;
    Ok(LogScaled::from_ln(ln_unit_ball_volume(d) + d as f64 * r.ln()))
}

/// Lower bound on the density of `∝ exp(−γJ) 1{‖θ − θ₀‖ ≤ B}`.
///
/// Two bounds hold for J = Σℓ_i + (λ/2)‖θ − θ₀‖²:
/// the Lipschitz one, exponent `γ(2nGB + 2λB²)`, and the smooth one,
/// exponent `γ(2B‖∇J(probe)‖ + 2(nβ + λ)B²)` for any probe in the ball. The
/// smaller exponent wins. Both share the factor `Γ(d/2+1) / (π^{d/2} B^d)`,
/// the reciprocal of the ball volume.
pub fn p_min_lower_bound(
    gamma: f64,
    model: &LossModel<f64>,
    bounds: &RegularityBounds,
    ball: &DomainBall,
    probe: &[f64],
) -> Result<LogScaled> {
    if !(gamma >= 0.0) {
        return Err(Error::param("gamma", "must be ≥ 0"));
    }
    if probe.len() != ball.dim() {
        return Err(Error::DimensionMismatch { expected: ball.dim(), actual: probe.len() });
    }
    if !ball.contains(probe) {
        return Err(Error::OutsideDomain { distance: linalg::distance(probe, &ball.center), radius: ball.radius });
    }
    let n = model.n() as f64;
    let b = ball.radius;
    let lambda = model.reg_lambda;
    let grad_norm = linalg::norm2(&model.total_gradient(probe)?);

    let lipschitz_branch = 2.0 * n * bounds.lipschitz * b + 2.0 * lambda * b * b;
    let smooth_branch = 2.0 * b * grad_norm + 2.0 * (n * bounds.smoothness + lambda) * b * b;
    let exponent = lipschitz_branch.min(smooth_branch);

    let ln_volume = ball_volume(ball.dim(), b)?.ln;
    // γ = 0 must give exactly the uniform density even if the exponent is huge.
    let decay = if gamma == 0.0 { 0.0 } else { gamma * exponent };
    Ok(LogScaled::from_ln(-decay - ln_volume))
}

/// TV accuracy ξ below which W∞ ≤ Δ for densities bounded below by `p_min`
/// on a 2-norm ball:
///
/// `ξ = p_min π^{d/2} Δ^d / (2^{d+1} Γ(d/2+1))`, divided further by
/// `d^{d/2}` when W∞ is measured in ℓ1.
pub fn tv_threshold(p_min: LogScaled, delta: f64, d: usize, norm: Norm) -> Result<LogScaled> {
    ensure_positive("delta", delta)?;
    if d == 0 {
        return Err(Error::param("d", "must be ≥ 1"));
    }
    let df = d as f64;
    let mut ln = p_min.ln + ln_unit_ball_volume(d) + df * delta.ln() - (df + 1.0) * LN_2;
    if norm == Norm::L1 {
        ln -= 0.5 * df * df.ln();
    }
    Ok(LogScaled::from_ln(ln))
}

/// W∞ between two distributions on a shared uniform 1-d grid, in grid units
/// times `spacing`.
///
/// Uses the expansion criterion `W∞(P, Q) ≤ r ⇔ P(U) ≤ Q(U^r)` for all sets U.
/// On a line it is enough to check intervals: if the r-expansions of two
/// intervals of U overlap, both sit inside their hull and the hull's
/// condition implies theirs. The smallest admissible lattice radius is found
/// by bisection, each probe checking all O(N²) index intervals.
pub fn winf_oracle_grid(p: &[f64], q: &[f64], spacing: f64) -> Result<f64> {
    const MASS_TOL: f64 = 1e-12;
    if p.len() != q.len() || p.is_empty() {
        return Err(Error::MassMismatch(format!("grids differ in length ({} vs {})", p.len(), q.len())));
    }
    ensure_positive("spacing", spacing)?;
    for (name, m) in [("p", p), ("q", q)] {
        let total: f64 = m.iter().sum();
        if (total - 1.0).abs() > MASS_TOL || m.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::MassMismatch(format!("{name} sums to {total}")));
        }
    }

    let prefix = |m: &[f64]| {
        let mut acc = vec![0.0; m.len() + 1];
        for (i, &v) in m.iter().enumerate() {
            acc[i + 1] = acc[i] + v;
        }
        acc
    };
    let (cp, cq) = (prefix(p), prefix(q));
    let len = p.len();
    let feasible = |m: usize| {
        for i in 0..len {
            if p[i] == 0.0 {
                continue;
            }
            for j in i..len {
                let lo = i.saturating_sub(m);
                let hi = (j + m).min(len - 1);
                if cp[j + 1] - cp[i] > cq[hi + 1] - cq[lo] + MASS_TOL {
                    return false;
                }
            }
        }
        true
    };

    let (mut lo, mut hi) = (0usize, len - 1);
    if feasible(0) {
        return Ok(0.0);
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi as f64 * spacing)
}
