//! Closed-form excess empirical risk rates and sweeps over them.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{ensure_positive, Error, Result};
use crate::privacy::pure_to_gdp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Pure,
    Gdp,
    Approx,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::Pure, Regime::Gdp, Regime::Approx];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Pure => "pure",
            Regime::Gdp => "gdp",
            Regime::Approx => "approx",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pure" => Ok(Regime::Pure),
            "gdp" => Ok(Regime::Gdp),
            "approx" => Ok(Regime::Approx),
            other => Err(Error::Config(format!("unknown regime `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateQuery {
    pub regime: Regime,
    pub d: usize,
    pub n: usize,
    pub g: f64,
    pub alpha: f64,
    /// ε for `pure`/`approx`, μ for `gdp`.
    pub budget: f64,
    /// δ for `approx`; defaults to `1/n`.
    pub delta: Option<f64>,
}

/// `d²G²/(αnε²)`, `dG²/(αnμ²)` or `dG² ln(1/δ)/(αnε²)`.
pub fn excess_risk_rate(q: &RateQuery) -> Result<f64> {
    if q.d == 0 || q.n == 0 {
        return Err(Error::param("d, n", "must be ≥ 1"));
    }
    ensure_positive("G", q.g)?;
    ensure_positive("alpha", q.alpha)?;
    ensure_positive("budget", q.budget)?;
    let (d, n) = (q.d as f64, q.n as f64);
    let base = q.g * q.g / (q.alpha * n * q.budget * q.budget);
    Ok(match q.regime {
        Regime::Pure => d * d * base,
        Regime::Gdp => d * base,
        Regime::Approx => {
            let delta = q.delta.unwrap_or(1.0 / n);
            if !(delta > 0.0 && delta < 1.0) {
                return Err(Error::param("delta", format!("must lie in (0, 1), got {delta}")));
            }
            d * (1.0 / delta).ln() * base
        }
    })
}

/// Shared constants of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateTemplate {
    pub d: usize,
    pub n: usize,
    pub g: f64,
    pub alpha: f64,
    pub epsilon: f64,
    /// μ for the `gdp` regime; defaults to the GDP equivalent of ε.
    pub mu: Option<f64>,
    pub delta: Option<f64>,
}

impl RateTemplate {
    fn query(&self, regime: Regime) -> Result<RateQuery> {
        let budget = match regime {
            Regime::Gdp => match self.mu {
                Some(mu) => mu,
                None => pure_to_gdp(self.epsilon)?,
            },
            _ => self.epsilon,
        };
        Ok(RateQuery { regime, d: self.d, n: self.n, g: self.g, alpha: self.alpha, budget, delta: self.delta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    N,
    /// The regime's own budget parameter (ε, or μ for `gdp`).
    Budget,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub axis: f64,
    pub regime: Regime,
    pub rate: f64,
}

/// One row per regime and point, regimes outermost.
pub fn sweep(template: &RateTemplate, axis: SweepAxis, points: &[f64], regimes: &[Regime]) -> Result<Vec<RateRow>> {
    if points.is_empty() {
        return Err(Error::param("points", "need at least one point"));
    }
    let mut rows = Vec::with_capacity(points.len() * regimes.len());
    for &regime in regimes {
        let base = template.query(regime)?;
        for &x in points {
            let mut q = base;
            match axis {
                SweepAxis::N => {
                    if !(x >= 1.0 && x.fract() == 0.0 && x.is_finite()) {
                        return Err(Error::param("n", format!("sample sizes must be positive integers, got {x}")));
                    }
                    q.n = x as usize;
                }
                SweepAxis::Budget => q.budget = x,
            }
            rows.push(RateRow { axis: x, regime, rate: excess_risk_rate(&q)? });
        }
    }
    Ok(rows)
}

/// CSV with header `axis,regime,rate`.
pub fn write_rates_csv<W: Write>(rows: &[RateRow], mut out: W) -> Result<()> {
    writeln!(out, "axis,regime,rate")?;
    for r in rows {
        writeln!(out, "{},{},{:.16e}", r.axis, r.regime, r.rate)?;
    }
    Ok(())
}
