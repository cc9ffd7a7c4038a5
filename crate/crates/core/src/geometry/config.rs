use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use super::symmetry::{fraction_of_turn, reduce_angle};
use super::Point4;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConfigKind {
    Ring,
    Torus,
}

/// Bubble placement: a regular k-gon (ring) or q linked k-gons on great
/// circles of the sphere of radius ρ (torus), with δ² + ρ² = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConfigSpec", into = "ConfigSpec")]
pub struct Configuration {
    pub kind: ConfigKind,
    pub k: usize,
    pub q: usize,
    pub delta: f64,
    pub rho: f64,
    /// Sheet-major: center (ℓ, r) sits at index (r−1)·k + (ℓ−1).
    pub centers: Vec<Point4>,
}

/// Serialized form; ρ and the centers are derived on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigSpec {
    pub kind: ConfigKind,
    pub k: usize,
    #[serde(default = "one")]
    pub q: usize,
    pub delta: f64,
}

fn one() -> usize {
    1
}

impl TryFrom<ConfigSpec> for Configuration {
    type Error = Error;
    fn try_from(s: ConfigSpec) -> Result<Self> {
        match s.kind {
            ConfigKind::Ring => {
                if s.q != 1 {
                    return Err(Error::InvalidConfiguration(format!(
                        "ring configuration requires q = 1, got {}",
                        s.q
                    )));
                }
                Configuration::ring(s.k, s.delta)
            }
            ConfigKind::Torus => Configuration::torus(s.k, s.q, s.delta),
        }
    }
}

impl From<Configuration> for ConfigSpec {
    fn from(c: Configuration) -> Self {
        ConfigSpec {
            kind: c.kind,
            k: c.k,
            q: c.q,
            delta: c.delta,
        }
    }
}

fn check_delta(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidConfiguration(format!(
            "delta must lie in (0,1), got {delta}"
        )));
    }
    Ok((1.0 - delta * delta).sqrt())
}

fn ring_points(k: usize, rho: f64) -> Vec<Point4> {
    (0..k)
        .map(|i| {
            let (s, c) = fraction_of_turn(i as i64, k as i64).sin_cos();
            Point4::new(rho * c, rho * s, 0.0, 0.0)
        })
        .collect()
}

/// ξᵢ = ρ(cos 2π(i−1)/k, sin 2π(i−1)/k, 0, 0), i = 1..k.
pub fn ring_centers(k: usize, rho: f64) -> Result<Vec<Point4>> {
    if k < 2 {
        return Err(Error::InvalidConfiguration(format!(
            "ring needs k >= 2, got {k}"
        )));
    }
    Ok(ring_points(k, rho))
}

/// Centers ξ̃ₗʳ of sheet `r` (1-based), ℓ = 1..k.
pub fn torus_centers(k: usize, q: usize, r: usize, rho: f64) -> Result<Vec<Point4>> {
    if k < 2 || k % 2 != 0 {
        return Err(Error::InvalidConfiguration(format!(
            "torus needs an even k >= 2, got {k}"
        )));
    }
    if q < 1 || r < 1 || r > q {
        return Err(Error::InvalidIndex(format!("sheet {r} of q = {q}")));
    }
    let s = rho * FRAC_1_SQRT_2;
    let shift = PI * (r as f64 - 1.0) / q as f64;
    Ok((0..k)
        .map(|l| {
            let a = fraction_of_turn(l as i64, k as i64);
            let (s1, c1) = reduce_angle(a - shift).sin_cos();
            let (s2, c2) = reduce_angle(a + shift).sin_cos();
            Point4::new(s * c1, s * s1, s * c2, s * s2)
        })
        .collect())
}

impl Configuration {
    pub fn ring(k: usize, delta: f64) -> Result<Self> {
        let rho = check_delta(delta)?;
        let centers = ring_centers(k, rho)?;
        Ok(Configuration {
            kind: ConfigKind::Ring,
            k,
            q: 1,
            delta,
            rho,
            centers,
        })
    }

    pub fn torus(k: usize, q: usize, delta: f64) -> Result<Self> {
        let rho = check_delta(delta)?;
        if q < 1 {
            return Err(Error::InvalidConfiguration("torus needs q >= 1".into()));
        }
        let mut centers = Vec::with_capacity(k * q);
        for r in 1..=q {
            centers.extend(torus_centers(k, q, r, rho)?);
        }
        Ok(Configuration {
            kind: ConfigKind::Torus,
            k,
            q,
            delta,
            rho,
            centers,
        })
    }

    /// A single bubble at (ρ,0,0,0). Test oracle only: the public
    /// constructors require k ≥ 2.
    #[doc(hidden)]
    pub fn degenerate_single(delta: f64) -> Result<Self> {
        let rho = check_delta(delta)?;
        Ok(Configuration {
            kind: ConfigKind::Ring,
            k: 1,
            q: 1,
            delta,
            rho,
            centers: ring_points(1, rho),
        })
    }

    /// Component count of the associated system.
    pub fn m(&self) -> usize {
        match self.kind {
            ConfigKind::Ring => 2,
            ConfigKind::Torus => self.q + 1,
        }
    }

    /// Centers of sheet `r` (1-based); the ring has a single sheet.
    pub fn sheet(&self, r: usize) -> &[Point4] {
        &self.centers[(r - 1) * self.k..r * self.k]
    }

    /// Center ξ̃ₗʳ with 1-based ℓ and r.
    pub fn center(&self, l: usize, r: usize) -> Result<Point4> {
        if l < 1 || l > self.k || r < 1 || r > self.q {
            return Err(Error::InvalidIndex(format!(
                "center (l={l}, r={r}) with k={}, q={}",
                self.k, self.q
            )));
        }
        Ok(self.centers[(r - 1) * self.k + (l - 1)])
    }

    /// Smallest pairwise distance between centers (2 when there is one center).
    pub fn min_center_distance(&self) -> f64 {
        min_pairwise_distance(&self.centers).unwrap_or(2.0)
    }

    /// Checks the invariants listed on the type.
    pub fn validate(&self) -> Result<()> {
        if (self.delta * self.delta + self.rho * self.rho - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfiguration("delta^2 + rho^2 != 1".into()));
        }
        if self.kind == ConfigKind::Torus && self.k % 2 != 0 {
            return Err(Error::InvalidConfiguration("torus k must be even".into()));
        }
        for c in &self.centers {
            if !c.is_finite() || (c.norm() - self.rho).abs() > 1e-12 {
                return Err(Error::InvalidConfiguration(format!(
                    "center {c:?} is not on the sphere of radius rho"
                )));
            }
        }
        if self.centers.len() > 1 && self.min_center_distance() <= 1e-12 {
            return Err(Error::InvalidConfiguration("coincident centers".into()));
        }
        Ok(())
    }
}

pub(crate) fn min_pairwise_distance(points: &[Point4]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = points[i].dist_sq(&points[j]).sqrt();
            best = Some(best.map_or(d, |b: f64| b.min(d)));
        }
    }
    best
}

/// |ξ̃ᵢʳ − ξ̃ⱼˢ|² = 2ρ²(1 − cos((r−s)π/q)·cos(2π(i−j)/k)), 1-based indices.
///
/// The ρ² factor is kept; the identity without it only holds on the unit
/// sphere.
pub fn pair_distance_sq(config: &Configuration, i: usize, j: usize, r: usize, s: usize) -> Result<f64> {
    let (k, q) = (config.k, config.q);
    for (name, v, hi) in [("i", i, k), ("j", j, k), ("r", r, q), ("s", s, q)] {
        if v < 1 || v > hi {
            return Err(Error::InvalidIndex(format!("{name} = {v} outside 1..={hi}")));
        }
    }
    let a = PI * (r as f64 - s as f64) / q as f64;
    let b = fraction_of_turn(i as i64 - j as i64, k as i64);
    let rho2 = config.rho * config.rho;
    Ok(2.0 * rho2 * (1.0 - a.cos() * b.cos()))
}

/// Σ_{j=2}^k 1/|ξ₁ − ξⱼ|² for the regular k-gon of radius ρ.
///
/// Summed in closed pairs 1/(2ρ²(1 − cos 2πj/k)) = 1/(4ρ² sin²(πj/k)).
pub fn lattice_sum(k: usize, rho: f64) -> Result<f64> {
    if k < 2 || rho <= 0.0 {
        return Err(Error::Domain(format!("lattice_sum needs k >= 2, rho > 0 (k={k}, rho={rho})")));
    }
    let mut terms: Vec<f64> = (1..k)
        .map(|j| {
            let s = (PI * j as f64 / k as f64).sin();
            1.0 / (4.0 * rho * rho * s * s)
        })
        .collect();
    // small terms first
    terms.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(crate::quadrature::neumaier_sum(terms.iter().copied()))
}

/// Closed form (k² − 1)/(12ρ²).
pub fn lattice_sum_closed_form(k: usize, rho: f64) -> f64 {
    let k = k as f64;
    (k * k - 1.0) / (12.0 * rho * rho)
}

/// The torus analogue Σ_{j=2}^k 1/|ξ̃₁ − ξ̃ⱼ|² within sheet 1, summed from
/// the explicit centers.
pub fn torus_lattice_sum(config: &Configuration) -> f64 {
    let sheet = config.sheet(1);
    let terms = sheet[1..].iter().map(|c| 1.0 / sheet[0].dist_sq(c));
    crate::quadrature::neumaier_sum(terms)
}
