use serde::Serialize;

use super::{bubble_profile, cube_excess, standard_bubble, BubbleSum, KernelSum};
use crate::error::{Error, Result};
use crate::field::{field_fn, Field, PeakLayout, ScalarField, SymmetryTag};
use crate::geometry::{ConfigKind, Configuration, Point4, SymmetryOp};

/// A configuration with its couplings: β between the bubble families and the
/// radial component, α between bubble families (torus only).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnsatzFamily {
    pub config: Configuration,
    pub beta: f64,
    pub alpha: f64,
    pub m: usize,
}

impl AnsatzFamily {
    /// Requires β < 0; α is ignored (set to 0) for the ring.
    pub fn new(config: Configuration, beta: f64, alpha: f64) -> Result<Self> {
        if !(beta < 0.0) {
            return Err(Error::Domain(format!("beta must be negative, got {beta}")));
        }
        Self::build(config, beta, alpha)
    }

    pub fn ring(k: usize, delta: f64, beta: f64) -> Result<Self> {
        Self::new(Configuration::ring(k, delta)?, beta, 0.0)
    }

    pub fn torus(k: usize, q: usize, delta: f64, beta: f64, alpha: f64) -> Result<Self> {
        Self::new(Configuration::torus(k, q, delta)?, beta, alpha)
    }

    /// The uncoupled limit β = 0, used by oracle checks.
    pub fn decoupled(config: Configuration, alpha: f64) -> Result<Self> {
        Self::build(config, 0.0, alpha)
    }

    fn build(config: Configuration, beta: f64, alpha: f64) -> Result<Self> {
        if !beta.is_finite() || !alpha.is_finite() {
            return Err(Error::Domain("couplings must be finite".into()));
        }
        let alpha = match config.kind {
            ConfigKind::Ring => 0.0,
            ConfigKind::Torus => alpha,
        };
        let m = config.m();
        Ok(AnsatzFamily {
            config,
            beta,
            alpha,
            m,
        })
    }

    /// Same family with another β (no sign check).
    pub fn with_beta(&self, beta: f64) -> Self {
        let mut f = self.clone();
        f.beta = beta;
        f
    }

    pub fn delta(&self) -> f64 {
        self.config.delta
    }

    pub fn k(&self) -> usize {
        self.config.k
    }

    /// Number of bubble sheets (1 for the ring).
    pub fn sheets(&self) -> usize {
        self.config.q
    }

    pub fn is_torus(&self) -> bool {
        self.config.kind == ConfigKind::Torus
    }

    /// The rotation invariance shared by every ansatz-derived integrand.
    pub fn tag(&self) -> SymmetryTag {
        match self.config.kind {
            ConfigKind::Ring if self.config.k >= 2 => SymmetryTag::Ring { k: self.config.k },
            ConfigKind::Ring => SymmetryTag::None,
            ConfigKind::Torus => SymmetryTag::Torus { k: self.config.k },
        }
    }

    pub fn peaks(&self) -> PeakLayout {
        PeakLayout::new(self.config.centers.clone(), self.config.delta)
    }

    /// Σₗ U_{δ,ξ̃ₗʳ}(x) for sheet r (1-based).
    #[inline]
    pub fn sheet_value(&self, r: usize, x: &Point4) -> f64 {
        let d = self.config.delta;
        self.config
            .sheet(r)
            .iter()
            .map(|c| bubble_profile(d, x.dist_sq(c)))
            .sum()
    }

    /// Ṽ³ − Σₗ U³_{δ,ξ̃ₗʳ} for sheet r, evaluated without cancellation.
    #[inline]
    pub fn sheet_cube_excess(&self, r: usize, x: &Point4) -> f64 {
        let d = self.config.delta;
        let vals: Vec<f64> = self
            .config
            .sheet(r)
            .iter()
            .map(|c| bubble_profile(d, x.dist_sq(c)))
            .collect();
        cube_excess(&vals)
    }

    /// The bubble sum of sheet 1 with its exact Laplacian.
    pub fn bubble_sum(&self) -> BubbleSum {
        BubbleSum {
            delta: self.config.delta,
            centers: self.config.sheet(1).to_vec(),
            tag: self.tag(),
        }
    }

    /// Z = Σᵢ Z⁰_{δ,ξᵢ} over sheet 1 (Z̃ for the torus).
    pub fn kernel_sum(&self) -> KernelSum {
        KernelSum {
            delta: self.config.delta,
            centers: self.config.sheet(1).to_vec(),
            tag: self.tag(),
        }
    }

    /// Ansatz quantities at a point.
    pub fn local(&self, x: &Point4) -> LocalAnsatz {
        let q = self.sheets();
        let sheets = (1..=q).map(|r| self.sheet_value(r, x)).collect();
        LocalAnsatz {
            u: standard_bubble(x),
            sheets,
            cross: self.sheet_cube_excess(1, x),
        }
    }
}

/// U, the sheet sums Ṽᵣ and Ṽ³ − ΣU³ at one point.
#[derive(Debug, Clone)]
pub struct LocalAnsatz {
    pub u: f64,
    pub sheets: Vec<f64>,
    pub cross: f64,
}

impl LocalAnsatz {
    pub fn v(&self) -> f64 {
        self.sheets[0]
    }

    /// Σ_{r≥2} Ṽᵣ².
    pub fn other_sheets_sq(&self) -> f64 {
        self.sheets[1..].iter().map(|v| v * v).sum()
    }

    pub fn all_sheets_sq(&self) -> f64 {
        self.sheets.iter().map(|v| v * v).sum()
    }
}

fn check_component(family: &AnsatzFamily, component: usize) -> Result<()> {
    if component < 1 || component > family.m {
        return Err(Error::InvalidIndex(format!(
            "component {component} outside 1..={}",
            family.m
        )));
    }
    Ok(())
}

/// Component r ≤ m−1 is the bubble sum of sheet r, component m is U.
pub fn ansatz_eval(family: &AnsatzFamily, component: usize, x: &Point4) -> Result<f64> {
    check_component(family, component)?;
    if component == family.m {
        Ok(standard_bubble(x))
    } else {
        Ok(family.sheet_value(component, x))
    }
}

/// Field form of [`ansatz_eval`].
pub fn ansatz_field(family: &AnsatzFamily, component: usize) -> Result<Field> {
    check_component(family, component)?;
    let f = family.clone();
    if component == family.m {
        Ok(field_fn(family.tag(), PeakLayout::none(), standard_bubble))
    } else {
        Ok(field_fn(family.tag(), family.peaks(), move |x| {
            f.sheet_value(component, x)
        }))
    }
}

/// Strong-form error of component `component` at the ansatz.
///
/// Ring: component 1 gives 𝓔̄₂ = V³ − ΣᵢU³_{δ,ξᵢ} + βU²V and component 2
/// gives 𝓔̄₁ = βUV². Torus (m = q+1): component r ≤ q gives
/// Ṽᵣ³ − ΣU³ + αṼᵣΣ_{s≠r}Ṽₛ² + βU²Ṽᵣ, component m gives βUΣᵣṼᵣ².
pub fn residual_strong(family: &AnsatzFamily, component: usize, x: &Point4) -> Result<f64> {
    check_component(family, component)?;
    let u = standard_bubble(x);
    let q = family.sheets();
    let sheets: Vec<f64> = (1..=q).map(|r| family.sheet_value(r, x)).collect();
    if component == family.m {
        let s2: f64 = sheets.iter().map(|v| v * v).sum();
        return Ok(family.beta * u * s2);
    }
    let r = component;
    let vr = sheets[r - 1];
    let others: f64 = sheets
        .iter()
        .enumerate()
        .filter(|(s, _)| *s != r - 1)
        .map(|(_, v)| v * v)
        .sum();
    Ok(family.sheet_cube_excess(r, x) + family.alpha * vr * others + family.beta * u * u * vr)
}

/// Pieces of the strong-form error of the reduced (two-equation) system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ResidualComponent {
    /// 𝓔̄₁ = βUΣᵣṼᵣ² (βUV² for the ring).
    E1,
    /// 𝓔̄₂ = Ṽ³ − ΣU³ + βU²Ṽ + αṼΣ_{r≥2}Ṽᵣ².
    E2,
    /// Ṽ³ − ΣU³.
    E2Cross,
    /// βU²Ṽ.
    E2Beta,
    /// αṼΣ_{r≥2}Ṽᵣ².
    E2Alpha,
}

impl ResidualComponent {
    pub fn eval(self, family: &AnsatzFamily, x: &Point4) -> f64 {
        let l = family.local(x);
        self.from_local(family, &l)
    }

    pub fn from_local(self, family: &AnsatzFamily, l: &LocalAnsatz) -> f64 {
        let v = l.v();
        match self {
            ResidualComponent::E1 => family.beta * l.u * l.all_sheets_sq(),
            ResidualComponent::E2 => {
                l.cross + family.beta * l.u * l.u * v + family.alpha * v * l.other_sheets_sq()
            }
            ResidualComponent::E2Cross => l.cross,
            ResidualComponent::E2Beta => family.beta * l.u * l.u * v,
            ResidualComponent::E2Alpha => family.alpha * v * l.other_sheets_sq(),
        }
    }
}

/// Field form of a residual piece, tagged with the family's invariance.
pub fn residual_field(family: &AnsatzFamily, which: ResidualComponent) -> Field {
    let f = family.clone();
    field_fn(family.tag(), family.peaks(), move |x| which.eval(&f, x))
}

/// Integrands of the nonlinear terms: `n1` belongs to the equation of the
/// radial component (correction φ), `n2` to the bubble component (ψ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NonlinearTerms {
    pub n1: f64,
    pub n2: f64,
}

/// Nonlinear terms from pointwise values. `v` and `psi` hold the sheet
/// values Ṽᵣ(x) and ψ(𝒯ᵣx), r = 1..q (a single entry for the ring).
pub fn nonlinear_from_values(
    family: &AnsatzFamily,
    u: f64,
    v: &[f64],
    phi: f64,
    psi: &[f64],
) -> NonlinearTerms {
    let b = family.beta;
    let a = family.alpha;
    let (v1, p1) = (v[0], psi[0]);
    // sums over all sheets
    let vp: f64 = v.iter().zip(psi).map(|(a, b)| a * b).sum();
    let pp: f64 = psi.iter().map(|p| p * p).sum();
    let vv: f64 = v.iter().map(|x| x * x).sum();
    // sums over r ≥ 2
    let vp2 = vp - v1 * p1;
    let pp2 = pp - p1 * p1;
    let vv2 = vv - v1 * v1;
    let n1 = phi * phi * phi
        + 3.0 * u * phi * phi
        + b * (2.0 * phi * vp + phi * pp + u * pp)
        + b * vv * phi
        + 2.0 * b * u * vp;
    let n2 = p1 * p1 * p1
        + 3.0 * v1 * p1 * p1
        + b * (p1 * phi * phi + 2.0 * u * p1 * phi + v1 * phi * phi)
        + a * (2.0 * p1 * vp2 + p1 * pp2 + v1 * pp2)
        + b * (u * u * p1 + 2.0 * u * v1 * phi)
        + a * (vv2 * p1 + 2.0 * v1 * vp2);
    NonlinearTerms { n1, n2 }
}

/// Nonlinear terms at x for corrections φ (radial component) and ψ (bubble
/// component); for the torus ψ is also sampled at 𝒯ᵣx.
pub fn nonlinear_terms_eval(
    family: &AnsatzFamily,
    phi: &dyn ScalarField,
    psi: &dyn ScalarField,
    x: &Point4,
) -> NonlinearTerms {
    let q = family.sheets();
    let u = standard_bubble(x);
    let v: Vec<f64> = (1..=q).map(|r| family.sheet_value(r, x)).collect();
    let psis: Vec<f64> = (1..=q)
        .map(|r| {
            if r == 1 {
                psi.eval(x)
            } else {
                let t = SymmetryOp::sheet_map(r, q);
                psi.eval(&x.transform(t.matrix().expect("orthogonal")))
            }
        })
        .collect();
    nonlinear_from_values(family, u, &v, phi.eval(x), &psis)
}
