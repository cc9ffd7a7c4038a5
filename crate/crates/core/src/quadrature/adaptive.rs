use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::Serialize;

use super::genz_malik::{estimate, rule, BoxEstimate, Rule};
use super::{neumaier_sum, ExteriorMap, IntegralResult, QuadratureSpec};
use crate::error::{Error, Result};
use crate::field::{PeakLayout, SymmetryTag};
use crate::geometry::{block_rotation_matrix, min_pairwise_distance, Point4, SymmetryOp};

/// How per-component tolerances are formed for vector integrands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ErrorNorm {
    /// err_j ≤ max(abs_tol, rel_tol·|I_j|) for every component.
    Individual,
    /// err_j ≤ max(abs_tol, rel_tol·max_i |I_i|): relative to the largest
    /// component, as suited to matrix assembly.
    Max,
}

/// A vector-valued integrand. `eval` overwrites all `dim` outputs.
pub struct VectorIntegrand<'a> {
    pub dim: usize,
    pub eval: &'a (dyn Fn(&Point4, &mut [f64]) + Sync),
    pub tag: SymmetryTag,
    pub layout: PeakLayout,
    pub norm: ErrorNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VectorResult {
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    /// Contribution of the peak balls (the rest comes from the exterior).
    pub interior: Vec<f64>,
    pub evaluations: usize,
    pub regions: usize,
}

impl VectorResult {
    pub fn scalar(&self) -> IntegralResult {
        IntegralResult {
            value: self.values[0],
            error_estimate: self.errors[0],
            evaluations: self.evaluations,
            regions: self.regions,
        }
    }
}

#[derive(Debug, Clone)]
enum Chart {
    /// Polar coordinates around `center`: t = width·(e^u − 1).
    Ball {
        center: Point4,
        width: f64,
        weight: f64,
    },
    Exterior {
        weight: f64,
    },
}

struct Setup<'a> {
    charts: Vec<Chart>,
    bounds: Vec<([f64; 4], [f64; 4])>,
    centers: Vec<Point4>,
    theta: f64,
    map: ExteriorMap,
    f: &'a (dyn Fn(&Point4, &mut [f64]) + Sync),
    dim: usize,
}

/// Smooth step: 1 on [0, θ/2], 0 beyond θ, C^∞ in between.
#[inline]
fn cutoff(t: f64, theta: f64) -> f64 {
    let h = 0.5 * theta;
    if t <= h {
        return 1.0;
    }
    if t >= theta {
        return 0.0;
    }
    let s = (t - h) / h;
    let a = (-1.0 / s).exp();
    let b = (-1.0 / (1.0 - s)).exp();
    b / (a + b)
}

#[inline]
fn hopf(eta: f64, alpha: f64, gamma: f64) -> (Point4, f64) {
    let (se, ce) = eta.sin_cos();
    let (sa, ca) = alpha.sin_cos();
    let (sg, cg) = gamma.sin_cos();
    (Point4::new(ce * ca, ce * sa, se * cg, se * sg), se * ce)
}

impl<'a> Setup<'a> {
    /// Weight of the exterior part of the partition of unity at x.
    #[inline]
    fn outer_weight(&self, x: &Point4) -> f64 {
        let t2 = self.theta * self.theta;
        let mut w = 1.0;
        for c in &self.centers {
            let d2 = x.dist_sq(c);
            if d2 < t2 {
                w -= cutoff(d2.sqrt(), self.theta);
            }
        }
        w
    }

    /// Accumulate the mapped integrand of `chart` at `p` into `out`.
    fn eval_chart(&self, chart: &Chart, p: &[f64; 4], tmp: &mut [f64], out: &mut [f64]) {
        for o in out.iter_mut() {
            *o = 0.0;
        }
        let (omega, sphere) = hopf(p[1], p[2], p[3]);
        match chart {
            Chart::Ball {
                center,
                width,
                weight,
            } => {
                let e = p[0].exp();
                let t = width * (e - 1.0);
                let chi = cutoff(t, self.theta);
                if chi == 0.0 {
                    return;
                }
                let jac = weight * chi * t * t * t * sphere * width * e;
                if jac == 0.0 {
                    return;
                }
                let x = *center + omega * t;
                (self.f)(&x, tmp);
                for (o, v) in out.iter_mut().zip(tmp.iter()) {
                    *o = jac * v;
                }
            }
            Chart::Exterior { weight } => match self.map {
                ExteriorMap::Inversion => {
                    let t = p[0];
                    let base = weight * t * t * t * sphere;
                    if base == 0.0 {
                        return;
                    }
                    let y = omega * t;
                    let wy = self.outer_weight(&y);
                    if wy != 0.0 {
                        (self.f)(&y, tmp);
                        for (o, v) in out.iter_mut().zip(tmp.iter()) {
                            *o += base * wy * v;
                        }
                    }
                    let z = omega * (1.0 / t);
                    let wz = self.outer_weight(&z);
                    if wz != 0.0 {
                        let t2 = t * t;
                        let t8 = t2 * t2 * t2 * t2;
                        (self.f)(&z, tmp);
                        for (o, v) in out.iter_mut().zip(tmp.iter()) {
                            *o += base * wz * v / t8;
                        }
                    }
                }
                ExteriorMap::TangentMap => {
                    let s = p[0];
                    let t = s / (1.0 - s);
                    let jac = weight * t * t * t * sphere / ((1.0 - s) * (1.0 - s));
                    if jac == 0.0 {
                        return;
                    }
                    let x = omega * t;
                    let w = self.outer_weight(&x);
                    if w == 0.0 {
                        return;
                    }
                    (self.f)(&x, tmp);
                    for (o, v) in out.iter_mut().zip(tmp.iter()) {
                        *o = jac * w * v;
                    }
                }
            },
        }
    }

    fn evaluate(&self, rule: &Rule, chart: usize, lo: &[f64; 4], hi: &[f64; 4], weights: &[f64]) -> BoxEstimate {
        let mut tmp = vec![0.0; self.dim];
        let ch = &self.charts[chart];
        let mut g = |p: &[f64; 4], out: &mut [f64]| self.eval_chart(ch, p, &mut tmp, out);
        estimate(rule, lo, hi, self.dim, weights, &mut g)
    }
}

/// Group the centers into orbits of the rotation certified by `tag`.
/// Returns (representative, orbit size) pairs, or None when the center set
/// is not invariant.
fn orbits(centers: &[Point4], tag: SymmetryTag) -> Option<Vec<(Point4, usize)>> {
    let m = match tag {
        SymmetryTag::Ring { k } if k >= 2 => *SymmetryOp::theta_k(k).matrix()?,
        SymmetryTag::Torus { k } if k >= 2 => block_rotation_matrix(k),
        _ => return None,
    };
    let scale = centers.iter().map(|c| c.norm()).fold(1.0, f64::max);
    let tol = 1e-10 * scale;
    let find = |p: &Point4| centers.iter().position(|c| c.dist_sq(p) <= tol * tol);
    let mut assigned = vec![false; centers.len()];
    let mut out = Vec::new();
    for i in 0..centers.len() {
        if assigned[i] {
            continue;
        }
        let rep = centers[i];
        assigned[i] = true;
        let mut size = 1;
        let mut p = rep.transform(&m);
        let mut guard = 0;
        while p.dist_sq(&rep) > tol * tol {
            let j = find(&p)?;
            if !assigned[j] {
                assigned[j] = true;
            }
            size += 1;
            p = p.transform(&m);
            guard += 1;
            if guard > centers.len() + 1 {
                return None;
            }
        }
        out.push((rep, size));
    }
    Some(out)
}

fn grid(lo: [f64; 4], hi: [f64; 4], n: [usize; 4]) -> Vec<([f64; 4], [f64; 4])> {
    let mut out = Vec::with_capacity(n.iter().product());
    for a in 0..n[0] {
        for b in 0..n[1] {
            for c in 0..n[2] {
                for d in 0..n[3] {
                    let idx = [a, b, c, d];
                    let mut l = [0.0; 4];
                    let mut h = [0.0; 4];
                    for i in 0..4 {
                        let w = (hi[i] - lo[i]) / n[i] as f64;
                        l[i] = lo[i] + w * idx[i] as f64;
                        h[i] = if idx[i] + 1 == n[i] { hi[i] } else { lo[i] + w * (idx[i] + 1) as f64 };
                    }
                    out.push((l, h));
                }
            }
        }
    }
    out
}

struct Region {
    chart: usize,
    lo: [f64; 4],
    hi: [f64; 4],
    value: Vec<f64>,
    error: Vec<f64>,
    axis: usize,
    active: bool,
}

#[derive(PartialEq)]
struct HeapItem {
    score: f64,
    idx: usize,
}

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

fn tolerances(values: &[f64], spec: &QuadratureSpec, norm: ErrorNorm) -> Vec<f64> {
    match norm {
        ErrorNorm::Individual => values
            .iter()
            .map(|v| spec.abs_tol.max(spec.rel_tol * v.abs()))
            .collect(),
        ErrorNorm::Max => {
            let m = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            vec![spec.abs_tol.max(spec.rel_tol * m); values.len()]
        }
    }
}

fn score(err: &[f64], tol: &[f64]) -> f64 {
    err.iter()
        .zip(tol)
        .map(|(e, t)| e / t)
        .fold(0.0, f64::max)
}

fn exact_totals(regions: &[Region], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = Vec::with_capacity(dim);
    let mut e = Vec::with_capacity(dim);
    for j in 0..dim {
        v.push(neumaier_sum(regions.iter().filter(|r| r.active).map(|r| r.value[j])));
        e.push(neumaier_sum(regions.iter().filter(|r| r.active).map(|r| r.error[j])));
    }
    (v, e)
}

fn build_setup<'a>(integrand: &'a VectorIntegrand<'a>, spec: &QuadratureSpec) -> Setup<'a> {
    let layout = &integrand.layout;
    let dmin = min_pairwise_distance(&layout.centers).unwrap_or(2.0);
    let theta = spec.peak_radius * dmin;
    let width = layout.width.min(theta);
    let reduced = if spec.use_symmetry { orbits(&layout.centers, integrand.tag) } else { None };

    let (balls, ext_weight, alpha_lo, alpha_hi) = match (&reduced, integrand.tag) {
        (Some(orb), SymmetryTag::Ring { k }) | (Some(orb), SymmetryTag::Torus { k }) => {
            let w = PI / k as f64;
            (orb.clone(), k as f64, -w, w)
        }
        _ => (
            layout.centers.iter().map(|c| (*c, 1usize)).collect(),
            1.0,
            -PI,
            PI,
        ),
    };

    let mut charts = Vec::new();
    let mut bounds = Vec::new();
    let u_max = (1.0 + theta / width).ln();
    for (c, size) in balls {
        charts.push(Chart::Ball {
            center: c,
            width,
            weight: size as f64,
        });
        bounds.push(([0.0, 0.0, -PI, -PI], [u_max, FRAC_PI_2, PI, PI]));
    }
    charts.push(Chart::Exterior { weight: ext_weight });
    bounds.push(([0.0, 0.0, alpha_lo, -PI], [1.0, FRAC_PI_2, alpha_hi, PI]));

    Setup {
        charts,
        bounds,
        centers: layout.centers.clone(),
        theta,
        map: spec.exterior_map,
        f: integrand.eval,
        dim: integrand.dim,
    }
}

fn initial_boxes(setup: &Setup) -> Vec<(usize, [f64; 4], [f64; 4])> {
    let mut out = Vec::new();
    for (i, chart) in setup.charts.iter().enumerate() {
        let (lo, hi) = setup.bounds[i];
        let n = match chart {
            Chart::Ball { .. } => [((hi[0] - lo[0]) / 1.5).ceil().max(2.0) as usize, 2, 4, 4],
            Chart::Exterior { .. } => {
                let na = ((hi[2] - lo[2]) / (PI / 2.0)).ceil().max(2.0) as usize;
                [4, 2, na, 4]
            }
        };
        for (l, h) in grid(lo, hi, n) {
            out.push((i, l, h));
        }
    }
    out
}

/// Adaptive integration of a vector integrand over R⁴.
///
/// The result does not depend on the number of worker threads: regions are
/// refined in a fixed priority order, batches are evaluated in parallel and
/// merged in order, and final sums are compensated in creation order.
pub fn integrate_vector(integrand: &VectorIntegrand, spec: &QuadratureSpec) -> Result<VectorResult> {
    spec.validate()?;
    let dim = integrand.dim;
    if dim == 0 {
        return Err(Error::Validation("integrand dimension must be positive".into()));
    }
    let setup = build_setup(integrand, spec);
    let rule = rule();

    let boxes = initial_boxes(&setup);
    let ones = vec![1.0; dim];
    let first: Vec<BoxEstimate> = boxes
        .par_iter()
        .map(|(c, lo, hi)| setup.evaluate(&rule, *c, lo, hi, &ones))
        .collect();
    let mut regions: Vec<Region> = boxes
        .into_iter()
        .zip(first)
        .map(|((chart, lo, hi), est)| Region {
            chart,
            lo,
            hi,
            value: est.value,
            error: est.error,
            axis: est.axis,
            active: true,
        })
        .collect();
    let mut evaluations = regions.len() * 57;

    let (mut totals, mut errs) = exact_totals(&regions, dim);
    let mut tol = tolerances(&totals, spec, integrand.norm);
    let mut heap: BinaryHeap<HeapItem> = regions
        .iter()
        .enumerate()
        .map(|(idx, r)| HeapItem {
            score: score(&r.error, &tol),
            idx,
        })
        .collect();
    let mut active = regions.len();
    let mut iteration = 0usize;

    loop {
        tol = tolerances(&totals, spec, integrand.norm);
        let converged = errs.iter().zip(&tol).all(|(e, t)| e <= t);
        if converged || iteration % 64 == 0 {
            let (v, e) = exact_totals(&regions, dim);
            totals = v;
            errs = e;
            tol = tolerances(&totals, spec, integrand.norm);
            if errs.iter().zip(&tol).all(|(e, t)| e <= t) {
                break;
            }
        }
        if active >= spec.max_subdivisions {
            let worst = (0..dim)
                .max_by(|&a, &b| (errs[a] / tol[a]).total_cmp(&(errs[b] / tol[b])))
                .unwrap_or(0);
            return Err(Error::BudgetExhausted {
                value: totals[worst],
                error_estimate: errs[worst],
                regions: active,
            });
        }
        iteration += 1;

        let batch = (active / 32).clamp(1, 64).min(spec.max_subdivisions - active).max(1);
        let mut jobs = Vec::with_capacity(2 * batch);
        for _ in 0..batch {
            let Some(item) = heap.pop() else { break };
            let r = &mut regions[item.idx];
            let a = r.axis;
            let (clo, chi) = setup.bounds[r.chart];
            let extent = chi[a] - clo[a];
            if (r.hi[a] - r.lo[a]) < 1e-13 * extent {
                return Err(Error::NonIntegrableSingularity {
                    chart: match setup.charts[r.chart] {
                        Chart::Ball { center, .. } => format!("ball at {center:?}"),
                        Chart::Exterior { .. } => "exterior".into(),
                    },
                });
            }
            r.active = false;
            for j in 0..dim {
                totals[j] -= r.value[j];
                errs[j] -= r.error[j];
            }
            let mid = 0.5 * (r.lo[a] + r.hi[a]);
            let mut h1 = r.hi;
            h1[a] = mid;
            let mut l2 = r.lo;
            l2[a] = mid;
            jobs.push((r.chart, r.lo, h1));
            jobs.push((r.chart, l2, r.hi));
        }
        let weights: Vec<f64> = tol.iter().map(|t| 1.0 / t).collect();
        let results: Vec<BoxEstimate> = jobs
            .par_iter()
            .map(|(c, lo, hi)| setup.evaluate(&rule, *c, lo, hi, &weights))
            .collect();
        evaluations += 57 * jobs.len();
        active += jobs.len() / 2;
        for ((chart, lo, hi), est) in jobs.into_iter().zip(results) {
            for j in 0..dim {
                totals[j] += est.value[j];
                errs[j] += est.error[j];
            }
            let idx = regions.len();
            heap.push(HeapItem {
                score: score(&est.error, &tol),
                idx,
            });
            regions.push(Region {
                chart,
                lo,
                hi,
                value: est.value,
                error: est.error,
                axis: est.axis,
                active: true,
            });
        }
    }

    let interior = (0..dim)
        .map(|j| {
            neumaier_sum(
                regions
                    .iter()
                    .filter(|r| r.active && matches!(setup.charts[r.chart], Chart::Ball { .. }))
                    .map(|r| r.value[j]),
            )
        })
        .collect();
    Ok(VectorResult {
        values: totals,
        errors: errs,
        interior,
        evaluations,
        regions: active,
    })
}
