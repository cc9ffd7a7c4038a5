use crate::error::{Error, Result};
use crate::field::{field_fn, Field, PeakLayout, SymmetryTag};
use crate::geometry::{Point4, SymmetryOp};

fn sheet_matrix(i: usize, q: usize) -> nalgebra::Matrix4<f64> {
    *SymmetryOp::sheet_map(i, q).matrix().expect("orthogonal")
}

/// Expand a solution (u, v) of the two-equation system to the m = q+1
/// components uᵢ(x) = v(𝒯ᵢx), i ≤ q, and u_{q+1} = u.
pub fn two_to_m_expand(u: Field, v: Field, q: usize) -> Result<Vec<Field>> {
    if q < 1 {
        return Err(Error::Domain("q must be at least 1".into()));
    }
    let mut out: Vec<Field> = Vec::with_capacity(q + 1);
    for i in 1..=q {
        if i == 1 {
            out.push(v.clone());
            continue;
        }
        let m = sheet_matrix(i, q);
        let v = v.clone();
        out.push(field_fn(SymmetryTag::None, PeakLayout::none(), move |x| {
            v.eval(&x.transform(&m))
        }));
    }
    out.push(u);
    Ok(out)
}

/// |Σ_{r=2}^q vᵣ²(𝒯ᵢx) − Σ_{j≠i} uⱼ²(x)| with vᵣ(y) = v(𝒯ᵣy) and
/// uⱼ(x) = v(𝒯ⱼx); `i` is 1-based in 1..=q.
pub fn reduction_identity_check(v: &Field, q: usize, i: usize, x: &Point4) -> Result<f64> {
    if q < 1 || i < 1 || i > q {
        return Err(Error::InvalidIndex(format!("i = {i} with q = {q}")));
    }
    let ti = x.transform(&sheet_matrix(i, q));
    let lhs: f64 = (2..=q)
        .map(|r| {
            let val = v.eval(&ti.transform(&sheet_matrix(r, q)));
            val * val
        })
        .sum();
    let rhs: f64 = (1..=q)
        .filter(|&j| j != i)
        .map(|j| {
            let val = v.eval(&x.transform(&sheet_matrix(j, q)));
            val * val
        })
        .sum();
    Ok((lhs - rhs).abs())
}
