//! Degree-7 Genz–Malik cubature on 4-dimensional boxes with the embedded
//! degree-5 rule for error estimation.

const N: f64 = 4.0;

pub(crate) struct Rule {
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    pub l5: f64,
    pub w: [f64; 5],
    pub wp: [f64; 4],
    pub ratio: f64,
}

pub(crate) fn rule() -> Rule {
    let l2 = (9.0f64 / 70.0).sqrt();
    let l3 = (9.0f64 / 10.0).sqrt();
    let l4 = l3;
    let l5 = (9.0f64 / 19.0).sqrt();
    let w = [
        (12824.0 - 9120.0 * N + 400.0 * N * N) / 19683.0,
        980.0 / 6561.0,
        (1820.0 - 400.0 * N) / 19683.0,
        200.0 / 19683.0,
        6859.0 / 19683.0 / 2f64.powi(4),
    ];
    let wp = [
        (729.0 - 950.0 * N + 50.0 * N * N) / 729.0,
        245.0 / 486.0,
        (265.0 - 100.0 * N) / 1458.0,
        25.0 / 729.0,
    ];
    Rule {
        l2,
        l3,
        l4,
        l5,
        w,
        wp,
        ratio: (l2 * l2) / (l3 * l3),
    }
}

/// Value, error and preferred split axis of one box.
pub(crate) struct BoxEstimate {
    pub value: Vec<f64>,
    pub error: Vec<f64>,
    pub axis: usize,
}

/// Apply the rule on [lo, hi] to a vector integrand `f(p, out)`.
/// `weights` scales each component when ranking split axes.
pub(crate) fn estimate<F>(
    rule: &Rule,
    lo: &[f64; 4],
    hi: &[f64; 4],
    dim: usize,
    weights: &[f64],
    f: &mut F,
) -> BoxEstimate
where
    F: FnMut(&[f64; 4], &mut [f64]),
{
    let mut c = [0.0; 4];
    let mut h = [0.0; 4];
    let mut vol = 1.0;
    for i in 0..4 {
        c[i] = 0.5 * (lo[i] + hi[i]);
        h[i] = 0.5 * (hi[i] - lo[i]);
        vol *= hi[i] - lo[i];
    }
    let mut buf = vec![0.0; dim];
    let mut s1 = vec![0.0; dim];
    let mut s2 = vec![0.0; dim];
    let mut s3 = vec![0.0; dim];
    let mut s4 = vec![0.0; dim];
    let mut s5 = vec![0.0; dim];
    let mut d2 = vec![0.0; 4 * dim];
    let mut d3 = vec![0.0; 4 * dim];

    f(&c, &mut s1);
    for i in 0..4 {
        for (lam, acc, dacc) in [(rule.l2, &mut s2, &mut d2), (rule.l3, &mut s3, &mut d3)] {
            for sign in [-1.0, 1.0] {
                let mut p = c;
                p[i] += sign * lam * h[i];
                f(&p, &mut buf);
                for j in 0..dim {
                    acc[j] += buf[j];
                    dacc[i * dim + j] += buf[j];
                }
            }
        }
    }
    for i in 0..4 {
        for k in i + 1..4 {
            for si in [-1.0, 1.0] {
                for sk in [-1.0, 1.0] {
                    let mut p = c;
                    p[i] += si * rule.l4 * h[i];
                    p[k] += sk * rule.l4 * h[k];
                    f(&p, &mut buf);
                    for j in 0..dim {
                        s4[j] += buf[j];
                    }
                }
            }
        }
    }
    for mask in 0..16u32 {
        let mut p = c;
        for (i, pi) in p.iter_mut().enumerate() {
            let s = if mask & (1 << i) != 0 { 1.0 } else { -1.0 };
            *pi += s * rule.l5 * h[i];
        }
        f(&p, &mut buf);
        for j in 0..dim {
            s5[j] += buf[j];
        }
    }

    let mut value = vec![0.0; dim];
    let mut error = vec![0.0; dim];
    for j in 0..dim {
        let i7 = rule.w[0] * s1[j]
            + rule.w[1] * s2[j]
            + rule.w[2] * s3[j]
            + rule.w[3] * s4[j]
            + rule.w[4] * s5[j];
        let i5 = rule.wp[0] * s1[j] + rule.wp[1] * s2[j] + rule.wp[2] * s3[j] + rule.wp[3] * s4[j];
        value[j] = vol * i7;
        error[j] = (vol * (i7 - i5)).abs();
    }

    // split along the axis with the largest fourth difference
    let mut axis = 0;
    let mut best = -1.0;
    for i in 0..4 {
        let mut diff = 0.0;
        for j in 0..dim {
            let a = d2[i * dim + j] - 2.0 * s1[j];
            let b = d3[i * dim + j] - 2.0 * s1[j];
            diff += weights[j] * (a - rule.ratio * b).abs();
        }
        // prefer wider axes when the differences tie
        let score = diff + 1e-300 * h[i];
        if score > best {
            best = score;
            axis = i;
        }
    }
    if best <= 0.0 {
        axis = (0..4)
            .max_by(|&a, &b| h[a].partial_cmp(&h[b]).unwrap())
            .unwrap_or(0);
    }
    BoxEstimate { value, error, axis }
}
