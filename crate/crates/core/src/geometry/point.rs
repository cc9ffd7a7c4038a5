use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

/// A point of R^4.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point4 {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub x4: f64,
}

impl Point4 {
    pub const ORIGIN: Point4 = Point4 {
        x1: 0.0,
        x2: 0.0,
        x3: 0.0,
        x4: 0.0,
    };

    pub const fn new(x1: f64, x2: f64, x3: f64, x4: f64) -> Self {
        Point4 { x1, x2, x3, x4 }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Point4::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x1, self.x2, self.x3, self.x4]
    }

    /// Unit vector along axis `i` (0-based).
    pub fn axis(i: usize) -> Self {
        let mut a = [0.0; 4];
        a[i] = 1.0;
        Point4::from_array(a)
    }

    pub fn coord(&self, i: usize) -> f64 {
        match i {
            0 => self.x1,
            1 => self.x2,
            2 => self.x3,
            3 => self.x4,
            _ => panic!("coordinate index {i} out of range"),
        }
    }

    pub fn dot(&self, o: &Point4) -> f64 {
        self.x1 * o.x1 + self.x2 * o.x2 + self.x3 * o.x3 + self.x4 * o.x4
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist_sq(&self, o: &Point4) -> f64 {
        (*self - *o).norm_sq()
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite() && self.x3.is_finite() && self.x4.is_finite()
    }

    pub fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.x1, self.x2, self.x3, self.x4)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Point4::new(v[0], v[1], v[2], v[3])
    }

    /// `m * self`.
    pub fn transform(&self, m: &Matrix4<f64>) -> Point4 {
        let a = self.to_array();
        let mut out = [0.0; 4];
        for (i, o) in out.iter_mut().enumerate() {
            *o = m[(i, 0)] * a[0] + m[(i, 1)] * a[1] + m[(i, 2)] * a[2] + m[(i, 3)] * a[3];
        }
        Point4::from_array(out)
    }
}

impl Add for Point4 {
    type Output = Point4;
    fn add(self, o: Point4) -> Point4 {
        Point4::new(self.x1 + o.x1, self.x2 + o.x2, self.x3 + o.x3, self.x4 + o.x4)
    }
}

impl Sub for Point4 {
    type Output = Point4;
    fn sub(self, o: Point4) -> Point4 {
        Point4::new(self.x1 - o.x1, self.x2 - o.x2, self.x3 - o.x3, self.x4 - o.x4)
    }
}

impl Neg for Point4 {
    type Output = Point4;
    fn neg(self) -> Point4 {
        Point4::new(-self.x1, -self.x2, -self.x3, -self.x4)
    }
}

impl Mul<f64> for Point4 {
    type Output = Point4;
    fn mul(self, s: f64) -> Point4 {
        Point4::new(self.x1 * s, self.x2 * s, self.x3 * s, self.x4 * s)
    }
}

impl Mul<Point4> for f64 {
    type Output = Point4;
    fn mul(self, p: Point4) -> Point4 {
        p * self
    }
}
