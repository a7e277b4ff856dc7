//! Forward-mode dual numbers with a fixed number of tangent directions.
//!
//! Every residual block of the band depends on at most [`MAX_VARS`]
//! variables (three consecutive poses and their two time intervals), so a
//! fixed-size tangent array is enough to get exact block Jacobians.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::geometry::wrap_angle;

pub const MAX_VARS: usize = 11;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: [f64; MAX_VARS],
}

impl Dual {
    pub fn constant(v: f64) -> Self {
        Self { v, d: [0.0; MAX_VARS] }
    }

    /// Seeds tangent direction `k`.
    pub fn variable(v: f64, k: usize) -> Self {
        let mut d = [0.0; MAX_VARS];
        d[k] = 1.0;
        Self { v, d }
    }

    fn chain(self, v: f64, dv: f64) -> Self {
        let mut d = self.d;
        for x in &mut d {
            *x *= dv;
        }
        Self { v, d }
    }

    pub fn sin(self) -> Self {
        self.chain(self.v.sin(), self.v.cos())
    }

    pub fn cos(self) -> Self {
        self.chain(self.v.cos(), -self.v.sin())
    }

    pub fn scale(self, k: f64) -> Self {
        self.chain(self.v * k, k)
    }

    /// `max(0, self + eps)`; NaN propagates.
    pub fn hinge(self, eps: f64) -> Self {
        let z = self.v + eps;
        if z > 0.0 || z.is_nan() {
            Self { v: z, d: self.d }
        } else {
            Self::constant(0.0)
        }
    }

    /// Wraps the value into `(-pi, pi]`; the shift is locally constant.
    pub fn wrapped(self) -> Self {
        Self { v: wrap_angle(self.v), d: self.d }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(mut self, o: Dual) -> Dual {
        self.v += o.v;
        for (a, b) in self.d.iter_mut().zip(o.d) {
            *a += b;
        }
        self
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(mut self, o: Dual) -> Dual {
        self.v -= o.v;
        for (a, b) in self.d.iter_mut().zip(o.d) {
            *a -= b;
        }
        self
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        let mut d = [0.0; MAX_VARS];
        for (k, x) in d.iter_mut().enumerate() {
            *x = self.d[k] * o.v + self.v * o.d[k];
        }
        Dual { v: self.v * o.v, d }
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        let inv = 1.0 / o.v;
        let q = self.v * inv;
        let mut d = [0.0; MAX_VARS];
        for (k, x) in d.iter_mut().enumerate() {
            *x = (self.d[k] - q * o.d[k]) * inv;
        }
        Dual { v: q, d }
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        self.scale(-1.0)
    }
}

impl Add<f64> for Dual {
    type Output = Dual;
    fn add(mut self, o: f64) -> Dual {
        self.v += o;
        self
    }
}

impl Sub<f64> for Dual {
    type Output = Dual;
    fn sub(mut self, o: f64) -> Dual {
        self.v -= o;
        self
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    fn mul(self, o: f64) -> Dual {
        self.scale(o)
    }
}
