//! Second-order jets in two variables `(t, x)`.
//!
//! A [`Jet`] carries a value together with its first and second partial
//! derivatives. Arithmetic propagates them exactly (truncated Taylor
//! arithmetic), so closed-form warping functions written in terms of jets
//! yield analytic derivatives without any differencing.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub v: f64,
    pub t: f64,
    pub x: f64,
    pub tt: f64,
    pub tx: f64,
    pub xx: f64,
}

impl Jet {
    pub const fn constant(v: f64) -> Self {
        Jet {
            v,
            t: 0.0,
            x: 0.0,
            tt: 0.0,
            tx: 0.0,
            xx: 0.0,
        }
    }

    /// The coordinate function `t` evaluated at `t`.
    pub const fn var_t(t: f64) -> Self {
        Jet {
            v: t,
            t: 1.0,
            x: 0.0,
            tt: 0.0,
            tx: 0.0,
            xx: 0.0,
        }
    }

    /// The coordinate function `x` evaluated at `x`.
    pub const fn var_x(x: f64) -> Self {
        Jet {
            v: x,
            t: 0.0,
            x: 1.0,
            tt: 0.0,
            tx: 0.0,
            xx: 0.0,
        }
    }

    /// Applies a scalar function given its value and first two derivatives at `self.v`.
    pub fn chain(self, f: f64, df: f64, d2f: f64) -> Self {
        Jet {
            v: f,
            t: df * self.t,
            x: df * self.x,
            tt: d2f * self.t * self.t + df * self.tt,
            tx: d2f * self.t * self.x + df * self.tx,
            xx: d2f * self.x * self.x + df * self.xx,
        }
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn tan(self) -> Self {
        let tn = self.v.tan();
        let sec2 = 1.0 + tn * tn;
        self.chain(tn, sec2, 2.0 * tn * sec2)
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn ln(self) -> Self {
        let u = self.v;
        self.chain(u.ln(), 1.0 / u, -1.0 / (u * u))
    }

    pub fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }

    pub fn sinh(self) -> Self {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.chain(s, c, s)
    }

    pub fn cosh(self) -> Self {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.chain(c, s, c)
    }

    pub fn tanh(self) -> Self {
        let th = self.v.tanh();
        let d = 1.0 - th * th;
        self.chain(th, d, -2.0 * th * d)
    }

    pub fn powf(self, p: f64) -> Self {
        let u = self.v;
        self.chain(
            u.powf(p),
            p * u.powf(p - 1.0),
            p * (p - 1.0) * u.powf(p - 2.0),
        )
    }

    pub fn powi(self, p: i32) -> Self {
        let u = self.v;
        let pf = p as f64;
        let d1 = if p == 0 { 0.0 } else { pf * u.powi(p - 1) };
        let d2 = if p == 0 || p == 1 {
            0.0
        } else {
            pf * (pf - 1.0) * u.powi(p - 2)
        };
        self.chain(u.powi(p), d1, d2)
    }

    /// `self ^ other` for a jet exponent, via `exp(other * ln self)`.
    pub fn pow(self, other: Jet) -> Self {
        if other.t == 0.0 && other.x == 0.0 && other.tt == 0.0 && other.tx == 0.0 && other.xx == 0.0
        {
            let p = other.v;
            if p.fract() == 0.0 && p.abs() < i32::MAX as f64 {
                return self.powi(p as i32);
            }
            return self.powf(p);
        }
        (other * self.ln()).exp()
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite()
            && self.t.is_finite()
            && self.x.is_finite()
            && self.tt.is_finite()
            && self.tx.is_finite()
            && self.xx.is_finite()
    }

    /// Multiplies every component by `c` (a constant factor).
    pub fn scale(self, c: f64) -> Self {
        Jet {
            v: c * self.v,
            t: c * self.t,
            x: c * self.x,
            tt: c * self.tt,
            tx: c * self.tx,
            xx: c * self.xx,
        }
    }
}

impl From<f64> for Jet {
    fn from(v: f64) -> Self {
        Jet::constant(v)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet {
            v: self.v + o.v,
            t: self.t + o.t,
            x: self.x + o.x,
            tt: self.tt + o.tt,
            tx: self.tx + o.tx,
            xx: self.xx + o.xx,
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            t: self.t * o.v + self.v * o.t,
            x: self.x * o.v + self.v * o.x,
            tt: self.tt * o.v + 2.0 * self.t * o.t + self.v * o.tt,
            tx: self.tx * o.v + self.t * o.x + self.x * o.t + self.v * o.tx,
            xx: self.xx * o.v + 2.0 * self.x * o.x + self.v * o.xx,
        }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        let u = o.v;
        let recip = o.chain(1.0 / u, -1.0 / (u * u), 2.0 / (u * u * u));
        self * recip
    }
}

macro_rules! scalar_ops {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr<f64> for Jet {
            type Output = Jet;
            fn $m(self, o: f64) -> Jet { $tr::$m(self, Jet::constant(o)) }
        }
        impl $tr<Jet> for f64 {
            type Output = Jet;
            fn $m(self, o: Jet) -> Jet { $tr::$m(Jet::constant(self), o) }
        }
    )*};
}
scalar_ops!(Add add, Sub sub, Mul mul, Div div);

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn product_rule_matches_hand_derivatives() {
        // f = t^2 sin x
        let (t, x) = (1.3, 0.7);
        let f = Jet::var_t(t) * Jet::var_t(t) * Jet::var_x(x).sin();
        assert_relative_eq!(f.v, t * t * x.sin(), epsilon = 1e-15);
        assert_relative_eq!(f.t, 2.0 * t * x.sin(), epsilon = 1e-15);
        assert_relative_eq!(f.x, t * t * x.cos(), epsilon = 1e-15);
        assert_relative_eq!(f.tt, 2.0 * x.sin(), epsilon = 1e-15);
        assert_relative_eq!(f.tx, 2.0 * t * x.cos(), epsilon = 1e-15);
        assert_relative_eq!(f.xx, -t * t * x.sin(), epsilon = 1e-15);
    }

    #[test]
    fn quotient_and_composition() {
        // f = exp(t x) / (1 + t)
        let (t, x) = (0.4, -0.3);
        let tj = Jet::var_t(t);
        let f = (tj * Jet::var_x(x)).exp() / (1.0 + tj);
        let g = |t: f64, x: f64| (t * x).exp() / (1.0 + t);
        let h = 1e-4;
        let ftt = (g(t + h, x) - 2.0 * g(t, x) + g(t - h, x)) / (h * h);
        let ftx = (g(t + h, x + h) - g(t + h, x - h) - g(t - h, x + h) + g(t - h, x - h))
            / (4.0 * h * h);
        assert_relative_eq!(f.tt, ftt, epsilon = 1e-6);
        assert_relative_eq!(f.tx, ftx, epsilon = 1e-6);
    }

    #[test]
    fn integer_power_at_zero_is_finite() {
        let z = Jet::var_x(0.0).powi(2);
        assert!(z.is_finite());
        assert_eq!(z.xx, 2.0);
    }
}
