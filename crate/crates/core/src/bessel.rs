//! Bessel functions of the first kind J_ν(z), real order, complex argument.
//!
//! Small arguments use the ascending series, large arguments the Hankel
//! expansion truncated at its smallest term.

use crate::special::recip_gamma;
use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

/// Radius separating the series branch from the asymptotic branch.
pub const R_SWITCH: f64 = 14.0;
/// Largest |Im z| accepted; beyond it e^{|Im z|} growth is not tracked.
pub const MAX_IMAG: f64 = 50.0;
const MAX_SERIES_TERMS: usize = 200;
const MAX_HANKEL_TERMS: usize = 60;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BesselError {
    #[error("series overflow: no convergence within {terms} terms at |z| = {modulus}")]
    SeriesOverflow { terms: usize, modulus: f64 },
    #[error("argument near branch cut: arg z = {arg}")]
    BranchCut { arg: f64 },
    #[error("|Im z| = {imag} exceeds the supported limit {MAX_IMAG}")]
    ImagTooLarge { imag: f64 },
    #[error("order {nu} outside the supported range (-2, 4)")]
    OrderOutOfRange { nu: f64 },
}

/// Real order stored as a base value plus an exact integer shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselOrder {
    pub base: f64,
    pub offset: i32,
}

impl BesselOrder {
    pub fn new(base: f64) -> Self {
        Self { base, offset: 0 }
    }

    pub fn value(self) -> f64 {
        self.base + self.offset as f64
    }

    pub fn shift(self, by: i32) -> Self {
        Self { base: self.base, offset: self.offset + by }
    }

    /// The order −ν, negating the base together with the offset.
    pub fn negate(self) -> Self {
        Self { base: -self.base, offset: -self.offset }
    }
}

/// Leading series coefficients c^±_{ν,m} = (−1)^m / (m! Γ(m ± ν + 1) 2^{2m±ν}).
#[derive(Debug, Clone)]
pub struct SeriesCoefficients {
    pub c_plus: Vec<f64>,
    pub c_minus: Vec<f64>,
}

impl SeriesCoefficients {
    pub fn new(nu: f64, terms: usize) -> Self {
        let build = |s: f64| -> Vec<f64> {
            let mut out = Vec::with_capacity(terms);
            let mut c = recip_gamma(1.0 + s) * 2f64.powf(-s);
            for m in 0..terms {
                out.push(c);
                let m1 = (m + 1) as f64;
                c *= -1.0 / (4.0 * m1 * (m1 + s));
            }
            out
        };
        Self { c_plus: build(nu), c_minus: build(-nu) }
    }
}

/// c^±_{ν,0} = 1/(Γ(1 ± ν) 2^{±ν}).
pub fn leading_coefficient(nu: f64, sign: f64) -> f64 {
    recip_gamma(1.0 + sign * nu) * 2f64.powf(-sign * nu)
}

fn is_negative_integer(nu: f64) -> Option<i32> {
    if nu < 0.0 && nu == nu.round() {
        Some(nu as i32)
    } else {
        None
    }
}

fn check_order(nu: f64) -> Result<(), BesselError> {
    if nu <= -2.0 || nu >= 4.0 || !nu.is_finite() {
        return Err(BesselError::OrderOutOfRange { nu });
    }
    Ok(())
}

/// Ascending series Σ (−1)^m (z/2)^{2m+ν} / (m! Γ(m+ν+1)), principal branch.
pub fn bessel_j_series(order: BesselOrder, z: Complex64) -> Result<Complex64, BesselError> {
    let nu = order.value();
    if let Some(n) = is_negative_integer(nu) {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        return Ok(bessel_j_series(BesselOrder::new(-nu), z)? * sign);
    }
    if z == Complex64::new(0.0, 0.0) {
        return Ok(if nu == 0.0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) });
    }
    // Terms reach ~e^{|z|}/√|z| before cancelling, so the recurrence and the
    // sum run in double-double arithmetic.
    let half = z * 0.5;
    let (hx, hy) = (dd::Dd::from(half.re), dd::Dd::from(half.im));
    let q = dd::Cdd { re: hy * hy - hx * hx, im: -(hx * hy).scale2() };
    let nu_dd = dd::two_sum(order.base, order.offset as f64);
    let mut term = dd::Cdd::one();
    let mut sum = term;
    let peak = 0.5 * z.norm();
    for m in 1..=MAX_SERIES_TERMS {
        let m1 = dd::Dd::from(m as f64);
        term = (term * q).div_real(m1 * (m1 + nu_dd));
        sum = sum + term;
        if m as f64 > peak && term.norm_hi() < 1e-17 * sum.norm_hi() {
            let lead = (half.ln() * nu).exp() * recip_gamma(nu + 1.0);
            return Ok(lead * sum.to_complex());
        }
    }
    Err(BesselError::SeriesOverflow { terms: MAX_SERIES_TERMS, modulus: z.norm() })
}

mod dd {
    //! Just enough double-double arithmetic for the ascending series.
    use num_complex::Complex64;
    use std::ops::{Add, Mul, Neg, Sub};

    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct Dd {
        pub hi: f64,
        pub lo: f64,
    }

    pub fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        Dd { hi: s, lo: (a - (s - bb)) + (b - bb) }
    }

    fn quick_two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        Dd { hi: s, lo: b - (s - a) }
    }

    fn two_prod(a: f64, b: f64) -> Dd {
        let p = a * b;
        Dd { hi: p, lo: a.mul_add(b, -p) }
    }

    impl From<f64> for Dd {
        fn from(x: f64) -> Self {
            Dd { hi: x, lo: 0.0 }
        }
    }

    impl Dd {
        pub fn scale2(self) -> Self {
            Dd { hi: 2.0 * self.hi, lo: 2.0 * self.lo }
        }

        pub fn div(self, o: Dd) -> Dd {
            let q1 = self.hi / o.hi;
            let r = self - o * Dd::from(q1);
            let q2 = r.hi / o.hi;
            let r = r - o * Dd::from(q2);
            let q3 = r.hi / o.hi;
            quick_two_sum(q1, q2) + Dd::from(q3)
        }

        pub fn to_f64(self) -> f64 {
            self.hi + self.lo
        }
    }

    impl Add for Dd {
        type Output = Dd;
        fn add(self, o: Dd) -> Dd {
            let s = two_sum(self.hi, o.hi);
            let t = two_sum(self.lo, o.lo);
            let r = quick_two_sum(s.hi, s.lo + t.hi);
            quick_two_sum(r.hi, r.lo + t.lo)
        }
    }

    impl Neg for Dd {
        type Output = Dd;
        fn neg(self) -> Dd {
            Dd { hi: -self.hi, lo: -self.lo }
        }
    }

    impl Sub for Dd {
        type Output = Dd;
        fn sub(self, o: Dd) -> Dd {
            self + (-o)
        }
    }

    impl Mul for Dd {
        type Output = Dd;
        fn mul(self, o: Dd) -> Dd {
            let p = two_prod(self.hi, o.hi);
            quick_two_sum(p.hi, p.lo + (self.hi * o.lo + self.lo * o.hi))
        }
    }

    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct Cdd {
        pub re: Dd,
        pub im: Dd,
    }

    impl Cdd {
        pub fn one() -> Self {
            Cdd { re: Dd::from(1.0), im: Dd::from(0.0) }
        }

        pub fn div_real(self, d: Dd) -> Self {
            Cdd { re: self.re.div(d), im: self.im.div(d) }
        }

        pub fn norm_hi(self) -> f64 {
            self.re.hi.hypot(self.im.hi)
        }

        pub fn to_complex(self) -> Complex64 {
            Complex64::new(self.re.to_f64(), self.im.to_f64())
        }
    }

    impl Add for Cdd {
        type Output = Cdd;
        fn add(self, o: Cdd) -> Cdd {
            Cdd { re: self.re + o.re, im: self.im + o.im }
        }
    }

    impl Mul for Cdd {
        type Output = Cdd;
        fn mul(self, o: Cdd) -> Cdd {
            Cdd { re: self.re * o.re - self.im * o.im, im: self.re * o.im + self.im * o.re }
        }
    }
}

fn check_asymptotic_domain(z: Complex64) -> Result<(), BesselError> {
    let arg = z.arg();
    if arg.abs() >= PI - 0.1 {
        return Err(BesselError::BranchCut { arg });
    }
    if z.im.abs() >= MAX_IMAG {
        return Err(BesselError::ImagTooLarge { imag: z.im.abs() });
    }
    Ok(())
}

/// Hankel expansion √(2/(πz)) (P cos ω − Q sin ω), ω = z − νπ/2 − π/4,
/// summed until the terms stop decreasing.
pub fn bessel_j_asymptotic(order: BesselOrder, z: Complex64) -> Result<Complex64, BesselError> {
    check_asymptotic_domain(z)?;
    let nu = order.value();
    let mu = 4.0 * nu * nu;
    let inv = z.inv();
    let mut p = Complex64::new(1.0, 0.0);
    let mut q = Complex64::new(0.0, 0.0);
    // a_k(ν)/z^k built up by its ratio; even k feed P, odd k feed Q
    let mut term = Complex64::new(1.0, 0.0);
    let mut last = f64::INFINITY;
    for k in 1..=MAX_HANKEL_TERMS {
        let kf = k as f64;
        let odd = (2.0 * kf - 1.0) * (2.0 * kf - 1.0);
        term *= inv * ((mu - odd) / (8.0 * kf));
        let size = term.norm();
        if size == 0.0 {
            break;
        }
        if size > last {
            break;
        }
        last = size;
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += term * sign;
        } else {
            q += term * sign;
        }
        if size < 1e-17 {
            break;
        }
    }
    let omega = z - nu * PI / 2.0 - PI / 4.0;
    let pref = (2.0 / (PI * z)).sqrt();
    Ok(pref * (p * omega.cos() - q * omega.sin()))
}

/// The three-term truncation of the Hankel expansion.
pub fn bessel_j_hankel_three_term(order: BesselOrder, z: Complex64) -> Result<Complex64, BesselError> {
    check_asymptotic_domain(z)?;
    let nu = order.value();
    let omega = z - nu * PI / 2.0 - PI / 4.0;
    let a1 = (nu - 0.5) * (nu + 0.5) / 2.0;
    let a2 = (nu * nu - 0.25) * (nu * nu - 2.25) / 8.0;
    let pref = (2.0 / (PI * z)).sqrt();
    Ok(pref * (omega.cos() - omega.sin() * a1 / z - omega.cos() * a2 / (z * z)))
}

/// Hybrid evaluation: series below [`R_SWITCH`], Hankel expansion above.
pub fn bessel_j(order: BesselOrder, z: Complex64) -> Result<Complex64, BesselError> {
    check_order(order.value())?;
    if z.im.abs() >= MAX_IMAG {
        return Err(BesselError::ImagTooLarge { imag: z.im.abs() });
    }
    if z.norm() < R_SWITCH {
        bessel_j_series(order, z)
    } else {
        bessel_j_asymptotic(order, z)
    }
}

/// Convenience wrapper for a plain real order.
pub fn jv(nu: f64, z: Complex64) -> Result<Complex64, BesselError> {
    bessel_j(BesselOrder::new(nu), z)
}

/// z J'_ν(z) from the identity z J'_ν = ν J_ν − z J_{ν+1}.
pub fn z_derivative(order: BesselOrder, z: Complex64) -> Result<Complex64, BesselError> {
    Ok(bessel_j(order, z)? * order.value() - z * bessel_j(order.shift(1), z)?)
}

/// ν_α = (1−α)/(2−α).
pub fn nu_alpha(alpha: f64) -> f64 {
    (1.0 - alpha) / (2.0 - alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn half_integer_series() {
        let v = bessel_j_series(BesselOrder::new(0.5), c(PI / 2.0)).unwrap();
        assert!((v.re - 2.0 / PI).abs() < 1e-15);
        let v = bessel_j(BesselOrder::new(-0.5), c(PI)).unwrap();
        assert!((v.re + 2f64.sqrt() / PI).abs() < 1e-15);
        let v = bessel_j(BesselOrder::new(0.5), c(PI)).unwrap();
        assert!(v.norm() < 1e-15);
    }

    #[test]
    fn half_integer_asymptotic_is_exact() {
        let v = bessel_j_asymptotic(BesselOrder::new(0.5), c(50.0)).unwrap();
        let exact = (2.0 / (50.0 * PI)).sqrt() * 50f64.sin();
        assert!((v.re - exact).abs() < 1e-15);
        let v = bessel_j_hankel_three_term(BesselOrder::new(0.5), c(50.0)).unwrap();
        assert!((v.re - exact).abs() < 1e-15);
    }

    #[test]
    fn order_shifts_are_exact() {
        let o = BesselOrder::new(1.0 / 3.0).shift(1).shift(1).shift(-2);
        assert_eq!(o.value(), 1.0 / 3.0);
        assert_eq!(o.negate().negate(), o);
    }

    #[test]
    fn switch_continuity() {
        let o = BesselOrder::new(1.0 / 3.0);
        for r in [R_SWITCH * 0.999, R_SWITCH, R_SWITCH * 1.001] {
            let s = bessel_j_series(o, c(r)).unwrap();
            let a = bessel_j_asymptotic(o, c(r)).unwrap();
            assert!((s - a).norm() < 1e-9 * s.norm(), "r={r} {s} {a}");
        }
    }

    #[test]
    fn branch_cut_rejected() {
        let o = BesselOrder::new(0.3);
        assert!(matches!(
            bessel_j_asymptotic(o, Complex64::new(-30.0, 0.5)),
            Err(BesselError::BranchCut { .. })
        ));
    }

    #[test]
    fn nu_alpha_range() {
        for i in 1..100 {
            let nu = nu_alpha(i as f64 / 100.0);
            assert!(nu > 0.0 && nu < 0.5);
        }
    }
}
