//! Quaternion algebra over a generic scalar.
//!
//! A quaternion is stored as `w + x i + y j + z k` with `k = ij`. The same
//! value can be read as a pair of complex numbers `ψ₁ + ψ₂ j` where
//! `ψ₁ = w + x i` and `ψ₂ = y + z i`. Arithmetic only needs a commutative
//! ring with negation, so exact rationals work as well as floats.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex;
use num_traits::{Float, Num, One, Zero};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Quaternion<T> {
    pub w: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T> Quaternion<T> {
    pub const fn new(w: T, x: T, y: T, z: T) -> Self {
        Quaternion { w, x, y, z }
    }
}

impl<T: Copy + Num + Neg<Output = T>> Quaternion<T> {
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero(), T::zero())
    }

    pub fn one() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::zero())
    }

    pub fn i() -> Self {
        Self::new(T::zero(), T::one(), T::zero(), T::zero())
    }

    pub fn j() -> Self {
        Self::new(T::zero(), T::zero(), T::one(), T::zero())
    }

    /// The derived unit `k = ij`.
    pub fn k() -> Self {
        Self::new(T::zero(), T::zero(), T::zero(), T::one())
    }

    pub fn from_real(w: T) -> Self {
        Self::new(w, T::zero(), T::zero(), T::zero())
    }

    pub fn from_complex(c: Complex<T>) -> Self {
        Self::new(c.re, c.im, T::zero(), T::zero())
    }

    /// Hamilton product `self · rhs`.
    #[inline]
    pub fn mul(self, rhs: Self) -> Self {
        let (a, b) = (self, rhs);
        Self::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    #[inline]
    pub fn conj(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    #[inline]
    pub fn scale(self, s: T) -> Self {
        Self::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    #[inline]
    pub fn norm_sqr(self) -> T {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    /// Real part.
    #[inline]
    pub fn re(self) -> T {
        self.w
    }

    /// The `i, j, k` part.
    #[inline]
    pub fn imag(self) -> Self {
        Self::new(T::zero(), self.x, self.y, self.z)
    }

    /// The `1, i` part (`ψ₁` of the complex split).
    #[inline]
    pub fn complex_part(self) -> Self {
        Self::new(self.w, self.x, T::zero(), T::zero())
    }

    /// True when the `j` and `k` components are zero.
    pub fn is_complex(self) -> bool {
        self.y.is_zero() && self.z.is_zero()
    }

    /// Split into `(ψ₁, ψ₂)` with `self = ψ₁ + ψ₂ j`.
    pub fn complex_split(self) -> (Complex<T>, Complex<T>) {
        (Complex::new(self.w, self.x), Complex::new(self.y, self.z))
    }

    /// Build `ψ₁ + ψ₂ j`.
    pub fn fuse(psi1: Complex<T>, psi2: Complex<T>) -> Self {
        Self::new(psi1.re, psi1.im, psi2.re, psi2.im)
    }

    /// `(p|q) r = p r q`.
    pub fn sandwich(p: Self, q: Self, r: Self) -> Self {
        p.mul(r).mul(q)
    }
}

impl<T: Float> Quaternion<T> {
    pub fn norm(self) -> T {
        self.norm_sqr().sqrt()
    }

    /// Largest absolute value among the `i, j, k` components.
    pub fn imag_abs_max(self) -> T {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl<T: Copy + Num + Neg<Output = T>> Mul for Quaternion<T> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        Quaternion::mul(self, rhs)
    }
}

impl<T: Copy + Num> Add for Quaternion<T> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Quaternion::new(self.w + rhs.w, self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl<T: Copy + Num> Sub for Quaternion<T> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Quaternion::new(self.w - rhs.w, self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl<T: Copy + Neg<Output = T>> Neg for Quaternion<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Quaternion::new(-self.w, -self.x, -self.y, -self.z)
    }
}

impl<T: Copy + Num> AddAssign for Quaternion<T> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<T: Copy + Num> SubAssign for Quaternion<T> {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<T: Copy + Num + Neg<Output = T>> Zero for Quaternion<T> {
    fn zero() -> Self {
        Quaternion::zero()
    }
    fn is_zero(&self) -> bool {
        self.w.is_zero() && self.x.is_zero() && self.y.is_zero() && self.z.is_zero()
    }
}

impl<T: Copy + Num + Neg<Output = T>> One for Quaternion<T> {
    fn one() -> Self {
        Quaternion::one()
    }
}

impl<T: fmt::Display> fmt::Display for Quaternion<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} + {}i + {}j + {}k)", self.w, self.x, self.y, self.z)
    }
}
