//! Scalar fields: 64-bit reals and complex pairs thereof.

use nalgebra::ComplexField;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = nalgebra::Complex<f64>;

/// Runtime tag for the two supported scalar fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScalarField {
    Real64,
    Complex128,
}

impl ScalarField {
    pub fn tag(self) -> u8 {
        match self {
            ScalarField::Real64 => 0,
            ScalarField::Complex128 => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(ScalarField::Real64),
            1 => Some(ScalarField::Complex128),
            _ => None,
        }
    }
}

impl std::fmt::Display for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScalarField::Real64 => write!(f, "real"),
            ScalarField::Complex128 => write!(f, "complex"),
        }
    }
}

/// The element type all operators, groups and bases are generic over.
///
/// Only `f64` and `Complex<f64>` implement it; the bound pins the real field
/// to `f64` so tolerances mean the same thing everywhere.
pub trait Scalar: ComplexField<RealField = f64> + Copy + Send + Sync + 'static {
    const FIELD: ScalarField;

    fn from_re_im(re: f64, im: f64) -> Self;
    fn re(&self) -> f64;
    fn im(&self) -> f64;

    /// A standard-normal draw; complex scalars draw each component.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Scalar for f64 {
    const FIELD: ScalarField = ScalarField::Real64;

    fn from_re_im(re: f64, _im: f64) -> Self {
        re
    }

    fn re(&self) -> f64 {
        *self
    }

    fn im(&self) -> f64 {
        0.0
    }

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

impl Scalar for C64 {
    const FIELD: ScalarField = ScalarField::Complex128;

    fn from_re_im(re: f64, im: f64) -> Self {
        C64::new(re, im)
    }

    fn re(&self) -> f64 {
        self.re
    }

    fn im(&self) -> f64 {
        self.im
    }

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    }
}
