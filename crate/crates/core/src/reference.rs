//! Published closed forms for the diffusion example
//! `dY = a(1-Y) dt + b Y² ∘ dW`, `Y_0 = 0`, three Picard steps.

use num_rational::BigRational;

use crate::drivers::SymbolicTimeBm;
use crate::error::Result;
use crate::picard::{expected_lifted_signature, expected_response_signature, picard_level1_anchored, VectorField};
use crate::poly::{MultiPoly, Vars};
use crate::words::Word;

/// `E Y(3)^(1)` as printed. The quartic term carries the wrong sign: the
/// expansion gives `+a³b²t⁴/4`, which the Itô correction `b² y³` confirms.
pub const FIRST_MOMENT: &str = "a*t - 1/2*a^2*t^2 + 1/6*a^3*t^3 - 1/4*a^3*b^2*t^4 - 1/10*a^4*b^2*t^5";

/// `E 2Y(3)^(1,1)` as printed.
pub const SECOND_MOMENT: &str = "a^2*t^2 - a^3*t^3 + 7/12*a^4*t^4 - (1/6*a^5 - 7/10*a^4*b^2)*t^5 \
    + (1/36*a^6 - 17/20*a^5*b^2)*t^6 + 191/420*a^6*b^2*t^7 + (-11/105*a^7*b^2 + 21/80*a^6*b^4)*t^8 \
    + (1/144*a^8*b^2 - 43/180*a^7*b^4)*t^9 + 33/700*a^8*b^4*t^10 + 1/50*a^8*b^6*t^11";

pub fn diffusion_field() -> VectorField {
    VectorField::parse(&["a", "b"], &["y"], &[vec!["a*(1-y)", "b*y^2"]]).expect("static field parses")
}

/// `(E Y^(1), 2 E Y^(1,1))` over variables `a, b, t`, from the symbolic
/// `(t, W)` expected signature.
pub fn diffusion_moments(r: usize) -> Result<(MultiPoly, MultiPoly)> {
    let level1 = picard_level1_anchored(&diffusion_field(), r, &[0.0])?;
    let driver = SymbolicTimeBm::new(2, "t")?;
    let first = expected_response_signature(&level1[0], &driver)?;
    let tau = Word::new(&[1, 1], 1)?;
    let second = expected_lifted_signature(&level1, &tau, &driver)?
        .scale(&BigRational::from_integer(2.into()));
    Ok((first, second))
}

/// The published polynomials over the variables of `like`.
pub fn published_moments(like: &Vars) -> Result<(MultiPoly, MultiPoly)> {
    Ok((MultiPoly::parse(FIRST_MOMENT, like)?, MultiPoly::parse(SECOND_MOMENT, like)?))
}
