//! Exact algebra of real trigonometric polynomials and vector fields on the
//! torus: products, the saturation closure `F_n`, mode certificates and Lie
//! bracket certificates.

mod certificate;
mod closure;
mod lie;
mod poly;

pub use certificate::{
    leading_product_coefficient, Certificate, CertificateStrategy, FlatCertificate,
    ModeCertifier, PowerTerm,
};
pub use closure::{
    closure_run, expansion_sum, fn_step, fn_step_windowed, initial_space, polarized_product,
    ClosureRun, Echelon, PolarTerm,
};
pub use lie::{
    scaled_gen, vectorfield_certificate, vectorfield_certificate_with, BracketExpression,
    FieldCertifier,
};
pub use poly::{
    index_mode, lie_bracket, mode_index, rational_from_f64, ExactPoly, FloatPoly, Parity,
    Rational, Scalar, TrigPoly, VectorField,
};
