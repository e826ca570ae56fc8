//! Polynomials whose vanishing sets realize braids.
//!
//! The pipeline runs from a braid word ([`braid_words`]) through interpolated
//! strand parametrizations ([`strand_param`]) to expanded polynomials
//! ([`constructors`], built on [`poly_algebra`]), with numeric evidence from
//! [`verifier`] and the associated vector fields in [`vector_field`].

pub mod braid_words;
pub mod constructors;
pub mod poly_algebra;
pub mod strand_param;
pub mod trig_interp;
pub mod vector_field;
pub mod verifier;
