//! Trajectory-ensemble simulation of a lossy two-level junction coupled to a
//! harmonic mode held at constant temperature by a Nosé-Hoover chain.
//!
//! The crate is organized bottom-up:
//!
//! - [`model`]: Hamiltonian, closed-form adiabatic basis, forces, couplings,
//!   decay operator.
//! - [`dynamics`]: extended phase-space flow, integrator, per-element weight
//!   propagation.
//! - [`sampling`]: seeded initial ensemble.
//! - [`observables`]: ensemble estimators, trace-law residual, spectra.
//! - [`cli`]: configuration, experiment driver, CSV output.

/// Implements `name`, `Display` and `FromStr` for a keyword-valued enum.
macro_rules! keyword_enum {
    ($ty:ty, $($variant:path => $name:literal),+ $(,)?) => {
        impl $ty {
            pub fn name(self) -> &'static str {
                match self { $($variant => $name),+ }
            }
        }

        impl ::std::fmt::Display for $ty {
            fn fmt(&self, f: &mut ::std::fmt::Formatter<'_>) -> ::std::fmt::Result {
                f.write_str(self.name())
            }
        }

        impl ::std::str::FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> ::std::result::Result<Self, String> {
                match s.trim() {
                    $($name => Ok($variant),)+
                    other => Err(format!(
                        "must be one of {{{}}}, got '{}'",
                        [$($name),+].join(" | "),
                        other
                    )),
                }
            }
        }
    };
}

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod observables;
pub mod sampling;

pub use dynamics::{ElementTrajectory, ExtendedPoint};
pub use error::{Error, Result};
pub use model::{AdiabaticPair, AdiabaticState, ModelParams};
pub use observables::{Ensemble, ObservableSeries, QuantumMatrix2};
