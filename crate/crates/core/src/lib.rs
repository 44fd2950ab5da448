//! Strategic bidding equilibria in sequentially-cleared day-ahead and
//! ancillary-services electricity markets under three TSO-DSO coordination
//! schemes.
//!
//! The crate is organized around seven subsystems:
//!
//! * [`model`] — immutable market description (networks, resources,
//!   scenarios, bid ladders) and derived quantities.
//! * [`milp`] — solver-agnostic MILP container with a built-in simplex,
//!   SOS1-branching branch-and-bound and MPS interchange.
//! * [`clearing`] — direct LP formulations of the day-ahead market and every
//!   ancillary-services market variant, used for evaluation and as the
//!   reference the bilevel machinery is checked against.
//! * [`mpec`] — per-aggregator single-level MILP built from follower KKT
//!   systems, SOS1 complementarity and exact linearizations.
//! * [`equilibrium`] — iterative best-response loop with convergence
//!   bookkeeping and equilibrium certification.
//! * [`oracle`] — brute-force strategy enumeration used to cross-check best
//!   responses and equilibria on small instances.
//! * [`io`] — JSON case files, CSV result tables and the bundled benchmark
//!   dataset.

pub mod error;
pub mod model;
pub mod clearing;
pub mod data;
pub mod mpec;
pub mod oracle;
pub mod equilibrium;
pub mod io;
pub mod milp;
