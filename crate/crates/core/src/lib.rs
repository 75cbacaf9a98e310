//! Mixed-criticality schedulability analysis for component-based systems
//! with per-component HC tolerance limits.
//!
//! The crate is organized bottom-up:
//!
//! * [`model`] holds tasks, components and system specs, their validation
//!   and the canonical JSON form.
//! * [`demand`] computes demand bound functions for jobs, tasks and
//!   components.
//! * [`supply`] implements the two-level periodic resource model and its
//!   supply bound function.
//! * [`analysis`] decides schedulability (flat and hierarchical), tightens
//!   virtual deadlines, and maximizes tolerance limits.
//! * [`simulator`] is a deterministic EDF simulator of the runtime
//!   mode-switch semantics.
//! * [`taskgen`] draws random task sets.
//! * [`experiment`] runs the schedulability and PFJ sweeps used by the CLI.

pub mod analysis;
pub mod demand;
pub mod experiment;
pub mod model;
pub mod simulator;
pub mod supply;
pub mod taskgen;
