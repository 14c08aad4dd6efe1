//! Distribution-feeder protection testbed.
//!
//! The crate is organized along the simulation pipeline:
//!
//! * [`netmodel`] : network data model, DSS parser, directed topology queries.
//! * [`powerflow`] : unbalanced three-phase steady-state solver.
//! * [`shortcircuit`] : fault stamping and during-fault solutions.
//! * [`scenario`] : profiles, seeded scenario draws and random faults.
//! * [`relays`] : the observe/act agent contract and conventional relays.
//! * [`episode`] : reset/step environment, outcome labels and rewards.
//! * [`analytics`] : batch runs, under-reach maps, datasets and the
//!   line-delimited JSON environment server.

pub mod netmodel;
pub mod powerflow;
pub mod scenario;
pub mod shortcircuit;
pub mod episode;
pub mod relays;
pub mod analytics;
