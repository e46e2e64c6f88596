pub mod audits;
pub mod cell_traces;
pub mod config;
pub mod dense;
pub mod density;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod lattice_states;
pub mod pair;
pub mod projectors;
pub mod quad;
pub mod report;
pub mod scenario;
pub mod wigner;
