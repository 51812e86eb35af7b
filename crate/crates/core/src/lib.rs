pub mod gaussian;
pub mod interferometer;
pub mod qfim;
pub mod fock_oracle;
pub mod probe_design;
pub mod cli;
