#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli_io;
pub mod density_matrix;
pub mod error;
pub mod green_dyson;
pub mod hartree_fock;
pub mod hydrogenic_spectrum;
pub mod linalg;
pub mod many_body_oracle;
pub mod model_system;
pub mod quasiparticle;
