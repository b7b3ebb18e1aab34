//! Test support: brute-force oracles, an in-process synthetic federation and
//! random federated query generation, plus cutout geometry oracles.

pub mod federation;
pub mod checks;
pub mod gen;
pub mod imaging;
pub mod oracle;
pub mod wire;
