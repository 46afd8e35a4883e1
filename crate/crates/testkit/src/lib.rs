//! Independent oracles and seeded synthetic fixtures shared by the test
//! suites. Nothing here calls the solver code it is used to check.

pub mod oracle;
pub mod synth;
