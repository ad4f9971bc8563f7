pub mod chemfeat;
pub mod cli;
pub mod credit;
pub mod data;
pub mod env;
pub mod exembank;
pub mod harness;
pub mod molgraph;
pub mod oracles;
pub mod skillbank;
pub mod template;
pub mod wire;
