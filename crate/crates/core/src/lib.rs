pub mod atlas;
pub mod characteristics;
pub mod cli;
pub mod law;
pub mod malthus;
pub mod moments;
pub mod replicate;
pub mod roots;
pub mod spine;
pub mod stats;
pub mod tree;
