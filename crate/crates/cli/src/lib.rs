pub mod client;
pub mod simulate;
