pub mod error;
pub mod special;
pub mod channel;
pub mod copula;
pub mod distribution;
pub mod metrics;
pub mod monte_carlo;
pub mod quadrature;
pub mod runner;

#[cfg(test)]
mod oracle;
