//! Mixture of Gaussian processes with heteroscedastic noise for volatility
//! and covariance forecasting.

pub mod backtest;
pub mod copula;
pub mod data_io;
pub mod error;
pub mod garch;
pub mod gp;
pub mod kernels;
pub mod linalg;
pub mod mgpch;
pub mod optim;
pub mod persist;
pub mod pyp;
pub mod quadrature;
pub mod special;

pub use error::{Error, Result};
