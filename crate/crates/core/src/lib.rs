//! Rate-splitting multiple access (RSMA) toolkit for the multi-antenna
//! broadcast channel and the uplink multiple-access channel.
//!
//! The crate evaluates achievable rates for rate splitting and its baselines
//! (SDMA, NOMA, OMA, multicast), designs closed-form and optimized precoders
//! and reproduces degrees-of-freedom, rate-region, fairness and
//! operational-region studies at desk scale.
//!
//! ```
//! use rsma::model::{build_stream_layout, Scheme, SystemConfig};
//! use rsma::linalg::CMatrix;
//! use rsma::precoders::{closed_form_solution, PowerSplit};
//! use rsma::rates::rate_downlink;
//!
//! let cfg = SystemConfig::from_snr_db(2, 2, 20.0);
//! let layout = build_stream_layout(Scheme::OneLayerRs, 2, None, None).unwrap();
//! let h = CMatrix::identity(2, 2);
//! let sol = closed_form_solution(&layout, &h, &cfg, PowerSplit::equal(1.0)).unwrap();
//! let report = rate_downlink(&layout, &sol, &h, &cfg).unwrap();
//! assert!((report.sum_rate - 2.0 * 51f64.log2()).abs() < 1e-9);
//! ```

pub mod analysis;
pub mod channels;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod model;
pub mod optimizer;
pub mod precoders;
pub mod rates;

pub use error::{Error, Result};
