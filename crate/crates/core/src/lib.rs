//! Wi-Fi/LTE co-channel coexistence models and inter-network coordination.
//!
//! The crate is layered bottom-up:
//!
//! * [`radio`]: path loss and SINR.
//! * [`mac`]: Bianchi DCF analysis and `(alpha, beta)` efficiency calibration.
//! * [`coexist`]: single Wi-Fi / single LTE link throughput models and the
//!   region classifier.
//! * [`netmodel`]: multi-link topologies, CSMA/interference sets, access
//!   factors and throughput evaluation for a power allocation.
//! * [`optimizer`]: joint and per-RAT log-domain power control plus
//!   time-division channel access.
//! * [`scenario`]: distance sweeps and Monte Carlo scheme comparison.
//! * [`cli`]: configuration loading and CSV reports.

// Negated float comparisons are used to reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod coexist;
pub mod error;
pub mod mac;
pub mod netmodel;
pub mod optimizer;
pub mod radio;
pub mod scenario;

pub use error::{Error, Result};

/// Radio access technology of an access point or link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Technology {
    #[serde(alias = "wi-fi")]
    Wifi,
    Lte,
}

impl Technology {
    pub fn as_str(self) -> &'static str {
        match self {
            Technology::Wifi => "wifi",
            Technology::Lte => "lte",
        }
    }
}

impl std::fmt::Display for Technology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Technology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wifi" | "wi-fi" => Ok(Technology::Wifi),
            "lte" => Ok(Technology::Lte),
            other => Err(Error::Config(format!("unknown technology `{other}`"))),
        }
    }
}
