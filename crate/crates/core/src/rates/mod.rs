//! Achievable-rate evaluation for every scheme, downlink and uplink.

mod downlink;
mod robust;
mod uplink;

pub use downlink::{
    allocate_common_rate, apply_allocation, rate_downlink, sinr_terms, water_fill_min, with_policy,
    AllocationPolicy, SinrTerm,
};
pub use robust::{average_reports, ergodic_rates, uncertainty_samples, worst_case_rates, ErgodicReport};
pub use uplink::{dominant_face_split, mac_pentagon, rate_uplink, UplinkUser, DOMINANT_FACE_ORDER};
