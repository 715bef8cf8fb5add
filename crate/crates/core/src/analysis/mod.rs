//! Degrees of freedom, operational regions and experiment recipes.

pub mod dof;
pub mod experiments;
pub mod region;

pub use dof::{alpha_ratio, dof_closed_form, empirical_dof, Dof, DofCsit, DofMetric, DofQuery, DofScheme, SlopeFit};
pub use experiments::*;
pub use region::{
    apply_region_rules, classify_cell, classify_operational_region, compare_schemes, lift_to_rs, region_csv,
    RegionCell, RegionLabel, RegionSpec, SchemeWsr, DEFAULT_EPSILON, REGION_CSV_HEADER,
};
