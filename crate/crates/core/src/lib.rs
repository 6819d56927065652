//! Simulation and reconstruction of polarization entanglement produced by
//! two-photon interference of q-plate vector modes.
//!
//! The layers build on each other: [`polarization`] (Jones calculus, Bell
//! basis, state metrics), [`modes`] (q-plate vector modes), [`hom`]
//! (beamsplitter, coincidence states, locus analysis, dip model),
//! [`detection`] (camera maps, noise, events), [`tomography`] (maximum
//! likelihood), with [`theory`], [`io`] and [`pipeline`] on top.

pub mod detection;
pub mod error;
pub mod grid;
pub mod hom;
pub mod io;
pub mod modes;
pub mod pipeline;
pub mod polarization;
pub mod theory;
pub mod tomography;

pub use detection::{
    extract_coincidences, marginalize_radial, poisson_sample, probability_map, synthesize_events, AzimuthalBinning,
    EventRecord, EventTiming, SampledFields, Source,
};
pub use error::{Error, Result};
pub use grid::{wrap_angle, CoordGrid, Port};
pub use hom::{
    beamsplitter_transform, bell_coefficients, bell_coefficients_azimuthal, coincidence_state, hom_dip_curve,
    interference_visibility, scan_unique_loci, unique_locus_analysis, BellCoefficients, HomDipModel, LocusReport,
    PortCoordinates,
};
pub use io::CountSlice;
pub use modes::{lg_radial, qplate_apply, vector_mode_field, QPlateParams};
pub use pipeline::{RunConfig, Simulator};
pub use polarization::{
    bell_probabilities, bell_state, fidelity, projection_probability, purity, BellState, DensityMatrix4,
    JonesVector, Polarization, ProjectionSetting, TwoPhotonPolState, C64,
};
pub use tomography::{
    bell_map, mle_reconstruct, negative_log_likelihood, standard_tomo_set, BellMap, CholeskyParams, MleOptions,
    MleResult, TomoSet,
};

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
