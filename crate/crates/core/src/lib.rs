//! Photon statistics and signal-to-noise analysis of bipartite ghost imaging
//! with thermal light and twin beams.
//!
//! The analytic side builds joint photon-number moments of a correlated mode
//! pair ([`moments`]), composes them to pixel and bucket level
//! ([`composition`]) and turns them into the mean contrast and estimator noise
//! of four reconstruction protocols ([`protocols`]). The [`simulator`] draws
//! photon-count frames from the same generative model and measures everything
//! empirically, so each side checks the other.

pub mod composition;
pub mod error;
pub mod geometry;
pub mod moments;
pub mod protocols;
pub mod simulator;

pub use composition::{JointMomentTable, TableLevel};
pub use error::{Error, Result};
pub use geometry::{derive_params, DetectionGeometry, ExperimentParams};
pub use moments::{JointMoments, SingleModeJointMoments, SourceKind};
pub use protocols::{ProtocolKind, SnrResult};
