pub mod attention;
pub mod discrepancy;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod image;
pub mod io;
pub mod losses;
pub mod ltg;
pub mod reflection;
pub mod rng;

pub use error::{Error, Result};
pub use image::{FeatureVec, Image, LabeledFeature, Modality, Rect};
pub use rng::Rng;
