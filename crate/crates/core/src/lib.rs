//! Streaming detection of strongly correlated variable pairs.
//!
//! An `n x p` observation matrix arrives as a stream of additive updates.
//! Each of the `n` rows is summarised by a fast AMS sketch. At query time the
//! row sketches are standardised, grouped through random Cartesian sketches,
//! masked by the bits of an error-correcting code and thresholded, so that the
//! identity of every pair with `|correlation| >= phi` can be decoded without
//! comparing all `n^2` pairs.
//!
//! ```
//! use corrsketch::oracle::{plant_dataset, PlantedSpec};
//! use corrsketch::recovery::{recover, ParamMode, QueryRequest, RecoverOptions, select_parameters};
//! use corrsketch::sketch::{RowSketchStore, SketchTransform};
//! use corrsketch::ecc::Codebook;
//!
//! let spec = PlantedSpec::new(32, 512, vec![(3, 17, 0.95)], 7);
//! let planted = plant_dataset(&spec).unwrap();
//!
//! let transform = SketchTransform::from_accuracy(512, 0.1, 0.1, 11).unwrap();
//! let mut store = RowSketchStore::new(transform, 32).unwrap();
//! store.ingest_matrix(&planted.matrix).unwrap();
//! store.standardize().unwrap();
//!
//! let codebook = Codebook::for_indices(32).unwrap();
//! let mut request = QueryRequest::new(0.8, 2, 0.0);
//! request.mode = ParamMode::Practical;
//! request.pi = Some(32);
//! request.gamma = Some(5);
//! request.epsilon = Some(store.transform().epsilon());
//! request.delta = Some(store.transform().delta());
//! let params = select_parameters(32, &request, &codebook).unwrap();
//!
//! let report = recover(&store, &params, &codebook, 99, &RecoverOptions::default()).unwrap();
//! assert!(report.pair_set().contains(&(3, 17)));
//! ```

pub mod bench;
pub mod cartesian;
pub mod ecc;
mod error;
mod hash;
pub mod matmul;
pub mod oracle;
pub mod recovery;
pub mod sketch;
pub mod stream;

pub use error::{Error, Result};
