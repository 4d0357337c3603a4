//! Eulerian grid infrastructure: set masks, exact distance transforms,
//! thinnings and thickenings, and the regular-domain diagnostic.

mod edt;
mod grid;
pub mod io;
mod morphology;
mod regularity;
pub mod shapes;

pub use edt::{distance_transform, squared_cell_distances};
pub use grid::{DistanceField, EulerianGrid, MaskKind, SetMask};
pub use morphology::{thicken, thin};
pub use regularity::{regularity_density, RegularityReport};
