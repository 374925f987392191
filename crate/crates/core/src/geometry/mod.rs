//! Spatial queries and local surface fitting: kd-tree k-nearest-neighbor
//! search, least-squares plane fits, and Chamfer distance.

mod chamfer;
mod kdtree;
mod plane;

pub use chamfer::chamfer_distance;
pub use kdtree::{knn, KdIndex, Neighborhood};
pub use plane::{fit_plane, fit_plane_points, point_plane_distance, FittedPlane};
