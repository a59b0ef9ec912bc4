//! Exact rationals, Gaussian rationals and 3D rational vectors.

mod gaussian;
mod linear;
mod rat;
mod rat3;
mod rigid;
mod roots;

pub use gaussian::{norm_sq, GaussianRat};
pub use linear::{recover_rotation, solve_2x2, RotationBounds};
pub use rat::{is_u_rational, sum_precision_bound, BigRat, ParseRatError, PrecisionBound};
pub use rat3::{dist_sq, orient3, Mat3, Point, Rat3};
pub use rigid::{householder, recover_rigid, rotation_aligning, RigidMotion};
pub use roots::{pow2root_in_qi, sqrt_in_qi};
