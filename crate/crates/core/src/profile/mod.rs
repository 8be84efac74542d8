//! Ground state of `−ΔU + U = U^p`, its rescalings and tangent frames.

mod constants;
mod scaled;
mod shoot;

pub use constants::{profile_constants, ProfileConstants};
pub use scaled::{
    discrete_ground_state, ground_state_lambda_derivative, ground_state_newton, scaled_profile, tangent_frame, FrameDiagnostics, GroundStateReport,
    ScaledProfile, TangentFrame,
};
pub use shoot::{shoot_ground_state, RadialProfile};

