//! Post-hoc diagnostics on sequences of dynamics matrices. Nothing here
//! mutates a policy.

mod contour;
mod eigen;
mod floquet;
mod kreiss;
mod spectral;
mod svd;

pub use contour::{
    cell_report, contour_frame, linspace, marching_squares, stability_contour, ContourFrame,
    SweepSpec,
};
pub use eigen::{eigenvalues, MAX_DIM};
pub use floquet::{
    detect_period, floquet, floquet_trajectory, local_maxima, monodromy, smooth3, ExponentClass,
    FloquetReport, Growth, Window, EXPONENT_TOL,
};
pub use kreiss::{
    kreiss_constant, kreiss_estimate, kreiss_objective, kreiss_sequence, kreiss_trajectory,
    normality_defect, KreissEstimate, KreissMode, KreissReport, KreissSearch, KreissStep,
    DEFAULT_NORMALITY_TOL,
};
pub use spectral::{
    spectral_radius, spectral_report, spectral_report_mat, Classification, SpectralReport, IM_TOL,
};
pub use svd::{sigma_min_shifted, singular_values};
