//! Serialization, configuration files and analysis exports.

mod bundle;
mod config;
mod export;

pub use bundle::{hash_autoencoder, AutoencoderFile, ModelBundle, FORMAT_VERSION};
pub use config::{parse_key_values, RunConfig};
pub use export::{
    action_grid, default_grid_ranges, floquet_json, grid_observation, kreiss_json,
    trajectory_csv, write_contour_frames, write_trajectory, ActionGridExport, TrajectoryFile,
};
