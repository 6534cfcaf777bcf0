pub mod divider;
pub mod error;
pub mod geometry;
pub mod raster;
pub mod text_regions;
pub mod client;
pub mod html;
pub mod prompt;
pub mod synthesis;
pub mod metrics;
pub mod embedding;
pub mod tree_bleu;
pub mod render;
pub mod assembly;
pub mod config;
pub mod pipeline;
