pub mod geometry;
pub mod shape;
pub mod bvh;
pub mod demo;
pub mod retarget;
pub mod skin;
pub mod assets;
pub mod pipeline;
pub mod dataset;
