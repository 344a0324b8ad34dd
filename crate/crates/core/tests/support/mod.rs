pub mod grid;
pub mod vertex;
