pub mod executive;
pub mod export;
pub mod locomotion;
pub mod ltl;
pub mod navigation;
pub mod par;
pub mod perception;
pub mod planner;
pub mod scenario;
pub mod sim;
pub mod workspace;
