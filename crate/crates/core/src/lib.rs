pub mod asymptotics;
pub mod discretize;
pub mod eigen;
pub mod landscape;
pub mod par;
pub mod potential;
pub mod symbolics;
pub mod walk;
