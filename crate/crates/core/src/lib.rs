pub mod bases;
pub mod cli;
pub mod connect;
pub mod currents;
pub mod disk;
pub mod integrate;
pub mod model;
pub mod oracle;
pub mod special;
