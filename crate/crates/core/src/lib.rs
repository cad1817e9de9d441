pub mod cli;
pub mod csvio;
pub mod forward;
pub mod fractal;
pub mod homotopy;
pub mod inversion;
pub mod oracle;
pub mod propagator;
pub mod quadrature;
pub mod scenario;
pub mod seeds;
pub mod specfun;
