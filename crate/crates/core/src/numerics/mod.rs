pub mod bessel;
pub mod eigen;
pub mod grid;
pub mod interp;
pub mod logscalar;
pub mod quadrature;

pub use bessel::{bessel_i_k_product, bessel_i_k_product_excess, ZArg};
pub use eigen::{symmetric_eigen, Matrix, SymmetricEigen};
pub use grid::{GridScheme, RadialGrid};
pub use logscalar::{log_sum_exp, LogScalar};
pub use quadrature::gauss_legendre;
