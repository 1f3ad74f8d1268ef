//! Functional data analysis over the registered beat grid: B-spline
//! projection smoothing and functional principal component analysis.

mod basis;
mod pca;

pub use basis::{build_basis, smooth, smoothed_mean, BasisId, FdaError, SplineBasis, SplineFit};
pub use pca::{fpca, reconstruct, PcaDecomposition};
