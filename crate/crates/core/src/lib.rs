//! Exact computations with operators between spaces of continuous functions
//! on countable compacta: kernels, embedding constants, set-valued maps and
//! the reductions that produce embedding witnesses.

pub mod constructions;
pub mod error;
pub mod format;
pub mod function;
pub mod gallery;
pub mod kernel;
pub mod lp;
pub mod measure;
pub mod norms;
pub mod random;
pub mod rational;
pub mod reductions;
pub mod report;
pub mod selftest;
pub mod setmap;
pub mod space;
pub mod subset;
pub mod template;

pub use error::{Error, Result};
pub use function::{BlockValues, Func};
pub use kernel::{validate_kernel, Kernel, RowTemplate};
pub use measure::{check_variation_semicontinuity, path_limit, Meas, MeasPath};
pub use rational::Q;
pub use report::{Clause, Report, Verdict};
pub use space::{Block, BlockKind, Index, Point, PointEmbedding, Space};
pub use subset::{closed_subspace, IndexSet, Subset, Trace};
pub use template::{ResidueClass, Target};
