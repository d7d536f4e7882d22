pub mod error;
pub mod numerics;
pub mod scalar;

pub use error::{Error, Result};
pub use numerics::Matrix;
pub use scalar::Real;

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub mod var_model;

pub use var_model::{CompanionForm, LagCovariances, ModelDoc, VarModel};

pub type VarModel64 = VarModel<f64>;
pub type VarModel32 = VarModel<f32>;
pub mod charts;

pub use charts::{build_design, ChartDesign, ChartMode, ChartPoint, Phase, SampleBlock};

pub type ChartDesign64 = ChartDesign<f64>;
pub mod performance;

pub use performance::{FtsResult, RunLengthResult, ShiftSpec, SimOptions};
pub mod estimation;

pub use estimation::{TimeSeriesData, VarFit};
