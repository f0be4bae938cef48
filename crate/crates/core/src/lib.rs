//! Fixed-effect estimation of nonlinear panel models with indirect-inference
//! and jackknife bias corrections.
//!
//! Estimators are generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! name the usual `f64` instantiations. The Monte Carlo harness works in `f64`.

pub mod error;
pub mod family;
pub mod fe;
pub mod fmt;
pub mod ife;
pub mod jackknife;
pub mod linalg;
pub mod montecarlo;
pub mod neyman_scott;
pub mod panel;
pub mod rng;
pub mod scalar;
pub mod special;

pub use error::{Error, Result};
pub use family::Family;
pub use fe::{fit_fe, FeFit, FeOptions};
pub use ife::{draw_shocks, ife_standard_errors, solve_ife, IfeFit, IfeOptions, IfeStatus, ShockStore};
pub use jackknife::{bc_hn, hbc, JackknifeFit, JackknifeMethod};
pub use montecarlo::{run_design, Design, DesignKind, McResult, Method};
pub use neyman_scott::{ns_experiment, ns_fe, ns_ife, NsDesign};
pub use panel::{load_panel, read_panel, PanelData, Schema};
pub use scalar::Scalar;

pub type Panel = PanelData<f64>;
pub type Fit = FeFit<f64>;
pub type IfeResult = IfeFit<f64>;
pub type Shocks = ShockStore<f64>;
pub type Jackknife = JackknifeFit<f64>;
pub type FeOpts = FeOptions<f64>;
pub type IfeOpts = IfeOptions<f64>;
