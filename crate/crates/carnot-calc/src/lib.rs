//! Sub-Riemannian calculus of hypersurfaces in Carnot groups.
//!
//! Groups are given in exponential coordinates ([`carnot_group`]), functions are differentiated
//! along the horizontal frame ([`field_calculus`]), and hypersurfaces are handled either as level
//! sets or as parametrised patches in the first Heisenberg group ([`hypersurface`]). On top of
//! that sit the horizontal mean curvature ([`curvature`]), the H-perimeter and its integral
//! identities ([`measure`]), the first and second variation and stability ([`variation`]), and a
//! battery of pointwise frame identities ([`identities`]) over named test surfaces ([`catalog`]).
//!
//! Everything is generic over the scalar type; the aliases below fix it to `f64`.

pub mod carnot_group;
pub mod catalog;
pub mod curvature;
pub mod error;
pub mod expr;
pub mod field_calculus;
pub mod hypersurface;
pub mod identities;
pub mod measure;
pub mod numerics;
pub mod scalar;
pub mod surface_function;
pub mod variation;

pub use error::{CalcError, Result};
pub use scalar::Real;

pub type Group = carnot_group::StratifiedGroup<f64>;
pub type Field = field_calculus::ScalarField<f64>;
pub type Engine = field_calculus::DerivativeEngine<f64>;
pub type LevelSet = hypersurface::LevelSetSurface<f64>;
pub type Patch = hypersurface::ParamPatch<f64>;
pub type Intrinsic = hypersurface::IntrinsicGraph<f64>;
pub type Frame = hypersurface::SurfaceFrame<f64>;
pub type Function = surface_function::SurfaceFunction<f64>;
pub type TestBump = surface_function::Bump<f64>;
pub type Deformation = variation::DeformationField<f64>;
pub type Surface = catalog::CatalogSurface<f64>;
