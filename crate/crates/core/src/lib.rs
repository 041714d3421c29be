//! Design pipeline for perforated spherical lampshades that project a grayscale image
//! onto a wall.

pub mod ccvt;
pub mod density;
pub mod design;
pub mod error;
pub mod eval;
pub mod geom;
pub mod io;
pub mod mesh;
pub mod scene;
pub mod sim;
pub mod tubes;

pub use error::{Error, Result};
pub use scene::{sample_light, DiskConversion, LampCoord, PointEmitter, Scene, WallCoord};
pub use tubes::{TubeGeometry, TubeKind, TubeSpec};
