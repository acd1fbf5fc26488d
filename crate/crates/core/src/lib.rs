//! Device-agnostic compute framework for multidimensional image data.
//!
//! Data lives in [`ndarray::Data`] sets that are packed into one aligned
//! buffer per set and registered with a [`session::ComputeSession`] bound to
//! a single device. Kernels are loaded from program sources (or resolved to
//! native routines on the reference CPU backend) and launched through
//! [`process::Process`] objects, which separate one-time setup from repeated
//! launches and can be chained into pipelines that keep intermediates on the
//! device.
//!
//! ```
//! use hetreco::device::DeviceFilter;
//! use hetreco::ndarray::{Data, NDArray};
//! use hetreco::session::ComputeSession;
//!
//! let mut session = ComputeSession::new(hetreco::device::default_platform(), &DeviceFilter::any()).unwrap();
//! session.load_builtin_kernels().unwrap();
//! let image = Data::xdata(NDArray::from_u8(&[2, 2], vec![0, 10, 200, 255]).unwrap());
//! let negated = hetreco::ops::negate(&mut session, &image, None).unwrap();
//! assert_eq!(negated.arrays[0].as_u8().unwrap(), &[255, 245, 55, 0]);
//! ```

pub mod backend;
pub mod device;
pub mod error;
pub mod io;
pub mod kernels;
pub mod ndarray;
pub mod ops;
pub mod process;
pub mod session;

pub use error::{Error, Result};
