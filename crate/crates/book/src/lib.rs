//! Guide listings. Each chapter of `book/src` is a module here so that its
//! code blocks run as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/camera.md")]
pub mod camera {}
#[doc = include_str!("../../../book/src/simulator.md")]
pub mod simulator {}
#[doc = include_str!("../../../book/src/controller.md")]
pub mod controller {}
#[doc = include_str!("../../../book/src/labeling.md")]
pub mod labeling {}
#[doc = include_str!("../../../book/src/campaigns.md")]
pub mod campaigns {}
