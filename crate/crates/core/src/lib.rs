//! Synthetic UAV-to-gNB received-signal-strength sequences.
//!
//! The crate builds a 3-D urban scene with ground base stations (gNBs),
//! computes per-gNB power maps, flies random street-following UAV
//! trajectories through them, and trains a conditional transformer GAN that
//! generates RSS windows from distance windows and a gNB label. Metrics and a
//! handover simulation evaluate the generated sequences.

pub mod cgan;
pub mod dataset;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod scene;
pub mod syseval;
pub mod trajectories;

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/scene.md")]
    mod scene {}
    #[doc = include_str!("../../../book/src/trajectories.md")]
    mod trajectories {}
    #[doc = include_str!("../../../book/src/dataset.md")]
    mod dataset {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/syseval.md")]
    mod syseval {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
}
