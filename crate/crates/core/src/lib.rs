//! Bikeshare spatial-equity toolkit.
//!
//! The pipeline runs in stages, one module each:
//!
//! 1. [`gbfs`] discovers systems from a catalog and harvests their live
//!    GBFS feeds into [`gbfs::BikeObservation`]s (docked stations and free bikes).
//! 2. [`snapshot`] archives harvests as append-only CSV snapshots.
//! 3. [`geo`] reverse-geocodes observations to census tracts.
//! 4. [`aggregate`] counts bikes per tract, drops counties with no bikes,
//!    joins demographics, scales predictors to `[0, 1]` and builds the
//!    long-format model frame with docking-type interactions.
//! 5. [`glm`] fits the Poisson regression by IRLS and reports Wald tests.
//!
//! [`synth`] generates seeded synthetic cities with a known generating model.
//! The guide under `book/` walks through each stage; its code listings are
//! compiled and run as doctests of this crate.

pub mod aggregate;
pub mod gbfs;
pub mod geo;
pub mod glm;
pub mod snapshot;
pub mod synth;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/gbfs.md")]
    struct Gbfs;
    #[doc = include_str!("../../../book/src/snapshots.md")]
    struct Snapshots;
    #[doc = include_str!("../../../book/src/geocoding.md")]
    struct Geocoding;
    #[doc = include_str!("../../../book/src/aggregation.md")]
    struct Aggregation;
    #[doc = include_str!("../../../book/src/poisson.md")]
    struct Poisson;
    #[doc = include_str!("../../../book/src/inference.md")]
    struct Inference;
}
