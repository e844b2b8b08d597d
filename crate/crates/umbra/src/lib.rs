//! Shadow-based adversarial perturbations against black-box image
//! classifiers.
//!
//! The toolkit covers the full loop: synthesize natural-looking polygonal
//! shadows in CIELAB space ([`shadow`]), search their placement with a
//! particle swarm against a query-only classifier ([`pso`], [`attack`]),
//! harden the result against camera variation ([`transforms`]), schedule
//! physical attacks from solar geometry ([`solar`]), and train
//! shadow-augmented defense models ([`classifier`]).
//!
//! The companion guide under `book/` walks through each concept; its code
//! snippets run as doctests of this crate.

pub mod attack;
pub mod bench;
pub mod classifier;
pub mod color;
pub mod dataio;
pub mod error;
pub mod geometry;
pub mod pso;
pub mod raster;
pub mod shadow;
pub mod solar;
pub mod transforms;

pub use attack::{attack_digital, attack_robust, stabilize, AttackConfig, AttackReport, KChoice};
pub use classifier::{Classifier, ConfidenceVector, OracleClassifier, QueryCounter, ToyModel};
pub use color::{lab_to_rgb, rgb_to_lab, LabPixel, RgbPixel};
pub use error::{Error, Result};
pub use geometry::{rasterize, Polygon, RegionMask};
pub use raster::RasterImage;
pub use shadow::{apply_shadow, estimate_k, ShadowSpec, DEFAULT_K};
pub use solar::{project_shadow, scheduled_sweep, solar_position, SceneGeometry, SolarContext};
pub use transforms::{expected_confidence, sample_plan, TransformItem, TransformPlan};

// The guide's code blocks double as doctests so the book can't drift from
// the library.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/color-and-light.md")]
    mod color_and_light {}
    #[doc = include_str!("../../../book/src/shadow-synthesis.md")]
    mod shadow_synthesis {}
    #[doc = include_str!("../../../book/src/swarm-search.md")]
    mod swarm_search {}
    #[doc = include_str!("../../../book/src/attacking-a-classifier.md")]
    mod attacking_a_classifier {}
    #[doc = include_str!("../../../book/src/surviving-the-camera.md")]
    mod surviving_the_camera {}
    #[doc = include_str!("../../../book/src/scheduling-by-sunlight.md")]
    mod scheduling_by_sunlight {}
    #[doc = include_str!("../../../book/src/defense-training.md")]
    mod defense_training {}
}
