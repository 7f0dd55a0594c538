//! Unsupervised sparse models learned from image patches.

pub mod dictionary;
pub mod multilayer;
pub mod transform;
pub mod union;

pub use dictionary::{dictionary_objective, learn_dictionary_soup, Dictionary, DictionaryFit};
pub use multilayer::{learn_multilayer, MultiLayerFit, MultiLayerModel};
pub use transform::{learn_transform, procrustes_update, transform_objective, Transform, TransformFit};
pub use union::{assign_clusters, learn_ultra, union_objective, ClusterAssignment, UltraFit, UnionTransformModel};
