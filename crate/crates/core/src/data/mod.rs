//! Data generation: glyph bank, rotated environments, augmentation, client splits, IDX ingestion.

mod env;
mod glyph;
mod idx;
mod split;
mod transform;

pub use env::{make_environments, EnvRole, Environment, Sample};
pub use glyph::{
    catalog_name, catalog_size, draw_ring, make_glyph_bank, ClassPrototype, Glyph, PrototypeSet, STROKE_WIDTH,
};
pub use idx::{
    encode_idx_images, encode_idx_labels, load_idx_dataset, parse_idx_images, parse_idx_labels, IMAGES_MAGIC,
    LABELS_MAGIC,
};
pub use split::{dirichlet_split, largest_remainder, sample_dirichlet, SplitSpec};
pub use transform::{
    apply_augmentation, draw_rotation_angle, gaussian_blur, gaussian_kernel, rotate_image, AugmentationSpec,
};
