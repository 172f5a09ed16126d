//! Dataset readers, synthetic sequence tasks and checkpoint persistence.

mod checkpoint;
mod idx;
mod synth;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, read_checkpoint_header, save_checkpoint, CheckpointHeader,
    CHECKPOINT_MAGIC, FORMAT_VERSION,
};
pub use idx::{load_mnist, read_idx_images, read_idx_labels, Dataset, Split, IMAGES_MAGIC, LABELS_MAGIC};
pub use synth::{synth_copy_task, CopyBatch};
