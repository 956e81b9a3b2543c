//! Anchor-based sparse attention: receptive fields `R(v) = N_k(v) ∪ S`,
//! the masked-softmax kernel with SPD bias, its analytic backward, the
//! surrounding pre-norm transformer layer, and a dense comparator.

mod dense;
pub mod gradcheck;
mod layer;
mod rf;
mod sparse;

pub use dense::{dense_attention_backward, dense_attention_forward, DenseActivations};
pub use layer::{
    mean_readout, transformer_layer, AttentionKind, LayerActivations, LayerGradients, LayerNorm,
    SavedAttention, TransformerLayer, TransformerStack,
};
pub use rf::{
    attended_pair_count, augment_subgraph, build_receptive_field, dense_pair_count,
    ReceptiveField, SubgraphBatch,
};
pub use sparse::{
    attention_backward, attention_forward, random_features, AttentionActivations,
    AttentionGradients, AttentionLayerParams, NodeFeatures, MASK_LOGIT,
};
