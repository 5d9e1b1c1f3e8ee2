//! Dense networks with hand-written reverse-mode gradients.
//!
//! Every network consumes a [`StateBatch`] (ego rows plus fixed-width object
//! slots with a validity mask). Object slots share one encoder and are
//! reduced by a masked element-wise max, so the slot order does not matter.

mod adam;
mod checkpoint;
mod layers;
mod networks;
mod param;

pub use adam::Adam;
pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use layers::{
    concat_columns, cosine_embed, cosine_embed_batch, masked_max_pool, masked_max_pool_backward, relu, relu_backward,
    Linear,
};
pub use networks::{
    Actor, ActorCache, CriticCache, LayerOp, LayerSpec, NetworkSpec, QuantileCritic, StateEncoder, ValueCache,
    ValueNetwork,
};
pub use param::{soft_update, Module, Param, TargetPair};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub ego_hidden: usize,
    pub object_hidden: usize,
    pub hidden: usize,
    pub embedding_dim: usize,
    pub init_seed_offset: u64,
}

/// Batched network input.
#[derive(Debug, Clone, PartialEq)]
pub struct StateBatch {
    /// `B × 7`
    pub ego: Array2<f64>,
    /// `(B·K) × 5`, row `b·K + k` is slot `k` of sample `b`.
    pub objects: Array2<f64>,
    /// Validity of each object row.
    pub mask: Vec<bool>,
    pub slots: usize,
}

impl StateBatch {
    pub fn len(&self) -> usize {
        self.ego.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stacks `n` copies of each sample (row `b·n + j` = sample `b`).
    pub fn repeat_each(&self, n: usize) -> StateBatch {
        let b = self.len();
        let k = self.slots;
        let ego = Array2::from_shape_fn((b * n, self.ego.ncols()), |(r, c)| self.ego[[r / n, c]]);
        let objects = Array2::from_shape_fn((b * n * k, self.objects.ncols()), |(r, c)| {
            let sample = r / k / n;
            self.objects[[sample * k + r % k, c]]
        });
        let mask = (0..b * n * k).map(|r| self.mask[(r / k / n) * k + r % k]).collect();
        StateBatch { ego, objects, mask, slots: k }
    }
}
