//! Analytical cost profiles: parameter counts, per-stage FLOPs for one
//! forward pass, and resident-memory estimates.
//!
//! Accounting conventions, applied uniformly across variants:
//!
//! * one multiply-accumulate counts as 2 FLOPs;
//! * plain additions, subtractions and comparisons (ReLU) count 1 each;
//! * softmax costs [`SOFTMAX_FLOPS_PER_ELEMENT`] per attention score
//!   (running max, shifted exponential, row sum, divide);
//! * layer normalization costs [`LAYER_NORM_FLOPS_PER_ELEMENT`] per
//!   element (mean, centered square, normalize, gain and shift);
//! * the 1/sqrt(d_head) attention scaling is absorbable into the query
//!   projection and is not charged separately;
//! * every value is an f64, so bytes are counts times
//!   [`BYTES_PER_VALUE`].

use serde::{Deserialize, Serialize};

use crate::model::{AggregatorMode, EmbeddingMode, TeslaConfig, Variant};

pub const BYTES_PER_VALUE: u64 = 8;
pub const SOFTMAX_FLOPS_PER_ELEMENT: u64 = 5;
pub const LAYER_NORM_FLOPS_PER_ELEMENT: u64 = 7;
/// Width of the trend moving average inside the decomposition baseline.
use crate::model::MOVING_AVERAGE_KERNEL;

/// FLOPs for one forward pass, split by pipeline stage. Stages that a
/// variant does not have are zero. For the vanilla transformer baseline
/// the full-length sequence plays the role the binned sequence plays in
/// the main model, its output projection is counted under
/// `qkv_projection`, and everything after attention (residuals, layer
/// norms, feed-forward, head) lands in `aggregation`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlopsBreakdown {
    pub embedding: u64,
    pub binning: u64,
    pub qkv_projection: u64,
    pub attention_scores: u64,
    pub attention_apply: u64,
    pub softmax: u64,
    pub aggregation: u64,
    pub total: u64,
}

impl FlopsBreakdown {
    /// Score and value mixing together: the part of attention whose cost
    /// grows with the square of the attended sequence length.
    pub fn attention_core(&self) -> u64 {
        self.attention_scores + self.attention_apply
    }
}

fn ma(count: u64) -> u64 {
    2 * count
}

/// Closed-form parameter count; cross-checked in tests against runtime
/// enumeration of every model's tensors.
pub fn count_params(variant: Variant, config: &TeslaConfig) -> u64 {
    let n = config.n as u64;
    let d = config.d as u64;
    let z = config.bins() as u64;
    match variant {
        Variant::Linear | Variant::NLinear => n + 1,
        Variant::DLinear => 2 * n + 2,
        Variant::Transformer => n * d + 12 * d * d + 11 * d + 1,
        Variant::Tesla => {
            let embedding = match config.embedding {
                EmbeddingMode::Local => d,
                EmbeddingMode::LocalGlobal => d + n * d,
            };
            let head = match config.aggregator {
                AggregatorMode::Linear => d + z,
                AggregatorMode::FeedForward => 8 * d * d + 6 * d + 1,
            };
            embedding + n + 3 * d * d + 2 * d + head
        }
    }
}

/// Per-stage FLOPs for one forward pass of one window.
pub fn count_flops(variant: Variant, config: &TeslaConfig) -> FlopsBreakdown {
    let n = config.n as u64;
    let d = config.d as u64;
    let h = config.heads as u64;
    let z = config.bins() as u64;
    let mut f = FlopsBreakdown {
        embedding: 0,
        binning: 0,
        qkv_projection: 0,
        attention_scores: 0,
        attention_apply: 0,
        softmax: 0,
        aggregation: 0,
        total: 0,
    };
    match variant {
        Variant::Linear => {
            // One dot product with the window plus the bias add.
            f.aggregation = ma(n) + 1;
        }
        Variant::NLinear => {
            // Shift by the newest reading, dot product, shift back.
            f.aggregation = n + ma(n) + 1 + 1;
        }
        Variant::DLinear => {
            // Kernel-sized mean per trend point, then the remainder
            // subtraction; both branches end in a dot product and bias.
            f.embedding = n * (MOVING_AVERAGE_KERNEL as u64 + 1) + n;
            f.aggregation = 2 * (ma(n) + 1) + 1;
        }
        Variant::Transformer => {
            // Scale each reading into d channels, add the positional row.
            f.embedding = ma(n * d) + n * d;
            f.qkv_projection = 3 * ma(n * d * d) + ma(n * d * d);
            f.attention_scores = ma(n * n * d);
            f.attention_apply = ma(n * n * d);
            f.softmax = SOFTMAX_FLOPS_PER_ELEMENT * h * n * n;
            let ln = LAYER_NORM_FLOPS_PER_ELEMENT * n * d;
            let residual = n * d;
            let ffn = ma(4 * n * d * d) + 4 * n * d // expand + bias
                + 4 * n * d                         // relu
                + ma(4 * n * d * d) + n * d; // contract + bias
            let head = ma(d) + 1;
            f.aggregation = residual + ln + ffn + residual + ln + head;
        }
        Variant::Tesla => {
            f.embedding = match config.embedding {
                // Scale each reading into d channels.
                EmbeddingMode::Local => ma(n * d),
                // ... plus the shared window summary row and the add.
                EmbeddingMode::LocalGlobal => ma(n * d) + ma(n * d) + n * d,
            };
            // Weighted sum of each bin's rows: every input row is touched
            // exactly once.
            f.binning = ma(n * d);
            f.qkv_projection = 3 * ma(z * d * d);
            // Per head z x d/h against d/h x z; summed over heads the
            // head dimension cancels.
            f.attention_scores = ma(z * z * d);
            f.attention_apply = ma(z * z * d);
            f.softmax = SOFTMAX_FLOPS_PER_ELEMENT * h * z * z;
            let ln = LAYER_NORM_FLOPS_PER_ELEMENT * z * d;
            f.aggregation = match config.aggregator {
                // Feature readout then bin readout.
                AggregatorMode::Linear => ln + ma(z * d) + ma(z),
                AggregatorMode::FeedForward => {
                    ln + ma(4 * z * d * d) + 4 * z * d // expand + bias
                        + 4 * z * d                    // relu
                        + ma(4 * z * d * d) + z * d    // contract + bias
                        + ma(d) + 1 // newest-bin head
                }
            };
        }
    }
    f.total = f.embedding
        + f.binning
        + f.qkv_projection
        + f.attention_scores
        + f.attention_apply
        + f.softmax
        + f.aggregation;
    f
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    /// Forward pass only; intermediate buffers are released as soon as
    /// the next stage has consumed them.
    Inference,
    /// Forward plus backward: every forward activation stays cached for
    /// the backward sweep, and parameters carry gradient and two moment
    /// buffers.
    Training,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryEstimate {
    pub param_count: u64,
    pub param_bytes: u64,
    /// Zero for inference.
    pub grad_bytes: u64,
    /// Two Adam moment buffers per parameter; zero for inference.
    pub optimizer_bytes: u64,
    /// Peak live activation values times eight.
    pub activation_bytes: u64,
    pub total_bytes: u64,
}

/// Activation value counts for one window. Inference reports the peak of
/// the stage-by-stage live set; training reports everything the backward
/// sweep keeps resident plus its largest transient.
fn activation_values(variant: Variant, config: &TeslaConfig, phase: Phase) -> u64 {
    let n = config.n as u64;
    let d = config.d as u64;
    let h = config.heads as u64;
    let z = config.bins() as u64;
    match variant {
        Variant::Linear | Variant::NLinear => n + 1,
        // Window, trend, remainder.
        Variant::DLinear => 3 * n + 1,
        Variant::Tesla => {
            let embed = n + n * d + z * d; // window, rows, bins being built
            let qkv = n + z * d + 3 * z * d;
            let attend = n + 3 * z * d + h * z * z + z * d;
            let norm = n + 2 * z * d + z;
            let aggregate = match config.aggregator {
                AggregatorMode::Linear => n + z * d + z + 1,
                AggregatorMode::FeedForward => n + z * d + 2 * 4 * z * d + z * d + 1,
            };
            match phase {
                Phase::Inference => {
                    [embed, qkv, attend, norm, aggregate].into_iter().max().unwrap()
                }
                Phase::Training => {
                    let head_cache = match config.aggregator {
                        AggregatorMode::Linear => z,
                        AggregatorMode::FeedForward => 2 * 4 * z * d + z * d,
                    };
                    let cached = n          // window
                        + n * d             // embedded rows
                        + z * d             // binned rows
                        + 3 * z * d         // queries, keys, values
                        + h * z * z         // attention probabilities
                        + z * d             // mixed values
                        + z * d + z         // normalization cache
                        + z * d             // normalized rows
                        + head_cache;
                    // Transient: per-head probability and value adjoints.
                    cached + h * z * z + 3 * z * d
                }
            }
        }
        Variant::Transformer => {
            let attn = n + 4 * n * d + h * n * n + n * d;
            let ffn = n + 2 * n * d + 2 * 4 * n * d;
            match phase {
                Phase::Inference => attn.max(ffn),
                Phase::Training => {
                    let cached = n
                        + n * d             // embedded rows
                        + 3 * n * d         // queries, keys, values
                        + h * n * n         // attention probabilities
                        + 2 * n * d         // mixed and projected rows
                        + 2 * (n * d + n)   // two normalization caches
                        + 2 * n * d         // two normalized outputs
                        + 2 * 4 * n * d     // feed-forward hidden pair
                        + n * d; // feed-forward output
                    cached + h * n * n + 3 * n * d
                }
            }
        }
    }
}

pub fn estimate_memory(variant: Variant, config: &TeslaConfig, phase: Phase) -> MemoryEstimate {
    let params = count_params(variant, config);
    let param_bytes = params * BYTES_PER_VALUE;
    let (grad_bytes, optimizer_bytes) = match phase {
        Phase::Inference => (0, 0),
        Phase::Training => (param_bytes, 2 * param_bytes),
    };
    let activation_bytes = activation_values(variant, config, phase) * BYTES_PER_VALUE;
    MemoryEstimate {
        param_count: params,
        param_bytes,
        grad_bytes,
        optimizer_bytes,
        activation_bytes,
        total_bytes: param_bytes + grad_bytes + optimizer_bytes + activation_bytes,
    }
}
