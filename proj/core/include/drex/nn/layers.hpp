#pragma once

#include <string>
#include <vector>

#include "drex/nn/graph.hpp"

namespace drex::nn {

Matrix normal_init(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev);

class Linear {
public:
    Linear() = default;
    Linear(ParameterStore& store, Rng& rng, const std::string& name, Eigen::Index in,
           Eigen::Index out, double init_std = 0.02);

    Var apply(Graph& g, Var x) const;
    std::vector<Parameter*> params() const { return {w_, b_}; }
    Parameter* weight() const { return w_; }
    Parameter* bias() const { return b_; }

private:
    Parameter* w_ = nullptr;
    Parameter* b_ = nullptr;
};

class LayerNormParams {
public:
    LayerNormParams() = default;
    LayerNormParams(ParameterStore& store, const std::string& name, Eigen::Index dim);

    Var apply(Graph& g, Var x) const;
    std::vector<Parameter*> params() const { return {gain_, bias_}; }

private:
    Parameter* gain_ = nullptr;
    Parameter* bias_ = nullptr;
};

/// Scaled dot-product multi-head attention. Self-attention passes the same
/// node for query and key/value inputs; cross-attention passes the memory
/// as key/value. causal requires square attention.
class MultiHeadAttention {
public:
    MultiHeadAttention() = default;
    MultiHeadAttention(ParameterStore& store, Rng& rng, const std::string& name,
                       Eigen::Index dim, int heads);

    Var apply(Graph& g, Var query_in, Var kv_in, bool causal) const;
    std::vector<Parameter*> params() const;
    Linear& output_proj() { return o_; }

private:
    Linear q_, k_, v_, o_;
    int heads_ = 1;
    Eigen::Index dim_ = 0;
};

class FeedForward {
public:
    FeedForward() = default;
    FeedForward(ParameterStore& store, Rng& rng, const std::string& name, Eigen::Index dim,
                Eigen::Index hidden);

    Var apply(Graph& g, Var x) const;
    std::vector<Parameter*> params() const;
    Linear& second() { return fc2_; }

private:
    Linear fc1_, fc2_;
};

/// Pre-norm transformer block: x += Attn(LN(x)); x += FFN(LN(x)).
/// With a zeroed attention output projection and zeroed second feed-forward
/// weight the block is an exact identity.
class TransformerLayer {
public:
    TransformerLayer() = default;
    TransformerLayer(ParameterStore& store, Rng& rng, const std::string& name, Eigen::Index dim,
                     int heads, Eigen::Index ff_hidden);

    Var apply(Graph& g, Var x, bool causal, double dropout_p, Rng& dropout_rng,
              bool train) const;
    std::vector<Parameter*> params() const;
    MultiHeadAttention& attention() { return attn_; }
    FeedForward& feed_forward() { return ff_; }

private:
    LayerNormParams ln1_, ln2_;
    MultiHeadAttention attn_;
    FeedForward ff_;
};

/// Pre-norm decoder block with causal self-attention and cross-attention
/// over an encoder memory.
class DecoderLayer {
public:
    DecoderLayer() = default;
    DecoderLayer(ParameterStore& store, Rng& rng, const std::string& name, Eigen::Index dim,
                 int heads, Eigen::Index ff_hidden);

    Var apply(Graph& g, Var x, Var memory, double dropout_p, Rng& dropout_rng,
              bool train) const;
    std::vector<Parameter*> params() const;

private:
    LayerNormParams ln1_, ln2_, ln3_;
    MultiHeadAttention self_attn_, cross_attn_;
    FeedForward ff_;
};

} // namespace drex::nn
