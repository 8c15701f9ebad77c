#include "drex/nn/layers.hpp"

#include <cmath>

namespace drex::nn {

Matrix normal_init(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = dist(rng);
        }
    }
    return m;
}

Linear::Linear(ParameterStore& store, Rng& rng, const std::string& name, Eigen::Index in,
               Eigen::Index out, double init_std) {
    w_ = store.add(name + ".w", normal_init(rng, in, out, init_std));
    b_ = store.add(name + ".b", Matrix::Zero(1, out));
}

Var Linear::apply(Graph& g, Var x) const {
    return g.add_rowvec(g.matmul(x, g.param(w_)), g.param(b_));
}

LayerNormParams::LayerNormParams(ParameterStore& store, const std::string& name,
                                 Eigen::Index dim) {
    gain_ = store.add(name + ".gain", Matrix::Ones(1, dim));
    bias_ = store.add(name + ".bias", Matrix::Zero(1, dim));
}

Var LayerNormParams::apply(Graph& g, Var x) const {
    return g.layer_norm(x, g.param(gain_), g.param(bias_));
}

MultiHeadAttention::MultiHeadAttention(ParameterStore& store, Rng& rng, const std::string& name,
                                       Eigen::Index dim, int heads)
    : q_(store, rng, name + ".q", dim, dim),
      k_(store, rng, name + ".k", dim, dim),
      v_(store, rng, name + ".v", dim, dim),
      o_(store, rng, name + ".o", dim, dim),
      heads_(heads),
      dim_(dim) {
    if (dim % heads != 0) {
        throw Error("attention dim " + std::to_string(dim) + " not divisible by " +
                    std::to_string(heads) + " heads");
    }
}

Var MultiHeadAttention::apply(Graph& g, Var query_in, Var kv_in, bool causal) const {
    const Eigen::Index head_dim = dim_ / heads_;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));

    Var q = q_.apply(g, query_in);
    Var k = k_.apply(g, kv_in);
    Var v = v_.apply(g, kv_in);

    const Eigen::Index lq = g.value(q).rows();
    const Eigen::Index lk = g.value(k).rows();

    Var mask{};
    if (causal) {
        if (lq != lk) throw Error("causal attention requires square score matrix");
        Matrix m = Matrix::Zero(lq, lk);
        for (Eigen::Index r = 0; r < lq; ++r) {
            for (Eigen::Index c = r + 1; c < lk; ++c) {
                m(r, c) = -1e30;
            }
        }
        mask = g.constant(std::move(m));
    }

    std::vector<Var> heads;
    heads.reserve(static_cast<std::size_t>(heads_));
    for (int h = 0; h < heads_; ++h) {
        Var qh = g.slice_cols(q, h * head_dim, head_dim);
        Var kh = g.slice_cols(k, h * head_dim, head_dim);
        Var vh = g.slice_cols(v, h * head_dim, head_dim);
        Var scores = g.scale(g.matmul(qh, g.transpose(kh)), inv_sqrt);
        if (causal) {
            scores = g.add(scores, mask);
        }
        Var probs = g.softmax_rows(scores);
        heads.push_back(g.matmul(probs, vh));
    }
    return o_.apply(g, g.concat_cols(heads));
}

std::vector<Parameter*> MultiHeadAttention::params() const {
    std::vector<Parameter*> out;
    for (const Linear* l : {&q_, &k_, &v_, &o_}) {
        auto p = l->params();
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

FeedForward::FeedForward(ParameterStore& store, Rng& rng, const std::string& name,
                         Eigen::Index dim, Eigen::Index hidden)
    : fc1_(store, rng, name + ".fc1", dim, hidden), fc2_(store, rng, name + ".fc2", hidden, dim) {}

Var FeedForward::apply(Graph& g, Var x) const {
    return fc2_.apply(g, g.gelu(fc1_.apply(g, x)));
}

std::vector<Parameter*> FeedForward::params() const {
    auto out = fc1_.params();
    auto p2 = fc2_.params();
    out.insert(out.end(), p2.begin(), p2.end());
    return out;
}

TransformerLayer::TransformerLayer(ParameterStore& store, Rng& rng, const std::string& name,
                                   Eigen::Index dim, int heads, Eigen::Index ff_hidden)
    : ln1_(store, name + ".ln1", dim),
      ln2_(store, name + ".ln2", dim),
      attn_(store, rng, name + ".attn", dim, heads),
      ff_(store, rng, name + ".ff", dim, ff_hidden) {}

Var TransformerLayer::apply(Graph& g, Var x, bool causal, double dropout_p, Rng& dropout_rng,
                            bool train) const {
    Var normed = ln1_.apply(g, x);
    Var attn_out = attn_.apply(g, normed, normed, causal);
    x = g.add(x, g.dropout(attn_out, dropout_p, dropout_rng, train));
    Var ff_out = ff_.apply(g, ln2_.apply(g, x));
    return g.add(x, g.dropout(ff_out, dropout_p, dropout_rng, train));
}

std::vector<Parameter*> TransformerLayer::params() const {
    std::vector<Parameter*> out = ln1_.params();
    for (const auto& more : {ln2_.params(), attn_.params(), ff_.params()}) {
        out.insert(out.end(), more.begin(), more.end());
    }
    return out;
}

DecoderLayer::DecoderLayer(ParameterStore& store, Rng& rng, const std::string& name,
                           Eigen::Index dim, int heads, Eigen::Index ff_hidden)
    : ln1_(store, name + ".ln1", dim),
      ln2_(store, name + ".ln2", dim),
      ln3_(store, name + ".ln3", dim),
      self_attn_(store, rng, name + ".self", dim, heads),
      cross_attn_(store, rng, name + ".cross", dim, heads),
      ff_(store, rng, name + ".ff", dim, ff_hidden) {}

Var DecoderLayer::apply(Graph& g, Var x, Var memory, double dropout_p, Rng& dropout_rng,
                        bool train) const {
    Var normed = ln1_.apply(g, x);
    x = g.add(x, g.dropout(self_attn_.apply(g, normed, normed, /*causal=*/true), dropout_p,
                           dropout_rng, train));
    x = g.add(x, g.dropout(cross_attn_.apply(g, ln2_.apply(g, x), memory, /*causal=*/false),
                           dropout_p, dropout_rng, train));
    Var ff_out = ff_.apply(g, ln3_.apply(g, x));
    return g.add(x, g.dropout(ff_out, dropout_p, dropout_rng, train));
}

std::vector<Parameter*> DecoderLayer::params() const {
    std::vector<Parameter*> out = ln1_.params();
    for (const auto& more :
         {ln2_.params(), ln3_.params(), self_attn_.params(), cross_attn_.params(), ff_.params()}) {
        out.insert(out.end(), more.begin(), more.end());
    }
    return out;
}

} // namespace drex::nn
