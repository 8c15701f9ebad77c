#include "drex/model.hpp"

#include <algorithm>
#include <cmath>

namespace drex {

std::string_view to_string(LabelWordMode mode) {
    return mode == LabelWordMode::connective ? "connective" : "relation_name";
}

LabelWordMode parse_label_word_mode(std::string_view text) {
    if (text == "connective") return LabelWordMode::connective;
    if (text == "relation_name") return LabelWordMode::relation_name;
    throw Error("unknown label word mode '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------------

Encoder::Encoder(nn::ParameterStore& store, nn::Rng& rng, const ModelConfig& cfg, int vocab_size)
    : ln_f_(store, "enc.ln_f", cfg.enc_dim), dim_(cfg.enc_dim) {
    tok_emb_ = store.add("enc.tok_emb",
                         nn::normal_init(rng, vocab_size, cfg.enc_dim, cfg.init_std));
    pos_emb_ = store.add("enc.pos_emb",
                         nn::normal_init(rng, cfg.max_len, cfg.enc_dim, cfg.init_std));
    layers_.reserve(static_cast<std::size_t>(cfg.enc_layers));
    for (int i = 0; i < cfg.enc_layers; ++i) {
        layers_.emplace_back(store, rng, "enc.layer" + std::to_string(i), cfg.enc_dim,
                             cfg.enc_heads, cfg.enc_ff);
    }
}

Encoder::Pass Encoder::encode(nn::Graph& g, const TemplateTokens& tpl, double dropout_p,
                              nn::Rng* dropout_rng, bool train, const NoiseSpec* noise) const {
    const auto len = static_cast<Eigen::Index>(tpl.ids.size());
    if (len == 0) throw Error("encode: empty token sequence");
    if (len > pos_emb_->value.rows()) {
        throw Error("encode: sequence length " + std::to_string(len) +
                    " exceeds max length " + std::to_string(pos_emb_->value.rows()));
    }

    std::vector<int> positions(tpl.ids.size());
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i);

    nn::Var emb = g.add(g.gather_rows(tok_emb_, tpl.ids), g.gather_rows(pos_emb_, positions));
    nn::Var input_embedding = emb;
    nn::Var x = train && dropout_rng ? g.dropout(emb, dropout_p, *dropout_rng, train) : emb;

    auto maybe_noise = [&](nn::Var h, int layer_index) {
        if (noise && noise->sigma2 > 0.0 && noise->layer == layer_index) {
            if (!noise->rng) throw Error("noise injection requires a seeded generator");
            std::normal_distribution<double> dist(0.0, std::sqrt(noise->sigma2));
            nn::Matrix n(g.value(h).rows(), g.value(h).cols());
            for (Eigen::Index r = 0; r < n.rows(); ++r) {
                for (Eigen::Index c = 0; c < n.cols(); ++c) n(r, c) = dist(*noise->rng);
            }
            return g.add(h, g.constant(std::move(n)));
        }
        return h;
    };

    if (noise && noise->layer != -1 &&
        (noise->layer < 0 || noise->layer >= static_cast<int>(layers_.size()))) {
        throw Error("noise layer selector " + std::to_string(noise->layer) +
                    " out of range (encoder has " + std::to_string(layers_.size()) + " layers)");
    }

    for (std::size_t i = 0; i < layers_.size(); ++i) {
        static nn::Rng dummy_rng;   // unused when train is false
        x = layers_[i].apply(g, x, /*causal=*/false, dropout_p,
                             dropout_rng ? *dropout_rng : dummy_rng, train && dropout_rng);
        x = maybe_noise(x, static_cast<int>(i));
    }
    x = ln_f_.apply(g, x);
    x = maybe_noise(x, -1);

    int mask_pos = -1;
    for (std::size_t i = 0; i < tpl.ids.size(); ++i) {
        if (tpl.ids[i] == Tokenizer::kMask) {
            mask_pos = static_cast<int>(i);
            break;
        }
    }
    return Pass{x, input_embedding, mask_pos};
}

std::vector<nn::Parameter*> Encoder::params() const {
    std::vector<nn::Parameter*> out{tok_emb_, pos_emb_};
    for (const auto& layer : layers_) {
        auto p = layer.params();
        out.insert(out.end(), p.begin(), p.end());
    }
    auto p = ln_f_.params();
    out.insert(out.end(), p.begin(), p.end());
    return out;
}

// ---------------------------------------------------------------------------
// MlmHead
// ---------------------------------------------------------------------------

MlmHead::MlmHead(nn::ParameterStore& store, nn::Rng& rng, const ModelConfig& cfg, int vocab_size)
    : dense_(store, rng, "head.dense", cfg.enc_dim, cfg.enc_dim, cfg.init_std),
      ln_(store, "head.ln", cfg.enc_dim),
      proj_(store, rng, "head.proj", cfg.enc_dim, vocab_size, cfg.init_std) {}

nn::Var MlmHead::apply(nn::Graph& g, nn::Var h_row) const {
    return proj_.apply(g, ln_.apply(g, g.gelu(dense_.apply(g, h_row))));
}

std::vector<nn::Parameter*> MlmHead::params() const {
    auto out = dense_.params();
    for (const auto& more : {ln_.params(), proj_.params()}) {
        out.insert(out.end(), more.begin(), more.end());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bridge
// ---------------------------------------------------------------------------

Bridge::Bridge(nn::ParameterStore& store, nn::Rng& rng, const ModelConfig& cfg) {
    layers_.reserve(static_cast<std::size_t>(cfg.bridge_layers));
    for (int i = 0; i < cfg.bridge_layers; ++i) {
        layers_.emplace_back(store, rng, "bridge.layer" + std::to_string(i), cfg.enc_dim,
                             cfg.enc_heads, cfg.enc_ff);
    }
    if (cfg.enc_dim != cfg.dec_dim) {
        proj_.emplace(store, rng, "bridge.proj", cfg.enc_dim, cfg.dec_dim, cfg.init_std);
    }
}

nn::Var Bridge::apply(nn::Graph& g, nn::Var h_last, double dropout_p, nn::Rng* dropout_rng,
                      bool train) const {
    nn::Var x = h_last;
    static nn::Rng dummy_rng;
    for (const auto& layer : layers_) {
        x = layer.apply(g, x, /*causal=*/false, dropout_p, dropout_rng ? *dropout_rng : dummy_rng,
                        train && dropout_rng);
    }
    if (proj_) {
        x = proj_->apply(g, x);
    }
    return x;
}

std::vector<nn::Parameter*> Bridge::params() const {
    std::vector<nn::Parameter*> out;
    for (const auto& layer : layers_) {
        auto p = layer.params();
        out.insert(out.end(), p.begin(), p.end());
    }
    if (proj_) {
        auto p = proj_->params();
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Decoder
// ---------------------------------------------------------------------------

Decoder::Decoder(nn::ParameterStore& store, nn::Rng& rng, const ModelConfig& cfg, int vocab_size)
    : ln_f_(store, "dec.ln_f", cfg.dec_dim),
      out_(store, rng, "dec.out", cfg.dec_dim, vocab_size, cfg.init_std),
      max_len_(cfg.max_len) {
    tok_emb_ = store.add("dec.tok_emb",
                         nn::normal_init(rng, vocab_size, cfg.dec_dim, cfg.init_std));
    pos_emb_ = store.add("dec.pos_emb",
                         nn::normal_init(rng, cfg.max_len, cfg.dec_dim, cfg.init_std));
    layers_.reserve(static_cast<std::size_t>(cfg.dec_layers));
    for (int i = 0; i < cfg.dec_layers; ++i) {
        layers_.emplace_back(store, rng, "dec.layer" + std::to_string(i), cfg.dec_dim,
                             cfg.dec_heads, cfg.dec_ff);
    }
}

nn::Var Decoder::forward(nn::Graph& g, nn::Var memory, const std::vector<int>& input_ids,
                         double dropout_p, nn::Rng* dropout_rng, bool train) const {
    if (static_cast<int>(input_ids.size()) > max_len_) {
        throw Error("decoder input length " + std::to_string(input_ids.size()) +
                    " exceeds max length " + std::to_string(max_len_));
    }
    std::vector<int> positions(input_ids.size());
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i);

    nn::Var x = g.add(g.gather_rows(tok_emb_, input_ids), g.gather_rows(pos_emb_, positions));
    static nn::Rng dummy_rng;
    if (train && dropout_rng) {
        x = g.dropout(x, dropout_p, *dropout_rng, train);
    }
    for (const auto& layer : layers_) {
        x = layer.apply(g, x, memory, dropout_p, dropout_rng ? *dropout_rng : dummy_rng,
                        train && dropout_rng);
    }
    return out_.apply(g, ln_f_.apply(g, x));
}

nn::Var Decoder::score(nn::Graph& g, nn::Var memory, const std::vector<int>& target,
                       double dropout_p, nn::Rng* dropout_rng, bool train) const {
    std::vector<int> input_ids;
    input_ids.reserve(target.size() + 1);
    input_ids.push_back(Tokenizer::kBos);
    input_ids.insert(input_ids.end(), target.begin(), target.end());

    std::vector<int> targets(target.begin(), target.end());
    targets.push_back(Tokenizer::kSep);  // end-of-sequence
    for (auto& t : targets) {
        if (t == Tokenizer::kPad) t = -1;  // ignored position
    }

    nn::Var logits = forward(g, memory, input_ids, dropout_p, dropout_rng, train);
    return g.cross_entropy_rows(logits, targets);
}

DecodeResult Decoder::greedy(const nn::Matrix& memory, int max_new_tokens) const {
    DecodeResult result;
    if (max_new_tokens <= 0) {
        result.truncated = true;
        return result;
    }
    std::vector<int> input_ids{Tokenizer::kBos};
    for (int step = 0; step < max_new_tokens; ++step) {
        if (static_cast<int>(input_ids.size()) >= max_len_) {
            result.truncated = true;
            return result;
        }
        nn::Graph g;
        nn::Var mem = g.constant(memory);
        nn::Var logits = forward(g, mem, input_ids, 0.0, nullptr, false);
        const nn::Matrix& values = g.value(logits);
        const Eigen::Index last = values.rows() - 1;
        int best = 0;
        for (Eigen::Index c = 1; c < values.cols(); ++c) {
            if (values(last, c) > values(last, best)) best = static_cast<int>(c);
        }
        if (best == Tokenizer::kSep) {
            return result;
        }
        result.tokens.push_back(best);
        input_ids.push_back(best);
    }
    result.truncated = true;
    return result;
}

DecodeResult Decoder::beam(const nn::Matrix& memory, const DecodeConfig& cfg) const {
    struct Hyp {
        std::vector<int> tokens;
        double log_prob = 0.0;
        bool done = false;
    };
    if (cfg.max_new_tokens <= 0) {
        return DecodeResult{{}, true};
    }
    std::vector<Hyp> beams{Hyp{}};
    for (int step = 0; step < cfg.max_new_tokens; ++step) {
        std::vector<Hyp> candidates;
        bool all_done = true;
        for (const auto& hyp : beams) {
            if (hyp.done) {
                candidates.push_back(hyp);
                continue;
            }
            all_done = false;
            std::vector<int> input_ids{Tokenizer::kBos};
            input_ids.insert(input_ids.end(), hyp.tokens.begin(), hyp.tokens.end());
            if (static_cast<int>(input_ids.size()) >= max_len_) {
                Hyp done = hyp;
                done.done = true;
                candidates.push_back(done);
                continue;
            }
            nn::Graph g;
            nn::Var mem = g.constant(memory);
            nn::Var logits = forward(g, mem, input_ids, 0.0, nullptr, false);
            nn::Var log_probs = g.log_softmax_rows(logits);
            const nn::Matrix& lp = g.value(log_probs);
            const Eigen::Index last = lp.rows() - 1;
            // top beam_width continuations of this hypothesis
            std::vector<int> order(static_cast<std::size_t>(lp.cols()));
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
            std::partial_sort(order.begin(),
                              order.begin() + std::min<std::ptrdiff_t>(cfg.beam_width, lp.cols()),
                              order.end(), [&](int a, int b) {
                                  if (lp(last, a) != lp(last, b)) return lp(last, a) > lp(last, b);
                                  return a < b;
                              });
            for (int k = 0; k < cfg.beam_width && k < lp.cols(); ++k) {
                Hyp next = hyp;
                next.log_prob += lp(last, order[static_cast<std::size_t>(k)]);
                if (order[static_cast<std::size_t>(k)] == Tokenizer::kSep) {
                    next.done = true;
                } else {
                    next.tokens.push_back(order[static_cast<std::size_t>(k)]);
                }
                candidates.push_back(std::move(next));
            }
        }
        if (all_done) break;
        std::stable_sort(candidates.begin(), candidates.end(),
                         [](const Hyp& a, const Hyp& b) { return a.log_prob > b.log_prob; });
        if (static_cast<int>(candidates.size()) > cfg.beam_width) {
            candidates.resize(static_cast<std::size_t>(cfg.beam_width));
        }
        beams = std::move(candidates);
    }
    const Hyp* best = &beams.front();
    for (const auto& hyp : beams) {
        if (hyp.log_prob > best->log_prob) best = &hyp;
    }
    return DecodeResult{best->tokens, !best->done};
}

DecodeResult Decoder::generate(const nn::Matrix& memory, const DecodeConfig& cfg) const {
    if (cfg.beam_width <= 1) {
        return greedy(memory, cfg.max_new_tokens);
    }
    return beam(memory, cfg);
}

std::vector<nn::Parameter*> Decoder::params() const {
    std::vector<nn::Parameter*> out{tok_emb_, pos_emb_};
    for (const auto& layer : layers_) {
        auto p = layer.params();
        out.insert(out.end(), p.begin(), p.end());
    }
    for (const auto& more : {ln_f_.params(), out_.params()}) {
        out.insert(out.end(), more.begin(), more.end());
    }
    return out;
}

} // namespace drex
