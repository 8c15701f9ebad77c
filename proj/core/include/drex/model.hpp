#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "drex/corpus.hpp"
#include "drex/nn/layers.hpp"
#include "drex/nn/optim.hpp"
#include "drex/templates.hpp"
#include "drex/tokenizer.hpp"
#include "drex/verbalizer.hpp"

namespace drex {

/// Additive Gaussian noise injected into encoder hidden states during a
/// forward pass. layer -1 targets the final hidden states; 0..n-1 target the
/// output of that transformer layer. One draw per forward pass.
struct NoiseSpec {
    double sigma2 = 0.0;
    int layer = -1;
    nn::Rng* rng = nullptr;
};

/// Token-level rendering of a prompt template, with the argument spans
/// tracked so truncation and occlusion never touch the scaffold.
struct TemplateTokens {
    std::vector<int> ids;
    int mask_pos = -1;
    int arg1_start = 0;
    int arg1_len = 0;
    int arg2_start = 0;
    int arg2_len = 0;
};

enum class LabelWordMode { connective, relation_name };

std::string_view to_string(LabelWordMode mode);
LabelWordMode parse_label_word_mode(std::string_view text);

struct ModelConfig {
    int max_len = 128;
    int enc_dim = 64;
    int enc_layers = 2;
    int enc_heads = 4;
    int enc_ff = 128;
    int dec_dim = 64;
    int dec_layers = 2;
    int dec_heads = 4;
    int dec_ff = 128;
    int bridge_layers = 1;
    int max_target_tokens = 64;
    double init_std = 0.02;
    Aggregation aggregation = Aggregation::max;
    LabelWordMode label_word_mode = LabelWordMode::connective;
    std::uint64_t seed = 1;
};

struct ClassifierOutput {
    Eigen::VectorXd connective_scores;  // aligned to verbalizer entries
    Eigen::Vector4d relation_scores;
    RelationLabel predicted = RelationLabel::Temporal;
    std::string predicted_connective;
};

// ---------------------------------------------------------------------------
// Components
// ---------------------------------------------------------------------------

/// Masked-LM style transformer encoder. encode() is deterministic in
/// evaluation mode; h_mask is by construction the H_last row at the mask.
class Encoder {
public:
    Encoder(nn::ParameterStore& store, nn::Rng& rng, const ModelConfig& cfg, int vocab_size);

    struct Pass {
        nn::Var h_last;
        nn::Var input_embedding;
        int mask_pos = -1;
    };

    Pass encode(nn::Graph& g, const TemplateTokens& tpl, double dropout_p, nn::Rng* dropout_rng,
                bool train, const NoiseSpec* noise) const;

    std::vector<nn::Parameter*> params() const;
    int dim() const { return dim_; }

private:
    nn::Parameter* tok_emb_ = nullptr;
    nn::Parameter* pos_emb_ = nullptr;
    std::vector<nn::TransformerLayer> layers_;
    nn::LayerNormParams ln_f_;
    int dim_ = 0;
};

/// Masked-LM head: vocabulary logits for one hidden-state row.
class MlmHead {
public:
    MlmHead(nn::ParameterStore& store, nn::Rng& rng, const ModelConfig& cfg, int vocab_size);

    nn::Var apply(nn::Graph& g, nn::Var h_row) const;
    std::vector<nn::Parameter*> params() const;

private:
    nn::Linear dense_;
    nn::LayerNormParams ln_;
    nn::Linear proj_;
};

/// Randomly initialized transformer layer(s) adapting encoder outputs into
/// decoder memory. Shape-conserving; a learned projection maps between
/// encoder and decoder widths only when they differ.
class Bridge {
public:
    Bridge(nn::ParameterStore& store, nn::Rng& rng, const ModelConfig& cfg);

    nn::Var apply(nn::Graph& g, nn::Var h_last, double dropout_p, nn::Rng* dropout_rng,
                  bool train) const;
    std::vector<nn::Parameter*> params() const;
    bool has_projection() const { return static_cast<bool>(proj_); }
    std::vector<nn::TransformerLayer>& layers() { return layers_; }

private:
    std::vector<nn::TransformerLayer> layers_;
    std::optional<nn::Linear> proj_;
};

struct DecodeConfig {
    int max_new_tokens = 48;
    int beam_width = 1;  // 1 = greedy
};

struct DecodeResult {
    std::vector<int> tokens;  // excludes bos/eos
    bool truncated = false;   // budget exhausted before the end token
};

/// Autoregressive cross-attention decoder over a bridge memory.
class Decoder {
public:
    Decoder(nn::ParameterStore& store, nn::Rng& rng, const ModelConfig& cfg, int vocab_size);

    /// Teacher-forced mean cross entropy over the target tokens plus the
    /// end-of-sequence token.
    nn::Var score(nn::Graph& g, nn::Var memory, const std::vector<int>& target,
                  double dropout_p, nn::Rng* dropout_rng, bool train) const;

    DecodeResult generate(const nn::Matrix& memory, const DecodeConfig& cfg) const;

    std::vector<nn::Parameter*> params() const;

private:
    nn::Var forward(nn::Graph& g, nn::Var memory, const std::vector<int>& input_ids,
                    double dropout_p, nn::Rng* dropout_rng, bool train) const;
    DecodeResult greedy(const nn::Matrix& memory, int max_new_tokens) const;
    DecodeResult beam(const nn::Matrix& memory, const DecodeConfig& cfg) const;

    nn::Parameter* tok_emb_ = nullptr;
    nn::Parameter* pos_emb_ = nullptr;
    std::vector<nn::DecoderLayer> layers_;
    nn::LayerNormParams ln_f_;
    nn::Linear out_;
    int max_len_ = 0;
};

// ---------------------------------------------------------------------------
// Joint model
// ---------------------------------------------------------------------------

/// Shared-encoder classification-generation model: prompt+verbalizer
/// classifier, bridge, and label-conditioned explanation decoder.
class JointModel {
public:
    JointModel(Tokenizer tokenizer, VerbalizerMap verbalizer, ModelConfig cfg);

    JointModel(const JointModel&) = delete;
    JointModel& operator=(const JointModel&) = delete;
    JointModel(JointModel&&) = default;
    JointModel& operator=(JointModel&&) = default;

    // --- template token assembly (truncation never touches the scaffold) ---
    TemplateTokens build_classification_tokens(std::string_view arg1, std::string_view arg2,
                                               std::string_view id_hint = "") const;
    TemplateTokens build_generation_tokens(std::string_view arg1, std::string_view arg2,
                                           std::string_view label_word,
                                           std::string_view id_hint = "") const;

    // --- classification ----------------------------------------------------
    struct ClassifyPass {
        ClassifierOutput output;
        nn::Var relation_logits;   // 1 x 4
        nn::Var input_embedding;   // L x enc_dim
        TemplateTokens tpl;
    };

    ClassifyPass classify_tokens(nn::Graph& g, const TemplateTokens& tpl,
                                 const NoiseSpec* noise = nullptr, double dropout_p = 0.0,
                                 nn::Rng* dropout_rng = nullptr, bool train = false) const;
    ClassifyPass classify_pass(nn::Graph& g, std::string_view arg1, std::string_view arg2,
                               const NoiseSpec* noise = nullptr, double dropout_p = 0.0,
                               nn::Rng* dropout_rng = nullptr, bool train = false,
                               std::string_view id_hint = "") const;
    ClassifierOutput classify(std::string_view arg1, std::string_view arg2,
                              const NoiseSpec* noise = nullptr) const;

    // --- generation ---------------------------------------------------------
    struct GenerationScore {
        nn::Var loss;              // teacher-forced mean cross entropy
        nn::Var enc_input_embedding;
        TemplateTokens tpl;
    };

    GenerationScore generation_score_tokens(nn::Graph& g, const TemplateTokens& tpl,
                                            const std::vector<int>& target,
                                            const NoiseSpec* noise = nullptr,
                                            double dropout_p = 0.0, nn::Rng* dropout_rng = nullptr,
                                            bool train = false) const;

    struct Generated {
        std::string text;
        std::vector<int> tokens;
        bool truncated = false;
    };

    Generated generate_tokens(const TemplateTokens& tpl, const DecodeConfig& cfg,
                              const NoiseSpec* noise = nullptr) const;
    Generated generate_explanation(std::string_view arg1, std::string_view arg2,
                                   std::string_view label_word, const DecodeConfig& cfg,
                                   const NoiseSpec* noise = nullptr) const;

    // --- joint training forward ---------------------------------------------
    struct JointForward {
        ClassifierOutput output;
        nn::Var class_loss;  // 1 x 1
        nn::Var gen_loss;    // 1 x 1
    };

    /// Two encoder passes on one tape: T_a for classification, T_b for
    /// teacher-forced generation scoring. Both losses backpropagate into the
    /// shared encoder.
    JointForward forward_joint(nn::Graph& g, const DiscourseInstance& inst, double dropout_p,
                               nn::Rng& dropout_rng, bool train = true) const;

    // --- inference pipeline ---------------------------------------------------
    struct PipelineResult {
        ClassifierOutput output;
        std::string label_word;
        Generated explanation;
    };

    /// Predict the relation, then condition generation on the prediction.
    PipelineResult predict_and_explain(std::string_view arg1, std::string_view arg2,
                                       const DecodeConfig& cfg,
                                       const NoiseSpec* noise = nullptr) const;

    /// Label word inserted into T_b during training: the gold connective (or
    /// relation name under the mode switch); falls back to the verbalizer's
    /// first connective for the gold relation.
    std::string training_label_word(const DiscourseInstance& inst) const;
    std::string inference_label_word(const ClassifierOutput& output) const;

    std::vector<int> explanation_target_tokens(const Explanation& explanation) const;

    // --- accessors -------------------------------------------------------------
    const Tokenizer& tokenizer() const { return tokenizer_; }
    const VerbalizerMap& verbalizer() const { return verbalizer_; }
    const ModelConfig& config() const { return cfg_; }
    const std::vector<int>& connective_token_ids() const { return connective_token_ids_; }
    Bridge& bridge() { return *bridge_; }

    std::vector<nn::Parameter*> encoder_params() const { return encoder_->params(); }
    std::vector<nn::Parameter*> head_params() const { return head_->params(); }
    std::vector<nn::Parameter*> bridge_params() const { return bridge_->params(); }
    std::vector<nn::Parameter*> decoder_params() const { return decoder_->params(); }
    std::vector<nn::Parameter*> all_params() const { return store_->all(); }

private:
    TemplateTokens assemble(std::string_view arg1, std::string_view arg2,
                            const std::vector<std::string>& tail, int mask_tail_offset,
                            std::string_view id_hint) const;

    Tokenizer tokenizer_;
    VerbalizerMap verbalizer_;
    ModelConfig cfg_;
    std::unique_ptr<nn::ParameterStore> store_;
    std::unique_ptr<Encoder> encoder_;
    std::unique_ptr<MlmHead> head_;
    std::unique_ptr<Bridge> bridge_;
    std::unique_ptr<Decoder> decoder_;
    std::vector<int> connective_token_ids_;
};

} // namespace drex
