#include "drex/model.hpp"

#include <algorithm>

namespace drex {

namespace {

// Tail of T_b after the label word: ", the main reason is that."
const char* kGenerationTail = ", the main reason is that.";

std::vector<std::string> scaffold_texts() {
    return {
        "Arg1:", ".Arg2:", ".",
        "The conjunction between Arg1 and Arg2 is",
        kGenerationTail,
    };
}

} // namespace

JointModel::JointModel(Tokenizer tokenizer, VerbalizerMap verbalizer, ModelConfig cfg)
    : tokenizer_(std::move(tokenizer)),
      verbalizer_(std::move(verbalizer)),
      cfg_(cfg),
      store_(std::make_unique<nn::ParameterStore>()) {
    // The scaffold, connectives, and relation names must be in-vocabulary
    // before embedding tables are sized.
    for (const auto& text : scaffold_texts()) {
        for (const auto& tok : tokenizer_.tokenize_text(text)) {
            tokenizer_.add_token(tok);
        }
    }
    for (const auto& entry : verbalizer_.entries()) {
        for (const auto& tok : tokenizer_.tokenize_text(entry.connective)) {
            tokenizer_.add_token(tok);
        }
    }
    for (RelationLabel r : kAllRelations) {
        tokenizer_.add_token(std::string(to_string(r)));
    }

    connective_token_ids_.reserve(verbalizer_.entries().size());
    for (const auto& entry : verbalizer_.entries()) {
        // Multi-word connectives are scored by their first token.
        const auto toks = tokenizer_.tokenize_text(entry.connective);
        connective_token_ids_.push_back(tokenizer_.id_of(toks.front()));
    }

    const int vocab = static_cast<int>(tokenizer_.vocab_size());
    nn::Rng rng(cfg_.seed);
    encoder_ = std::make_unique<Encoder>(*store_, rng, cfg_, vocab);
    head_ = std::make_unique<MlmHead>(*store_, rng, cfg_, vocab);
    bridge_ = std::make_unique<Bridge>(*store_, rng, cfg_);
    decoder_ = std::make_unique<Decoder>(*store_, rng, cfg_, vocab);
}

TemplateTokens JointModel::assemble(std::string_view arg1, std::string_view arg2,
                                    const std::vector<std::string>& tail, int mask_tail_offset,
                                    std::string_view id_hint) const {
    auto ids_of_text = [&](std::string_view text) {
        return tokenizer_.ids_of(tokenizer_.tokenize_text(text));
    };

    const std::vector<int> pre = ids_of_text("Arg1:");
    const std::vector<int> mid = ids_of_text(".Arg2:");
    const std::vector<int> post = ids_of_text(".");
    const std::vector<int> stem = ids_of_text("The conjunction between Arg1 and Arg2 is");

    std::vector<int> arg1_ids = ids_of_text(arg1);
    std::vector<int> arg2_ids = ids_of_text(arg2);

    const std::size_t scaffold_len = pre.size() + mid.size() + post.size() + 2 /*sep sep*/ +
                                     stem.size() + tail.size();
    const std::size_t max_len = static_cast<std::size_t>(cfg_.max_len);
    if (scaffold_len > max_len) {
        throw Error("instance '" + std::string(id_hint) +
                    "': template scaffold alone exceeds max sequence length " +
                    std::to_string(cfg_.max_len));
    }

    // Truncate the arguments proportionally from their ends; the scaffold is
    // never cut.
    const std::size_t budget = max_len - scaffold_len;
    if (arg1_ids.size() + arg2_ids.size() > budget) {
        const std::size_t len1 = arg1_ids.size();
        const std::size_t len2 = arg2_ids.size();
        std::size_t keep1 = budget * len1 / (len1 + len2);
        std::size_t keep2 = budget - keep1;
        if (keep2 > len2) {
            keep1 += keep2 - len2;
            keep2 = len2;
        }
        if (keep1 > len1) {
            keep2 = std::min(len2, keep2 + (keep1 - len1));
            keep1 = len1;
        }
        if (budget >= 2) {
            if (keep1 == 0 && len1 > 0 && keep2 > 1) {
                keep1 = 1;
                --keep2;
            }
            if (keep2 == 0 && len2 > 0 && keep1 > 1) {
                keep2 = 1;
                --keep1;
            }
        }
        arg1_ids.resize(keep1);
        arg2_ids.resize(keep2);
    }

    TemplateTokens tpl;
    tpl.ids.reserve(scaffold_len + arg1_ids.size() + arg2_ids.size());
    auto append = [&](const std::vector<int>& part) {
        tpl.ids.insert(tpl.ids.end(), part.begin(), part.end());
    };
    append(pre);
    tpl.arg1_start = static_cast<int>(tpl.ids.size());
    tpl.arg1_len = static_cast<int>(arg1_ids.size());
    append(arg1_ids);
    append(mid);
    tpl.arg2_start = static_cast<int>(tpl.ids.size());
    tpl.arg2_len = static_cast<int>(arg2_ids.size());
    append(arg2_ids);
    append(post);
    tpl.ids.push_back(Tokenizer::kSep);
    tpl.ids.push_back(Tokenizer::kSep);
    append(stem);
    if (mask_tail_offset >= 0) {
        tpl.mask_pos = static_cast<int>(tpl.ids.size()) + mask_tail_offset;
    }
    for (const auto& tok : tail) {
        tpl.ids.push_back(tokenizer_.id_of(tok));
    }
    return tpl;
}

TemplateTokens JointModel::build_classification_tokens(std::string_view arg1,
                                                       std::string_view arg2,
                                                       std::string_view id_hint) const {
    const std::vector<std::string> tail{std::string(Tokenizer::mask_token()), "."};
    return assemble(arg1, arg2, tail, /*mask_tail_offset=*/0, id_hint);
}

TemplateTokens JointModel::build_generation_tokens(std::string_view arg1, std::string_view arg2,
                                                   std::string_view label_word,
                                                   std::string_view id_hint) const {
    std::vector<std::string> tail = tokenizer_.tokenize_text(label_word);
    for (const auto& tok : tokenizer_.tokenize_text(kGenerationTail)) {
        tail.push_back(tok);
    }
    return assemble(arg1, arg2, tail, /*mask_tail_offset=*/-1, id_hint);
}

JointModel::ClassifyPass JointModel::classify_tokens(nn::Graph& g, const TemplateTokens& tpl,
                                                     const NoiseSpec* noise, double dropout_p,
                                                     nn::Rng* dropout_rng, bool train) const {
    auto pass = encoder_->encode(g, tpl, dropout_p, dropout_rng, train, noise);
    if (pass.mask_pos < 0) {
        throw Error("classification template has no mask token");
    }
    nn::Var h_mask = g.slice_rows(pass.h_last, pass.mask_pos, 1);
    nn::Var vocab_logits = head_->apply(g, h_mask);
    nn::Var conn = g.select_cols(vocab_logits, connective_token_ids_);
    const int mode = cfg_.aggregation == Aggregation::max ? 0 : 1;
    nn::Var rel = g.segment_reduce(conn, verbalizer_.segments(), kNumRelations, mode);

    ClassifyPass out;
    out.relation_logits = rel;
    out.input_embedding = pass.input_embedding;
    out.tpl = tpl;
    out.output.connective_scores = g.value(conn).row(0).transpose();
    out.output.relation_scores = g.value(rel).row(0).transpose();
    out.output.predicted = VerbalizerMap::argmax_relation(out.output.relation_scores);
    const std::size_t best =
        verbalizer_.best_connective_for(out.output.connective_scores, out.output.predicted);
    out.output.predicted_connective = verbalizer_.entries()[best].connective;
    return out;
}

JointModel::ClassifyPass JointModel::classify_pass(nn::Graph& g, std::string_view arg1,
                                                   std::string_view arg2, const NoiseSpec* noise,
                                                   double dropout_p, nn::Rng* dropout_rng,
                                                   bool train, std::string_view id_hint) const {
    return classify_tokens(g, build_classification_tokens(arg1, arg2, id_hint), noise, dropout_p,
                           dropout_rng, train);
}

ClassifierOutput JointModel::classify(std::string_view arg1, std::string_view arg2,
                                      const NoiseSpec* noise) const {
    nn::Graph g;
    return classify_pass(g, arg1, arg2, noise).output;
}

JointModel::GenerationScore JointModel::generation_score_tokens(
    nn::Graph& g, const TemplateTokens& tpl, const std::vector<int>& target,
    const NoiseSpec* noise, double dropout_p, nn::Rng* dropout_rng, bool train) const {
    auto pass = encoder_->encode(g, tpl, dropout_p, dropout_rng, train, noise);
    nn::Var memory = bridge_->apply(g, pass.h_last, dropout_p, dropout_rng, train);
    nn::Var loss = decoder_->score(g, memory, target, dropout_p, dropout_rng, train);
    return GenerationScore{loss, pass.input_embedding, tpl};
}

JointModel::Generated JointModel::generate_tokens(const TemplateTokens& tpl,
                                                  const DecodeConfig& cfg,
                                                  const NoiseSpec* noise) const {
    nn::Graph g;
    auto pass = encoder_->encode(g, tpl, 0.0, nullptr, false, noise);
    nn::Var memory = bridge_->apply(g, pass.h_last, 0.0, nullptr, false);
    const DecodeResult decoded = decoder_->generate(g.value(memory), cfg);

    Generated out;
    out.tokens = decoded.tokens;
    out.truncated = decoded.truncated;
    for (int id : decoded.tokens) {
        if (!out.text.empty()) out.text.push_back(' ');
        out.text += tokenizer_.token(id);
    }
    return out;
}

JointModel::Generated JointModel::generate_explanation(std::string_view arg1,
                                                       std::string_view arg2,
                                                       std::string_view label_word,
                                                       const DecodeConfig& cfg,
                                                       const NoiseSpec* noise) const {
    return generate_tokens(build_generation_tokens(arg1, arg2, label_word), cfg, noise);
}

std::vector<int> JointModel::explanation_target_tokens(const Explanation& explanation) const {
    std::vector<int> target = tokenizer_.encode(explanation.full_text());
    const std::size_t cap = static_cast<std::size_t>(
        std::min(cfg_.max_target_tokens, cfg_.max_len - 1));
    if (target.size() > cap) {
        target.resize(cap);
    }
    return target;
}

std::string JointModel::training_label_word(const DiscourseInstance& inst) const {
    if (!inst.label) {
        throw Error("instance '" + inst.id + "' has no gold label");
    }
    if (cfg_.label_word_mode == LabelWordMode::relation_name) {
        return std::string(to_string(*inst.label));
    }
    if (inst.connective && !trim(*inst.connective).empty()) {
        return trim(*inst.connective);
    }
    for (const auto& entry : verbalizer_.entries()) {
        if (entry.relation == *inst.label) {
            return entry.connective;
        }
    }
    throw Error("verbalizer has no connective for relation " +
                std::string(to_string(*inst.label)));
}

std::string JointModel::inference_label_word(const ClassifierOutput& output) const {
    if (cfg_.label_word_mode == LabelWordMode::relation_name) {
        return std::string(to_string(output.predicted));
    }
    return output.predicted_connective;
}

JointModel::JointForward JointModel::forward_joint(nn::Graph& g, const DiscourseInstance& inst,
                                                   double dropout_p, nn::Rng& dropout_rng,
                                                   bool train) const {
    if (!inst.label) {
        throw Error("instance '" + inst.id + "' has no gold label");
    }
    if (!inst.explanation) {
        throw Error("instance '" + inst.id +
                    "' has no explanation; enrich the dataset with build-explanations first");
    }

    auto cls = classify_tokens(g, build_classification_tokens(inst.arg1, inst.arg2, inst.id),
                               nullptr, dropout_p, &dropout_rng, train);
    nn::Var class_loss =
        g.scale(g.log_softmax_pick(cls.relation_logits, static_cast<int>(*inst.label)), -1.0);

    const std::string label_word = training_label_word(inst);
    auto tpl_b = build_generation_tokens(inst.arg1, inst.arg2, label_word, inst.id);
    auto target = explanation_target_tokens(*inst.explanation);
    auto gen = generation_score_tokens(g, tpl_b, target, nullptr, dropout_p, &dropout_rng, train);

    return JointForward{cls.output, class_loss, gen.loss};
}

JointModel::PipelineResult JointModel::predict_and_explain(std::string_view arg1,
                                                           std::string_view arg2,
                                                           const DecodeConfig& cfg,
                                                           const NoiseSpec* noise) const {
    PipelineResult result;
    result.output = classify(arg1, arg2, noise);
    result.label_word = inference_label_word(result.output);
    result.explanation = generate_explanation(arg1, arg2, result.label_word, cfg, noise);
    return result;
}

} // namespace drex
