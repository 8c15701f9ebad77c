#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "drex/error.hpp"

namespace drex {

/// Word-level tokenizer with a fixed block of special tokens. Special-token
/// surface forms ("<mask>", "</s>", ...) are recognized verbatim inside
/// running text, so rendered prompt templates tokenize as intended.
class Tokenizer {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kBos = 2;
    static constexpr int kSep = 3;  // doubles as end-of-sequence
    static constexpr int kMask = 4;

    Tokenizer();

    static Tokenizer from_corpus(const std::vector<std::string>& texts);

    /// Splits text into surface tokens; specials come out as single tokens.
    std::vector<std::string> tokenize_text(std::string_view text) const;

    std::vector<int> encode(std::string_view text) const;
    std::vector<int> ids_of(const std::vector<std::string>& tokens) const;

    /// Space-joined surface form; pad and bos are skipped, sep stops output.
    std::string decode(const std::vector<int>& ids) const;

    /// Adds a token if absent; returns its id either way.
    int add_token(const std::string& token);

    /// Id lookup; unknown tokens map to kUnk.
    int id_of(std::string_view token) const;
    bool contains(std::string_view token) const { return id_of(token) != kUnk || token == unk_token(); }

    const std::string& token(int id) const;
    std::size_t vocab_size() const { return tokens_.size(); }

    static std::string_view pad_token() { return "<pad>"; }
    static std::string_view unk_token() { return "<unk>"; }
    static std::string_view bos_token() { return "<s>"; }
    static std::string_view sep_token() { return "</s>"; }
    static std::string_view mask_token() { return "<mask>"; }

    void save(const std::filesystem::path& path) const;
    static Tokenizer load(const std::filesystem::path& path);

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

} // namespace drex
