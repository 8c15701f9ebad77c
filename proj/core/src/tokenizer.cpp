#include "drex/tokenizer.hpp"

#include <array>
#include <cctype>
#include <fstream>

namespace drex {

namespace {

// Longest-first so "</s>" wins over "<s>".
const std::array<std::string_view, 5> kSpecials{"<mask>", "</s>", "<pad>", "<unk>", "<s>"};

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

} // namespace

Tokenizer::Tokenizer() {
    for (auto tok : {pad_token(), unk_token(), bos_token(), sep_token(), mask_token()}) {
        add_token(std::string(tok));
    }
}

int Tokenizer::add_token(const std::string& token) {
    auto it = index_.find(token);
    if (it != index_.end()) {
        return it->second;
    }
    const int id = static_cast<int>(tokens_.size());
    tokens_.push_back(token);
    index_.emplace(token, id);
    return id;
}

int Tokenizer::id_of(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnk : it->second;
}

const std::string& Tokenizer::token(int id) const {
    if (id < 0 || id >= static_cast<int>(tokens_.size())) {
        throw Error("token id " + std::to_string(id) + " out of range");
    }
    return tokens_[static_cast<std::size_t>(id)];
}

std::vector<std::string> Tokenizer::tokenize_text(std::string_view text) const {
    std::vector<std::string> out;
    std::string word;
    auto flush = [&]() {
        if (!word.empty()) {
            out.push_back(word);
            word.clear();
        }
    };

    std::size_t i = 0;
    while (i < text.size()) {
        bool matched_special = false;
        for (auto special : kSpecials) {
            if (text.compare(i, special.size(), special) == 0) {
                flush();
                out.emplace_back(special);
                i += special.size();
                matched_special = true;
                break;
            }
        }
        if (matched_special) continue;

        const char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else if (is_word_char(c)) {
            word.push_back(c);
        } else {
            flush();
            out.push_back(std::string(1, c));
        }
        ++i;
    }
    flush();
    return out;
}

std::vector<int> Tokenizer::ids_of(const std::vector<std::string>& tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& tok : tokens) {
        ids.push_back(id_of(tok));
    }
    return ids;
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
    return ids_of(tokenize_text(text));
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
        if (id == kPad || id == kBos) continue;
        if (id == kSep) break;
        if (!out.empty()) out.push_back(' ');
        out += token(id);
    }
    return out;
}

Tokenizer Tokenizer::from_corpus(const std::vector<std::string>& texts) {
    Tokenizer tok;
    for (const auto& text : texts) {
        for (const auto& word : tok.tokenize_text(text)) {
            tok.add_token(word);
        }
    }
    return tok;
}

void Tokenizer::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write vocabulary file: " + path.string());
    for (const auto& tok : tokens_) {
        out << tok << '\n';
    }
}

Tokenizer Tokenizer::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open vocabulary file: " + path.string());
    Tokenizer tok;
    const std::size_t n_specials = tok.tokens_.size();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line_no <= n_specials) {
            if (line != tok.tokens_[line_no - 1]) {
                throw Error(path.string() + ": line " + std::to_string(line_no) +
                            ": expected special token '" + tok.tokens_[line_no - 1] + "', got '" +
                            line + "'");
            }
            continue;
        }
        tok.add_token(line);
    }
    return tok;
}

} // namespace drex
