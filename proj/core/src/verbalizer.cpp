#include "drex/verbalizer.hpp"

#include <array>
#include <fstream>
#include <limits>
#include <unordered_set>

namespace drex {

std::string_view to_string(Aggregation agg) {
    return agg == Aggregation::max ? "max" : "sum";
}

Aggregation parse_aggregation(std::string_view text) {
    if (text == "max") return Aggregation::max;
    if (text == "sum") return Aggregation::sum;
    throw Error("unknown aggregation '" + std::string(text) + "' (expected max or sum)");
}

VerbalizerMap::VerbalizerMap(std::vector<VerbalizerEntry> entries, Aggregation aggregation)
    : entries_(std::move(entries)), aggregation_(aggregation) {
    if (entries_.empty()) {
        throw Error("verbalizer has no entries");
    }
    std::unordered_set<std::string> seen;
    std::array<bool, kNumRelations> covered{};
    segments_.reserve(entries_.size());
    for (const auto& entry : entries_) {
        if (entry.connective.empty()) {
            throw Error("verbalizer entry with empty connective");
        }
        if (!seen.insert(entry.connective).second) {
            throw Error("connective '" + entry.connective + "' appears more than once");
        }
        covered[static_cast<std::size_t>(entry.relation)] = true;
        segments_.push_back(static_cast<int>(entry.relation));
    }
    for (int r = 0; r < kNumRelations; ++r) {
        if (!covered[static_cast<std::size_t>(r)]) {
            throw Error("verbalizer covers no connective for relation " +
                        std::string(to_string(static_cast<RelationLabel>(r))));
        }
    }
}

VerbalizerMap VerbalizerMap::load(const std::filesystem::path& path, Aggregation aggregation) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open verbalizer file: " + path.string());
    std::vector<VerbalizerEntry> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto trimmed = trim(line);
        if (trimmed.empty() || trimmed[0] == '#') continue;
        const auto tab = trimmed.find('\t');
        if (tab == std::string::npos) {
            throw Error(path.string() + ": line " + std::to_string(line_no) +
                        ": expected connective<TAB>Relation");
        }
        const auto connective = trim(trimmed.substr(0, tab));
        const auto relation_text = trim(trimmed.substr(tab + 1));
        auto relation = try_parse_relation(relation_text);
        if (!relation) {
            throw Error(path.string() + ": line " + std::to_string(line_no) +
                        ": unknown relation name '" + relation_text + "'");
        }
        entries.push_back({connective, *relation});
    }
    return VerbalizerMap(std::move(entries), aggregation);
}

void VerbalizerMap::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write verbalizer file: " + path.string());
    for (const auto& entry : entries_) {
        out << entry.connective << '\t' << to_string(entry.relation) << '\n';
    }
}

Eigen::Vector4d VerbalizerMap::aggregate(const Eigen::VectorXd& connective_scores) const {
    if (connective_scores.size() != static_cast<Eigen::Index>(entries_.size())) {
        throw Error("connective score vector has " + std::to_string(connective_scores.size()) +
                    " entries, verbalizer has " + std::to_string(entries_.size()));
    }
    Eigen::Vector4d out;
    if (aggregation_ == Aggregation::sum) {
        out.setZero();
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            out(segments_[i]) += connective_scores(static_cast<Eigen::Index>(i));
        }
    } else {
        out.setConstant(-std::numeric_limits<double>::infinity());
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            out(segments_[i]) =
                std::max(out(segments_[i]), connective_scores(static_cast<Eigen::Index>(i)));
        }
    }
    return out;
}

RelationLabel VerbalizerMap::argmax_relation(const Eigen::Vector4d& relation_scores) {
    int best = 0;
    for (int r = 1; r < kNumRelations; ++r) {
        if (relation_scores(r) > relation_scores(best)) {
            best = r;
        }
    }
    return static_cast<RelationLabel>(best);
}

std::size_t VerbalizerMap::best_connective_for(const Eigen::VectorXd& connective_scores,
                                               RelationLabel relation) const {
    std::size_t best = entries_.size();
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].relation != relation) continue;
        if (best == entries_.size() ||
            connective_scores(static_cast<Eigen::Index>(i)) >
                connective_scores(static_cast<Eigen::Index>(best))) {
            best = i;
        }
    }
    if (best == entries_.size()) {
        throw Error("no connective for relation " + std::string(to_string(relation)));
    }
    return best;
}

} // namespace drex
