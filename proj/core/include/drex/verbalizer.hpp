#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drex/corpus.hpp"

namespace drex {

enum class Aggregation { max, sum };

std::string_view to_string(Aggregation agg);
Aggregation parse_aggregation(std::string_view text);

struct VerbalizerEntry {
    std::string connective;
    RelationLabel relation;
};

/// Connective-word -> relation mapping plus the rule that turns connective
/// scores into relation scores. Every connective maps to exactly one
/// relation and all four relations are covered.
class VerbalizerMap {
public:
    VerbalizerMap(std::vector<VerbalizerEntry> entries, Aggregation aggregation);

    /// Loads "connective<TAB>Relation" lines; '#' starts a comment.
    static VerbalizerMap load(const std::filesystem::path& path, Aggregation aggregation);
    void save(const std::filesystem::path& path) const;

    const std::vector<VerbalizerEntry>& entries() const { return entries_; }
    Aggregation aggregation() const { return aggregation_; }

    /// Relation index (enum value) of entry i; used as the reduction segment.
    const std::vector<int>& segments() const { return segments_; }

    /// Aggregates a connective score vector (aligned to entries()) into the
    /// four relation scores.
    Eigen::Vector4d aggregate(const Eigen::VectorXd& connective_scores) const;

    /// Arg max with ties broken by fixed relation order
    /// (Temporal < Comparison < Contingency < Expansion).
    static RelationLabel argmax_relation(const Eigen::Vector4d& relation_scores);

    /// Highest-scoring connective among those mapping to the given relation;
    /// ties resolve to the earliest entry.
    std::size_t best_connective_for(const Eigen::VectorXd& connective_scores,
                                    RelationLabel relation) const;

private:
    std::vector<VerbalizerEntry> entries_;
    std::vector<int> segments_;
    Aggregation aggregation_;
};

} // namespace drex
