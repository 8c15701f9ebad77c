#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "drex/error.hpp"

namespace drex {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// The four top-level discourse relations, in fixed tie-break order.
enum class RelationLabel : int {
    Temporal = 0,
    Comparison = 1,
    Contingency = 2,
    Expansion = 3,
};

inline constexpr std::array<RelationLabel, 4> kAllRelations{
    RelationLabel::Temporal,
    RelationLabel::Comparison,
    RelationLabel::Contingency,
    RelationLabel::Expansion,
};

inline constexpr int kNumRelations = 4;

std::string_view to_string(RelationLabel label);

/// Parses one of {Temporal, Comparison, Contingency, Expansion}; any other
/// string yields nullopt.
std::optional<RelationLabel> try_parse_relation(std::string_view text);

/// Throwing variant of try_parse_relation.
RelationLabel parse_relation(std::string_view text);

/// Two-part explanation: a restatement of the arguments followed by a
/// rationale for the relation. full_text() is the canonical raw form.
struct Explanation {
    std::string restatement;
    std::string rationale;

    std::string full_text() const { return restatement + " " + rationale; }

    bool operator==(const Explanation&) const = default;
};

/// One argument pair. label is absent on unlabeled inference inputs.
struct DiscourseInstance {
    std::string id;
    std::string arg1;
    std::string arg2;
    std::optional<RelationLabel> label;
    std::optional<std::string> connective;
    std::optional<std::string> context;
    std::optional<Explanation> explanation;

    bool operator==(const DiscourseInstance&) const = default;
};

enum class SplitName { train, validation, test };

std::string_view to_string(SplitName name);
SplitName parse_split_name(std::string_view text);

struct DatasetSplit {
    SplitName name = SplitName::train;
    std::vector<DiscourseInstance> instances;

    std::size_t size() const { return instances.size(); }
};

/// A single invariant violation; violations are data, not errors.
struct Violation {
    std::string field;
    std::string message;

    bool operator==(const Violation&) const = default;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

enum class DatasetFormat { native_jsonl, csv_with_header };

/// Loads a dataset split. Every record is validated on the way in; a
/// malformed record aborts the load with its line number and field name.
/// Record order is preserved and no record is silently dropped.
DatasetSplit load_dataset(const std::filesystem::path& path, DatasetFormat format,
                          SplitName name = SplitName::train);

/// Writes the split in the native one-record-per-line format (UTF-8 JSON
/// lines). load_dataset(save_dataset(s)) reproduces s field-for-field.
void save_dataset(const DatasetSplit& split, const std::filesystem::path& path);

/// Checks per-instance invariants: non-empty arguments after whitespace
/// trimming, and explanation parts both non-empty when present.
std::vector<Violation> validate_instance(const DiscourseInstance& inst);

/// Raw key/value record as read from disk, before typed parsing. Used to
/// report violations (e.g. an unknown label string) that cannot be
/// represented in the typed DiscourseInstance.
using RawRecord = std::map<std::string, std::string>;

std::vector<Violation> validate_record(const RawRecord& record);

/// Converts a validated raw record into a typed instance. Throws Error
/// naming the offending field otherwise.
DiscourseInstance instance_from_record(const RawRecord& record);

/// Checks that instance ids are disjoint across the given splits; returns
/// one violation per id that appears in more than one split.
std::vector<Violation> check_disjoint_ids(const std::vector<const DatasetSplit*>& splits);

/// Whitespace trim; whitespace-only fields are treated as empty everywhere.
std::string trim(std::string_view text);

} // namespace drex
