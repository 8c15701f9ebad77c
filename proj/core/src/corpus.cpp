#include "drex/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace drex {

using json = nlohmann::ordered_json;

namespace {

const std::array<std::string_view, 4> kRelationNames{"Temporal", "Comparison",
                                                     "Contingency", "Expansion"};

constexpr std::string_view kWhitespace = " \t\r\n\f\v";

// Keys accepted in native records and CSV headers.
const std::vector<std::string> kKnownKeys{
    "id",      "arg1",    "arg2",
    "label",   "connective", "context",
    "explanation_restatement", "explanation_rationale",
};

bool is_known_key(const std::string& key) {
    return std::find(kKnownKeys.begin(), kKnownKeys.end(), key) != kKnownKeys.end();
}

} // namespace

std::string trim(std::string_view text) {
    const auto begin = text.find_first_not_of(kWhitespace);
    if (begin == std::string_view::npos) {
        return {};
    }
    const auto end = text.find_last_not_of(kWhitespace);
    return std::string(text.substr(begin, end - begin + 1));
}

std::string_view to_string(RelationLabel label) {
    return kRelationNames[static_cast<int>(label)];
}

std::optional<RelationLabel> try_parse_relation(std::string_view text) {
    for (std::size_t i = 0; i < kRelationNames.size(); ++i) {
        if (text == kRelationNames[i]) {
            return static_cast<RelationLabel>(i);
        }
    }
    return std::nullopt;
}

RelationLabel parse_relation(std::string_view text) {
    if (auto label = try_parse_relation(text)) {
        return *label;
    }
    throw Error("unknown relation label '" + std::string(text) +
                "' (expected one of Temporal, Comparison, Contingency, Expansion)");
}

std::string_view to_string(SplitName name) {
    switch (name) {
        case SplitName::train: return "train";
        case SplitName::validation: return "validation";
        case SplitName::test: return "test";
    }
    return "train";
}

SplitName parse_split_name(std::string_view text) {
    if (text == "train") return SplitName::train;
    if (text == "validation") return SplitName::validation;
    if (text == "test") return SplitName::test;
    throw Error("unknown split name '" + std::string(text) + "'");
}

std::vector<Violation> validate_record(const RawRecord& record) {
    std::vector<Violation> out;
    for (const auto& key : {"id", "arg1", "arg2"}) {
        auto it = record.find(key);
        if (it == record.end() || trim(it->second).empty()) {
            out.push_back({key, std::string(key) + " is missing or empty"});
        }
    }
    if (auto it = record.find("label");
        it != record.end() && !trim(it->second).empty() && !try_parse_relation(trim(it->second))) {
        out.push_back({"label", "unknown relation label '" + trim(it->second) + "'"});
    }
    const bool has_restatement =
        record.count("explanation_restatement") && !trim(record.at("explanation_restatement")).empty();
    const bool has_rationale =
        record.count("explanation_rationale") && !trim(record.at("explanation_rationale")).empty();
    if (has_restatement != has_rationale) {
        const char* missing = has_restatement ? "explanation_rationale" : "explanation_restatement";
        out.push_back({missing, std::string(missing) + " is missing while the other explanation part is present"});
    }
    return out;
}

std::vector<Violation> validate_instance(const DiscourseInstance& inst) {
    std::vector<Violation> out;
    if (trim(inst.id).empty()) {
        out.push_back({"id", "id is empty"});
    }
    if (trim(inst.arg1).empty()) {
        out.push_back({"arg1", "arg1 is empty after whitespace trimming"});
    }
    if (trim(inst.arg2).empty()) {
        out.push_back({"arg2", "arg2 is empty after whitespace trimming"});
    }
    if (inst.explanation) {
        if (trim(inst.explanation->restatement).empty()) {
            out.push_back({"explanation_restatement", "explanation restatement is empty"});
        }
        if (trim(inst.explanation->rationale).empty()) {
            out.push_back({"explanation_rationale", "explanation rationale is empty"});
        }
    }
    return out;
}

DiscourseInstance instance_from_record(const RawRecord& record) {
    const auto violations = validate_record(record);
    if (!violations.empty()) {
        throw Error("invalid record, field " + violations.front().field + ": " +
                    violations.front().message);
    }
    DiscourseInstance inst;
    inst.id = trim(record.at("id"));
    inst.arg1 = trim(record.at("arg1"));
    inst.arg2 = trim(record.at("arg2"));

    auto optional_field = [&](const char* key) -> std::optional<std::string> {
        auto it = record.find(key);
        if (it == record.end()) return std::nullopt;
        auto value = trim(it->second);
        if (value.empty()) return std::nullopt;
        return value;
    };

    if (auto label = optional_field("label")) {
        inst.label = parse_relation(*label);
    }
    inst.connective = optional_field("connective");
    inst.context = optional_field("context");

    auto restatement = optional_field("explanation_restatement");
    auto rationale = optional_field("explanation_rationale");
    if (restatement && rationale) {
        inst.explanation = Explanation{*restatement, *rationale};
    }
    return inst;
}

namespace {

RawRecord record_from_json_line(const std::string& line, std::size_t line_no) {
    json obj;
    try {
        obj = json::parse(line);
    } catch (const json::exception& e) {
        throw Error("line " + std::to_string(line_no) + ": not a valid record: " + e.what());
    }
    if (!obj.is_object()) {
        throw Error("line " + std::to_string(line_no) + ": record is not a key/value object");
    }
    RawRecord record;
    for (const auto& [key, value] : obj.items()) {
        if (!is_known_key(key)) {
            throw Error("line " + std::to_string(line_no) + ": unknown field '" + key + "'");
        }
        if (!value.is_string()) {
            throw Error("line " + std::to_string(line_no) + ": field '" + key +
                        "' must be a string");
        }
        record[key] = value.get<std::string>();
    }
    return record;
}

// Minimal RFC4180-style CSV reader. Quoted fields may contain commas,
// doubled quotes, and newlines.
class CsvReader {
public:
    explicit CsvReader(std::istream& in) : in_(in) {}

    // Returns false at end of input. line_no receives the 1-based line the
    // record started on.
    bool next(std::vector<std::string>& fields, std::size_t& line_no) {
        fields.clear();
        int c = in_.peek();
        if (c == EOF) return false;
        line_no = line_ + 1;

        std::string field;
        bool in_quotes = false;
        bool saw_any = false;
        while (true) {
            c = in_.get();
            if (c == EOF) {
                if (!saw_any && field.empty() && fields.empty()) return false;
                fields.push_back(std::move(field));
                line_ += 1;
                return true;
            }
            saw_any = true;
            if (in_quotes) {
                if (c == '"') {
                    if (in_.peek() == '"') {
                        in_.get();
                        field.push_back('"');
                    } else {
                        in_quotes = false;
                    }
                } else {
                    if (c == '\n') line_ += 1;
                    field.push_back(static_cast<char>(c));
                }
            } else if (c == '"') {
                in_quotes = true;
            } else if (c == ',') {
                fields.push_back(std::move(field));
                field.clear();
            } else if (c == '\r') {
                // swallow; handled with the following '\n'
            } else if (c == '\n') {
                line_ += 1;
                fields.push_back(std::move(field));
                return true;
            } else {
                field.push_back(static_cast<char>(c));
            }
        }
    }

private:
    std::istream& in_;
    std::size_t line_ = 0;
};

std::vector<std::pair<RawRecord, std::size_t>> read_native(std::istream& in) {
    std::vector<std::pair<RawRecord, std::size_t>> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        records.emplace_back(record_from_json_line(line, line_no), line_no);
    }
    return records;
}

std::vector<std::pair<RawRecord, std::size_t>> read_csv(std::istream& in) {
    CsvReader reader(in);
    std::vector<std::string> fields;
    std::size_t line_no = 0;

    if (!reader.next(fields, line_no)) {
        return {};
    }
    std::vector<std::string> header = fields;
    for (auto& h : header) h = trim(h);
    for (const auto& h : header) {
        if (!is_known_key(h)) {
            throw Error("line " + std::to_string(line_no) + ": unknown CSV column '" + h + "'");
        }
    }
    for (const auto& required : {"id", "arg1", "arg2"}) {
        if (std::find(header.begin(), header.end(), required) == header.end()) {
            throw Error("CSV header is missing required column '" + std::string(required) + "'");
        }
    }

    std::vector<std::pair<RawRecord, std::size_t>> records;
    while (reader.next(fields, line_no)) {
        if (fields.size() == 1 && trim(fields[0]).empty()) continue;
        if (fields.size() != header.size()) {
            throw Error("line " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " fields, got " +
                        std::to_string(fields.size()));
        }
        RawRecord record;
        for (std::size_t i = 0; i < header.size(); ++i) {
            record[header[i]] = fields[i];
        }
        records.emplace_back(std::move(record), line_no);
    }
    return records;
}

} // namespace

DatasetSplit load_dataset(const std::filesystem::path& path, DatasetFormat format,
                          SplitName name) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open dataset file: " + path.string());
    }
    std::vector<std::pair<RawRecord, std::size_t>> records;
    try {
        records = format == DatasetFormat::native_jsonl ? read_native(in) : read_csv(in);
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }

    DatasetSplit split;
    split.name = name;
    split.instances.reserve(records.size());

    std::unordered_map<std::string, std::size_t> first_line_by_id;
    for (const auto& [record, line_no] : records) {
        const auto violations = validate_record(record);
        if (!violations.empty()) {
            throw Error(path.string() + ": line " + std::to_string(line_no) + ", field " +
                        violations.front().field + ": " + violations.front().message);
        }
        DiscourseInstance inst = instance_from_record(record);
        auto [it, inserted] = first_line_by_id.emplace(inst.id, line_no);
        if (!inserted) {
            throw Error(path.string() + ": duplicate id '" + inst.id + "' at lines " +
                        std::to_string(it->second) + " and " + std::to_string(line_no));
        }
        split.instances.push_back(std::move(inst));
    }
    return split;
}

void save_dataset(const DatasetSplit& split, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write dataset file: " + path.string());
    }
    for (const auto& inst : split.instances) {
        json obj;
        obj["id"] = inst.id;
        obj["arg1"] = inst.arg1;
        obj["arg2"] = inst.arg2;
        if (inst.label) obj["label"] = std::string(to_string(*inst.label));
        if (inst.connective) obj["connective"] = *inst.connective;
        if (inst.context) obj["context"] = *inst.context;
        if (inst.explanation) {
            obj["explanation_restatement"] = inst.explanation->restatement;
            obj["explanation_rationale"] = inst.explanation->rationale;
        }
        std::string line;
        try {
            line = obj.dump();
        } catch (const json::exception& e) {
            throw Error("instance '" + inst.id + "' is not valid UTF-8: " + e.what());
        }
        out << line << '\n';
    }
    out.flush();
    if (!out) {
        throw Error("write failed: " + path.string());
    }
}

std::vector<Violation> check_disjoint_ids(const std::vector<const DatasetSplit*>& splits) {
    std::vector<Violation> out;
    std::unordered_map<std::string, SplitName> seen;
    for (const DatasetSplit* split : splits) {
        for (const auto& inst : split->instances) {
            auto [it, inserted] = seen.emplace(inst.id, split->name);
            if (!inserted && it->second != split->name) {
                out.push_back({"id", "id '" + inst.id + "' appears in both " +
                                         std::string(to_string(it->second)) + " and " +
                                         std::string(to_string(split->name))});
            }
        }
    }
    return out;
}

} // namespace drex
