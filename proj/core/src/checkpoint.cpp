#include "drex/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace drex {

using json = nlohmann::ordered_json;

namespace {

constexpr char kMagic[8] = {'D', 'R', 'E', 'X', 'W', 'T', 'S', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw Error("truncated weight file");
    return value;
}

json config_to_json(const ModelConfig& cfg) {
    json j;
    j["max_len"] = cfg.max_len;
    j["enc_dim"] = cfg.enc_dim;
    j["enc_layers"] = cfg.enc_layers;
    j["enc_heads"] = cfg.enc_heads;
    j["enc_ff"] = cfg.enc_ff;
    j["dec_dim"] = cfg.dec_dim;
    j["dec_layers"] = cfg.dec_layers;
    j["dec_heads"] = cfg.dec_heads;
    j["dec_ff"] = cfg.dec_ff;
    j["bridge_layers"] = cfg.bridge_layers;
    j["max_target_tokens"] = cfg.max_target_tokens;
    j["init_std"] = cfg.init_std;
    j["aggregation"] = std::string(to_string(cfg.aggregation));
    j["label_word_mode"] = std::string(to_string(cfg.label_word_mode));
    j["seed"] = cfg.seed;
    return j;
}

ModelConfig config_from_json(const json& j) {
    ModelConfig cfg;
    cfg.max_len = j.at("max_len").get<int>();
    cfg.enc_dim = j.at("enc_dim").get<int>();
    cfg.enc_layers = j.at("enc_layers").get<int>();
    cfg.enc_heads = j.at("enc_heads").get<int>();
    cfg.enc_ff = j.at("enc_ff").get<int>();
    cfg.dec_dim = j.at("dec_dim").get<int>();
    cfg.dec_layers = j.at("dec_layers").get<int>();
    cfg.dec_heads = j.at("dec_heads").get<int>();
    cfg.dec_ff = j.at("dec_ff").get<int>();
    cfg.bridge_layers = j.at("bridge_layers").get<int>();
    cfg.max_target_tokens = j.at("max_target_tokens").get<int>();
    cfg.init_std = j.at("init_std").get<double>();
    cfg.aggregation = parse_aggregation(j.at("aggregation").get<std::string>());
    cfg.label_word_mode = parse_label_word_mode(j.at("label_word_mode").get<std::string>());
    cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
}

} // namespace

void save_weights(const std::filesystem::path& path,
                  const std::vector<nn::Parameter*>& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write weight file: " + path.string());
    out.write(kMagic, sizeof(kMagic));
    write_pod<std::uint64_t>(out, params.size());
    for (const nn::Parameter* p : params) {
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
        out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        write_pod<std::int64_t>(out, p->value.rows());
        write_pod<std::int64_t>(out, p->value.cols());
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  static_cast<std::streamsize>(sizeof(double) * p->value.size()));
    }
    if (!out) throw Error("write failed: " + path.string());
}

void load_weights(const std::filesystem::path& path,
                  const std::vector<nn::Parameter*>& params) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open weight file: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw Error(path.string() + " is not a weight file");
    }
    const auto count = read_pod<std::uint64_t>(in);

    std::unordered_map<std::string, nn::Matrix> loaded;
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto name_len = read_pod<std::uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const auto rows = read_pod<std::int64_t>(in);
        const auto cols = read_pod<std::int64_t>(in);
        nn::Matrix m(rows, cols);
        in.read(reinterpret_cast<char*>(m.data()),
                static_cast<std::streamsize>(sizeof(double) * m.size()));
        if (!in) throw Error("truncated weight file: " + path.string());
        loaded.emplace(std::move(name), std::move(m));
    }

    for (nn::Parameter* p : params) {
        auto it = loaded.find(p->name);
        if (it == loaded.end()) {
            throw Error(path.string() + " is missing parameter '" + p->name + "'");
        }
        if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols()) {
            throw Error("parameter '" + p->name + "' has shape " +
                        std::to_string(it->second.rows()) + "x" +
                        std::to_string(it->second.cols()) + ", expected " +
                        std::to_string(p->value.rows()) + "x" + std::to_string(p->value.cols()));
        }
        p->value = it->second;
        loaded.erase(it);
    }
    if (!loaded.empty()) {
        throw Error(path.string() + " has unexpected parameter '" +
                    loaded.begin()->first + "'");
    }
}

void save_checkpoint(const JointModel& model, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    auto encoder_side = model.encoder_params();
    for (auto* p : model.head_params()) encoder_side.push_back(p);
    save_weights(dir / "encoder.bin", encoder_side);
    save_weights(dir / "bridge.bin", model.bridge_params());
    save_weights(dir / "decoder.bin", model.decoder_params());

    model.tokenizer().save(dir / "vocab.txt");
    model.verbalizer().save(dir / "verbalizer.tsv");

    json manifest;
    manifest["format"] = "drex-checkpoint";
    manifest["version"] = 1;
    manifest["model"] = config_to_json(model.config());
    json order = json::array();
    for (RelationLabel r : kAllRelations) order.push_back(std::string(to_string(r)));
    manifest["tie_break_order"] = order;
    manifest["vocab_size"] = model.tokenizer().vocab_size();

    std::ofstream out(dir / "manifest.json");
    if (!out) throw Error("cannot write manifest: " + (dir / "manifest.json").string());
    out << manifest.dump(2) << '\n';
}

void load_checkpoint_weights(JointModel& model, const std::filesystem::path& dir) {
    auto encoder_side = model.encoder_params();
    for (auto* p : model.head_params()) encoder_side.push_back(p);
    load_weights(dir / "encoder.bin", encoder_side);
    load_weights(dir / "bridge.bin", model.bridge_params());
    load_weights(dir / "decoder.bin", model.decoder_params());
}

JointModel load_checkpoint(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw Error("cannot open manifest: " + (dir / "manifest.json").string());
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw Error("invalid manifest in " + dir.string() + ": " + e.what());
    }
    if (manifest.value("format", "") != "drex-checkpoint") {
        throw Error(dir.string() + " is not a model checkpoint directory");
    }

    ModelConfig cfg = config_from_json(manifest.at("model"));
    Tokenizer tokenizer = Tokenizer::load(dir / "vocab.txt");
    VerbalizerMap verbalizer = VerbalizerMap::load(dir / "verbalizer.tsv", cfg.aggregation);

    JointModel model(std::move(tokenizer), std::move(verbalizer), cfg);
    const auto expected_vocab = manifest.at("vocab_size").get<std::size_t>();
    if (model.tokenizer().vocab_size() != expected_vocab) {
        throw Error("checkpoint vocabulary size mismatch: manifest says " +
                    std::to_string(expected_vocab) + ", rebuilt model has " +
                    std::to_string(model.tokenizer().vocab_size()));
    }
    load_checkpoint_weights(model, dir);
    return model;
}

} // namespace drex
