#include "gtdetect/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

#include "gtdetect/errors.hpp"
#include "gtdetect/rng.hpp"
#include "gtdetect/tensor.hpp"

namespace gtdetect::checkpoint {

using nlohmann::json;

std::string fnv1a64_hex(const std::string& data) {
    std::uint64_t hash = 14695981039346656037ULL;
    for (unsigned char c : data) {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    static const char* kDigits = "0123456789abcdef";
    std::string hex(16, '0');
    for (int i = 15; i >= 0; --i) {
        hex[i] = kDigits[hash & 0xF];
        hash >>= 4;
    }
    return hex;
}

std::string records_hash(const std::vector<corpus::TextRecord>& records) {
    std::string canon;
    for (const corpus::TextRecord& r : records) {
        canon += r.id;
        canon += '\x1f';
        canon += r.text;
        canon += '\x1f';
        if (r.label) canon += std::to_string(*r.label);
        canon += '\x1f';
        canon += r.language.value_or("");
        canon += '\x1f';
        canon += r.source.value_or("");
        canon += '\x1f';
        canon += r.generator.value_or("");
        canon += '\x1e';
    }
    return fnv1a64_hex(canon);
}

namespace {

void put_u32le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xFF);
}

std::uint32_t get_u32le(const std::string& data, std::size_t pos) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
    }
    return v;
}

void put_f64le(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    for (int i = 0; i < 8; ++i) out += static_cast<char>((bits >> (8 * i)) & 0xFF);
}

double get_f64le(const std::string& data, std::size_t pos) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
    }
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

json header_json(const Checkpoint& ckpt) {
    json header;
    header["model_config"] = json::parse(ckpt.model_config.to_json_string());
    header["threshold"] = {{"tau", ckpt.threshold.tau},
                           {"grid_step", ckpt.threshold.grid_step},
                           {"objective", ckpt.threshold.objective}};
    header["vocabulary"] = json::parse(ckpt.vocabulary.to_json_string());
    header["fingerprint"] = {
        {"seed", ckpt.fingerprint.seed},
        {"train_config", json::parse(ckpt.fingerprint.train_config.to_json_string())},
        {"train_data_hash", ckpt.fingerprint.train_data_hash},
        {"val_data_hash", ckpt.fingerprint.val_data_hash}};
    json params = json::array();
    for (const models::NamedParam& p : ckpt.parameters) {
        params.push_back({{"name", p.name}, {"shape", p.tensor.shape()}});
    }
    header["parameters"] = params;
    return header;
}

}  // namespace

Checkpoint Checkpoint::from_model(const models::Model& model, const corpus::Vocabulary& vocab,
                                  const evaluation::Threshold& threshold,
                                  const Fingerprint& fingerprint) {
    if (model.config().vocab_size != vocab.size()) {
        throw DataError("checkpoint: model vocab_size " +
                        std::to_string(model.config().vocab_size) +
                        " does not match the vocabulary (" + std::to_string(vocab.size()) + ")");
    }
    Checkpoint ckpt;
    ckpt.model_config = model.config();
    ckpt.threshold = threshold;
    ckpt.vocabulary = vocab;
    ckpt.fingerprint = fingerprint;
    for (const models::NamedParam& p : model.parameters()) {
        ckpt.parameters.push_back(
            {p.name, numcore::Tensor::from(p.tensor.shape(), p.tensor.values())});
    }
    return ckpt;
}

models::Model Checkpoint::restore() const {
    Rng rng(0);
    models::Model model = models::Model::build(model_config, rng);
    std::vector<models::NamedParam>& live = model.parameters();
    if (live.size() != parameters.size()) {
        throw DataError("checkpoint: stores " + std::to_string(parameters.size()) +
                        " parameters, the rebuilt model has " + std::to_string(live.size()));
    }
    for (std::size_t i = 0; i < live.size(); ++i) {
        if (live[i].name != parameters[i].name ||
            live[i].tensor.shape() != parameters[i].tensor.shape()) {
            throw DataError("checkpoint: parameter '" + parameters[i].name +
                            "' does not match the rebuilt model layout");
        }
        live[i].tensor.mutable_values() = parameters[i].tensor.values();
    }
    return model;
}

void Checkpoint::save(const std::string& path) const {
    const std::string header = header_json(*this).dump();

    std::string out;
    out.append(kMagic, sizeof(kMagic));
    put_u32le(out, kFormatVersion);
    put_u32le(out, static_cast<std::uint32_t>(header.size()));
    out += header;
    for (const models::NamedParam& p : parameters) {
        for (double v : p.tensor.values()) put_f64le(out, v);
    }

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw DataError(path + ": cannot open for writing");
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw DataError(path + ": write failed");
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw DataError(path + ": cannot open file");
    std::ostringstream buf;
    buf << file.rdbuf();
    const std::string data = buf.str();

    if (data.size() < sizeof(kMagic) + 8 ||
        std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0) {
        throw DataError(path + ": not a checkpoint file");
    }
    const std::uint32_t version = get_u32le(data, sizeof(kMagic));
    if (version != kFormatVersion) {
        throw DataError(path + ": unsupported checkpoint version " + std::to_string(version) +
                        " (expected " + std::to_string(kFormatVersion) + ")");
    }
    const std::uint32_t header_len = get_u32le(data, sizeof(kMagic) + 4);
    const std::size_t header_start = sizeof(kMagic) + 8;
    if (data.size() < header_start + header_len) {
        throw DataError(path + ": truncated checkpoint header");
    }

    json header;
    try {
        header = json::parse(data.substr(header_start, header_len));
    } catch (const json::exception& e) {
        throw DataError(path + ": malformed checkpoint header: " + e.what());
    }
    static const std::unordered_set<std::string> kKnown = {
        "model_config", "threshold", "vocabulary", "fingerprint", "parameters"};
    for (const auto& [key, value] : header.items()) {
        if (!kKnown.count(key)) {
            throw DataError(path + ": unknown checkpoint header field '" + key + "'");
        }
    }
    for (const std::string& key : kKnown) {
        if (!header.contains(key)) {
            throw DataError(path + ": checkpoint header missing field '" + key + "'");
        }
    }

    Checkpoint ckpt;
    try {
        ckpt.model_config = models::ModelConfig::from_json_string(header["model_config"].dump());
        ckpt.vocabulary = corpus::Vocabulary::from_json_string(header["vocabulary"].dump());

        const json& th = header["threshold"];
        ckpt.threshold.tau = th.at("tau").get<double>();
        ckpt.threshold.grid_step = th.at("grid_step").get<double>();
        ckpt.threshold.objective = th.at("objective").get<std::string>();

        const json& fp = header["fingerprint"];
        ckpt.fingerprint.seed = fp.at("seed").get<std::uint64_t>();
        ckpt.fingerprint.train_config =
            training::TrainConfig::from_json_string(fp.at("train_config").dump());
        ckpt.fingerprint.train_data_hash = fp.at("train_data_hash").get<std::string>();
        ckpt.fingerprint.val_data_hash = fp.at("val_data_hash").get<std::string>();
    } catch (const json::exception& e) {
        throw DataError(path + ": malformed checkpoint header: " + e.what());
    }
    if (!(ckpt.threshold.tau >= 0.0 && ckpt.threshold.tau <= 1.0)) {
        throw DataError(path + ": checkpoint threshold out of range");
    }
    if (ckpt.model_config.vocab_size != ckpt.vocabulary.size()) {
        throw DataError(path + ": checkpoint vocabulary does not match model config");
    }

    std::size_t pos = header_start + header_len;
    for (const json& p : header["parameters"]) {
        if (!p.is_object() || !p.contains("name") || !p.contains("shape")) {
            throw DataError(path + ": malformed parameter entry in checkpoint header");
        }
        const std::string name = p["name"].get<std::string>();
        const std::vector<std::size_t> shape = p["shape"].get<std::vector<std::size_t>>();
        const std::size_t count = numcore::shape_size(shape);
        if (data.size() < pos + count * 8) {
            throw DataError(path + ": truncated parameter block '" + name + "'");
        }
        std::vector<double> values(count);
        for (std::size_t i = 0; i < count; ++i) values[i] = get_f64le(data, pos + i * 8);
        pos += count * 8;
        ckpt.parameters.push_back({name, numcore::Tensor::from(shape, std::move(values))});
    }
    if (pos != data.size()) {
        throw DataError(path + ": trailing bytes after the last parameter block");
    }
    return ckpt;
}

}  // namespace gtdetect::checkpoint
