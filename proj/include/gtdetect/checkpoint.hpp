#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gtdetect/corpus.hpp"
#include "gtdetect/evaluate.hpp"
#include "gtdetect/model.hpp"
#include "gtdetect/train.hpp"

namespace gtdetect::checkpoint {

inline constexpr char kMagic[8] = {'G', 'T', 'D', 'C', 'K', 'P', 'T', '1'};
inline constexpr std::uint32_t kFormatVersion = 1;

// FNV-1a 64-bit, lowercase hex.
std::string fnv1a64_hex(const std::string& data);

// Hash over a canonical serialization of the records (all fields), used to
// fingerprint the exact training inputs.
std::string records_hash(const std::vector<corpus::TextRecord>& records);

struct Fingerprint {
    std::uint64_t seed = 0;
    training::TrainConfig train_config;
    std::string train_data_hash;
    std::string val_data_hash;
};

// Self-contained persisted detector: config, embedded vocabulary, parameter
// tensors, calibrated threshold, and the training fingerprint. The on-disk
// layout is an 8-byte magic, format version and header length (both uint32
// little-endian), a deterministic JSON header, then one raw little-endian
// float64 block per parameter in header order.
struct Checkpoint {
    models::ModelConfig model_config;
    evaluation::Threshold threshold;
    corpus::Vocabulary vocabulary;
    Fingerprint fingerprint;
    std::vector<models::NamedParam> parameters;  // value snapshots, not live tensors

    static Checkpoint from_model(const models::Model& model, const corpus::Vocabulary& vocab,
                                 const evaluation::Threshold& threshold,
                                 const Fingerprint& fingerprint);

    // Rebuilds a model carrying exactly the stored parameter values.
    models::Model restore() const;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

}  // namespace gtdetect::checkpoint
