#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gtdetect/corpus.hpp"
#include "gtdetect/ops.hpp"
#include "gtdetect/rng.hpp"
#include "gtdetect/tensor.hpp"

namespace gtdetect::models {

enum class Family { kMlp, kCnn1d, kSeparableCnn, kTransformer };

std::string family_name(Family family);
Family family_from_string(const std::string& name);

// Everything needed to rebuild a detector. Fields a family does not use keep
// their defaults and are ignored at build time but still validated.
struct ModelConfig {
    Family family = Family::kMlp;
    std::size_t vocab_size = 0;  // 0: fill in from the vocabulary before build
    std::size_t embed_dim = 128;
    std::size_t max_len = 512;
    std::size_t hidden_dim = 128;
    std::size_t filters = 128;
    std::vector<std::size_t> kernel_widths = {3, 4, 5};
    std::size_t encoder_layers = 2;
    std::size_t heads = 8;
    std::size_t ff_dim = 1024;
    double dropout = 0.25;
    double threshold = 0.38;
    std::string pooling = "mean_max";

    static ModelConfig defaults(Family family);
    void validate() const;  // DataError naming the offending field

    static ModelConfig from_json_string(const std::string& text);
    static ModelConfig from_json_file(const std::string& path);
    std::string to_json_string() const;
};

struct NamedParam {
    std::string name;
    numcore::Tensor tensor;
};

struct Prediction {
    double score = 0.0;
    bool genai = false;
};

// Evenly splits `total` filters over `banks` kernel widths; earlier banks
// absorb the remainder.
std::vector<std::size_t> split_filters(std::size_t total, std::size_t banks);

class Model {
public:
    static Model build(const ModelConfig& config, Rng& rng);

    const ModelConfig& config() const { return config_; }
    ModelConfig& mutable_config() { return config_; }

    const std::vector<NamedParam>& parameters() const { return params_; }
    std::vector<NamedParam>& parameters() { return params_; }
    numcore::Tensor* find_parameter(const std::string& name);

    void set_training(bool training) { training_ = training; }
    bool training() const { return training_; }

    // Graph-building pass used by the training loop; one score per record,
    // shape [B]. Dropout draws from `dropout_rng` when in training mode.
    numcore::Tensor forward_scores(const std::vector<corpus::TokenSequence>& batch,
                                   Rng* dropout_rng);

    // Inference: no graph, no dropout; scores clamped into [1e-7, 1-1e-7].
    std::vector<double> score(const std::vector<corpus::TokenSequence>& batch);

    // decision = GenAI iff score >= tau
    std::vector<Prediction> predict(const std::vector<corpus::TokenSequence>& batch, double tau);

private:
    Model() = default;

    numcore::Tensor record_score(const corpus::TokenSequence& seq, Rng* dropout_rng);
    numcore::Tensor features_mlp(const corpus::TokenSequence& seq);
    numcore::Tensor features_cnn1d(const corpus::TokenSequence& seq);
    numcore::Tensor features_sepcnn(const corpus::TokenSequence& seq);
    numcore::Tensor features_transformer(const corpus::TokenSequence& seq);
    const numcore::Tensor& param(const std::string& name) const;

    ModelConfig config_;
    std::vector<NamedParam> params_;
    numcore::Tensor positional_;  // cached table for the transformer family
    bool training_ = false;
};

}  // namespace gtdetect::models
