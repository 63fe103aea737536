#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gtdetect/corpus.hpp"
#include "gtdetect/model.hpp"
#include "gtdetect/rng.hpp"

namespace gtdetect::training {

struct TrainConfig {
    double learning_rate = 1e-3;
    double weight_decay = 0.0;
    double label_smoothing = 0.0;
    std::size_t batch_size = 32;
    std::size_t epochs = 8;
    std::uint64_t seed = 42;
    bool shuffle = true;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double optimizer_eps = 1e-8;
    double grad_clip = 5.0;  // global-norm ceiling; <= 0 disables clipping

    void validate() const;  // DataError naming the offending field
    static TrainConfig from_json_string(const std::string& text);
    static TrainConfig from_json_file(const std::string& path);
    std::string to_json_string() const;
};

struct EpochStats {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_balanced_accuracy = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    std::size_t best_epoch = 0;  // 1-based epoch with the lowest validation loss

    std::string to_csv() const;
    void save_csv(const std::string& path) const;
};

// First and second moments per parameter tensor, in parameter order.
struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::size_t t = 0;

    static AdamState init(const std::vector<models::NamedParam>& params);
};

// One decoupled-weight-decay adaptive-moment step over `params` using the
// gradients currently stored in their tensors. Decay shrinks parameters by
// (1 - lr*weight_decay) before the moment update sees the gradient.
void adamw_step(std::vector<models::NamedParam>& params, AdamState& state, double lr,
                double weight_decay, double beta1, double beta2, double eps);

// Scales all gradients so their joint L2 norm is at most max_norm (no-op when
// max_norm <= 0). Returns the pre-clip norm.
double clip_global_norm(std::vector<models::NamedParam>& params, double max_norm);

// Fisher-Yates permutation of {0,...,n-1} drawn from rng.
std::vector<std::size_t> shuffled_order(std::size_t n, Rng& rng);

// Optimizes `model` in place; validation loss/balanced accuracy (threshold
// 0.5) are recorded per epoch. Final-epoch weights are kept.
TrainHistory train(models::Model& model, const corpus::DatasetSplits& splits,
                   const TrainConfig& config, const corpus::Vocabulary& vocab);

}  // namespace gtdetect::training
