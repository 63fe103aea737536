#include "gtdetect/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

#include "gtdetect/errors.hpp"
#include "gtdetect/ops.hpp"

namespace gtdetect::training {

using nlohmann::json;

void TrainConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw DataError("train config: " + field + " " + why);
    };
    if (!(learning_rate > 0.0)) fail("learning_rate", "must be positive");
    if (!(weight_decay >= 0.0)) fail("weight_decay", "must be non-negative");
    if (!(label_smoothing >= 0.0 && label_smoothing <= 0.5)) {
        fail("label_smoothing", "must lie in [0, 0.5]");
    }
    if (batch_size < 1) fail("batch_size", "must be at least 1");
    if (epochs < 1) fail("epochs", "must be at least 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) fail("optimizer_betas", "beta1 must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) fail("optimizer_betas", "beta2 must lie in [0, 1)");
    if (!(optimizer_eps > 0.0)) fail("optimizer_eps", "must be positive");
}

TrainConfig TrainConfig::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("train config: malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw DataError("train config: expected a JSON object");
    static const std::unordered_set<std::string> kKnown = {
        "learning_rate", "weight_decay", "label_smoothing", "batch_size", "epochs",
        "seed",          "shuffle",      "optimizer_betas", "optimizer_eps", "grad_clip"};
    for (const auto& [key, value] : j.items()) {
        if (!kKnown.count(key)) throw DataError("train config: unknown field '" + key + "'");
    }
    TrainConfig c;
    auto real = [&](const char* field, double& out) {
        if (!j.contains(field)) return;
        if (!j[field].is_number()) {
            throw DataError(std::string("train config: ") + field + " must be a number");
        }
        out = j[field].get<double>();
    };
    real("learning_rate", c.learning_rate);
    real("weight_decay", c.weight_decay);
    real("label_smoothing", c.label_smoothing);
    real("optimizer_eps", c.optimizer_eps);
    real("grad_clip", c.grad_clip);
    auto size = [&](const char* field, std::size_t& out) {
        if (!j.contains(field)) return;
        if (!j[field].is_number_unsigned() &&
            !(j[field].is_number_integer() && j[field].get<std::int64_t>() >= 0)) {
            throw DataError(std::string("train config: ") + field +
                            " must be a non-negative integer");
        }
        out = j[field].get<std::size_t>();
    };
    size("batch_size", c.batch_size);
    size("epochs", c.epochs);
    if (j.contains("seed")) {
        if (!j["seed"].is_number_integer() && !j["seed"].is_number_unsigned()) {
            throw DataError("train config: seed must be an integer");
        }
        c.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("shuffle")) {
        if (!j["shuffle"].is_boolean()) throw DataError("train config: shuffle must be a boolean");
        c.shuffle = j["shuffle"].get<bool>();
    }
    if (j.contains("optimizer_betas")) {
        const json& betas = j["optimizer_betas"];
        if (!betas.is_array() || betas.size() != 2 || !betas[0].is_number() ||
            !betas[1].is_number()) {
            throw DataError("train config: optimizer_betas must be an array of two numbers");
        }
        c.beta1 = betas[0].get<double>();
        c.beta2 = betas[1].get<double>();
    }
    c.validate();
    return c;
}

TrainConfig TrainConfig::from_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(path + ": cannot open file");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return from_json_string(buf.str());
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

std::string TrainConfig::to_json_string() const {
    json j;
    j["learning_rate"] = learning_rate;
    j["weight_decay"] = weight_decay;
    j["label_smoothing"] = label_smoothing;
    j["batch_size"] = batch_size;
    j["epochs"] = epochs;
    j["seed"] = seed;
    j["shuffle"] = shuffle;
    j["optimizer_betas"] = {beta1, beta2};
    j["optimizer_eps"] = optimizer_eps;
    j["grad_clip"] = grad_clip;
    return j.dump(2);
}

namespace {

std::string format_full(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string TrainHistory::to_csv() const {
    std::string out = "epoch,train_loss,val_loss,val_balanced_accuracy\n";
    for (const EpochStats& e : epochs) {
        out += std::to_string(e.epoch) + "," + format_full(e.train_loss) + "," +
               format_full(e.val_loss) + "," + format_full(e.val_balanced_accuracy) + "\n";
    }
    return out;
}

void TrainHistory::save_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(path + ": cannot open for writing");
    out << to_csv();
    if (!out) throw DataError(path + ": write failed");
}

AdamState AdamState::init(const std::vector<models::NamedParam>& params) {
    AdamState s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const models::NamedParam& p : params) {
        s.m.emplace_back(p.tensor.size(), 0.0);
        s.v.emplace_back(p.tensor.size(), 0.0);
    }
    return s;
}

void adamw_step(std::vector<models::NamedParam>& params, AdamState& state, double lr,
                double weight_decay, double beta1, double beta2, double eps) {
    if (state.m.size() != params.size() || state.v.size() != params.size()) {
        throw std::invalid_argument("adamw_step: state holds " + std::to_string(state.m.size()) +
                                    " moment tensors for " + std::to_string(params.size()) +
                                    " parameters");
    }
    ++state.t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    const double decay = 1.0 - lr * weight_decay;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        numcore::TensorNode* node = params[pi].tensor.node();
        std::vector<double>& m = state.m[pi];
        std::vector<double>& v = state.v[pi];
        if (m.size() != node->values.size()) {
            throw std::invalid_argument("adamw_step: moment shape mismatch for parameter '" +
                                        params[pi].name + "'");
        }
        for (std::size_t i = 0; i < node->values.size(); ++i) {
            if (weight_decay != 0.0) node->values[i] *= decay;
            const double g = node->grad[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            node->values[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
}

double clip_global_norm(std::vector<models::NamedParam>& params, double max_norm) {
    double sq = 0.0;
    for (const models::NamedParam& p : params) {
        for (double g : p.tensor.grad()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double factor = max_norm / norm;
        for (models::NamedParam& p : params) {
            for (double& g : p.tensor.node()->grad) g *= factor;
        }
    }
    return norm;
}

std::vector<std::size_t> shuffled_order(std::size_t n, Rng& rng) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        std::swap(order[i - 1], order[rng.below(i)]);
    }
    return order;
}

namespace {

struct PreparedSplit {
    std::vector<corpus::TokenSequence> sequences;
    std::vector<double> labels;
};

PreparedSplit prepare(const std::vector<corpus::TextRecord>& records,
                      const corpus::Vocabulary& vocab, std::size_t max_len,
                      const char* split_name) {
    PreparedSplit out;
    out.sequences.reserve(records.size());
    out.labels.reserve(records.size());
    for (const corpus::TextRecord& r : records) {
        if (!r.label) {
            throw DataError(std::string(split_name) + " record '" + r.id + "' is unlabeled");
        }
        corpus::TokenSequence seq = corpus::sequence(corpus::tokenize(r.text), vocab, max_len);
        if (seq.valid_count() == 0) {
            throw DataError(std::string(split_name) + " record '" + r.id +
                            "' contains no tokens");
        }
        out.sequences.push_back(std::move(seq));
        out.labels.push_back(static_cast<double>(*r.label));
    }
    return out;
}

double balanced_accuracy_at(const std::vector<double>& scores, const std::vector<double>& labels,
                            double tau) {
    std::size_t n_pos = 0, n_neg = 0, c_pos = 0, c_neg = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool genai = scores[i] >= tau;
        if (labels[i] == 1.0) {
            ++n_pos;
            if (genai) ++c_pos;
        } else {
            ++n_neg;
            if (!genai) ++c_neg;
        }
    }
    // Mean of the per-class rates over the classes that are present.
    double sum = 0.0;
    int classes = 0;
    if (n_pos > 0) {
        sum += static_cast<double>(c_pos) / static_cast<double>(n_pos);
        ++classes;
    }
    if (n_neg > 0) {
        sum += static_cast<double>(c_neg) / static_cast<double>(n_neg);
        ++classes;
    }
    return classes == 0 ? 0.0 : sum / classes;
}

}  // namespace

TrainHistory train(models::Model& model, const corpus::DatasetSplits& splits,
                   const TrainConfig& config, const corpus::Vocabulary& vocab) {
    config.validate();
    if (splits.train.empty()) throw DataError("train: training split is empty");
    if (splits.validation.empty()) throw DataError("train: validation split is empty");

    const std::size_t max_len = model.config().max_len;
    const PreparedSplit train_set = prepare(splits.train, vocab, max_len, "train");
    const PreparedSplit val_set = prepare(splits.validation, vocab, max_len, "validation");
    const std::size_t n = train_set.sequences.size();

    Rng shuffle_rng = Rng(config.seed).fork(1);
    Rng dropout_rng = Rng(config.seed).fork(2);

    AdamState state = AdamState::init(model.parameters());
    TrainHistory history;
    model.set_training(true);

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::vector<std::size_t> order;
        if (config.shuffle) {
            order = shuffled_order(n, shuffle_rng);
        } else {
            order.resize(n);
            for (std::size_t i = 0; i < n; ++i) order[i] = i;
        }

        double loss_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < n; start += config.batch_size, ++batch_index) {
            const std::size_t end = std::min(n, start + config.batch_size);
            std::vector<corpus::TokenSequence> batch;
            std::vector<double> labels;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) {
                batch.push_back(train_set.sequences[order[i]]);
                labels.push_back(train_set.labels[order[i]]);
            }

            for (models::NamedParam& p : model.parameters()) p.tensor.zero_grad();
            numcore::Tensor scores = model.forward_scores(batch, &dropout_rng);
            numcore::Tensor loss =
                numcore::bce_label_smoothing(scores, labels, config.label_smoothing);
            const double loss_value = loss.item();
            if (!std::isfinite(loss_value)) {
                throw NumericError("training diverged: non-finite loss at epoch " +
                                   std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_index + 1));
            }
            loss.backward();
            clip_global_norm(model.parameters(), config.grad_clip);
            adamw_step(model.parameters(), state, config.learning_rate, config.weight_decay,
                       config.beta1, config.beta2, config.optimizer_eps);
            loss_sum += loss_value * static_cast<double>(end - start);
        }

        const std::vector<double> val_scores = model.score(val_set.sequences);
        const double val_loss =
            numcore::bce_label_smoothing(
                numcore::Tensor::from({val_scores.size()}, val_scores), val_set.labels,
                config.label_smoothing)
                .item();
        if (!std::isfinite(val_loss)) {
            throw NumericError("training diverged: non-finite validation loss at epoch " +
                               std::to_string(epoch));
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(n);
        stats.val_loss = val_loss;
        stats.val_balanced_accuracy = balanced_accuracy_at(val_scores, val_set.labels, 0.5);
        history.epochs.push_back(stats);
        if (history.best_epoch == 0 ||
            val_loss < history.epochs[history.best_epoch - 1].val_loss) {
            history.best_epoch = epoch;
        }
    }

    model.set_training(false);
    return history;
}

}  // namespace gtdetect::training
