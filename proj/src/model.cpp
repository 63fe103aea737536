#include "gtdetect/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "json.hpp"

#include "gtdetect/errors.hpp"

namespace gtdetect::models {

using numcore::Tensor;
using nlohmann::json;

std::string family_name(Family family) {
    switch (family) {
        case Family::kMlp: return "mlp";
        case Family::kCnn1d: return "cnn1d";
        case Family::kSeparableCnn: return "separable_cnn";
        case Family::kTransformer: return "transformer";
    }
    throw std::logic_error("family_name: unknown family");
}

Family family_from_string(const std::string& name) {
    std::string lower;
    lower.reserve(name.size());
    for (char c : name) lower.push_back(static_cast<char>(std::tolower(c)));
    if (lower == "mlp") return Family::kMlp;
    if (lower == "cnn1d") return Family::kCnn1d;
    if (lower == "separable_cnn") return Family::kSeparableCnn;
    if (lower == "transformer") return Family::kTransformer;
    throw DataError("model config: unknown family '" + name +
                    "' (expected mlp, cnn1d, separable_cnn or transformer)");
}

namespace {

std::string expected_pooling(Family family) {
    switch (family) {
        case Family::kMlp: return "mean_max";
        case Family::kCnn1d: return "max";
        case Family::kSeparableCnn: return "avg_max";
        case Family::kTransformer: return "mean_max";
    }
    throw std::logic_error("expected_pooling: unknown family");
}

}  // namespace

ModelConfig ModelConfig::defaults(Family family) {
    ModelConfig c;
    c.family = family;
    c.pooling = expected_pooling(family);
    switch (family) {
        case Family::kMlp:
            break;  // struct initializers are the MLP defaults
        case Family::kCnn1d:
            c.dropout = 0.25;
            c.threshold = 0.38;
            break;
        case Family::kSeparableCnn:
            c.embed_dim = 256;
            c.max_len = 1024;
            c.filters = 256;
            c.kernel_widths = {5, 5, 3};
            c.threshold = 0.36;
            break;
        case Family::kTransformer:
            c.embed_dim = 256;
            c.max_len = 1024;
            c.dropout = 0.10;
            c.threshold = 0.36;
            break;
    }
    return c;
}

void ModelConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw DataError("model config: " + field + " " + why);
    };
    if (embed_dim < 1) fail("embed_dim", "must be positive");
    if (max_len < 1) fail("max_len", "must be positive");
    if (hidden_dim < 1) fail("hidden_dim", "must be positive");
    if (filters < 1) fail("filters", "must be positive");
    if (encoder_layers < 1) fail("encoder_layers", "must be positive");
    if (heads < 1) fail("heads", "must be positive");
    if (ff_dim < 1) fail("ff_dim", "must be positive");
    if (kernel_widths.empty()) fail("kernel_widths", "must not be empty");
    for (std::size_t w : kernel_widths) {
        if (w < 1) fail("kernel_widths", "must contain positive widths");
        if (w > max_len) {
            fail("kernel_widths", "width " + std::to_string(w) + " exceeds max_len " +
                                      std::to_string(max_len));
        }
    }
    if (family == Family::kTransformer && embed_dim % heads != 0) {
        fail("heads", "must divide embed_dim (" + std::to_string(embed_dim) + " % " +
                          std::to_string(heads) + " != 0)");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout", "must lie in [0, 1)");
    if (!(threshold >= 0.0 && threshold <= 1.0)) fail("threshold", "must lie in [0, 1]");
    if (pooling != expected_pooling(family)) {
        fail("pooling", "must be '" + expected_pooling(family) + "' for family " +
                            family_name(family));
    }
}

namespace {

std::size_t get_size(const json& j, const std::string& field) {
    if (!j[field].is_number_unsigned() && !(j[field].is_number_integer() &&
                                            j[field].get<std::int64_t>() >= 0)) {
        throw DataError("model config: " + field + " must be a non-negative integer");
    }
    return j[field].get<std::size_t>();
}

double get_real(const json& j, const std::string& field) {
    if (!j[field].is_number()) {
        throw DataError("model config: " + field + " must be a number");
    }
    return j[field].get<double>();
}

}  // namespace

ModelConfig ModelConfig::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("model config: malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw DataError("model config: expected a JSON object");
    static const std::unordered_set<std::string> kKnown = {
        "family",         "vocab_size", "embed_dim", "max_len", "hidden_dim",
        "filters",        "kernel_widths", "encoder_layers", "heads", "ff_dim",
        "dropout",        "threshold",  "pooling"};
    for (const auto& [key, value] : j.items()) {
        if (!kKnown.count(key)) throw DataError("model config: unknown field '" + key + "'");
    }
    if (!j.contains("family") || !j["family"].is_string()) {
        throw DataError("model config: missing mandatory string field 'family'");
    }
    ModelConfig c = defaults(family_from_string(j["family"].get<std::string>()));
    if (j.contains("vocab_size")) c.vocab_size = get_size(j, "vocab_size");
    if (j.contains("embed_dim")) c.embed_dim = get_size(j, "embed_dim");
    if (j.contains("max_len")) c.max_len = get_size(j, "max_len");
    if (j.contains("hidden_dim")) c.hidden_dim = get_size(j, "hidden_dim");
    if (j.contains("filters")) c.filters = get_size(j, "filters");
    if (j.contains("encoder_layers")) c.encoder_layers = get_size(j, "encoder_layers");
    if (j.contains("heads")) c.heads = get_size(j, "heads");
    if (j.contains("ff_dim")) c.ff_dim = get_size(j, "ff_dim");
    if (j.contains("dropout")) c.dropout = get_real(j, "dropout");
    if (j.contains("threshold")) c.threshold = get_real(j, "threshold");
    if (j.contains("pooling")) {
        if (!j["pooling"].is_string()) throw DataError("model config: pooling must be a string");
        c.pooling = j["pooling"].get<std::string>();
    }
    if (j.contains("kernel_widths")) {
        if (!j["kernel_widths"].is_array()) {
            throw DataError("model config: kernel_widths must be an array");
        }
        c.kernel_widths.clear();
        for (const auto& w : j["kernel_widths"]) {
            if (!w.is_number_integer() || w.get<std::int64_t>() < 1) {
                throw DataError("model config: kernel_widths must contain positive integers");
            }
            c.kernel_widths.push_back(w.get<std::size_t>());
        }
    }
    c.validate();
    return c;
}

ModelConfig ModelConfig::from_json_file(const std::string& path) {
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

std::string ModelConfig::to_json_string() const {
    json j;
    j["family"] = family_name(family);
    j["vocab_size"] = vocab_size;
    j["embed_dim"] = embed_dim;
    j["max_len"] = max_len;
    j["hidden_dim"] = hidden_dim;
    j["filters"] = filters;
    j["kernel_widths"] = kernel_widths;
    j["encoder_layers"] = encoder_layers;
    j["heads"] = heads;
    j["ff_dim"] = ff_dim;
    j["dropout"] = dropout;
    j["threshold"] = threshold;
    j["pooling"] = pooling;
    return j.dump(2);
}

std::vector<std::size_t> split_filters(std::size_t total, std::size_t banks) {
    if (banks == 0 || total < banks) {
        throw DataError("model config: filters (" + std::to_string(total) +
                        ") must cover every kernel width (" + std::to_string(banks) + ")");
    }
    std::vector<std::size_t> out(banks, total / banks);
    for (std::size_t i = 0; i < total % banks; ++i) ++out[i];
    return out;
}

namespace {

Tensor glorot(std::vector<std::size_t> shape, std::size_t fan_in, std::size_t fan_out,
              Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> v(numcore::shape_size(shape));
    for (double& x : v) x = rng.uniform(-limit, limit);
    return Tensor::from(std::move(shape), std::move(v), true);
}

Tensor const_param(std::vector<std::size_t> shape, double value) {
    std::vector<double> v(numcore::shape_size(shape), value);
    return Tensor::from(std::move(shape), std::move(v), true);
}

Tensor embedding_table(std::size_t vocab, std::size_t dim, Rng& rng) {
    std::vector<double> v(vocab * dim);
    for (double& x : v) x = rng.normal() * 0.02;
    return Tensor::from({vocab, dim}, std::move(v), true);
}

// Restores requires_grad on scope exit so inference builds no graph.
class NoGradGuard {
public:
    explicit NoGradGuard(std::vector<NamedParam>& params) {
        for (NamedParam& p : params) {
            if (p.tensor.node()->requires_grad) {
                p.tensor.node()->requires_grad = false;
                restore_.push_back(p.tensor.node());
            }
        }
    }
    ~NoGradGuard() {
        for (numcore::TensorNode* n : restore_) n->requires_grad = true;
    }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    std::vector<numcore::TensorNode*> restore_;
};

class ScopedFlag {
public:
    ScopedFlag(bool& flag, bool value) : flag_(flag), saved_(flag) { flag_ = value; }
    ~ScopedFlag() { flag_ = saved_; }

private:
    bool& flag_;
    bool saved_;
};

}  // namespace

Model Model::build(const ModelConfig& config, Rng& rng) {
    config.validate();
    if (config.vocab_size < 2) {
        throw DataError("model config: vocab_size must be at least 2 before build "
                        "(reserved PAD and UNK entries)");
    }
    Model m;
    m.config_ = config;
    auto add = [&m](std::string name, Tensor t) {
        m.params_.push_back({std::move(name), std::move(t)});
    };
    const std::size_t d = config.embed_dim;
    add("embedding", embedding_table(config.vocab_size, d, rng));

    switch (config.family) {
        case Family::kMlp: {
            const std::size_t hidden = config.hidden_dim;
            add("head.w1", glorot({2 * d, hidden}, 2 * d, hidden, rng));
            add("head.b1", const_param({hidden}, 0.0));
            add("head.w2", glorot({hidden, 1}, hidden, 1, rng));
            add("head.b2", const_param({1}, 0.0));
            break;
        }
        case Family::kCnn1d: {
            const auto banks = split_filters(config.filters, config.kernel_widths.size());
            for (std::size_t i = 0; i < banks.size(); ++i) {
                const std::size_t w = config.kernel_widths[i];
                const std::size_t f = banks[i];
                const std::string prefix = "conv" + std::to_string(i);
                add(prefix + ".kernels", glorot({w, d, f}, w * d, w * f, rng));
                add(prefix + ".bias", const_param({f}, 0.0));
            }
            add("head.w", glorot({config.filters, 1}, config.filters, 1, rng));
            add("head.b", const_param({1}, 0.0));
            break;
        }
        case Family::kSeparableCnn: {
            std::size_t channels_in = d;
            const std::size_t f = config.filters;
            for (std::size_t i = 0; i < config.kernel_widths.size(); ++i) {
                const std::size_t w = config.kernel_widths[i];
                const std::string prefix = "block" + std::to_string(i);
                add(prefix + ".depthwise", glorot({w, channels_in}, w, w, rng));
                add(prefix + ".pointwise", glorot({channels_in, f}, channels_in, f, rng));
                add(prefix + ".bias", const_param({f}, 0.0));
                add(prefix + ".ln_gain", const_param({f}, 1.0));
                add(prefix + ".ln_shift", const_param({f}, 0.0));
                channels_in = f;
            }
            add("head.w", glorot({2 * f, 1}, 2 * f, 1, rng));
            add("head.b", const_param({1}, 0.0));
            break;
        }
        case Family::kTransformer: {
            const std::size_t ff = config.ff_dim;
            for (std::size_t i = 0; i < config.encoder_layers; ++i) {
                const std::string prefix = "layer" + std::to_string(i);
                for (const char* proj : {"wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo"}) {
                    if (proj[0] == 'w') {
                        add(prefix + ".attn." + proj, glorot({d, d}, d, d, rng));
                    } else {
                        add(prefix + ".attn." + proj, const_param({d}, 0.0));
                    }
                }
                add(prefix + ".ln1.gain", const_param({d}, 1.0));
                add(prefix + ".ln1.shift", const_param({d}, 0.0));
                add(prefix + ".ff.w1", glorot({d, ff}, d, ff, rng));
                add(prefix + ".ff.b1", const_param({ff}, 0.0));
                add(prefix + ".ff.w2", glorot({ff, d}, ff, d, rng));
                add(prefix + ".ff.b2", const_param({d}, 0.0));
                add(prefix + ".ln2.gain", const_param({d}, 1.0));
                add(prefix + ".ln2.shift", const_param({d}, 0.0));
            }
            add("head.w", glorot({2 * d, 1}, 2 * d, 1, rng));
            add("head.b", const_param({1}, 0.0));
            m.positional_ = numcore::positional_encoding(config.max_len, d);
            break;
        }
    }
    return m;
}

numcore::Tensor* Model::find_parameter(const std::string& name) {
    for (NamedParam& p : params_) {
        if (p.name == name) return &p.tensor;
    }
    return nullptr;
}

const Tensor& Model::param(const std::string& name) const {
    for (const NamedParam& p : params_) {
        if (p.name == name) return p.tensor;
    }
    throw std::logic_error("Model::param: no parameter named " + name);
}

Tensor Model::features_mlp(const corpus::TokenSequence& seq) {
    using namespace numcore;
    const Tensor e = embed(seq.ids, param("embedding"));
    const Tensor pooled = concat_vec(
        {masked_mean_pool(e, seq.mask), masked_max_pool(e, seq.mask)});
    const Tensor row = reshape(pooled, {1, pooled.size()});
    return relu(affine(row, param("head.w1"), param("head.b1")));
}

Tensor Model::features_cnn1d(const corpus::TokenSequence& seq) {
    using namespace numcore;
    const Tensor e = mask_rows(embed(seq.ids, param("embedding")), seq.mask);
    std::vector<Tensor> pooled;
    const std::size_t banks = config_.kernel_widths.size();
    for (std::size_t i = 0; i < banks; ++i) {
        const std::string prefix = "conv" + std::to_string(i);
        const Tensor c = relu(conv1d(e, param(prefix + ".kernels"), param(prefix + ".bias")));
        pooled.push_back(masked_max_pool(c, seq.mask));
    }
    const Tensor feature = concat_vec(pooled);
    return reshape(feature, {1, feature.size()});
}

Tensor Model::features_sepcnn(const corpus::TokenSequence& seq) {
    using namespace numcore;
    Tensor h = mask_rows(embed(seq.ids, param("embedding")), seq.mask);
    for (std::size_t i = 0; i < config_.kernel_widths.size(); ++i) {
        const std::string prefix = "block" + std::to_string(i);
        h = depthwise_separable_conv1d(h, param(prefix + ".depthwise"),
                                       param(prefix + ".pointwise"), param(prefix + ".bias"));
        h = layer_norm(relu(h), param(prefix + ".ln_gain"), param(prefix + ".ln_shift"));
        h = mask_rows(h, seq.mask);
    }
    const Tensor feature =
        concat_vec({global_avg_pool(h, seq.mask), masked_max_pool(h, seq.mask)});
    return reshape(feature, {1, feature.size()});
}

Tensor Model::features_transformer(const corpus::TokenSequence& seq) {
    using namespace numcore;
    Tensor x = add(embed(seq.ids, param("embedding")), positional_);
    return x;
}

Tensor Model::record_score(const corpus::TokenSequence& seq, Rng* dropout_rng) {
    using namespace numcore;
    const double p = config_.dropout;
    Tensor feature;
    std::string head_w = "head.w";
    std::string head_b = "head.b";
    switch (config_.family) {
        case Family::kMlp:
            feature = dropout(features_mlp(seq), p, dropout_rng, training_);
            head_w = "head.w2";
            head_b = "head.b2";
            break;
        case Family::kCnn1d:
            feature = dropout(features_cnn1d(seq), p, dropout_rng, training_);
            break;
        case Family::kSeparableCnn:
            feature = dropout(features_sepcnn(seq), p, dropout_rng, training_);
            break;
        case Family::kTransformer: {
            Tensor x = features_transformer(seq);
            for (std::size_t i = 0; i < config_.encoder_layers; ++i) {
                const std::string prefix = "layer" + std::to_string(i);
                Tensor attn = multi_head_attention(
                    x, seq.mask, config_.heads, param(prefix + ".attn.wq"),
                    param(prefix + ".attn.bq"), param(prefix + ".attn.wk"),
                    param(prefix + ".attn.bk"), param(prefix + ".attn.wv"),
                    param(prefix + ".attn.bv"), param(prefix + ".attn.wo"),
                    param(prefix + ".attn.bo"));
                attn = dropout(attn, p, dropout_rng, training_);
                x = layer_norm(add(x, attn), param(prefix + ".ln1.gain"),
                               param(prefix + ".ln1.shift"));
                Tensor ff = affine(x, param(prefix + ".ff.w1"), param(prefix + ".ff.b1"));
                ff = affine(relu(ff), param(prefix + ".ff.w2"), param(prefix + ".ff.b2"));
                ff = dropout(ff, p, dropout_rng, training_);
                x = layer_norm(add(x, ff), param(prefix + ".ln2.gain"),
                               param(prefix + ".ln2.shift"));
            }
            const Tensor pooled =
                concat_vec({masked_mean_pool(x, seq.mask), masked_max_pool(x, seq.mask)});
            feature = dropout(reshape(pooled, {1, pooled.size()}), p, dropout_rng, training_);
            break;
        }
    }
    return sigmoid(affine(feature, param(head_w), param(head_b)));
}

Tensor Model::forward_scores(const std::vector<corpus::TokenSequence>& batch, Rng* dropout_rng) {
    using namespace numcore;
    if (batch.empty()) throw DataError("forward: empty batch");
    std::vector<Tensor> scores;
    scores.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const corpus::TokenSequence& seq = batch[i];
        if (seq.ids.size() != config_.max_len || seq.mask.size() != config_.max_len) {
            throw DataError("forward: sequence length " + std::to_string(seq.ids.size()) +
                            " at batch index " + std::to_string(i) +
                            " does not match model max_len " + std::to_string(config_.max_len));
        }
        if (seq.valid_count() == 0) {
            throw DataError("forward: all-PAD sequence at batch index " + std::to_string(i));
        }
        scores.push_back(reshape(record_score(seq, dropout_rng), {1}));
    }
    return concat_vec(scores);
}

std::vector<double> Model::score(const std::vector<corpus::TokenSequence>& batch) {
    NoGradGuard no_grad(params_);
    ScopedFlag inference(training_, false);
    std::vector<double> out = forward_scores(batch, nullptr).values();
    for (double& s : out) s = std::clamp(s, 1e-7, 1.0 - 1e-7);
    return out;
}

std::vector<Prediction> Model::predict(const std::vector<corpus::TokenSequence>& batch,
                                       double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) {
        throw std::invalid_argument("predict: tau = " + std::to_string(tau) +
                                    " outside [0, 1]");
    }
    std::vector<Prediction> out;
    for (double s : score(batch)) out.push_back({s, s >= tau});
    return out;
}

}  // namespace gtdetect::models
