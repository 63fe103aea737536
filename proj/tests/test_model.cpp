#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <string>
#include <vector>

#include "gtdetect/errors.hpp"
#include "gtdetect/model.hpp"

using namespace gtdetect::models;
using gtdetect::DataError;
using gtdetect::Rng;
using gtdetect::corpus::TokenSequence;

namespace {

TokenSequence make_seq(std::vector<std::int32_t> ids, std::size_t max_len) {
    TokenSequence s;
    s.ids.assign(max_len, 0);
    s.mask.assign(max_len, 0);
    for (std::size_t i = 0; i < ids.size() && i < max_len; ++i) {
        s.ids[i] = ids[i];
        s.mask[i] = 1;
    }
    return s;
}

ModelConfig toy_config(Family family) {
    ModelConfig c = ModelConfig::defaults(family);
    c.vocab_size = 20;
    c.embed_dim = 8;
    c.max_len = 12;
    c.hidden_dim = 8;
    c.filters = 6;
    c.kernel_widths = family == Family::kSeparableCnn ? std::vector<std::size_t>{3, 3}
                                                      : std::vector<std::size_t>{2, 3};
    c.encoder_layers = 2;
    c.heads = 2;
    c.ff_dim = 16;
    c.dropout = 0.0;
    return c;
}

}  // namespace

TEST_CASE("family names round-trip") {
    for (Family f : {Family::kMlp, Family::kCnn1d, Family::kSeparableCnn, Family::kTransformer}) {
        CHECK(family_from_string(family_name(f)) == f);
    }
    CHECK(family_from_string("MLP") == Family::kMlp);
    CHECK(family_from_string("Transformer") == Family::kTransformer);
    CHECK_THROWS_AS(family_from_string("bert"), DataError);
}

TEST_CASE("defaults mirror the shipped configurations") {
    ModelConfig mlp = ModelConfig::defaults(Family::kMlp);
    CHECK(mlp.embed_dim == 128);
    CHECK(mlp.hidden_dim == 128);
    CHECK(mlp.pooling == "mean_max");

    ModelConfig sep = ModelConfig::defaults(Family::kSeparableCnn);
    CHECK(sep.embed_dim == 256);
    CHECK(sep.max_len == 1024);
    CHECK(sep.threshold == 0.36);
    CHECK(sep.pooling == "avg_max");
    CHECK(sep.kernel_widths == std::vector<std::size_t>{5, 5, 3});

    ModelConfig tr = ModelConfig::defaults(Family::kTransformer);
    CHECK(tr.heads == 8);
    CHECK(tr.ff_dim == 1024);
    CHECK(tr.dropout == 0.10);
    CHECK(tr.embed_dim % tr.heads == 0);
    CHECK(tr.embed_dim / tr.heads == 32);  // per-head dim at d=256, h=8

    ModelConfig cnn = ModelConfig::defaults(Family::kCnn1d);
    CHECK(cnn.pooling == "max");
    CHECK(cnn.kernel_widths == std::vector<std::size_t>{3, 4, 5});
}

TEST_CASE("validate names the offending field") {
    auto expect_field = [](ModelConfig c, const std::string& field) {
        try {
            c.validate();
            FAIL("expected DataError for ", field);
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find(field) != std::string::npos);
        }
    };
    ModelConfig c = toy_config(Family::kTransformer);
    c.heads = 3;  // 8 % 3 != 0
    expect_field(c, "heads");

    c = toy_config(Family::kMlp);
    c.dropout = 1.0;
    expect_field(c, "dropout");
    c = toy_config(Family::kMlp);
    c.threshold = 1.2;
    expect_field(c, "threshold");
    c = toy_config(Family::kCnn1d);
    c.kernel_widths = {3, 99};
    expect_field(c, "kernel_widths");
    c = toy_config(Family::kCnn1d);
    c.kernel_widths.clear();
    expect_field(c, "kernel_widths");
    c = toy_config(Family::kMlp);
    c.embed_dim = 0;
    expect_field(c, "embed_dim");
    c = toy_config(Family::kMlp);
    c.pooling = "max";
    expect_field(c, "pooling");
}

TEST_CASE("config JSON round trip and strictness") {
    ModelConfig c = toy_config(Family::kSeparableCnn);
    ModelConfig back = ModelConfig::from_json_string(c.to_json_string());
    CHECK(back.family == c.family);
    CHECK(back.vocab_size == c.vocab_size);
    CHECK(back.kernel_widths == c.kernel_widths);
    CHECK(back.threshold == c.threshold);
    CHECK(back.pooling == c.pooling);

    CHECK_THROWS_AS(ModelConfig::from_json_string("{\"family\":\"mlp\",\"oops\":1}"), DataError);
    CHECK_THROWS_AS(ModelConfig::from_json_string("{\"embed_dim\":8}"), DataError);
    CHECK_THROWS_AS(ModelConfig::from_json_string("not json"), DataError);
    CHECK_THROWS_AS(ModelConfig::from_json_string("{\"family\":\"mlp\",\"embed_dim\":-4}"),
                    DataError);
    CHECK_THROWS_AS(
        ModelConfig::from_json_string("{\"family\":\"mlp\",\"kernel_widths\":[3,0]}"), DataError);

    // defaults fill unset fields
    ModelConfig tiny = ModelConfig::from_json_string("{\"family\":\"transformer\"}");
    CHECK(tiny.ff_dim == 1024);
    CHECK(tiny.threshold == 0.36);
}

TEST_CASE("split_filters spreads the remainder over early banks") {
    CHECK(split_filters(128, 3) == std::vector<std::size_t>{43, 43, 42});
    CHECK(split_filters(6, 3) == std::vector<std::size_t>{2, 2, 2});
    CHECK(split_filters(7, 2) == std::vector<std::size_t>{4, 3});
    CHECK_THROWS_AS(split_filters(2, 3), DataError);
}

TEST_CASE("MLP default parameter count matches the closed form") {
    ModelConfig c = ModelConfig::defaults(Family::kMlp);
    c.vocab_size = 1000;
    c.max_len = 16;
    Rng rng(1);
    Model m = Model::build(c, rng);
    std::size_t total = 0;
    for (const NamedParam& p : m.parameters()) total += p.tensor.size();
    CHECK(total == 1000 * 128 + (256 * 128 + 128) + (128 + 1));
}

TEST_CASE("parameter names and shapes are deterministic") {
    Rng rng(2);
    Model m = Model::build(toy_config(Family::kMlp), rng);
    REQUIRE(m.parameters().size() == 5);
    CHECK(m.parameters()[0].name == "embedding");
    CHECK(m.parameters()[0].tensor.shape() == std::vector<std::size_t>{20, 8});
    CHECK(m.parameters()[1].name == "head.w1");
    CHECK(m.parameters()[1].tensor.shape() == std::vector<std::size_t>{16, 8});
    CHECK(m.parameters()[2].name == "head.b1");
    CHECK(m.parameters()[3].name == "head.w2");
    CHECK(m.parameters()[4].name == "head.b2");

    Rng rng2(3);
    Model cnn = Model::build(toy_config(Family::kCnn1d), rng2);
    std::vector<std::string> names;
    for (const NamedParam& p : cnn.parameters()) names.push_back(p.name);
    CHECK(names == std::vector<std::string>{"embedding", "conv0.kernels", "conv0.bias",
                                            "conv1.kernels", "conv1.bias", "head.w", "head.b"});
    CHECK(cnn.parameters()[1].tensor.shape() == std::vector<std::size_t>{2, 8, 3});

    Rng rng3(4);
    Model tr = Model::build(toy_config(Family::kTransformer), rng3);
    // embedding + 2 layers x 16 tensors + head.w/head.b
    CHECK(tr.parameters().size() == 1 + 2 * 16 + 2);
    CHECK(tr.parameters()[1].name == "layer0.attn.wq");
    CHECK(tr.parameters().back().name == "head.b");
}

TEST_CASE("same seed builds identical parameters") {
    for (Family f : {Family::kMlp, Family::kCnn1d, Family::kSeparableCnn, Family::kTransformer}) {
        Rng a(77), b(77);
        Model ma = Model::build(toy_config(f), a);
        Model mb = Model::build(toy_config(f), b);
        REQUIRE(ma.parameters().size() == mb.parameters().size());
        for (std::size_t i = 0; i < ma.parameters().size(); ++i) {
            CHECK(ma.parameters()[i].tensor.values() == mb.parameters()[i].tensor.values());
        }
    }
}

TEST_CASE("build rejects unset vocab_size naming the field") {
    ModelConfig c = toy_config(Family::kMlp);
    c.vocab_size = 0;
    Rng rng(5);
    try {
        Model::build(c, rng);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("vocab_size") != std::string::npos);
    }
}

TEST_CASE("forward produces one in-range score per record") {
    for (Family f : {Family::kMlp, Family::kCnn1d, Family::kSeparableCnn, Family::kTransformer}) {
        CAPTURE(family_name(f));
        Rng rng(6);
        Model m = Model::build(toy_config(f), rng);
        std::vector<TokenSequence> batch = {
            make_seq({2, 3, 4}, 12), make_seq({5, 6}, 12), make_seq({2, 3, 4}, 12)};
        const auto scores = m.score(batch);
        REQUIRE(scores.size() == 3);
        for (double s : scores) {
            CHECK(s > 0.0);
            CHECK(s < 1.0);
        }
        CHECK(scores[0] == scores[2]);  // duplicated record, identical score
    }
}

TEST_CASE("forward error paths") {
    Rng rng(7);
    Model m = Model::build(toy_config(Family::kSeparableCnn), rng);
    CHECK_THROWS_AS(m.score({}), DataError);

    std::vector<TokenSequence> all_pad = {make_seq({}, 12)};
    CHECK_THROWS_AS(m.score(all_pad), DataError);

    std::vector<TokenSequence> wrong_len = {make_seq({2, 3}, 13)};
    try {
        m.score(wrong_len);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("13") != std::string::npos);
        CHECK(msg.find("12") != std::string::npos);
    }
}

TEST_CASE("scores are invariant to batch composition") {
    for (Family f : {Family::kMlp, Family::kCnn1d, Family::kSeparableCnn, Family::kTransformer}) {
        Rng rng(8);
        Model m = Model::build(toy_config(f), rng);
        TokenSequence probe = make_seq({3, 4, 5, 6}, 12);
        const double alone = m.score({probe})[0];
        const double in_batch =
            m.score({make_seq({7, 8}, 12), probe, make_seq({9}, 12)})[1];
        CHECK(alone == in_batch);
    }
}

TEST_CASE("scores are invariant to appended PAD positions") {
    for (Family f : {Family::kMlp, Family::kCnn1d, Family::kSeparableCnn, Family::kTransformer}) {
        CAPTURE(family_name(f));
        ModelConfig small = toy_config(f);
        ModelConfig large = small;
        large.max_len = 17;

        Rng rng(9);
        Model ms = Model::build(small, rng);
        Rng rng2(10);
        Model ml = Model::build(large, rng2);
        // same parameter set in both models: shapes are max_len independent
        for (std::size_t i = 0; i < ms.parameters().size(); ++i) {
            REQUIRE(ml.parameters()[i].name == ms.parameters()[i].name);
            ml.parameters()[i].tensor.mutable_values() = ms.parameters()[i].tensor.values();
        }
        const std::vector<std::int32_t> tokens = {4, 9, 2, 11, 3};
        const double s12 = ms.score({make_seq(tokens, 12)})[0];
        const double s17 = ml.score({make_seq(tokens, 17)})[0];
        CHECK(s12 == s17);
    }
}

TEST_CASE("freshly initialized MLPs score near 0.5 on average") {
    ModelConfig c = toy_config(Family::kMlp);
    double total = 0.0;
    Rng data_rng(123);
    for (int i = 0; i < 100; ++i) {
        Rng rng(1000 + i);
        Model m = Model::build(c, rng);
        std::vector<std::int32_t> ids;
        for (int t = 0; t < 6; ++t) {
            ids.push_back(static_cast<std::int32_t>(2 + data_rng.below(18)));
        }
        total += m.score({make_seq(ids, 12)})[0];
    }
    const double mean = total / 100.0;
    CHECK(mean > 0.3);
    CHECK(mean < 0.7);
}

TEST_CASE("predict applies the >= threshold rule") {
    Rng rng(11);
    Model m = Model::build(toy_config(Family::kMlp), rng);
    std::vector<TokenSequence> batch = {make_seq({2, 3, 4}, 12)};
    const double s = m.score(batch)[0];

    auto at_exact = m.predict(batch, s);
    CHECK(at_exact[0].genai);  // score == tau classifies as GenAI
    CHECK(at_exact[0].score == s);
    CHECK(m.predict(batch, 0.0)[0].genai);
    CHECK_FALSE(m.predict(batch, 1.0)[0].genai);
    CHECK_THROWS_AS(m.predict(batch, 1.5), std::invalid_argument);
}

TEST_CASE("training mode dropout is stochastic but seeded") {
    ModelConfig c = toy_config(Family::kMlp);
    c.dropout = 0.5;
    Rng rng(12);
    Model m = Model::build(c, rng);
    m.set_training(true);
    std::vector<TokenSequence> batch = {make_seq({2, 3, 4, 5, 6, 7}, 12)};

    Rng d1(5), d2(5), d3(6);
    const auto a = m.forward_scores(batch, &d1).values();
    const auto b = m.forward_scores(batch, &d2).values();
    const auto cdiff = m.forward_scores(batch, &d3).values();
    CHECK(a == b);
    CHECK(a != cdiff);

    m.set_training(false);
    const auto inference = m.forward_scores(batch, nullptr).values();
    CHECK(inference == m.score(batch));
}
