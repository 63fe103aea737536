#include "gtdetect/evaluate.hpp"

#include <algorithm>
#include <stdexcept>

#include "gtdetect/errors.hpp"

namespace gtdetect::evaluation {

Threshold calibrate_threshold(const std::vector<ScoredLabel>& validation, double grid_step) {
    if (!(grid_step > 0.0 && grid_step < 1.0)) {
        throw std::invalid_argument("calibrate_threshold: grid_step must lie in (0, 1)");
    }
    std::size_t n_human = 0, n_genai = 0;
    for (const ScoredLabel& s : validation) {
        if (s.label == 1) {
            ++n_genai;
        } else {
            ++n_human;
        }
    }
    if (n_human == 0 || n_genai == 0) throw DataError("calibration requires both classes");

    // Balanced accuracy comparisons reduce to the integer ch*n_genai +
    // cg*n_human (common denominator n_human*n_genai), so argmax and
    // tie-breaking are exact.
    std::uint64_t best_score = 0;
    double best_tau = grid_step;
    bool have_best = false;
    for (std::size_t i = 1;; ++i) {
        const double tau = static_cast<double>(i) * grid_step;
        if (tau > 1.0 - grid_step + 1e-12) break;
        std::uint64_t correct_human = 0, correct_genai = 0;
        for (const ScoredLabel& s : validation) {
            const bool genai = s.score >= tau;
            if (s.label == 1 && genai) ++correct_genai;
            if (s.label != 1 && !genai) ++correct_human;
        }
        const std::uint64_t score = correct_human * n_genai + correct_genai * n_human;
        if (!have_best || score > best_score) {
            have_best = true;
            best_score = score;
            best_tau = tau;
        }
    }
    if (!have_best) {
        throw std::invalid_argument("calibrate_threshold: grid_step leaves an empty grid");
    }
    return Threshold{best_tau, grid_step, "balanced_accuracy"};
}

std::string scenario_name(Scenario scenario) {
    switch (scenario) {
        case Scenario::kBalanced: return "balanced";
        case Scenario::kMonoclass: return "monoclass";
        case Scenario::kCrossDomain: return "cross_domain";
    }
    throw std::invalid_argument("scenario_name: unknown scenario");
}

std::int64_t rate_tenths(std::size_t correct, std::size_t total) {
    if (total == 0) throw std::invalid_argument("rate_tenths: zero total");
    if (correct > total) throw std::invalid_argument("rate_tenths: correct exceeds total");
    const std::uint64_t num = 1000 * static_cast<std::uint64_t>(correct);
    std::uint64_t q = num / total;
    const std::uint64_t r = num % total;
    // round half to even, exactly
    if (2 * r > total || (2 * r == total && q % 2 == 1)) ++q;
    return static_cast<std::int64_t>(q);
}

std::string format_tenths(std::int64_t tenths) {
    if (tenths < 0) throw std::invalid_argument("format_tenths: negative value");
    return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10);
}

EvalReport evaluate_balanced(const std::vector<DecisionLabel>& decisions) {
    if (decisions.empty()) throw DataError("evaluate_balanced: empty input");
    EvalReport r;
    r.scenario = Scenario::kBalanced;
    for (const DecisionLabel& d : decisions) {
        if (d.label == 1) {
            ++r.n_genai;
            if (d.genai_decision) ++r.correct_genai;
        } else {
            ++r.n_human;
            if (!d.genai_decision) ++r.correct_human;
        }
    }
    if (r.n_human == 0 || r.n_genai == 0) {
        throw DataError("evaluate_balanced: both classes required");
    }
    r.accuracy =
        static_cast<double>(rate_tenths(r.correct_human + r.correct_genai,
                                        r.n_human + r.n_genai)) /
        10.0;
    r.human_rate = static_cast<double>(rate_tenths(r.correct_human, r.n_human)) / 10.0;
    r.genai_rate = static_cast<double>(rate_tenths(r.correct_genai, r.n_genai)) / 10.0;
    return r;
}

EvalReport evaluate_monoclass(const std::vector<std::uint8_t>& genai_decisions) {
    if (genai_decisions.empty()) throw DataError("evaluate_monoclass: empty input");
    EvalReport r;
    r.scenario = Scenario::kMonoclass;
    r.n_genai = genai_decisions.size();
    for (std::uint8_t d : genai_decisions) {
        if (d) ++r.correct_genai;
    }
    const std::int64_t genai_tenths = rate_tenths(r.correct_genai, r.n_genai);
    r.genai_rate = static_cast<double>(genai_tenths) / 10.0;
    r.human_rate = static_cast<double>(1000 - genai_tenths) / 10.0;
    r.accuracy = r.genai_rate;
    return r;
}

std::string display_family_name(models::Family family) {
    switch (family) {
        case models::Family::kMlp: return "MLP";
        case models::Family::kCnn1d: return "CNN 1D";
        case models::Family::kSeparableCnn: return "Separable CNN";
        case models::Family::kTransformer: return "Transformer";
    }
    throw std::invalid_argument("display_family_name: unknown family");
}

namespace {

std::string csv_field(const std::string& value) {
    if (value.find_first_of(",\"\n") == std::string::npos) return value;
    std::string quoted = "\"";
    for (char c : value) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

// Recovers the integer tenths a report rate was built from.
std::int64_t tenths_of(double rate) {
    return static_cast<std::int64_t>(rate * 10.0 + 0.5);
}

}  // namespace

EvalReport run_cross_domain(models::Model& model, const std::vector<corpus::TextRecord>& test,
                            const corpus::Vocabulary& vocab, double tau,
                            const std::string& train_dataset, const std::string& test_dataset) {
    if (test.empty()) throw DataError("run_cross_domain: empty test set");

    std::vector<corpus::TokenSequence> sequences;
    std::vector<int> labels;
    sequences.reserve(test.size());
    labels.reserve(test.size());
    bool any_human = false, any_genai = false;
    for (const corpus::TextRecord& rec : test) {
        if (!rec.label) {
            throw DataError("run_cross_domain: test record '" + rec.id + "' is unlabeled");
        }
        corpus::TokenSequence seq =
            corpus::sequence(corpus::tokenize(rec.text), vocab, model.config().max_len);
        if (seq.valid_count() == 0) {
            throw DataError("run_cross_domain: test record '" + rec.id + "' contains no tokens");
        }
        sequences.push_back(std::move(seq));
        labels.push_back(*rec.label);
        (*rec.label == 1 ? any_genai : any_human) = true;
    }

    const std::vector<models::Prediction> predictions = model.predict(sequences, tau);

    EvalReport report;
    if (any_human && any_genai) {
        std::vector<DecisionLabel> decisions(predictions.size());
        for (std::size_t i = 0; i < predictions.size(); ++i) {
            decisions[i] = DecisionLabel{predictions[i].genai, labels[i]};
        }
        report = evaluate_balanced(decisions);
    } else if (any_genai) {
        std::vector<std::uint8_t> decisions(predictions.size());
        for (std::size_t i = 0; i < predictions.size(); ++i) {
            decisions[i] = predictions[i].genai ? 1 : 0;
        }
        report = evaluate_monoclass(decisions);
    } else {
        throw DataError("run_cross_domain: test set contains only human records");
    }
    report.scenario = Scenario::kCrossDomain;
    report.detector = display_family_name(model.config().family) + " (" + train_dataset + ")";
    report.train_dataset = train_dataset;
    report.test_dataset = test_dataset;
    return report;
}

std::string emit_report(const std::vector<EvalReport>& reports, const std::string& format) {
    if (reports.empty()) throw DataError("emit_report: no reports");
    if (format != "csv" && format != "markdown") {
        throw std::invalid_argument("emit_report: unknown format '" + format + "'");
    }

    std::vector<const EvalReport*> order;
    order.reserve(reports.size());
    for (const EvalReport& r : reports) order.push_back(&r);
    std::stable_sort(order.begin(), order.end(), [](const EvalReport* a, const EvalReport* b) {
        if (a->accuracy != b->accuracy) return a->accuracy > b->accuracy;
        return a->detector < b->detector;
    });

    std::string out;
    if (format == "csv") {
        out = "Detector,Accuracy,Human,GenAI\n";
        for (const EvalReport* r : order) {
            out += csv_field(r->detector) + "," + format_tenths(tenths_of(r->accuracy)) + "," +
                   format_tenths(tenths_of(r->human_rate)) + "," +
                   format_tenths(tenths_of(r->genai_rate)) + "\n";
        }
    } else {
        out = "| Detector | Accuracy(%) | Human(%) | GenAI(%) |\n";
        out += "| --- | --- | --- | --- |\n";
        for (const EvalReport* r : order) {
            out += "| " + r->detector + " | " + format_tenths(tenths_of(r->accuracy)) + " | " +
                   format_tenths(tenths_of(r->human_rate)) + " | " +
                   format_tenths(tenths_of(r->genai_rate)) + " |\n";
        }
    }
    return out;
}

}  // namespace gtdetect::evaluation
