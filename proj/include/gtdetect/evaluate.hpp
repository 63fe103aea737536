#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gtdetect/corpus.hpp"
#include "gtdetect/model.hpp"

namespace gtdetect::evaluation {

// Decision cutoff chosen on validation data, kept with its provenance.
struct Threshold {
    double tau = 0.5;
    double grid_step = 0.01;
    std::string objective = "balanced_accuracy";
};

struct ScoredLabel {
    double score = 0.0;
    int label = 0;  // 1 = genai
};

// Grid argmax of balanced accuracy (mean per-class correct rate under the
// >= rule) over {grid_step, 2*grid_step, ..., <= 1 - grid_step}; ties go to
// the smallest tau. Scoring is exact integer arithmetic.
Threshold calibrate_threshold(const std::vector<ScoredLabel>& validation,
                              double grid_step = 0.01);

enum class Scenario { kBalanced, kMonoclass, kCrossDomain };

std::string scenario_name(Scenario scenario);

// Table-style detector label: "MLP", "CNN 1D", "Separable CNN", "Transformer".
std::string display_family_name(models::Family family);

// Counts plus one-decimal percentage rates. The doubles are exact tenths
// (t/10.0) produced by the evaluators; emit_report formats from them
// verbatim.
struct EvalReport {
    std::string detector;
    Scenario scenario = Scenario::kBalanced;
    std::string train_dataset;  // cross-domain annotation, empty otherwise
    std::string test_dataset;
    std::size_t n_human = 0;
    std::size_t n_genai = 0;
    std::size_t correct_human = 0;
    std::size_t correct_genai = 0;
    double accuracy = 0.0;
    double human_rate = 0.0;
    double genai_rate = 0.0;
};

struct DecisionLabel {
    bool genai_decision = false;
    int label = 0;  // 1 = genai
};

// 100*correct/total rounded to integer tenths of a percent, half to even,
// computed exactly in integers.
std::int64_t rate_tenths(std::size_t correct, std::size_t total);

// 812 -> "81.2", 1000 -> "100.0"
std::string format_tenths(std::int64_t tenths);

// Two-class protocol: per-class rates plus overall accuracy.
EvalReport evaluate_balanced(const std::vector<DecisionLabel>& decisions);

// Single-class (genai-only) protocol: accuracy equals the genai detection
// rate and human_rate is derived as 100 - genai_rate after rounding, so the
// two always sum to exactly 100.0.
EvalReport evaluate_monoclass(const std::vector<std::uint8_t>& genai_decisions);

// Scores labeled records from another domain at threshold tau; unseen tokens
// map to UNK by construction. Picks the monoclass protocol when the test set
// is genai-only, the balanced protocol when both classes appear.
EvalReport run_cross_domain(models::Model& model, const std::vector<corpus::TextRecord>& test,
                            const corpus::Vocabulary& vocab, double tau,
                            const std::string& train_dataset, const std::string& test_dataset);

// Renders reports sorted by accuracy descending (ties by detector name) in
// "csv" or "markdown" format; both carry identical formatted values.
std::string emit_report(const std::vector<EvalReport>& reports, const std::string& format);

}  // namespace gtdetect::evaluation
