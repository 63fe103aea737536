#include "gtdetect/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gtdetect/checkpoint.hpp"
#include "gtdetect/corpus.hpp"
#include "gtdetect/errors.hpp"
#include "gtdetect/evaluate.hpp"
#include "gtdetect/model.hpp"
#include "gtdetect/rng.hpp"
#include "gtdetect/train.hpp"

namespace gtdetect::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(path + ": cannot open for writing");
    out << content;
    if (!out) throw DataError(path + ": write failed");
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(path + ": cannot open file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Locates <name>.jsonl or <name>.csv under dir; empty string when absent.
std::string find_split_file(const fs::path& dir, const std::vector<std::string>& names) {
    for (const std::string& name : names) {
        for (const char* ext : {".jsonl", ".csv"}) {
            const fs::path candidate = dir / (name + ext);
            if (fs::exists(candidate)) return candidate.string();
        }
    }
    return "";
}

corpus::DatasetSplits load_splits(const std::string& data_path, const std::string& val_path) {
    corpus::DatasetSplits splits;
    if (fs::is_directory(data_path)) {
        const std::string train_file = find_split_file(data_path, {"train"});
        const std::string val_file = find_split_file(data_path, {"validation", "val"});
        if (train_file.empty()) {
            throw DataError(data_path + ": no train.jsonl or train.csv in the data directory");
        }
        if (val_file.empty()) {
            throw DataError(data_path +
                            ": no validation.{jsonl,csv} or val.{jsonl,csv} in the data "
                            "directory");
        }
        splits.train = corpus::load_records(train_file);
        splits.validation = corpus::load_records(val_file);
        const std::string test_file = find_split_file(data_path, {"test"});
        if (!test_file.empty()) splits.test = corpus::load_records(test_file);
    } else {
        if (val_path.empty()) {
            throw UsageError("--val is required when --data is a single file");
        }
        splits.train = corpus::load_records(data_path);
        splits.validation = corpus::load_records(val_path);
    }
    splits.validate();
    return splits;
}

evaluation::Threshold calibrate_on(models::Model& model,
                                   const std::vector<corpus::TextRecord>& records,
                                   const corpus::Vocabulary& vocab, double grid_step) {
    std::vector<corpus::TokenSequence> sequences;
    std::vector<evaluation::ScoredLabel> scored;
    sequences.reserve(records.size());
    for (const corpus::TextRecord& rec : records) {
        if (!rec.label) {
            throw DataError("calibration record '" + rec.id + "' is unlabeled");
        }
        sequences.push_back(
            corpus::sequence(corpus::tokenize(rec.text), vocab, model.config().max_len));
    }
    const std::vector<double> scores = model.score(sequences);
    scored.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        scored.push_back(evaluation::ScoredLabel{scores[i], *records[i].label});
    }
    return evaluation::calibrate_threshold(scored, grid_step);
}

std::string format_score(double score) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", score);
    return buf;
}

struct BuildVocabOpts {
    std::string data;
    std::string out;
    std::size_t max_size = 20000;
    std::size_t min_frequency = 1;
};

int cmd_build_vocab(const BuildVocabOpts& opts) {
    const std::vector<corpus::TextRecord> records = corpus::load_records(opts.data);
    const corpus::Vocabulary vocab = corpus::build_vocab(records, opts.max_size,
                                                         opts.min_frequency);
    vocab.save(opts.out);
    std::cout << "vocabulary of " << vocab.tokens().size() << " tokens written to " << opts.out
              << "\n";
    return 0;
}

struct TrainOpts {
    std::string model_config;
    std::string train_config;
    std::string data;
    std::string val;
    std::string out;
    std::string history;
    std::string vocab;
    std::size_t max_size = 20000;
    std::size_t min_frequency = 1;
    double grid_step = 0.01;
    std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainOpts& opts) {
    models::ModelConfig model_config = models::ModelConfig::from_json_file(opts.model_config);
    training::TrainConfig train_config =
        opts.train_config.empty() ? training::TrainConfig{}
                                  : training::TrainConfig::from_json_file(opts.train_config);
    if (opts.seed) train_config.seed = *opts.seed;

    const corpus::DatasetSplits splits = load_splits(opts.data, opts.val);
    const corpus::Vocabulary vocab =
        opts.vocab.empty() ? corpus::build_vocab(splits.train, opts.max_size, opts.min_frequency)
                           : corpus::Vocabulary::load(opts.vocab);

    if (model_config.vocab_size == 0) {
        model_config.vocab_size = vocab.size();
    } else if (model_config.vocab_size != vocab.size()) {
        throw DataError("model config vocab_size " + std::to_string(model_config.vocab_size) +
                        " does not match the vocabulary (" + std::to_string(vocab.size()) + ")");
    }

    Rng init_rng = Rng(train_config.seed).fork(0);
    models::Model model = models::Model::build(model_config, init_rng);
    const training::TrainHistory history = training::train(model, splits, train_config, vocab);
    const evaluation::Threshold threshold =
        calibrate_on(model, splits.validation, vocab, opts.grid_step);

    checkpoint::Fingerprint fingerprint;
    fingerprint.seed = train_config.seed;
    fingerprint.train_config = train_config;
    fingerprint.train_data_hash = checkpoint::records_hash(splits.train);
    fingerprint.val_data_hash = checkpoint::records_hash(splits.validation);

    checkpoint::Checkpoint::from_model(model, vocab, threshold, fingerprint).save(opts.out);
    const std::string history_path =
        opts.history.empty() ? opts.out + ".history.csv" : opts.history;
    history.save_csv(history_path);

    std::cout << "trained " << history.epochs.size() << " epochs, best validation epoch "
              << history.best_epoch << "\n";
    std::cout << "calibrated tau " << format_score(threshold.tau) << "\n";
    std::cout << "checkpoint written to " << opts.out << "\n";
    std::cout << "history written to " << history_path << "\n";
    return 0;
}

struct CalibrateOpts {
    std::string ckpt;
    std::string data;
    std::string out;
    double grid_step = 0.01;
};

int cmd_calibrate(const CalibrateOpts& opts) {
    checkpoint::Checkpoint ckpt = checkpoint::Checkpoint::load(opts.ckpt);
    models::Model model = ckpt.restore();
    const std::vector<corpus::TextRecord> records = corpus::load_records(opts.data);
    const evaluation::Threshold threshold =
        calibrate_on(model, records, ckpt.vocabulary, opts.grid_step);
    std::cout << "tau " << format_score(threshold.tau) << "\n";
    if (!opts.out.empty()) {
        ckpt.threshold = threshold;
        ckpt.save(opts.out);
        std::cout << "checkpoint written to " << opts.out << "\n";
    }
    return 0;
}

struct EvalOpts {
    std::string ckpt;
    std::string data;
    std::string scenario;
    std::string manifest;
    std::string format = "csv";
    std::string out;
    std::string detector;
    std::string train_dataset;
    std::string test_dataset;
    std::optional<double> tau;
};

evaluation::EvalReport eval_single(const EvalOpts& opts) {
    checkpoint::Checkpoint ckpt = checkpoint::Checkpoint::load(opts.ckpt);
    models::Model model = ckpt.restore();
    const double tau = opts.tau ? *opts.tau : ckpt.threshold.tau;
    const std::vector<corpus::TextRecord> records = corpus::load_records(opts.data);
    if (records.empty()) throw DataError(opts.data + ": no records");

    evaluation::EvalReport report;
    if (opts.scenario == "cross-domain") {
        if (opts.train_dataset.empty() || opts.test_dataset.empty()) {
            throw UsageError(
                "--train-dataset and --test-dataset are required for the cross-domain "
                "scenario");
        }
        report = evaluation::run_cross_domain(model, records, ckpt.vocabulary, tau,
                                              opts.train_dataset, opts.test_dataset);
    } else {
        std::vector<corpus::TokenSequence> sequences;
        sequences.reserve(records.size());
        for (const corpus::TextRecord& rec : records) {
            corpus::TokenSequence seq =
                corpus::sequence(corpus::tokenize(rec.text), ckpt.vocabulary,
                                 model.config().max_len);
            if (seq.valid_count() == 0) {
                throw DataError("test record '" + rec.id + "' contains no tokens");
            }
            sequences.push_back(std::move(seq));
        }
        const std::vector<models::Prediction> predictions = model.predict(sequences, tau);

        if (opts.scenario == "balanced") {
            std::vector<evaluation::DecisionLabel> decisions;
            decisions.reserve(records.size());
            for (std::size_t i = 0; i < records.size(); ++i) {
                if (!records[i].label) {
                    throw DataError("balanced scenario: record '" + records[i].id +
                                    "' is unlabeled");
                }
                decisions.push_back(
                    evaluation::DecisionLabel{predictions[i].genai, *records[i].label});
            }
            report = evaluation::evaluate_balanced(decisions);
        } else {  // monoclass
            std::vector<std::uint8_t> decisions;
            decisions.reserve(records.size());
            for (std::size_t i = 0; i < records.size(); ++i) {
                if (records[i].label && *records[i].label == 0) {
                    throw DataError("monoclass scenario requires genai-only data; record '" +
                                    records[i].id + "' is labeled human");
                }
                decisions.push_back(predictions[i].genai ? 1 : 0);
            }
            report = evaluation::evaluate_monoclass(decisions);
        }
        report.detector = evaluation::display_family_name(model.config().family);
    }
    if (!opts.detector.empty()) report.detector = opts.detector;
    return report;
}

int cmd_eval(const EvalOpts& opts) {
    std::vector<evaluation::EvalReport> reports;
    if (!opts.manifest.empty()) {
        json manifest;
        try {
            manifest = json::parse(read_text_file(opts.manifest));
        } catch (const json::exception& e) {
            throw DataError(opts.manifest + ": malformed JSON: " + e.what());
        }
        if (!manifest.is_array() || manifest.empty()) {
            throw DataError(opts.manifest + ": manifest must be a non-empty JSON array");
        }
        for (const json& entry : manifest) {
            if (!entry.is_object() || !entry.contains("checkpoint") || !entry.contains("data") ||
                !entry.contains("scenario")) {
                throw DataError(opts.manifest +
                                ": each manifest entry needs checkpoint, data and scenario");
            }
            EvalOpts run;
            run.ckpt = entry["checkpoint"].get<std::string>();
            run.data = entry["data"].get<std::string>();
            run.scenario = entry["scenario"].get<std::string>();
            if (run.scenario == "cross_domain") run.scenario = "cross-domain";
            if (run.scenario != "balanced" && run.scenario != "monoclass" &&
                run.scenario != "cross-domain") {
                throw DataError(opts.manifest + ": unknown scenario '" + run.scenario + "'");
            }
            if (entry.contains("tau")) run.tau = entry["tau"].get<double>();
            if (entry.contains("detector")) run.detector = entry["detector"].get<std::string>();
            if (entry.contains("train_dataset")) {
                run.train_dataset = entry["train_dataset"].get<std::string>();
            }
            if (entry.contains("test_dataset")) {
                run.test_dataset = entry["test_dataset"].get<std::string>();
            }
            reports.push_back(eval_single(run));
        }
    } else {
        if (opts.ckpt.empty() || opts.data.empty()) {
            throw UsageError("eval needs --checkpoint and --data (or --manifest)");
        }
        reports.push_back(eval_single(opts));
    }

    const std::string rendered = evaluation::emit_report(reports, opts.format);
    std::cout << rendered;
    if (!opts.out.empty()) write_text_file(opts.out, rendered);
    return 0;
}

struct PredictOpts {
    std::string ckpt;
    std::string data;
    std::optional<double> tau;
};

int cmd_predict(const PredictOpts& opts) {
    const checkpoint::Checkpoint ckpt = checkpoint::Checkpoint::load(opts.ckpt);
    models::Model model = ckpt.restore();
    const double tau = opts.tau ? *opts.tau : ckpt.threshold.tau;
    if (!(tau >= 0.0 && tau <= 1.0)) throw UsageError("--tau must lie in [0, 1]");

    std::string input;
    if (opts.data.empty()) {
        std::ostringstream buf;
        buf << std::cin.rdbuf();
        input = buf.str();
    } else {
        input = read_text_file(opts.data);
    }

    // lenient line-by-line parse: bad records are skipped with a warning
    std::vector<corpus::TextRecord> records;
    std::vector<corpus::TokenSequence> sequences;
    std::size_t skipped = 0;
    std::istringstream lines(input);
    std::string line;
    for (std::size_t line_no = 1; std::getline(lines, line); ++line_no) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::string reason;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            reason = "not a JSON object";
        } else if (!j.contains("text") || !j["text"].is_string()) {
            reason = "missing string field 'text'";
        }
        corpus::TextRecord rec;
        corpus::TokenSequence seq;
        if (reason.empty()) {
            rec.text = j["text"].get<std::string>();
            rec.id = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>()
                                                             : "rec-" + std::to_string(line_no);
            seq = corpus::sequence(corpus::tokenize(rec.text), ckpt.vocabulary,
                                   model.config().max_len);
            if (seq.valid_count() == 0) reason = "no tokens";
        }
        if (!reason.empty()) {
            std::cerr << "warning: line " << line_no << ": " << reason << ", skipped\n";
            ++skipped;
            continue;
        }
        records.push_back(std::move(rec));
        sequences.push_back(std::move(seq));
    }

    if (!sequences.empty()) {
        const std::vector<double> scores = model.score(sequences);
        for (std::size_t i = 0; i < scores.size(); ++i) {
            std::cout << records[i].id << " " << format_score(scores[i]) << " "
                      << (scores[i] >= tau ? "genai" : "human") << "\n";
        }
    }
    std::cerr << "predicted " << records.size() << " records, skipped " << skipped
              << " unparseable line(s)\n";
    return 0;
}

struct ReportOpts {
    std::vector<std::string> inputs;
    std::string format = "markdown";
    std::string out;
};

// Parses a one-decimal percentage like "81.2" back into tenths.
std::int64_t parse_tenths(const std::string& cell, const std::string& path) {
    const std::size_t dot = cell.find('.');
    if (cell.empty() || dot == std::string::npos || dot == 0 || dot + 2 != cell.size() ||
        cell.find_first_not_of("0123456789", dot + 1) != std::string::npos ||
        cell.substr(0, dot).find_first_not_of("0123456789") != std::string::npos) {
        throw DataError(path + ": malformed rate '" + cell + "'");
    }
    return std::stoll(cell.substr(0, dot)) * 10 + (cell[dot + 1] - '0');
}

int cmd_report(const ReportOpts& opts) {
    std::vector<evaluation::EvalReport> reports;
    for (const std::string& path : opts.inputs) {
        std::istringstream in(read_text_file(path));
        std::string line;
        if (!std::getline(in, line) || line != "Detector,Accuracy,Human,GenAI") {
            throw DataError(path + ": expected header Detector,Accuracy,Human,GenAI");
        }
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            // split from the right: the three rate columns cannot contain commas
            std::vector<std::size_t> commas;
            for (std::size_t i = line.size(); i-- > 0;) {
                if (line[i] == ',') {
                    commas.push_back(i);
                    if (commas.size() == 3) break;
                }
            }
            if (commas.size() != 3) throw DataError(path + ": malformed row '" + line + "'");
            evaluation::EvalReport r;
            std::string name = line.substr(0, commas[2]);
            if (name.size() >= 2 && name.front() == '"' && name.back() == '"') {
                std::string unquoted;
                for (std::size_t i = 1; i + 1 < name.size(); ++i) {
                    if (name[i] == '"' && i + 2 < name.size() && name[i + 1] == '"') ++i;
                    unquoted += name[i];
                }
                name = unquoted;
            }
            r.detector = name;
            r.accuracy = static_cast<double>(parse_tenths(
                             line.substr(commas[2] + 1, commas[1] - commas[2] - 1), path)) /
                         10.0;
            r.human_rate = static_cast<double>(parse_tenths(
                               line.substr(commas[1] + 1, commas[0] - commas[1] - 1), path)) /
                           10.0;
            r.genai_rate =
                static_cast<double>(parse_tenths(line.substr(commas[0] + 1), path)) / 10.0;
            reports.push_back(std::move(r));
        }
    }
    const std::string rendered = evaluation::emit_report(reports, opts.format);
    std::cout << rendered;
    if (!opts.out.empty()) write_text_file(opts.out, rendered);
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Human-vs-GenAI text detection toolkit"};
    app.require_subcommand(1);

    BuildVocabOpts vocab_opts;
    CLI::App* build_vocab = app.add_subcommand("build-vocab", "Build a vocabulary file");
    build_vocab->add_option("data", vocab_opts.data, "Training records (.jsonl or .csv)")
        ->required();
    build_vocab->add_option("--out", vocab_opts.out, "Output vocabulary JSON")->required();
    build_vocab->add_option("--max-size", vocab_opts.max_size, "Maximum stored tokens");
    build_vocab->add_option("--min-frequency", vocab_opts.min_frequency,
                            "Minimum token frequency");

    TrainOpts train_opts;
    std::uint64_t seed_value = 0;
    CLI::App* train = app.add_subcommand("train", "Train a detector and write a checkpoint");
    train->add_option("--model-config", train_opts.model_config, "Model config JSON")
        ->required();
    train->add_option("--config,--train-config", train_opts.train_config,
                      "Training config JSON");
    train->add_option("--data", train_opts.data,
                      "Data directory (train/validation files) or training file")
        ->required();
    train->add_option("--val", train_opts.val, "Validation file when --data is a file");
    train->add_option("--out", train_opts.out, "Output checkpoint path")->required();
    train->add_option("--history", train_opts.history,
                      "History CSV path (default: <out>.history.csv)");
    train->add_option("--vocab", train_opts.vocab, "Existing vocabulary JSON");
    train->add_option("--max-size", train_opts.max_size, "Vocabulary size when building");
    train->add_option("--min-frequency", train_opts.min_frequency,
                      "Vocabulary min frequency when building");
    train->add_option("--grid-step", train_opts.grid_step, "Calibration grid step");
    CLI::Option* seed_opt = train->add_option("--seed", seed_value, "Seed override");

    CalibrateOpts cal_opts;
    CLI::App* calibrate = app.add_subcommand("calibrate", "Recalibrate a checkpoint threshold");
    calibrate->add_option("--checkpoint", cal_opts.ckpt, "Checkpoint path")->required();
    calibrate->add_option("--data", cal_opts.data, "Labeled validation records")->required();
    calibrate->add_option("--grid-step", cal_opts.grid_step, "Calibration grid step");
    calibrate->add_option("--out", cal_opts.out, "Write the recalibrated checkpoint here");

    EvalOpts eval_opts;
    double eval_tau = 0.0;
    CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a test set");
    eval->add_option("--checkpoint", eval_opts.ckpt, "Checkpoint path");
    eval->add_option("--data", eval_opts.data, "Test records");
    eval->add_option("--scenario", eval_opts.scenario, "Evaluation scenario")
        ->check(CLI::IsMember({"balanced", "monoclass", "cross-domain"}));
    eval->add_option("--manifest", eval_opts.manifest, "JSON manifest of evaluation runs");
    eval->add_option("--format", eval_opts.format, "Report format")
        ->check(CLI::IsMember({"csv", "markdown"}));
    eval->add_option("--out", eval_opts.out, "Also write the report here");
    eval->add_option("--detector", eval_opts.detector, "Detector label for the report");
    eval->add_option("--train-dataset", eval_opts.train_dataset,
                     "Training dataset label (cross-domain)");
    eval->add_option("--test-dataset", eval_opts.test_dataset,
                     "Test dataset label (cross-domain)");
    CLI::Option* eval_tau_opt =
        eval->add_option("--tau", eval_tau, "Threshold override")->check(CLI::Range(0.0, 1.0));

    PredictOpts predict_opts;
    double predict_tau = 0.0;
    CLI::App* predict = app.add_subcommand("predict", "Score records from a file or stdin");
    predict->add_option("--checkpoint", predict_opts.ckpt, "Checkpoint path")->required();
    predict->add_option("--data", predict_opts.data, "Input JSONL (default: stdin)");
    CLI::Option* predict_tau_opt = predict->add_option("--tau", predict_tau,
                                                       "Threshold override")
                                       ->check(CLI::Range(0.0, 1.0));

    ReportOpts report_opts;
    CLI::App* report = app.add_subcommand("report", "Merge and render report CSVs");
    report->add_option("inputs", report_opts.inputs, "Report CSV files")->required();
    report->add_option("--format", report_opts.format, "Output format")
        ->check(CLI::IsMember({"csv", "markdown"}));
    report->add_option("--out", report_opts.out, "Also write the merged report here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(build_vocab)) return cmd_build_vocab(vocab_opts);
        if (app.got_subcommand(train)) {
            if (seed_opt->count() > 0) train_opts.seed = seed_value;
            return cmd_train(train_opts);
        }
        if (app.got_subcommand(calibrate)) return cmd_calibrate(cal_opts);
        if (app.got_subcommand(eval)) {
            if (eval_tau_opt->count() > 0) eval_opts.tau = eval_tau;
            if (eval_opts.manifest.empty() && eval_opts.scenario.empty()) {
                throw UsageError("eval needs --scenario (or --manifest)");
            }
            return cmd_eval(eval_opts);
        }
        if (app.got_subcommand(predict)) {
            if (predict_tau_opt->count() > 0) predict_opts.tau = predict_tau;
            return cmd_predict(predict_opts);
        }
        if (app.got_subcommand(report)) return cmd_report(report_opts);
        throw UsageError("no command given");
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace gtdetect::cli
