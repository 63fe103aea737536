#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gtdetect/errors.hpp"

namespace gtdetect::corpus {

// One labeled or unlabeled text sample. label: 0 = Human, 1 = GenAI.
struct TextRecord {
    std::string id;
    std::string text;
    std::optional<int> label;
    std::optional<std::string> language;
    std::optional<std::string> source;
    std::optional<std::string> generator;
};

struct DatasetSplits {
    std::vector<TextRecord> train;
    std::vector<TextRecord> validation;
    std::vector<TextRecord> test;

    // Checks that ids are unique and pairwise disjoint across splits and
    // that every train/validation record carries a label.
    void validate() const;
};

// Token-to-id map with reserved ids 0 (PAD) and 1 (UNK). Stored tokens get
// contiguous ids starting at 2 in rank order (frequency descending, ties
// broken lexicographically).
class Vocabulary {
public:
    static constexpr std::int32_t kPad = 0;
    static constexpr std::int32_t kUnk = 1;

    Vocabulary() = default;
    Vocabulary(std::vector<std::string> tokens, std::size_t max_size, std::size_t min_frequency);

    std::int32_t id_of(const std::string& token) const;  // kUnk when absent

    // Total id count including PAD and UNK; valid ids are [0, size()).
    std::size_t size() const { return tokens_.size() + 2; }
    const std::vector<std::string>& tokens() const { return tokens_; }
    std::size_t max_size() const { return max_size_; }
    std::size_t min_frequency() const { return min_frequency_; }

    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);
    std::string to_json_string() const;
    static Vocabulary from_json_string(const std::string& text);

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::int32_t> ids_;
    std::size_t max_size_ = 0;
    std::size_t min_frequency_ = 1;
};

// Fixed-length token-id vector plus padding mask. Real tokens occupy a
// left-aligned prefix; mask[i] = 1 exactly at real-token positions.
struct TokenSequence {
    std::vector<std::int32_t> ids;
    std::vector<std::uint8_t> mask;

    std::size_t length() const { return ids.size(); }
    std::size_t valid_count() const;
};

// NFC-normalizes UTF-8 text; malformed byte sequences become U+FFFD.
std::string normalize_nfc(const std::string& utf8);

// Deterministic word tokenizer: NFC normalization, per-codepoint lowercasing,
// whitespace splits, punctuation detached as single-character tokens.
std::vector<std::string> tokenize(const std::string& text);

// Frequency-ranked vocabulary over the given records (training split only).
Vocabulary build_vocab(const std::vector<TextRecord>& records, std::size_t max_size,
                       std::size_t min_frequency);

// Ids for the first min(|tokens|, max_len) tokens (UNK when out of
// vocabulary), PAD afterwards.
TokenSequence sequence(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                       std::size_t max_len);

// Canonical record field -> file field name.
using FieldSchema = std::map<std::string, std::string>;
FieldSchema default_jsonl_schema();

std::vector<TextRecord> load_jsonl(const std::string& path,
                                   const FieldSchema& schema = default_jsonl_schema());

// CSV with a header row; requires a "text" column, accepts label, id,
// language, source and model columns.
std::vector<TextRecord> load_csv(const std::string& path);

// Dispatch on extension: .csv -> load_csv, anything else -> load_jsonl.
std::vector<TextRecord> load_records(const std::string& path);

}  // namespace gtdetect::corpus
