#include "gtdetect/corpus.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace gtdetect::corpus {

namespace {

using nlohmann::json;

const icu::Normalizer2& nfc() {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* instance = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status) || instance == nullptr) {
        throw std::runtime_error("ICU NFC normalizer unavailable");
    }
    return *instance;
}

icu::UnicodeString normalize_ustring(const std::string& utf8) {
    UErrorCode status = U_ZERO_ERROR;
    icu::UnicodeString raw = icu::UnicodeString::fromUTF8(utf8);
    icu::UnicodeString out = nfc().normalize(raw, status);
    if (U_FAILURE(status)) throw std::runtime_error("NFC normalization failed");
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(path + ": cannot open file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

void DatasetSplits::validate() const {
    std::unordered_set<std::string> seen;
    auto check_split = [&](const std::vector<TextRecord>& split, const char* name) {
        for (const TextRecord& r : split) {
            if (!seen.insert(r.id).second) {
                throw DataError("duplicate record id '" + r.id + "' involving split " + name);
            }
        }
    };
    check_split(train, "train");
    check_split(validation, "validation");
    check_split(test, "test");
    for (const TextRecord& r : train) {
        if (!r.label) throw DataError("train record '" + r.id + "' is unlabeled");
    }
    for (const TextRecord& r : validation) {
        if (!r.label) throw DataError("validation record '" + r.id + "' is unlabeled");
    }
}

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::size_t max_size,
                       std::size_t min_frequency)
    : tokens_(std::move(tokens)), max_size_(max_size), min_frequency_(min_frequency) {
    ids_.reserve(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        auto [it, inserted] = ids_.emplace(tokens_[i], static_cast<std::int32_t>(i + 2));
        if (!inserted) throw DataError("vocabulary contains duplicate token '" + tokens_[i] + "'");
    }
}

std::int32_t Vocabulary::id_of(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnk : it->second;
}

std::string Vocabulary::to_json_string() const {
    json j;
    j["tokens"] = tokens_;
    j["max_size"] = max_size_;
    j["min_frequency"] = min_frequency_;
    return j.dump(2) + "\n";
}

Vocabulary Vocabulary::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed vocabulary JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("tokens") || !j["tokens"].is_array()) {
        throw DataError("vocabulary JSON must be an object with a \"tokens\" array");
    }
    std::vector<std::string> tokens;
    tokens.reserve(j["tokens"].size());
    for (const auto& t : j["tokens"]) {
        if (!t.is_string()) throw DataError("vocabulary tokens must be strings");
        tokens.push_back(t.get<std::string>());
    }
    const std::size_t max_size = j.value("max_size", tokens.size());
    const std::size_t min_frequency = j.value("min_frequency", std::size_t{1});
    return Vocabulary(std::move(tokens), max_size, min_frequency);
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(path + ": cannot open for writing");
    out << to_json_string();
    if (!out) throw DataError(path + ": write failed");
}

Vocabulary Vocabulary::load(const std::string& path) {
    try {
        return from_json_string(read_file(path));
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

std::size_t TokenSequence::valid_count() const {
    std::size_t n = 0;
    for (std::uint8_t m : mask) n += m;
    return n;
}

std::string normalize_nfc(const std::string& utf8) {
    std::string out;
    normalize_ustring(utf8).toUTF8String(out);
    return out;
}

std::vector<std::string> tokenize(const std::string& text) {
    const icu::UnicodeString normalized = normalize_ustring(text);
    std::vector<std::string> tokens;
    icu::UnicodeString current;
    auto flush = [&] {
        if (!current.isEmpty()) {
            std::string token;
            current.toUTF8String(token);
            tokens.push_back(std::move(token));
            current.remove();
        }
    };
    for (std::int32_t i = 0; i < normalized.length();) {
        const UChar32 c = normalized.char32At(i);
        i += U16_LENGTH(c);
        if (u_isUWhiteSpace(c)) {
            flush();
            continue;
        }
        const UChar32 lower = u_tolower(c);
        if (u_ispunct(lower)) {
            flush();
            icu::UnicodeString punct;
            punct.append(lower);
            std::string token;
            punct.toUTF8String(token);
            tokens.push_back(std::move(token));
            continue;
        }
        current.append(lower);
    }
    flush();
    return tokens;
}

Vocabulary build_vocab(const std::vector<TextRecord>& records, std::size_t max_size,
                       std::size_t min_frequency) {
    if (records.empty()) throw DataError("build_vocab: empty corpus");
    if (max_size == 0) throw std::invalid_argument("build_vocab: max_size must be positive");
    if (min_frequency == 0) {
        throw std::invalid_argument("build_vocab: min_frequency must be positive");
    }
    std::unordered_map<std::string, std::size_t> counts;
    std::size_t total = 0;
    for (const TextRecord& r : records) {
        for (std::string& t : tokenize(r.text)) {
            ++counts[std::move(t)];
            ++total;
        }
    }
    if (total == 0) throw DataError("build_vocab: empty corpus (no tokens)");

    std::vector<std::pair<std::string, std::size_t>> ranked;
    ranked.reserve(counts.size());
    for (auto& [token, count] : counts) {
        if (count >= min_frequency) ranked.emplace_back(token, count);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (ranked.size() > max_size) ranked.resize(max_size);

    std::vector<std::string> tokens;
    tokens.reserve(ranked.size());
    for (auto& [token, count] : ranked) tokens.push_back(std::move(token));
    return Vocabulary(std::move(tokens), max_size, min_frequency);
}

TokenSequence sequence(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                       std::size_t max_len) {
    if (max_len == 0) throw std::invalid_argument("sequence: max_len must be at least 1");
    TokenSequence seq;
    seq.ids.assign(max_len, Vocabulary::kPad);
    seq.mask.assign(max_len, 0);
    const std::size_t n = std::min(tokens.size(), max_len);
    for (std::size_t i = 0; i < n; ++i) {
        seq.ids[i] = vocab.id_of(tokens[i]);
        seq.mask[i] = 1;
    }
    return seq;
}

FieldSchema default_jsonl_schema() {
    return {{"id", "id"},         {"text", "text"},     {"label", "label"},
            {"language", "language"}, {"source", "source"}, {"generator", "model"}};
}

namespace {

int parse_label(const json& value, const std::string& where) {
    if (value.is_number_integer() || value.is_number_unsigned()) {
        const std::int64_t v = value.get<std::int64_t>();
        if (v != 0 && v != 1) throw DataError(where + ": label out of range (" +
                                              std::to_string(v) + ", expected 0 or 1)");
        return static_cast<int>(v);
    }
    throw DataError(where + ": label must be an integer 0 or 1");
}

std::optional<std::string> parse_optional_string(const json& obj, const std::string& field,
                                                 const std::string& where) {
    if (!obj.contains(field) || obj[field].is_null()) return std::nullopt;
    const json& v = obj[field];
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
    throw DataError(where + ": field '" + field + "' must be a string");
}

}  // namespace

std::vector<TextRecord> load_jsonl(const std::string& path, const FieldSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(path + ": cannot open file");

    auto field = [&](const std::string& canonical) {
        auto it = schema.find(canonical);
        return it == schema.end() ? canonical : it->second;
    };

    std::vector<TextRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path + ": line " + std::to_string(line_no);
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError(where + ": malformed JSON: " + e.what());
        }
        if (!obj.is_object()) throw DataError(where + ": expected a JSON object");

        TextRecord rec;
        if (auto id = parse_optional_string(obj, field("id"), where)) {
            rec.id = *id;
        } else {
            rec.id = "rec-" + std::to_string(line_no);
        }
        const std::string text_field = field("text");
        if (!obj.contains(text_field) || obj[text_field].is_null()) {
            throw DataError(where + ": record '" + rec.id + "' is missing mandatory field '" +
                            text_field + "'");
        }
        if (!obj[text_field].is_string()) {
            throw DataError(where + ": field '" + text_field + "' must be a string");
        }
        rec.text = obj[text_field].get<std::string>();
        const std::string label_field = field("label");
        if (obj.contains(label_field) && !obj[label_field].is_null()) {
            rec.label = parse_label(obj[label_field], where);
        }
        rec.language = parse_optional_string(obj, field("language"), where);
        rec.source = parse_optional_string(obj, field("source"), where);
        rec.generator = parse_optional_string(obj, field("generator"), where);
        records.push_back(std::move(rec));
    }
    return records;
}

namespace {

// RFC 4180 style rows; quoted fields may contain commas, quotes ("") and
// newlines.
std::vector<std::vector<std::string>> parse_csv(const std::string& content) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cell;
    bool quoted = false;
    bool row_started = false;
    for (std::size_t i = 0; i < content.size(); ++i) {
        const char c = content[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < content.size() && content[i + 1] == '"') {
                    cell.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                quoted = true;
                row_started = true;
                break;
            case ',':
                row.push_back(std::move(cell));
                cell.clear();
                row_started = true;
                break;
            case '\r':
                break;
            case '\n':
                if (row_started || !cell.empty()) {
                    row.push_back(std::move(cell));
                    cell.clear();
                    rows.push_back(std::move(row));
                    row.clear();
                    row_started = false;
                }
                break;
            default:
                cell.push_back(c);
                row_started = true;
                break;
        }
    }
    if (row_started || !cell.empty()) {
        row.push_back(std::move(cell));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

std::vector<TextRecord> load_csv(const std::string& path) {
    const auto rows = parse_csv(read_file(path));
    if (rows.empty()) throw DataError(path + ": empty CSV file");

    const std::vector<std::string>& header = rows.front();
    auto column = [&](const std::string& name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        return std::nullopt;
    };
    const auto text_col = column("text");
    if (!text_col) throw DataError(path + ": CSV header must contain a 'text' column");
    const auto label_col = column("label");
    const auto id_col = column("id");
    const auto language_col = column("language");
    const auto source_col = column("source");
    const auto generator_col = column("model");

    std::vector<TextRecord> records;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const std::vector<std::string>& row = rows[r];
        const std::string where = path + ": row " + std::to_string(r + 1);
        auto cell = [&](std::optional<std::size_t> col) -> std::optional<std::string> {
            if (!col || *col >= row.size() || row[*col].empty()) return std::nullopt;
            return row[*col];
        };
        TextRecord rec;
        rec.id = cell(id_col).value_or("rec-" + std::to_string(r + 1));
        if (auto text = cell(text_col)) {
            rec.text = *text;
        } else {
            throw DataError(where + ": record '" + rec.id + "' is missing mandatory field 'text'");
        }
        if (auto label = cell(label_col)) {
            if (*label == "0") {
                rec.label = 0;
            } else if (*label == "1") {
                rec.label = 1;
            } else {
                throw DataError(where + ": label out of range ('" + *label +
                                "', expected 0 or 1)");
            }
        }
        rec.language = cell(language_col);
        rec.source = cell(source_col);
        rec.generator = cell(generator_col);
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<TextRecord> load_records(const std::string& path) {
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0) {
        return load_csv(path);
    }
    return load_jsonl(path);
}

}  // namespace gtdetect::corpus
