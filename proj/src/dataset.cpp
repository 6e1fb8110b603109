#include "vpl/dataset.hpp"

#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "json.hpp"
#include "vpl/answer_norm.hpp"
#include "vpl/common.hpp"

namespace vpl {

using nlohmann::json;

DatasetFormat parse_dataset_format(const std::string& name) {
    if (name == "native-jsonl") return DatasetFormat::native_jsonl;
    if (name == "vqa-official") return DatasetFormat::vqa_official;
    throw DataError("unknown dataset format: " + name);
}

const std::vector<std::string>& default_type_lexicon() {
    static const std::vector<std::string> lexicon = {
        "how many",     "how much",   "how",        "what color",  "what kind of",
        "what type of", "what is",    "what are",   "what time",   "what animal",
        "what sport",   "what brand", "what",       "is the",      "is this",
        "is there",     "is it",      "is",         "are the",     "are there",
        "are these",    "are",        "does the",   "does this",   "does",
        "do you",       "do",         "can you",    "could",       "who is",
        "who",          "why is",     "why",        "where is",    "where are",
        "where",        "which",      "was",        "has",         "none of the above",
    };
    return lexicon;
}

namespace {

bool is_word_boundary(const std::string& text, std::size_t pos) {
    if (pos >= text.size()) return true;
    unsigned char c = static_cast<unsigned char>(text[pos]);
    return !(std::isalnum(c));
}

std::string lowercase(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

}  // namespace

std::string extract_question_type(const std::string& question_text,
                                  std::span<const std::string> type_lexicon) {
    std::string q = lowercase(question_text);
    // trim
    std::size_t b = q.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) throw DataError("cannot extract question type from empty question");
    std::size_t e = q.find_last_not_of(" \t\r\n");
    q = q.substr(b, e - b + 1);

    std::string best;
    for (const std::string& entry : type_lexicon) {
        if (entry.size() <= best.size()) continue;
        if (q.size() >= entry.size() && q.compare(0, entry.size(), entry) == 0 &&
            is_word_boundary(q, entry.size())) {
            best = entry;
        }
    }
    if (!best.empty()) return best;
    return q.substr(0, q.find_first_of(" \t"));
}

namespace {

std::string require_type(const json& record, const std::string& context) {
    if (record.contains("question_type") && record["question_type"].is_string() &&
        !record["question_type"].get<std::string>().empty()) {
        return normalize_answer(record["question_type"].get<std::string>());
    }
    std::string question = record.value("question", std::string());
    if (question.empty()) {
        throw DataError(context + ": record carries neither question_type nor question text");
    }
    return extract_question_type(question, default_type_lexicon());
}

AnnotatedExample example_from_json(const json& record, const std::string& context) {
    AnnotatedExample ex;
    try {
        ex.question_id = record.at("question_id").get<std::int64_t>();
        ex.image_id = record.at("image_id").get<std::int64_t>();
        ex.question_text = record.at("question").get<std::string>();
        ex.canonical_answer = normalize_answer(record.at("multiple_choice_answer").get<std::string>());
        const json& answers = record.at("answers");
        if (!answers.is_array() || answers.size() != 10) {
            throw DataError(context + ": expected 10 answers, got " +
                            std::to_string(answers.is_array() ? answers.size() : 0));
        }
        ex.human_answers.reserve(10);
        for (const json& a : answers) {
            if (a.is_string()) {
                ex.human_answers.push_back(normalize_answer(a.get<std::string>()));
            } else if (a.is_object() && a.contains("answer")) {
                ex.human_answers.push_back(normalize_answer(a["answer"].get<std::string>()));
            } else {
                throw DataError(context + ": answer entries must be strings or {\"answer\": ...}");
            }
        }
    } catch (const json::exception& e) {
        throw DataError(context + ": " + e.what());
    }
    ex.question_type = require_type(record, context);
    return ex;
}

}  // namespace

std::vector<AnnotatedExample> parse_native_jsonl(std::istream& in) {
    std::vector<AnnotatedExample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::string context = "line " + std::to_string(line_no);
        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError(context + ": malformed json: " + e.what());
        }
        out.push_back(example_from_json(record, context));
    }
    return out;
}

std::vector<AnnotatedExample> parse_vqa_official(std::istream& questions, std::istream& annotations) {
    json qdoc, adoc;
    try {
        qdoc = json::parse(questions);
    } catch (const json::exception& e) {
        throw DataError(std::string("questions file: malformed json: ") + e.what());
    }
    try {
        adoc = json::parse(annotations);
    } catch (const json::exception& e) {
        throw DataError(std::string("annotations file: malformed json: ") + e.what());
    }
    if (!qdoc.contains("questions") || !qdoc["questions"].is_array()) {
        throw DataError("questions file: missing \"questions\" array");
    }
    if (!adoc.contains("annotations") || !adoc["annotations"].is_array()) {
        throw DataError("annotations file: missing \"annotations\" array");
    }

    struct QuestionRow {
        std::int64_t image_id;
        std::string question;
    };
    std::unordered_map<std::int64_t, QuestionRow> by_id;
    std::size_t qi = 0;
    for (const json& q : qdoc["questions"]) {
        ++qi;
        std::string context = "questions record " + std::to_string(qi);
        try {
            by_id[q.at("question_id").get<std::int64_t>()] =
                QuestionRow{q.at("image_id").get<std::int64_t>(), q.at("question").get<std::string>()};
        } catch (const json::exception& e) {
            throw DataError(context + ": " + e.what());
        }
    }

    std::vector<AnnotatedExample> out;
    out.reserve(adoc["annotations"].size());
    std::size_t ai = 0;
    for (const json& a : adoc["annotations"]) {
        ++ai;
        std::string context = "annotations record " + std::to_string(ai);
        std::int64_t qid;
        try {
            qid = a.at("question_id").get<std::int64_t>();
        } catch (const json::exception& e) {
            throw DataError(context + ": " + e.what());
        }
        auto it = by_id.find(qid);
        if (it == by_id.end()) {
            throw DataError(context + ": annotation question_id " + std::to_string(qid) +
                            " has no matching question");
        }
        json merged = a;
        merged["image_id"] = it->second.image_id;
        merged["question"] = it->second.question;
        out.push_back(example_from_json(merged, context));
    }
    return out;
}

std::vector<AnnotatedExample> load_dataset(const std::string& path, DatasetFormat format) {
    if (format == DatasetFormat::native_jsonl) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("cannot open dataset: " + path);
        return parse_native_jsonl(in);
    }
    std::size_t comma = path.find(',');
    if (comma == std::string::npos) {
        throw DataError("vqa-official format needs \"questions.json,annotations.json\", got: " + path);
    }
    std::string qpath = path.substr(0, comma);
    std::string apath = path.substr(comma + 1);
    std::ifstream qin(qpath, std::ios::binary), ain(apath, std::ios::binary);
    if (!qin) throw DataError("cannot open questions file: " + qpath);
    if (!ain) throw DataError("cannot open annotations file: " + apath);
    return parse_vqa_official(qin, ain);
}

void write_native_jsonl(std::ostream& out, std::span<const AnnotatedExample> examples) {
    for (const AnnotatedExample& ex : examples) {
        json record{{"question_id", ex.question_id},
                    {"image_id", ex.image_id},
                    {"question", ex.question_text},
                    {"question_type", ex.question_type},
                    {"answers", ex.human_answers},
                    {"multiple_choice_answer", ex.canonical_answer}};
        out << record.dump() << '\n';
    }
}

std::vector<PredictionRecord> parse_predictions(std::istream& in) {
    std::vector<PredictionRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::string context = "line " + std::to_string(line_no);
        try {
            json record = json::parse(line);
            out.push_back(PredictionRecord{record.at("question_id").get<std::int64_t>(),
                                           normalize_answer(record.at("answer").get<std::string>())});
        } catch (const json::exception& e) {
            throw DataError(context + ": malformed prediction: " + e.what());
        }
    }
    return out;
}

std::vector<PredictionRecord> load_predictions(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open predictions: " + path);
    return parse_predictions(in);
}

void write_predictions(std::ostream& out, std::span<const PredictionRecord> preds) {
    for (const PredictionRecord& p : preds) {
        json record{{"question_id", p.question_id}, {"answer", p.predicted_answer}};
        out << record.dump() << '\n';
    }
}

}  // namespace vpl
