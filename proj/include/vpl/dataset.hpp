#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace vpl {

// One <image, question, answers> record. Answers are stored normalized.
struct AnnotatedExample {
    std::int64_t question_id{};
    std::int64_t image_id{};
    std::string question_text;
    std::string question_type;
    std::vector<std::string> human_answers;  // exactly 10
    std::string canonical_answer;            // the designated ground truth
};

struct PredictionRecord {
    std::int64_t question_id{};
    std::string predicted_answer;  // normalized
};

enum class DatasetFormat { native_jsonl, vqa_official };

DatasetFormat parse_dataset_format(const std::string& name);

// Question types are the question's initiating words. Returns the longest
// word-aligned lexicon prefix of the lowercased question, or its first word
// when nothing matches.
std::string extract_question_type(const std::string& question_text,
                                  std::span<const std::string> type_lexicon);

const std::vector<std::string>& default_type_lexicon();

// Streaming line-by-line parse of the native format; errors carry the line number.
std::vector<AnnotatedExample> parse_native_jsonl(std::istream& in);

// Official-format adapter: questions document joined with annotations document
// on question_id. Annotation order is preserved.
std::vector<AnnotatedExample> parse_vqa_official(std::istream& questions, std::istream& annotations);

// `path` names one file for native-jsonl, or "questions.json,annotations.json"
// for the official format.
std::vector<AnnotatedExample> load_dataset(const std::string& path, DatasetFormat format);

void write_native_jsonl(std::ostream& out, std::span<const AnnotatedExample> examples);

std::vector<PredictionRecord> parse_predictions(std::istream& in);
std::vector<PredictionRecord> load_predictions(const std::string& path);
void write_predictions(std::ostream& out, std::span<const PredictionRecord> preds);

}  // namespace vpl
