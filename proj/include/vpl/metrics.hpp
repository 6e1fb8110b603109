#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vpl/dataset.hpp"
#include "vpl/type_stats.hpp"

namespace vpl {

// Consensus accuracy of one predicted answer against the ten human answers:
// min(1, matches/3).
double vqa_accuracy(const std::string& predicted, std::span<const std::string> human_answers);

// TP/FP tallies for one (question type, predicted answer) cell. `precision`
// is empty until the cell has at least one prediction.
struct PrecisionCell {
    std::int64_t tp{};
    std::int64_t fp{};
    std::optional<double> precision;
};

struct PrecisionTable {
    // type -> answer -> cell; answers are exactly the training answer set of the type.
    std::map<std::string, std::map<std::string, PrecisionCell>> cells;
    std::map<std::string, std::int64_t> ignored;    // predictions outside the type's answer set
    std::map<std::string, std::int64_t> evaluated;  // predictions per type
    std::int64_t ignored_total{};
};

// How a prediction counts as a true positive: equality with the canonical
// answer, or agreement with at least three of the ten human answers.
enum class CorrectnessRule { canonical, consensus };

CorrectnessRule parse_correctness_rule(const std::string& name);

// Joins predictions to examples, attributes TP/FP to the predicted answer's
// cell, and applies the out-of-multiset ignore rule. `stats` must come from
// the training split.
PrecisionTable precision_table(std::span<const AnnotatedExample> examples,
                               std::span<const PredictionRecord> predictions,
                               const TypeStats& stats,
                               CorrectnessRule rule = CorrectnessRule::canonical);

// Deficiency-weighted answer share: (1 - precision) * sigmoid(n / multiset_size).
double lp_per_answer(double precision, std::int64_t n, std::int64_t multiset_size);

enum class LpScale { unit, percent };

struct LpReport {
    std::map<std::string, std::map<std::string, double>> per_answer;
    std::map<std::string, double> per_type;
    double overall{};
    LpScale scale{LpScale::unit};
};

// Mean over each type's answer set, then over types. Never-predicted answers
// are scored at precision 0 (full deficiency).
LpReport lp_overall(const PrecisionTable& ptable, const TypeStats& stats,
                    LpScale scale = LpScale::unit);

struct AnswerShare {
    std::string answer;
    double share{};
};

struct DistReport {
    // Per type: top-K training ground-truth answer shares, and the share of
    // each answer among wrong predictions.
    std::map<std::string, std::vector<AnswerShare>> gt_train;
    std::map<std::string, std::vector<AnswerShare>> wrong_pred;
};

DistReport distribution_report(const TypeStats& train, std::span<const AnnotatedExample> examples,
                               std::span<const PredictionRecord> predictions, std::size_t top_k);

// Mean consensus accuracy, overall and per question type.
struct AccuracyReport {
    double overall{};
    std::map<std::string, double> per_type;
    std::map<std::string, std::int64_t> count_per_type;
    std::int64_t count{};
    std::vector<std::pair<std::int64_t, double>> per_question;  // (question_id, accuracy)
};

AccuracyReport accuracy_report(std::span<const AnnotatedExample> examples,
                               std::span<const PredictionRecord> predictions);

}  // namespace vpl
