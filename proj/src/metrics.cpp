#include "vpl/metrics.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

#include "vpl/common.hpp"

namespace vpl {

double vqa_accuracy(const std::string& predicted, std::span<const std::string> human_answers) {
    if (human_answers.size() != 10) {
        throw std::invalid_argument("vqa_accuracy: expected 10 human answers, got " +
                                    std::to_string(human_answers.size()));
    }
    std::int64_t matches = 0;
    for (const std::string& a : human_answers) {
        if (a == predicted) ++matches;
    }
    return std::min(1.0, static_cast<double>(matches) / 3.0);
}

namespace {

std::unordered_map<std::int64_t, const AnnotatedExample*> index_by_qid(
    std::span<const AnnotatedExample> examples) {
    std::unordered_map<std::int64_t, const AnnotatedExample*> by_qid;
    by_qid.reserve(examples.size());
    for (const AnnotatedExample& ex : examples) by_qid[ex.question_id] = &ex;
    return by_qid;
}

}  // namespace

CorrectnessRule parse_correctness_rule(const std::string& name) {
    if (name == "canonical") return CorrectnessRule::canonical;
    if (name == "consensus") return CorrectnessRule::consensus;
    throw DataError("unknown correctness rule \"" + name + "\" (expected canonical or consensus)");
}

namespace {

bool prediction_correct(const PredictionRecord& pred, const AnnotatedExample& ex,
                        CorrectnessRule rule) {
    if (rule == CorrectnessRule::canonical) return pred.predicted_answer == ex.canonical_answer;
    std::int64_t matches = 0;
    for (const std::string& a : ex.human_answers) {
        if (a == pred.predicted_answer) ++matches;
    }
    return matches >= 3;
}

}  // namespace

PrecisionTable precision_table(std::span<const AnnotatedExample> examples,
                               std::span<const PredictionRecord> predictions,
                               const TypeStats& stats, CorrectnessRule rule) {
    PrecisionTable table;
    // Every (type, training answer) pair gets a cell up front so that answers
    // the model never emits still appear (with empty precision).
    for (const auto& [qt, entry] : stats.types) {
        auto& row = table.cells[qt];
        for (const auto& [answer, n] : entry.answer_counts) row.emplace(answer, PrecisionCell{});
        table.ignored[qt] = 0;
        table.evaluated[qt] = 0;
    }

    auto by_qid = index_by_qid(examples);
    for (const PredictionRecord& pred : predictions) {
        auto it = by_qid.find(pred.question_id);
        if (it == by_qid.end()) {
            throw DataError("prediction references unknown question_id " +
                            std::to_string(pred.question_id));
        }
        const AnnotatedExample& ex = *it->second;
        const TypeStatsEntry& entry = stats.entry(ex.question_type);
        table.evaluated[ex.question_type] += 1;
        if (entry.answer_counts.count(pred.predicted_answer) == 0) {
            table.ignored[ex.question_type] += 1;
            table.ignored_total += 1;
            continue;
        }
        PrecisionCell& cell = table.cells[ex.question_type][pred.predicted_answer];
        if (prediction_correct(pred, ex, rule)) {
            cell.tp += 1;
        } else {
            cell.fp += 1;
        }
    }

    for (auto& [qt, row] : table.cells) {
        for (auto& [answer, cell] : row) {
            if (cell.tp + cell.fp > 0) {
                cell.precision = static_cast<double>(cell.tp) / static_cast<double>(cell.tp + cell.fp);
            }
        }
    }
    return table;
}

double lp_per_answer(double precision, std::int64_t n, std::int64_t multiset_size) {
    if (precision < 0.0 || precision > 1.0) {
        throw std::invalid_argument("lp_per_answer: precision must be in [0,1]");
    }
    if (n < 1 || n > multiset_size) {
        throw std::invalid_argument("lp_per_answer: need 1 <= n <= multiset_size, got n=" +
                                    std::to_string(n) + ", multiset_size=" +
                                    std::to_string(multiset_size));
    }
    return (1.0 - precision) * sigmoid(static_cast<double>(n) / static_cast<double>(multiset_size));
}

LpReport lp_overall(const PrecisionTable& ptable, const TypeStats& stats, LpScale scale) {
    if (stats.types.empty()) throw std::invalid_argument("lp_overall: empty question type set");
    double factor = scale == LpScale::percent ? 100.0 : 1.0;
    LpReport report;
    report.scale = scale;
    double type_sum = 0.0;
    for (const auto& [qt, entry] : stats.types) {
        auto cells_it = ptable.cells.find(qt);
        if (cells_it == ptable.cells.end()) {
            throw std::invalid_argument("lp_overall: precision table has no cells for type " + qt);
        }
        double answer_sum = 0.0;
        auto& per_answer = report.per_answer[qt];
        for (const auto& [answer, n] : entry.answer_counts) {
            auto cell_it = cells_it->second.find(answer);
            if (cell_it == cells_it->second.end()) {
                throw std::invalid_argument("lp_overall: missing cell for type " + qt +
                                            ", answer " + answer);
            }
            double precision = cell_it->second.precision.value_or(0.0);
            double lp = lp_per_answer(precision, n, entry.multiset_size);
            per_answer[answer] = lp * factor;
            answer_sum += lp;
        }
        double type_lp = answer_sum / static_cast<double>(entry.answer_counts.size());
        report.per_type[qt] = type_lp * factor;
        type_sum += type_lp;
    }
    report.overall = type_sum / static_cast<double>(stats.types.size()) * factor;
    return report;
}

namespace {

std::vector<AnswerShare> top_shares(const std::map<std::string, double>& shares, std::size_t top_k) {
    std::vector<AnswerShare> out;
    out.reserve(shares.size());
    for (const auto& [answer, share] : shares) out.push_back({answer, share});
    std::stable_sort(out.begin(), out.end(), [](const AnswerShare& a, const AnswerShare& b) {
        if (a.share != b.share) return a.share > b.share;
        return a.answer < b.answer;
    });
    if (out.size() > top_k) out.resize(top_k);
    return out;
}

}  // namespace

DistReport distribution_report(const TypeStats& train, std::span<const AnnotatedExample> examples,
                               std::span<const PredictionRecord> predictions, std::size_t top_k) {
    if (top_k < 1) throw std::invalid_argument("distribution_report: top_k must be >= 1");
    DistReport report;
    for (const auto& [qt, entry] : train.types) {
        std::map<std::string, double> shares;
        for (const auto& [answer, n] : entry.answer_counts) {
            shares[answer] = static_cast<double>(n) / static_cast<double>(entry.multiset_size);
        }
        report.gt_train[qt] = top_shares(shares, top_k);
    }

    auto by_qid = index_by_qid(examples);
    std::map<std::string, std::map<std::string, std::int64_t>> wrong_counts;
    std::map<std::string, std::int64_t> wrong_totals;
    for (const PredictionRecord& pred : predictions) {
        auto it = by_qid.find(pred.question_id);
        if (it == by_qid.end()) {
            throw DataError("prediction references unknown question_id " +
                            std::to_string(pred.question_id));
        }
        const AnnotatedExample& ex = *it->second;
        if (pred.predicted_answer == ex.canonical_answer) continue;
        wrong_counts[ex.question_type][pred.predicted_answer] += 1;
        wrong_totals[ex.question_type] += 1;
    }
    for (const auto& [qt, counts] : wrong_counts) {
        std::map<std::string, double> shares;
        for (const auto& [answer, c] : counts) {
            shares[answer] = static_cast<double>(c) / static_cast<double>(wrong_totals[qt]);
        }
        report.wrong_pred[qt] = top_shares(shares, top_k);
    }
    return report;
}

AccuracyReport accuracy_report(std::span<const AnnotatedExample> examples,
                               std::span<const PredictionRecord> predictions) {
    auto by_qid = index_by_qid(examples);
    AccuracyReport report;
    std::map<std::string, double> sum_per_type;
    double sum = 0.0;
    for (const PredictionRecord& pred : predictions) {
        auto it = by_qid.find(pred.question_id);
        if (it == by_qid.end()) {
            throw DataError("prediction references unknown question_id " +
                            std::to_string(pred.question_id));
        }
        const AnnotatedExample& ex = *it->second;
        double acc = vqa_accuracy(pred.predicted_answer, ex.human_answers);
        report.per_question.emplace_back(pred.question_id, acc);
        sum += acc;
        sum_per_type[ex.question_type] += acc;
        report.count_per_type[ex.question_type] += 1;
        report.count += 1;
    }
    for (const auto& [qt, s] : sum_per_type) {
        report.per_type[qt] = s / static_cast<double>(report.count_per_type[qt]);
    }
    report.overall = report.count > 0 ? sum / static_cast<double>(report.count) : 0.0;
    return report;
}

}  // namespace vpl
