#include "vpl/type_stats.hpp"

#include <algorithm>
#include <stdexcept>

#include "vpl/common.hpp"

namespace vpl {

const TypeStatsEntry& TypeStats::entry(const std::string& qt) const {
    auto it = types.find(qt);
    if (it == types.end()) throw DataError("question type absent from training stats: " + qt);
    return it->second;
}

TypeStats build_type_stats(std::span<const AnnotatedExample> train) {
    if (train.empty()) throw std::invalid_argument("build_type_stats: empty training split");
    TypeStats stats;
    for (const AnnotatedExample& ex : train) {
        TypeStatsEntry& entry = stats.types[ex.question_type];
        entry.multiset_size += 1;
        entry.answer_counts[ex.canonical_answer] += 1;
    }
    return stats;
}

AnswerVocabulary build_vocab(std::span<const AnnotatedExample> train, std::size_t top_k) {
    if (top_k < 1) throw std::invalid_argument("build_vocab: top_k must be >= 1");
    std::map<std::string, std::int64_t> counts;
    for (const AnnotatedExample& ex : train) counts[ex.canonical_answer] += 1;

    std::vector<std::pair<std::string, std::int64_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    AnswerVocabulary vocab;
    std::size_t n = std::min(top_k, ranked.size());
    vocab.answers.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        vocab.index.emplace(ranked[i].first, static_cast<std::int32_t>(i));
        vocab.answers.push_back(std::move(ranked[i].first));
    }
    return vocab;
}

}  // namespace vpl
