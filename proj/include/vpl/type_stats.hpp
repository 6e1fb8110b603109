#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "vpl/dataset.hpp"

namespace vpl {

// Per-question-type training statistics: the answer multiset size and the
// count of each distinct answer inside it.
struct TypeStatsEntry {
    std::int64_t multiset_size{};                       // number of training questions of this type
    std::map<std::string, std::int64_t> answer_counts;  // distinct answer -> occurrences
};

struct TypeStats {
    std::map<std::string, TypeStatsEntry> types;

    bool has_type(const std::string& qt) const { return types.count(qt) != 0; }
    const TypeStatsEntry& entry(const std::string& qt) const;
};

// Counts canonical answers per question type over the training split.
TypeStats build_type_stats(std::span<const AnnotatedExample> train);

// Candidate answer set, ordered by descending training frequency with
// lexicographic tie-break.
struct AnswerVocabulary {
    std::vector<std::string> answers;
    std::unordered_map<std::string, std::int32_t> index;

    std::int32_t lookup(const std::string& answer) const {
        auto it = index.find(answer);
        return it == index.end() ? -1 : it->second;
    }
};

AnswerVocabulary build_vocab(std::span<const AnnotatedExample> train, std::size_t top_k);

}  // namespace vpl
