#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vpl/dataset.hpp"
#include "vpl/features.hpp"
#include "vpl/rng.hpp"
#include "vpl/type_stats.hpp"

namespace vpl {

// Knobs for the synthetic benchmark generator. Answer priors per question type
// follow a Zipf law with the given skew; each image carries the answer signal
// in exactly one region on top of unit gaussian noise.
struct SynthConfig {
    int num_types = 4;
    int answers_per_type = 6;
    int train_size = 2000;
    int val_size = 800;
    double skew = 1.2;
    double visual_snr = 3.0;
    int regions = 4;
    int feature_dim = 16;
    int vocab_words = 40;
    int question_len = 6;
    std::uint64_t seed = 7;

    void validate() const;
    static SynthConfig from_json_text(const std::string& text);
    std::string to_json_text() const;
};

struct SynthDataset {
    std::vector<AnnotatedExample> train;
    std::vector<AnnotatedExample> val;
    FeatureStore features;
    // question_id -> planted answer index within its type's answer list
    std::map<std::int64_t, int> generator_truth;

    SynthDataset(int regions, int feature_dim) : features(regions, feature_dim) {}
};

std::string synth_type_name(int type_idx);
std::string synth_answer_name(int type_idx, int answer_idx);

// Zipf over ranks 1..n with P(r) proportional to 1/r^skew; returns rank-1,
// i.e. the answer index.
int zipf_index(Rng& rng, int n, double skew);

SynthDataset gen_dataset(const SynthConfig& config);

// Writes train.jsonl, val.jsonl, features.bin, features.bin.idx.json,
// truth.json and gen_config.json under out_dir.
void write_dataset(const SynthDataset& dataset, const SynthConfig& config,
                   const std::string& out_dir);

enum class Strategy { oracle, prior_follower, uniform_random };

Strategy parse_strategy(const std::string& name);
std::string strategy_name(Strategy strategy);

// Recovers the planted answer index from an image by locating the strongest
// (region, dim) cell among the first answers_per_type dims.
int decode_planted(const FeatureStore& features, std::int64_t image_id, int answers_per_type);

std::vector<PredictionRecord> canned_predict(Strategy strategy,
                                             std::span<const AnnotatedExample> examples,
                                             const TypeStats& stats, std::uint64_t seed);

}  // namespace vpl
