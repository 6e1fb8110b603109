#include "vpl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "vpl/common.hpp"

namespace vpl {

void SynthConfig::validate() const {
    if (num_types < 1) throw std::invalid_argument("synth config: num_types must be >= 1");
    if (answers_per_type < 1) {
        throw std::invalid_argument("synth config: answers_per_type must be >= 1");
    }
    if (train_size < 1) throw std::invalid_argument("synth config: train_size must be >= 1");
    if (val_size < 0) throw std::invalid_argument("synth config: val_size must be >= 0");
    if (skew < 0.0) throw std::invalid_argument("synth config: skew must be >= 0");
    if (visual_snr < 0.0) throw std::invalid_argument("synth config: visual_snr must be >= 0");
    if (regions < 1) throw std::invalid_argument("synth config: regions must be >= 1");
    if (feature_dim < 1) throw std::invalid_argument("synth config: feature_dim must be >= 1");
    if (vocab_words < 1) throw std::invalid_argument("synth config: vocab_words must be >= 1");
    if (question_len < 1) throw std::invalid_argument("synth config: question_len must be >= 1");
    if (answers_per_type > feature_dim) {
        throw std::invalid_argument(
            "synth config: answers_per_type (" + std::to_string(answers_per_type) +
            ") exceeds vocab capacity; the planted signal indexes feature dims, so "
            "answers_per_type must be <= feature_dim (" + std::to_string(feature_dim) + ")");
    }
}

SynthConfig SynthConfig::from_json_text(const std::string& text) {
    SynthConfig config;
    try {
        nlohmann::json j = nlohmann::json::parse(text);
        if (!j.is_object()) throw DataError("synth config: expected a json object");
        for (const auto& [key, value] : j.items()) {
            if (key == "num_types") config.num_types = value.get<int>();
            else if (key == "answers_per_type") config.answers_per_type = value.get<int>();
            else if (key == "train_size") config.train_size = value.get<int>();
            else if (key == "val_size") config.val_size = value.get<int>();
            else if (key == "skew") config.skew = value.get<double>();
            else if (key == "visual_snr") config.visual_snr = value.get<double>();
            else if (key == "regions") config.regions = value.get<int>();
            else if (key == "feature_dim") config.feature_dim = value.get<int>();
            else if (key == "vocab_words") config.vocab_words = value.get<int>();
            else if (key == "question_len") config.question_len = value.get<int>();
            else if (key == "seed") config.seed = value.get<std::uint64_t>();
            else throw DataError("synth config: unknown key \"" + key + "\"");
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("synth config: ") + e.what());
    }
    config.validate();
    return config;
}

std::string SynthConfig::to_json_text() const {
    nlohmann::json j;
    j["num_types"] = num_types;
    j["answers_per_type"] = answers_per_type;
    j["train_size"] = train_size;
    j["val_size"] = val_size;
    j["skew"] = skew;
    j["visual_snr"] = visual_snr;
    j["regions"] = regions;
    j["feature_dim"] = feature_dim;
    j["vocab_words"] = vocab_words;
    j["question_len"] = question_len;
    j["seed"] = seed;
    return j.dump(2) + "\n";
}

std::string synth_type_name(int type_idx) { return "t" + std::to_string(type_idx); }

std::string synth_answer_name(int type_idx, int answer_idx) {
    return "t" + std::to_string(type_idx) + "a" + std::to_string(answer_idx);
}

int zipf_index(Rng& rng, int n, double skew) {
    if (n < 1) throw std::invalid_argument("zipf_index: n must be >= 1");
    double total = 0.0;
    for (int r = 1; r <= n; ++r) total += std::pow(static_cast<double>(r), -skew);
    double u = rng.uniform() * total;
    double cum = 0.0;
    for (int r = 1; r <= n; ++r) {
        cum += std::pow(static_cast<double>(r), -skew);
        if (u < cum) return r - 1;
    }
    return n - 1;
}

namespace {

AnnotatedExample gen_example(const SynthConfig& config, Rng& rng, std::int64_t question_id,
                             SynthDataset& dataset) {
    int type_idx = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(config.num_types)));
    int answer_idx = zipf_index(rng, config.answers_per_type, config.skew);

    std::string question = synth_type_name(type_idx);
    for (int w = 1; w < config.question_len; ++w) {
        question += " w" + std::to_string(
            rng.uniform_index(static_cast<std::uint64_t>(config.vocab_words)));
    }

    int signal_region = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(config.regions)));
    std::vector<float> row(static_cast<std::size_t>(config.regions) * config.feature_dim);
    for (int r = 0; r < config.regions; ++r) {
        for (int d = 0; d < config.feature_dim; ++d) {
            double v = rng.gaussian();
            if (r == signal_region && d == answer_idx) v += config.visual_snr;
            row[static_cast<std::size_t>(r) * config.feature_dim + d] = static_cast<float>(v);
        }
    }
    dataset.features.add(question_id, row);
    dataset.generator_truth[question_id] = answer_idx;

    AnnotatedExample ex;
    ex.question_id = question_id;
    ex.image_id = question_id;
    ex.question_text = question;
    ex.question_type = synth_type_name(type_idx);
    ex.canonical_answer = synth_answer_name(type_idx, answer_idx);
    ex.human_answers.assign(10, ex.canonical_answer);
    return ex;
}

}  // namespace

SynthDataset gen_dataset(const SynthConfig& config) {
    config.validate();
    SynthDataset dataset(config.regions, config.feature_dim);
    Rng rng(derive_seed(config.seed, "synth-gen"));
    std::int64_t qid = 1;
    dataset.train.reserve(static_cast<std::size_t>(config.train_size));
    for (int i = 0; i < config.train_size; ++i) {
        dataset.train.push_back(gen_example(config, rng, qid++, dataset));
    }
    dataset.val.reserve(static_cast<std::size_t>(config.val_size));
    for (int i = 0; i < config.val_size; ++i) {
        dataset.val.push_back(gen_example(config, rng, qid++, dataset));
    }
    return dataset;
}

void write_dataset(const SynthDataset& dataset, const SynthConfig& config,
                   const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    auto path = [&out_dir](const char* name) {
        return (std::filesystem::path(out_dir) / name).string();
    };
    {
        std::ofstream out(path("train.jsonl"), std::ios::binary);
        if (!out) throw DataError("cannot open for writing: " + path("train.jsonl"));
        write_native_jsonl(out, dataset.train);
    }
    {
        std::ofstream out(path("val.jsonl"), std::ios::binary);
        if (!out) throw DataError("cannot open for writing: " + path("val.jsonl"));
        write_native_jsonl(out, dataset.val);
    }
    write_features(dataset.features, path("features.bin"), path("features.bin") + ".idx.json");
    {
        nlohmann::json truth = nlohmann::json::object();
        for (const auto& [qid, answer_idx] : dataset.generator_truth) {
            truth[std::to_string(qid)] = answer_idx;
        }
        write_file(path("truth.json"), truth.dump(2) + "\n");
    }
    write_file(path("gen_config.json"), config.to_json_text());
}

Strategy parse_strategy(const std::string& name) {
    if (name == "oracle") return Strategy::oracle;
    if (name == "prior-follower") return Strategy::prior_follower;
    if (name == "uniform-random") return Strategy::uniform_random;
    throw DataError("unknown strategy \"" + name +
                    "\" (expected oracle, prior-follower or uniform-random)");
}

std::string strategy_name(Strategy strategy) {
    switch (strategy) {
        case Strategy::oracle: return "oracle";
        case Strategy::prior_follower: return "prior-follower";
        case Strategy::uniform_random: return "uniform-random";
    }
    throw std::invalid_argument("unknown strategy value");
}

int decode_planted(const FeatureStore& features, std::int64_t image_id, int answers_per_type) {
    if (answers_per_type < 1 || static_cast<std::uint32_t>(answers_per_type) > features.dim()) {
        throw std::invalid_argument("decode_planted: answers_per_type out of range");
    }
    std::span<const float> row = features.image(image_id);
    int best = 0;
    float best_value = -std::numeric_limits<float>::infinity();
    for (std::uint32_t r = 0; r < features.regions(); ++r) {
        for (int d = 0; d < answers_per_type; ++d) {
            float v = row[static_cast<std::size_t>(r) * features.dim() + d];
            if (v > best_value) {
                best_value = v;
                best = d;
            }
        }
    }
    return best;
}

namespace {

std::string majority_answer(const TypeStatsEntry& entry) {
    std::string best;
    std::int64_t best_count = -1;
    for (const auto& [answer, count] : entry.answer_counts) {
        if (count > best_count) {
            best_count = count;
            best = answer;
        }
    }
    return best;
}

}  // namespace

std::vector<PredictionRecord> canned_predict(Strategy strategy,
                                             std::span<const AnnotatedExample> examples,
                                             const TypeStats& stats, std::uint64_t seed) {
    std::vector<PredictionRecord> preds;
    preds.reserve(examples.size());
    Rng rng(derive_seed(seed, "canned-uniform"));
    for (const AnnotatedExample& ex : examples) {
        const TypeStatsEntry& entry = stats.entry(ex.question_type);
        std::string answer;
        switch (strategy) {
            case Strategy::oracle:
                answer = ex.canonical_answer;
                break;
            case Strategy::prior_follower:
                answer = majority_answer(entry);
                break;
            case Strategy::uniform_random: {
                std::uint64_t pick = rng.uniform_index(entry.answer_counts.size());
                auto it = entry.answer_counts.begin();
                std::advance(it, static_cast<std::ptrdiff_t>(pick));
                answer = it->first;
                break;
            }
        }
        preds.push_back({ex.question_id, answer});
    }
    return preds;
}

}  // namespace vpl
