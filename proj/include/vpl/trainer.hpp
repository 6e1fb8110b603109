#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vpl/dataset.hpp"
#include "vpl/features.hpp"
#include "vpl/metrics.hpp"
#include "vpl/model.hpp"
#include "vpl/type_stats.hpp"

namespace vpl {

struct OptimizerConfig {
    std::string kind = "adam";  // adam or sgd
    double lr = 1e-3;
};

struct TrainConfig {
    std::string train_path;
    std::string val_path;
    std::string features_path;
    ModelConfig model;
    int epochs = 30;
    int batch_size = 32;
    OptimizerConfig optimizer;
    int eval_every = 1;
    std::uint64_t seed = 7;
    std::string out_dir;
    int vocab_top_k = 1000;
    std::string init_checkpoint;

    void validate() const;
    static TrainConfig from_json_text(const std::string& text);
    std::string to_json_text() const;
};

struct EpochLog {
    int epoch = 0;
    double l_answer = 0.0;
    double l_score = 0.0;
    double l_total = 0.0;
    double val_acc = 0.0;
    double val_lp = 0.0;
    double seconds = 0.0;
    bool evaluated = false;  // false on carry-forward epochs when eval_every > 1
    std::map<std::string, double> val_acc_per_type;
    std::map<std::string, double> val_lp_per_type;
};

// Vocabularies and statistics every evaluation needs, all rebuilt
// deterministically from the training split.
struct EvalContext {
    TypeStats stats;
    AnswerVocabulary answer_vocab;
    QuestionVocab question_vocab;
};

EvalContext build_eval_context(std::span<const AnnotatedExample> train, int vocab_top_k);

struct EvalResult {
    std::vector<PredictionRecord> predictions;
    AccuracyReport accuracy;
    LpReport lp;  // unit scale
};

EvalResult evaluate_model(const VqaModel& model, const EvalContext& context,
                          std::span<const AnnotatedExample> split, const FeatureStore& features);

struct TrainResult {
    std::vector<EpochLog> log;
    std::int64_t skipped_oov = 0;
    int best_epoch = 0;
    double best_val_acc = 0.0;
    std::string best_checkpoint;  // serialized parameter store
    std::string last_checkpoint;
};

// Core loop over already-loaded data. Writes nothing to disk.
TrainResult train_in_memory(const TrainConfig& config, std::span<const AnnotatedExample> train,
                            std::span<const AnnotatedExample> val, const FeatureStore& features);

// Loads the datasets, trains, and when out_dir is set writes trainlog.csv,
// best.ckpt, last.ckpt, train_config.json and convergence.svg.
TrainResult train(const TrainConfig& config);

std::string trainlog_csv(std::span<const EpochLog> log);

// Loads a checkpoint into a model shell rebuilt from the config and datasets,
// then evaluates the given split.
EvalResult evaluate_checkpoint(const TrainConfig& config, const std::string& checkpoint_path,
                               const std::string& split_path);

struct SweepCell {
    double beta = 0.0;
    double gamma = 0.0;
    FusionMode fusion = FusionMode::mul;
};

struct SweepRow {
    SweepCell cell;
    std::uint64_t seed = 0;
    double val_acc = 0.0;
    double val_lp = 0.0;
    double l_total = 0.0;
    bool failed = false;
    std::string error;
};

// Seed for one sweep cell, derived from the base seed and the cell parameters
// only, so identical cells always produce identical rows.
std::uint64_t sweep_cell_seed(std::uint64_t base_seed, const SweepCell& cell);

// Trains one run per cell (possibly in parallel, capped by VPL_WORKERS), never
// aborting on per-cell failures. Rows come back sorted by accuracy descending,
// then LP ascending; failed cells sink to the bottom.
std::vector<SweepRow> sweep(const TrainConfig& base, std::span<const SweepCell> grid);

std::string sweep_csv(std::span<const SweepRow> rows);

}  // namespace vpl
