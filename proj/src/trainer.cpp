#include "vpl/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "vpl/common.hpp"
#include "vpl/csv.hpp"
#include "vpl/optim.hpp"
#include "vpl/params.hpp"
#include "vpl/svg.hpp"

namespace vpl {

void TrainConfig::validate() const {
    model.validate();
    if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
    if (eval_every < 1) throw std::invalid_argument("train config: eval_every must be >= 1");
    if (vocab_top_k < 1) throw std::invalid_argument("train config: vocab_top_k must be >= 1");
    if (optimizer.kind != "adam" && optimizer.kind != "sgd") {
        throw std::invalid_argument("train config: optimizer kind must be adam or sgd, got \"" +
                                    optimizer.kind + "\"");
    }
    if (optimizer.lr <= 0.0) throw std::invalid_argument("train config: lr must be positive");
}

TrainConfig TrainConfig::from_json_text(const std::string& text) {
    TrainConfig config;
    try {
        nlohmann::json j = nlohmann::json::parse(text);
        if (!j.is_object()) throw DataError("train config: expected a json object");
        for (const auto& [key, value] : j.items()) {
            if (key == "train") config.train_path = value.get<std::string>();
            else if (key == "val") config.val_path = value.get<std::string>();
            else if (key == "features") config.features_path = value.get<std::string>();
            else if (key == "model") config.model = ModelConfig::from_json_text(value.dump());
            else if (key == "epochs") config.epochs = value.get<int>();
            else if (key == "batch_size") config.batch_size = value.get<int>();
            else if (key == "optimizer") {
                for (const auto& [ok, ov] : value.items()) {
                    if (ok == "kind") config.optimizer.kind = ov.get<std::string>();
                    else if (ok == "lr") config.optimizer.lr = ov.get<double>();
                    else throw DataError("train config: unknown optimizer key \"" + ok + "\"");
                }
            } else if (key == "eval_every") {
                config.eval_every = value.get<int>();
            } else if (key == "seed") {
                config.seed = value.get<std::uint64_t>();
            } else if (key == "out_dir") {
                config.out_dir = value.get<std::string>();
            } else if (key == "vocab_top_k") {
                config.vocab_top_k = value.get<int>();
            } else if (key == "init_checkpoint") {
                config.init_checkpoint = value.get<std::string>();
            } else {
                throw DataError("train config: unknown key \"" + key + "\"");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("train config: ") + e.what());
    }
    config.validate();
    return config;
}

std::string TrainConfig::to_json_text() const {
    nlohmann::json j;
    j["train"] = train_path;
    j["val"] = val_path;
    j["features"] = features_path;
    j["model"] = nlohmann::json::parse(model.to_json_text());
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["optimizer"] = {{"kind", optimizer.kind}, {"lr", optimizer.lr}};
    j["eval_every"] = eval_every;
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    j["vocab_top_k"] = vocab_top_k;
    j["init_checkpoint"] = init_checkpoint;
    return j.dump(2) + "\n";
}

EvalContext build_eval_context(std::span<const AnnotatedExample> train, int vocab_top_k) {
    EvalContext context;
    context.stats = build_type_stats(train);
    context.answer_vocab = build_vocab(train, static_cast<std::size_t>(vocab_top_k));
    context.question_vocab = QuestionVocab::build(train);
    return context;
}

EvalResult evaluate_model(const VqaModel& model, const EvalContext& context,
                          std::span<const AnnotatedExample> split, const FeatureStore& features) {
    EvalResult result;
    result.predictions.reserve(split.size());
    for (const AnnotatedExample& ex : split) {
        std::vector<std::int32_t> tokens = context.question_vocab.encode(ex.question_text);
        ForwardTrace trace = model.forward_eval(tokens, features.image(ex.image_id));
        result.predictions.push_back(
            {ex.question_id,
             context.answer_vocab.answers[static_cast<std::size_t>(trace.predicted_index)]});
    }
    result.accuracy = accuracy_report(split, result.predictions);
    PrecisionTable table = precision_table(split, result.predictions, context.stats);
    result.lp = lp_overall(table, context.stats, LpScale::unit);
    return result;
}

namespace {

struct EncodedExample {
    std::vector<std::int32_t> tokens;
    std::int32_t gt_index = -1;
    std::int64_t image_id = 0;
};

}  // namespace

TrainResult train_in_memory(const TrainConfig& config, std::span<const AnnotatedExample> train,
                            std::span<const AnnotatedExample> val, const FeatureStore& features) {
    config.validate();
    if (train.empty()) throw DataError("training split is empty");

    EvalContext context = build_eval_context(train, config.vocab_top_k);

    VqaModel model(config.model, context.question_vocab.words.size(),
                   context.answer_vocab.answers.size(), features.regions(), features.dim(),
                   config.seed);
    if (!config.init_checkpoint.empty()) {
        model.params().load_values(load_params(config.init_checkpoint));
    }

    TrainResult result;
    std::vector<EncodedExample> encoded;
    encoded.reserve(train.size());
    for (const AnnotatedExample& ex : train) {
        std::int32_t gt = context.answer_vocab.lookup(ex.canonical_answer);
        if (gt < 0) {
            result.skipped_oov += 1;
            continue;
        }
        EncodedExample enc;
        enc.tokens = context.question_vocab.encode(ex.question_text);
        enc.gt_index = gt;
        enc.image_id = ex.image_id;
        features.image(enc.image_id);  // fail early on missing feature rows
        encoded.push_back(std::move(enc));
    }
    if (encoded.empty()) {
        throw DataError("no trainable examples: every canonical answer fell outside the top-" +
                        std::to_string(config.vocab_top_k) + " vocabulary");
    }

    Rng shuffle_rng(derive_seed(config.seed, "shuffle"));
    Rng dropout_rng(derive_seed(config.seed, "dropout"));
    Adam adam({config.optimizer.lr});
    bool use_adam = config.optimizer.kind == "adam";

    std::vector<std::size_t> order(encoded.size());
    std::iota(order.begin(), order.end(), 0);

    double carry_acc = 0.0, carry_lp = 0.0;
    std::map<std::string, double> carry_acc_per_type, carry_lp_per_type;
    bool have_eval = false;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        auto epoch_start = std::chrono::steady_clock::now();
        shuffle_rng.shuffle(order);

        double sum_answer = 0.0, sum_score = 0.0;
        std::size_t batch_begin = 0;
        std::size_t batch_index = 0;
        while (batch_begin < order.size()) {
            std::size_t batch_end =
                std::min(order.size(), batch_begin + static_cast<std::size_t>(config.batch_size));
            std::size_t batch_n = batch_end - batch_begin;
            try {
                model.params().zero_grad();
                for (std::size_t i = batch_begin; i < batch_end; ++i) {
                    const EncodedExample& ex = encoded[order[i]];
                    ForwardTrace trace = model.forward_backward(
                        ex.tokens, features.image(ex.image_id), ex.gt_index, dropout_rng);
                    sum_answer += trace.loss_answer;
                    sum_score += trace.loss_score;
                }
                model.params().scale_grad(1.0 / static_cast<double>(batch_n));
                if (use_adam) {
                    adam.step(model.params());
                } else {
                    sgd_step(model.params(), config.optimizer.lr);
                }
            } catch (const NumericError& e) {
                throw NumericError("epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_index + 1) + ": " + e.what());
            }
            batch_begin = batch_end;
            ++batch_index;
        }

        EpochLog entry;
        entry.epoch = epoch;
        entry.l_answer = sum_answer / static_cast<double>(encoded.size());
        entry.l_score = sum_score / static_cast<double>(encoded.size());
        entry.l_total = entry.l_answer + config.model.beta * entry.l_score;

        bool do_eval = epoch % config.eval_every == 0 || epoch == config.epochs || !have_eval;
        if (do_eval && !val.empty()) {
            EvalResult eval = evaluate_model(model, context, val, features);
            entry.val_acc = eval.accuracy.overall;
            entry.val_lp = eval.lp.overall;
            entry.val_acc_per_type = eval.accuracy.per_type;
            entry.val_lp_per_type = eval.lp.per_type;
            entry.evaluated = true;
            carry_acc = entry.val_acc;
            carry_lp = entry.val_lp;
            carry_acc_per_type = entry.val_acc_per_type;
            carry_lp_per_type = entry.val_lp_per_type;
            have_eval = true;
            if (entry.val_acc > result.best_val_acc || result.best_epoch == 0) {
                result.best_val_acc = entry.val_acc;
                result.best_epoch = epoch;
                result.best_checkpoint = model.params().serialize();
            }
        } else {
            entry.val_acc = carry_acc;
            entry.val_lp = carry_lp;
            entry.val_acc_per_type = carry_acc_per_type;
            entry.val_lp_per_type = carry_lp_per_type;
        }

        entry.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
        result.log.push_back(std::move(entry));
    }

    result.last_checkpoint = model.params().serialize();
    if (result.best_checkpoint.empty()) result.best_checkpoint = result.last_checkpoint;
    return result;
}

TrainResult train(const TrainConfig& config) {
    config.validate();
    std::vector<AnnotatedExample> train_split =
        load_dataset(config.train_path, DatasetFormat::native_jsonl);
    std::vector<AnnotatedExample> val_split =
        config.val_path.empty() ? std::vector<AnnotatedExample>{}
                                : load_dataset(config.val_path, DatasetFormat::native_jsonl);
    FeatureStore features = read_features(config.features_path, config.features_path + ".idx.json");

    TrainResult result = train_in_memory(config, train_split, val_split, features);

    if (!config.out_dir.empty()) {
        std::filesystem::create_directories(config.out_dir);
        auto out = [&](const char* name) {
            return (std::filesystem::path(config.out_dir) / name).string();
        };
        write_file(out("trainlog.csv"), trainlog_csv(result.log));
        write_file(out("best.ckpt"), result.best_checkpoint);
        write_file(out("last.ckpt"), result.last_checkpoint);
        write_file(out("train_config.json"), config.to_json_text());
        std::vector<double> acc, lp;
        for (const EpochLog& e : result.log) {
            acc.push_back(e.val_acc);
            lp.push_back(e.val_lp);
        }
        write_file(out("convergence.svg"), svg_convergence(acc, lp));
    }
    return result;
}

std::string trainlog_csv(std::span<const EpochLog> log) {
    std::string out = "epoch,l_answer,l_score,l_total,val_acc,val_lp,seconds\n";
    for (const EpochLog& e : log) {
        out += csv_row({std::to_string(e.epoch), fmt_double(e.l_answer), fmt_double(e.l_score),
                        fmt_double(e.l_total), fmt_double(e.val_acc), fmt_double(e.val_lp),
                        fmt_double(e.seconds)});
    }
    return out;
}

EvalResult evaluate_checkpoint(const TrainConfig& config, const std::string& checkpoint_path,
                               const std::string& split_path) {
    config.validate();
    std::vector<AnnotatedExample> train_split =
        load_dataset(config.train_path, DatasetFormat::native_jsonl);
    std::vector<AnnotatedExample> split = load_dataset(split_path, DatasetFormat::native_jsonl);
    FeatureStore features = read_features(config.features_path, config.features_path + ".idx.json");

    EvalContext context = build_eval_context(train_split, config.vocab_top_k);
    VqaModel model(config.model, context.question_vocab.words.size(),
                   context.answer_vocab.answers.size(), features.regions(), features.dim(),
                   config.seed);
    model.params().load_values(load_params(checkpoint_path));
    return evaluate_model(model, context, split, features);
}

std::uint64_t sweep_cell_seed(std::uint64_t base_seed, const SweepCell& cell) {
    char tag[128];
    std::snprintf(tag, sizeof(tag), "cell:beta=%.17g,gamma=%.17g,fusion=%s", cell.beta, cell.gamma,
                  fusion_mode_name(cell.fusion).c_str());
    return derive_seed(base_seed, tag);
}

namespace {

std::size_t sweep_worker_count(std::size_t cells) {
    std::size_t workers = std::thread::hardware_concurrency();
    if (workers == 0) workers = 1;
    if (const char* env = std::getenv("VPL_WORKERS")) {
        char* end = nullptr;
        long parsed = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || parsed < 1) {
            throw std::invalid_argument("VPL_WORKERS must be a positive integer, got \"" +
                                        std::string(env) + "\"");
        }
        workers = static_cast<std::size_t>(parsed);
    }
    return std::max<std::size_t>(1, std::min(workers, cells));
}

}  // namespace

std::vector<SweepRow> sweep(const TrainConfig& base, std::span<const SweepCell> grid) {
    if (grid.empty()) throw std::invalid_argument("sweep: empty grid");
    base.validate();

    std::vector<AnnotatedExample> train_split =
        load_dataset(base.train_path, DatasetFormat::native_jsonl);
    std::vector<AnnotatedExample> val_split =
        base.val_path.empty() ? std::vector<AnnotatedExample>{}
                              : load_dataset(base.val_path, DatasetFormat::native_jsonl);
    FeatureStore features = read_features(base.features_path, base.features_path + ".idx.json");

    std::vector<SweepRow> rows(grid.size());
    std::atomic<std::size_t> next{0};
    auto run_cell = [&](std::size_t idx) {
        const SweepCell& cell = grid[idx];
        SweepRow& row = rows[idx];
        row.cell = cell;
        row.seed = sweep_cell_seed(base.seed, cell);
        TrainConfig config = base;
        config.model.beta = cell.beta;
        config.model.gamma = cell.gamma;
        config.model.fusion = cell.fusion;
        config.seed = row.seed;
        config.out_dir.clear();
        try {
            TrainResult result = train_in_memory(config, train_split, val_split, features);
            const EpochLog& last = result.log.back();
            row.val_acc = last.val_acc;
            row.val_lp = last.val_lp;
            row.l_total = last.l_total;
            if (!base.out_dir.empty()) {
                auto cell_dir = std::filesystem::path(base.out_dir) / ("cell_" + std::to_string(idx));
                std::filesystem::create_directories(cell_dir);
                write_file((cell_dir / "trainlog.csv").string(), trainlog_csv(result.log));
                write_file((cell_dir / "train_config.json").string(), config.to_json_text());
            }
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
        }
    };

    std::size_t workers = sweep_worker_count(grid.size());
    if (workers == 1) {
        for (std::size_t i = 0; i < grid.size(); ++i) run_cell(i);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < grid.size(); i = next.fetch_add(1)) {
                    run_cell(i);
                }
            });
        }
        for (std::thread& t : pool) t.join();
    }

    std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        if (a.failed != b.failed) return !a.failed;
        if (a.val_acc != b.val_acc) return a.val_acc > b.val_acc;
        if (a.val_lp != b.val_lp) return a.val_lp < b.val_lp;
        if (a.cell.beta != b.cell.beta) return a.cell.beta < b.cell.beta;
        if (a.cell.gamma != b.cell.gamma) return a.cell.gamma < b.cell.gamma;
        return fusion_mode_name(a.cell.fusion) < fusion_mode_name(b.cell.fusion);
    });

    if (!base.out_dir.empty()) {
        std::filesystem::create_directories(base.out_dir);
        write_file((std::filesystem::path(base.out_dir) / "sweep.csv").string(), sweep_csv(rows));
    }
    return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
    std::string out = "beta,gamma,fusion,seed,val_acc,val_lp,l_total,status\n";
    for (const SweepRow& row : rows) {
        std::string status = row.failed ? "failed: " + row.error : "ok";
        out += csv_row({fmt_double(row.cell.beta), fmt_double(row.cell.gamma),
                        fusion_mode_name(row.cell.fusion), std::to_string(row.seed),
                        row.failed ? "" : fmt_double(row.val_acc),
                        row.failed ? "" : fmt_double(row.val_lp),
                        row.failed ? "" : fmt_double(row.l_total), status});
    }
    return out;
}

}  // namespace vpl
