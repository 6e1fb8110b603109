#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "vpl/common.hpp"
#include "vpl/dataset.hpp"
#include "vpl/params.hpp"
#include "vpl/synth.hpp"
#include "vpl/trainer.hpp"

using namespace vpl;

namespace {

std::filesystem::path test_dir(const std::string& leaf) {
    auto p = std::filesystem::temp_directory_path() / "vpl_test_trainer" / leaf;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

// Small benchmark shared across cases; regenerating it is cheap.
SynthDataset small_dataset(std::uint64_t seed = 7, int train_size = 240, int val_size = 80) {
    SynthConfig config;
    config.num_types = 3;
    config.answers_per_type = 4;
    config.train_size = train_size;
    config.val_size = val_size;
    config.skew = 1.3;
    config.visual_snr = 3.0;
    config.regions = 3;
    config.feature_dim = 8;
    config.seed = seed;
    return gen_dataset(config);
}

TrainConfig small_train_config(int epochs = 3) {
    TrainConfig config;
    config.epochs = epochs;
    config.batch_size = 16;
    config.model.embed_dim = 8;
    config.model.hidden_dim = 12;
    config.seed = 5;
    return config;
}

}  // namespace

TEST_CASE("train config validation and json round trip") {
    TrainConfig config = small_train_config();
    CHECK_NOTHROW(config.validate());
    TrainConfig back = TrainConfig::from_json_text(config.to_json_text());
    CHECK_EQ(back.epochs, config.epochs);
    CHECK_EQ(back.batch_size, config.batch_size);
    CHECK_EQ(back.model.embed_dim, config.model.embed_dim);
    CHECK_EQ(back.optimizer.kind, "adam");

    TrainConfig bad = config;
    bad.epochs = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = config;
    bad.optimizer.kind = "rmsprop";
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = config;
    bad.optimizer.lr = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    CHECK_THROWS_AS(TrainConfig::from_json_text("{\"epoch\": 3}"), DataError);
    CHECK_THROWS_AS(TrainConfig::from_json_text("{\"optimizer\": {\"momentum\": 0.9}}"), DataError);

    // Nested model settings ride along.
    TrainConfig nested = TrainConfig::from_json_text(
        "{\"epochs\": 2, \"model\": {\"beta\": 0.5, \"fusion\": \"add\"}}");
    CHECK_EQ(nested.model.beta, 0.5);
    CHECK(nested.model.fusion == FusionMode::add);
}

TEST_CASE("eval context is deterministic and evaluation is repeatable") {
    SynthDataset ds = small_dataset();
    EvalContext context = build_eval_context(ds.train, 1000);
    CHECK_EQ(context.stats.types.size(), 3);
    CHECK(context.answer_vocab.answers.size() <= 12);
    CHECK_EQ(context.question_vocab.words[0], "<unk>");

    TrainConfig config = small_train_config(1);
    VqaModel model(config.model, context.question_vocab.words.size(),
                   context.answer_vocab.answers.size(), ds.features.regions(), ds.features.dim(),
                   config.seed);
    EvalResult a = evaluate_model(model, context, ds.val, ds.features);
    EvalResult b = evaluate_model(model, context, ds.val, ds.features);
    REQUIRE_EQ(a.predictions.size(), ds.val.size());
    for (std::size_t i = 0; i < a.predictions.size(); ++i) {
        CHECK_EQ(a.predictions[i].question_id, b.predictions[i].question_id);
        CHECK_EQ(a.predictions[i].predicted_answer, b.predictions[i].predicted_answer);
    }
    CHECK_EQ(a.accuracy.overall, b.accuracy.overall);
    CHECK_EQ(a.lp.overall, b.lp.overall);
    CHECK(a.lp.scale == LpScale::unit);
}

TEST_CASE("training runs, logs every epoch and improves on the baseline") {
    SynthDataset ds = small_dataset();
    TrainConfig config = small_train_config(6);
    TrainResult result = train_in_memory(config, ds.train, ds.val, ds.features);

    REQUIRE_EQ(result.log.size(), 6);
    for (int e = 0; e < 6; ++e) {
        CHECK_EQ(result.log[static_cast<std::size_t>(e)].epoch, e + 1);
        CHECK(std::isfinite(result.log[static_cast<std::size_t>(e)].l_total));
        CHECK(result.log[static_cast<std::size_t>(e)].evaluated);
        CHECK(result.log[static_cast<std::size_t>(e)].seconds >= 0.0);
    }
    CHECK_EQ(result.skipped_oov, 0);
    CHECK(result.best_epoch >= 1);
    CHECK(result.best_val_acc >= result.log[0].val_acc);
    // Loss drops substantially from the first epoch.
    CHECK(result.log.back().l_answer < result.log.front().l_answer);
    CHECK_FALSE(result.best_checkpoint.empty());
    CHECK_FALSE(result.last_checkpoint.empty());

    // l_total is exactly l_answer + beta * l_score per epoch.
    for (const EpochLog& entry : result.log) {
        CHECK(std::abs(entry.l_total - (entry.l_answer + config.model.beta * entry.l_score)) <
              1e-12);
    }
}

TEST_CASE("identical config and seed reproduce the identical train log") {
    SynthDataset ds = small_dataset();
    TrainConfig config = small_train_config(3);
    TrainResult a = train_in_memory(config, ds.train, ds.val, ds.features);
    TrainResult b = train_in_memory(config, ds.train, ds.val, ds.features);
    REQUIRE_EQ(a.log.size(), b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) {
        CHECK_EQ(a.log[i].l_answer, b.log[i].l_answer);
        CHECK_EQ(a.log[i].l_score, b.log[i].l_score);
        CHECK_EQ(a.log[i].l_total, b.log[i].l_total);
        CHECK_EQ(a.log[i].val_acc, b.log[i].val_acc);
        CHECK_EQ(a.log[i].val_lp, b.log[i].val_lp);
    }
    CHECK_EQ(a.best_checkpoint, b.best_checkpoint);
    CHECK_EQ(a.last_checkpoint, b.last_checkpoint);

    TrainConfig other = config;
    other.seed = config.seed + 1;
    TrainResult c = train_in_memory(other, ds.train, ds.val, ds.features);
    CHECK(a.log.back().l_answer != c.log.back().l_answer);
}

TEST_CASE("beta zero training is bit-identical to a run with a corrupted sr branch") {
    // The SR parameters exist in both models but must never influence the
    // answer path while beta is zero.
    SynthDataset ds = small_dataset();
    TrainConfig config = small_train_config(3);
    config.model.beta = 0.0;
    TrainResult base = train_in_memory(config, ds.train, ds.val, ds.features);

    SynthDataset ds2 = small_dataset();
    TrainResult again = train_in_memory(config, ds2.train, ds2.val, ds2.features);
    CHECK_EQ(base.last_checkpoint, again.last_checkpoint);

    ParamStore params = ParamStore::deserialize(base.last_checkpoint);
    bool has_sr = false;
    for (const auto& [name, p] : params.items()) has_sr |= name.rfind("sr.", 0) == 0;
    CHECK(has_sr);
}

TEST_CASE("dropout only perturbs runs when the sr branch is live") {
    SynthDataset ds = small_dataset();
    TrainConfig with_dropout = small_train_config(2);
    with_dropout.model.beta = 0.0;
    with_dropout.model.dropout = 0.5;
    TrainConfig without_dropout = with_dropout;
    without_dropout.model.dropout = 0.0;

    // With beta = 0 no mask is ever drawn, so the dropout setting is inert.
    TrainResult a = train_in_memory(with_dropout, ds.train, ds.val, ds.features);
    TrainResult b = train_in_memory(without_dropout, ds.train, ds.val, ds.features);
    CHECK_EQ(a.last_checkpoint, b.last_checkpoint);

    // With beta > 0 the mask stream becomes live.
    TrainConfig live = with_dropout;
    live.model.beta = 0.5;
    TrainConfig live_plain = without_dropout;
    live_plain.model.beta = 0.5;
    TrainResult c = train_in_memory(live, ds.train, ds.val, ds.features);
    TrainResult d = train_in_memory(live_plain, ds.train, ds.val, ds.features);
    CHECK(c.last_checkpoint != d.last_checkpoint);
}

TEST_CASE("checkpoints reload bit exactly and reproduce evaluation") {
    auto dir = test_dir("ckpt");
    SynthConfig gen = SynthConfig();
    gen.num_types = 3;
    gen.answers_per_type = 4;
    gen.train_size = 240;
    gen.val_size = 80;
    gen.regions = 3;
    gen.feature_dim = 8;
    SynthDataset ds = gen_dataset(gen);
    write_dataset(ds, gen, dir.string());

    TrainConfig config = small_train_config(3);
    config.train_path = (dir / "train.jsonl").string();
    config.val_path = (dir / "val.jsonl").string();
    config.features_path = (dir / "features.bin").string();
    config.out_dir = (dir / "run").string();
    TrainResult result = train(config);

    CHECK(std::filesystem::exists(dir / "run" / "trainlog.csv"));
    CHECK(std::filesystem::exists(dir / "run" / "best.ckpt"));
    CHECK(std::filesystem::exists(dir / "run" / "last.ckpt"));
    CHECK(std::filesystem::exists(dir / "run" / "train_config.json"));
    CHECK(std::filesystem::exists(dir / "run" / "convergence.svg"));

    // On-disk checkpoint equals the in-memory payload byte for byte.
    CHECK_EQ(read_file((dir / "run" / "last.ckpt").string()), result.last_checkpoint);

    EvalResult from_disk =
        evaluate_checkpoint(config, (dir / "run" / "last.ckpt").string(), config.val_path);
    CHECK_EQ(from_disk.accuracy.overall, result.log.back().val_acc);
    CHECK_EQ(from_disk.lp.overall, result.log.back().val_lp);

    // Round trip through serialize/deserialize is bit exact.
    ParamStore reloaded = ParamStore::deserialize(result.last_checkpoint);
    CHECK_EQ(reloaded.serialize(), result.last_checkpoint);

    SUBCASE("training can resume from a checkpoint") {
        TrainConfig resume = config;
        resume.init_checkpoint = (dir / "run" / "last.ckpt").string();
        resume.out_dir.clear();
        resume.epochs = 1;
        TrainResult more = train(resume);
        // Warm start continues from trained weights: first epoch loss is far
        // below the cold first epoch.
        CHECK(more.log.front().l_answer < result.log.front().l_answer);
    }
}

TEST_CASE("eval_every controls which epochs evaluate, first and last always do") {
    SynthDataset ds = small_dataset();
    TrainConfig config = small_train_config(5);
    config.eval_every = 2;
    TrainResult result = train_in_memory(config, ds.train, ds.val, ds.features);
    REQUIRE_EQ(result.log.size(), 5);
    CHECK(result.log[0].evaluated);         // first epoch
    CHECK(result.log[1].evaluated);         // epoch 2 = multiple of 2
    CHECK_FALSE(result.log[2].evaluated);   // carried forward
    CHECK(result.log[3].evaluated);
    CHECK(result.log[4].evaluated);         // final epoch always evaluates
    // Carried-forward epochs repeat the previous metric values.
    CHECK_EQ(result.log[2].val_acc, result.log[1].val_acc);
    CHECK_EQ(result.log[2].val_lp, result.log[1].val_lp);
}

TEST_CASE("out-of-vocabulary answers are skipped and counted") {
    SynthDataset ds = small_dataset();
    TrainConfig config = small_train_config(1);
    config.vocab_top_k = 2;  // forces most answers out of the candidate set
    TrainResult result = train_in_memory(config, ds.train, ds.val, ds.features);
    CHECK(result.skipped_oov > 0);
    CHECK(result.skipped_oov < static_cast<std::int64_t>(ds.train.size()));
}

TEST_CASE("empty training split is rejected") {
    SynthDataset ds = small_dataset();
    TrainConfig config = small_train_config(1);
    std::vector<AnnotatedExample> empty;
    CHECK_THROWS_AS(train_in_memory(config, empty, ds.val, ds.features), DataError);
}

TEST_CASE("divergence aborts with epoch and batch context") {
    auto dir = test_dir("diverge");
    SynthDataset ds = small_dataset();

    // A checkpoint with enormous weights overflows the forward pass.
    EvalContext context = build_eval_context(ds.train, 1000);
    TrainConfig config = small_train_config(2);
    VqaModel shell(config.model, context.question_vocab.words.size(),
                   context.answer_vocab.answers.size(), ds.features.regions(), ds.features.dim(),
                   config.seed);
    for (auto& [name, param] : shell.params().items()) {
        for (double& v : param.value.data) v = 1e308;
    }
    std::string huge = (dir / "huge.ckpt").string();
    save_params(shell.params(), huge);
    config.init_checkpoint = huge;

    try {
        train_in_memory(config, ds.train, ds.val, ds.features);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        std::string msg = e.what();
        CHECK(msg.find("epoch 1") != std::string::npos);
        CHECK(msg.find("batch 1") != std::string::npos);
    }
}

TEST_CASE("sgd optimizer path trains") {
    SynthDataset ds = small_dataset();
    TrainConfig config = small_train_config(4);
    config.optimizer.kind = "sgd";
    config.optimizer.lr = 0.05;
    TrainResult result = train_in_memory(config, ds.train, ds.val, ds.features);
    CHECK(result.log.back().l_answer < result.log.front().l_answer);
}

TEST_CASE("trainlog csv has the documented columns") {
    SynthDataset ds = small_dataset();
    TrainConfig config = small_train_config(2);
    TrainResult result = train_in_memory(config, ds.train, ds.val, ds.features);
    std::string csv = trainlog_csv(result.log);
    CHECK_EQ(csv.substr(0, csv.find('\n')),
             "epoch,l_answer,l_score,l_total,val_acc,val_lp,seconds");
    std::size_t lines = 0;
    for (char c : csv) lines += c == '\n' ? 1 : 0;
    CHECK_EQ(lines, 3);  // header + 2 epochs
}

TEST_CASE("sweep covers the grid, sorts rows and tolerates failures") {
    SynthDataset ds = small_dataset(7, 160, 60);
    auto dir = test_dir("sweep");
    write_dataset(ds, SynthConfig(), dir.string());

    TrainConfig base = small_train_config(2);
    base.train_path = (dir / "train.jsonl").string();
    base.val_path = (dir / "val.jsonl").string();
    base.features_path = (dir / "features.bin").string();

    SUBCASE("full grid") {
        std::vector<SweepCell> grid;
        for (double beta : {0.0, 1.0}) {
            for (double gamma : {0.2}) {
                for (FusionMode fusion : {FusionMode::mul, FusionMode::add, FusionMode::con}) {
                    grid.push_back(SweepCell{beta, gamma, fusion});
                }
            }
        }
        std::vector<SweepRow> rows = sweep(base, grid);
        REQUIRE_EQ(rows.size(), 6);
        for (const SweepRow& row : rows) {
            CHECK_FALSE(row.failed);
            CHECK(std::isfinite(row.val_acc));
            CHECK(std::isfinite(row.val_lp));
        }
        // Sorted by accuracy descending.
        for (std::size_t i = 1; i < rows.size(); ++i) {
            CHECK(rows[i - 1].val_acc >= rows[i].val_acc);
        }
        std::string csv = sweep_csv(rows);
        CHECK_EQ(csv.substr(0, csv.find('\n')),
                 "beta,gamma,fusion,seed,val_acc,val_lp,l_total,status");
    }

    SUBCASE("duplicate cells produce identical rows") {
        std::vector<SweepCell> grid = {SweepCell{1.0, 0.2, FusionMode::mul},
                                       SweepCell{1.0, 0.2, FusionMode::mul}};
        std::vector<SweepRow> rows = sweep(base, grid);
        REQUIRE_EQ(rows.size(), 2);
        CHECK_EQ(rows[0].seed, rows[1].seed);
        CHECK_EQ(rows[0].val_acc, rows[1].val_acc);
        CHECK_EQ(rows[0].val_lp, rows[1].val_lp);
        CHECK_EQ(rows[0].l_total, rows[1].l_total);
    }

    SUBCASE("singleton grid equals a direct run with the derived seed") {
        SweepCell cell{0.5, 0.3, FusionMode::add};
        std::vector<SweepCell> grid = {cell};
        std::vector<SweepRow> rows = sweep(base, grid);
        REQUIRE_EQ(rows.size(), 1);

        TrainConfig direct = base;
        direct.model.beta = cell.beta;
        direct.model.gamma = cell.gamma;
        direct.model.fusion = cell.fusion;
        direct.seed = sweep_cell_seed(base.seed, cell);
        TrainResult run = train_in_memory(direct, ds.train, ds.val, ds.features);
        CHECK_EQ(rows[0].val_acc, run.log.back().val_acc);
        CHECK_EQ(rows[0].val_lp, run.log.back().val_lp);
        CHECK_EQ(rows[0].l_total, run.log.back().l_total);
    }

    SUBCASE("invalid cells are marked failed without sinking the sweep") {
        std::vector<SweepCell> grid = {SweepCell{1.0, 0.2, FusionMode::mul},
                                       SweepCell{-1.0, 0.2, FusionMode::mul}};
        std::vector<SweepRow> rows = sweep(base, grid);
        REQUIRE_EQ(rows.size(), 2);
        CHECK_FALSE(rows[0].failed);
        CHECK(rows[1].failed);
        CHECK_FALSE(rows[1].error.empty());
        std::string csv = sweep_csv(rows);
        CHECK(csv.find("failed:") != std::string::npos);
    }

    SUBCASE("empty grid is rejected") {
        std::vector<SweepCell> empty;
        CHECK_THROWS_AS(sweep(base, empty), std::invalid_argument);
    }

    SUBCASE("per cell artifacts appear under out_dir") {
        TrainConfig with_out = base;
        with_out.out_dir = (dir / "sweep_out").string();
        std::vector<SweepCell> grid = {SweepCell{0.0, 0.2, FusionMode::mul},
                                       SweepCell{1.0, 0.2, FusionMode::mul}};
        std::vector<SweepRow> rows = sweep(with_out, grid);
        REQUIRE_EQ(rows.size(), 2);
        CHECK(std::filesystem::exists(dir / "sweep_out" / "sweep.csv"));
        CHECK(std::filesystem::exists(dir / "sweep_out" / "cell_0" / "trainlog.csv"));
        CHECK(std::filesystem::exists(dir / "sweep_out" / "cell_1" / "train_config.json"));
    }
}

TEST_CASE("worker cap env var is honored and validated") {
    SynthDataset ds = small_dataset(7, 120, 40);
    auto dir = test_dir("workers");
    write_dataset(ds, SynthConfig(), dir.string());
    TrainConfig base = small_train_config(1);
    base.train_path = (dir / "train.jsonl").string();
    base.val_path = (dir / "val.jsonl").string();
    base.features_path = (dir / "features.bin").string();

    std::vector<SweepCell> grid = {SweepCell{0.0, 0.2, FusionMode::mul},
                                   SweepCell{1.0, 0.2, FusionMode::mul}};

    setenv("VPL_WORKERS", "1", 1);
    std::vector<SweepRow> serial = sweep(base, grid);
    setenv("VPL_WORKERS", "4", 1);
    std::vector<SweepRow> parallel = sweep(base, grid);
    unsetenv("VPL_WORKERS");
    REQUIRE_EQ(serial.size(), parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK_EQ(serial[i].val_acc, parallel[i].val_acc);
        CHECK_EQ(serial[i].val_lp, parallel[i].val_lp);
        CHECK_EQ(serial[i].seed, parallel[i].seed);
    }

    setenv("VPL_WORKERS", "zero", 1);
    CHECK_THROWS_AS(sweep(base, grid), std::invalid_argument);
    unsetenv("VPL_WORKERS");
}
