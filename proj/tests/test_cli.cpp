#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "vpl/cli.hpp"
#include "vpl/common.hpp"
#include "vpl/dataset.hpp"
#include "vpl/metrics.hpp"
#include "vpl/params.hpp"
#include "vpl/type_stats.hpp"

using namespace vpl;

namespace {

std::filesystem::path test_dir(const std::string& leaf) {
    auto p = std::filesystem::temp_directory_path() / "vpl_test_cli" / leaf;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

struct CliResult {
    int code = -1;
    std::string out;
};

// Runs the dispatcher in-process with stdout captured at the fd level, since
// the commands print through both std::cout and std::printf.
CliResult run(std::vector<std::string> args) {
    std::fflush(stdout);
    std::cout.flush();
    auto tmp = std::filesystem::temp_directory_path() /
               ("vpl_cli_capture_" + std::to_string(::getpid()) + ".txt");
    int saved = ::dup(1);
    REQUIRE(saved >= 0);
    FILE* f = std::fopen(tmp.string().c_str(), "w");
    REQUIRE(f != nullptr);
    ::dup2(::fileno(f), 1);

    CliResult result;
    result.code = run_cli(std::move(args));

    std::fflush(stdout);
    std::cout.flush();
    ::dup2(saved, 1);
    ::close(saved);
    std::fclose(f);
    result.out = read_file(tmp.string());
    std::filesystem::remove(tmp);
    return result;
}

std::string gen_config_text(int train_size, int val_size, std::uint64_t seed) {
    return "{\"num_types\":3,\"answers_per_type\":4,\"train_size\":" + std::to_string(train_size) +
           ",\"val_size\":" + std::to_string(val_size) +
           ",\"regions\":3,\"feature_dim\":8,\"seed\":" + std::to_string(seed) + "}";
}

// One generated dataset reused by most cases.
struct Workspace {
    std::filesystem::path dir;
    std::string train, val, features;

    explicit Workspace(const std::string& leaf, int train_size = 150, int val_size = 60) {
        dir = test_dir(leaf);
        write_file((dir / "gen.json").string(), gen_config_text(train_size, val_size, 11));
        CliResult r = run({"gen", "--config", (dir / "gen.json").string(), "--out",
                           (dir / "ds").string()});
        REQUIRE_EQ(r.code, 0);
        train = (dir / "ds" / "train.jsonl").string();
        val = (dir / "ds" / "val.jsonl").string();
        features = (dir / "ds" / "features.bin").string();
    }
};

}  // namespace

TEST_CASE("help and usage errors") {
    CHECK_EQ(run({"--help"}).code, 0);
    CHECK_EQ(run({"lp", "--help"}).code, 0);
    CHECK_EQ(run({}).code, 1);
    CHECK_EQ(run({"unknown-command"}).code, 1);
    CHECK_EQ(run({"lp", "--no-such-flag"}).code, 1);
    // Missing required flags are usage errors.
    CHECK_EQ(run({"lp"}).code, 1);
}

TEST_CASE("gen is byte-identical across runs and writes a manifest") {
    auto dir = test_dir("gen");
    write_file((dir / "g.json").string(), gen_config_text(80, 30, 5));
    CliResult a = run({"gen", "--config", (dir / "g.json").string(), "--out", (dir / "a").string()});
    CliResult b = run({"gen", "--config", (dir / "g.json").string(), "--out", (dir / "b").string()});
    REQUIRE_EQ(a.code, 0);
    REQUIRE_EQ(b.code, 0);

    for (const char* name : {"train.jsonl", "val.jsonl", "features.bin", "features.bin.idx.json",
                             "truth.json", "gen_config.json", "manifest.json"}) {
        CAPTURE(name);
        CHECK_EQ(read_file((dir / "a" / name).string()), read_file((dir / "b" / name).string()));
    }

    auto manifest = nlohmann::json::parse(read_file((dir / "a" / "manifest.json").string()));
    CHECK_EQ(manifest.at("tool"), "vpl");
    CHECK_EQ(manifest.at("command"), "gen");
    CHECK(manifest.contains("config"));
    CHECK(manifest.at("inputs").is_array());

    // The seed flag overrides the config seed.
    CliResult c = run({"gen", "--config", (dir / "g.json").string(), "--seed", "6", "--out",
                       (dir / "c").string()});
    REQUIRE_EQ(c.code, 0);
    CHECK(read_file((dir / "a" / "train.jsonl").string()) !=
          read_file((dir / "c" / "train.jsonl").string()));

    CHECK_EQ(run({"gen", "--config", (dir / "missing.json").string(), "--out",
                  (dir / "d").string()}).code, 2);
    write_file((dir / "bad.json").string(), "{\"train_sizes\": 10}");
    CHECK_EQ(run({"gen", "--config", (dir / "bad.json").string(), "--out",
                  (dir / "e").string()}).code, 2);
}

TEST_CASE("predict writes predictions and a manifest") {
    Workspace ws("predict");
    std::string out = (ws.dir / "pred.jsonl").string();
    CliResult r = run({"predict", "--strategy", "prior-follower", "--train", ws.train, "--val",
                       ws.val, "--out", out});
    REQUIRE_EQ(r.code, 0);
    CHECK(r.out.find("wrote 60 predictions") != std::string::npos);

    auto preds = load_predictions(out);
    auto val = load_dataset(ws.val, DatasetFormat::native_jsonl);
    REQUIRE_EQ(preds.size(), val.size());
    CHECK(std::filesystem::exists(out + ".manifest.json"));

    CHECK_EQ(run({"predict", "--strategy", "psychic", "--train", ws.train, "--val", ws.val,
                  "--out", out}).code, 2);
}

TEST_CASE("lp prints the documented formats and writes csv artifacts") {
    Workspace ws("lp");
    std::string pred = (ws.dir / "pred.jsonl").string();
    REQUIRE_EQ(run({"predict", "--strategy", "prior-follower", "--train", ws.train, "--val",
                    ws.val, "--out", pred}).code, 0);

    // Expected value recomputed through the library.
    auto train = load_dataset(ws.train, DatasetFormat::native_jsonl);
    auto val = load_dataset(ws.val, DatasetFormat::native_jsonl);
    auto preds = load_predictions(pred);
    TypeStats stats = build_type_stats(train);
    LpReport expect = lp_overall(precision_table(val, preds, stats), stats, LpScale::percent);
    char line[64];
    std::snprintf(line, sizeof line, "overall LP (percent): %.2f", expect.overall);

    std::string out_dir = (ws.dir / "lp_out").string();
    CliResult r = run({"lp", "--train", ws.train, "--val", ws.val, "--pred", pred, "--out",
                       out_dir});
    REQUIRE_EQ(r.code, 0);
    CHECK(r.out.find(line) != std::string::npos);
    CHECK(r.out.find("ignored predictions (outside training answer sets): 0") != std::string::npos);
    CHECK(std::filesystem::exists(std::filesystem::path(out_dir) / "lp_per_answer.csv"));
    CHECK(std::filesystem::exists(std::filesystem::path(out_dir) / "lp_per_type.csv"));
    CHECK(std::filesystem::exists(std::filesystem::path(out_dir) / "lp_overall.csv"));
    CHECK(std::filesystem::exists(std::filesystem::path(out_dir) / "manifest.json"));

    std::string per_answer = read_file((std::filesystem::path(out_dir) / "lp_per_answer.csv").string());
    CHECK_EQ(per_answer.substr(0, per_answer.find('\n')),
             "type,answer,n,multiset_size,tp,fp,precision,lp");

    CliResult unit = run({"lp", "--train", ws.train, "--val", ws.val, "--pred", pred, "--scale",
                          "unit"});
    REQUIRE_EQ(unit.code, 0);
    char unit_line[64];
    std::snprintf(unit_line, sizeof unit_line, "overall LP (unit): %.6f", expect.overall / 100.0);
    CHECK(unit.out.find(unit_line) != std::string::npos);

    // Enumerated flag values are validated at parse time.
    CHECK_EQ(run({"lp", "--train", ws.train, "--val", ws.val, "--pred", pred, "--scale",
                  "nats"}).code, 1);
    CHECK_EQ(run({"lp", "--train", (ws.dir / "nope.jsonl").string(), "--val", ws.val, "--pred",
                  pred}).code, 2);

    // The consensus switch changes the numbers on this fixture only if some
    // human set disagrees with the canonical answer; here it must not crash.
    CHECK_EQ(run({"lp", "--train", ws.train, "--val", ws.val, "--pred", pred, "--correctness",
                  "consensus"}).code, 0);
    CHECK_EQ(run({"lp", "--train", ws.train, "--val", ws.val, "--pred", pred, "--correctness",
                  "vote"}).code, 1);
}

TEST_CASE("acc prints consensus accuracy and writes artifacts") {
    Workspace ws("acc");
    std::string pred = (ws.dir / "pred.jsonl").string();
    REQUIRE_EQ(run({"predict", "--strategy", "oracle", "--train", ws.train, "--val", ws.val,
                    "--out", pred}).code, 0);

    std::string out_dir = (ws.dir / "acc_out").string();
    CliResult r = run({"acc", "--val", ws.val, "--pred", pred, "--out", out_dir});
    REQUIRE_EQ(r.code, 0);
    CHECK(r.out.find("overall accuracy (percent): 100.00 over 60 predictions") !=
          std::string::npos);
    CHECK(std::filesystem::exists(std::filesystem::path(out_dir) / "accuracy.csv"));
    CHECK(std::filesystem::exists(std::filesystem::path(out_dir) / "accuracy_summary.csv"));
    CHECK(std::filesystem::exists(std::filesystem::path(out_dir) / "manifest.json"));

    std::string summary =
        read_file((std::filesystem::path(out_dir) / "accuracy_summary.csv").string());
    CHECK_EQ(summary.substr(0, summary.find('\n')), "scope,count,accuracy");
    CHECK(summary.find("overall,60,1") != std::string::npos);
}

TEST_CASE("stats writes distribution tables and charts") {
    Workspace ws("stats");
    std::string pred = (ws.dir / "pred.jsonl").string();
    REQUIRE_EQ(run({"predict", "--strategy", "uniform-random", "--train", ws.train, "--val",
                    ws.val, "--out", pred}).code, 0);

    std::string out_csv = (ws.dir / "stats_csv").string();
    CliResult r = run({"stats", "--train", ws.train, "--val", ws.val, "--pred", pred, "--out",
                       out_csv});
    REQUIRE_EQ(r.code, 0);
    CHECK(std::filesystem::exists(std::filesystem::path(out_csv) / "dist_t0.csv"));
    CHECK(std::filesystem::exists(std::filesystem::path(out_csv) / "dist_t1.csv"));
    CHECK(std::filesystem::exists(std::filesystem::path(out_csv) / "dist_t2.csv"));
    CHECK(std::filesystem::exists(std::filesystem::path(out_csv) / "manifest.json"));
    std::string table = read_file((std::filesystem::path(out_csv) / "dist_t0.csv").string());
    CHECK_EQ(table.substr(0, table.find('\n')), "series,answer,share");
    CHECK(table.find("gt_train,") != std::string::npos);
    CHECK(table.find("wrong:pred,") != std::string::npos);

    std::string out_svg = (ws.dir / "stats_svg").string();
    CliResult s = run({"stats", "--train", ws.train, "--val", ws.val, "--pred", pred, "--format",
                       "svg", "--out", out_svg});
    REQUIRE_EQ(s.code, 0);
    std::string svg = read_file((std::filesystem::path(out_svg) / "dist.svg").string());
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("t0") != std::string::npos);

    // Predictions without a val split to join against are a usage error.
    CHECK_EQ(run({"stats", "--train", ws.train, "--pred", pred, "--out", out_csv}).code, 2);
    // Train-only statistics are fine.
    CHECK_EQ(run({"stats", "--train", ws.train, "--out",
                  (ws.dir / "stats_train_only").string()}).code, 0);
}

TEST_CASE("train, eval and report round trip through the cli") {
    Workspace ws("train", 150, 60);
    std::string run_dir = (ws.dir / "run").string();
    write_file((ws.dir / "t.json").string(),
               "{\"epochs\":3,\"batch_size\":16,\"model\":{\"embed_dim\":8,\"hidden_dim\":12}}");

    CliResult t = run({"train", "--config", (ws.dir / "t.json").string(), "--train", ws.train,
                       "--val", ws.val, "--features", ws.features, "--out", run_dir});
    REQUIRE_EQ(t.code, 0);
    // The resolved configuration echo precedes the training output.
    CHECK(t.out.find("\"command\": \"train\"") != std::string::npos);
    CHECK(t.out.find("final epoch 3:") != std::string::npos);
    CHECK(t.out.find("best val_acc") != std::string::npos);
    for (const char* name :
         {"trainlog.csv", "best.ckpt", "last.ckpt", "train_config.json", "convergence.svg",
          "manifest.json"}) {
        CAPTURE(name);
        CHECK(std::filesystem::exists(std::filesystem::path(run_dir) / name));
    }

    // Determinism at the artifact level, seconds column aside: the train log
    // metric columns match across reruns.
    std::string run2 = (ws.dir / "run2").string();
    REQUIRE_EQ(run({"train", "--config", (ws.dir / "t.json").string(), "--train", ws.train,
                    "--val", ws.val, "--features", ws.features, "--out", run2}).code, 0);
    auto strip_seconds = [](const std::string& csv) {
        std::string out;
        std::size_t start = 0;
        while (start < csv.size()) {
            std::size_t end = csv.find('\n', start);
            if (end == std::string::npos) end = csv.size();
            std::string line = csv.substr(start, end - start);
            std::size_t last = line.rfind(',');
            out += line.substr(0, last);
            out += '\n';
            start = end + 1;
        }
        return out;
    };
    CHECK_EQ(strip_seconds(read_file(run_dir + "/trainlog.csv")),
             strip_seconds(read_file(run2 + "/trainlog.csv")));
    CHECK_EQ(read_file(run_dir + "/last.ckpt"), read_file(run2 + "/last.ckpt"));

    SUBCASE("eval reuses the checkpoint") {
        std::string eval_out = (ws.dir / "eval_out").string();
        CliResult e = run({"eval", "--config", (ws.dir / "t.json").string(), "--train", ws.train,
                           "--val", ws.val, "--features", ws.features, "--checkpoint",
                           run_dir + "/last.ckpt", "--eval-out", eval_out});
        REQUIRE_EQ(e.code, 0);
        CHECK(e.out.find("accuracy (percent):") != std::string::npos);
        CHECK(e.out.find("LP (percent):") != std::string::npos);
        CHECK(std::filesystem::exists(std::filesystem::path(eval_out) / "predictions.jsonl"));
        CHECK(std::filesystem::exists(std::filesystem::path(eval_out) / "accuracy_summary.csv"));

        CHECK_EQ(run({"eval", "--config", (ws.dir / "t.json").string(), "--train", ws.train,
                      "--val", ws.val, "--features", ws.features, "--checkpoint",
                      (ws.dir / "missing.ckpt").string()}).code, 2);
    }

    SUBCASE("report renders the chart from the log") {
        std::string report_dir = (ws.dir / "report").string();
        CliResult r = run({"report", "--log", run_dir + "/trainlog.csv", "--out", report_dir});
        REQUIRE_EQ(r.code, 0);
        std::string svg = read_file((std::filesystem::path(report_dir) / "convergence.svg").string());
        CHECK(svg.rfind("<svg", 0) == 0);

        write_file((ws.dir / "bad.csv").string(), "epoch,val_acc\n1\n");
        CHECK_EQ(run({"report", "--log", (ws.dir / "bad.csv").string(), "--out",
                      report_dir}).code, 2);
    }

    SUBCASE("numeric failures exit with code 3") {
        // Train from a deliberately overflowed checkpoint.
        auto params = ParamStore::deserialize(read_file(run_dir + "/last.ckpt"));
        for (auto& [name, p] : params.items()) {
            for (double& v : p.value.data) v = 1e308;
        }
        save_params(params, (ws.dir / "huge.ckpt").string());
        write_file((ws.dir / "resume.json").string(),
                   "{\"epochs\":1,\"batch_size\":16,\"model\":{\"embed_dim\":8,\"hidden_dim\":12},"
                   "\"init_checkpoint\":\"" +
                       (ws.dir / "huge.ckpt").string() + "\"}");
        CliResult r = run({"train", "--config", (ws.dir / "resume.json").string(), "--train",
                           ws.train, "--val", ws.val, "--features", ws.features, "--out",
                           (ws.dir / "run3").string()});
        CHECK_EQ(r.code, 3);
    }
}

TEST_CASE("sweep runs a small grid through the cli") {
    Workspace ws("sweep", 100, 40);
    write_file((ws.dir / "t.json").string(),
               "{\"epochs\":2,\"batch_size\":16,\"model\":{\"embed_dim\":8,\"hidden_dim\":12}}");
    std::string out_dir = (ws.dir / "sweep_out").string();
    CliResult r = run({"sweep", "--config", (ws.dir / "t.json").string(), "--train", ws.train,
                       "--val", ws.val, "--features", ws.features, "--out", out_dir, "--betas",
                       "0,1", "--gammas", "0.2", "--fusions", "mul"});
    REQUIRE_EQ(r.code, 0);
    CHECK(r.out.find("2 cells done, 0 failed") != std::string::npos);
    CHECK(r.out.find("best cell:") != std::string::npos);
    std::string csv = read_file((std::filesystem::path(out_dir) / "sweep.csv").string());
    CHECK_EQ(csv.substr(0, csv.find('\n')), "beta,gamma,fusion,seed,val_acc,val_lp,l_total,status");

    CHECK_EQ(run({"sweep", "--config", (ws.dir / "t.json").string(), "--train", ws.train, "--val",
                  ws.val, "--features", ws.features, "--out", out_dir, "--betas", "abc"}).code, 2);
}

TEST_CASE("manifest digests match the input files") {
    Workspace ws("manifest");
    std::string pred = (ws.dir / "pred.jsonl").string();
    REQUIRE_EQ(run({"predict", "--strategy", "oracle", "--train", ws.train, "--val", ws.val,
                    "--out", pred}).code, 0);
    auto manifest = nlohmann::json::parse(read_file(pred + ".manifest.json"));
    REQUIRE(manifest.at("inputs").is_array());
    bool checked = false;
    for (const auto& input : manifest.at("inputs")) {
        std::string path = input.at("path").get<std::string>();
        std::string digest = input.at("fnv1a64").get<std::string>();
        CHECK_EQ(digest, hex_digest(fnv1a64(read_file(path))));
        checked = true;
    }
    CHECK(checked);
    // No timestamps anywhere: reruns yield identical manifests.
    std::string first = read_file(pred + ".manifest.json");
    REQUIRE_EQ(run({"predict", "--strategy", "oracle", "--train", ws.train, "--val", ws.val,
                    "--out", pred}).code, 0);
    CHECK_EQ(read_file(pred + ".manifest.json"), first);
}
