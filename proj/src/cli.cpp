#include "vpl/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "vpl/common.hpp"
#include "vpl/csv.hpp"
#include "vpl/manifest.hpp"
#include "vpl/metrics.hpp"
#include "vpl/svg.hpp"
#include "vpl/synth.hpp"
#include "vpl/trainer.hpp"

namespace vpl {

namespace {

namespace fs = std::filesystem;

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

std::string sanitize_filename(const std::string& name) {
    std::string out;
    for (char c : name) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                  c == '-' || c == '.';
        out.push_back(ok ? c : '_');
    }
    return out;
}

void print_resolved(const std::string& command, const nlohmann::json& config) {
    nlohmann::json echo;
    echo["command"] = command;
    echo["config"] = config;
    std::cout << echo.dump(2) << "\n";
}

std::vector<AnnotatedExample> load_split(const std::string& path, const std::string& format) {
    return load_dataset(path, parse_dataset_format(format));
}

std::string lp_per_answer_csv(const PrecisionTable& table, const TypeStats& stats,
                              const LpReport& report) {
    std::string out = "type,answer,n,multiset_size,tp,fp,precision,lp\n";
    for (const auto& [qt, entry] : stats.types) {
        for (const auto& [answer, n] : entry.answer_counts) {
            const PrecisionCell& cell = table.cells.at(qt).at(answer);
            out += csv_row({qt, answer, std::to_string(n), std::to_string(entry.multiset_size),
                            std::to_string(cell.tp), std::to_string(cell.fp),
                            cell.precision ? fmt_double(*cell.precision) : std::string(),
                            fmt_double(report.per_answer.at(qt).at(answer))});
        }
    }
    return out;
}

std::string lp_per_type_csv(const LpReport& report) {
    std::string out = "type,lp\n";
    for (const auto& [qt, lp] : report.per_type) out += csv_row({qt, fmt_double(lp)});
    return out;
}

std::string lp_overall_csv(const LpReport& report) {
    std::string out = "lp,scale\n";
    out += csv_row({fmt_double(report.overall),
                    report.scale == LpScale::percent ? "percent" : "unit"});
    return out;
}

std::string accuracy_csv(const AccuracyReport& report) {
    std::string out = "question_id,accuracy\n";
    for (const auto& [qid, acc] : report.per_question) {
        out += csv_row({std::to_string(qid), fmt_fixed(acc, 2)});
    }
    return out;
}

std::string accuracy_summary_csv(const AccuracyReport& report) {
    std::string out = "scope,count,accuracy\n";
    out += csv_row({"overall", std::to_string(report.count), fmt_double(report.overall)});
    for (const auto& [qt, acc] : report.per_type) {
        out += csv_row({qt, std::to_string(report.count_per_type.at(qt)), fmt_double(acc)});
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        double v = std::stod(item, &used);
        if (used != item.size()) throw std::invalid_argument("bad number in list: \"" + item + "\"");
        out.push_back(v);
    }
    if (out.empty()) throw std::invalid_argument("empty numeric list");
    return out;
}

std::vector<FusionMode> parse_fusion_list(const std::string& csv) {
    std::vector<FusionMode> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(parse_fusion_mode(item));
    }
    if (out.empty()) throw std::invalid_argument("empty fusion list");
    return out;
}

TrainConfig load_train_config(const std::string& config_path, const std::string& train_path,
                              const std::string& val_path, const std::string& features_path,
                              const std::string& out_dir, std::optional<std::uint64_t> seed) {
    TrainConfig config;
    if (!config_path.empty()) config = TrainConfig::from_json_text(read_file(config_path));
    if (!train_path.empty()) config.train_path = train_path;
    if (!val_path.empty()) config.val_path = val_path;
    if (!features_path.empty()) config.features_path = features_path;
    if (!out_dir.empty()) config.out_dir = out_dir;
    if (seed) config.seed = *seed;
    if (config.train_path.empty()) throw std::invalid_argument("a training split is required");
    if (config.features_path.empty()) throw std::invalid_argument("a features file is required");
    config.validate();
    return config;
}

int cmd_stats(const std::string& train_path, const std::string& val_path,
              const std::vector<std::string>& pred_paths, const std::string& format,
              const std::string& out_dir, int top_k, const std::string& output_format) {
    auto train = load_split(train_path, format);
    TypeStats stats = build_type_stats(train);

    nlohmann::json echo;
    echo["train"] = train_path;
    echo["val"] = val_path;
    echo["pred"] = pred_paths;
    echo["dataset_format"] = format;
    echo["out"] = out_dir;
    echo["top_k"] = top_k;
    echo["format"] = output_format;
    print_resolved("stats", echo);

    std::vector<AnnotatedExample> val;
    if (!val_path.empty()) val = load_split(val_path, format);
    if (!pred_paths.empty() && val.empty()) {
        throw std::invalid_argument("--pred requires --val to join predictions against");
    }

    DistReport gt_only = distribution_report(stats, val, {}, static_cast<std::size_t>(top_k));
    std::vector<std::pair<std::string, DistReport>> predictor_reports;
    for (const std::string& pred_path : pred_paths) {
        auto preds = load_predictions(pred_path);
        predictor_reports.emplace_back(
            fs::path(pred_path).stem().string(),
            distribution_report(stats, val, preds, static_cast<std::size_t>(top_k)));
    }

    fs::create_directories(out_dir);
    ManifestInputs inputs{{"train", train_path}};
    if (!val_path.empty()) inputs.emplace_back("val", val_path);
    for (const std::string& p : pred_paths) inputs.emplace_back("pred", p);

    if (output_format == "csv") {
        for (const auto& [qt, shares] : gt_only.gt_train) {
            std::string csv = "series,answer,share\n";
            for (const AnswerShare& s : shares) {
                csv += csv_row({"gt_train", s.answer, fmt_double(s.share)});
            }
            for (const auto& [label, report] : predictor_reports) {
                auto it = report.wrong_pred.find(qt);
                if (it == report.wrong_pred.end()) continue;
                for (const AnswerShare& s : it->second) {
                    csv += csv_row({"wrong:" + label, s.answer, fmt_double(s.share)});
                }
            }
            write_file(join_path(out_dir, "dist_" + sanitize_filename(qt) + ".csv"), csv);
        }
    } else {
        std::vector<DistChartPanel> panels;
        for (const auto& [qt, shares] : gt_only.gt_train) {
            DistChartPanel panel;
            panel.type_name = qt;
            panel.groups.push_back({"train", shares});
            for (const auto& [label, report] : predictor_reports) {
                auto it = report.wrong_pred.find(qt);
                panel.groups.push_back(
                    {"wrong: " + label,
                     it == report.wrong_pred.end() ? std::vector<AnswerShare>{} : it->second});
            }
            panels.push_back(std::move(panel));
        }
        write_file(join_path(out_dir, "dist.svg"), svg_distribution(panels));
    }
    write_manifest(join_path(out_dir, "manifest.json"), "stats", echo.dump(), inputs);
    std::cout << "wrote distribution report for " << stats.types.size() << " question types to "
              << out_dir << "\n";
    return 0;
}

int cmd_gen(const std::string& config_path, std::optional<std::uint64_t> seed,
            const std::string& out_dir) {
    SynthConfig config;
    if (!config_path.empty()) config = SynthConfig::from_json_text(read_file(config_path));
    if (seed) config.seed = *seed;
    config.validate();
    print_resolved("gen", nlohmann::json::parse(config.to_json_text()));

    SynthDataset dataset = gen_dataset(config);
    write_dataset(dataset, config, out_dir);
    ManifestInputs inputs;
    if (!config_path.empty()) inputs.emplace_back("config", config_path);
    write_manifest(join_path(out_dir, "manifest.json"), "gen", config.to_json_text(), inputs);
    std::cout << "generated " << dataset.train.size() << " train and " << dataset.val.size()
              << " val examples under " << out_dir << "\n";
    return 0;
}

int cmd_predict(const std::string& strategy_name, const std::string& train_path,
                const std::string& val_path, const std::string& format, std::uint64_t seed,
                const std::string& out_path) {
    Strategy strategy = parse_strategy(strategy_name);
    nlohmann::json echo;
    echo["strategy"] = strategy_name;
    echo["train"] = train_path;
    echo["val"] = val_path;
    echo["dataset_format"] = format;
    echo["seed"] = seed;
    echo["out"] = out_path;
    print_resolved("predict", echo);

    auto train = load_split(train_path, format);
    auto val = load_split(val_path, format);
    TypeStats stats = build_type_stats(train);
    auto preds = canned_predict(strategy, val, stats, seed);

    std::ostringstream body;
    write_predictions(body, preds);
    write_file(out_path, body.str());
    write_manifest(out_path + ".manifest.json", "predict", echo.dump(),
                   {{"train", train_path}, {"val", val_path}});
    std::cout << "wrote " << preds.size() << " predictions to " << out_path << "\n";
    return 0;
}

int cmd_lp(const std::string& train_path, const std::string& val_path,
           const std::string& pred_path, const std::string& format, const std::string& scale_name,
           const std::string& correctness, const std::string& out_dir) {
    nlohmann::json echo;
    echo["train"] = train_path;
    echo["val"] = val_path;
    echo["pred"] = pred_path;
    echo["dataset_format"] = format;
    echo["scale"] = scale_name;
    echo["correctness"] = correctness;
    echo["out"] = out_dir;
    print_resolved("lp", echo);

    auto train = load_split(train_path, format);
    auto val = load_split(val_path, format);
    auto preds = load_predictions(pred_path);
    TypeStats stats = build_type_stats(train);
    PrecisionTable table = precision_table(val, preds, stats, parse_correctness_rule(correctness));
    LpScale scale = scale_name == "percent" ? LpScale::percent : LpScale::unit;
    if (scale_name != "percent" && scale_name != "unit") {
        throw std::invalid_argument("--scale must be unit or percent, got \"" + scale_name + "\"");
    }
    LpReport report = lp_overall(table, stats, scale);

    if (scale == LpScale::percent) {
        std::printf("overall LP (percent): %.2f\n", report.overall);
    } else {
        std::printf("overall LP (unit): %.6f\n", report.overall);
    }
    std::printf("ignored predictions (outside training answer sets): %lld\n",
                static_cast<long long>(table.ignored_total));

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_file(join_path(out_dir, "lp_per_answer.csv"), lp_per_answer_csv(table, stats, report));
        write_file(join_path(out_dir, "lp_per_type.csv"), lp_per_type_csv(report));
        write_file(join_path(out_dir, "lp_overall.csv"), lp_overall_csv(report));
        write_manifest(join_path(out_dir, "manifest.json"), "lp", echo.dump(),
                       {{"train", train_path}, {"val", val_path}, {"pred", pred_path}});
    }
    return 0;
}

int cmd_acc(const std::string& val_path, const std::string& pred_path, const std::string& format,
            const std::string& out_dir) {
    nlohmann::json echo;
    echo["val"] = val_path;
    echo["pred"] = pred_path;
    echo["dataset_format"] = format;
    echo["out"] = out_dir;
    print_resolved("acc", echo);

    auto val = load_split(val_path, format);
    auto preds = load_predictions(pred_path);
    AccuracyReport report = accuracy_report(val, preds);
    std::printf("overall accuracy (percent): %.2f over %lld predictions\n", report.overall * 100.0,
                static_cast<long long>(report.count));

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_file(join_path(out_dir, "accuracy.csv"), accuracy_csv(report));
        write_file(join_path(out_dir, "accuracy_summary.csv"), accuracy_summary_csv(report));
        write_manifest(join_path(out_dir, "manifest.json"), "acc", echo.dump(),
                       {{"val", val_path}, {"pred", pred_path}});
    }
    return 0;
}

int cmd_train(const TrainConfig& config) {
    print_resolved("train", nlohmann::json::parse(config.to_json_text()));
    TrainResult result = train(config);
    const EpochLog& last = result.log.back();
    std::printf("final epoch %d: l_total=%.6f val_acc=%.4f val_lp=%.4f\n", last.epoch, last.l_total,
                last.val_acc, last.val_lp);
    std::printf("best val_acc %.4f at epoch %d; %lld examples skipped (out-of-vocabulary answer)\n",
                result.best_val_acc, result.best_epoch,
                static_cast<long long>(result.skipped_oov));
    if (!config.out_dir.empty()) {
        write_manifest(join_path(config.out_dir, "manifest.json"), "train", config.to_json_text(),
                       {{"train", config.train_path},
                        {"val", config.val_path},
                        {"features", config.features_path}});
        std::cout << "artifacts written to " << config.out_dir << "\n";
    }
    return 0;
}

int cmd_eval(const TrainConfig& config, const std::string& checkpoint_path,
             const std::string& split_path, const std::string& out_dir) {
    nlohmann::json echo = nlohmann::json::parse(config.to_json_text());
    echo["checkpoint"] = checkpoint_path;
    echo["split"] = split_path;
    print_resolved("eval", echo);

    EvalResult result = evaluate_checkpoint(config, checkpoint_path, split_path);
    LpReport percent = result.lp;
    percent.overall *= 100.0;
    std::printf("accuracy (percent): %.2f\n", result.accuracy.overall * 100.0);
    std::printf("LP (percent): %.2f\n", percent.overall);

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ostringstream body;
        write_predictions(body, result.predictions);
        write_file(join_path(out_dir, "predictions.jsonl"), body.str());
        write_file(join_path(out_dir, "accuracy.csv"), accuracy_csv(result.accuracy));
        write_file(join_path(out_dir, "accuracy_summary.csv"),
                   accuracy_summary_csv(result.accuracy));
        write_manifest(join_path(out_dir, "manifest.json"), "eval", echo.dump(),
                       {{"train", config.train_path},
                        {"split", split_path},
                        {"features", config.features_path},
                        {"checkpoint", checkpoint_path}});
    }
    return 0;
}

int cmd_sweep(const TrainConfig& base, const std::string& betas, const std::string& gammas,
              const std::string& fusions) {
    std::vector<SweepCell> grid;
    for (double beta : parse_double_list(betas)) {
        for (double gamma : parse_double_list(gammas)) {
            for (FusionMode fusion : parse_fusion_list(fusions)) {
                grid.push_back({beta, gamma, fusion});
            }
        }
    }
    nlohmann::json echo = nlohmann::json::parse(base.to_json_text());
    echo["betas"] = betas;
    echo["gammas"] = gammas;
    echo["fusions"] = fusions;
    echo["cells"] = grid.size();
    print_resolved("sweep", echo);

    std::vector<SweepRow> rows = sweep(base, grid);
    std::size_t failed = 0;
    for (const SweepRow& row : rows) failed += row.failed ? 1 : 0;
    std::printf("%zu cells done, %zu failed\n", rows.size(), failed);
    if (!rows.empty() && !rows.front().failed) {
        std::printf("best cell: beta=%g gamma=%g fusion=%s val_acc=%.4f val_lp=%.4f\n",
                    rows.front().cell.beta, rows.front().cell.gamma,
                    fusion_mode_name(rows.front().cell.fusion).c_str(), rows.front().val_acc,
                    rows.front().val_lp);
    }
    if (!base.out_dir.empty()) {
        write_manifest(join_path(base.out_dir, "manifest.json"), "sweep", echo.dump(),
                       {{"train", base.train_path},
                        {"val", base.val_path},
                        {"features", base.features_path}});
    }
    return 0;
}

int cmd_report(const std::string& log_path, const std::string& out_dir) {
    nlohmann::json echo;
    echo["log"] = log_path;
    echo["out"] = out_dir;
    print_resolved("report", echo);

    std::string text = read_file(log_path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw DataError("train log is empty: " + log_path);
    std::vector<std::string> header;
    {
        std::stringstream hs(line);
        std::string col;
        while (std::getline(hs, col, ',')) header.push_back(col);
    }
    auto col_index = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        throw DataError("train log is missing column " + name);
    };
    std::size_t acc_col = col_index("val_acc");
    std::size_t lp_col = col_index("val_lp");
    std::vector<double> acc, lp;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ls(line);
        std::string field;
        while (std::getline(ls, field, ',')) fields.push_back(field);
        if (fields.size() != header.size()) {
            throw DataError("train log line " + std::to_string(line_no) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(header.size()));
        }
        acc.push_back(std::stod(fields[acc_col]));
        lp.push_back(std::stod(fields[lp_col]));
    }
    if (acc.empty()) throw DataError("train log has no epochs: " + log_path);

    fs::create_directories(out_dir);
    write_file(join_path(out_dir, "convergence.svg"), svg_convergence(acc, lp));
    write_manifest(join_path(out_dir, "manifest.json"), "report", echo.dump(),
                   {{"log", log_path}});
    std::cout << "wrote convergence chart for " << acc.size() << " epochs to " << out_dir << "\n";
    return 0;
}

}  // namespace

int run_cli(std::vector<std::string> args) {
    CLI::App app{"language-prior measurement and score-regularized training for VQA",
                 std::string(kToolName)};
    app.require_subcommand(1);

    // stats
    auto* stats_cmd = app.add_subcommand("stats", "answer-distribution report per question type");
    std::string st_train, st_val, st_out = ".", st_format = "native-jsonl", st_output = "csv";
    std::vector<std::string> st_preds;
    int st_top_k = 10;
    stats_cmd->add_option("--train", st_train, "training split")->required();
    stats_cmd->add_option("--val", st_val, "evaluated split (needed with --pred)");
    stats_cmd->add_option("--pred", st_preds, "prediction files (repeatable)");
    stats_cmd->add_option("--dataset-format", st_format, "native-jsonl or vqa-official");
    stats_cmd->add_option("--out", st_out, "output directory")->required();
    stats_cmd->add_option("--top-k", st_top_k, "answers per distribution");
    stats_cmd->add_option("--format", st_output, "csv or svg")
        ->check(CLI::IsMember({"csv", "svg"}));

    // gen
    auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic biased dataset");
    std::string gen_config, gen_out;
    std::optional<std::uint64_t> gen_seed;
    gen_cmd->add_option("--config", gen_config, "synth config json");
    gen_cmd->add_option("--seed", gen_seed, "override the config seed");
    gen_cmd->add_option("--out", gen_out, "output directory")->required();

    // predict
    auto* pred_cmd = app.add_subcommand("predict", "canned predictor strategies");
    std::string pr_strategy, pr_train, pr_val, pr_format = "native-jsonl", pr_out;
    std::uint64_t pr_seed = 7;
    pred_cmd->add_option("--strategy", pr_strategy, "oracle, prior-follower or uniform-random")
        ->required();
    pred_cmd->add_option("--train", pr_train, "training split (for type statistics)")->required();
    pred_cmd->add_option("--val", pr_val, "split to predict on")->required();
    pred_cmd->add_option("--dataset-format", pr_format, "native-jsonl or vqa-official");
    pred_cmd->add_option("--seed", pr_seed, "seed for uniform-random");
    pred_cmd->add_option("--out", pr_out, "predictions jsonl path")->required();

    // lp
    auto* lp_cmd = app.add_subcommand("lp", "language-prior score of a prediction file");
    std::string lp_train, lp_val, lp_pred, lp_format = "native-jsonl";
    std::string lp_scale = "percent", lp_correct = "canonical", lp_out;
    lp_cmd->add_option("--train", lp_train, "training split")->required();
    lp_cmd->add_option("--val", lp_val, "evaluated split")->required();
    lp_cmd->add_option("--pred", lp_pred, "predictions jsonl")->required();
    lp_cmd->add_option("--dataset-format", lp_format, "native-jsonl or vqa-official");
    lp_cmd->add_option("--scale", lp_scale, "unit or percent")
        ->check(CLI::IsMember({"unit", "percent"}));
    lp_cmd->add_option("--correctness", lp_correct, "canonical or consensus")
        ->check(CLI::IsMember({"canonical", "consensus"}));
    lp_cmd->add_option("--out", lp_out, "directory for lp csv reports");

    // acc
    auto* acc_cmd = app.add_subcommand("acc", "consensus accuracy of a prediction file");
    std::string ac_val, ac_pred, ac_format = "native-jsonl", ac_out;
    acc_cmd->add_option("--val", ac_val, "evaluated split")->required();
    acc_cmd->add_option("--pred", ac_pred, "predictions jsonl")->required();
    acc_cmd->add_option("--dataset-format", ac_format, "native-jsonl or vqa-official");
    acc_cmd->add_option("--out", ac_out, "directory for accuracy csv reports");

    // shared train-config flags
    std::string tr_config, tr_train, tr_val, tr_features, tr_out;
    std::optional<std::uint64_t> tr_seed;
    auto add_train_flags = [&](CLI::App* cmd) {
        cmd->add_option("--config", tr_config, "train config json");
        cmd->add_option("--train", tr_train, "training split (overrides config)");
        cmd->add_option("--val", tr_val, "validation split (overrides config)");
        cmd->add_option("--features", tr_features, "features container (overrides config)");
        cmd->add_option("--out", tr_out, "output directory (overrides config)");
        cmd->add_option("--seed", tr_seed, "seed (overrides config)");
    };

    auto* train_cmd = app.add_subcommand("train", "train the attentional model");
    add_train_flags(train_cmd);

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    std::string ev_checkpoint, ev_split, ev_out;
    add_train_flags(eval_cmd);
    eval_cmd->add_option("--checkpoint", ev_checkpoint, "checkpoint file")->required();
    eval_cmd->add_option("--split", ev_split, "split to evaluate (defaults to the config val)");
    eval_cmd->add_option("--eval-out", ev_out, "directory for predictions and metric csvs");

    auto* sweep_cmd = app.add_subcommand("sweep", "grid sweep over beta, gamma and fusion");
    std::string sw_betas = "0.001,0.01,0.1,1,10,100", sw_gammas = "0.2", sw_fusions = "mul,add,con";
    add_train_flags(sweep_cmd);
    sweep_cmd->add_option("--betas", sw_betas, "comma list of beta values");
    sweep_cmd->add_option("--gammas", sw_gammas, "comma list of gamma values");
    sweep_cmd->add_option("--fusions", sw_fusions, "comma list of fusion modes");

    auto* report_cmd = app.add_subcommand("report", "render a convergence chart from a train log");
    std::string rp_log, rp_out;
    report_cmd->add_option("--log", rp_log, "trainlog.csv from a training run")->required();
    report_cmd->add_option("--out", rp_out, "output directory")->required();

    std::vector<const char*> argv;
    argv.push_back(kToolName);
    for (const std::string& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (stats_cmd->parsed()) {
            return cmd_stats(st_train, st_val, st_preds, st_format, st_out, st_top_k, st_output);
        }
        if (gen_cmd->parsed()) return cmd_gen(gen_config, gen_seed, gen_out);
        if (pred_cmd->parsed()) {
            return cmd_predict(pr_strategy, pr_train, pr_val, pr_format, pr_seed, pr_out);
        }
        if (lp_cmd->parsed()) {
            return cmd_lp(lp_train, lp_val, lp_pred, lp_format, lp_scale, lp_correct, lp_out);
        }
        if (acc_cmd->parsed()) return cmd_acc(ac_val, ac_pred, ac_format, ac_out);
        if (train_cmd->parsed()) {
            return cmd_train(load_train_config(tr_config, tr_train, tr_val, tr_features, tr_out,
                                               tr_seed));
        }
        if (eval_cmd->parsed()) {
            TrainConfig config =
                load_train_config(tr_config, tr_train, tr_val, tr_features, "", tr_seed);
            std::string split = ev_split.empty() ? config.val_path : ev_split;
            if (split.empty()) throw std::invalid_argument("eval needs --split or a config val");
            return cmd_eval(config, ev_checkpoint, split, ev_out);
        }
        if (sweep_cmd->parsed()) {
            return cmd_sweep(load_train_config(tr_config, tr_train, tr_val, tr_features, tr_out,
                                               tr_seed),
                             sw_betas, sw_gammas, sw_fusions);
        }
        if (report_cmd->parsed()) return cmd_report(rp_log, rp_out);
        std::cerr << "error: no subcommand\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace vpl
