// End-to-end exercises of the command-line tool; every test drives the real
// binary through a shell and inspects exit codes, stdout, and output files.

#include <algorithm>
#include <cstdlib>
#include <sstream>

#include "doctest.h"

#include "chronoqa/checkpoint.hpp"
#include "chronoqa/config.hpp"
#include "chronoqa/tkg.hpp"
#include "testutil.hpp"

namespace {

struct RunResult {
    int exit_code;
    std::string out;
    std::string err;
};

RunResult run_cli(const std::string& args, const testutil::TempDir& tmp,
                  const std::string& tag) {
    const std::string out_file = tmp.file("stdout_" + tag);
    const std::string err_file = tmp.file("stderr_" + tag);
    const std::string cmd =
        std::string(CHRONOQA_CLI_PATH) + " " + args + " > " + out_file + " 2> " + err_file;
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WEXITSTATUS(status);
    r.out = testutil::read_file(out_file);
    r.err = testutil::read_file(err_file);
    return r;
}

// A config small enough that the whole synth/pretrain/train/eval/ask chain
// stays under a few seconds.
std::string tiny_config(const testutil::TempDir& tmp) {
    const std::string path = tmp.file("run.json");
    testutil::write_file(path, R"({
        "seed": 3,
        "world": {"n_people": 6, "n_positions": 2, "year_min": 1900, "year_max": 1930,
                   "mean_tenure": 5.0, "questions_per_template": 20},
        "pretrain": {"dim": 16, "epochs": 30, "batch_size": 32},
        "train": {"epochs": 3, "batch_size": 16,
                   "dims": {"d": 16, "d_b": 16, "layers": 1, "heads": 2, "ff_mult": 2, "k_max": 16}}
    })");
    return path;
}

double csv_weighted_mean(const std::string& csv, long* total_out) {
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);  // header
    double weighted = 0.0;
    long total = 0;
    while (std::getline(lines, line)) {
        const size_t c1 = line.find(',');
        const size_t c2 = line.find(',', c1 + 1);
        const long count = std::stol(line.substr(c1 + 1, c2 - c1 - 1));
        const double rate = std::stod(line.substr(c2 + 1));
        weighted += static_cast<double>(count) * rate;
        total += count;
    }
    if (total_out) *total_out = total;
    return total == 0 ? 0.0 : weighted / static_cast<double>(total);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("full pipeline chain through the binary") {
    testutil::TempDir tmp("cli");
    const std::string config = tiny_config(tmp);
    const std::string base = "--config " + config + " --out " + tmp.file("out");

    // --- synth ---
    auto synth = run_cli("synth " + base, tmp, "synth");
    REQUIRE(synth.exit_code == 0);
    CHECK(synth.out.find("questions:") != std::string::npos);
    CHECK(synth.out.find("explicit") != std::string::npos);
    CHECK(!testutil::read_file(tmp.file("out/kg.tsv")).empty());
    CHECK(!testutil::read_file(tmp.file("out/questions_train.jsonl")).empty());
    CHECK(!testutil::read_file(tmp.file("out/questions_test.jsonl")).empty());
    CHECK(!testutil::read_file(tmp.file("out/effective_config.json")).empty());

    // Same seed: byte-identical outputs.
    auto synth2 = run_cli("synth --config " + config + " --out " + tmp.file("out2"), tmp, "s2");
    REQUIRE(synth2.exit_code == 0);
    CHECK(testutil::read_file(tmp.file("out/kg.tsv")) ==
          testutil::read_file(tmp.file("out2/kg.tsv")));
    CHECK(testutil::read_file(tmp.file("out/questions_train.jsonl")) ==
          testutil::read_file(tmp.file("out2/questions_train.jsonl")));

    // --- pretrain ---
    auto pre = run_cli("pretrain " + base, tmp, "pretrain");
    REQUIRE(pre.exit_code == 0);
    const std::string pre_csv = testutil::read_file(tmp.file("out/pretrain_loss.csv"));
    CHECK(std::count(pre_csv.begin(), pre_csv.end(), '\n') == 31);  // header + 30 epochs
    CHECK(chronoqa::load_checkpoint(tmp.file("out/tkge.ckpt")).tensors.size() == 4);

    // --- train ---
    auto train = run_cli("train " + base, tmp, "train");
    REQUIRE(train.exit_code == 0);
    CHECK(train.out.find("best dev hits@1") != std::string::npos);
    CHECK(!testutil::read_file(tmp.file("out/model.ckpt")).empty());
    CHECK(!testutil::read_file(tmp.file("out/dev_loss_curve.csv")).empty());

    // --- eval ---
    auto eval = run_cli("eval " + base, tmp, "eval");
    REQUIRE(eval.exit_code == 0);
    CHECK(eval.out.find("filter=hard") != std::string::npos);
    CHECK(eval.out.find("filter=off") != std::string::npos);
    CHECK(eval.out.find("explicit") != std::string::npos);

    // Overall equals the count-weighted mean of the category rates.
    for (const char* mode : {"hard", "off"}) {
        long total = 0;
        const double from_csv = csv_weighted_mean(
            testutil::read_file(tmp.file(std::string("out/eval_") + mode +
                                         "_hits_by_category.csv")),
            &total);
        REQUIRE(total > 0);
        const std::string needle = std::string("filter=") + mode + " overall hits@1 ";
        const size_t at = eval.out.find(needle);
        REQUIRE(at != std::string::npos);
        const double printed = std::stod(eval.out.substr(at + needle.size()));
        CHECK(std::abs(printed - from_csv) <= 1e-12);
    }

    // Repeated runs are identical.
    auto eval2 = run_cli("eval " + base, tmp, "eval2");
    CHECK(eval2.out == eval.out);

    // --- ask ---
    const auto kg = chronoqa::load_tkg(tmp.file("out/kg.tsv"));
    const std::string position = kg.entities().name(kg.facts()[0].object);
    std::string spaced = position;
    std::replace(spaced.begin(), spaced.end(), '_', ' ');
    const int pos_tokens = 1 + static_cast<int>(std::count(position.begin(), position.end(), '_'));
    const int year = kg.facts()[0].t_start;
    std::ostringstream ann;
    ann << "{\"entity_spans\":[[3," << 3 + pos_tokens << ",\"" << position << "\"]],"
        << "\"time_spans\":[[" << 4 + pos_tokens << "," << 5 + pos_tokens << ",\"" << year
        << "\"]]}";
    const std::string text = "who was the " + spaced + " in " + std::to_string(year);

    auto ask = run_cli("ask " + base + " --text \"" + text + "\" --annotations '" + ann.str() +
                           "' --top 3",
                       tmp, "ask");
    REQUIRE(ask.exit_code == 0);
    CHECK(ask.out.find("p_time") != std::string::npos);
    CHECK(ask.out.find("1. ") != std::string::npos);

    auto ask_one = run_cli("ask " + base + " --text \"" + text + "\" --annotations '" +
                               ann.str() + "' --top 1",
                           tmp, "ask1");
    REQUIRE(ask_one.exit_code == 0);
    CHECK(ask_one.out.find("1. ") != std::string::npos);
    CHECK(ask_one.out.find("2. ") == std::string::npos);

    auto ask_bad =
        run_cli("ask " + base + " --text \"who was x\" --annotations '{oops'", tmp, "askbad");
    CHECK(ask_bad.exit_code == 2);
    auto ask_unknown = run_cli("ask " + base +
                                   " --text \"who was the nobody\" --annotations "
                                   "'{\"entity_spans\":[[3,4,\"nobody_at_all\"]]}'",
                               tmp, "askunk");
    CHECK(ask_unknown.exit_code == 2);
    CHECK(ask_unknown.err.find("nearest") != std::string::npos);

    // --- flags ---
    auto with_unknown_flag = run_cli("train " + base + " --no-such-flag", tmp, "flag");
    CHECK(with_unknown_flag.exit_code == 2);

    auto lambda0 = run_cli("train " + base + " --lambda 0", tmp, "l0");
    REQUIRE(lambda0.exit_code == 0);
    const std::string curve = testutil::read_file(tmp.file("out/dev_loss_curve.csv"));
    std::istringstream lines(curve);
    std::string line;
    std::getline(lines, line);
    int rows = 0;
    while (std::getline(lines, line)) {
        // With lambda 0 the joint loss equals the candidate loss column.
        const size_t c1 = line.find(',');
        const size_t c2 = line.find(',', c1 + 1);
        const size_t c3 = line.find(',', c2 + 1);
        const double total = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
        const double bce = std::stod(line.substr(c2 + 1, c3 - c2 - 1));
        CHECK(total == doctest::Approx(bce).epsilon(1e-12));
        ++rows;
    }
    CHECK(rows == 3);

    auto frozen = run_cli("train " + base + " --freeze-tkge", tmp, "tf");
    REQUIRE(frozen.exit_code == 0);
    const auto pre_ckpt = chronoqa::load_checkpoint(tmp.file("out/tkge.ckpt"));
    const auto model_ckpt = chronoqa::load_checkpoint(tmp.file("out/model.ckpt"));
    const auto& before = pre_ckpt.require("tkge.entities");
    const auto& after = model_ckpt.require("tkge.entities");
    REQUIRE(before.size() == after.size());
    for (size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
}

TEST_CASE("infeasible synth config exits with code 2") {
    testutil::TempDir tmp("cli_bad");
    testutil::write_file(tmp.file("bad.json"), R"({"world": {"n_people": 1}})");
    auto r = run_cli("synth --config " + tmp.file("bad.json") + " --out " + tmp.file("out"), tmp,
                     "bad");
    CHECK(r.exit_code == 2);
    CHECK(!r.err.empty());
}

TEST_CASE("missing inputs exit with code 2") {
    testutil::TempDir tmp("cli_missing");
    auto r = run_cli("eval --out " + tmp.file("nowhere"), tmp, "missing");
    CHECK(r.exit_code == 2);
}

TEST_CASE("unknown subcommands are usage errors") {
    testutil::TempDir tmp("cli_usage");
    auto r = run_cli("frobnicate", tmp, "usage");
    CHECK(r.exit_code == 2);
}

}  // TEST_SUITE
