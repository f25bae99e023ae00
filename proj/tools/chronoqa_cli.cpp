// chronoqa: temporal knowledge-graph question answering over synthetic worlds.
//
// Subcommands: synth | pretrain | train | eval | ask
// Exit codes: 0 success, 2 usage/config/data error, 3 numeric training failure.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "chronoqa/checkpoint.hpp"
#include "chronoqa/config.hpp"
#include "chronoqa/pipeline.hpp"
#include "chronoqa/synth.hpp"

namespace {

using namespace chronoqa;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

std::string path_or(const std::string& configured, const std::string& out_dir,
                    const char* fallback) {
    return configured.empty() ? out_dir + "/" + fallback : configured;
}

CheckpointMeta make_meta(const RunConfig& config, const TemporalKG& kg,
                         const std::vector<std::string>& token_vocab) {
    CheckpointMeta meta;
    meta.seed = config.seed;
    meta.config_json = run_config_to_json(config);
    meta.token_vocab = token_vocab;
    meta.entity_vocab = kg.entities().names();
    meta.relation_vocab = kg.relations().names();
    for (Year y : kg.years()) meta.time_vocab.push_back(y);
    return meta;
}

void check_vocab_consistency(const LoadedCheckpoint& ckpt, const TemporalKG& kg) {
    if (ckpt.meta.entity_vocab != kg.entities().names() ||
        ckpt.meta.relation_vocab != kg.relations().names()) {
        throw ContractError("checkpoint was trained against a different knowledge graph");
    }
    std::vector<int> years;
    for (Year y : kg.years()) years.push_back(y);
    if (ckpt.meta.time_vocab != years) {
        throw ContractError("checkpoint timestamp vocabulary disagrees with the knowledge graph");
    }
}

ModelDims dims_from_checkpoint(const LoadedCheckpoint& ckpt) {
    ModelDims dims;
    const json config = json::parse(ckpt.meta.config_json);
    const json& d = config.at("train").at("dims");
    dims.d = d.at("d").get<int>();
    dims.d_b = d.at("d_b").get<int>();
    dims.layers = d.at("layers").get<int>();
    dims.heads = d.at("heads").get<int>();
    dims.ff_mult = d.at("ff_mult").get<int>();
    dims.k_max = d.at("k_max").get<int>();
    return dims;
}

int cmd_synth(const RunConfig& config) {
    std::filesystem::create_directories(config.out_dir);
    write_effective_config(config, config.out_dir);

    TemporalKG kg = generate_world(config.world);
    const auto generated = generate_questions(kg, config.world);
    const SynthDataset data = split_dataset(generated);

    save_tkg(kg, path_or(config.paths.kg, config.out_dir, "kg.tsv"));
    save_questions(data.train, kg,
                   path_or(config.paths.questions_train, config.out_dir, "questions_train.jsonl"));
    save_questions(data.dev, kg,
                   path_or(config.paths.questions_dev, config.out_dir, "questions_dev.jsonl"));
    save_questions(data.test, kg,
                   path_or(config.paths.questions_test, config.out_dir, "questions_test.jsonl"));

    std::map<std::string, int> counts;
    for (const auto& g : generated) counts[category_name(g.instance.category)] += 1;
    std::cout << "world: " << kg.facts().size() << " facts, " << kg.entities().size()
              << " entities, " << kg.num_timestamps() << " timestamps\n";
    std::cout << "questions: " << generated.size() << " total (train " << data.train.size()
              << ", dev " << data.dev.size() << ", test " << data.test.size() << ")\n";
    for (const auto& [category, count] : counts) {
        std::cout << "  " << category << ": " << count << "\n";
    }
    return kExitOk;
}

int cmd_pretrain(const RunConfig& config) {
    std::filesystem::create_directories(config.out_dir);
    write_effective_config(config, config.out_dir);

    TemporalKG kg = load_tkg(path_or(config.paths.kg, config.out_dir, "kg.tsv"));
    ParamStore store;
    PretrainReport report;
    pretrain(kg, config.pretrain, store, &report);

    const std::string ckpt_path =
        path_or(config.paths.pretrained_checkpoint, config.out_dir, "tkge.ckpt");
    save_checkpoint(store, make_meta(config, kg, {}), ckpt_path);

    {
        std::ofstream out(config.out_dir + "/pretrain_loss.csv");
        out << "epoch,loss\n";
        for (size_t e = 0; e < report.epoch_losses.size(); ++e) {
            out << e << ',' << report.epoch_losses[e] << '\n';
        }
    }
    std::cout << "pretrained " << store.scalar_count() << " parameters on "
              << kg.facts().size() << " facts\n";
    std::cout << "eval (" << report.eval_count << " quadruples): object hits@1 "
              << report.hits1_object << ", hits@10 " << report.hits10_object
              << "; subject hits@1 " << report.hits1_subject << ", hits@10 "
              << report.hits10_subject << "\n";
    std::cout << "checkpoint: " << ckpt_path << "\n";
    return kExitOk;
}

int cmd_train(const RunConfig& config, bool cold_start) {
    std::filesystem::create_directories(config.out_dir);
    write_effective_config(config, config.out_dir);

    TemporalKG kg = load_tkg(path_or(config.paths.kg, config.out_dir, "kg.tsv"));
    const auto train_questions = load_questions(
        path_or(config.paths.questions_train, config.out_dir, "questions_train.jsonl"), kg);
    const auto dev_questions = load_questions(
        path_or(config.paths.questions_dev, config.out_dir, "questions_dev.jsonl"), kg);

    TokenVocab vocab = TokenVocab::build(train_questions);
    ParamStore store;
    QaModel model = build_qa_model(store, config.train.dims, vocab, kg.entities().size(),
                                   kg.relations().size(), kg.num_timestamps(), config.train.seed);
    if (!cold_start) {
        const std::string pre_path =
            path_or(config.paths.pretrained_checkpoint, config.out_dir, "tkge.ckpt");
        LoadedCheckpoint pre = load_checkpoint(pre_path);
        check_vocab_consistency(pre, kg);
        restore_params(store, pre);
        std::cout << "initialized embedding tables from " << pre_path << "\n";
    }

    TrainResult result = train(kg, train_questions, dev_questions, model, store, config.train);

    const std::string ckpt_path =
        path_or(config.paths.model_checkpoint, config.out_dir, "model.ckpt");
    save_checkpoint(store, make_meta(config, kg, vocab.tokens()), ckpt_path);
    emit_report(result.final_dev_report, config.out_dir + "/dev_");

    std::cout << "trained " << config.train.epochs << " epochs on " << train_questions.size()
              << " questions (lambda " << config.train.lambda << ", filter "
              << filter_mode_name(config.train.filter_mode) << ")\n";
    std::cout << "best dev hits@1 " << result.best_dev_hits1 << " at epoch " << result.best_epoch
              << "\n";
    std::cout << "dev type accuracy " << result.final_dev_report.type_accuracy << "\n";
    std::cout << "checkpoint: " << ckpt_path << "\n";
    return kExitOk;
}

QaModel model_from_checkpoint(const LoadedCheckpoint& ckpt, const TemporalKG& kg,
                              ParamStore& store) {
    check_vocab_consistency(ckpt, kg);
    const ModelDims dims = dims_from_checkpoint(ckpt);
    TokenVocab vocab(ckpt.meta.token_vocab);
    QaModel model = build_qa_model(store, dims, vocab, kg.entities().size(),
                                   kg.relations().size(), kg.num_timestamps(), ckpt.meta.seed);
    restore_params(store, ckpt);
    return model;
}

int cmd_eval(const RunConfig& config) {
    std::filesystem::create_directories(config.out_dir);
    write_effective_config(config, config.out_dir);
    std::cout.precision(17);

    TemporalKG kg = load_tkg(path_or(config.paths.kg, config.out_dir, "kg.tsv"));
    const auto test_questions = load_questions(
        path_or(config.paths.questions_test, config.out_dir, "questions_test.jsonl"), kg);
    LoadedCheckpoint ckpt =
        load_checkpoint(path_or(config.paths.model_checkpoint, config.out_dir, "model.ckpt"));
    ParamStore store;
    QaModel model = model_from_checkpoint(ckpt, kg, store);

    for (FilterMode mode : {FilterMode::Hard, FilterMode::Off}) {
        EvalReport report = evaluate(model, kg, test_questions, mode);
        const std::string prefix =
            config.out_dir + "/eval_" + filter_mode_name(mode) + "_";
        emit_report(report, prefix);
        {
            std::ofstream out(prefix + "predictions.csv");
            out << "id,category,hit,p_time,prediction\n";
            for (const auto& qe : report.per_question) {
                const std::string name =
                    qe.prediction.kind == AnswerKind::Entity
                        ? kg.entities().name(qe.prediction.index)
                        : std::to_string(kg.year(qe.prediction.index));
                out << qe.id << ',' << category_name(qe.category) << ',' << qe.hit << ','
                    << qe.scores.p_time << ',' << name << '\n';
            }
        }
        std::cout << "filter=" << filter_mode_name(mode) << " overall hits@1 "
                  << report.hits1_overall << " over " << report.total << " questions, type acc "
                  << report.type_accuracy << "\n";
        for (const auto& [category, cell] : report.by_category) {
            std::cout << "  " << category << ": " << cell.rate() << " (" << cell.count << ")\n";
        }
        for (const auto& [bucket, cell] : report.by_entity_count) {
            std::cout << "  entities=" << bucket << ": " << cell.rate() << " (" << cell.count
                      << ")\n";
        }
    }
    return kExitOk;
}

// Nearest vocabulary names by edit distance, for the unknown-entity message.
std::vector<std::string> nearest_names(const std::vector<std::string>& names,
                                       const std::string& needle, size_t top) {
    auto edit_distance = [](const std::string& a, const std::string& b) {
        std::vector<size_t> prev(b.size() + 1), cur(b.size() + 1);
        for (size_t j = 0; j <= b.size(); ++j) prev[j] = j;
        for (size_t i = 1; i <= a.size(); ++i) {
            cur[0] = i;
            for (size_t j = 1; j <= b.size(); ++j) {
                const size_t sub = prev[j - 1] + (a[i - 1] != b[j - 1]);
                cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
            }
            std::swap(prev, cur);
        }
        return prev[b.size()];
    };
    std::vector<std::pair<size_t, std::string>> scored;
    for (const auto& name : names) scored.emplace_back(edit_distance(name, needle), name);
    std::sort(scored.begin(), scored.end());
    std::vector<std::string> out;
    for (size_t i = 0; i < std::min(top, scored.size()); ++i) out.push_back(scored[i].second);
    return out;
}

int cmd_ask(const RunConfig& config, const std::string& text, const std::string& annotations,
            int top_n) {
    TemporalKG kg = load_tkg(path_or(config.paths.kg, config.out_dir, "kg.tsv"));
    LoadedCheckpoint ckpt =
        load_checkpoint(path_or(config.paths.model_checkpoint, config.out_dir, "model.ckpt"));
    ParamStore store;
    QaModel model = model_from_checkpoint(ckpt, kg, store);

    QuestionInstance q;
    q.id = "ask";
    q.text = text;
    const auto with_cls = tokenize(text);
    q.tokens.assign(with_cls.begin() + 1, with_cls.end());

    json ann;
    try {
        ann = json::parse(annotations);
    } catch (const json::exception& e) {
        throw ParseError(std::string("ask: annotations are not valid JSON: ") + e.what());
    }
    try {
        for (const auto& span : ann.value("entity_spans", json::array())) {
            const std::string name = span.at(2).get<std::string>();
            const auto id = kg.entities().find(name);
            if (!id) {
                std::string message = "ask: unknown entity '" + name + "'; nearest:";
                for (const auto& near : nearest_names(kg.entities().names(), name, 3)) {
                    message += " " + near;
                }
                throw LookupError(message);
            }
            q.entity_spans.push_back({span.at(0).get<int>(), span.at(1).get<int>(), *id});
        }
        for (const auto& span : ann.value("time_spans", json::array())) {
            q.time_spans.push_back({span.at(0).get<int>(), span.at(1).get<int>(),
                                    kg.time_id(std::stoi(span.at(2).get<std::string>()))});
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("ask: malformed annotation spans: ") + e.what());
    }

    Tape tape;
    QuestionForward fwd = question_forward(tape, model, kg, q);
    const Tensor& ent = tape.value(fwd.entity_scores);
    const Tensor& tim = tape.value(fwd.time_scores);
    const double p_time = tape.value(fwd.p_time).item();

    struct Row {
        double score;
        std::string kind;
        std::string name;
    };
    std::vector<Row> rows;
    for (int i = 0; i < ent.rows(); ++i) {
        rows.push_back({ent.at(i, 0), "entity", kg.entities().name(i)});
    }
    for (int i = 0; i < tim.rows(); ++i) {
        rows.push_back({tim.at(i, 0), "timestamp", std::to_string(kg.year(i))});
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.score > b.score; });

    std::cout << "p_time " << p_time << " (answer type: "
              << (p_time > 0.5 ? "timestamp" : "entity") << ")\n";
    for (int i = 0; i < std::min<int>(top_n, static_cast<int>(rows.size())); ++i) {
        std::cout << (i + 1) << ". " << rows[static_cast<size_t>(i)].kind << " "
                  << rows[static_cast<size_t>(i)].name << " " << rows[static_cast<size_t>(i)].score
                  << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"temporal knowledge-graph question answering"};
    app.require_subcommand(1);

    std::string config_path;
    uint64_t seed_flag = 0;
    std::string out_flag;
    app.add_option("--config", config_path, "JSON config file");
    auto* seed_opt = app.add_option("--seed", seed_flag, "seed override for every stage");
    auto* out_opt = app.add_option("--out", out_flag, "output directory override");

    auto* synth = app.add_subcommand("synth", "generate a synthetic world and question splits");
    auto* pretrain_cmd = app.add_subcommand("pretrain", "link-prediction pretraining of the embeddings");
    auto* train_cmd = app.add_subcommand("train", "joint training of the full model");
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    auto* ask_cmd = app.add_subcommand("ask", "score one annotated question");
    for (CLI::App* sub : {synth, pretrain_cmd, train_cmd, eval_cmd, ask_cmd}) {
        sub->fallthrough();
    }

    double lambda_flag = -1.0;
    int epochs_flag = -1;
    std::string filter_flag;
    bool freeze_flag = false;
    bool ablation_flag = false;
    bool cold_start = false;
    auto* lambda_opt = train_cmd->add_option("--lambda", lambda_flag, "type-loss weight");
    auto* epochs_opt = train_cmd->add_option("--epochs", epochs_flag, "training epochs");
    auto* filter_opt = train_cmd->add_option("--filter-mode", filter_flag, "hard|off");
    train_cmd->add_flag("--freeze-tkge", freeze_flag, "do not update embedding tables");
    train_cmd->add_flag("--eam-ablation", ablation_flag,
                        "replace entity attention with first-entity selection");
    train_cmd->add_flag("--cold-start", cold_start, "skip the pretrained checkpoint");

    int pre_epochs_flag = -1;
    auto* pre_epochs_opt = pretrain_cmd->add_option("--epochs", pre_epochs_flag, "pretraining epochs");

    std::string ask_text, ask_annotations = "{}";
    int ask_top = 5;
    ask_cmd->add_option("--text", ask_text, "question text")->required();
    ask_cmd->add_option("--annotations", ask_annotations,
                        "JSON spans: {\"entity_spans\":[[begin,end,name]...],"
                        "\"time_spans\":[[begin,end,year]...]}");
    ask_cmd->add_option("--top", ask_top, "answers to print");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        RunConfig config =
            config_path.empty() ? chronoqa::default_run_config() : load_run_config(config_path);
        if (seed_opt->count() > 0) {
            config.seed = seed_flag;
            config.world.seed = seed_flag;
            config.pretrain.seed = seed_flag;
            config.train.seed = seed_flag;
        }
        if (out_opt->count() > 0) config.out_dir = out_flag;
        if (lambda_opt->count() > 0) config.train.lambda = lambda_flag;
        if (epochs_opt->count() > 0) config.train.epochs = epochs_flag;
        if (filter_opt->count() > 0) {
            config.train.filter_mode = filter_mode_from_name(filter_flag);
        }
        if (freeze_flag) config.train.freeze_tkge = true;
        if (ablation_flag) config.train.eam_ablation = true;
        if (pre_epochs_opt->count() > 0) config.pretrain.epochs = pre_epochs_flag;
        if (config.train.lambda < 0.0) throw ContractError("--lambda must be >= 0");

        if (synth->parsed()) return cmd_synth(config);
        if (pretrain_cmd->parsed()) return cmd_pretrain(config);
        if (train_cmd->parsed()) return cmd_train(config, cold_start);
        if (eval_cmd->parsed()) return cmd_eval(config);
        if (ask_cmd->parsed()) return cmd_ask(config, ask_text, ask_annotations, ask_top);
        return kExitConfig;
    } catch (const TrainingError& e) {
        std::cerr << "training failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
}
