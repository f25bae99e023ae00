#include "chronoqa/config.hpp"

#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "chronoqa/errors.hpp"

namespace chronoqa {

using nlohmann::json;

RunConfig default_run_config() {
    RunConfig c;
    c.world.seed = c.seed;
    c.pretrain.seed = c.seed;
    c.train.seed = c.seed;
    return c;
}

namespace {

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> known,
                         const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const char* k : known) {
            if (key == k) {
                ok = true;
                break;
            }
        }
        if (!ok) throw ContractError("config: unknown key '" + where + key + "'");
    }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

void read_dims(const json& obj, ModelDims& dims) {
    reject_unknown_keys(obj, {"d", "d_b", "layers", "heads", "ff_mult", "k_max"}, "train.dims.");
    read(obj, "d", dims.d);
    read(obj, "d_b", dims.d_b);
    read(obj, "layers", dims.layers);
    read(obj, "heads", dims.heads);
    read(obj, "ff_mult", dims.ff_mult);
    read(obj, "k_max", dims.k_max);
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open '" + path + "'");
    json obj;
    try {
        obj = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError("config: " + path + ": " + e.what());
    }

    RunConfig c = default_run_config();
    reject_unknown_keys(obj, {"seed", "out_dir", "world", "pretrain", "train", "paths"}, "");
    read(obj, "seed", c.seed);
    read(obj, "out_dir", c.out_dir);
    // The top-level seed is the default for every stage.
    c.world.seed = c.seed;
    c.pretrain.seed = c.seed;
    c.train.seed = c.seed;

    if (obj.contains("world")) {
        const json& w = obj.at("world");
        reject_unknown_keys(w,
                            {"seed", "n_people", "n_positions", "year_min", "year_max",
                             "mean_tenure", "questions_per_template"},
                            "world.");
        read(w, "seed", c.world.seed);
        read(w, "n_people", c.world.n_people);
        read(w, "n_positions", c.world.n_positions);
        read(w, "year_min", c.world.year_min);
        read(w, "year_max", c.world.year_max);
        read(w, "mean_tenure", c.world.mean_tenure);
        read(w, "questions_per_template", c.world.questions_per_template);
    }
    if (obj.contains("pretrain")) {
        const json& p = obj.at("pretrain");
        reject_unknown_keys(p,
                            {"seed", "dim", "epochs", "batch_size", "learning_rate",
                             "final_learning_rate", "holdout_fraction", "nuclear_norm_weight", "rescale_tables", "rescale_norm"},
                            "pretrain.");
        read(p, "seed", c.pretrain.seed);
        read(p, "dim", c.pretrain.dim);
        read(p, "epochs", c.pretrain.epochs);
        read(p, "batch_size", c.pretrain.batch_size);
        read(p, "learning_rate", c.pretrain.learning_rate);
        read(p, "final_learning_rate", c.pretrain.final_learning_rate);
        read(p, "holdout_fraction", c.pretrain.holdout_fraction);
        read(p, "nuclear_norm_weight", c.pretrain.nuclear_norm_weight);
        read(p, "rescale_tables", c.pretrain.rescale_tables);
        read(p, "rescale_norm", c.pretrain.rescale_norm);
    }
    if (obj.contains("train")) {
        const json& t = obj.at("train");
        reject_unknown_keys(t,
                            {"seed", "lambda", "epochs", "batch_size", "learning_rate",
                             "filter_mode", "freeze_tkge", "tkge_lr_scale", "eam_ablation", "dims"},
                            "train.");
        read(t, "seed", c.train.seed);
        read(t, "lambda", c.train.lambda);
        read(t, "epochs", c.train.epochs);
        read(t, "batch_size", c.train.batch_size);
        read(t, "learning_rate", c.train.learning_rate);
        if (t.contains("filter_mode")) {
            c.train.filter_mode = filter_mode_from_name(t.at("filter_mode").get<std::string>());
        }
        read(t, "freeze_tkge", c.train.freeze_tkge);
        read(t, "tkge_lr_scale", c.train.tkge_lr_scale);
        read(t, "eam_ablation", c.train.eam_ablation);
        if (t.contains("dims")) read_dims(t.at("dims"), c.train.dims);
    }
    if (obj.contains("paths")) {
        const json& p = obj.at("paths");
        reject_unknown_keys(p,
                            {"kg", "questions_train", "questions_dev", "questions_test",
                             "pretrained_checkpoint", "model_checkpoint"},
                            "paths.");
        read(p, "kg", c.paths.kg);
        read(p, "questions_train", c.paths.questions_train);
        read(p, "questions_dev", c.paths.questions_dev);
        read(p, "questions_test", c.paths.questions_test);
        read(p, "pretrained_checkpoint", c.paths.pretrained_checkpoint);
        read(p, "model_checkpoint", c.paths.model_checkpoint);
    }
    if (c.train.lambda < 0.0) throw ContractError("config: train.lambda must be >= 0");
    return c;
}

std::string run_config_to_json(const RunConfig& c) {
    json obj;
    obj["seed"] = c.seed;
    obj["out_dir"] = c.out_dir;
    obj["world"] = {{"seed", c.world.seed},
                    {"n_people", c.world.n_people},
                    {"n_positions", c.world.n_positions},
                    {"year_min", c.world.year_min},
                    {"year_max", c.world.year_max},
                    {"mean_tenure", c.world.mean_tenure},
                    {"questions_per_template", c.world.questions_per_template}};
    obj["pretrain"] = {{"seed", c.pretrain.seed},
                       {"dim", c.pretrain.dim},
                       {"epochs", c.pretrain.epochs},
                       {"batch_size", c.pretrain.batch_size},
                       {"learning_rate", c.pretrain.learning_rate},
                       {"final_learning_rate", c.pretrain.final_learning_rate},
                       {"holdout_fraction", c.pretrain.holdout_fraction},
                       {"nuclear_norm_weight", c.pretrain.nuclear_norm_weight},
                       {"rescale_tables", c.pretrain.rescale_tables},
                       {"rescale_norm", c.pretrain.rescale_norm}};
    obj["train"] = {{"seed", c.train.seed},
                    {"lambda", c.train.lambda},
                    {"epochs", c.train.epochs},
                    {"batch_size", c.train.batch_size},
                    {"learning_rate", c.train.learning_rate},
                    {"filter_mode", filter_mode_name(c.train.filter_mode)},
                    {"freeze_tkge", c.train.freeze_tkge},
                    {"tkge_lr_scale", c.train.tkge_lr_scale},
                    {"eam_ablation", c.train.eam_ablation},
                    {"dims",
                     {{"d", c.train.dims.d},
                      {"d_b", c.train.dims.d_b},
                      {"layers", c.train.dims.layers},
                      {"heads", c.train.dims.heads},
                      {"ff_mult", c.train.dims.ff_mult},
                      {"k_max", c.train.dims.k_max}}}};
    obj["paths"] = {{"kg", c.paths.kg},
                    {"questions_train", c.paths.questions_train},
                    {"questions_dev", c.paths.questions_dev},
                    {"questions_test", c.paths.questions_test},
                    {"pretrained_checkpoint", c.paths.pretrained_checkpoint},
                    {"model_checkpoint", c.paths.model_checkpoint}};
    return obj.dump(2) + "\n";
}

void write_effective_config(const RunConfig& config, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const std::string path = dir + "/effective_config.json";
    std::ofstream out(path);
    if (!out) throw IoError("config: cannot write '" + path + "'");
    out << run_config_to_json(config);
}

}  // namespace chronoqa
