// Command-line entry point for the exercise-video pipeline: data
// preparation, training, fine-tuning, evaluation, logit ensembling, the
// channel-ratio ablation, the progressive expansion search, and report
// aggregation. Every subcommand echoes its effective configuration to the
// output directory so a run is reproducible from that file alone.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "json.hpp"

#include "exnet/core/kernels.hpp"
#include "exnet/core/log.hpp"
#include "exnet/data/dataset.hpp"
#include "exnet/data/prepare.hpp"
#include "exnet/ensemble/ensemble.hpp"
#include "exnet/metrics/metrics.hpp"
#include "exnet/models/x3d.hpp"
#include "exnet/nn/checkpoint.hpp"
#include "exnet/nn/network.hpp"
#include "exnet/search/expand_search.hpp"
#include "exnet/train/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace exnet;

namespace {

// ---------------------------------------------------------------------------
// Effective configuration
// ---------------------------------------------------------------------------

json default_config_betas() {
    json out = json::array();
    for (int64_t v : train::default_inverse_betas()) out.push_back(v);
    return out;
}

// Every CLI flag has a config-file equivalent under these keys; flags override
// the file. The merged result is echoed to <out>/config.json.
json default_config() {
    return {
        {"seed", 0},
        {"deterministic", false},
        {"data",
         {{"manifest", ""},
          {"dataset_root", ""},
          {"taxonomy", data::default_asset_path("taxonomy.json")},
          {"muscle_map", data::default_asset_path("muscle_map.json")},
          {"frames", 32},
          {"size", 256},
          {"cache", false},
          {"train_split", "train"},
          {"val_split", "val"},
          {"eval_split", "test"}}},
        {"network", {{"arch", "x3d_m"}, {"config", json::object()}}},
        {"train", train::TrainConfig{}.to_json()},
        {"ensemble", {{"x_dump", ""}, {"s_dump", ""}, {"weights", json::array()}}},
        {"betas", default_config_betas()},
        {"expand",
         {{"targets", json::array()},
          {"relative", false},
          {"tolerance", 0.1},
          {"probe_epochs", 1}}},
        {"report", {{"runs", json::array()}}},
    };
}

json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config error: cannot open config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("config error: '" + path + "' is not valid JSON: " + e.what());
    }
    if (!j.is_object())
        throw std::runtime_error("config error: '" + path + "' must hold a JSON object");
    return j;
}

void write_json_file(const std::string& path, const json& j) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
        out << j.dump(2) << "\n";
    }
    fs::rename(tmp, path);
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << text;
}

// Prepares the run directory, echoes the effective config, and mirrors the
// log there.
void open_run_dir(const std::string& out, const std::string& subcommand, json cfg) {
    fs::create_directories(out);
    set_log_file((fs::path(out) / "log.txt").string());
    cfg["subcommand"] = subcommand;
    write_json_file((fs::path(out) / "config.json").string(), cfg);
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

struct DataBundle {
    data::Taxonomy taxonomy;
    data::MuscleMap muscle_map;
    data::Manifest manifest;
    std::string root;
    data::PreprocessOptions opts;
    bool cache = false;
};

DataBundle load_data(const json& d) {
    const std::string manifest_path = d.at("manifest").get<std::string>();
    const std::string root = d.at("dataset_root").get<std::string>();
    if (manifest_path.empty())
        throw std::runtime_error("config error: data.manifest is required (run prepare-data)");
    if (root.empty()) throw std::runtime_error("config error: data.dataset_root is required");
    DataBundle b;
    b.taxonomy = data::Taxonomy::load(d.at("taxonomy").get<std::string>());
    b.muscle_map = data::MuscleMap::load(d.at("muscle_map").get<std::string>());
    b.manifest = data::Manifest::load_csv(manifest_path);
    b.root = root;
    b.opts.frames = d.at("frames").get<int64_t>();
    b.opts.size = d.at("size").get<int64_t>();
    b.cache = d.at("cache").get<bool>();
    return b;
}

data::ClipDataset make_split(const DataBundle& b, const std::string& split) {
    data::ClipDataset ds(b.manifest, b.root, b.taxonomy, b.muscle_map, b.opts, split);
    if (b.cache && ds.size() > 0) ds.cache_frames();
    return ds;
}

std::vector<double> parse_number_list(const std::string& text, const std::string& flag) {
    std::vector<double> out;
    std::string token;
    std::istringstream in(text);
    while (std::getline(in, token, ',')) {
        try {
            out.push_back(std::stod(token));
        } catch (const std::exception&) {
            throw std::runtime_error("config error: " + flag + " expects comma-separated numbers, got '" +
                                     text + "'");
        }
    }
    if (out.empty())
        throw std::runtime_error("config error: " + flag + " expects at least one number");
    return out;
}

// Table emission shared by evaluate/ensemble/ablate/report: one header plus
// one row per (name, report) pair, in input order.
struct TableRows {
    std::string task;  // "EC" | "MGAP"
    std::vector<std::pair<std::string, json>> rows;
};

std::string rows_markdown(const TableRows& t) {
    std::string out = (t.task == "EC" ? metrics::EcReport::table_header_markdown()
                                      : metrics::MgapReport::table_header_markdown()) +
                      "\n";
    for (const auto& [name, rep] : t.rows)
        out += (t.task == "EC" ? metrics::EcReport::from_json(rep).table_row_markdown(name)
                               : metrics::MgapReport::from_json(rep).table_row_markdown(name)) +
               "\n";
    return out;
}

std::string rows_csv(const TableRows& t) {
    std::string out = (t.task == "EC" ? metrics::EcReport::table_header_csv()
                                      : metrics::MgapReport::table_header_csv()) +
                      "\n";
    for (const auto& [name, rep] : t.rows)
        out += (t.task == "EC" ? metrics::EcReport::from_json(rep).table_row_csv(name)
                               : metrics::MgapReport::from_json(rep).table_row_csv(name)) +
               "\n";
    return out;
}

void emit_tables(const std::string& out_dir, const std::vector<TableRows>& tables) {
    std::string md, csv;
    for (const auto& t : tables) {
        if (t.rows.empty()) continue;
        if (!md.empty()) {
            md += "\n";
            csv += "\n";
        }
        md += rows_markdown(t);
        csv += rows_csv(t);
    }
    write_text_file((fs::path(out_dir) / "report.md").string(), md);
    write_text_file((fs::path(out_dir) / "report.csv").string(), csv);
    std::cout << md;
}

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

int run_prepare(const json& cfg, const std::string& out) {
    const json& d = cfg.at("data");
    const auto taxonomy = data::Taxonomy::load(d.at("taxonomy").get<std::string>());
    const auto muscle_map = data::MuscleMap::load(d.at("muscle_map").get<std::string>());
    const auto result =
        data::prepare_dataset(d.at("dataset_root").get<std::string>(), taxonomy, muscle_map,
                              cfg.at("seed").get<uint64_t>(), out);
    const int64_t total = result.counts.train + result.counts.val + result.counts.test;
    std::cout << "clips: " << total << " (train " << result.counts.train << ", val "
              << result.counts.val << ", test " << result.counts.test << ")\n"
              << "manifest: " << result.manifest_path << "\n"
              << "summary: " << result.summary_path << "\n";
    return 0;
}

// Evaluates a checkpoint on one split; writes metrics.json + logits.jsonl.
train::EvalResult evaluate_and_emit(nn::Network& net, const data::ClipDataset& split,
                                    int64_t batch_size, const std::string& out,
                                    const std::string& row_name) {
    train::EvalResult ev = train::evaluate(net, split, batch_size);
    write_json_file((fs::path(out) / "metrics.json").string(), ev.metrics_json());
    ensemble::write_logit_dump((fs::path(out) / "logits.jsonl").string(), ev.dump);
    const json rep = ev.task == "EC" ? ev.ec.to_json() : ev.mgap.to_json();
    emit_tables(out, {TableRows{ev.task, {{row_name, rep}}}});
    return ev;
}

int run_train(const json& cfg, const std::string& out) {
    const DataBundle bundle = load_data(cfg.at("data"));
    data::ClipDataset train_split = make_split(bundle, cfg.at("data").at("train_split"));
    data::ClipDataset val_split = make_split(bundle, cfg.at("data").at("val_split"));

    const json& net_cfg = cfg.at("network");
    auto net = nn::build_network(net_cfg.at("arch").get<std::string>(), net_cfg.at("config"));
    const auto tcfg = train::TrainConfig::from_json(cfg.at("train"));
    const train::RunRecord rec = train::train(*net, train_split, val_split, tcfg, out);

    nn::LoadedCheckpoint best = nn::load_checkpoint(rec.checkpoint_path);
    evaluate_and_emit(*best.network, val_split, tcfg.batch_size, out,
                      net->arch_name() + " (" + cfg.at("data").at("val_split").get<std::string>() +
                          ")");
    return 0;
}

int run_finetune(const json& cfg, const std::string& out) {
    const std::string ckpt = cfg.at("train").at("pretrained_checkpoint").get<std::string>();
    if (ckpt.empty())
        throw std::runtime_error(
            "config error: finetune needs --checkpoint (the classification checkpoint to start "
            "from)");
    const DataBundle bundle = load_data(cfg.at("data"));
    data::ClipDataset train_split = make_split(bundle, cfg.at("data").at("train_split"));
    data::ClipDataset val_split = make_split(bundle, cfg.at("data").at("val_split"));

    auto tcfg = train::TrainConfig::from_json(cfg.at("train"));
    const train::FineTuneResult ft = train::fine_tune(ckpt, train_split, val_split, tcfg, out);

    nn::LoadedCheckpoint best = nn::load_checkpoint(ft.record.checkpoint_path);
    evaluate_and_emit(*best.network, val_split, tcfg.batch_size, out,
                      ft.network->arch_name() + " (" +
                          cfg.at("data").at("val_split").get<std::string>() + ")");
    return 0;
}

int run_evaluate(const json& cfg, const std::string& out) {
    const std::string ckpt = cfg.at("train").at("pretrained_checkpoint").get<std::string>();
    if (ckpt.empty())
        throw std::runtime_error("config error: evaluate needs --checkpoint");
    const DataBundle bundle = load_data(cfg.at("data"));
    const std::string split_name = cfg.at("data").at("eval_split").get<std::string>();
    data::ClipDataset split = make_split(bundle, split_name);

    nn::LoadedCheckpoint loaded = nn::load_checkpoint(ckpt);
    evaluate_and_emit(*loaded.network, split,
                      train::TrainConfig::from_json(cfg.at("train")).batch_size, out,
                      loaded.network->arch_name() + " (" + split_name + ")");
    return 0;
}

int run_ensemble(const json& cfg, const std::string& out) {
    const json& e = cfg.at("ensemble");
    const std::string x_path = e.at("x_dump").get<std::string>();
    const std::string s_path = e.at("s_dump").get<std::string>();
    if (x_path.empty() || s_path.empty())
        throw std::runtime_error("config error: ensemble needs --x-dump and --s-dump");

    const auto x = ensemble::read_logit_dump(x_path);
    const auto s = ensemble::read_logit_dump(s_path);

    std::vector<ensemble::EnsembleWeights> grid;
    if (e.at("weights").is_array() && !e.at("weights").empty()) {
        const auto w = e.at("weights").get<std::vector<double>>();
        if (w.size() != 2)
            throw std::runtime_error("config error: --weights expects exactly two numbers");
        grid.push_back(ensemble::EnsembleWeights(w[0], w[1]));
    } else {
        grid = ensemble::default_weight_grid();
    }

    const auto results = ensemble::sweep(x, s, grid);
    TableRows table;
    table.task = results.front().task;
    json rows = json::array();
    for (const auto& r : results) {
        const json rep = r.task == "EC" ? r.ec.to_json() : r.mgap.to_json();
        table.rows.push_back({r.name, rep});
        rows.push_back({{"name", r.name}, {"task", r.task}, {"metrics", rep}});
    }
    write_json_file((fs::path(out) / "metrics.json").string(),
                    {{"task", table.task}, {"rows", rows}});
    emit_tables(out, {table});
    return 0;
}

int run_ablate_beta(const json& cfg, const std::string& out) {
    const DataBundle bundle = load_data(cfg.at("data"));
    data::ClipDataset train_split = make_split(bundle, cfg.at("data").at("train_split"));
    data::ClipDataset val_split = make_split(bundle, cfg.at("data").at("val_split"));
    data::ClipDataset eval_split = make_split(bundle, cfg.at("data").at("eval_split"));

    const auto betas = cfg.at("betas").get<std::vector<int64_t>>();
    const json& net_cfg = cfg.at("network");
    const auto rows = train::beta_sweep(net_cfg.at("arch").get<std::string>(),
                                        net_cfg.at("config"), betas, train_split, val_split,
                                        eval_split, train::TrainConfig::from_json(cfg.at("train")),
                                        out);

    TableRows table;
    table.task = "EC";
    json jrows = json::array();
    for (const auto& row : rows) {
        const std::string name = "1/" + std::to_string(row.inverse_beta);
        table.rows.push_back({name, row.report.to_json()});
        jrows.push_back({{"name", name},
                         {"task", "EC"},
                         {"metrics", row.report.to_json()},
                         {"run_dir", row.run_dir}});
    }
    write_json_file((fs::path(out) / "metrics.json").string(),
                    {{"task", "EC"}, {"rows", jrows}});
    emit_tables(out, {table});
    return 0;
}

int run_expand(const json& cfg, const std::string& out) {
    const json& e = cfg.at("expand");
    if (!e.at("targets").is_array() || e.at("targets").empty())
        throw std::runtime_error("config error: expand needs --targets");
    std::vector<double> targets = e.at("targets").get<std::vector<double>>();

    const json& net_cfg = cfg.at("network");
    const std::string arch = net_cfg.at("arch").get<std::string>();
    if (arch.rfind("x3d", 0) != 0)
        throw std::runtime_error(
            "config error: the expansion search applies to the x3d architecture, got '" + arch +
            "'");
    const auto base = models::X3DConfig::from_json("x3d", net_cfg.at("config"));
    const search::ComplexityFn complexity = search::x3d_complexity(base);
    if (e.at("relative").get<bool>()) {
        const double base_c = complexity(models::ExpandFactors{});
        for (double& t : targets) t *= base_c;
    }

    const DataBundle bundle = load_data(cfg.at("data"));
    const std::string train_name = cfg.at("data").at("train_split").get<std::string>();
    const std::string val_name = cfg.at("data").at("val_split").get<std::string>();

    // Goodness of a candidate = validation top-1 after a short probe
    // training, which is what the full procedure does at scale. Each
    // candidate dictates its own input geometry (frames, spatial side), so
    // the clip tensors are rebuilt per probe.
    train::TrainConfig probe_cfg = train::TrainConfig::from_json(cfg.at("train"));
    const int64_t probe_epochs = e.at("probe_epochs").get<int64_t>();
    probe_cfg.early_stop.min_epochs = probe_epochs;
    probe_cfg.early_stop.max_epochs = probe_epochs;
    probe_cfg.early_stop.patience = 1 << 20;
    probe_cfg.pretrained_checkpoint.clear();
    probe_cfg.task = "EC";

    int64_t probe_index = 0;
    const search::GoodnessFn goodness = [&](const models::ExpandFactors& f) {
        json probe_net = net_cfg.at("config");
        probe_net["factors"] = f.to_json();
        auto net = nn::build_network("x3d", probe_net);
        const kernels::Shape5d in_shape = net->input_shape();
        DataBundle probe_bundle = bundle;
        probe_bundle.opts.frames = in_shape.t;
        probe_bundle.opts.size = in_shape.h;
        data::ClipDataset train_split = make_split(probe_bundle, train_name);
        data::ClipDataset val_split = make_split(probe_bundle, val_name);
        const std::string probe_dir =
            (fs::path(out) / "probes" / std::to_string(probe_index++)).string();
        train::RunRecord rec = train::train(*net, train_split, val_split, probe_cfg, probe_dir);
        nn::LoadedCheckpoint best = nn::load_checkpoint(rec.checkpoint_path);
        const train::EvalResult ev =
            train::evaluate(*best.network, val_split, probe_cfg.batch_size);
        return ev.ec.top1;
    };

    search::SearchOptions opts;
    opts.tolerance = e.at("tolerance").get<double>();
    opts.log_path = (fs::path(out) / "search_log.jsonl").string();
    const search::SearchResult result =
        search::forward_expand(search::initial_state(), targets, goodness, complexity, opts);

    json expanded_net = net_cfg.at("config");
    expanded_net["factors"] = result.state.factors.to_json();
    write_json_file((fs::path(out) / "result.json").string(),
                    {{"state", result.state.to_json()},
                     {"targets", targets},
                     {"complexity", complexity(result.state.factors)}});
    write_json_file((fs::path(out) / "expanded_network.json").string(),
                    {{"arch", "x3d"}, {"config", expanded_net}});

    std::cout << "expanded factors: " << result.state.factors.to_json().dump() << "\n"
              << "complexity: " << complexity(result.state.factors) << "\n"
              << "candidate log: " << opts.log_path << "\n";
    return 0;
}

int run_report(const json& cfg, const std::string& out) {
    const auto runs = cfg.at("report").at("runs").get<std::vector<std::string>>();
    if (runs.empty()) throw std::runtime_error("config error: report needs --runs");

    TableRows ec{"EC", {}}, mgap{"MGAP", {}};
    for (const std::string& run : runs) {
        fs::path path = run;
        if (fs::is_directory(path)) path /= "metrics.json";
        std::ifstream in(path);
        if (!in)
            throw std::runtime_error("report error: cannot open metrics file '" + path.string() +
                                     "'");
        json j;
        in >> j;
        const std::string base = fs::path(run).filename().string();
        auto add = [&](const std::string& task, const std::string& name, const json& rep) {
            (task == "EC" ? ec : mgap).rows.push_back({name, rep});
        };
        if (j.contains("rows")) {
            for (const auto& row : j.at("rows"))
                add(row.at("task").get<std::string>(), row.at("name").get<std::string>(),
                    row.at("metrics"));
        } else {
            add(j.at("task").get<std::string>(), base.empty() ? run : base, j.at("metrics"));
        }
    }
    emit_tables(out, {ec, mgap});
    return 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// main
// ---------------------------------------------------------------------------

int main(int argc, char** argv) {
    CLI::App app{"Exercise-video pipeline: classification, muscle-group prediction, ablations"};
    app.require_subcommand(1);

    // Global flags (each has a config-file equivalent; flags win).
    std::string config_path, out_dir;
    uint64_t seed = 0;
    bool deterministic = false;
    auto* opt_config = app.add_option("--config", config_path, "JSON config file");
    auto* opt_seed = app.add_option("--seed", seed, "Random seed (overrides config)");
    auto* opt_out = app.add_option("--out", out_dir, "Output directory for all artifacts");
    auto* opt_det =
        app.add_flag("--deterministic", deterministic,
                     "Single-threaded kernels for bit-stable runs (or set EXNET_DETERMINISTIC=1)");

    // Per-subcommand flags, mirrored into the config tree after parsing.
    std::string dataset_root, taxonomy, muscle_map, manifest, arch, checkpoint;
    std::string x_dump, s_dump, weights_text, betas_text, targets_text, splits_text;
    std::vector<std::string> report_runs;
    int64_t batch_size = 0, frames = 0, size = 0, probe_epochs = 0, min_epochs = 0, max_epochs = 0;
    double learning_rate = 0.0, tolerance = 0.0;
    bool cache = false, relative = false;
    std::string task;

    auto add_data_flags = [&](CLI::App* sub) {
        sub->add_option("--dataset-root", dataset_root, "Directory of per-exercise video folders");
        sub->add_option("--manifest", manifest, "Clip manifest CSV from prepare-data");
        sub->add_option("--taxonomy", taxonomy, "Taxonomy JSON (default: bundled asset)");
        sub->add_option("--muscle-map", muscle_map, "Muscle map JSON (default: bundled asset)");
        sub->add_option("--frames", frames, "Frames per clip tensor");
        sub->add_option("--size", size, "Spatial side of clip tensors");
        sub->add_flag("--cache", cache, "Decode all clips into memory once");
        sub->add_option("--splits", splits_text,
                        "train,val[,eval] split names (default train,val,test)");
    };
    auto add_train_flags = [&](CLI::App* sub) {
        sub->add_option("--arch", arch, "Network architecture");
        sub->add_option("--batch-size", batch_size, "Clips per optimizer step");
        sub->add_option("--learning-rate", learning_rate, "Adam learning rate");
        sub->add_option("--min-epochs", min_epochs, "Epochs before early stopping may fire");
        sub->add_option("--max-epochs", max_epochs, "Hard epoch budget");
        sub->add_option("--task", task, "EC (classes) or MGAP (muscle groups)");
    };

    CLI::App* prepare = app.add_subcommand("prepare-data", "Scan a corpus, split it, write the manifest");
    add_data_flags(prepare);

    CLI::App* trn = app.add_subcommand("train", "Train a network and keep the best checkpoint");
    add_data_flags(trn);
    add_train_flags(trn);

    CLI::App* ft = app.add_subcommand("finetune",
                                      "Swap a trained classifier's head and fit muscle targets");
    add_data_flags(ft);
    add_train_flags(ft);
    ft->add_option("--checkpoint", checkpoint, "Classification checkpoint to start from");

    CLI::App* ev = app.add_subcommand("evaluate", "Score a checkpoint on one split");
    add_data_flags(ev);
    ev->add_option("--checkpoint", checkpoint, "Checkpoint to score");
    ev->add_option("--batch-size", batch_size, "Clips per forward pass");

    CLI::App* ens = app.add_subcommand("ensemble", "Fuse two logit dumps by weighted averaging");
    ens->add_option("--x-dump", x_dump, "First member's logits.jsonl");
    ens->add_option("--s-dump", s_dump, "Second member's logits.jsonl");
    ens->add_option("--weights", weights_text,
                    "x,s weights in [0,1] summing to 1 (default: sweep 75/25, 50/50, 25/75)");

    CLI::App* ab = app.add_subcommand("ablate-beta",
                                      "Train one network per fast-pathway width ratio");
    add_data_flags(ab);
    add_train_flags(ab);
    ab->add_option("--betas", betas_text, "Comma-separated inverse ratios (default 2,4,8,10,16)");

    CLI::App* ex = app.add_subcommand("expand", "Progressively expand a network to FLOP targets");
    add_data_flags(ex);
    add_train_flags(ex);
    ex->add_option("--targets", targets_text, "Comma-separated complexity targets (FLOPs)");
    ex->add_flag("--relative", relative, "Treat targets as multiples of the base complexity");
    ex->add_option("--tolerance", tolerance, "Relative complexity tolerance (default 0.1)");
    ex->add_option("--probe-epochs", probe_epochs, "Training epochs per candidate probe");

    CLI::App* rep = app.add_subcommand("report", "Aggregate metrics.json files into tables");
    rep->add_option("--runs", report_runs, "Run directories or metrics.json paths")
        ->delimiter(',');

    for (CLI::App* sub : app.get_subcommands(nullptr)) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);
    CLI::App* sub = app.get_subcommands().front();

    try {
        // Assemble the effective config: defaults <- config file <- flags.
        json cfg = default_config();
        if (opt_config->count()) cfg.merge_patch(load_config_file(config_path));
        if (opt_seed->count()) {
            cfg["seed"] = seed;
            cfg["train"]["seed"] = seed;
        }
        if (opt_det->count()) cfg["deterministic"] = true;
        auto set_if = [&](const CLI::Option* o, json& slot, const auto& value) {
            if (o->count()) slot = value;
        };
        for (const auto& [flag, key] : std::vector<std::pair<std::string, std::string>>{
                 {"--dataset-root", "dataset_root"},
                 {"--manifest", "manifest"},
                 {"--taxonomy", "taxonomy"},
                 {"--muscle-map", "muscle_map"}}) {
            if (const CLI::Option* o = sub->get_option_no_throw(flag); o && o->count()) {
                const std::string* v = flag == "--dataset-root" ? &dataset_root
                                       : flag == "--manifest"   ? &manifest
                                       : flag == "--taxonomy"   ? &taxonomy
                                                                : &muscle_map;
                cfg["data"][key] = *v;
            }
        }
        if (const CLI::Option* o = sub->get_option_no_throw("--frames"); o && o->count())
            cfg["data"]["frames"] = frames;
        if (const CLI::Option* o = sub->get_option_no_throw("--size"); o && o->count())
            cfg["data"]["size"] = size;
        if (const CLI::Option* o = sub->get_option_no_throw("--cache"); o && o->count())
            cfg["data"]["cache"] = cache;
        if (const CLI::Option* o = sub->get_option_no_throw("--splits"); o && o->count()) {
            std::vector<std::string> names;
            std::istringstream in(splits_text);
            for (std::string tok; std::getline(in, tok, ',');) names.push_back(tok);
            if (names.size() < 2 || names.size() > 3)
                throw std::runtime_error("config error: --splits expects train,val[,eval]");
            cfg["data"]["train_split"] = names[0];
            cfg["data"]["val_split"] = names[1];
            if (names.size() == 3) cfg["data"]["eval_split"] = names[2];
        }
        if (const CLI::Option* o = sub->get_option_no_throw("--arch"); o && o->count())
            cfg["network"]["arch"] = arch;
        if (const CLI::Option* o = sub->get_option_no_throw("--batch-size"); o && o->count())
            cfg["train"]["batch_size"] = batch_size;
        if (const CLI::Option* o = sub->get_option_no_throw("--learning-rate"); o && o->count())
            cfg["train"]["learning_rate"] = learning_rate;
        if (const CLI::Option* o = sub->get_option_no_throw("--min-epochs"); o && o->count())
            cfg["train"]["early_stop"]["min_epochs"] = min_epochs;
        if (const CLI::Option* o = sub->get_option_no_throw("--max-epochs"); o && o->count())
            cfg["train"]["early_stop"]["max_epochs"] = max_epochs;
        if (const CLI::Option* o = sub->get_option_no_throw("--task"); o && o->count())
            cfg["train"]["task"] = task;
        if (const CLI::Option* o = sub->get_option_no_throw("--checkpoint"); o && o->count())
            cfg["train"]["pretrained_checkpoint"] = checkpoint;
        if (const CLI::Option* o = sub->get_option_no_throw("--x-dump"); o && o->count())
            cfg["ensemble"]["x_dump"] = x_dump;
        if (const CLI::Option* o = sub->get_option_no_throw("--s-dump"); o && o->count())
            cfg["ensemble"]["s_dump"] = s_dump;
        if (const CLI::Option* o = sub->get_option_no_throw("--weights"); o && o->count())
            cfg["ensemble"]["weights"] = parse_number_list(weights_text, "--weights");
        if (const CLI::Option* o = sub->get_option_no_throw("--betas"); o && o->count()) {
            json arr = json::array();
            for (double v : parse_number_list(betas_text, "--betas")) arr.push_back(int64_t(v));
            cfg["betas"] = arr;
        }
        if (const CLI::Option* o = sub->get_option_no_throw("--targets"); o && o->count())
            cfg["expand"]["targets"] = parse_number_list(targets_text, "--targets");
        if (const CLI::Option* o = sub->get_option_no_throw("--relative"); o && o->count())
            cfg["expand"]["relative"] = relative;
        if (const CLI::Option* o = sub->get_option_no_throw("--tolerance"); o && o->count())
            cfg["expand"]["tolerance"] = tolerance;
        if (const CLI::Option* o = sub->get_option_no_throw("--probe-epochs"); o && o->count())
            cfg["expand"]["probe_epochs"] = probe_epochs;
        if (const CLI::Option* o = sub->get_option_no_throw("--runs"); o && o->count())
            cfg["report"]["runs"] = report_runs;
        (void)set_if;

        const char* env_det = std::getenv("EXNET_DETERMINISTIC");
        if (env_det && std::string(env_det) != "0") cfg["deterministic"] = true;
        if (cfg.at("deterministic").get<bool>()) {
#ifdef _OPENMP
            omp_set_num_threads(1);
#endif
            log_info("deterministic mode: kernels run single-threaded");
        }

        if (!opt_out->count() || out_dir.empty())
            throw std::runtime_error("config error: --out is required");
        open_run_dir(out_dir, sub->get_name(), cfg);

        if (sub == prepare) return run_prepare(cfg, out_dir);
        if (sub == trn) return run_train(cfg, out_dir);
        if (sub == ft) return run_finetune(cfg, out_dir);
        if (sub == ev) return run_evaluate(cfg, out_dir);
        if (sub == ens) return run_ensemble(cfg, out_dir);
        if (sub == ab) return run_ablate_beta(cfg, out_dir);
        if (sub == ex) return run_expand(cfg, out_dir);
        if (sub == rep) return run_report(cfg, out_dir);
        throw std::logic_error("unhandled subcommand " + sub->get_name());
    } catch (const std::exception& e) {
        log_error(e.what());
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
