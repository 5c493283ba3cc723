#include "exnet/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "exnet/core/log.hpp"
#include "exnet/nn/adam.hpp"
#include "exnet/nn/checkpoint.hpp"
#include "exnet/nn/loss.hpp"

namespace exnet::train {

namespace {

namespace fs = std::filesystem;

constexpr uint64_t kInitSalt = 0x11A7;
constexpr uint64_t kHeadSalt = 0x4EAD;
constexpr uint64_t kEpochSaltBase = 0xE000;

void validate_early_stop(const EarlyStopConfig& cfg) {
    if (cfg.min_epochs < 1)
        throw std::invalid_argument("config error: min_epochs must be >= 1");
    if (cfg.max_epochs < cfg.min_epochs)
        throw std::invalid_argument("config error: max_epochs must be >= min_epochs");
    if (cfg.patience < 0)
        throw std::invalid_argument("config error: patience must be >= 0");
    if (!(cfg.min_delta >= 0.0) || !std::isfinite(cfg.min_delta))
        throw std::invalid_argument("config error: min_delta must be finite and >= 0");
}

std::string hex_u64(uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Mean per-clip loss over a split in evaluation mode (no gradient work).
double split_loss(nn::Network& net, const data::ClipDataset& split, const std::string& task,
                  int64_t batch_size) {
    Rng unused(0);  // evaluation-mode loads are deterministic
    double total = 0.0;
    const int64_t n = split.size();
    for (int64_t start = 0; start < n; start += batch_size) {
        std::vector<int64_t> ids;
        for (int64_t i = start; i < std::min(start + batch_size, n); ++i) ids.push_back(i);
        Tensor x = split.load_batch(ids, /*evaluation=*/true, unused);
        Tensor logits = net.forward(x, /*training=*/false);
        double loss = 0.0;
        if (task == "EC") {
            loss = nn::softmax_cross_entropy(logits, split.labels(ids), nullptr);
        } else {
            loss = nn::bce_with_logits(logits, split.muscle_targets(ids), nullptr);
        }
        total += loss * double(ids.size());
    }
    return total / double(n);
}

void check_head_matches_task(const nn::Network& net, const data::ClipDataset& ds,
                             const std::string& task) {
    if (task == "EC") {
        if (net.head_kind() != "multiclass")
            throw std::invalid_argument("config error: task EC requires a multiclass head, got " +
                                        net.head_kind());
        if (net.num_classes() != ds.num_classes())
            throw std::invalid_argument(
                "config error: network has " + std::to_string(net.num_classes()) +
                " classes but the dataset has " + std::to_string(ds.num_classes()));
    } else {
        if (net.head_kind() != "multilabel")
            throw std::invalid_argument("config error: task MGAP requires a multilabel head, got " +
                                        net.head_kind());
        if (net.num_classes() != ds.num_muscles())
            throw std::invalid_argument(
                "config error: network predicts " + std::to_string(net.num_classes()) +
                " muscles but the dataset has " + std::to_string(ds.num_muscles()));
    }
}

void write_text_file(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open '" + tmp + "' for writing");
        out << text;
        if (!out) throw std::runtime_error("failed while writing '" + tmp + "'");
    }
    fs::rename(tmp, path);
}

std::string join_names(const std::vector<std::string>& names, size_t limit = 8) {
    std::string out;
    for (size_t i = 0; i < names.size() && i < limit; ++i) {
        if (i) out += ", ";
        out += names[i];
    }
    if (names.size() > limit) out += ", ... (" + std::to_string(names.size()) + " total)";
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// EarlyStopConfig / EarlyStopper
// ---------------------------------------------------------------------------

nlohmann::json EarlyStopConfig::to_json() const {
    return {{"min_epochs", min_epochs},
            {"max_epochs", max_epochs},
            {"patience", patience},
            {"min_delta", min_delta}};
}

EarlyStopConfig EarlyStopConfig::from_json(const nlohmann::json& j) {
    EarlyStopConfig cfg;
    cfg.min_epochs = j.value("min_epochs", cfg.min_epochs);
    cfg.max_epochs = j.value("max_epochs", cfg.max_epochs);
    cfg.patience = j.value("patience", cfg.patience);
    cfg.min_delta = j.value("min_delta", cfg.min_delta);
    return cfg;
}

EarlyStopper::EarlyStopper(EarlyStopConfig cfg) : cfg_(cfg) { validate_early_stop(cfg_); }

bool EarlyStopper::update(double val_loss) {
    improved_ = val_loss < best_loss_ - cfg_.min_delta;
    if (improved_) {
        best_loss_ = val_loss;
        best_epoch_ = epochs_;
        since_improvement_ = 0;
    } else {
        ++since_improvement_;
    }
    ++epochs_;
    if (epochs_ >= cfg_.min_epochs && since_improvement_ >= cfg_.patience) {
        stopped_early_ = epochs_ < cfg_.max_epochs;
        return true;
    }
    return epochs_ >= cfg_.max_epochs;
}

// ---------------------------------------------------------------------------
// TrainConfig / RunRecord
// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("config error: batch_size must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw std::invalid_argument("config error: learning_rate must be finite and > 0");
    if (task != "EC" && task != "MGAP")
        throw std::invalid_argument("config error: task must be EC or MGAP, got '" + task + "'");
    validate_early_stop(early_stop);
}

nlohmann::json TrainConfig::to_json() const {
    return {{"batch_size", batch_size},
            {"learning_rate", learning_rate},
            {"seed", seed},
            {"task", task},
            {"pretrained_checkpoint", pretrained_checkpoint},
            {"early_stop", early_stop.to_json()}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig cfg;
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.task = j.value("task", cfg.task);
    cfg.pretrained_checkpoint = j.value("pretrained_checkpoint", cfg.pretrained_checkpoint);
    if (j.contains("early_stop")) cfg.early_stop = EarlyStopConfig::from_json(j.at("early_stop"));
    return cfg;
}

nlohmann::json RunRecord::to_json() const {
    return {{"config", config},
            {"train_losses", train_losses},
            {"val_losses", val_losses},
            {"best_epoch", best_epoch},
            {"best_val_loss", best_val_loss},
            {"checkpoint_path", checkpoint_path},
            {"epochs_run", epochs_run},
            {"early_stopped", early_stopped},
            {"wall_seconds", wall_seconds}};
}

RunRecord RunRecord::from_json(const nlohmann::json& j) {
    RunRecord r;
    r.config = j.value("config", nlohmann::json::object());
    r.train_losses = j.value("train_losses", std::vector<double>{});
    r.val_losses = j.value("val_losses", std::vector<double>{});
    r.best_epoch = j.value("best_epoch", r.best_epoch);
    r.best_val_loss = j.value("best_val_loss", r.best_val_loss);
    r.checkpoint_path = j.value("checkpoint_path", r.checkpoint_path);
    r.epochs_run = j.value("epochs_run", r.epochs_run);
    r.early_stopped = j.value("early_stopped", r.early_stopped);
    r.wall_seconds = j.value("wall_seconds", r.wall_seconds);
    return r;
}

// ---------------------------------------------------------------------------
// Weight transfer and checkpoint writing
// ---------------------------------------------------------------------------

void copy_weights(nn::Network& dst, nn::Network& src) {
    struct Slot {
        Tensor* tensor;
        bool taken = false;
    };
    std::unordered_map<std::string, Slot> dst_map;
    auto add_dst = [&](const std::string& name, Tensor* t) { dst_map[name] = Slot{t, false}; };
    for (nn::Parameter* p : dst.parameters()) add_dst(p->name, &p->value);
    for (nn::Buffer* b : dst.buffers()) add_dst(b->name, &b->value);

    std::vector<std::string> missing_in_dst, shape_mismatch;
    auto copy_one = [&](const std::string& name, const Tensor& value) {
        auto it = dst_map.find(name);
        if (it == dst_map.end()) {
            missing_in_dst.push_back(name);
            return;
        }
        it->second.taken = true;
        if (it->second.tensor->shape() != value.shape()) {
            shape_mismatch.push_back(name);
            return;
        }
        std::copy(value.data(), value.data() + value.numel(), it->second.tensor->data());
    };
    for (nn::Parameter* p : src.parameters()) copy_one(p->name, p->value);
    for (nn::Buffer* b : src.buffers()) copy_one(b->name, b->value);

    std::vector<std::string> missing_in_src;
    for (const auto& [name, slot] : dst_map)
        if (!slot.taken) missing_in_src.push_back(name);
    std::sort(missing_in_src.begin(), missing_in_src.end());

    if (!missing_in_dst.empty() || !missing_in_src.empty() || !shape_mismatch.empty()) {
        std::string msg = "checkpoint compatibility error: networks disagree on parameters;";
        if (!missing_in_dst.empty())
            msg += " only in checkpoint: [" + join_names(missing_in_dst) + "];";
        if (!missing_in_src.empty())
            msg += " only in network: [" + join_names(missing_in_src) + "];";
        if (!shape_mismatch.empty())
            msg += " shape mismatch: [" + join_names(shape_mismatch) + "];";
        throw std::runtime_error(msg);
    }
}

void atomic_save_checkpoint(const std::string& path, nn::Network& net,
                            const nlohmann::json& metadata) {
    const std::string tmp = path + ".tmp";
    nn::save_checkpoint(tmp, net, metadata);
    fs::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

RunRecord train(nn::Network& net, const data::ClipDataset& train_split,
                const data::ClipDataset& val_split, const TrainConfig& cfg,
                const std::string& out_dir, bool initialize) {
    cfg.validate();
    if (train_split.size() == 0)
        throw std::invalid_argument("config error: train split is empty");
    if (val_split.size() == 0)
        throw std::invalid_argument("config error: validation split is empty");
    check_head_matches_task(net, train_split, cfg.task);
    check_head_matches_task(net, val_split, cfg.task);

    const auto t0 = std::chrono::steady_clock::now();
    Rng root(cfg.seed);

    if (initialize) {
        if (!cfg.pretrained_checkpoint.empty()) {
            nn::LoadedCheckpoint loaded = nn::load_checkpoint(cfg.pretrained_checkpoint);
            copy_weights(net, *loaded.network);
            log_info("train: warm start from " + cfg.pretrained_checkpoint);
        } else {
            Rng init_rng = root.fork(kInitSalt);
            net.init_params(init_rng);
        }
    }

    fs::create_directories(fs::path(out_dir) / "checkpoints");
    const std::string best_path = (fs::path(out_dir) / "checkpoints" / "best.ckpt").string();

    nn::Adam opt(net.parameters(), float(cfg.learning_rate));
    EarlyStopper stopper(cfg.early_stop);

    RunRecord record;
    record.config = {{"train", cfg.to_json()},
                     {"network", {{"arch", net.arch_name()}, {"config", net.config_json()}}}};
    record.checkpoint_path = best_path;

    const int64_t n = train_split.size();
    std::vector<int64_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    for (int64_t epoch = 0;; ++epoch) {
        Rng epoch_rng = root.fork(kEpochSaltBase + static_cast<uint64_t>(epoch));
        epoch_rng.shuffle(order);

        double total_loss = 0.0;
        int64_t batch_index = 0;
        for (int64_t start = 0; start < n; start += cfg.batch_size, ++batch_index) {
            std::vector<int64_t> ids(order.begin() + start,
                                     order.begin() + std::min(start + cfg.batch_size, n));
            Tensor x = train_split.load_batch(ids, /*evaluation=*/false, epoch_rng);
            Tensor logits = net.forward(x, /*training=*/true);
            Tensor dlogits;
            double loss = 0.0;
            if (cfg.task == "EC") {
                loss = nn::softmax_cross_entropy(logits, train_split.labels(ids), &dlogits);
            } else {
                loss = nn::bce_with_logits(logits, train_split.muscle_targets(ids), &dlogits);
            }
            if (!std::isfinite(loss)) {
                std::ostringstream msg;
                msg << "training error: non-finite loss " << loss << " at epoch " << epoch
                    << ", batch " << batch_index << " (clips";
                for (size_t i = 0; i < ids.size() && i < 4; ++i)
                    msg << " " << train_split.clip(ids[i]).clip_id;
                msg << "); recent epoch losses:";
                const size_t tail = record.train_losses.size() > 5 ? record.train_losses.size() - 5
                                                                   : 0;
                for (size_t i = tail; i < record.train_losses.size(); ++i)
                    msg << " " << record.train_losses[i];
                throw std::runtime_error(msg.str());
            }
            opt.zero_grad();
            net.backward(dlogits);
            opt.step();
            total_loss += loss * double(ids.size());
        }
        const double train_loss = total_loss / double(n);
        const double val_loss = split_loss(net, val_split, cfg.task, cfg.batch_size);
        if (!std::isfinite(val_loss)) {
            throw std::runtime_error("training error: non-finite validation loss " +
                                     std::to_string(val_loss) + " at epoch " +
                                     std::to_string(epoch));
        }
        record.train_losses.push_back(train_loss);
        record.val_losses.push_back(val_loss);

        const bool stop = stopper.update(val_loss);
        if (stopper.improved()) {
            nlohmann::json metadata = {{"task", cfg.task},
                                       {"seed", cfg.seed},
                                       {"epoch", epoch},
                                       {"train_loss", train_loss},
                                       {"val_loss", val_loss},
                                       {"trunk_checksum", hex_u64(nn::trunk_checksum(net))}};
            atomic_save_checkpoint(best_path, net, metadata);
        }
        {
            std::ostringstream line;
            line << "epoch " << epoch << ": train loss " << train_loss << ", val loss " << val_loss
                 << " (best " << stopper.best_loss() << " @ epoch " << stopper.best_epoch() << ")";
            log_info(line.str());
        }
        if (stop) break;
    }

    record.best_epoch = stopper.best_epoch();
    record.best_val_loss = stopper.best_loss();
    record.epochs_run = stopper.epochs_seen();
    record.early_stopped = stopper.stopped_early();
    record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (record.early_stopped)
        log_info("early stop after " + std::to_string(record.epochs_run) + " epochs (best epoch " +
                 std::to_string(record.best_epoch) + ")");

    write_text_file((fs::path(out_dir) / "record.json").string(), record.to_json().dump(2) + "\n");
    return record;
}

// ---------------------------------------------------------------------------
// fine_tune
// ---------------------------------------------------------------------------

FineTuneResult fine_tune(const std::string& ec_checkpoint_path,
                         const data::ClipDataset& train_split,
                         const data::ClipDataset& val_split, TrainConfig cfg,
                         const std::string& out_dir) {
    nn::LoadedCheckpoint loaded = nn::load_checkpoint(ec_checkpoint_path);
    if (loaded.network->head_kind() != "multiclass")
        throw std::invalid_argument(
            "config error: fine-tuning starts from a multiclass checkpoint, got head kind '" +
            loaded.network->head_kind() + "'");

    const uint64_t trunk_before = nn::trunk_checksum(*loaded.network);
    if (loaded.metadata.contains("trunk_checksum")) {
        const std::string stored = loaded.metadata.at("trunk_checksum").get<std::string>();
        if (stored != hex_u64(trunk_before))
            throw std::runtime_error("checkpoint error: trunk checksum mismatch in '" +
                                     ec_checkpoint_path + "': stored " + stored + ", computed " +
                                     hex_u64(trunk_before));
    }

    Rng head_rng = Rng(cfg.seed).fork(kHeadSalt);
    loaded.network->replace_head(train_split.num_muscles(), "multilabel", head_rng);
    const uint64_t trunk_after = nn::trunk_checksum(*loaded.network);
    if (trunk_after != trunk_before)
        throw std::logic_error("internal error: head replacement altered trunk weights (" +
                               hex_u64(trunk_before) + " -> " + hex_u64(trunk_after) + ")");
    log_info("fine-tune: trunk checksum " + hex_u64(trunk_after) + " verified after head swap");

    cfg.task = "MGAP";
    cfg.pretrained_checkpoint.clear();
    FineTuneResult result;
    result.record =
        train(*loaded.network, train_split, val_split, cfg, out_dir, /*initialize=*/false);
    result.network = std::move(loaded.network);
    return result;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

nlohmann::json EvalResult::metrics_json() const {
    return {{"task", task}, {"metrics", task == "EC" ? ec.to_json() : mgap.to_json()}};
}

EvalResult evaluate(nn::Network& net, const data::ClipDataset& split, int64_t batch_size) {
    if (split.size() == 0) throw std::invalid_argument("config error: evaluation split is empty");
    if (batch_size < 1) throw std::invalid_argument("config error: batch_size must be >= 1");
    EvalResult result;
    result.task = net.head_kind() == "multiclass" ? "EC" : "MGAP";
    check_head_matches_task(net, split, result.task);

    const int64_t n = split.size();
    const int64_t width = net.num_classes();
    Tensor all_logits({n, width});
    Rng unused(0);

    for (int64_t start = 0; start < n; start += batch_size) {
        std::vector<int64_t> ids;
        for (int64_t i = start; i < std::min(start + batch_size, n); ++i) ids.push_back(i);
        Tensor x = split.load_batch(ids, /*evaluation=*/true, unused);
        Tensor logits = net.forward(x, /*training=*/false);
        for (size_t r = 0; r < ids.size(); ++r) {
            const int64_t row = ids[r];
            std::copy(logits.data() + int64_t(r) * width, logits.data() + int64_t(r + 1) * width,
                      all_logits.data() + row * width);
        }
    }

    for (int64_t i = 0; i < n; ++i) {
        ensemble::LogitRecord rec;
        rec.clip_id = split.clip(i).clip_id;
        rec.task = result.task;
        rec.logits.assign(all_logits.data() + i * width, all_logits.data() + (i + 1) * width);
        if (result.task == "EC") {
            rec.label = {split.label(i)};
        } else {
            for (float v : split.muscle_target(i)) rec.label.push_back(v > 0.5f ? 1 : 0);
        }
        result.dump.push_back(std::move(rec));
    }

    if (result.task == "EC") {
        std::vector<int> labels;
        for (int64_t i = 0; i < n; ++i) labels.push_back(split.label(i));
        result.ec = metrics::multiclass_metrics(all_logits, labels);
    } else {
        // Same probability formula as the ensemble path so dump-recomputed
        // metrics match in-process metrics exactly.
        Tensor probs({n, width});
        for (int64_t i = 0; i < n * width; ++i)
            probs.data()[i] = float(1.0 / (1.0 + std::exp(-double(all_logits.data()[i]))));
        Tensor targets({n, width});
        for (int64_t i = 0; i < n; ++i) {
            const std::vector<float> t = split.muscle_target(i);
            std::copy(t.begin(), t.end(), targets.data() + i * width);
        }
        result.mgap = metrics::multilabel_metrics(probs, targets);
    }
    return result;
}

// ---------------------------------------------------------------------------
// beta_sweep
// ---------------------------------------------------------------------------

std::vector<int64_t> default_inverse_betas() { return {2, 4, 8, 10, 16}; }

std::vector<BetaSweepRow> beta_sweep(const std::string& arch,
                                     const nlohmann::json& base_overrides,
                                     const std::vector<int64_t>& inverse_betas,
                                     const data::ClipDataset& train_split,
                                     const data::ClipDataset& val_split,
                                     const data::ClipDataset& eval_split, TrainConfig cfg,
                                     const std::string& out_dir) {
    if (arch.rfind("slowfast", 0) != 0)
        throw std::invalid_argument(
            "config error: the channel-ratio ablation applies to SlowFast architectures, got '" +
            arch + "'");
    if (inverse_betas.empty())
        throw std::invalid_argument("config error: no inverse-beta values given");
    for (int64_t v : inverse_betas)
        if (v < 1)
            throw std::invalid_argument("config error: inverse_beta must be >= 1, got " +
                                        std::to_string(v));
    cfg.task = "EC";
    cfg.pretrained_checkpoint.clear();  // every ablation row trains from scratch
    cfg.validate();

    std::vector<BetaSweepRow> rows;
    for (int64_t v : inverse_betas) {
        nlohmann::json overrides = base_overrides;
        overrides["inverse_beta"] = v;
        std::unique_ptr<nn::Network> net = nn::build_network(arch, overrides);

        BetaSweepRow row;
        row.inverse_beta = v;
        row.run_dir = (fs::path(out_dir) / ("beta_" + std::to_string(v))).string();
        log_info("ablation: training " + arch + " with inverse beta " + std::to_string(v));
        row.run = train(*net, train_split, val_split, cfg, row.run_dir);

        // Score the best-validation checkpoint, not the last epoch's weights.
        nn::LoadedCheckpoint best = nn::load_checkpoint(row.run.checkpoint_path);
        EvalResult ev = evaluate(*best.network, eval_split, cfg.batch_size);
        row.report = ev.ec;

        write_text_file((fs::path(row.run_dir) / "config.json").string(),
                        row.run.config.dump(2) + "\n");
        write_text_file((fs::path(row.run_dir) / "metrics.json").string(),
                        ev.metrics_json().dump(2) + "\n");
        ensemble::write_logit_dump((fs::path(row.run_dir) / "logits.jsonl").string(), ev.dump);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string beta_table_markdown(const std::vector<BetaSweepRow>& rows) {
    std::string out = metrics::EcReport::table_header_markdown();
    for (const auto& row : rows)
        out += row.report.table_row_markdown("1/" + std::to_string(row.inverse_beta));
    return out;
}

std::string beta_table_csv(const std::vector<BetaSweepRow>& rows) {
    std::string out = metrics::EcReport::table_header_csv();
    for (const auto& row : rows)
        out += row.report.table_row_csv("1/" + std::to_string(row.inverse_beta));
    return out;
}

}  // namespace exnet::train
