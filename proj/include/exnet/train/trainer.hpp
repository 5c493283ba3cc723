#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "exnet/data/dataset.hpp"
#include "exnet/ensemble/ensemble.hpp"
#include "exnet/metrics/metrics.hpp"
#include "exnet/nn/network.hpp"

namespace exnet::train {

// ---------------------------------------------------------------------------
// Early stopping
// ---------------------------------------------------------------------------

struct EarlyStopConfig {
    int64_t min_epochs = 30;   // never stop (for any reason) before this many epochs
    int64_t max_epochs = 100;  // hard budget
    int64_t patience = 10;     // consecutive non-improving epochs tolerated
    double min_delta = 0.0;    // an epoch improves only if loss < best - min_delta

    nlohmann::json to_json() const;
    static EarlyStopConfig from_json(const nlohmann::json& j);
};

// Pure stop-rule component: feed one validation loss per epoch, read back the
// decision. An epoch "improves" when its loss undercuts the best so far by
// more than `min_delta`. Stopping is considered only once `min_epochs` epochs
// have been recorded: early when `patience` consecutive epochs failed to
// improve, unconditionally at `max_epochs`.
class EarlyStopper {
public:
    explicit EarlyStopper(EarlyStopConfig cfg);

    // Records the next epoch's validation loss; returns true when training
    // should stop after this epoch.
    bool update(double val_loss);

    bool improved() const { return improved_; }  // did the last update improve?
    int64_t best_epoch() const { return best_epoch_; }
    double best_loss() const { return best_loss_; }
    int64_t epochs_seen() const { return epochs_; }
    bool stopped_early() const { return stopped_early_; }
    const EarlyStopConfig& config() const { return cfg_; }

private:
    EarlyStopConfig cfg_;
    int64_t epochs_ = 0;
    int64_t best_epoch_ = -1;
    double best_loss_ = std::numeric_limits<double>::infinity();
    int64_t since_improvement_ = 0;
    bool improved_ = false;
    bool stopped_early_ = false;
};

// ---------------------------------------------------------------------------
// Training configuration and run record
// ---------------------------------------------------------------------------

struct TrainConfig {
    int64_t batch_size = 8;
    double learning_rate = 1e-4;
    uint64_t seed = 0;
    std::string task = "EC";             // "EC" (multiclass) | "MGAP" (multilabel)
    std::string pretrained_checkpoint;   // optional warm start, copied name-by-name
    EarlyStopConfig early_stop;

    // Throws std::invalid_argument ("config error: ...") on invalid settings.
    void validate() const;

    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

struct RunRecord {
    nlohmann::json config;             // train config + network arch/config snapshot
    std::vector<double> train_losses;  // one per epoch
    std::vector<double> val_losses;    // one per epoch
    int64_t best_epoch = -1;           // index of the lowest validation loss
    double best_val_loss = 0.0;
    std::string checkpoint_path;       // best-validation checkpoint
    int64_t epochs_run = 0;
    bool early_stopped = false;
    double wall_seconds = 0.0;

    nlohmann::json to_json() const;
    static RunRecord from_json(const nlohmann::json& j);
};

// ---------------------------------------------------------------------------
// Training / fine-tuning / evaluation
// ---------------------------------------------------------------------------

// Copies every same-named tensor (parameters and buffers) of `src` into
// `dst`. Throws std::runtime_error listing the divergent names when the two
// networks do not expose exactly the same tensors with the same shapes.
void copy_weights(nn::Network& dst, nn::Network& src);

// Saves a checkpoint via a temp file + rename so a crash never leaves a
// truncated file at `path`.
void atomic_save_checkpoint(const std::string& path, nn::Network& net,
                            const nlohmann::json& metadata);

// Trains `net` on `train_split`, early-stopping on `val_split` loss, and keeps
// the best-validation checkpoint at <out_dir>/checkpoints/best.ckpt. The run
// record is also written to <out_dir>/record.json. When `initialize` is true
// the parameters are (re)initialized from the config seed, unless
// `cfg.pretrained_checkpoint` names a checkpoint to copy weights from.
// Non-finite losses abort with a diagnostic naming the epoch and batch.
RunRecord train(nn::Network& net, const data::ClipDataset& train_split,
                const data::ClipDataset& val_split, const TrainConfig& cfg,
                const std::string& out_dir, bool initialize = true);

struct FineTuneResult {
    std::unique_ptr<nn::Network> network;
    RunRecord record;
};

// Loads a multiclass checkpoint, swaps its head for a `num_muscles`-way
// multilabel head, verifies the trunk survived the swap byte-for-byte
// (checksum), and trains on muscle targets. `cfg.task` is forced to "MGAP".
FineTuneResult fine_tune(const std::string& ec_checkpoint_path,
                         const data::ClipDataset& train_split,
                         const data::ClipDataset& val_split, TrainConfig cfg,
                         const std::string& out_dir);

struct EvalResult {
    std::string task;  // "EC" | "MGAP", derived from the network head
    metrics::EcReport ec;                      // filled when task == "EC"
    metrics::MgapReport mgap;                  // filled when task == "MGAP"
    std::vector<ensemble::LogitRecord> dump;   // one record per clip, split order

    nlohmann::json metrics_json() const;  // {"task", "metrics": report}
};

// Deterministic evaluation: centered single view per clip, batched in split
// order. The returned dump rows feed the ensemble tooling; re-running on the
// same checkpoint and split reproduces them bit-for-bit.
EvalResult evaluate(nn::Network& net, const data::ClipDataset& split,
                    int64_t batch_size = 8);

// ---------------------------------------------------------------------------
// Slow/Fast channel-ratio ablation
// ---------------------------------------------------------------------------

struct BetaSweepRow {
    int64_t inverse_beta = 0;  // fast pathway gets 1/inverse_beta of the slow width
    RunRecord run;
    metrics::EcReport report;
    std::string run_dir;
};

// Trains one SlowFast network from scratch per inverse-beta value (the
// pretrained_checkpoint setting is ignored), evaluates each on `eval_split`,
// and returns one row per value in input order. Runs live in
// <out_dir>/beta_<value>/.
std::vector<BetaSweepRow> beta_sweep(const std::string& arch,
                                     const nlohmann::json& base_overrides,
                                     const std::vector<int64_t>& inverse_betas,
                                     const data::ClipDataset& train_split,
                                     const data::ClipDataset& val_split,
                                     const data::ClipDataset& eval_split,
                                     TrainConfig cfg, const std::string& out_dir);

// Default ablation grid for the channel-ratio sweep.
std::vector<int64_t> default_inverse_betas();

// One table row per sweep entry, named "1/<inverse_beta>".
std::string beta_table_markdown(const std::vector<BetaSweepRow>& rows);
std::string beta_table_csv(const std::vector<BetaSweepRow>& rows);

}  // namespace exnet::train
