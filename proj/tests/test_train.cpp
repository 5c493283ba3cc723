#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "exnet/data/dataset.hpp"
#include "exnet/data/prepare.hpp"
#include "exnet/data/splits.hpp"
#include "exnet/data/toy.hpp"
#include "exnet/ensemble/ensemble.hpp"
#include "exnet/metrics/metrics.hpp"
#include "exnet/nn/checkpoint.hpp"
#include "exnet/nn/network.hpp"
#include "exnet/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace exnet;
// The trainer entry point itself stays qualified (train::train) because the
// namespace and the function share a name.
using train::BetaSweepRow;
using train::EarlyStopConfig;
using train::EarlyStopper;
using train::EvalResult;
using train::FineTuneResult;
using train::RunRecord;
using train::TrainConfig;
using train::atomic_save_checkpoint;
using train::beta_sweep;
using train::beta_table_csv;
using train::beta_table_markdown;
using train::copy_weights;
using train::default_inverse_betas;
using train::evaluate;
using train::fine_tune;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("exnet_train_test_" + std::to_string(getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string str() const { return path.string(); }
};

// Shared toy fixture: an 8-clip two-class corpus plus datasets ready for a
// tiny X3D (8 frames at 16x16). Built once; training cases reuse it.
struct ToyFixture {
    TempDir dir;
    data::Taxonomy tax;
    data::MuscleMap map;
    data::Manifest manifest;
    std::unique_ptr<data::ClipDataset> all;  // all 8 clips, train and val alike

    ToyFixture() {
        const data::ToyCorpus corpus =
            data::generate_toy_corpus(dir.str(), /*clips_per_class=*/4, /*seed=*/11,
                                      /*frame_size=*/32, /*fps=*/8.0);
        tax = data::Taxonomy::load(corpus.taxonomy_path);
        map = data::MuscleMap::load(data::default_asset_path("muscle_map.json"));
        manifest = data::scan_corpus(corpus.videos_dir, tax);
        data::PreprocessOptions opts;
        opts.frames = 4;
        opts.size = 16;
        all = std::make_unique<data::ClipDataset>(manifest, corpus.videos_dir, tax, map, opts, "");
        all->cache_frames();
    }
};

ToyFixture& toy() {
    static ToyFixture fixture;
    return fixture;
}

// Smallest legal X3D matching the toy tensors: 4 frames at 16x16, all other
// expansion factors at their base value.
nlohmann::json tiny_x3d_overrides(int64_t classes, const std::string& head) {
    return {{"factors", {{"gamma_t", 4.0}}},
            {"base_spatial", 16},
            {"num_classes", classes},
            {"head", head}};
}

TrainConfig exact_epochs_config(int64_t epochs, double lr, uint64_t seed) {
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.learning_rate = lr;
    cfg.seed = seed;
    cfg.early_stop.min_epochs = epochs;
    cfg.early_stop.max_epochs = epochs;
    cfg.early_stop.patience = 1 << 20;  // never trip the patience rule
    return cfg;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

TEST_CASE("train config defaults, JSON round-trip, and validation") {
    TrainConfig cfg;
    CHECK(cfg.batch_size == 8);
    CHECK(cfg.learning_rate == 1e-4);
    CHECK(cfg.task == "EC");
    CHECK(cfg.pretrained_checkpoint.empty());
    CHECK(cfg.early_stop.min_epochs == 30);
    CHECK(cfg.early_stop.max_epochs == 100);
    CHECK(cfg.early_stop.patience == 10);
    CHECK(cfg.early_stop.min_delta == 0.0);
    CHECK_NOTHROW(cfg.validate());

    SUBCASE("round-trip preserves every field") {
        cfg.batch_size = 3;
        cfg.learning_rate = 0.5;
        cfg.seed = 99;
        cfg.task = "MGAP";
        cfg.pretrained_checkpoint = "some/path.ckpt";
        cfg.early_stop = {5, 7, 2, 0.25};
        const TrainConfig back = TrainConfig::from_json(cfg.to_json());
        CHECK(back.batch_size == 3);
        CHECK(back.learning_rate == 0.5);
        CHECK(back.seed == 99);
        CHECK(back.task == "MGAP");
        CHECK(back.pretrained_checkpoint == "some/path.ckpt");
        CHECK(back.early_stop.min_epochs == 5);
        CHECK(back.early_stop.max_epochs == 7);
        CHECK(back.early_stop.patience == 2);
        CHECK(back.early_stop.min_delta == 0.25);
    }
    SUBCASE("partial JSON keeps defaults for missing keys") {
        const TrainConfig back = TrainConfig::from_json({{"batch_size", 2}});
        CHECK(back.batch_size == 2);
        CHECK(back.learning_rate == 1e-4);
        CHECK(back.early_stop.patience == 10);
    }
    SUBCASE("invalid settings are config errors") {
        auto expect_throw = [](TrainConfig c) {
            CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("config error"),
                                 std::invalid_argument);
        };
        TrainConfig c = cfg;
        c.batch_size = 0;
        expect_throw(c);
        c = cfg;
        c.learning_rate = 0.0;
        expect_throw(c);
        c = cfg;
        c.learning_rate = std::nan("");
        expect_throw(c);
        c = cfg;
        c.task = "EC+MGAP";
        expect_throw(c);
        c = cfg;
        c.early_stop.min_epochs = 0;
        expect_throw(c);
        c = cfg;
        c.early_stop.max_epochs = c.early_stop.min_epochs - 1;
        expect_throw(c);
        c = cfg;
        c.early_stop.patience = -1;
        expect_throw(c);
        c = cfg;
        c.early_stop.min_delta = -0.1;
        expect_throw(c);
    }
}

// ---------------------------------------------------------------------------
// Early stopping rule
// ---------------------------------------------------------------------------

TEST_CASE("early stopper semantics") {
    SUBCASE("strictly improving losses run to the epoch budget") {
        EarlyStopper stop({30, 100, 10, 0.0});
        double loss = 10.0;
        int64_t epochs = 0;
        bool stopped = false;
        while (!stopped) {
            stopped = stop.update(loss);
            loss -= 0.01;  // improves every epoch
            ++epochs;
            REQUIRE(epochs <= 100);
        }
        CHECK(epochs == 100);
        CHECK_FALSE(stop.stopped_early());
        CHECK(stop.best_epoch() == 99);
    }
    SUBCASE("a plateau stops only after min_epochs, with patience satisfied long before") {
        EarlyStopper stop({30, 100, 10, 0.0});
        int64_t epochs = 0;
        bool stopped = false;
        while (!stopped) {
            const double loss = epochs < 5 ? 10.0 - epochs : 6.0;  // improves only 5 times
            stopped = stop.update(double(loss));
            ++epochs;
            REQUIRE(epochs <= 100);
        }
        CHECK(epochs == 30);  // patience was exhausted at epoch 15, min_epochs held it
        CHECK(stop.stopped_early());
        CHECK(stop.best_epoch() == 4);
        CHECK(stop.best_loss() == 6.0);
    }
    SUBCASE("patience counts consecutive non-improving epochs and resets on improvement") {
        EarlyStopper stop({1, 1000, 3, 0.0});
        // improve, stall, stall, improve, stall, stall, stall -> stop
        CHECK_FALSE(stop.update(5.0));
        CHECK_FALSE(stop.update(5.0));
        CHECK_FALSE(stop.update(5.0));
        CHECK_FALSE(stop.update(4.0));  // reset
        CHECK_FALSE(stop.update(4.0));
        CHECK_FALSE(stop.update(4.0));
        CHECK(stop.update(4.0));  // third consecutive stall
        CHECK(stop.stopped_early());
        CHECK(stop.best_epoch() == 3);
        CHECK(stop.epochs_seen() == 7);
    }
    SUBCASE("improvement must beat min_delta strictly") {
        EarlyStopper stop({1, 1000, 2, 0.5});
        CHECK_FALSE(stop.update(10.0));   // first epoch improves from infinity
        CHECK_FALSE(stop.update(9.6));    // only 0.4 better: no improvement
        CHECK(stop.update(9.51));         // 0.49 better: second stall in a row
        CHECK(stop.best_epoch() == 0);
        CHECK(stop.best_loss() == 10.0);
    }
    SUBCASE("a drop bigger than min_delta counts and resets patience") {
        EarlyStopper stop({1, 1000, 2, 0.5});
        CHECK_FALSE(stop.update(10.0));
        CHECK_FALSE(stop.update(9.6));   // stall
        CHECK_FALSE(stop.update(9.4));   // 0.6 under best: improvement
        CHECK(stop.best_epoch() == 2);
        CHECK(stop.best_loss() == 9.4);
    }
    SUBCASE("equal loss is not an improvement at min_delta zero") {
        EarlyStopper stop({1, 1000, 1, 0.0});
        CHECK_FALSE(stop.update(3.0));
        CHECK(stop.update(3.0));
        CHECK(stop.best_epoch() == 0);
    }
    SUBCASE("zero patience stops at min_epochs") {
        EarlyStopper stop({4, 1000, 0, 0.0});
        CHECK_FALSE(stop.update(5.0));
        CHECK_FALSE(stop.update(4.0));
        CHECK_FALSE(stop.update(3.0));
        CHECK(stop.update(2.0));  // epoch 4 reached; patience 0 is always satisfied
        CHECK(stop.epochs_seen() == 4);
    }
    SUBCASE("max_epochs stop is not an early stop") {
        EarlyStopper stop({1, 3, 10, 0.0});
        CHECK_FALSE(stop.update(3.0));
        CHECK_FALSE(stop.update(2.0));
        CHECK(stop.update(1.0));
        CHECK_FALSE(stop.stopped_early());
    }
    SUBCASE("invalid configurations throw") {
        CHECK_THROWS_AS(EarlyStopper({0, 10, 5, 0.0}), std::invalid_argument);
        CHECK_THROWS_AS(EarlyStopper({10, 5, 5, 0.0}), std::invalid_argument);
        CHECK_THROWS_AS(EarlyStopper({1, 10, -1, 0.0}), std::invalid_argument);
        CHECK_THROWS_AS(EarlyStopper({1, 10, 5, -1.0}), std::invalid_argument);
    }
}

// ---------------------------------------------------------------------------
// Weight transfer
// ---------------------------------------------------------------------------

TEST_CASE("copy_weights transfers everything and reports mismatches by name") {
    const nlohmann::json ov = tiny_x3d_overrides(2, "multiclass");
    auto a = nn::build_network("x3d", ov);
    auto b = nn::build_network("x3d", ov);
    Rng ra(1), rb(2);
    a->init_params(ra);
    b->init_params(rb);

    copy_weights(*b, *a);
    auto pa = a->parameters();
    auto pb = b->parameters();
    REQUIRE(pa.size() == pb.size());
    bool same = true;
    for (size_t i = 0; i < pa.size(); ++i)
        for (int64_t k = 0; k < pa[i]->value.numel(); ++k)
            same &= pa[i]->value[k] == pb[i]->value[k];
    CHECK(same);

    SUBCASE("a width change is reported as a shape mismatch") {
        nlohmann::json wider = ov;
        wider["factors"]["gamma_w"] = 1.5;
        auto c = nn::build_network("x3d", wider);
        CHECK_THROWS_WITH_AS(copy_weights(*c, *a), doctest::Contains("shape mismatch"),
                             std::runtime_error);
    }
    SUBCASE("a depth change is reported as missing parameters") {
        nlohmann::json deeper = ov;
        deeper["factors"]["gamma_d"] = 2.0;
        auto c = nn::build_network("x3d", deeper);
        try {
            copy_weights(*c, *a);
            FAIL("expected a compatibility error");
        } catch (const std::runtime_error& e) {
            const std::string msg = e.what();
            CHECK(msg.find("checkpoint compatibility error") != std::string::npos);
            CHECK(msg.find("only in network") != std::string::npos);
        }
    }
}

// ---------------------------------------------------------------------------
// Training on the toy corpus
// ---------------------------------------------------------------------------

TEST_CASE("toy training overfits, records the run, and keeps the best checkpoint") {
    ToyFixture& fx = toy();
    REQUIRE(fx.all->size() == 8);

    auto net = nn::build_network("x3d", tiny_x3d_overrides(2, "multiclass"));
    const TrainConfig cfg = exact_epochs_config(50, 1e-2, 3);
    TempDir out;
    const RunRecord rec = train::train(*net, *fx.all, *fx.all, cfg, out.str());

    // Losses collapse on eight separable clips.
    REQUIRE(rec.train_losses.size() == 50);
    REQUIRE(rec.val_losses.size() == 50);
    CHECK(rec.train_losses.back() < rec.train_losses.front());
    CHECK(rec.epochs_run == 50);
    CHECK_FALSE(rec.early_stopped);

    // The recorded best epoch is the argmin of the validation curve.
    double min_val = rec.val_losses[0];
    for (double v : rec.val_losses) min_val = std::min(min_val, v);
    CHECK(rec.best_val_loss == min_val);
    CHECK(rec.val_losses[size_t(rec.best_epoch)] == min_val);

    // Final weights classify the training clips nearly perfectly.
    const EvalResult on_train = evaluate(*net, *fx.all, cfg.batch_size);
    CHECK(on_train.task == "EC");
    CHECK(on_train.ec.top1 >= 95.0);
    CHECK(on_train.ec.top5 >= on_train.ec.top1);

    // Artifacts: best checkpoint and the run record.
    REQUIRE(fs::exists(rec.checkpoint_path));
    REQUIRE(fs::exists(fs::path(out.str()) / "record.json"));
    {
        std::ifstream in(fs::path(out.str()) / "record.json");
        nlohmann::json j;
        in >> j;
        const RunRecord back = RunRecord::from_json(j);
        CHECK(back.train_losses == rec.train_losses);
        CHECK(back.val_losses == rec.val_losses);
        CHECK(back.best_epoch == rec.best_epoch);
        CHECK(back.checkpoint_path == rec.checkpoint_path);
        CHECK(back.config == rec.config);
    }

    // The checkpoint stores the best-epoch weights with trunk checksum metadata.
    nn::LoadedCheckpoint best = nn::load_checkpoint(rec.checkpoint_path);
    CHECK(best.metadata.at("epoch").get<int64_t>() == rec.best_epoch);
    CHECK(best.metadata.at("val_loss").get<double>() == rec.best_val_loss);
    CHECK(best.metadata.at("task").get<std::string>() == "EC");
    REQUIRE(best.metadata.contains("trunk_checksum"));

    // Checkpoint round-trip: reloading the final weights reproduces the
    // evaluation dump bit for bit.
    const std::string final_path = (fs::path(out.str()) / "final.ckpt").string();
    atomic_save_checkpoint(final_path, *net, {});
    nn::LoadedCheckpoint final_loaded = nn::load_checkpoint(final_path);
    const EvalResult again = evaluate(*final_loaded.network, *fx.all, cfg.batch_size);
    REQUIRE(again.dump.size() == on_train.dump.size());
    CHECK(again.dump == on_train.dump);
}

TEST_CASE("training is reproducible for a fixed seed") {
    ToyFixture& fx = toy();
    const TrainConfig cfg = exact_epochs_config(2, 1e-3, 42);
    const nlohmann::json ov = tiny_x3d_overrides(2, "multiclass");

    TempDir out1, out2, out3;
    auto n1 = nn::build_network("x3d", ov);
    auto n2 = nn::build_network("x3d", ov);
    const RunRecord r1 = train::train(*n1, *fx.all, *fx.all, cfg, out1.str());
    const RunRecord r2 = train::train(*n2, *fx.all, *fx.all, cfg, out2.str());
    CHECK(r1.train_losses[0] == r2.train_losses[0]);  // identical epoch-0 loss, bit for bit
    CHECK(r1.train_losses == r2.train_losses);
    CHECK(r1.val_losses == r2.val_losses);

    TrainConfig other = cfg;
    other.seed = 43;
    auto n3 = nn::build_network("x3d", ov);
    const RunRecord r3 = train::train(*n3, *fx.all, *fx.all, other, out3.str());
    CHECK(r3.train_losses[0] != r1.train_losses[0]);
}

TEST_CASE("training rejects broken inputs") {
    ToyFixture& fx = toy();

    SUBCASE("empty splits are config errors") {
        data::Manifest empty;
        data::PreprocessOptions opts;
        opts.frames = 8;
        opts.size = 16;
        data::ClipDataset none(empty, fx.dir.str() + "/videos", fx.tax, fx.map, opts, "");
        auto net = nn::build_network("x3d", tiny_x3d_overrides(2, "multiclass"));
        TempDir out;
        CHECK_THROWS_WITH_AS(train::train(*net, none, *fx.all, exact_epochs_config(1, 1e-3, 0), out.str()),
                             doctest::Contains("train split is empty"), std::invalid_argument);
        CHECK_THROWS_WITH_AS(train::train(*net, *fx.all, none, exact_epochs_config(1, 1e-3, 0), out.str()),
                             doctest::Contains("validation split is empty"), std::invalid_argument);
    }
    SUBCASE("head kind and width must match the task") {
        TempDir out;
        auto wrong_width = nn::build_network("x3d", tiny_x3d_overrides(5, "multiclass"));
        CHECK_THROWS_WITH_AS(
            train::train(*wrong_width, *fx.all, *fx.all, exact_epochs_config(1, 1e-3, 0), out.str()),
            doctest::Contains("config error"), std::invalid_argument);
        auto wrong_kind = nn::build_network("x3d", tiny_x3d_overrides(2, "multilabel"));
        CHECK_THROWS_WITH_AS(
            train::train(*wrong_kind, *fx.all, *fx.all, exact_epochs_config(1, 1e-3, 0), out.str()),
            doctest::Contains("multiclass head"), std::invalid_argument);
    }
    SUBCASE("a non-finite loss aborts with epoch and batch diagnostics") {
        auto net = nn::build_network("x3d", tiny_x3d_overrides(2, "multiclass"));
        Rng rng(0);
        net->init_params(rng);
        net->parameters().back()->value.data()[0] = std::nanf("");  // poison the head
        TempDir out;
        try {
            train::train(*net, *fx.all, *fx.all, exact_epochs_config(1, 1e-3, 0), out.str(),
                  /*initialize=*/false);
            FAIL("expected a training error");
        } catch (const std::runtime_error& e) {
            const std::string msg = e.what();
            CHECK(msg.find("non-finite loss") != std::string::npos);
            CHECK(msg.find("epoch 0") != std::string::npos);
            CHECK(msg.find("batch 0") != std::string::npos);
            CHECK(msg.find("clips") != std::string::npos);
        }
    }
}

TEST_CASE("a pretrained checkpoint warm-starts training instead of random init") {
    ToyFixture& fx = toy();
    const nlohmann::json ov = tiny_x3d_overrides(2, "multiclass");

    TempDir out1;
    auto donor = nn::build_network("x3d", ov);
    const RunRecord donor_rec =
        train::train(*donor, *fx.all, *fx.all, exact_epochs_config(3, 1e-2, 5), out1.str());

    TrainConfig warm = exact_epochs_config(1, 1e-9, 5);  // tiny lr: epoch 0 probes the start point
    warm.pretrained_checkpoint = donor_rec.checkpoint_path;
    TempDir out2;
    auto net = nn::build_network("x3d", ov);
    const RunRecord warm_rec = train::train(*net, *fx.all, *fx.all, warm, out2.str());

    TrainConfig cold = warm;
    cold.pretrained_checkpoint.clear();
    TempDir out3;
    auto net2 = nn::build_network("x3d", ov);
    const RunRecord cold_rec = train::train(*net2, *fx.all, *fx.all, cold, out3.str());

    // The warm start picks up where the donor left off: far below a random init.
    CHECK(warm_rec.train_losses[0] < cold_rec.train_losses[0]);
    CHECK(warm_rec.train_losses[0] < donor_rec.train_losses[0]);
}

// ---------------------------------------------------------------------------
// Fine-tuning
// ---------------------------------------------------------------------------

TEST_CASE("fine-tuning swaps the head, keeps the trunk, and fits muscle targets") {
    ToyFixture& fx = toy();

    // Donor: a briefly trained two-class classifier.
    TempDir ec_out;
    auto donor = nn::build_network("x3d", tiny_x3d_overrides(2, "multiclass"));
    const RunRecord ec_rec =
        train::train(*donor, *fx.all, *fx.all, exact_epochs_config(5, 1e-2, 21), ec_out.str());

    SUBCASE("head replacement leaves the trunk checksum untouched") {
        nn::LoadedCheckpoint loaded = nn::load_checkpoint(ec_rec.checkpoint_path);
        const uint64_t before = nn::trunk_checksum(*loaded.network);
        Rng rng(7);
        loaded.network->replace_head(fx.all->num_muscles(), "multilabel", rng);
        CHECK(nn::trunk_checksum(*loaded.network) == before);
        CHECK(loaded.network->head_kind() == "multilabel");
        CHECK(loaded.network->num_classes() == 11);
    }

    SUBCASE("fine-tuning halves the muscle-activation training loss") {
        TempDir ft_out;
        const FineTuneResult ft = fine_tune(ec_rec.checkpoint_path, *fx.all, *fx.all,
                                            exact_epochs_config(30, 1e-2, 7), ft_out.str());
        CHECK(ft.network->head_kind() == "multilabel");
        CHECK(ft.network->num_classes() == 11);
        REQUIRE(ft.record.train_losses.size() == 30);
        CHECK(ft.record.train_losses.back() <= 0.5 * ft.record.train_losses.front());
        CHECK(ft.record.config.at("train").at("task").get<std::string>() == "MGAP");

        // Its best checkpoint evaluates as a muscle predictor.
        nn::LoadedCheckpoint best = nn::load_checkpoint(ft.record.checkpoint_path);
        const EvalResult ev = evaluate(*best.network, *fx.all, 4);
        CHECK(ev.task == "MGAP");
        CHECK(ev.dump.size() == 8);
    }

    SUBCASE("a tampered trunk fails the stored-checksum verification") {
        nn::LoadedCheckpoint loaded = nn::load_checkpoint(ec_rec.checkpoint_path);
        loaded.network->parameters()[0]->value.data()[0] += 1.0f;  // trunk tensor
        const std::string tampered = (fs::path(ec_out.str()) / "tampered.ckpt").string();
        nn::save_checkpoint(tampered, *loaded.network, loaded.metadata);  // stale checksum kept
        TempDir ft_out;
        CHECK_THROWS_WITH_AS(fine_tune(tampered, *fx.all, *fx.all,
                                       exact_epochs_config(1, 1e-3, 0), ft_out.str()),
                             doctest::Contains("trunk checksum mismatch"), std::runtime_error);
    }

    SUBCASE("fine-tuning requires a multiclass donor") {
        TempDir ft_out, ft_out2;
        const FineTuneResult ft = fine_tune(ec_rec.checkpoint_path, *fx.all, *fx.all,
                                            exact_epochs_config(1, 1e-3, 7), ft_out.str());
        CHECK_THROWS_WITH_AS(fine_tune(ft.record.checkpoint_path, *fx.all, *fx.all,
                                       exact_epochs_config(1, 1e-3, 7), ft_out2.str()),
                             doctest::Contains("multiclass"), std::invalid_argument);
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

TEST_CASE("evaluation is deterministic and its dump carries the metrics") {
    ToyFixture& fx = toy();
    auto net = nn::build_network("x3d", tiny_x3d_overrides(2, "multiclass"));
    TempDir out;
    train::train(*net, *fx.all, *fx.all, exact_epochs_config(3, 1e-2, 13), out.str());

    const EvalResult a = evaluate(*net, *fx.all, 3);  // batch size that does not divide 8
    const EvalResult b = evaluate(*net, *fx.all, 8);

    SUBCASE("dump rows mirror the split") {
        REQUIRE(a.dump.size() == 8);
        for (int64_t i = 0; i < fx.all->size(); ++i) {
            CHECK(a.dump[size_t(i)].clip_id == fx.all->clip(i).clip_id);
            CHECK(a.dump[size_t(i)].task == "EC");
            REQUIRE(a.dump[size_t(i)].label.size() == 1);
            CHECK(a.dump[size_t(i)].label[0] == fx.all->label(i));
            CHECK(a.dump[size_t(i)].logits.size() == 2);
        }
    }
    SUBCASE("re-running, even with another batch size, reproduces the dump bit for bit") {
        CHECK(a.dump == b.dump);
        CHECK(a.ec.to_json() == b.ec.to_json());
    }
    SUBCASE("metrics recomputed from the dump match the in-process report") {
        Tensor logits({int64_t(a.dump.size()), 2});
        std::vector<int> labels;
        for (size_t i = 0; i < a.dump.size(); ++i) {
            logits.data()[2 * i] = a.dump[i].logits[0];
            logits.data()[2 * i + 1] = a.dump[i].logits[1];
            labels.push_back(a.dump[i].label[0]);
        }
        const metrics::EcReport re = metrics::multiclass_metrics(logits, labels);
        CHECK(re.to_json() == a.ec.to_json());
    }
    SUBCASE("dump files round-trip through the ensemble reader") {
        const std::string path = (fs::path(out.str()) / "logits.jsonl").string();
        ensemble::write_logit_dump(path, a.dump);
        CHECK(ensemble::read_logit_dump(path) == a.dump);
    }
}

TEST_CASE("multilabel evaluation matches the ensemble probability convention") {
    ToyFixture& fx = toy();
    auto net = nn::build_network("x3d", tiny_x3d_overrides(11, "multilabel"));
    Rng rng(31);
    net->init_params(rng);

    const EvalResult ev = evaluate(*net, *fx.all, 4);
    REQUIRE(ev.task == "MGAP");
    REQUIRE(ev.dump.size() == 8);
    for (size_t i = 0; i < ev.dump.size(); ++i) {
        REQUIRE(ev.dump[i].label.size() == 11);
        REQUIRE(ev.dump[i].logits.size() == 11);
    }

    // Recompute from the dump with the shared sigmoid convention.
    const int64_t n = int64_t(ev.dump.size());
    Tensor probs({n, 11}), targets({n, 11});
    for (int64_t i = 0; i < n; ++i)
        for (int64_t m = 0; m < 11; ++m) {
            probs.data()[i * 11 + m] =
                float(1.0 / (1.0 + std::exp(-double(ev.dump[size_t(i)].logits[size_t(m)]))));
            targets.data()[i * 11 + m] = float(ev.dump[size_t(i)].label[size_t(m)]);
        }
    const metrics::MgapReport re = metrics::multilabel_metrics(probs, targets);
    CHECK(re.to_json() == ev.mgap.to_json());

    // The dump's multi-hot labels are the dataset's muscle targets.
    for (int64_t i = 0; i < n; ++i) {
        const std::vector<float> want = fx.all->muscle_target(i);
        for (int64_t m = 0; m < 11; ++m)
            CHECK(float(ev.dump[size_t(i)].label[size_t(m)]) == want[size_t(m)]);
    }
}

// ---------------------------------------------------------------------------
// Channel-ratio ablation
// ---------------------------------------------------------------------------

TEST_CASE("channel-ratio sweep trains one row per value and tabulates them") {
    ToyFixture& fx = toy();

    // SlowFast wants 32x32 inputs: rebuild the datasets at that size.
    data::PreprocessOptions opts;
    opts.frames = 8;
    opts.size = 32;
    data::ClipDataset ds(fx.manifest, fx.dir.str() + "/videos", fx.tax, fx.map, opts, "");
    ds.cache_frames();

    nlohmann::json base = {{"num_classes", 2}, {"frames", 8}, {"tau", 2},
                           {"alpha", 4},       {"height", 32}, {"width", 32}};
    TrainConfig cfg = exact_epochs_config(1, 1e-3, 17);
    cfg.pretrained_checkpoint = "ignored.ckpt";  // sweeps always train from scratch

    TempDir out;
    const std::vector<int64_t> betas = {2, 8};
    const auto rows = beta_sweep("slowfast_r50", base, betas, ds, ds, ds, cfg, out.str());

    REQUIRE(rows.size() == 2);
    for (size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        CHECK(row.inverse_beta == betas[i]);
        // The ratio propagated into the trained network's configuration.
        CHECK(row.run.config.at("network").at("config").at("inverse_beta").get<int64_t>() ==
              betas[i]);
        CHECK(row.run.config.at("network").at("arch").get<std::string>() == "slowfast_r50");
        CHECK(row.run.config.at("train").at("pretrained_checkpoint").get<std::string>().empty());
        CHECK(row.report.top5 >= row.report.top1);
        // Each row is a complete run directory.
        const fs::path dir = row.run_dir;
        CHECK(fs::exists(dir / "config.json"));
        CHECK(fs::exists(dir / "metrics.json"));
        CHECK(fs::exists(dir / "logits.jsonl"));
        CHECK(fs::exists(dir / "record.json"));
        CHECK(fs::exists(dir / "checkpoints" / "best.ckpt"));
        CHECK(ensemble::read_logit_dump((dir / "logits.jsonl").string()).size() == 8);
    }

    // A wider fast pathway (1/2) costs more compute than a narrow one (1/8).
    auto net_wide = nn::build_network(
        "slowfast_r50", rows[0].run.config.at("network").at("config"));
    auto net_narrow = nn::build_network(
        "slowfast_r50", rows[1].run.config.at("network").at("config"));
    CHECK(net_wide->flops() > net_narrow->flops());

    const std::string md = beta_table_markdown(rows);
    CHECK(md.find("| 1/2 ") != std::string::npos);
    CHECK(md.find("| 1/8 ") != std::string::npos);
    const std::string csv = beta_table_csv(rows);
    CHECK(csv.find("1/2,") != std::string::npos);
    CHECK(csv.find("1/8,") != std::string::npos);
}

TEST_CASE("channel-ratio sweep grid and input validation") {
    ToyFixture& fx = toy();
    const TrainConfig cfg = exact_epochs_config(1, 1e-3, 17);

    CHECK(default_inverse_betas() == std::vector<int64_t>{2, 4, 8, 10, 16});

    TempDir out;
    // All three rejections fire before any training touches the datasets.
    CHECK_THROWS_WITH_AS(beta_sweep("x3d", {}, {2}, *fx.all, *fx.all, *fx.all, cfg, out.str()),
                         doctest::Contains("SlowFast"), std::invalid_argument);
    CHECK_THROWS_AS(beta_sweep("slowfast_r50", {}, {}, *fx.all, *fx.all, *fx.all, cfg, out.str()),
                    std::invalid_argument);
    CHECK_THROWS_AS(beta_sweep("slowfast_r50", {}, {0}, *fx.all, *fx.all, *fx.all, cfg, out.str()),
                    std::invalid_argument);
}
