// Structural checks for the two-pathway network: channel-ratio math across
// the width sweep, lateral temporal geometry, gradient completeness, cost
// accounting, and checkpoint round trips.

#include <cmath>
#include <cstdio>
#include <set>

#include "doctest.h"
#include "exnet/models/slowfast.hpp"
#include "exnet/nn/checkpoint.hpp"
#include "exnet/nn/loss.hpp"

using namespace exnet;
using models::SlowFast;
using models::SlowFastConfig;

namespace {

SlowFastConfig tiny_config(int depth = 50, int64_t inverse_beta = 8) {
    SlowFastConfig cfg;
    cfg.depth = depth;
    cfg.num_classes = 4;
    cfg.frames = 8;
    cfg.tau = 2;
    cfg.alpha = 4;
    cfg.inverse_beta = inverse_beta;
    cfg.height = 32;
    cfg.width = 32;
    return cfg;
}

Tensor random_input(const SlowFastConfig& cfg, int64_t n, Rng& rng) {
    Tensor x = Tensor::zeros({n, cfg.in_channels, cfg.frames, cfg.height, cfg.width});
    for (int64_t i = 0; i < x.numel(); ++i) x[i] = float(rng.uniform(-1.0, 1.0));
    return x;
}

}  // namespace

TEST_CASE("fast-path widths follow round(width/inverse_beta) across the sweep") {
    for (int64_t ib : {2, 4, 8, 10, 16}) {
        SlowFast net(tiny_config(50, ib));
        for (int64_t w : {64, 256, 512, 1024, 2048})
            CHECK(net.fast_width(w) == std::llround(double(w) / double(ib)));
        // Head input: widened slow trunk plus the fast global average.
        const int64_t fw = net.fast_width(2048);
        CHECK(net.head_in_features() == 2048 + 2 * fw + fw);
    }
}

TEST_CASE("all five laterals map fast frames onto slow frames") {
    for (int64_t ib : {2, 4, 8, 10, 16}) {
        SlowFast net(tiny_config(50, ib));
        CHECK(net.fast_frames() == 8);
        CHECK(net.slow_frames() == 4);
        CHECK(net.lateral_stride() == 2);
        const auto lat_t = net.lateral_output_frames();
        REQUIRE(lat_t.size() == 5);
        for (int64_t t : lat_t) CHECK(t == net.slow_frames());
    }
    // Full-rate configuration: 32 frames, stride 2 slow path.
    SlowFastConfig cfg = tiny_config();
    cfg.frames = 32;
    SlowFast net(cfg);
    CHECK(net.slow_frames() == 16);
    CHECK(net.fast_frames() == 32);
    for (int64_t t : net.lateral_output_frames()) CHECK(t == 16);
}

TEST_CASE("forward produces logits and backward reaches every parameter") {
    Rng rng(211);
    SlowFast net(tiny_config());
    net.init_params(rng);
    Tensor x = random_input(tiny_config(), 2, rng);
    Tensor logits = net.forward(x, true);
    REQUIRE(logits.shape() == std::vector<int64_t>{2, 4});
    for (int64_t i = 0; i < logits.numel(); ++i) CHECK(std::isfinite(logits[i]));

    Tensor dlogits = Tensor::zeros({2, 4});
    for (int64_t i = 0; i < dlogits.numel(); ++i) dlogits[i] = float(rng.uniform(-1.0, 1.0));
    for (auto* p : net.parameters()) p->zero_grad();
    net.backward(dlogits);

    int dead = 0;
    for (auto* p : net.parameters()) {
        bool any = false;
        for (int64_t i = 0; i < p->grad.numel() && !any; ++i) any = p->grad[i] != 0.0f;
        if (!any) {
            ++dead;
            MESSAGE("no gradient reached ", p->name);
        }
    }
    CHECK(dead == 0);
}

TEST_CASE("parameter names are unique and the head is separable") {
    SlowFast net(tiny_config());
    std::set<std::string> names;
    int head_params = 0;
    for (auto* p : net.parameters()) {
        CHECK(names.insert(p->name).second);
        if (p->name.rfind("head.", 0) == 0) ++head_params;
    }
    for (auto* b : net.buffers()) CHECK(names.insert(b->name).second);
    CHECK(head_params == 2);  // weight and bias
}

TEST_CASE("cost accounting: R101 exceeds R50, thinner fast path costs less") {
    SlowFast r50(tiny_config(50));
    SlowFast r101(tiny_config(101));
    CHECK(r50.flops() > 0);
    CHECK(r101.flops() > r50.flops());
    CHECK(r101.param_count() > r50.param_count());

    SlowFast wide(tiny_config(50, 4));
    CHECK(wide.flops() > r50.flops());
    CHECK(wide.param_count() > r50.param_count());

    // Trainable scalars and cost accounting agree on the parameter count.
    int64_t listed = 0;
    for (auto* p : r50.parameters()) listed += p->value.numel();
    CHECK(listed == r50.param_count());
}

TEST_CASE("same seed gives identical networks; replace_head keeps the trunk") {
    Rng rng_a(31337), rng_b(31337);
    SlowFast a(tiny_config()), b(tiny_config());
    a.init_params(rng_a);
    b.init_params(rng_b);
    Rng data_rng(5);
    Tensor x = random_input(tiny_config(), 1, data_rng);
    Tensor ya = a.forward(x, false);
    Tensor yb = b.forward(x, false);
    for (int64_t i = 0; i < ya.numel(); ++i) CHECK(ya[i] == yb[i]);

    const uint64_t before = nn::trunk_checksum(a);
    Rng head_rng(7);
    a.replace_head(11, "multilabel", head_rng);
    CHECK(nn::trunk_checksum(a) == before);
    CHECK(a.num_classes() == 11);
    CHECK(a.head_kind() == "multilabel");
    Tensor y2 = a.forward(x, false);
    CHECK(y2.shape() == std::vector<int64_t>{1, 11});
}

TEST_CASE("checkpoint round trip restores configuration and outputs") {
    Rng rng(977);
    SlowFast net(tiny_config());
    net.init_params(rng);
    // Push some data through in training mode so running stats are non-trivial.
    Tensor warm = random_input(tiny_config(), 2, rng);
    net.forward(warm, true);

    Tensor x = random_input(tiny_config(), 1, rng);
    Tensor y_before = net.forward(x, false);

    const std::string path = "slowfast_roundtrip.ckpt";
    nn::save_checkpoint(path, net, {{"task", "multiclass"}, {"epoch", 3}});
    auto loaded = nn::load_checkpoint(path);
    std::remove(path.c_str());

    CHECK(loaded.metadata.at("epoch") == 3);
    CHECK(loaded.config.at("arch") == "slowfast_r50");
    CHECK(loaded.network->num_classes() == 4);
    CHECK(nn::trunk_checksum(*loaded.network) == nn::trunk_checksum(net));
    Tensor y_after = loaded.network->forward(x, false);
    REQUIRE(y_after.same_shape(y_before));
    for (int64_t i = 0; i < y_before.numel(); ++i) CHECK(y_after[i] == y_before[i]);
}

TEST_CASE("invalid configurations are rejected") {
    SlowFastConfig cfg = tiny_config();
    cfg.frames = 9;  // not divisible by tau
    CHECK_THROWS(SlowFast{cfg});
    cfg = tiny_config(42);
    CHECK_THROWS(SlowFast{cfg});  // unsupported depth comes from tiny_config(42) depth=42
}
