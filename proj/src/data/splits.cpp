#include "exnet/data/splits.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "exnet/core/rng.hpp"

namespace exnet::data {
namespace {

std::string class_label(int id, const std::vector<std::string>& names) {
    if (id >= 0 && size_t(id) < names.size()) return "'" + names[size_t(id)] + "'";
    return "id " + std::to_string(id);
}

struct ClassQuota {
    int id = 0;
    int64_t size = 0;
    int64_t val = 0;
    int64_t test = 0;
    double val_rem = 0.0;
    double test_rem = 0.0;

    int64_t assigned() const { return val + test; }
};

// Adjusts the chosen split's quotas until they sum to `target`, moving one
// clip at a time. Growth prefers the largest leftover fractional quota,
// shrinkage the smallest; ties break on class size then id so the result is
// deterministic. `headroom`/`floor` keep one train clip and one split clip
// per class.
void balance(std::vector<ClassQuota>& quotas, bool adjust_val, int64_t target) {
    auto count = [&](ClassQuota& q) -> int64_t& { return adjust_val ? q.val : q.test; };
    auto rem = [&](const ClassQuota& q) { return adjust_val ? q.val_rem : q.test_rem; };

    int64_t current = 0;
    for (auto& q : quotas) current += count(q);

    while (current != target) {
        ClassQuota* pick = nullptr;
        if (current < target) {
            for (auto& q : quotas) {
                if (q.assigned() + 1 > q.size - 1) continue;  // keep one train clip
                if (!pick || rem(q) > rem(*pick) ||
                    (rem(q) == rem(*pick) &&
                     (q.size > pick->size || (q.size == pick->size && q.id < pick->id))))
                    pick = &q;
            }
            if (!pick)
                throw std::runtime_error(
                    "cannot reach split targets: no class has spare clips to give");
            ++count(*pick);
            ++current;
        } else {
            for (auto& q : quotas) {
                if (count(q) <= 1) continue;  // keep every class in every split
                if (!pick || rem(q) < rem(*pick) ||
                    (rem(q) == rem(*pick) &&
                     (q.size > pick->size || (q.size == pick->size && q.id < pick->id))))
                    pick = &q;
            }
            if (!pick)
                throw std::runtime_error(
                    "cannot reach split targets: every class is at its one-clip minimum");
            --count(*pick);
            --current;
        }
    }
}

}  // namespace

SplitCounts build_splits(std::vector<Clip>& clips, const SplitRatios& ratios, uint64_t seed,
                         const std::vector<std::string>& class_names) {
    if (!(ratios.train > 0.0) || !(ratios.val > 0.0) || !(ratios.test > 0.0))
        throw std::invalid_argument("split ratios must all be positive");
    const double sum = ratios.train + ratios.val + ratios.test;
    if (std::fabs(sum - 1.0) > 1e-6)
        throw std::invalid_argument("split ratios must sum to 1, got " + std::to_string(sum));
    if (clips.empty()) throw std::invalid_argument("cannot split an empty clip list");

    std::map<int, std::vector<size_t>> by_class;
    for (size_t i = 0; i < clips.size(); ++i) {
        if (clips[i].exercise_id < 0)
            throw std::invalid_argument("clip '" + clips[i].clip_id + "' has no exercise label");
        by_class[clips[i].exercise_id].push_back(i);
    }
    for (const auto& [id, members] : by_class) {
        if (members.size() < 3)
            throw std::runtime_error("stratification error: class " +
                                     class_label(id, class_names) + " has only " +
                                     std::to_string(members.size()) +
                                     " clips; at least 3 are needed to cover train/val/test");
    }

    const auto total = int64_t(clips.size());
    const auto num_classes = int64_t(by_class.size());
    int64_t target_val = std::max<int64_t>(llround(double(total) * ratios.val), num_classes);
    int64_t target_test = std::max<int64_t>(llround(double(total) * ratios.test), num_classes);
    const int64_t target_train = total - target_val - target_test;
    if (target_train < num_classes)
        throw std::invalid_argument("split ratios leave fewer training clips than classes");

    std::vector<ClassQuota> quotas;
    quotas.reserve(size_t(num_classes));
    for (const auto& [id, members] : by_class) {
        ClassQuota q;
        q.id = id;
        q.size = int64_t(members.size());
        const double want_val = double(q.size) * ratios.val;
        const double want_test = double(q.size) * ratios.test;
        q.val = std::max<int64_t>(int64_t(std::floor(want_val)), 1);
        q.test = std::max<int64_t>(int64_t(std::floor(want_test)), 1);
        q.val_rem = want_val - std::floor(want_val);
        q.test_rem = want_test - std::floor(want_test);
        // Extreme ratios can overfill small classes; give train its clip back.
        while (q.assigned() > q.size - 1) {
            if (q.val >= q.test && q.val > 1)
                --q.val;
            else if (q.test > 1)
                --q.test;
            else
                throw std::runtime_error("stratification error: class " +
                                         class_label(id, class_names) +
                                         " cannot cover all three splits");
        }
        quotas.push_back(q);
    }

    balance(quotas, /*adjust_val=*/true, target_val);
    balance(quotas, /*adjust_val=*/false, target_test);

    const Rng root(seed);
    SplitCounts counts;
    for (const auto& q : quotas) {
        auto members = by_class[q.id];
        std::sort(members.begin(), members.end(), [&](size_t a, size_t b) {
            const Clip& ca = clips[a];
            const Clip& cb = clips[b];
            if (ca.source_video != cb.source_video) return ca.source_video < cb.source_video;
            if (ca.start != cb.start) return ca.start < cb.start;
            return ca.clip_id < cb.clip_id;
        });
        Rng rng = root.fork(uint64_t(q.id));
        rng.shuffle(members);

        int64_t pos = 0;
        for (; pos < q.val; ++pos) clips[members[size_t(pos)]].split = "val";
        for (; pos < q.val + q.test; ++pos) clips[members[size_t(pos)]].split = "test";
        for (; pos < q.size; ++pos) clips[members[size_t(pos)]].split = "train";
        counts.val += q.val;
        counts.test += q.test;
        counts.train += q.size - q.val - q.test;
    }
    return counts;
}

}  // namespace exnet::data
