#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "exnet/models/x3d.hpp"

namespace exnet::search {

// The six expansion operations, in the fixed priority order used to break
// goodness ties deterministically.
enum class ExpandOp { Fast, Temporal, Spatial, Depth, Width, Bottleneck };

inline constexpr std::array<ExpandOp, 6> kExpandOps = {
    ExpandOp::Fast,    ExpandOp::Temporal, ExpandOp::Spatial,
    ExpandOp::Depth,   ExpandOp::Width,    ExpandOp::Bottleneck,
};

const char* op_name(ExpandOp op);              // "X-Fast", "X-Temporal", ...
ExpandOp op_from_name(const std::string& name);  // inverse; throws on unknown

// Returns `f` with the operation's factor multiplied by m (m >= 1).
// X-Fast raises the sampling-rate factor and the frame count together (faster
// sampling of a fixed-duration clip yields proportionally more frames); every
// other operation scales exactly one factor:
//   X-Temporal -> gamma_t, X-Spatial -> gamma_s, X-Depth -> gamma_d,
//   X-Width -> gamma_w, X-Bottleneck -> gamma_b.
models::ExpandFactors apply_op(const models::ExpandFactors& f, ExpandOp op, double m);

// True for the factor fields `op` modifies (same indexing for both members of
// X-Fast). Used to assert that contraction touches only the last-expanded op.
bool op_touches_gamma_T(ExpandOp op);
bool op_touches_gamma_t(ExpandOp op);

// Score of a factor setting; higher is better. Must be deterministic for a
// given construction (seeded training run, fixed synthetic formula, ...).
using GoodnessFn = std::function<double(const models::ExpandFactors&)>;
// Cost of a factor setting, e.g. FLOPs of the network it would build. Must be
// non-decreasing in every factor.
using ComplexityFn = std::function<double(const models::ExpandFactors&)>;

struct SearchOptions {
    double tolerance = 0.1;       // accept |C - target| <= tolerance * target
    int bisect_iters = 60;        // binary-search refinement iterations
    double max_multiplier = 1e6;  // growth cap while bracketing a target
    std::string log_path;         // when set: candidate log written here (JSONL)
};

// Result of steering one operation's multiplier toward a complexity target by
// scalar binary search. Complexity may be quantized (depths and widths round
// to integers), so the target is hit only within tolerance; `reachable` is
// false when even the closest achievable complexity misses the band, in which
// case `complexity` reports that nearest value.
struct OpReach {
    bool reachable = false;
    double multiplier = 1.0;
    double complexity = 0.0;
    models::ExpandFactors factors;
};

OpReach reach_complexity(const models::ExpandFactors& f, ExpandOp op, double target,
                         const ComplexityFn& complexity, const SearchOptions& opts = {});

// One accepted expansion step.
struct HistoryEntry {
    std::string op;                 // op_name of the adopted operation
    double multiplier = 1.0;        // factor delta applied by the step
    models::ExpandFactors factors;  // state after the step
    double complexity = 0.0;        // C(factors)
    double goodness = 0.0;          // J measured when the step was adopted

    nlohmann::json to_json() const;
    static HistoryEntry from_json(const nlohmann::json& j);
};

// Factors plus the ordered steps that produced them from the all-ones start.
struct ExpansionState {
    models::ExpandFactors factors;
    std::vector<HistoryEntry> history;

    nlohmann::json to_json() const;
    static ExpansionState from_json(const nlohmann::json& j);
};

ExpansionState initial_state();

// Re-applies every recorded (op, multiplier) to the all-ones factors; equals
// state.factors for any state this module produced.
models::ExpandFactors replay_history(const std::vector<HistoryEntry>& history);

// One candidate evaluation, as logged to the JSONL search log.
struct CandidateLog {
    int64_t step = 0;  // 0-based index into the overall step sequence
    std::string op;
    double multiplier = 1.0;
    models::ExpandFactors factors;
    double complexity = 0.0;
    double goodness = 0.0;
    bool adopted = false;

    nlohmann::json to_json() const;
    static CandidateLog from_json(const nlohmann::json& j);
};

std::string search_log_to_jsonl(const std::vector<CandidateLog>& log);
std::vector<CandidateLog> search_log_from_jsonl(const std::string& text);

struct SearchResult {
    ExpansionState state;
    std::vector<CandidateLog> log;  // every evaluated candidate, in order
};

// Progressive expansion. For each target c (strictly increasing): builds one
// candidate per operation by steering that operation's multiplier until the
// candidate's complexity lands within tolerance of c, scores each reachable
// candidate with J, and adopts the best (ties: kExpandOps order). Candidates
// are evaluated sequentially in priority order. Throws a search error naming
// the nearest achievable complexity per operation when no candidate reaches
// a target, and propagates evaluator failures tagged with the candidate.
// When opts.log_path is set the candidate log is also written there
// (overwriting the file).
SearchResult forward_expand(ExpansionState state, const std::vector<double>& step_targets,
                            const GoodnessFn& goodness, const ComplexityFn& complexity,
                            const SearchOptions& opts = {});

// Reduces only the factor changed by the last history entry (binary search on
// its multiplier) until C(result) <= target_c, keeping C as close to target_c
// as the quantized complexity allows (>= 0.9 * target_c when achievable).
// A state already within the target is returned unchanged. Throws a
// contraction error advising removal of the step when even undoing the last
// expansion entirely stays above the target.
ExpansionState backward_contract(ExpansionState state, double target_c,
                                 const ComplexityFn& complexity,
                                 const SearchOptions& opts = {});

// Complexity function counting FLOPs of the expanded network that `base`
// (with its factors replaced by the probed ones) describes.
ComplexityFn x3d_complexity(models::X3DConfig base);

}  // namespace exnet::search
