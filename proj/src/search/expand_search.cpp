#include "exnet/search/expand_search.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace exnet::search {

using models::ExpandFactors;
using nlohmann::json;

const char* op_name(ExpandOp op) {
    switch (op) {
        case ExpandOp::Fast: return "X-Fast";
        case ExpandOp::Temporal: return "X-Temporal";
        case ExpandOp::Spatial: return "X-Spatial";
        case ExpandOp::Depth: return "X-Depth";
        case ExpandOp::Width: return "X-Width";
        case ExpandOp::Bottleneck: return "X-Bottleneck";
    }
    throw std::logic_error("unknown expansion op");
}

ExpandOp op_from_name(const std::string& name) {
    for (const ExpandOp op : kExpandOps) {
        if (name == op_name(op)) return op;
    }
    throw std::invalid_argument("unknown expansion op '" + name + "'");
}

ExpandFactors apply_op(const ExpandFactors& f, ExpandOp op, double m) {
    if (!(m >= 1.0) || !std::isfinite(m)) {
        throw std::invalid_argument("expansion multiplier must be finite and >= 1, got " +
                                    std::to_string(m));
    }
    ExpandFactors out = f;
    switch (op) {
        case ExpandOp::Fast:
            out.gamma_T *= m;
            out.gamma_t *= m;
            break;
        case ExpandOp::Temporal: out.gamma_t *= m; break;
        case ExpandOp::Spatial: out.gamma_s *= m; break;
        case ExpandOp::Depth: out.gamma_d *= m; break;
        case ExpandOp::Width: out.gamma_w *= m; break;
        case ExpandOp::Bottleneck: out.gamma_b *= m; break;
    }
    return out;
}

bool op_touches_gamma_T(ExpandOp op) { return op == ExpandOp::Fast; }
bool op_touches_gamma_t(ExpandOp op) {
    return op == ExpandOp::Fast || op == ExpandOp::Temporal;
}

OpReach reach_complexity(const ExpandFactors& f, ExpandOp op, double target,
                         const ComplexityFn& complexity, const SearchOptions& opts) {
    if (!(target > 0.0) || !std::isfinite(target)) {
        throw std::invalid_argument("complexity target must be positive and finite");
    }
    const auto cost = [&](double m) { return complexity(apply_op(f, op, m)); };

    double lo = 1.0;
    double c_lo = cost(lo);
    OpReach reach;
    if (c_lo >= target) {
        // Even the unmodified factors meet or exceed the target: the only
        // candidate this op offers is "no change".
        reach.multiplier = 1.0;
        reach.complexity = c_lo;
        reach.factors = apply_op(f, op, 1.0);
        reach.reachable = std::abs(c_lo - target) <= opts.tolerance * target;
        return reach;
    }

    // Bracket: grow hi until the cost crosses the target (or the cap).
    double hi = 2.0;
    double c_hi = cost(hi);
    while (c_hi < target && hi < opts.max_multiplier) {
        lo = hi;
        c_lo = c_hi;
        hi *= 2.0;
        c_hi = cost(hi);
    }
    if (c_hi < target) {
        // The cap was reached without crossing: report the nearest value.
        reach.multiplier = hi;
        reach.complexity = c_hi;
        reach.factors = apply_op(f, op, hi);
        reach.reachable = std::abs(c_hi - target) <= opts.tolerance * target;
        return reach;
    }

    // Bisect, maintaining cost(lo) < target <= cost(hi).
    for (int i = 0; i < opts.bisect_iters; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;  // interval exhausted in doubles
        const double c_mid = cost(mid);
        if (c_mid < target) {
            lo = mid;
            c_lo = c_mid;
        } else {
            hi = mid;
            c_hi = c_mid;
        }
    }

    // Quantized costs leave two adjacent achievable values around the target;
    // take the closer one (ties prefer the one that reaches the target).
    const bool take_hi = std::abs(c_hi - target) <= std::abs(c_lo - target);
    reach.multiplier = take_hi ? hi : lo;
    reach.complexity = take_hi ? c_hi : c_lo;
    reach.factors = apply_op(f, op, reach.multiplier);
    reach.reachable = std::abs(reach.complexity - target) <= opts.tolerance * target;
    return reach;
}

namespace {

json factors_json(const ExpandFactors& f) { return f.to_json(); }

double json_number(const json& j, const char* key) {
    const json& v = j.at(key);
    if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
    return v.get<double>();
}

void put_number(json& j, const char* key, double v) {
    if (std::isnan(v)) {
        j[key] = nullptr;
    } else {
        j[key] = v;
    }
}

}  // namespace

json HistoryEntry::to_json() const {
    json j;
    j["op"] = op;
    j["multiplier"] = multiplier;
    j["factors"] = factors_json(factors);
    put_number(j, "complexity", complexity);
    put_number(j, "goodness", goodness);
    return j;
}

HistoryEntry HistoryEntry::from_json(const json& j) {
    HistoryEntry e;
    e.op = j.at("op").get<std::string>();
    op_from_name(e.op);  // validate
    e.multiplier = j.at("multiplier").get<double>();
    e.factors = ExpandFactors::from_json(j.at("factors"));
    e.complexity = json_number(j, "complexity");
    e.goodness = json_number(j, "goodness");
    return e;
}

json ExpansionState::to_json() const {
    json j;
    j["factors"] = factors_json(factors);
    json hist = json::array();
    for (const HistoryEntry& e : history) hist.push_back(e.to_json());
    j["history"] = hist;
    return j;
}

ExpansionState ExpansionState::from_json(const json& j) {
    ExpansionState s;
    s.factors = ExpandFactors::from_json(j.at("factors"));
    for (const json& e : j.at("history")) s.history.push_back(HistoryEntry::from_json(e));
    return s;
}

ExpansionState initial_state() { return ExpansionState{}; }

ExpandFactors replay_history(const std::vector<HistoryEntry>& history) {
    ExpandFactors f;  // all ones
    for (const HistoryEntry& e : history) f = apply_op(f, op_from_name(e.op), e.multiplier);
    return f;
}

json CandidateLog::to_json() const {
    json j;
    j["step"] = step;
    j["op"] = op;
    j["multiplier"] = multiplier;
    j["factors"] = factors_json(factors);
    put_number(j, "complexity", complexity);
    put_number(j, "goodness", goodness);
    j["adopted"] = adopted;
    return j;
}

CandidateLog CandidateLog::from_json(const json& j) {
    CandidateLog c;
    c.step = j.at("step").get<int64_t>();
    c.op = j.at("op").get<std::string>();
    op_from_name(c.op);  // validate
    c.multiplier = j.at("multiplier").get<double>();
    c.factors = ExpandFactors::from_json(j.at("factors"));
    c.complexity = json_number(j, "complexity");
    c.goodness = json_number(j, "goodness");
    c.adopted = j.at("adopted").get<bool>();
    return c;
}

std::string search_log_to_jsonl(const std::vector<CandidateLog>& log) {
    std::string out;
    for (const CandidateLog& row : log) {
        out += row.to_json().dump();
        out += '\n';
    }
    return out;
}

std::vector<CandidateLog> search_log_from_jsonl(const std::string& text) {
    std::vector<CandidateLog> log;
    std::istringstream stream(text);
    std::string line;
    size_t line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        try {
            log.push_back(CandidateLog::from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw std::runtime_error("search log: line " + std::to_string(line_no) +
                                     " is invalid: " + e.what());
        }
    }
    return log;
}

SearchResult forward_expand(ExpansionState state, const std::vector<double>& step_targets,
                            const GoodnessFn& goodness, const ComplexityFn& complexity,
                            const SearchOptions& opts) {
    for (size_t i = 0; i < step_targets.size(); ++i) {
        const bool positive = step_targets[i] > 0.0 && std::isfinite(step_targets[i]);
        if (!positive || (i > 0 && step_targets[i] <= step_targets[i - 1])) {
            throw std::invalid_argument(
                "search error: step targets must be positive, finite and strictly "
                "increasing");
        }
    }

    SearchResult result;
    result.state = std::move(state);
    for (const double target : step_targets) {
        const int64_t step_index = int64_t(result.state.history.size());

        // One candidate per operation, in priority order.
        struct Candidate {
            ExpandOp op;
            OpReach reach;
            double goodness = 0.0;
        };
        std::vector<Candidate> candidates;
        std::vector<std::pair<ExpandOp, double>> nearest;  // unreachable ops
        for (const ExpandOp op : kExpandOps) {
            const OpReach reach =
                reach_complexity(result.state.factors, op, target, complexity, opts);
            if (reach.reachable) {
                candidates.push_back({op, reach, 0.0});
            } else {
                nearest.emplace_back(op, reach.complexity);
            }
        }
        if (candidates.empty()) {
            char head[160];
            std::snprintf(head, sizeof(head),
                          "search error: no expansion operation reaches complexity %g "
                          "within %g%%; nearest achievable:",
                          target, opts.tolerance * 100.0);
            std::string msg = head;
            for (const auto& [op, c] : nearest) {
                char part[96];
                std::snprintf(part, sizeof(part), " %s C=%g", op_name(op), c);
                msg += part;
            }
            throw std::runtime_error(msg);
        }

        for (Candidate& cand : candidates) {
            try {
                cand.goodness = goodness(cand.reach.factors);
            } catch (const std::exception& e) {
                char buf[192];
                std::snprintf(buf, sizeof(buf),
                              "search error: goodness evaluation failed for step %lld "
                              "candidate %s (multiplier %g): ",
                              static_cast<long long>(step_index), op_name(cand.op),
                              cand.reach.multiplier);
                throw std::runtime_error(buf + std::string(e.what()));
            }
        }

        // Adopt the best candidate; priority order breaks exact ties.
        size_t best = 0;
        for (size_t i = 1; i < candidates.size(); ++i) {
            if (candidates[i].goodness > candidates[best].goodness) best = i;
        }

        for (size_t i = 0; i < candidates.size(); ++i) {
            const Candidate& cand = candidates[i];
            CandidateLog row;
            row.step = step_index;
            row.op = op_name(cand.op);
            row.multiplier = cand.reach.multiplier;
            row.factors = cand.reach.factors;
            row.complexity = cand.reach.complexity;
            row.goodness = cand.goodness;
            row.adopted = i == best;
            result.log.push_back(row);
        }

        const Candidate& winner = candidates[best];
        HistoryEntry entry;
        entry.op = op_name(winner.op);
        entry.multiplier = winner.reach.multiplier;
        entry.factors = winner.reach.factors;
        entry.complexity = winner.reach.complexity;
        entry.goodness = winner.goodness;
        result.state.factors = winner.reach.factors;
        result.state.history.push_back(entry);
    }

    if (!opts.log_path.empty()) {
        std::ofstream out(opts.log_path, std::ios::binary);
        if (!out) {
            throw std::runtime_error("cannot open search log '" + opts.log_path +
                                     "' for writing");
        }
        const std::string text = search_log_to_jsonl(result.log);
        out.write(text.data(), std::streamsize(text.size()));
    }
    return result;
}

ExpansionState backward_contract(ExpansionState state, double target_c,
                                 const ComplexityFn& complexity,
                                 const SearchOptions& opts) {
    if (!(target_c > 0.0) || !std::isfinite(target_c)) {
        throw std::invalid_argument("contraction error: target complexity must be positive");
    }
    const double current = complexity(state.factors);
    if (current <= target_c) return state;  // nothing to reduce

    if (state.history.empty()) {
        throw std::invalid_argument(
            "contraction error: state has no expansion steps to reduce");
    }
    const HistoryEntry& last = state.history.back();
    const ExpandOp op = op_from_name(last.op);
    const ExpandFactors before_last = state.history.size() >= 2
                                          ? state.history[state.history.size() - 2].factors
                                          : ExpandFactors{};

    // The state must be the product of its own history.
    {
        const ExpandFactors replayed = apply_op(before_last, op, last.multiplier);
        const bool consistent =
            replayed.gamma_T == state.factors.gamma_T && replayed.gamma_t == state.factors.gamma_t &&
            replayed.gamma_s == state.factors.gamma_s && replayed.gamma_w == state.factors.gamma_w &&
            replayed.gamma_b == state.factors.gamma_b && replayed.gamma_d == state.factors.gamma_d;
        if (!consistent) {
            throw std::invalid_argument(
                "contraction error: state factors do not match the recorded history");
        }
    }

    const auto cost = [&](double m) { return complexity(apply_op(before_last, op, m)); };
    if (cost(1.0) > target_c) {
        char buf[192];
        std::snprintf(buf, sizeof(buf),
                      "contraction error: undoing the last step (%s) still leaves "
                      "complexity %g above the target %g; remove the step instead",
                      last.op.c_str(), cost(1.0), target_c);
        throw std::runtime_error(buf);
    }

    // Largest multiplier in [1, last.multiplier] whose cost stays <= target.
    double lo = 1.0;
    double hi = last.multiplier;
    for (int i = 0; i < opts.bisect_iters; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (cost(mid) <= target_c) {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    HistoryEntry& entry = state.history.back();
    entry.multiplier = lo;
    entry.factors = apply_op(before_last, op, lo);
    entry.complexity = cost(lo);
    state.factors = entry.factors;
    return state;
}

ComplexityFn x3d_complexity(models::X3DConfig base) {
    return [base](const ExpandFactors& f) {
        models::X3DConfig cfg = base;
        cfg.factors = f;
        return double(models::x3d_flops(cfg));
    };
}

}  // namespace exnet::search
