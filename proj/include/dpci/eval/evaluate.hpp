#pragma once

#include <functional>
#include <string>

#include "dpci/data/sequence.hpp"
#include "dpci/eval/report.hpp"
#include "dpci/geometry/chamfer.hpp"
#include "dpci/geometry/emd.hpp"
#include "dpci/model/idea_net.hpp"

namespace dpci {

/// One held-out position to reconstruct from its LTR endpoints.
struct EvalQuery {
    std::size_t pair;
    std::size_t j;
    std::size_t k;
    double t;
    const PointCloud& p0;
    const PointCloud& p1;
};

using InterpolateFn = std::function<PointCloud(const EvalQuery&)>;

/// Subsamples at stride k_test and scores every held-out frame against the
/// interpolator's output. Rows come out in time order.
inline EvalReport evaluate(const InterpolateFn& interp, const Sequence& seq, std::size_t k_test,
                           std::size_t emd_cap = kExactEmdCap) {
    LtrSplit split = subsample_ltr(seq, k_test);
    EvalReport r;
    r.k_test = k_test;
    for (const auto& h : split.heldout) {
        EvalQuery q{h.pair, h.j, k_test, h.t, split.ltr.frames[h.pair], split.ltr.frames[h.pair + 1]};
        PointCloud pred = interp(q);
        if (pred.size() != h.frame.size()) {
            throw ConfigError("evaluate: interpolator returned " + std::to_string(pred.size()) + " points, expected " +
                              std::to_string(h.frame.size()));
        }
        r.rows.push_back({h.pair, h.j, h.t, emd(pred, h.frame, emd_cap).cost, chamfer(pred, h.frame)});
    }
    r.recompute();
    return r;
}

/// Scores the network's picked output.
template <typename T>
EvalReport evaluate(IdeaNet<T>& net, const Sequence& seq, std::size_t k_test, std::string checkpoint_id = {},
                    std::size_t emd_cap = kExactEmdCap) {
    if (seq.num_points() <= static_cast<std::size_t>(net.config().k_neighbors)) {
        throw ConfigError("evaluate: model uses k_neighbors = " + std::to_string(net.config().k_neighbors) +
                          ", sequence has only " + std::to_string(seq.num_points()) + " points");
    }
    EvalReport r = evaluate([&](const EvalQuery& q) { return interpolate(net, q.p0, q.p1, q.t).picked; }, seq, k_test,
                            emd_cap);
    r.checkpoint_id = std::move(checkpoint_id);
    return r;
}

}  // namespace dpci
