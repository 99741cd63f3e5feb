#pragma once

#include <string>
#include <vector>

#include "dpci/eval/evaluate.hpp"
#include "dpci/training/trainer.hpp"

namespace dpci {

struct AblationSpec {
    Variant variant = Variant::full;
    ModelConfig model;  // its variant field is overridden by `variant`
    TrainConfig train;
    std::size_t k_test = 3;
};

template <typename T>
struct AblationRun {
    Variant variant;
    EvalReport report;
    std::uint64_t sample_hash;
    int loss_terms;
    IdeaNet<T> model;
};

/// Trains the variant from the shared seed and evaluates it. Every variant sees the
/// same initialization stream and the same sample stream.
template <typename T>
AblationRun<T> run_ablation(const AblationSpec& spec, const std::vector<Sequence>& train_set, const Sequence& eval_seq,
                            const TrainOptions& opt = {}) {
    ModelConfig mcfg = spec.model;
    mcfg.variant = spec.variant;
    TrainResult<T> tr = train<T>(train_set, mcfg, spec.train, opt);
    EvalReport rep = evaluate(tr.model, eval_seq, spec.k_test, variant_name(spec.variant));
    return {spec.variant, std::move(rep), tr.sample_hash, tr.loss_terms, std::move(tr.model)};
}

}  // namespace dpci
