#pragma once

#include "dpci/core/checkpoint.hpp"
#include "dpci/core/errors.hpp"
#include "dpci/core/ops.hpp"
#include "dpci/core/parallel.hpp"
#include "dpci/core/tensor.hpp"
#include "dpci/data/sequence.hpp"
#include "dpci/data/synthetic.hpp"
#include "dpci/eval/ablation.hpp"
#include "dpci/eval/diagnostics.hpp"
#include "dpci/eval/evaluate.hpp"
#include "dpci/eval/report.hpp"
#include "dpci/geometry/chamfer.hpp"
#include "dpci/geometry/emd.hpp"
#include "dpci/geometry/emd_loss.hpp"
#include "dpci/geometry/knn.hpp"
#include "dpci/geometry/normalize.hpp"
#include "dpci/geometry/point_cloud.hpp"
#include "dpci/model/config.hpp"
#include "dpci/model/idea_net.hpp"
#include "dpci/model/layers.hpp"
#include "dpci/training/adam.hpp"
#include "dpci/training/config.hpp"
#include "dpci/training/loss.hpp"
#include "dpci/training/samples.hpp"
#include "dpci/training/trainer.hpp"
#include "dpci/training/gradcheck.hpp"
