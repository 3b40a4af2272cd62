#pragma once

// Umbrella header for the full library.

#include "sgsf/attention.hpp"
#include "sgsf/augment.hpp"
#include "sgsf/blocks.hpp"
#include "sgsf/checkpoint.hpp"
#include "sgsf/common.hpp"
#include "sgsf/config.hpp"
#include "sgsf/dataset.hpp"
#include "sgsf/degrade.hpp"
#include "sgsf/grad_check.hpp"
#include "sgsf/grad_suite.hpp"
#include "sgsf/guidance.hpp"
#include "sgsf/image_io.hpp"
#include "sgsf/layers.hpp"
#include "sgsf/loss.hpp"
#include "sgsf/metrics.hpp"
#include "sgsf/model.hpp"
#include "sgsf/ops.hpp"
#include "sgsf/optim.hpp"
#include "sgsf/segmentation.hpp"
#include "sgsf/tensor.hpp"
#include "sgsf/train.hpp"
