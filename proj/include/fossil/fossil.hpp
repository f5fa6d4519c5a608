#pragma once

#include "fossil/auc.hpp"
#include "fossil/baselines.hpp"
#include "fossil/common.hpp"
#include "fossil/context.hpp"
#include "fossil/dataset.hpp"
#include "fossil/evaluation.hpp"
#include "fossil/fossil_model.hpp"
#include "fossil/model_io.hpp"
#include "fossil/models.hpp"
#include "fossil/rng.hpp"
#include "fossil/sbpr.hpp"
#include "fossil/sparse_delta.hpp"
