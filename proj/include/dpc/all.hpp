#pragma once

#include "dpc/autodiff.hpp"
#include "dpc/benchmarks.hpp"
#include "dpc/checkpoint.hpp"
#include "dpc/config.hpp"
#include "dpc/dpc.hpp"
#include "dpc/error.hpp"
#include "dpc/evaluation.hpp"
#include "dpc/experiment.hpp"
#include "dpc/io.hpp"
#include "dpc/kernel.hpp"
#include "dpc/log.hpp"
#include "dpc/mlp.hpp"
#include "dpc/optim.hpp"
#include "dpc/pipeline.hpp"
#include "dpc/random.hpp"
#include "dpc/sde.hpp"
#include "dpc/train.hpp"
