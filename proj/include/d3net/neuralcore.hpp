#pragma once

#include "d3net/neuralcore/ops.hpp"
#include "d3net/neuralcore/optim.hpp"
#include "d3net/neuralcore/tensor.hpp"
