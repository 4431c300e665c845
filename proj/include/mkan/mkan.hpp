#pragma once

#include "mkan/basis_matrix.hpp"
#include "mkan/bench.hpp"
#include "mkan/datasets.hpp"
#include "mkan/error.hpp"
#include "mkan/format.hpp"
#include "mkan/grid.hpp"
#include "mkan/kan.hpp"
#include "mkan/log.hpp"
#include "mkan/matrix_eval.hpp"
#include "mkan/model_io.hpp"
#include "mkan/parallel.hpp"
#include "mkan/splines.hpp"
#include "mkan/tensor.hpp"
#include "mkan/training.hpp"
#include "mkan/verify.hpp"
