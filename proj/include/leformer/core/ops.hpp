#pragma once

#include "leformer/core/ops_conv.hpp"
#include "leformer/core/ops_elementwise.hpp"
#include "leformer/core/ops_matmul.hpp"
#include "leformer/core/ops_reduce.hpp"
#include "leformer/core/ops_shape.hpp"
