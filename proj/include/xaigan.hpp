#pragma once

#include "xaigan/adam.hpp"
#include "xaigan/augment.hpp"
#include "xaigan/checkpoint.hpp"
#include "xaigan/data.hpp"
#include "xaigan/error.hpp"
#include "xaigan/experiment.hpp"
#include "xaigan/explainers.hpp"
#include "xaigan/gradient_check.hpp"
#include "xaigan/image_io.hpp"
#include "xaigan/kernels.hpp"
#include "xaigan/layers.hpp"
#include "xaigan/loss.hpp"
#include "xaigan/metrics.hpp"
#include "xaigan/models.hpp"
#include "xaigan/network.hpp"
#include "xaigan/tensor.hpp"
#include "xaigan/training.hpp"
