#pragma once

#include "logitcal/tensor.hpp"
#include "logitcal/network.hpp"
#include "logitcal/losses.hpp"
#include "logitcal/dataset.hpp"
#include "logitcal/zoo.hpp"
#include "logitcal/weights_io.hpp"
#include "logitcal/diagnostics.hpp"
#include "logitcal/attack.hpp"
#include "logitcal/plan.hpp"
#include "logitcal/bench.hpp"
