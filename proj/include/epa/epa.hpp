#pragma once

#include "epa/baselines.hpp"
#include "epa/bundle.hpp"
#include "epa/core.hpp"
#include "epa/error.hpp"
#include "epa/linalg.hpp"
#include "epa/metrics.hpp"
#include "epa/report.hpp"
#include "epa/synth.hpp"
#include "epa/tensor.hpp"
#include "epa/tensor_file.hpp"
