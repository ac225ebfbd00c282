#pragma once

#include "errors.hpp"
#include "random.hpp"
#include "nn_core.hpp"
#include "prior.hpp"
#include "linear_reference.hpp"
#include "eval_metrics.hpp"
#include "data_io.hpp"
#include "rms_ensemble.hpp"
#include "gpn.hpp"
#include "mcmc_oracle.hpp"
