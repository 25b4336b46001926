#pragma once

#include "ccs/activation_store.hpp"
#include "ccs/baselines.hpp"
#include "ccs/core.hpp"
#include "ccs/eval.hpp"
#include "ccs/experiment.hpp"
#include "ccs/probes.hpp"
#include "ccs/rng.hpp"
#include "ccs/synthgen.hpp"
#include "ccs/theory.hpp"
