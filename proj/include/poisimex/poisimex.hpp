#pragma once

#include "poisimex/aft.hpp"
#include "poisimex/catalog.hpp"
#include "poisimex/commands.hpp"
#include "poisimex/config.hpp"
#include "poisimex/dataset.hpp"
#include "poisimex/distributions.hpp"
#include "poisimex/errors.hpp"
#include "poisimex/extrapolant.hpp"
#include "poisimex/io.hpp"
#include "poisimex/linear_model.hpp"
#include "poisimex/normal.hpp"
#include "poisimex/parallel.hpp"
#include "poisimex/rng.hpp"
#include "poisimex/scenario.hpp"
#include "poisimex/simex.hpp"
#include "poisimex/study.hpp"
#include "poisimex/survival.hpp"
