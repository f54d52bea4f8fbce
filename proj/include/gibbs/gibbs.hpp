#pragma once

#include "gibbs/config.hpp"
#include "gibbs/csv.hpp"
#include "gibbs/data.hpp"
#include "gibbs/ensemble.hpp"
#include "gibbs/errors.hpp"
#include "gibbs/experiments.hpp"
#include "gibbs/mnist.hpp"
#include "gibbs/parallel.hpp"
#include "gibbs/report.hpp"
#include "gibbs/rng.hpp"
#include "gibbs/runner.hpp"
#include "gibbs/sign_matrix.hpp"
#include "gibbs/theory.hpp"
#include "gibbs/types.hpp"
