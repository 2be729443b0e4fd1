#pragma once

#include "diatomic/diatomic_eval.hpp"
#include "diatomic/discrete_dist.hpp"
#include "diatomic/distributional_bellman.hpp"
#include "diatomic/errors.hpp"
#include "diatomic/fixed_point.hpp"
#include "diatomic/io.hpp"
#include "diatomic/linear_solve.hpp"
#include "diatomic/lp_models.hpp"
#include "diatomic/lp_solver.hpp"
#include "diatomic/mdp.hpp"
#include "diatomic/parallel.hpp"
#include "diatomic/random.hpp"
#include "diatomic/risk_control.hpp"
#include "diatomic/robust_oracle.hpp"
#include "diatomic/table.hpp"
