#pragma once

#include "common.hpp"
#include "poisson.hpp"
#include "market_model.hpp"
#include "random.hpp"
#include "deadline_mdp.hpp"
#include "budget_lp.hpp"
#include "tradeoff_dp.hpp"
#include "simulator.hpp"
#include "estimation.hpp"
#include "serialization.hpp"
