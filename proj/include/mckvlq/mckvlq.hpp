#pragma once

#include "mckvlq/cone_qp.hpp"
#include "mckvlq/errors.hpp"
#include "mckvlq/finance.hpp"
#include "mckvlq/io.hpp"
#include "mckvlq/lq_solver.hpp"
#include "mckvlq/numerics.hpp"
#include "mckvlq/ode_engine.hpp"
#include "mckvlq/particle_sim.hpp"
