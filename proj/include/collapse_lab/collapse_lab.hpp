#pragma once

#include "collapse_lab/acceptance.hpp"
#include "collapse_lab/collapse_engine.hpp"
#include "collapse_lab/error.hpp"
#include "collapse_lab/front_solver.hpp"
#include "collapse_lab/incoherence.hpp"
#include "collapse_lab/io/atomic_file.hpp"
#include "collapse_lab/io/csv.hpp"
#include "collapse_lab/io/svg.hpp"
#include "collapse_lab/quantum_lattice.hpp"
#include "collapse_lab/rng.hpp"
#include "collapse_lab/runner.hpp"
#include "collapse_lab/scenario.hpp"
