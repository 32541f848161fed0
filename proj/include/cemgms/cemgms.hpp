#pragma once

#include "cemgms/analysis.hpp"
#include "cemgms/assembly.hpp"
#include "cemgms/auxspace.hpp"
#include "cemgms/cembasis.hpp"
#include "cemgms/error.hpp"
#include "cemgms/evolve.hpp"
#include "cemgms/experiment.hpp"
#include "cemgms/grid.hpp"
#include "cemgms/parallel.hpp"
#include "cemgms/problems.hpp"
#include "cemgms/quadrature.hpp"
