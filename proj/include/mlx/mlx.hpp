#pragma once

#include "mlx/grid.hpp"
#include "mlx/fock.hpp"
#include "mlx/system.hpp"
#include "mlx/tensors.hpp"
#include "mlx/eom.hpp"
#include "mlx/integrator.hpp"
#include "mlx/propagate.hpp"
#include "mlx/analysis.hpp"
#include "mlx/checkpoint.hpp"
#include "mlx/oracle/exact_two_particle.hpp"
#include "mlx/oracle/fullci.hpp"
#include "mlx/oracle/mean_field.hpp"
#include "mlx/io/config.hpp"
#include "mlx/io/output.hpp"
#include "mlx/io/run.hpp"
#include "mlx/io/compare.hpp"
