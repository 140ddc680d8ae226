#pragma once

#include "assembly.hpp"
#include "coefficients.hpp"
#include "decomposition.hpp"
#include "experiments.hpp"
#include "factorization.hpp"
#include "gfem.hpp"
#include "io.hpp"
#include "local_spaces.hpp"
#include "mesh.hpp"
#include "partition_of_unity.hpp"
#include "patch.hpp"
#include "precond.hpp"
#include "problem.hpp"
