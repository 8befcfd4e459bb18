#pragma once

#include "gcorr/correspondence.hpp"
#include "gcorr/error.hpp"
#include "gcorr/glm.hpp"
#include "gcorr/linalg.hpp"
#include "gcorr/mcmc.hpp"
#include "gcorr/models.hpp"
#include "gcorr/priors.hpp"
#include "gcorr/problem.hpp"
#include "gcorr/selection.hpp"
#include "gcorr/simulate.hpp"
#include "gcorr/tables.hpp"
