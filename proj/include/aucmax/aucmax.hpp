#pragma once

#include "aucmax/config.hpp"
#include "aucmax/data.hpp"
#include "aucmax/errors.hpp"
#include "aucmax/harness.hpp"
#include "aucmax/losses.hpp"
#include "aucmax/matrix.hpp"
#include "aucmax/metrics.hpp"
#include "aucmax/moco.hpp"
#include "aucmax/model.hpp"
#include "aucmax/optim.hpp"
#include "aucmax/report.hpp"
#include "aucmax/rng.hpp"
#include "aucmax/trust.hpp"
