#pragma once

#include "sepflow/error.hpp"
#include "sepflow/geometry.hpp"
#include "sepflow/separability.hpp"
#include "sepflow/distributions.hpp"
#include "sepflow/clustering.hpp"
#include "sepflow/schedule.hpp"
#include "sepflow/flow.hpp"
#include "sepflow/control.hpp"
#include "sepflow/montecarlo.hpp"
#include "sepflow/io.hpp"
