#pragma once

#include "pe1d/analytics.hpp"
#include "pe1d/config.hpp"
#include "pe1d/core_sim.hpp"
#include "pe1d/fixture.hpp"
#include "pe1d/interconnect.hpp"
#include "pe1d/presets.hpp"
#include "pe1d/reference.hpp"
#include "pe1d/report.hpp"
#include "pe1d/tensor.hpp"
#include "pe1d/tiler.hpp"
