#pragma once

// Umbrella header: the whole toolkit in one include.

#include "morsetrack/errors.hpp"
#include "morsetrack/multi_index.hpp"
#include "morsetrack/jet.hpp"
#include "morsetrack/linalg.hpp"
#include "morsetrack/expression.hpp"
#include "morsetrack/field.hpp"
#include "morsetrack/bump.hpp"
#include "morsetrack/doubling.hpp"
#include "morsetrack/critical_points.hpp"
#include "morsetrack/strata.hpp"
#include "morsetrack/continuation.hpp"
#include "morsetrack/scenario.hpp"
#include "morsetrack/builtin_scenarios.hpp"
