#pragma once

#include "wdrc/errors.hpp"
#include "wdrc/psd_math.hpp"
#include "wdrc/model.hpp"
#include "wdrc/riccati.hpp"
#include "wdrc/estimator.hpp"
#include "wdrc/worst_case.hpp"
#include "wdrc/controller.hpp"
#include "wdrc/bounds.hpp"
