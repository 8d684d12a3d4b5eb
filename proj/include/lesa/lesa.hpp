// Copyright 2026 The lesacache Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "lesa/backbone.hpp"
#include "lesa/config.hpp"
#include "lesa/core.hpp"
#include "lesa/error.hpp"
#include "lesa/evalx.hpp"
#include "lesa/forecast.hpp"
#include "lesa/io.hpp"
#include "lesa/metrics.hpp"
#include "lesa/modulator.hpp"
#include "lesa/optim.hpp"
#include "lesa/predictor.hpp"
#include "lesa/rng.hpp"
#include "lesa/schedule.hpp"
#include "lesa/spline.hpp"
#include "lesa/train.hpp"
