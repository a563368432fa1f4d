/*
 * Copyright 2026 The truncdr Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include "truncdr/cdf.hpp"
#include "truncdr/cox.hpp"
#include "truncdr/data.hpp"
#include "truncdr/error.hpp"
#include "truncdr/estimators.hpp"
#include "truncdr/functional.hpp"
#include "truncdr/inference.hpp"
#include "truncdr/nonparam.hpp"
#include "truncdr/nuisance.hpp"
#include "truncdr/parallel.hpp"
#include "truncdr/pipeline.hpp"
#include "truncdr/random.hpp"
#include "truncdr/report.hpp"
#include "truncdr/score.hpp"
#include "truncdr/sim.hpp"
#include "truncdr/step_function.hpp"
