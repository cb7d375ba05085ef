/* Copyright 2026 The svae Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include "svae/checkpoint.hpp"
#include "svae/corpus.hpp"
#include "svae/errors.hpp"
#include "svae/evaluation.hpp"
#include "svae/grad_check.hpp"
#include "svae/lstm.hpp"
#include "svae/objectives.hpp"
#include "svae/rng.hpp"
#include "svae/tape.hpp"
#include "svae/tensor.hpp"
#include "svae/training.hpp"
