// Copyright 2026 The roadwet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include "roadwet/core.hpp"
#include "roadwet/dataset.hpp"
#include "roadwet/dsp.hpp"
#include "roadwet/eval.hpp"
#include "roadwet/ingest.hpp"
#include "roadwet/metrics.hpp"
#include "roadwet/pipeline.hpp"
#include "roadwet/rnn.hpp"
#include "roadwet/select.hpp"
#include "roadwet/svm.hpp"
#include "roadwet/synth.hpp"
