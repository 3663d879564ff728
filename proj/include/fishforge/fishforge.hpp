// Copyright 2026 The fishforge authors
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

#include "fishforge/affine.hpp"
#include "fishforge/bilinear.hpp"
#include "fishforge/compositor.hpp"
#include "fishforge/config.hpp"
#include "fishforge/generator.hpp"
#include "fishforge/histmatch.hpp"
#include "fishforge/image.hpp"
#include "fishforge/image_io.hpp"
#include "fishforge/manifest.hpp"
#include "fishforge/metrics.hpp"
#include "fishforge/rng.hpp"
#include "fishforge/tps.hpp"
