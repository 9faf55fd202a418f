// Copyright (C) 2026 The tilescore Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include "tilescore/dataset_io.hpp"
#include "tilescore/detection.hpp"
#include "tilescore/error.hpp"
#include "tilescore/geometry.hpp"
#include "tilescore/harness.hpp"
#include "tilescore/matching.hpp"
#include "tilescore/merging.hpp"
#include "tilescore/metrics.hpp"
#include "tilescore/postprocess.hpp"
#include "tilescore/tiling.hpp"
#include "tilescore/version.hpp"
