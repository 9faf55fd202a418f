// Copyright (C) 2026 The tilescore Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#define TILESCORE_VERSION "1.0.0"

namespace tilescore {
inline constexpr const char* kVersion = TILESCORE_VERSION;
}  // namespace tilescore
