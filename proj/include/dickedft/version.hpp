// Copyright 2026 The dickedft Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace dickedft {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace dickedft
