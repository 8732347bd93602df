// Copyright 2026 The UEGD Authors. All Rights Reserved.
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

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "uegd/error.hpp"

namespace uegd {

enum class Modality : std::uint8_t { visual = 0, acoustic = 1, linguistic = 2 };

inline constexpr std::array<Modality, 3> kModalities = {
    Modality::visual, Modality::acoustic, Modality::linguistic};

inline constexpr std::size_t index_of(Modality m) { return static_cast<std::size_t>(m); }

inline constexpr std::string_view modality_name(Modality m) {
  switch (m) {
    case Modality::visual: return "visual";
    case Modality::acoustic: return "acoustic";
    case Modality::linguistic: return "linguistic";
  }
  return "?";
}

/// Accepts the full name or its first letter.
inline Modality parse_modality(std::string_view s) {
  for (Modality m : kModalities) {
    const std::string_view name = modality_name(m);
    if (s == name || (s.size() == 1 && s[0] == name[0])) return m;
  }
  throw ConfigError("unknown modality '" + std::string(s) +
                    "' (expected visual|acoustic|linguistic or v|a|l)");
}

inline std::optional<Modality> modality_from_tag(std::uint8_t tag) {
  if (tag > 2) return std::nullopt;
  return static_cast<Modality>(tag);
}

}  // namespace uegd
