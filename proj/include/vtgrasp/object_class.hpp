#pragma once

#include <array>
#include <string>
#include <string_view>

#include "vtgrasp/error.hpp"

namespace vtgrasp {

enum class ObjectClass { plastic, cardboard, glass, metal };

inline constexpr std::array<ObjectClass, 4> kObjectClasses = {ObjectClass::cardboard, ObjectClass::plastic,
                                                              ObjectClass::metal, ObjectClass::glass};

constexpr std::string_view to_string(ObjectClass c) {
  switch (c) {
    case ObjectClass::plastic: return "plastic";
    case ObjectClass::cardboard: return "cardboard";
    case ObjectClass::glass: return "glass";
    case ObjectClass::metal: return "metal";
  }
  return "unknown";
}

inline ObjectClass parse_object_class(std::string_view s) {
  for (auto c : kObjectClasses) {
    if (to_string(c) == s) return c;
  }
  throw Error(ErrorCode::parse, "unknown object class '" + std::string(s) + "'");
}

}  // namespace vtgrasp
