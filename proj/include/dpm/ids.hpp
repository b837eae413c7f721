#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>

namespace dpm {

// Dense integer handle into one of the interning tables. The tag keeps
// value, expression, environment, symbol and node ids from mixing.
template <class Tag>
struct Id {
  static constexpr std::uint32_t kInvalid = std::numeric_limits<std::uint32_t>::max();

  std::uint32_t index = kInvalid;

  constexpr Id() = default;
  constexpr explicit Id(std::uint32_t i) : index(i) {}

  [[nodiscard]] constexpr bool valid() const { return index != kInvalid; }

  friend constexpr auto operator<=>(Id, Id) = default;
};

using ValueId = Id<struct ValueTag>;
using ExprId = Id<struct ExprTag>;
using EnvId = Id<struct EnvTag>;
using SymbolId = Id<struct SymbolTag>;
using NodeId = Id<struct NodeTag>;

}  // namespace dpm

template <class Tag>
struct std::hash<dpm::Id<Tag>> {
  std::size_t operator()(dpm::Id<Tag> id) const noexcept { return std::hash<std::uint32_t>{}(id.index); }
};
