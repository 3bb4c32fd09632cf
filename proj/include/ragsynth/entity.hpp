#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "ragsynth/error.hpp"

namespace ragsynth {

/// Built-in entity taxonomy, in resolution priority order: when two candidate
/// spans tie on length and start, the type listed first wins. Context-qualified
/// types precede the generic types they refine (DOB before DATE).
inline constexpr std::array<std::string_view, 18> kTaxonomy = {
    "EMAIL",        "CARDNUMBER", "TELEPHONENUM",     "DOB",              "DATE",
    "SALARY",       "HOSPITALNAME", "ORGANISATION",   "MENTALHEALTHINFO", "DISABILITYSTATUS",
    "FIRSTNAME",    "LASTNAME",   "CITY",             "STATE",            "GENDER",
    "JOBTYPE",      "JOBAREA",    "DBAREA",
};

/// Entity category name: an uppercase identifier, either from kTaxonomy or an extension.
class EntityType {
 public:
  EntityType() = default;
  explicit EntityType(std::string name) : name_(std::move(name)) {
    if (!valid_name(name_)) throw InvalidArgument("invalid entity type name '" + name_ + "'");
  }

  const std::string& name() const noexcept { return name_; }

  /// Position in kTaxonomy; extensions rank after every built-in type.
  std::size_t rank() const noexcept {
    const auto it = std::find(kTaxonomy.begin(), kTaxonomy.end(), name_);
    return static_cast<std::size_t>(it - kTaxonomy.begin());
  }

  bool builtin() const noexcept { return rank() < kTaxonomy.size(); }

  static bool valid_name(std::string_view n) {
    if (n.empty() || !(n[0] >= 'A' && n[0] <= 'Z')) return false;
    return std::all_of(n.begin(), n.end(), [](char c) {
      return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
    });
  }

  friend bool operator==(const EntityType&, const EntityType&) = default;
  friend auto operator<=>(const EntityType& a, const EntityType& b) { return a.name_ <=> b.name_; }

 private:
  std::string name_;
};

/// Taxonomy-order comparison (rank, then name for extensions).
inline bool taxonomy_before(const EntityType& a, const EntityType& b) {
  const auto ra = a.rank();
  const auto rb = b.rank();
  return ra != rb ? ra < rb : a.name() < b.name();
}

/// A character-offset span [start, end) over some text.
struct EntitySpan {
  EntityType type;
  std::size_t start = 0;
  std::size_t end = 0;
  std::string surface;
  std::string detector;

  std::size_t length() const noexcept { return end - start; }
  bool overlaps(const EntitySpan& o) const noexcept { return start < o.end && o.start < end; }

  friend bool operator==(const EntitySpan&, const EntitySpan&) = default;
};

}  // namespace ragsynth
