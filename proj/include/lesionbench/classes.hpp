#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <string>
#include <string_view>

namespace lesionbench {

// The three grouped lesion classes. Enum order is the canonical class axis
// (confusion matrices, tie-breaking, report layout).
enum class LesionClass : std::size_t { Benign = 0, Malignant = 1, Melanoma = 2 };

inline constexpr std::size_t kNumLesionClasses = 3;
inline constexpr std::array<LesionClass, kNumLesionClasses> kLesionClasses = {
    LesionClass::Benign, LesionClass::Malignant, LesionClass::Melanoma};

constexpr std::size_t index_of(LesionClass c) noexcept { return static_cast<std::size_t>(c); }

// "benign", "malignant", "melanoma"
std::string_view to_string(LesionClass c) noexcept;
// "BENIGN", "MALIGNANT", "MELANOMA"
std::string_view upper_name(LesionClass c) noexcept;
// Accepts either case. Throws ValidationError.
LesionClass parse_lesion_class(std::string_view text);

// Dataset of origin. The three named corpora plus arbitrary synthetic sources.
class Source {
 public:
  enum class Kind { Isic2019, Ph2, SevenPoint, Synth };

  static Source isic2019() { return Source(Kind::Isic2019, {}); }
  static Source ph2() { return Source(Kind::Ph2, {}); }
  static Source seven_point() { return Source(Kind::SevenPoint, {}); }
  static Source synth(std::string name);

  // "isic2019", "ph2", "sevenpoint" or "synth:<name>"; case-insensitive.
  static Source parse(std::string_view text);

  Kind kind() const noexcept { return kind_; }
  const std::string& synth_name() const noexcept { return name_; }
  std::string name() const;

  friend bool operator==(const Source&, const Source&) = default;
  friend auto operator<=>(const Source&, const Source&) = default;

 private:
  Source(Kind kind, std::string name) : kind_(kind), name_(std::move(name)) {}

  Kind kind_;
  std::string name_;
};

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

}  // namespace lesionbench
