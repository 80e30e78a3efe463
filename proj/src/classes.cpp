#include "lesionbench/classes.hpp"

#include <algorithm>
#include <cctype>

#include "lesionbench/error.hpp"

namespace lesionbench {

std::string_view to_string(LesionClass c) noexcept {
  switch (c) {
    case LesionClass::Benign: return "benign";
    case LesionClass::Malignant: return "malignant";
    case LesionClass::Melanoma: return "melanoma";
  }
  return "?";
}

std::string_view upper_name(LesionClass c) noexcept {
  switch (c) {
    case LesionClass::Benign: return "BENIGN";
    case LesionClass::Malignant: return "MALIGNANT";
    case LesionClass::Melanoma: return "MELANOMA";
  }
  return "?";
}

LesionClass parse_lesion_class(std::string_view text) {
  const std::string lower = to_lower(trim(text));
  for (LesionClass c : kLesionClasses) {
    if (lower == to_string(c)) return c;
  }
  throw ValidationError("unknown lesion class '" + std::string(text) + "'");
}

Source Source::synth(std::string name) {
  if (name.empty()) throw ValidationError("synthetic source needs a name");
  return Source(Kind::Synth, to_lower(name));
}

Source Source::parse(std::string_view text) {
  const std::string lower = to_lower(trim(text));
  if (lower == "isic2019") return isic2019();
  if (lower == "ph2") return ph2();
  if (lower == "sevenpoint") return seven_point();
  constexpr std::string_view prefix = "synth:";
  if (lower.starts_with(prefix)) return synth(lower.substr(prefix.size()));
  throw ValidationError("unknown source '" + std::string(text) + "'");
}

std::string Source::name() const {
  switch (kind_) {
    case Kind::Isic2019: return "isic2019";
    case Kind::Ph2: return "ph2";
    case Kind::SevenPoint: return "sevenpoint";
    case Kind::Synth: return "synth:" + name_;
  }
  return "?";
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace lesionbench
