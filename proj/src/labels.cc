#include "lces/labels.h"

#include <string>

#include "lces/error.h"
#include "lces/io.h"

namespace lces {

std::string_view VerdictLabelName(VerdictLabel label) {
  switch (label) {
    case VerdictLabel::kEssay1:
      return "essay1";
    case VerdictLabel::kEssay2:
      return "essay2";
    case VerdictLabel::kTie:
      return "tie";
  }
  return "tie";
}

double LabelToNumeric(VerdictLabel label) {
  switch (label) {
    case VerdictLabel::kEssay1:
      return 1.0;
    case VerdictLabel::kEssay2:
      return 0.0;
    case VerdictLabel::kTie:
      return 0.5;
  }
  return 0.5;
}

bool IsPairLabel(double value) {
  return value == 0.0 || value == 0.5 || value == 1.0;
}

double Debias(double c_ij, double c_ji) {
  if (!IsPairLabel(c_ij) || !IsPairLabel(c_ji)) {
    throw DomainError("pair labels must be 0, 0.5 or 1, got (" +
                      FormatDouble(c_ij) + ", " + FormatDouble(c_ji) + ")");
  }
  // Exact in binary floating point for these three values.
  return c_ij == 1.0 - c_ji ? c_ij : 0.5;
}

}  // namespace lces
