#pragma once

#include <string_view>

namespace lces {

// Which presentation slot the judge preferred.
enum class VerdictLabel { kEssay1, kEssay2, kTie };

std::string_view VerdictLabelName(VerdictLabel label);

// ESSAY1 -> 1, ESSAY2 -> 0, TIE -> 0.5.
double LabelToNumeric(VerdictLabel label);

// True for exactly 0, 0.5 and 1.
bool IsPairLabel(double value);

// Combines the labels of the two presentation orders. Keeps c_ij when the
// reversed query agrees (c_ij == 1 - c_ji), otherwise returns a tie.
// Throws DomainError for inputs outside {0, 0.5, 1}.
double Debias(double c_ij, double c_ji);

}  // namespace lces
