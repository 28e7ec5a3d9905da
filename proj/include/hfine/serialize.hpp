#pragma once

#include <iosfwd>
#include <string>

#include "hfine/operator_algebra.hpp"
#include "hfine/superoperator.hpp"

namespace hfine {

// Text serialization of operators and superoperators as CSV blocks
// (row,col,re,im), zeros skipped. The header line pins the dimension, the
// basis labels and the column-stacking convention so a reader cannot
// misinterpret the payload.
void write_operator_csv(std::ostream& os, const Operator& op);
std::string operator_to_csv(const Operator& op);
Operator read_operator_csv(std::istream& is);

void write_superoperator_csv(std::ostream& os, const Superoperator& sup);
Superoperator read_superoperator_csv(std::istream& is);

}  // namespace hfine
