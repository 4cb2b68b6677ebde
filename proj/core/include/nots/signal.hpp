#pragma once

#include <map>
#include <string>
#include <vector>

#include "nots/array.hpp"

namespace nots {

// A sample is a C x T matrix; C=1 for both synthetic sets.
using Signal = Array;

struct LabeledSample {
  Signal signal;                                    // shape (C, T)
  std::map<std::string, std::vector<double>> labels;  // name -> vector
};

}  // namespace nots
