#pragma once

#include <string>

#include "ofsr/flow.hpp"

namespace ofsr {

// Middlebury .flo: little-endian float magic 202021.25, int32 width, int32
// height, then height*width interleaved (u, v) float pairs, row-major.

FlowField read_flo(const std::string& path);
void write_flo(const FlowField& flow, const std::string& path);

}  // namespace ofsr
