#pragma once

#include <string>
#include <vector>

#include "nighttrack/synth.hpp"

namespace nighttrack {

// Dataset directory layout:
//   <root>/<seq_name>/frames/%06d.ppm
//   <root>/<seq_name>/groundtruth.txt   one "x,y,w,h" line per frame
//   <root>/<seq_name>/attributes.txt    one tag per line
//   <root>/manifest.json

void write_dataset(const std::vector<Sequence>& sequences, const std::string& dir);

std::vector<Sequence> read_dataset(const std::string& dir);

// Parses one groundtruth line; `lineno` is 1-based and reported on error.
Box parse_groundtruth_line(const std::string& line, int lineno, const std::string& file);

std::vector<Box> read_groundtruth(const std::string& path);
void write_groundtruth(const std::vector<Box>& boxes, const std::string& path);

}  // namespace nighttrack
