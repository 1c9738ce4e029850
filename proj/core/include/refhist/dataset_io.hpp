#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "refhist/point_cloud.hpp"

namespace refhist {

// Dataset file format: one JSON object per line, e.g.
//   {"track_id":"car-0001","label":"car","points":[[1.2,0.3,null,12.7,-4.1,9.8], ...]}
// Column order follows FeatureKind; null marks a missing value. Lines whose
// point arrays are not length 6 are rejected. Error messages name the input
// and the offending line number.

Dataset read_jsonl(std::istream& in, std::string_view source_name = "<stream>");
Dataset read_jsonl_file(const std::filesystem::path& path);

void write_jsonl(const Dataset& dataset, std::ostream& out);
void write_jsonl_file(const Dataset& dataset, const std::filesystem::path& path);

std::string to_jsonl_line(const PointCloud& cloud);

}  // namespace refhist
