#pragma once

#include <iosfwd>
#include <string>

#include "dimbid/types.hpp"

namespace dimbid {

// Impression log CSV. Header row is required:
//   day,impression_id,<feature columns...>,cost_micros,revenue_micros,converted
// Any column that is not one of the five fixed ones is treated as a feature
// column and becomes a candidate dimension.
ImpressionLog ingest_log(std::istream& in);
ImpressionLog ingest_log_file(const std::string& path);

void write_log(std::ostream& out, const ImpressionLog& log);
void write_log_file(const std::string& path, const ImpressionLog& log);

}  // namespace dimbid
