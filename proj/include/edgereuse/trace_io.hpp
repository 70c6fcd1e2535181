#pragma once

// Trace and vector CSV files.
//
//   trace.csv    time_us,device_id,service_id,vector_id,threshold
//   vectors.csv  vector_id,v0,v1,...,v{dim-1}
//
// The threshold column is a fraction in [0,1] and may be left empty.

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "edgereuse/core.hpp"

namespace edgereuse {

struct TraceRow {
  SimTime time_us = 0;
  std::string device_id;
  std::string service_id;
  std::string vector_id;
  std::optional<double> threshold;
};

using VectorTable = std::map<std::string, FeatureVector, std::less<>>;

inline constexpr std::string_view kTraceHeader = "time_us,device_id,service_id,vector_id,threshold";

/// Throws Errc::Parse naming `source` and the 1-based line number.
std::vector<TraceRow> read_trace_csv(std::istream& in, std::string_view source);
VectorTable read_vectors_csv(std::istream& in, std::string_view source);

std::vector<TraceRow> read_trace_file(const std::string& path);
VectorTable read_vectors_file(const std::string& path);

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows);
void write_vectors_csv(std::ostream& out, const VectorTable& vectors);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
std::optional<double> parse_double(std::string_view s);

std::vector<std::string_view> split_csv_line(std::string_view line);

}  // namespace edgereuse
