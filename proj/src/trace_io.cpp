#include "edgereuse/trace_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace edgereuse {

namespace {

[[noreturn]] void parse_error(std::string_view source, std::size_t line, const std::string& what) {
  throw Error(Errc::Parse, std::string(source) + " row " + std::to_string(line) + ": " + what);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Config, "cannot open '" + path + "'");
  return in;
}

}  // namespace

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::vector<TraceRow> read_trace_csv(std::istream& in, std::string_view source) {
  std::vector<TraceRow> rows;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = trim(line);
    if (text.empty()) continue;
    if (!header_seen) {
      header_seen = true;
      if (text != kTraceHeader) parse_error(source, lineno, "expected header '" + std::string(kTraceHeader) + "'");
      continue;
    }
    const auto f = split_csv_line(text);
    if (f.size() != 5) parse_error(source, lineno, "expected 5 fields, got " + std::to_string(f.size()));
    TraceRow row;
    std::int64_t t = 0;
    auto [ptr, ec] = std::from_chars(f[0].data(), f[0].data() + f[0].size(), t);
    if (ec != std::errc() || ptr != f[0].data() + f[0].size() || t < 0) {
      parse_error(source, lineno, "bad time_us '" + std::string(f[0]) + "'");
    }
    row.time_us = t;
    if (f[1].empty() || f[2].empty() || f[3].empty()) parse_error(source, lineno, "empty id field");
    row.device_id = f[1];
    row.service_id = f[2];
    row.vector_id = f[3];
    if (!f[4].empty()) {
      auto th = parse_double(f[4]);
      if (!th || *th < 0.0 || *th > 1.0) parse_error(source, lineno, "threshold must be a fraction in [0,1]");
      row.threshold = *th;
    }
    rows.push_back(std::move(row));
  }
  if (!header_seen) parse_error(source, 1, "missing header");
  return rows;
}

VectorTable read_vectors_csv(std::istream& in, std::string_view source) {
  VectorTable out;
  std::string line;
  std::size_t lineno = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = trim(line);
    if (text.empty()) continue;
    const auto f = split_csv_line(text);
    if (lineno == 1 && f[0] == "vector_id") continue;  // optional header
    if (f.size() < 2) parse_error(source, lineno, "vector row needs an id and at least one value");
    std::vector<double> values;
    values.reserve(f.size() - 1);
    for (std::size_t i = 1; i < f.size(); ++i) {
      auto v = parse_double(f[i]);
      if (!v || !std::isfinite(*v)) parse_error(source, lineno, "bad value in column " + std::to_string(i));
      values.push_back(*v);
    }
    if (dim == 0) dim = values.size();
    if (values.size() != dim) {
      parse_error(source, lineno, "dim " + std::to_string(values.size()) + " differs from " + std::to_string(dim));
    }
    if (!out.emplace(std::string(f[0]), FeatureVector(std::move(values))).second) {
      parse_error(source, lineno, "duplicate vector id '" + std::string(f[0]) + "'");
    }
  }
  return out;
}

std::vector<TraceRow> read_trace_file(const std::string& path) {
  auto in = open_or_throw(path);
  return read_trace_csv(in, path);
}

VectorTable read_vectors_file(const std::string& path) {
  auto in = open_or_throw(path);
  return read_vectors_csv(in, path);
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows) {
  out << kTraceHeader << '\n';
  for (const auto& r : rows) {
    out << r.time_us << ',' << r.device_id << ',' << r.service_id << ',' << r.vector_id << ',';
    if (r.threshold) out << format_double(*r.threshold);
    out << '\n';
  }
}

void write_vectors_csv(std::ostream& out, const VectorTable& vectors) {
  if (vectors.empty()) {
    out << "vector_id\n";
    return;
  }
  out << "vector_id";
  for (std::size_t i = 0; i < vectors.begin()->second.dim(); ++i) out << ",v" << i;
  out << '\n';
  for (const auto& [id, v] : vectors) {
    out << id;
    for (double x : v.values()) out << ',' << format_double(x);
    out << '\n';
  }
}

}  // namespace edgereuse
