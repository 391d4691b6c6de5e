#pragma once

// Correspondence files:
//
//   hsolo-corr v1
//   u1,v1,s1,theta1,u2,v2,s2,theta2[,inlier]
//
// one correspondence per line, optional ninth column 0/1 marking ground-truth
// inliers (all lines or none). Blank lines and lines starting with '#' are
// ignored. Values are written with 17 significant digits.

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hsolo/errors.hpp"
#include "hsolo/geometry.hpp"
#include "hsolo/robust.hpp"

namespace hsolo {

inline constexpr std::string_view kCorrespondenceHeader = "hsolo-corr v1";

struct CorrespondenceSet {
  std::vector<Correspondence> items;
  std::optional<std::vector<bool>> inlier_mask;
  bool has_byproducts = true;  // false for point-only inputs
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split_fields(std::string_view line, bool allow_whitespace) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t end = allow_whitespace ? line.find_first_of(", \t", pos) : line.find(',', pos);
    if (end == std::string_view::npos) end = line.size();
    const std::string_view field = trim(line.substr(pos, end - pos));
    if (!allow_whitespace || !field.empty()) out.push_back(field);
    pos = end + 1;
  }
  return out;
}

inline double parse_double(std::string_view field, std::size_t line) {
  double value = 0.0;
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw ParseError(line, "not a number: '" + std::string(field) + "'");
  }
  if (!std::isfinite(value)) throw ParseError(line, "non-finite value");
  return value;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline bool skip_line(std::string_view line) { return line.empty() || line.front() == '#'; }

}  // namespace detail

inline CorrespondenceSet read_correspondences(std::istream& in) {
  CorrespondenceSet set;
  std::string raw;
  std::size_t line_no = 0;
  bool have_header = false;
  std::optional<bool> flagged;
  std::vector<bool> mask;

  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = detail::trim(raw);
    if (!have_header) {
      if (line.empty()) continue;
      if (line == kCorrespondenceHeader) {
        have_header = true;
        continue;
      }
      if (line.starts_with("hsolo-corr")) throw VersionMismatch("unsupported correspondence file version: " + std::string(line));
      throw ParseError(line_no, "missing '" + std::string(kCorrespondenceHeader) + "' header");
    }
    if (detail::skip_line(line)) continue;

    const auto fields = detail::split_fields(line, false);
    if (fields.size() != 8 && fields.size() != 9) {
      throw ParseError(line_no, "expected 8 or 9 fields, got " + std::to_string(fields.size()));
    }
    const bool has_flag = fields.size() == 9;
    if (flagged && *flagged != has_flag) throw ParseError(line_no, "inlier column present on some lines only");
    flagged = has_flag;

    double v[8];
    for (int i = 0; i < 8; ++i) v[i] = detail::parse_double(fields[static_cast<std::size_t>(i)], line_no);
    try {
      set.items.push_back({AffineFeature({v[0], v[1]}, v[2], v[3]), AffineFeature({v[4], v[5]}, v[6], v[7])});
    } catch (const InvalidFeature& e) {
      throw ParseError(line_no, e.what());
    }
    if (has_flag) {
      if (fields[8] == "1") {
        mask.push_back(true);
      } else if (fields[8] == "0") {
        mask.push_back(false);
      } else {
        throw ParseError(line_no, "inlier flag must be 0 or 1");
      }
    }
  }
  if (!have_header) throw ParseError(line_no + 1, "empty correspondence file");
  if (flagged.value_or(false)) set.inlier_mask = std::move(mask);
  return set;
}

inline void write_correspondences(std::ostream& out, const CorrespondenceSet& set) {
  if (set.inlier_mask && set.inlier_mask->size() != set.items.size()) {
    throw InvalidArgument("inlier mask size does not match the correspondence count");
  }
  out << kCorrespondenceHeader << '\n';
  for (std::size_t i = 0; i < set.items.size(); ++i) {
    const auto& c = set.items[i];
    const double values[8] = {c.a.point().u, c.a.point().v, c.a.scale(), c.a.angle(),
                              c.b.point().u, c.b.point().v, c.b.scale(), c.b.angle()};
    for (int k = 0; k < 8; ++k) {
      if (k) out << ',';
      out << detail::format_double(values[k]);
    }
    if (set.inlier_mask) out << ',' << ((*set.inlier_mask)[i] ? '1' : '0');
    out << '\n';
  }
}

inline CorrespondenceSet load_correspondences(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return read_correspondences(in);
}

inline void save_correspondences(const std::string& path, const CorrespondenceSet& set) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_correspondences(out, set);
  if (!out) throw Error("write failed: " + path);
}

/// Point-only correspondences in the AdelaideRMF layout: `u1 v1 u2 v2
/// [label]` per line, whitespace or comma separated. Label 0 marks an
/// outlier; other labels name the structure a point belongs to. When
/// `model_label` is given only that structure counts as inlier, otherwise
/// every non-zero label does. The result carries no byproducts, so only the
/// point-based estimator can use it.
inline CorrespondenceSet read_point_correspondences(std::istream& in, std::optional<int> model_label = std::nullopt) {
  CorrespondenceSet set;
  set.has_byproducts = false;
  std::string raw;
  std::size_t line_no = 0;
  std::optional<bool> labelled;
  std::vector<bool> mask;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = detail::trim(raw);
    if (detail::skip_line(line)) continue;
    const auto fields = detail::split_fields(line, true);
    if (fields.size() != 4 && fields.size() != 5) {
      throw ParseError(line_no, "expected 4 or 5 fields, got " + std::to_string(fields.size()));
    }
    const bool has_label = fields.size() == 5;
    if (labelled && *labelled != has_label) throw ParseError(line_no, "label column present on some lines only");
    labelled = has_label;
    const double u1 = detail::parse_double(fields[0], line_no), v1 = detail::parse_double(fields[1], line_no);
    const double u2 = detail::parse_double(fields[2], line_no), v2 = detail::parse_double(fields[3], line_no);
    set.items.push_back(make_correspondence({u1, v1}, {u2, v2}));
    if (has_label) {
      const double label = detail::parse_double(fields[4], line_no);
      if (label != std::floor(label)) throw ParseError(line_no, "label must be an integer");
      const int l = static_cast<int>(label);
      mask.push_back(model_label ? l == *model_label : l != 0);
    }
  }
  if (labelled.value_or(false)) set.inlier_mask = std::move(mask);
  return set;
}

inline CorrespondenceSet load_point_correspondences(const std::string& path, std::optional<int> model_label = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return read_point_correspondences(in, model_label);
}

/// Result document. Keys appear in a fixed order: model (h1..h9, canonical),
/// inliers, support, iterations, elapsed_s, config.
inline nlohmann::ordered_json result_to_json(const EstimationResult& result, const nlohmann::ordered_json& config) {
  nlohmann::ordered_json doc;
  doc["model"] = result.model.row_major();
  doc["inliers"] = result.inlier_indices;
  doc["support"] = result.support;
  doc["iterations"] = result.iterations_run;
  doc["elapsed_s"] = result.elapsed;
  doc["config"] = config;
  return doc;
}

inline void write_result(std::ostream& out, const EstimationResult& result, const nlohmann::ordered_json& config) {
  out << result_to_json(result, config).dump(2) << '\n';
}

inline void save_result(const std::string& path, const EstimationResult& result, const nlohmann::ordered_json& config) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_result(out, result, config);
}

}  // namespace hsolo
