#include "reprog/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <string>

#include "reprog/errors.hpp"
#include "reprog/ingest.hpp"

namespace reprog {

Tensor Normalization::normalize(const Tensor& raw) const {
  Tensor out = raw;
  switch (kind) {
    case Kind::identity:
      break;
    case Kind::affine:
      require_cols(raw, scale.size(), "normalize");
      for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] = row[c] * scale[c] + shift[c];
      }
      break;
    case Kind::per_series_z:
      if (raw.rows() != series_mean.size()) {
        throw ShapeError("normalize: per-series record covers " +
                         std::to_string(series_mean.size()) + " rows, got " +
                         std::to_string(raw.rows()));
      }
      for (std::size_t r = 0; r < out.rows(); ++r) {
        for (double& v : out.row(r)) {
          const double z = series_std[r] > 0.0 ? (v - series_mean[r]) / series_std[r] : 0.0;
          v = std::clamp(z, -clamp_bound, clamp_bound);
        }
      }
      break;
  }
  return out;
}

Tensor Normalization::denormalize(const Tensor& normalized) const {
  Tensor out = normalized;
  switch (kind) {
    case Kind::identity:
      break;
    case Kind::affine:
      require_cols(normalized, scale.size(), "denormalize");
      for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] = (row[c] - shift[c]) / scale[c];
      }
      break;
    case Kind::per_series_z:
      if (normalized.rows() != series_mean.size()) {
        throw ShapeError("denormalize: per-series record covers " +
                         std::to_string(series_mean.size()) + " rows, got " +
                         std::to_string(normalized.rows()));
      }
      for (const auto& c : clamped) out(c.row, c.col) = c.z;
      for (std::size_t r = 0; r < out.rows(); ++r) {
        for (double& v : out.row(r)) v = series_mean[r] + series_std[r] * v;
      }
      break;
  }
  return out;
}

void Dataset::validate() const {
  if (samples.rows() != labels.size() && !(samples.empty() && labels.empty())) {
    throw DataError("dataset has " + std::to_string(samples.rows()) + " samples but " +
                    std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw DataError("label " + std::to_string(labels[i]) + " at sample " + std::to_string(i) +
                      " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
  if (!samples.all_finite()) throw DataError("dataset contains non-finite values");
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.samples = gather_rows(samples, rows);
  out.labels.reserve(rows.size());
  for (std::size_t r : rows) out.labels.push_back(labels[r]);
  out.num_classes = num_classes;
  out.label_names = label_names;
  out.normalization = normalization;
  if (normalization.kind == Normalization::Kind::per_series_z) {
    auto& n = out.normalization;
    n.series_mean.clear();
    n.series_std.clear();
    n.clamped.clear();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      n.series_mean.push_back(normalization.series_mean[rows[i]]);
      n.series_std.push_back(normalization.series_std[rows[i]]);
      for (const auto& c : normalization.clamped) {
        if (c.row == rows[i]) n.clamped.push_back({i, c.col, c.z});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// IDX

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t at) {
  return (static_cast<std::uint32_t>(b[at]) << 24) | (static_cast<std::uint32_t>(b[at + 1]) << 16) |
         (static_cast<std::uint32_t>(b[at + 2]) << 8) | static_cast<std::uint32_t>(b[at + 3]);
}

}  // namespace

IdxFragment parse_idx(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) {
    throw ParseError("truncated IDX header: expected 4 magic bytes, got " +
                         std::to_string(bytes.size()) + " (missing " +
                         std::to_string(4 - bytes.size()) + ")",
                     bytes.size());
  }
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != kIdxLabelMagic && magic != kIdxImageMagic) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08X", magic);
    throw ParseError(std::string("bad IDX magic ") + buf + " (expected 0x00000801 or 0x00000803)",
                     0);
  }
  const std::size_t ndims = bytes[3];
  const std::size_t header = 4 + 4 * ndims;
  if (bytes.size() < header) {
    throw ParseError("truncated IDX header: expected " + std::to_string(header) + " bytes, got " +
                         std::to_string(bytes.size()) + " (missing " +
                         std::to_string(header - bytes.size()) + ")",
                     bytes.size());
  }
  IdxFragment frag;
  std::size_t total = 1;
  for (std::size_t i = 0; i < ndims; ++i) {
    const std::size_t d = read_be32(bytes, 4 + 4 * i);
    if (d == 0) throw ParseError("IDX dimension " + std::to_string(i) + " is zero", 4 + 4 * i);
    frag.dims.push_back(d);
    total *= d;
  }
  const std::size_t have = bytes.size() - header;
  if (have < total) {
    throw ParseError("truncated IDX payload: expected " + std::to_string(total) + " bytes, got " +
                         std::to_string(have) + " (missing " + std::to_string(total - have) + ")",
                     bytes.size());
  }
  if (have > total) {
    throw ParseError(std::to_string(have - total) + " trailing bytes after IDX payload",
                     header + total);
  }
  auto payload = bytes.subspan(header, total);
  if (magic == kIdxLabelMagic) {
    frag.labels.assign(payload.begin(), payload.end());
    return frag;
  }
  const std::size_t n = frag.dims[0];
  const std::size_t d = total / n;
  std::vector<double> values(total);
  for (std::size_t i = 0; i < total; ++i) values[i] = payload[i] / 127.5 - 1.0;
  frag.samples = Tensor({n, d}, std::move(values));
  frag.normalization.kind = Normalization::Kind::affine;
  frag.normalization.scale.assign(d, 1.0 / 127.5);
  frag.normalization.shift.assign(d, -1.0);
  return frag;
}

Dataset idx_dataset(const IdxFragment& images, const IdxFragment& labels) {
  if (images.is_labels() || !labels.is_labels()) {
    throw DataError("idx_dataset needs one image file and one label file");
  }
  if (images.samples.rows() != labels.labels.size()) {
    throw DataError("IDX image count " + std::to_string(images.samples.rows()) +
                    " != label count " + std::to_string(labels.labels.size()));
  }
  Dataset ds;
  ds.samples = images.samples;
  ds.labels = labels.labels;
  ds.normalization = images.normalization;
  int max_label = 0;
  for (int y : ds.labels) max_label = std::max(max_label, y);
  ds.num_classes = static_cast<std::size_t>(max_label) + 1;
  for (std::size_t k = 0; k < ds.num_classes; ++k) ds.label_names.push_back(std::to_string(k));
  return ds;
}

// ---------------------------------------------------------------------------
// UCR-style CSV

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view field, std::size_t line_no, std::size_t col) {
  field = trim(field);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty() || !std::isfinite(v)) {
    throw DataError("line " + std::to_string(line_no) + ", field " + std::to_string(col + 1) +
                    ": non-numeric value \"" + std::string(field) + "\"");
  }
  return v;
}

}  // namespace

Dataset parse_ucr_csv(std::string_view text) {
  std::vector<double> raw_labels;
  std::vector<std::string> label_tokens;
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;

    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() < 2) {
      throw DataError("line " + std::to_string(line_no) + ": expected a label and at least one value");
    }
    if (width == 0) {
      width = fields.size() - 1;
    } else if (fields.size() - 1 != width) {
      throw DataError("line " + std::to_string(line_no) + ": ragged row with " +
                      std::to_string(fields.size() - 1) + " values, expected " +
                      std::to_string(width));
    }
    raw_labels.push_back(parse_number(fields[0], line_no, 0));
    label_tokens.emplace_back(trim(fields[0]));
    std::vector<double> values(width);
    for (std::size_t c = 0; c < width; ++c) values[c] = parse_number(fields[c + 1], line_no, c + 1);
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw DataError("UCR input contains no series");

  std::map<double, std::string> distinct;
  for (std::size_t i = 0; i < raw_labels.size(); ++i) distinct.emplace(raw_labels[i], label_tokens[i]);
  std::map<double, int> index;
  Dataset ds;
  for (const auto& [value, token] : distinct) {
    index.emplace(value, static_cast<int>(ds.label_names.size()));
    ds.label_names.push_back(token);
  }
  ds.num_classes = distinct.size();

  const std::size_t n = rows.size();
  Tensor raw = Tensor::matrix(n, width);
  for (std::size_t r = 0; r < n; ++r) {
    std::copy(rows[r].begin(), rows[r].end(), raw.row(r).begin());
    ds.labels.push_back(index.at(raw_labels[r]));
  }

  Normalization& norm = ds.normalization;
  norm.kind = Normalization::Kind::per_series_z;
  for (std::size_t r = 0; r < n; ++r) {
    auto row = raw.row(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(width);
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(width));
    norm.series_mean.push_back(mean);
    norm.series_std.push_back(sd);
    for (std::size_t c = 0; c < width; ++c) {
      const double z = sd > 0.0 ? (row[c] - mean) / sd : 0.0;
      if (std::abs(z) > norm.clamp_bound) norm.clamped.push_back({r, c, z});
    }
  }
  ds.samples = norm.normalize(raw);
  return ds;
}

void align_labels(const Dataset& reference, Dataset& other) {
  std::map<std::string, int> index;
  for (std::size_t k = 0; k < reference.label_names.size(); ++k) {
    index.emplace(reference.label_names[k], static_cast<int>(k));
  }
  for (int& y : other.labels) {
    const std::string& name = other.label_names.at(static_cast<std::size_t>(y));
    auto it = index.find(name);
    if (it == index.end()) throw DataError("label \"" + name + "\" not present in training split");
    y = it->second;
  }
  other.label_names = reference.label_names;
  other.num_classes = reference.num_classes;
}

}  // namespace reprog
