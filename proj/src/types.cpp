#include "gtforge/types.hpp"

#include <cmath>

namespace gtforge {

std::uint8_t class_code(std::string_view name) {
  for (std::size_t i = 0; i < kClassNames.size(); ++i)
    if (kClassNames[i] == name) return static_cast<std::uint8_t>(i);
  if (name == "ignore") return kLabelIgnore;
  if (name == "free") return kLabelFree;
  throw Error(ErrorKind::unknown_label_name,
              "unknown class name: " + std::string(name));
}

std::string_view class_name(std::uint8_t code) {
  if (code < kClassNames.size()) return kClassNames[code];
  if (code == kLabelIgnore) return "ignore";
  if (code == kLabelFree) return "free";
  throw Error(ErrorKind::invalid_label,
              "label code outside table: " + std::to_string(code));
}

bool is_valid_label(std::uint8_t code) {
  return code < kNumClasses || code == kLabelIgnore || code == kLabelFree;
}

void PointCloud::validate() const {
  const std::size_t n = positions.size();
  auto check = [n](std::size_t got, const char* column) {
    if (got != 0 && got != n)
      throw Error(ErrorKind::size_mismatch,
                  std::string("attribute column '") + column +
                      "' length does not match point count");
  };
  check(intensity.size(), "intensity");
  check(ring.size(), "ring");
  check(point_time_s.size(), "point_time_s");
  check(power.size(), "power");
  check(snr.size(), "snr");
  check(v_xr.size(), "v_xr");
  check(v_yr.size(), "v_yr");
  check(t_diff.size(), "t_diff");
  check(labels.size(), "labels");
  for (const auto& p : positions)
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
      throw Error(ErrorKind::non_finite, "cloud position is NaN or Inf");
}

namespace {

template <typename T>
void filter_column(std::vector<T>& col, const std::vector<bool>& mask) {
  if (col.empty()) return;
  std::vector<T> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out.push_back(col[i]);
  col = std::move(out);
}

template <typename T>
void subset_column(std::vector<T>& col, const std::vector<std::size_t>& idx) {
  if (col.empty()) return;
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(col[i]);
  col = std::move(out);
}

template <typename T>
void append_column(std::vector<T>& a, std::size_t a_count,
                   const std::vector<T>& b, std::size_t b_count) {
  if (a.empty() && b.empty()) return;
  // Pad with defaults when one side lacks the column.
  if (a.empty()) a.assign(a_count, T{});
  if (b.empty()) {
    a.resize(a_count + b_count, T{});
    return;
  }
  a.insert(a.end(), b.begin(), b.end());
}

}  // namespace

PointCloud filter_cloud(const PointCloud& cloud, const std::vector<bool>& mask) {
  if (mask.size() != cloud.count())
    throw Error(ErrorKind::size_mismatch,
                "mask length does not match point count");
  PointCloud out = cloud;
  filter_column(out.positions, mask);
  filter_column(out.intensity, mask);
  filter_column(out.ring, mask);
  filter_column(out.point_time_s, mask);
  filter_column(out.power, mask);
  filter_column(out.snr, mask);
  filter_column(out.v_xr, mask);
  filter_column(out.v_yr, mask);
  filter_column(out.t_diff, mask);
  filter_column(out.labels, mask);
  return out;
}

PointCloud subset_cloud(const PointCloud& cloud,
                        const std::vector<std::size_t>& indices) {
  PointCloud out = cloud;
  subset_column(out.positions, indices);
  subset_column(out.intensity, indices);
  subset_column(out.ring, indices);
  subset_column(out.point_time_s, indices);
  subset_column(out.power, indices);
  subset_column(out.snr, indices);
  subset_column(out.v_xr, indices);
  subset_column(out.v_yr, indices);
  subset_column(out.t_diff, indices);
  subset_column(out.labels, indices);
  return out;
}

void append_cloud(PointCloud& a, const PointCloud& b) {
  const std::size_t an = a.count();
  const std::size_t bn = b.count();
  if (an > 0 && bn > 0 && a.has_labels() != b.has_labels())
    throw Error(ErrorKind::label_length_mismatch,
                "cannot append a labeled cloud onto an unlabeled one");
  a.positions.insert(a.positions.end(), b.positions.begin(), b.positions.end());
  append_column(a.intensity, an, b.intensity, bn);
  append_column(a.ring, an, b.ring, bn);
  append_column(a.point_time_s, an, b.point_time_s, bn);
  append_column(a.power, an, b.power, bn);
  append_column(a.snr, an, b.snr, bn);
  append_column(a.v_xr, an, b.v_xr, bn);
  append_column(a.v_yr, an, b.v_yr, bn);
  append_column(a.t_diff, an, b.t_diff, bn);
  append_column(a.labels, an, b.labels, bn);
}

}  // namespace gtforge
