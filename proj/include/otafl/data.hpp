#pragma once

// IDX loading, synthetic Gaussian-mixture data and non-i.i.d. partitioning.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "otafl/error.hpp"
#include "otafl/model.hpp"
#include "otafl/rng.hpp"

namespace otafl {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

namespace detail {

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t off,
                               const std::string& what) {
  if (buf.size() < off + 4) throw FormatError(what + ": truncated header");
  return (std::uint32_t{buf[off]} << 24) | (std::uint32_t{buf[off + 1]} << 16) |
         (std::uint32_t{buf[off + 2]} << 8) | std::uint32_t{buf[off + 3]};
}

inline void write_be32(std::ofstream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                              static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b.data(), 4);
}

}  // namespace detail

/// Reads an IDX image/label file pair. Pixels are scaled to [0,1].
inline Dataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path, int num_classes = 10) {
  const auto img = detail::read_file(images_path);
  const auto lab = detail::read_file(labels_path);

  const std::string img_name = images_path.string();
  const std::string lab_name = labels_path.string();
  if (detail::read_be32(img, 0, img_name) != kIdxImagesMagic)
    throw FormatError(img_name + ": bad magic number for IDX images");
  if (detail::read_be32(lab, 0, lab_name) != kIdxLabelsMagic)
    throw FormatError(lab_name + ": bad magic number for IDX labels");

  const std::size_t count = detail::read_be32(img, 4, img_name);
  const std::size_t rows = detail::read_be32(img, 8, img_name);
  const std::size_t cols = detail::read_be32(img, 12, img_name);
  const std::size_t label_count = detail::read_be32(lab, 4, lab_name);
  if (count != label_count)
    throw FormatError("IDX count mismatch: " + std::to_string(count) + " images vs " +
                      std::to_string(label_count) + " labels");
  const std::size_t pixels = rows * cols;
  if (img.size() < 16 + count * pixels) throw FormatError(img_name + ": truncated image data");
  if (lab.size() < 8 + count) throw FormatError(lab_name + ": truncated label data");

  Eigen::MatrixXd x(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(pixels));
  std::vector<int> y(count);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t p = 0; p < pixels; ++p)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) = img[16 + i * pixels + p] / 255.0;
    y[i] = lab[8 + i];
    if (y[i] >= num_classes) throw FormatError(lab_name + ": label out of range");
  }
  return Dataset(std::move(x), std::move(y), num_classes);
}

/// Writes raw bytes as an IDX pair (images rows x cols). Used for fixtures and exports.
inline void write_idx(const std::filesystem::path& images_path,
                      const std::filesystem::path& labels_path,
                      const std::vector<std::vector<unsigned char>>& images,
                      const std::vector<unsigned char>& labels, std::uint32_t rows,
                      std::uint32_t cols) {
  std::ofstream img(images_path, std::ios::binary);
  std::ofstream lab(labels_path, std::ios::binary);
  if (!img || !lab) throw FormatError("cannot write IDX files");
  detail::write_be32(img, kIdxImagesMagic);
  detail::write_be32(img, static_cast<std::uint32_t>(images.size()));
  detail::write_be32(img, rows);
  detail::write_be32(img, cols);
  for (const auto& im : images) img.write(reinterpret_cast<const char*>(im.data()),
                                          static_cast<std::streamsize>(im.size()));
  detail::write_be32(lab, kIdxLabelsMagic);
  detail::write_be32(lab, static_cast<std::uint32_t>(labels.size()));
  lab.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

/// Gaussian blobs: one mean per class on the sphere of radius 3, unit covariance.
/// Samples are grouped by class (class 0 first).
inline Dataset synth_dataset(int num_classes, int num_features, int samples_per_class,
                             std::uint64_t seed) {
  if (num_classes < 1 || num_features < 1 || samples_per_class < 1)
    throw ConfigError("synth_dataset: all sizes must be positive");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd means(num_classes, num_features);
  for (int c = 0; c < num_classes; ++c) {
    for (int f = 0; f < num_features; ++f) means(c, f) = normal(rng);
    means.row(c) *= 3.0 / means.row(c).norm();
  }
  const Eigen::Index n = static_cast<Eigen::Index>(num_classes) * samples_per_class;
  Eigen::MatrixXd x(n, num_features);
  std::vector<int> y;
  y.reserve(static_cast<std::size_t>(n));
  Eigen::Index row = 0;
  for (int c = 0; c < num_classes; ++c) {
    for (int s = 0; s < samples_per_class; ++s, ++row) {
      for (int f = 0; f < num_features; ++f) x(row, f) = means(c, f) + normal(rng);
      y.push_back(c);
    }
  }
  return Dataset(std::move(x), std::move(y), num_classes);
}

/// Moves the last `test_per_class` samples of every class into a held-out set.
inline std::pair<Dataset, Dataset> split_per_class(const Dataset& data, int test_per_class) {
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(data.num_classes));
  for (std::size_t i = 0; i < data.size(); ++i) by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
  std::vector<std::size_t> train, test;
  for (const auto& idx : by_class) {
    if (idx.size() < static_cast<std::size_t>(test_per_class))
      throw ConfigError("split_per_class: class has fewer samples than test_per_class");
    const std::size_t cut = idx.size() - static_cast<std::size_t>(test_per_class);
    train.insert(train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cut));
    test.insert(test.end(), idx.begin() + static_cast<std::ptrdiff_t>(cut), idx.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {subset(data, train), subset(data, test)};
}

inline Dataset concatenate(const std::vector<Dataset>& parts) {
  if (parts.empty()) throw ConfigError("concatenate: no datasets");
  Eigen::Index rows = 0;
  for (const auto& p : parts) rows += p.features.rows();
  Dataset out;
  out.num_classes = parts.front().num_classes;
  out.features.resize(rows, parts.front().features.cols());
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    if (p.features.cols() != out.features.cols() || p.num_classes != out.num_classes)
      throw ConfigError("concatenate: incompatible datasets");
    out.features.middleRows(at, p.features.rows()) = p.features;
    at += p.features.rows();
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
  }
  return out;
}

enum class PartitionMode { ClassesPerUser, Dirichlet };

struct PartitionSpec {
  PartitionMode mode = PartitionMode::ClassesPerUser;
  int classes_per_user = 1;
  double beta = 0.5;
  int num_users = 10;
  int samples_per_user = 100;
  std::uint64_t seed = 0;

  void validate(const Dataset& data) const {
    if (num_users < 1) throw ConfigError("partition: num_users must be positive");
    if (samples_per_user < 1) throw ConfigError("partition: samples_per_user must be positive");
    if (mode == PartitionMode::ClassesPerUser &&
        (classes_per_user < 1 || classes_per_user > data.num_classes))
      throw ConfigError("partition: classes_per_user must be in [1, num_classes]");
    if (mode == PartitionMode::Dirichlet && !(beta > 0.0)) throw ConfigError("partition: beta must be > 0");
    if (static_cast<std::size_t>(num_users) * static_cast<std::size_t>(samples_per_user) > data.size())
      throw ConfigError("partition: insufficient samples (" + std::to_string(data.size()) +
                        " available, " + std::to_string(num_users * samples_per_user) + " requested)");
  }
};

/// Splits `total` into integer counts proportional to `props` (largest remainder).
inline std::vector<int> largest_remainder(const std::vector<double>& props, int total) {
  const double sum = std::accumulate(props.begin(), props.end(), 0.0);
  std::vector<int> counts(props.size());
  std::vector<std::pair<double, std::size_t>> rem;
  int assigned = 0;
  for (std::size_t i = 0; i < props.size(); ++i) {
    const double exact = props[i] / sum * total;
    counts[i] = static_cast<int>(std::floor(exact));
    assigned += counts[i];
    rem.emplace_back(exact - counts[i], i);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int k = 0; k < total - assigned; ++k) ++counts[rem[static_cast<std::size_t>(k)].second];
  return counts;
}

/// Non-i.i.d. split into num_users local datasets.
inline std::vector<Dataset> partition(const Dataset& data, const PartitionSpec& spec) {
  spec.validate(data);
  Rng rng(spec.seed);
  const auto nc = static_cast<std::size_t>(data.num_classes);

  std::vector<std::vector<std::size_t>> pools(nc);
  for (std::size_t i = 0; i < data.size(); ++i) pools[static_cast<std::size_t>(data.labels[i])].push_back(i);
  for (auto& p : pools) std::shuffle(p.begin(), p.end(), rng);
  std::vector<std::size_t> cursor(nc, 0);

  auto draw = [&](std::size_t cls) -> std::size_t {
    auto& pool = pools[cls];
    if (pool.empty()) throw ConfigError("partition: class " + std::to_string(cls) + " has no samples");
    if (cursor[cls] < pool.size()) return pool[cursor[cls]++];
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    return pool[pick(rng)];
  };

  std::vector<int> class_perm(nc);
  std::iota(class_perm.begin(), class_perm.end(), 0);
  std::shuffle(class_perm.begin(), class_perm.end(), rng);

  std::vector<Dataset> users;
  users.reserve(static_cast<std::size_t>(spec.num_users));
  for (int m = 0; m < spec.num_users; ++m) {
    std::vector<int> counts(nc, 0);
    if (spec.mode == PartitionMode::ClassesPerUser) {
      const int k = spec.classes_per_user;
      for (int j = 0; j < k; ++j) {
        const auto cls = static_cast<std::size_t>(class_perm[static_cast<std::size_t>((m * k + j) % data.num_classes)]);
        counts[cls] += spec.samples_per_user / k + (j < spec.samples_per_user % k ? 1 : 0);
      }
    } else {
      std::gamma_distribution<double> gamma(spec.beta, 1.0);
      std::vector<double> props(nc);
      for (auto& p : props) p = gamma(rng);
      if (std::accumulate(props.begin(), props.end(), 0.0) <= 0.0) {
        std::uniform_int_distribution<std::size_t> pick(0, nc - 1);
        props[pick(rng)] = 1.0;
      }
      counts = largest_remainder(props, spec.samples_per_user);
    }
    std::vector<std::size_t> idx;
    idx.reserve(static_cast<std::size_t>(spec.samples_per_user));
    for (std::size_t c = 0; c < nc; ++c)
      for (int s = 0; s < counts[c]; ++s) idx.push_back(draw(c));
    users.push_back(subset(data, idx));
  }
  return users;
}

struct LabelDistribution {
  std::vector<double> probs;
};

inline LabelDistribution label_distribution(const Dataset& data, int num_classes) {
  if (data.empty()) throw ConfigError("label_distribution: empty dataset");
  LabelDistribution out{std::vector<double>(static_cast<std::size_t>(num_classes), 0.0)};
  for (int y : data.labels) {
    if (y < 0 || y >= num_classes) throw ConfigError("label_distribution: label out of range");
    out.probs[static_cast<std::size_t>(y)] += 1.0;
  }
  for (auto& p : out.probs) p /= static_cast<double>(data.size());
  return out;
}

}  // namespace otafl
