#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "oracles.hpp"
#include "otafl/data.hpp"

using namespace otafl;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("otafl_data_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
  static inline int counter_ = 0;
};

// Independent byte-level writer: big-endian header words, then raw bytes.
void put_be32(std::ofstream& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.put(static_cast<char>((v >> shift) & 0xff));
}

void write_fixture(const fs::path& img, const fs::path& lab, std::uint32_t img_magic, std::uint32_t lab_magic,
                   std::uint32_t img_count, std::uint32_t lab_count, const std::vector<unsigned char>& pixels,
                   const std::vector<unsigned char>& labels) {
  std::ofstream i(img, std::ios::binary), l(lab, std::ios::binary);
  put_be32(i, img_magic);
  put_be32(i, img_count);
  put_be32(i, 2);
  put_be32(i, 2);
  for (auto p : pixels) i.put(static_cast<char>(p));
  put_be32(l, lab_magic);
  put_be32(l, lab_count);
  for (auto y : labels) l.put(static_cast<char>(y));
}

const std::vector<unsigned char> kPixels{0, 255, 51, 102, 17, 34, 68, 136, 1, 2, 3, 4};
const std::vector<unsigned char> kLabels{7, 0, 3};

std::vector<int> label_counts(const Dataset& d) {
  std::vector<int> c(static_cast<std::size_t>(d.num_classes), 0);
  for (int y : d.labels) ++c[static_cast<std::size_t>(y)];
  return c;
}

int nonzero(const LabelDistribution& l) {
  return static_cast<int>(std::count_if(l.probs.begin(), l.probs.end(), [](double p) { return p > 0.0; }));
}

}  // namespace

TEST(LoadIdx, ThreeSampleFixtureRoundTrip) {
  TempDir dir;
  write_fixture(dir / "img", dir / "lab", 0x803, 0x801, 3, 3, kPixels, kLabels);
  const Dataset d = load_idx(dir / "img", dir / "lab");
  ASSERT_EQ(d.size(), 3u);
  ASSERT_EQ(d.num_features(), 4);
  EXPECT_EQ(d.labels, (std::vector<int>{7, 0, 3}));
  for (int i = 0; i < 3; ++i)
    for (int p = 0; p < 4; ++p) EXPECT_DOUBLE_EQ(d.features(i, p), kPixels[static_cast<std::size_t>(4 * i + p)] / 255.0);
  EXPECT_DOUBLE_EQ(d.features(0, 1), 1.0);
}

TEST(LoadIdx, WriterProducesSameBytesAsFixture) {
  TempDir dir;
  write_fixture(dir / "img_ref", dir / "lab_ref", 0x803, 0x801, 3, 3, kPixels, kLabels);
  std::vector<std::vector<unsigned char>> images;
  for (int i = 0; i < 3; ++i) images.emplace_back(kPixels.begin() + 4 * i, kPixels.begin() + 4 * (i + 1));
  write_idx(dir / "img", dir / "lab", images, kLabels, 2, 2);
  auto bytes = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::vector<char>(std::istreambuf_iterator<char>(in), {});
  };
  EXPECT_EQ(bytes(dir / "img"), bytes(dir / "img_ref"));
  EXPECT_EQ(bytes(dir / "lab"), bytes(dir / "lab_ref"));
}

TEST(LoadIdx, LabelsFileWithImageMagicIsFormatError) {
  TempDir dir;
  write_fixture(dir / "img", dir / "lab", 0x803, 0x803, 3, 3, kPixels, kLabels);
  EXPECT_THROW(load_idx(dir / "img", dir / "lab"), FormatError);
}

TEST(LoadIdx, BadImageMagic) {
  TempDir dir;
  write_fixture(dir / "img", dir / "lab", 0x801, 0x801, 3, 3, kPixels, kLabels);
  EXPECT_THROW(load_idx(dir / "img", dir / "lab"), FormatError);
}

TEST(LoadIdx, CountMismatch) {
  TempDir dir;
  write_fixture(dir / "img", dir / "lab", 0x803, 0x801, 3, 2, kPixels, {7, 0});
  EXPECT_THROW(load_idx(dir / "img", dir / "lab"), FormatError);
}

TEST(LoadIdx, TruncatedFiles) {
  TempDir dir;
  write_fixture(dir / "img", dir / "lab", 0x803, 0x801, 3, 3, std::vector<unsigned char>(kPixels.begin(), kPixels.end() - 1),
                kLabels);
  EXPECT_THROW(load_idx(dir / "img", dir / "lab"), FormatError);
  write_fixture(dir / "img", dir / "lab", 0x803, 0x801, 3, 3, kPixels, {7, 0});
  EXPECT_THROW(load_idx(dir / "img", dir / "lab"), FormatError);
  std::ofstream(dir / "short", std::ios::binary).put('\x00');
  EXPECT_THROW(load_idx(dir / "short", dir / "lab"), FormatError);
  EXPECT_THROW(load_idx(dir / "missing", dir / "lab"), FormatError);
}

TEST(LoadIdx, MnistTrainingCorpus) {
  const char* root = std::getenv("OTAFL_MNIST_DIR");
  if (!root) GTEST_SKIP() << "set OTAFL_MNIST_DIR to the directory holding the MNIST IDX files";
  const fs::path dir(root);
  const Dataset d = load_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
  EXPECT_EQ(d.size(), 60000u);
  EXPECT_EQ(d.num_features(), 784);
  EXPECT_GE(d.features.minCoeff(), 0.0);
  EXPECT_LE(d.features.maxCoeff(), 1.0);
}

TEST(SynthDataset, DeterministicPerSeed) {
  const Dataset a = synth_dataset(2, 2, 50, 42), b = synth_dataset(2, 2, 50, 42), c = synth_dataset(2, 2, 50, 43);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_NE(a.features, c.features);
}

TEST(SynthDataset, ExactClassCounts) {
  const Dataset d = synth_dataset(7, 3, 13, 1);
  EXPECT_EQ(label_counts(d), std::vector<int>(7, 13));
}

TEST(SynthDataset, ClassMeansLieNearRadiusThree) {
  const Dataset d = synth_dataset(3, 6, 4000, 9);
  for (int c = 0; c < 3; ++c) {
    const Eigen::RowVectorXd mean = d.features.middleRows(c * 4000, 4000).colwise().mean();
    EXPECT_NEAR(mean.norm(), 3.0, 0.1);
  }
}

TEST(SynthDataset, ReferenceClassifierFitsTrainingSet) {
  // Plain full-batch gradient descent on the scalar oracle.
  for (auto [classes, features] : {std::pair{2, 2}, std::pair{10, 50}}) {
    const Dataset d = synth_dataset(classes, features, classes == 2 ? 50 : 100, 5);
    std::vector<double> theta(static_cast<std::size_t>(shape_of(d).param_count()), 0.0);
    for (int it = 0; it < 300; ++it) {
      const auto g = oracle::gradient(theta, d);
      for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= 0.5 * g[i];
    }
    EXPECT_GE(accuracy(oracle::to_model(theta, shape_of(d).full_dim()), d), 0.95) << classes << "x" << features;
  }
}

TEST(SynthDataset, RejectsNonPositiveSizes) {
  EXPECT_THROW(synth_dataset(0, 2, 5, 1), ConfigError);
  EXPECT_THROW(synth_dataset(2, 2, 0, 1), ConfigError);
}

TEST(SplitPerClass, HoldsOutTailOfEachClass) {
  const Dataset d = synth_dataset(3, 2, 10, 1);
  const auto [train, test] = split_per_class(d, 4);
  EXPECT_EQ(label_counts(train), std::vector<int>(3, 6));
  EXPECT_EQ(label_counts(test), std::vector<int>(3, 4));
  EXPECT_EQ(test.features.row(0), d.features.row(6));
}

TEST(Partition, SingleClassUsersCoverAllClasses) {
  const Dataset d = synth_dataset(10, 2, 50, 1);
  const auto users = partition(d, {.classes_per_user = 1, .num_users = 10, .samples_per_user = 40, .seed = 3});
  ASSERT_EQ(users.size(), 10u);
  std::set<int> seen;
  for (const auto& u : users) {
    const auto dist = label_distribution(u, 10);
    ASSERT_EQ(nonzero(dist), 1);
    seen.insert(u.labels.front());
  }
  EXPECT_EQ(seen.size(), 10u);
}

TEST(Partition, TwoClassesPerUserGivesTwoNonzeroEntries) {
  const Dataset d = synth_dataset(10, 2, 100, 1);
  const auto users = partition(d, {.classes_per_user = 2, .num_users = 20, .samples_per_user = 50, .seed = 4});
  for (const auto& u : users) EXPECT_EQ(nonzero(label_distribution(u, 10)), 2);
}

TEST(Partition, FullScaleShapes) {
  const Dataset d = synth_dataset(10, 3, 6000, 2);
  const auto users = partition(d, {.classes_per_user = 1, .num_users = 40, .samples_per_user = 1250, .seed = 1});
  ASSERT_EQ(users.size(), 40u);
  for (const auto& u : users) {
    EXPECT_EQ(u.size(), 1250u);
    EXPECT_EQ(u.num_features(), 3);
  }
}

TEST(Partition, DisjointUntilPoolExhausted) {
  // Tag every sample with a unique first feature to track identity.
  Dataset d = synth_dataset(4, 2, 30, 1);
  for (Eigen::Index i = 0; i < d.features.rows(); ++i) d.features(i, 0) = static_cast<double>(i);
  const auto users = partition(d, {.classes_per_user = 1, .num_users = 4, .samples_per_user = 30, .seed = 2});
  std::set<double> ids;
  for (const auto& u : users)
    for (Eigen::Index i = 0; i < u.features.rows(); ++i) ids.insert(u.features(i, 0));
  EXPECT_EQ(ids.size(), 120u);
}

TEST(Partition, ExhaustedPoolFallsBackToReplacement) {
  const Dataset d = synth_dataset(2, 2, 30, 1);
  const auto users = partition(d, {.classes_per_user = 1, .num_users = 2, .samples_per_user = 25, .seed = 2});
  // Every user sits in one class; with M=2 and 2 classes that is one user per class, so no reuse.
  EXPECT_EQ(users[0].size(), 25u);
  const auto crowded = partition(d, {.classes_per_user = 1, .num_users = 3, .samples_per_user = 20, .seed = 2});
  for (const auto& u : crowded) EXPECT_EQ(u.size(), 20u);
}

TEST(Partition, InsufficientSamples) {
  const Dataset d = synth_dataset(2, 2, 10, 1);
  EXPECT_THROW(partition(d, {.num_users = 3, .samples_per_user = 10}), ConfigError);
  EXPECT_THROW(partition(d, {.classes_per_user = 3, .num_users = 1, .samples_per_user = 1}), ConfigError);
  EXPECT_THROW(partition(d, {.mode = PartitionMode::Dirichlet, .beta = 0.0, .num_users = 1, .samples_per_user = 1}),
               ConfigError);
}

TEST(Partition, LargeBetaIsNearlyUniform) {
  const Dataset d = synth_dataset(10, 2, 1000, 1);
  const auto users = partition(d, {.mode = PartitionMode::Dirichlet, .beta = 1e6, .num_users = 100, .samples_per_user = 97, .seed = 8});
  for (const auto& u : users) {
    const auto dist = label_distribution(u, 10);
    double tv = 0.0;
    for (double p : dist.probs) tv += 0.5 * std::abs(p - 0.1);
    EXPECT_LE(tv, 0.05);
  }
}

TEST(Partition, DirichletReproducibleAndCountsPreserved) {
  const Dataset d = synth_dataset(5, 2, 400, 1);
  for (int trial = 0; trial < 100; ++trial) {
    const PartitionSpec spec{.mode = PartitionMode::Dirichlet, .beta = 0.1 + 0.05 * trial, .num_users = 7,
                             .samples_per_user = 30 + trial, .seed = static_cast<std::uint64_t>(trial)};
    const auto a = partition(d, spec), b = partition(d, spec);
    std::size_t total = 0;
    for (std::size_t m = 0; m < a.size(); ++m) {
      EXPECT_EQ(a[m].labels, b[m].labels);
      EXPECT_EQ(a[m].features, b[m].features);
      total += a[m].size();
      const auto dist = label_distribution(a[m], 5);
      EXPECT_NEAR(std::accumulate(dist.probs.begin(), dist.probs.end(), 0.0), 1.0, 1e-9);
    }
    EXPECT_EQ(total, static_cast<std::size_t>(7 * (30 + trial)));
  }
}

TEST(Partition, ClassesPerUserNeverExceedsK) {
  const Dataset d = synth_dataset(6, 2, 200, 1);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 1 + trial % 6;
    const PartitionSpec spec{.classes_per_user = k, .num_users = 1 + trial % 9, .samples_per_user = 5 + trial % 50,
                             .seed = static_cast<std::uint64_t>(trial)};
    const auto users = partition(d, spec);
    std::size_t total = 0;
    for (const auto& u : users) {
      EXPECT_LE(nonzero(label_distribution(u, 6)), k);
      total += u.size();
    }
    EXPECT_EQ(total, static_cast<std::size_t>(spec.num_users * spec.samples_per_user));
  }
}

TEST(LargestRemainder, SumsExactly) {
  EXPECT_EQ(largest_remainder({1, 1, 1}, 10), (std::vector<int>{4, 3, 3}));
  EXPECT_EQ(largest_remainder({0.5, 0.25, 0.25}, 4), (std::vector<int>{2, 1, 1}));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> p(1 + trial % 10);
    for (auto& x : p) x = u(rng);
    const auto c = largest_remainder(p, trial);
    EXPECT_EQ(std::accumulate(c.begin(), c.end(), 0), trial);
  }
}

TEST(LabelDistribution, Examples) {
  Dataset threes(Eigen::MatrixXd::Zero(4, 1), {3, 3, 3, 3}, 10);
  auto l = label_distribution(threes, 10);
  std::vector<double> onehot(10, 0.0);
  onehot[3] = 1.0;
  EXPECT_EQ(l.probs, onehot);
  Dataset half(Eigen::MatrixXd::Zero(4, 1), {0, 1, 1, 0}, 2);
  EXPECT_EQ(label_distribution(half, 2).probs, (std::vector<double>{0.5, 0.5}));
  EXPECT_THROW(label_distribution(Dataset(Eigen::MatrixXd::Zero(0, 1), {}, 2), 2), ConfigError);
}
