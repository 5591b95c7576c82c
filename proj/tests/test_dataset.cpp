#include <fstream>

#include "test_util.hpp"

using namespace logitcal;

namespace {

const std::string kData = LOGITCAL_TEST_DATA;

DatasetSpec small_spec(std::uint64_t seed = 0) {
  DatasetSpec s;
  s.train_per_class = 200;
  s.test_per_class = 5;
  s.seed = seed;
  return s;
}

std::vector<unsigned char> read_bytes(const std::string& p) { return detail::read_file(p); }

std::string write_bytes(const std::string& dir, const std::string& name,
                        const std::vector<unsigned char>& b) {
  const std::string p = dir + "/" + name;
  detail::write_file(p, b);
  return p;
}

}  // namespace

TEST(Synthetic, CountsAndUniformHistogram) {
  const auto d = generate_synthetic_dataset(small_spec());
  ASSERT_EQ(d.train.size(), 2000u);
  std::vector<std::size_t> hist(10);
  for (auto l : d.train.labels) ++hist.at(l);
  for (std::size_t h : hist) EXPECT_EQ(h, 200u);
  for (const auto& img : d.train.images) {
    ASSERT_EQ(img.shape(), (Shape{1, 32, 32}));
    for (float v : img.span()) {
      ASSERT_GE(v, 0.0f);
      ASSERT_LE(v, 255.0f);
      ASSERT_EQ(v, std::round(v));
    }
  }
}

TEST(Synthetic, SameSeedSameBytesDifferentSeedDiffers) {
  const auto a = generate_synthetic_dataset(small_spec(0));
  const auto b = generate_synthetic_dataset(small_spec(0));
  const auto c = generate_synthetic_dataset(small_spec(1));
  EXPECT_EQ(a.train.checksum(), b.train.checksum());
  EXPECT_EQ(a.test.checksum(), b.test.checksum());
  EXPECT_NE(a.train.checksum(), c.train.checksum());
}

TEST(Synthetic, RejectsBadClassCount) {
  DatasetSpec s = small_spec();
  s.class_count = 1;
  EXPECT_THROW(generate_synthetic_dataset(s), Error);
  s.class_count = 11;
  EXPECT_THROW(generate_synthetic_dataset(s), Error);
}

TEST(Idx, IngestFixture) {
  const auto d = ingest_idx(kData + "/fixture-images.idx", kData + "/fixture-labels.idx");
  ASSERT_EQ(d.size(), 4u);
  EXPECT_EQ(d.images[0].shape(), (Shape{1, 28, 28}));
  EXPECT_EQ(d.labels, (std::vector<std::uint32_t>{3, 1, 4, 1}));
  // pixel = (37 i + 9 r + 3 c) mod 256
  EXPECT_EQ(d.images[2].at(0, 5, 7), static_cast<float>((37 * 2 + 9 * 5 + 3 * 7) % 256));
  EXPECT_EQ(d.images[3].at(0, 27, 27), static_cast<float>((37 * 3 + 9 * 27 + 3 * 27) % 256));
}

TEST(Idx, WrongMagicNamesBothValues) {
  const auto dir = testutil::temp_dir("idx-magic");
  auto b = read_bytes(kData + "/fixture-images.idx");
  b[3] = 0x01;
  const auto p = write_bytes(dir, "img.idx", b);
  try {
    ingest_idx(p, kData + "/fixture-labels.idx");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.code(), FormatError::Code::bad_magic);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("00000803"), std::string::npos) << msg;
    EXPECT_NE(msg.find("00000801"), std::string::npos) << msg;
  }
}

TEST(Idx, TruncatedPayload) {
  const auto dir = testutil::temp_dir("idx-trunc");
  auto b = read_bytes(kData + "/fixture-images.idx");
  b.resize(b.size() - 1);
  const auto p = write_bytes(dir, "img.idx", b);
  try {
    ingest_idx(p, kData + "/fixture-labels.idx");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.code(), FormatError::Code::truncated);
  }
  const auto short_header = write_bytes(dir, "hdr.idx", {0, 0, 8});
  EXPECT_THROW(ingest_idx(short_header, kData + "/fixture-labels.idx"), FormatError);
}

TEST(Idx, CountMismatch) {
  const auto dir = testutil::temp_dir("idx-count");
  auto b = read_bytes(kData + "/fixture-labels.idx");
  b[7] = 3;
  const auto p = write_bytes(dir, "lab.idx", b);
  try {
    ingest_idx(kData + "/fixture-images.idx", p);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.code(), FormatError::Code::inconsistent);
  }
}

TEST(Idx, LabelOutOfRange) {
  EXPECT_THROW(ingest_idx(kData + "/fixture-images.idx", kData + "/fixture-labels.idx", 4),
               FormatError);
}

TEST(Idx, MissingFileIsIoError) {
  try {
    ingest_idx(kData + "/does-not-exist.idx", kData + "/fixture-labels.idx");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.code(), FormatError::Code::io);
  }
}

TEST(Idx, RoundTripIsByteIdentical) {
  const auto dir = testutil::temp_dir("idx-rt");
  const auto d = ingest_idx(kData + "/fixture-images.idx", kData + "/fixture-labels.idx");
  export_idx(d, dir + "/i.idx", dir + "/l.idx");
  EXPECT_EQ(read_bytes(dir + "/i.idx"), read_bytes(kData + "/fixture-images.idx"));
  EXPECT_EQ(read_bytes(dir + "/l.idx"), read_bytes(kData + "/fixture-labels.idx"));
  const auto again = ingest_idx(dir + "/i.idx", dir + "/l.idx");
  EXPECT_EQ(again.checksum(), d.checksum());
}

TEST(Idx, SyntheticRoundTrip) {
  const auto dir = testutil::temp_dir("idx-synth");
  DatasetSpec s = small_spec();
  s.train_per_class = 3;
  const auto d = generate_synthetic_dataset(s).train;
  export_idx(d, dir + "/i.idx", dir + "/l.idx");
  EXPECT_EQ(ingest_idx(dir + "/i.idx", dir + "/l.idx").checksum(), d.checksum());
}

TEST(LoadDataset, IdxSource) {
  DatasetSpec s;
  s.source = DataSource::idx_files;
  s.train_images = s.test_images = kData + "/fixture-images.idx";
  s.train_labels = s.test_labels = kData + "/fixture-labels.idx";
  const auto d = load_dataset(s);
  EXPECT_EQ(d.train.size(), 4u);
  EXPECT_EQ(d.test.checksum(), d.train.checksum());
}
