#include "test_util.hpp"

using namespace logitcal;

namespace {

FormatError::Code decode_code(const std::vector<unsigned char>& b) {
  try {
    decode_weights(b);
  } catch (const FormatError& e) {
    return e.code();
  }
  ADD_FAILURE() << "decode succeeded";
  return FormatError::Code::io;
}

}  // namespace

TEST(Weights, RoundTripEveryArchitecture) {
  const auto dir = testutil::temp_dir("weights");
  for (const auto& id : kZooArchitectures) {
    const auto m = build_architecture(id, 21);
    save_weights(m, dir + "/" + id + ".nnwt");
    const auto back = load_weights(dir + "/" + id + ".nnwt");
    EXPECT_EQ(back.arch_id(), id);
    EXPECT_EQ(back.input_shape(), m.input_shape());
    ASSERT_EQ(back.layer_count(), m.layer_count());
    for (std::size_t i = 0; i < m.layer_count(); ++i) {
      const Layer &a = m.layers()[i], &b = back.layers()[i];
      EXPECT_EQ(a.kind, b.kind);
      EXPECT_EQ(a.stride, b.stride);
      EXPECT_EQ(a.pad, b.pad);
      EXPECT_EQ(a.kernel, b.kernel);
      if (a.has_params()) {
        EXPECT_EQ(a.weight, b.weight);
        EXPECT_EQ(a.bias, b.bias);
      }
    }
    EXPECT_EQ(encode_weights(back), encode_weights(m));
  }
}

TEST(Weights, CnnAFileSize) {
  // header: magic 4 + version 4 + id length 2 + "cnn-a" 5 + rank 1 + 3 dims 12
  // + layer count 4; conv descriptors 16, pool descriptors 8, tensors
  // 1 + 4 * rank + 4 * numel.
  const auto m = build_architecture("cnn-a", 0);
  std::size_t expect = 4 + 4 + 2 + 5 + 1 + 12 + 4;
  for (const auto& l : m.layers()) {
    expect += 1;
    if (l.kind == LayerKind::conv2d) expect += 16;
    if (l.kind == LayerKind::maxpool2d || l.kind == LayerKind::avgpool2d) expect += 8;
    if (l.has_params()) {
      expect += 1 + 4 * l.weight.rank() + 4 * l.weight.size();
      expect += 1 + 4 * l.bias.rank() + 4 * l.bias.size();
    }
  }
  EXPECT_EQ(encode_weights(m).size(), expect);
}

TEST(Weights, BadMagic) {
  auto b = encode_weights(build_architecture("mlp-d", 0));
  b[0] = 'X';
  EXPECT_EQ(decode_code(b), FormatError::Code::bad_magic);
  EXPECT_EQ(decode_code({'N', 'N'}), FormatError::Code::bad_magic);
}

TEST(Weights, VersionMismatch) {
  auto b = encode_weights(build_architecture("mlp-d", 0));
  b[4] ^= 0x7f;
  EXPECT_EQ(decode_code(b), FormatError::Code::version_mismatch);
}

TEST(Weights, TruncationAtEveryPrefixOfTheHeader) {
  const auto full = encode_weights(build_architecture("cnn-c", 0));
  for (std::size_t n : {std::size_t{6}, std::size_t{12}, std::size_t{40}, full.size() / 2,
                        full.size() - 1}) {
    const std::vector<unsigned char> b(full.begin(), full.begin() + static_cast<long>(n));
    EXPECT_EQ(decode_code(b), FormatError::Code::truncated) << n;
  }
}

TEST(Weights, TrailingBytes) {
  auto b = encode_weights(build_architecture("cnn-b", 0));
  b.push_back(0);
  EXPECT_EQ(decode_code(b), FormatError::Code::inconsistent);
}

TEST(Weights, InconsistentLayerStack) {
  // An unknown kind tag in the first layer descriptor.
  const auto m = build_architecture("mlp-d", 0);
  auto b = encode_weights(m);
  const std::size_t first_tag = 4 + 4 + 2 + 5 + 1 + 12 + 4;
  b[first_tag] = 99;
  EXPECT_EQ(decode_code(b), FormatError::Code::inconsistent);
}

TEST(Weights, MissingFile) {
  try {
    load_weights("/nonexistent/dir/model.nnwt");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.code(), FormatError::Code::io);
  }
}
