#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <random>

#include "nunet/nifti.hpp"

using namespace nunet;
using Kind = NiftiError::Kind;

namespace {

CineStack random_cine(std::mt19937& rng, float lo, float hi, bool integral)
{
  std::uniform_real_distribution<float> u(lo, hi);
  std::vector<Image> planes;
  for (int k = 0; k < 2 * 3; ++k) {
    Plane<float> p(5, 7);
    for (Eigen::Index i = 0; i < p.size(); ++i)
      p.data()[i] = integral ? std::round(u(rng)) : u(rng);
    planes.emplace_back(p, PixelSpacing{1.25, 1.5});
  }
  return CineStack(2, 3, planes, 8.0);
}

template <class T>
void poke(std::vector<std::uint8_t>& bytes, std::size_t at, T v)
{
  std::memcpy(bytes.data() + at, &v, sizeof v);
}

Kind kind_of(const std::vector<std::uint8_t>& bytes, bool mask = false)
{
  try {
    if (mask)
      decode_nifti_mask(bytes);
    else
      decode_nifti_image(bytes);
  } catch (const NiftiError& e) {
    return e.kind();
  }
  FAIL("no NiftiError raised");
  return Kind::Io;
}

std::filesystem::path temp_path(const std::string& name)
{
  return std::filesystem::temp_directory_path() / ("nunet_test_" + name);
}

}  // namespace

TEST_CASE("round trip for every supported datatype")
{
  std::mt19937 rng(5);
  const CineStack f = random_cine(rng, -1000.0f, 1000.0f, false);
  const CineStack back = decode_nifti_image(encode_nifti(f, NiftiDatatype::Float32));
  CHECK(back.planes() == f.planes());
  CHECK(back.n_slices() == 2);
  CHECK(back.n_frames() == 3);
  CHECK(back.spacing().dz == 8.0);

  const CineStack i16 = random_cine(rng, -32768.0f, 32767.0f, true);
  CHECK(decode_nifti_image(encode_nifti(i16, NiftiDatatype::Int16)).planes() == i16.planes());

  const CineStack u8 = random_cine(rng, 0.0f, 255.0f, true);
  const auto bytes = encode_nifti(u8, NiftiDatatype::Uint8);
  CHECK(bytes.size() == 352 + 5 * 7 * 2 * 3);
  CHECK(decode_nifti_image(bytes).planes() == u8.planes());

  std::vector<LabelMask> masks;
  for (int k = 0; k < 6; ++k) {
    LabelMask::plane_type q(5, 7);
    for (Eigen::Index i = 0; i < q.size(); ++i)
      q.data()[i] = static_cast<std::uint8_t>(rng() % 5);
    masks.emplace_back(q, PixelSpacing{1.25, 1.5});
  }
  const MaskStack ms(2, 3, masks, 6.0, 2.0);
  const MaskStack mback = decode_nifti_mask(encode_nifti(ms));
  CHECK(mback.planes() == ms.planes());
  CHECK(mback.spacing().dz == 8.0);
  CHECK(decode_nifti_mask(encode_nifti(ms, NiftiDatatype::Int16)).planes() == ms.planes());
}

TEST_CASE("float32 header fields")
{
  std::mt19937 rng(6);
  const auto bytes = encode_nifti(random_cine(rng, 0, 1, false), NiftiDatatype::Float32, 0.04);
  const auto h = parse_nifti_header(bytes);
  CHECK(h.datatype == 16);
  CHECK(h.bitpix == 32);
  CHECK(h.dim[0] == 4);
  CHECK(h.dim[1] == 7);
  CHECK(h.dim[2] == 5);
  CHECK(h.dim[3] == 2);
  CHECK(h.dim[4] == 3);
  CHECK(h.vox_offset == 352.0f);
  CHECK(h.pixdim[1] == 1.25f);
  CHECK(h.pixdim[2] == 1.5f);
  CHECK(h.pixdim[4] == 0.04f);
  CHECK(std::memcmp(h.magic.data(), "n+1\0", 4) == 0);
  CHECK(encode_nifti_header(h) == std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 348));
}

TEST_CASE("independent byte fixture")
{
  const CineStack s = read_nifti(std::string(NUNET_FIXTURE_DIR) + "/float32_2x2x1x1.nii");
  REQUIRE(s.n_slices() == 1);
  REQUIRE(s.n_frames() == 1);
  const Image& img = s.at(0, 0);
  REQUIRE(img.width() == 2);
  REQUIRE(img.height() == 2);
  // stored 1 2 / 3 4, scaled by 2x + 1
  CHECK(img(0, 0) == 3.0f);
  CHECK(img(0, 1) == 5.0f);
  CHECK(img(1, 0) == 7.0f);
  CHECK(img(1, 1) == 9.0f);
  CHECK(img.spacing().dx == 1.5);
  CHECK(img.spacing().dy == 2.0);
  CHECK(s.spacing().dz == 8.0);
}

TEST_CASE("malformed files are rejected with a kind and offset")
{
  std::mt19937 rng(7);
  const auto good = encode_nifti(random_cine(rng, 0, 200, true), NiftiDatatype::Uint8);

  auto b = good;
  std::memcpy(b.data() + 344, "ni1\0", 4);
  CHECK(kind_of(b) == Kind::TwoFileFormat);

  b = good;
  std::memcpy(b.data() + 344, "abc\0", 4);
  CHECK(kind_of(b) == Kind::BadMagic);
  try {
    decode_nifti_image(b);
  } catch (const NiftiError& e) {
    CHECK(e.byte_offset() == 344);
  }

  CHECK(kind_of(std::vector<std::uint8_t>(good.begin(), good.begin() + 200)) == Kind::TruncatedHeader);
  CHECK(kind_of(std::vector<std::uint8_t>(good.begin(), good.end() - 1)) == Kind::TruncatedPayload);

  b = good;
  const std::uint8_t be[4] = {0, 0, 0x01, 0x5c};  // 348 big-endian
  std::memcpy(b.data(), be, 4);
  CHECK(kind_of(b) == Kind::BigEndian);

  b = good;
  poke<std::int32_t>(b, 0, 540);
  CHECK(kind_of(b) == Kind::HeaderSize);

  b = good;
  poke<std::int16_t>(b, 70, 64);  // float64
  poke<std::int16_t>(b, 72, 64);
  CHECK(kind_of(b) == Kind::UnsupportedDatatype);

  b = good;
  poke<std::int16_t>(b, 72, 16);
  CHECK(kind_of(b) == Kind::UnsupportedDatatype);

  b = good;
  poke<std::int16_t>(b, 40, 2);
  CHECK(kind_of(b) == Kind::InconsistentDims);

  b = good;
  poke<float>(b, 80, 0.0f);
  CHECK(kind_of(b) == Kind::BadSpacing);

  b = good;
  poke<float>(b, 108, 100.0f);
  CHECK(kind_of(b) == Kind::BadVoxOffset);
}

TEST_CASE("mask decoding enforces label codes")
{
  std::mt19937 rng(8);
  auto bytes = encode_nifti(random_cine(rng, 0, 4, true), NiftiDatatype::Uint8);
  CHECK_NOTHROW(decode_nifti_mask(bytes));
  bytes[352 + 10] = 5;
  CHECK(kind_of(bytes, true) == Kind::InvalidMaskCodes);

  // float payloads are not label maps
  const auto f = encode_nifti(random_cine(rng, 0, 4, true), NiftiDatatype::Float32);
  CHECK(kind_of(f, true) == Kind::UnsupportedDatatype);
}

TEST_CASE("integer encoding checks the value range")
{
  std::mt19937 rng(9);
  CHECK_THROWS_AS(encode_nifti(random_cine(rng, 300, 400, true), NiftiDatatype::Uint8), NiftiError);
  CHECK_THROWS_AS(encode_nifti(random_cine(rng, 40000, 50000, true), NiftiDatatype::Int16), NiftiError);
}

TEST_CASE("file wrappers")
{
  std::mt19937 rng(10);
  const CineStack s = random_cine(rng, 0, 255, true);
  const auto path = temp_path("roundtrip.nii").string();
  write_nifti(s, path, NiftiDatatype::Uint8);
  CHECK(std::filesystem::file_size(path) == 352 + 5 * 7 * 6);
  CHECK(read_nifti(path).planes() == s.planes());
  CHECK(read_nifti_header(path).datatype == 2);
  std::filesystem::remove(path);
  try {
    read_nifti(temp_path("missing.nii").string());
    FAIL("expected an I/O error");
  } catch (const NiftiError& e) {
    CHECK(e.kind() == Kind::Io);
  }
}
