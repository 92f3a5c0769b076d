#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nunet/image.hpp"

namespace nunet {

enum class NiftiDatatype : std::int16_t
{
  Uint8 = 2,
  Int16 = 4,
  Float32 = 16,
};

int bitpix_of(NiftiDatatype t);

/// Fields of the 348-byte NIfTI-1 header that this library interprets.
struct NiftiHeader
{
  std::int32_t sizeof_hdr = 348;
  std::array<std::int16_t, 8> dim{};
  std::int16_t datatype = 0;
  std::int16_t bitpix = 0;
  std::array<float, 8> pixdim{};
  float vox_offset = 352.0f;
  float scl_slope = 1.0f;
  float scl_inter = 0.0f;
  std::int16_t qform_code = 0;
  std::int16_t sform_code = 0;
  std::array<char, 4> magic{'n', '+', '1', '\0'};

  std::size_t voxel_count() const;
};

class NiftiError : public std::runtime_error
{
public:
  enum class Kind
  {
    Io,
    TruncatedHeader,
    HeaderSize,
    BadMagic,
    TwoFileFormat,
    BigEndian,
    UnsupportedDatatype,
    InconsistentDims,
    BadSpacing,
    BadVoxOffset,
    TruncatedPayload,
    InvalidMaskCodes,
    ValueRange,
  };

  NiftiError(Kind kind, std::size_t byte_offset, const std::string& what)
    : std::runtime_error(what + " (byte offset " + std::to_string(byte_offset) + ")"), kind_(kind),
      offset_(byte_offset)
  {
  }

  Kind kind() const { return kind_; }
  std::size_t byte_offset() const { return offset_; }

private:
  Kind kind_;
  std::size_t offset_;
};

const char* to_string(NiftiError::Kind k);

/// Parses and validates a header from the first 348 bytes of `bytes`.
NiftiHeader parse_nifti_header(std::span<const std::uint8_t> bytes);

/// Serializes a header to exactly 348 bytes.
std::vector<std::uint8_t> encode_nifti_header(const NiftiHeader& h);

/// dim[1] = columns, dim[2] = rows, dim[3] = slices, dim[4] = frames.
/// Intensities are scaled by scl_slope / scl_inter (slope 0 means 1).
/// pixdim[3] becomes the slice thickness with zero gap.
CineStack decode_nifti_image(std::span<const std::uint8_t> bytes);

/// Integer datatypes only, raw codes, all in {0..4}.
MaskStack decode_nifti_mask(std::span<const std::uint8_t> bytes);

CineStack read_nifti(const std::string& path);
MaskStack read_nifti_mask(const std::string& path);
NiftiHeader read_nifti_header(const std::string& path);

/// 348-byte header, 4 zero extension bytes, little-endian payload at 352.
/// pixdim[3] is written as thickness + gap.
std::vector<std::uint8_t> encode_nifti(const CineStack& stack, NiftiDatatype type, double dt = 1.0);
std::vector<std::uint8_t> encode_nifti(const MaskStack& stack, NiftiDatatype type = NiftiDatatype::Uint8,
                                       double dt = 1.0);

void write_nifti(const CineStack& stack, const std::string& path, NiftiDatatype type, double dt = 1.0);
void write_nifti(const MaskStack& stack, const std::string& path, NiftiDatatype type = NiftiDatatype::Uint8,
                 double dt = 1.0);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace nunet
